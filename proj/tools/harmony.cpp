#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "harmony/commands.hpp"
#include "harmony/error.hpp"

using namespace harmony;

namespace {

struct FitFlags {
    std::string mode = "supervised";
    std::string space = "lab";
    std::string model = "affine";
};

void add_fit_flags(CLI::App* sub, FitFlags& f) {
    sub->add_option("--mode", f.mode, "supervised | blind | descent")
        ->check(CLI::IsMember({"supervised", "blind", "descent"}))
        ->capture_default_str();
    sub->add_option("--space", f.space, "working colour space: lab | hls")
        ->check(CLI::IsMember({"lab", "hls"}))
        ->capture_default_str();
    sub->add_option("--model", f.model, "affine (gain and offset) | add_only (offset only)")
        ->check(CLI::IsMember({"affine", "add_only"}))
        ->capture_default_str();
}

template <typename Cmd>
void resolve(const FitFlags& f, Cmd& cmd) {
    cmd.mode = harmonize_mode_from_string(f.mode);
    cmd.space = f.space == "hls" ? ColorSpace::HLS : ColorSpace::LAB;
    cmd.model = fit_model_from_string(f.model);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Region-wise image harmonization with editable operator masks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file of flag values, one [section] per subcommand; command-line flags win");

    SynthCommand synth;
    std::uint64_t synth_seed = 0;
    auto* s = app.add_subcommand("synth", "Perturb manifest sources into composite/real benchmark samples");
    s->add_option("--manifest", synth.manifest, "source manifest")->required()->check(CLI::ExistingFile);
    s->add_option("--perturb-config", synth.perturb_config, "perturbation config JSON (overrides manifest)");
    s->add_option("--out", synth.out_dir, "output sample root")->required();
    auto* seed_opt = s->add_option("--seed", synth_seed, "global seed (defaults to the manifest seed)");
    s->add_option("--resolution", synth.resolution, "square output resolution")
        ->check(CLI::Range(kMinResolution, 1 << 14))
        ->capture_default_str();

    GenCorpusCommand gen;
    auto* g = app.add_subcommand("gen-corpus", "Write a procedural image + label corpus and its manifest");
    g->add_option("--count", gen.count, "number of items")->capture_default_str();
    g->add_option("--resolution", gen.resolution, "square resolution")
        ->check(CLI::Range(kMinResolution, 1 << 14))
        ->capture_default_str();
    g->add_option("--seed", gen.seed, "corpus seed")->capture_default_str();
    g->add_option("--out", gen.out_dir, "output directory")->required();

    HarmonizeCommand harm;
    auto* h = app.add_subcommand("harmonize", "Fit operator masks and write <id>.png and <id>.omsk");
    h->add_option("--samples", harm.sample_root, "persisted sample root");
    h->add_option("--id", harm.id, "single sample id under --samples");
    h->add_option("--image", harm.image, "composite image");
    h->add_option("--labels", harm.labels, "label map PNG for --image");
    h->add_option("--target", harm.target, "ground truth for supervised/descent with --image");
    h->add_option("--regions", harm.region_labels, "restrict to these label ids");
    h->add_option("--out", harm.out_dir, "output directory")->required();
    FitFlags harm_fit;
    add_fit_flags(h, harm_fit);

    ApplyCommand ap;
    auto* a = app.add_subcommand("apply", "Apply an OMSK file to an image");
    a->add_option("--image", ap.image, "input image")->required()->check(CLI::ExistingFile);
    a->add_option("--masks", ap.masks, "OMSK file")->required()->check(CLI::ExistingFile);
    a->add_option("--out", ap.out, "output PNG")->required();

    EvalCommand ev;
    auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
    e->add_option("--pred", ev.pred_dir, "directory of <id>.png predictions")->required();
    e->add_option("--gt", ev.gt_dir, "ground-truth directory");
    e->add_option("--composite", ev.composite_dir, "composite directory (baseline row)");
    e->add_option("--samples", ev.samples_root, "sample root supplying gt, composites and true regions");
    e->add_option("--masks", ev.masks_dir, "directory of <id>.omsk files (default: --pred)");
    e->add_option("--report", ev.report, "JSON report path");
    e->add_option("--backend", ev.backend, "perceptual backend name");
    e->add_option("--iou-threshold", ev.iou_threshold, "binarization threshold on |add|")->capture_default_str();

    StatsCommand st;
    auto* t = app.add_subcommand("stats", "Print per-split counts of a manifest");
    t->add_option("manifest", st.manifest, "manifest file")->required();

    ServeCommand sv;
    auto* v = app.add_subcommand("serve", "Serve the operator-mask editor API");
    v->add_option("--host", sv.host, "bind address")->capture_default_str();
    v->add_option("--port", sv.port, "port")->capture_default_str();
    v->add_option("--sessions", sv.session_root, "sample root served as sessions")->required();
    v->add_option("--export-dir", sv.export_dir, "where exports are written");
    FitFlags serve_fit;
    add_fit_flags(v, serve_fit);

    CLI11_PARSE(app, argc, argv);

    if (*s) {
        if (seed_opt->count() > 0) synth.seed = synth_seed;
        return cmd_synth(synth, std::cout, std::cerr);
    }
    if (*g) return cmd_gen_corpus(gen, std::cout, std::cerr);
    if (*h) {
        resolve(harm_fit, harm);
        return cmd_harmonize(harm, std::cout, std::cerr);
    }
    if (*a) return cmd_apply(ap, std::cout, std::cerr);
    if (*e) return cmd_eval(ev, std::cout, std::cerr);
    if (*t) return cmd_stats(st, std::cout, std::cerr);
    if (*v) {
        resolve(serve_fit, sv);
        return cmd_serve(sv, std::cout, std::cerr);
    }
    return 1;
}
