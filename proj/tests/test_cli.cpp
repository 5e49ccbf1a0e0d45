#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "harmony/commands.hpp"
#include "harmony/corpus.hpp"
#include "harmony/metrics.hpp"
#include "harmony/service.hpp"
#include "support.hpp"

using namespace harmony;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testsupport::read_file(e.path().string());
    }
    return out;
}

int run_cli(const std::string& args, const std::string& log_path = "/dev/null") {
    const std::string cmd = std::string(HARMONY_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Procedural corpus of n items plus its manifest.
std::string make_corpus(const testsupport::TempDir& dir, int n, int res = 64) {
    std::ostringstream log, err;
    GenCorpusCommand gen;
    gen.count = n;
    gen.resolution = res;
    gen.seed = 3;
    gen.out_dir = dir / "corpus";
    REQUIRE(cmd_gen_corpus(gen, log, err) == 0);
    return dir / "corpus/manifest.txt";
}

}  // namespace

TEST_CASE("help lists every subcommand") {
    testsupport::TempDir dir("help");
    CHECK(run_cli("--help", dir / "help.txt") == 0);
    const std::string help = testsupport::read_file(dir / "help.txt");
    for (const char* sub : {"synth", "gen-corpus", "harmonize", "apply", "eval", "stats", "serve"}) {
        CHECK(help.find(sub) != std::string::npos);
    }
    CHECK(run_cli("harmonize --mode sideways --out x") != 0);
    CHECK(run_cli("") != 0);
}

TEST_CASE("synth is byte-reproducible and echoes its seed") {
    testsupport::TempDir dir("synth");
    const std::string manifest = make_corpus(dir, 3);
    const std::string args = "synth --manifest " + manifest + " --out " + (dir / "out") + " --seed 11";
    REQUIRE(run_cli(args, dir / "log1.txt") == 0);
    const auto first = tree(dir / "out");
    fs::remove_all(dir / "out");
    REQUIRE(run_cli(args, dir / "log2.txt") == 0);
    CHECK(tree(dir / "out") == first);
    CHECK(testsupport::read_file(dir / "log1.txt") == testsupport::read_file(dir / "log2.txt"));
    CHECK(testsupport::read_file(dir / "log1.txt").find("\"seed\":11") != std::string::npos);
    CHECK(first.count("manifest.txt") == 1);
    CHECK(first.count("synth_report.json") == 1);
    CHECK(first.count("composite/procedural_00002.png") == 1);

    const Manifest out = load_manifest(dir / "out/manifest.txt");
    CHECK(out.samples.size() == 3);
    CHECK(out.seed == 11);

    REQUIRE(run_cli("synth --manifest " + manifest + " --out " + (dir / "other") + " --seed 12") == 0);
    CHECK(testsupport::read_file(dir / "other/composite/procedural_00000.png") !=
          first.at("composite/procedural_00000.png"));
}

TEST_CASE("synth skips sources without foreground and rejects empty manifests") {
    testsupport::TempDir dir("synth_skip");
    make_corpus(dir, 2);
    save_image(ImageBuf(64, 64, ColorSpace::SRGB_01, 0.5f), dir / "corpus/flat.png");
    save_label_png(LabelMap(64, 64), dir / "corpus/flat_l.png");
    {
        std::ofstream m(dir / "corpus/manifest.txt", std::ios::app);
        m << "source procedural flat.png flat_l.png\n";
    }
    std::ostringstream log, err;
    SynthCommand cmd;
    cmd.manifest = dir / "corpus/manifest.txt";
    cmd.out_dir = dir / "out";
    CHECK(cmd_synth(cmd, log, err) == 0);
    CHECK(log.str().find("no foreground") != std::string::npos);
    CHECK(list_samples(dir / "out").size() == 2);

    {
        std::ofstream m(dir / "empty.txt");
        m << "harmony-manifest 1\n";
    }
    cmd.manifest = dir / "empty.txt";
    CHECK(cmd_synth(cmd, log, err) != 0);
    cmd.manifest = dir / "corpus/manifest.txt";
    cmd.resolution = 16;
    CHECK(cmd_synth(cmd, log, err) != 0);
}

TEST_CASE("harmonize, apply and eval") {
    testsupport::TempDir dir("harm");
    std::ostringstream log, err;
    SynthCommand synth;
    synth.manifest = make_corpus(dir, 3);
    synth.out_dir = dir / "samples";
    synth.seed = 5;
    REQUIRE(cmd_synth(synth, log, err) == 0);

    HarmonizeCommand harm;
    harm.sample_root = dir / "samples";
    harm.out_dir = dir / "pred";
    REQUIRE(cmd_harmonize(harm, log, err) == 0);
    CHECK(log.str().find("PSNR composite") != std::string::npos);
    CHECK(fs::exists(dir / "pred/procedural_00001.omsk"));

    // CLI re-apply reproduces the written prediction.
    REQUIRE(run_cli("apply --image " + (dir / "samples/composite/procedural_00001.png") + " --masks " +
                    (dir / "pred/procedural_00001.omsk") + " --out " + (dir / "reapplied.png")) == 0);
    CHECK(testsupport::read_file(dir / "reapplied.png") == testsupport::read_file(dir / "pred/procedural_00001.png"));

    EvalCommand ev;
    ev.pred_dir = dir / "pred";
    ev.samples_root = dir / "samples";
    ev.report = dir / "report.json";
    std::ostringstream table;
    REQUIRE(cmd_eval(ev, table, err) == 0);
    CHECK(table.str().find("Composite") != std::string::npos);
    const auto report = nlohmann::json::parse(testsupport::read_file(ev.report));
    double sum = 0.0;
    for (const auto& row : report["images"]) {
        sum += row["harmonized"]["mse"].get<double>();
        CHECK(row["harmonized"].contains("iou"));
    }
    CHECK(report["aggregate"]["harmonized"]["mse"].get<double>() == doctest::Approx(sum / 3.0));
    CHECK(report["aggregate"]["harmonized"]["mse"].get<double>() <
          report["aggregate"]["composite"]["mse"].get<double>());

    EvalCommand self;
    self.pred_dir = dir / "samples/real";
    self.gt_dir = dir / "samples/real";
    self.report = dir / "self.json";
    REQUIRE(cmd_eval(self, log, err) == 0);
    CHECK(nlohmann::json::parse(testsupport::read_file(self.report))["aggregate"]["harmonized"]["mse"] == 0.0);

    fs::remove(dir / "pred/procedural_00002.png");
    CHECK(cmd_eval(ev, log, err) != 0);
    CHECK(err.str().find("unpaired") != std::string::npos);
}

TEST_CASE("harmonize loose inputs") {
    testsupport::TempDir dir("loose");
    const CorpusItem item = gen_procedural_item(0, 48, 48, 1);
    save_image(item.image, dir / "img.png");
    save_label_png(item.labels, dir / "lbl.png");
    std::ostringstream log, err;

    HarmonizeCommand harm;
    harm.image = dir / "img.png";
    harm.labels = dir / "lbl.png";
    harm.target = dir / "img.png";
    harm.out_dir = dir / "out";
    REQUIRE(cmd_harmonize(harm, log, err) == 0);
    const OperatorMaskSet masks = load_masks(dir / "out/img.omsk");
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < masks.pixel_count(); ++i) {
            CHECK(std::abs(masks.mul(c)[i] - 1.0) < 1e-4);
            CHECK(std::abs(masks.add(c)[i]) < 1e-2);
        }
    }

    harm.labels = dir / "missing.png";
    CHECK(cmd_harmonize(harm, log, err) != 0);
    harm.labels.reset();
    CHECK(cmd_harmonize(harm, log, err) != 0);
    harm.labels = dir / "lbl.png";
    harm.target.reset();
    CHECK(cmd_harmonize(harm, log, err) != 0);
    harm.mode = HarmonizeMode::Blind;
    CHECK(cmd_harmonize(harm, log, err) == 0);
}

TEST_CASE("editor export re-applied through the CLI matches the final preview") {
    testsupport::TempDir dir("roundtrip");
    std::ostringstream log, err;
    SynthCommand synth;
    synth.manifest = make_corpus(dir, 1, 256);
    synth.out_dir = dir / "samples";
    REQUIRE(cmd_synth(synth, log, err) == 0);

    EditorService service(ServiceConfig{dir / "samples", std::nullopt});
    const std::string id = "procedural_00000";
    const int label = service.session_info(id)["regions"][0]["label"];
    service.apply_edit(id, {{"channel", "L"}, {"op", "add"}, {"region", label}, {"value", 6}});
    service.apply_edit(id, {{"channel", "a"}, {"op", "add"}, {"region", label}, {"value", -4}});
    service.apply_edit(id, {{"channel", "b"}, {"op", "mul"}, {"region", label}, {"value", 1.2}});
    service.apply_edit(id, {{"channel", "L"}, {"op", "mul"}, {"value", 0.95}});
    service.apply_edit(id, {{"channel", "b"}, {"op", "add"}, {"value", 2.5}});
    const auto preview = service.preview_png(id);
    const std::string path = service.export_masks(id)["path"];

    REQUIRE(run_cli("apply --image " + (dir / "samples/composite/") + id + ".png --masks " + path + " --out " +
                    (dir / "final.png")) == 0);
    CHECK(testsupport::read_file(dir / "final.png") == std::string(preview.begin(), preview.end()));
}

TEST_CASE("stats") {
    testsupport::TempDir dir("stats");
    const std::string manifest = make_corpus(dir, 4);
    std::ostringstream log, err;
    REQUIRE(cmd_stats({manifest}, log, err) == 0);
    CHECK(log.str().find("procedural") != std::string::npos);
    CHECK(log.str().find("4") != std::string::npos);
    CHECK(cmd_stats({dir / "nope.txt"}, log, err) != 0);
}

TEST_CASE("config file values with flag overrides") {
    testsupport::TempDir dir("config");
    {
        std::ofstream cfg(dir / "run.toml");
        cfg << "[gen-corpus]\ncount = 2\nseed = 9\nresolution = 48\nout = \"" << (dir / "c") << "\"\n";
    }
    REQUIRE(run_cli("--config " + (dir / "run.toml") + " gen-corpus --count 3", dir / "log.txt") == 0);
    const std::string log = testsupport::read_file(dir / "log.txt");
    CHECK(log.find("\"count\":3") != std::string::npos);
    CHECK(log.find("\"seed\":9") != std::string::npos);
    CHECK(load_manifest(dir / "c/manifest.txt").sources.size() == 3);
}
