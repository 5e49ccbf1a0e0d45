#include "harmony/commands.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "harmony/corpus.hpp"
#include "harmony/error.hpp"
#include "harmony/metrics.hpp"
#include "harmony/perturb.hpp"
#include "harmony/rng.hpp"
#include "harmony/service.hpp"

namespace fs = std::filesystem;

namespace harmony {

namespace {

void echo(std::ostream& log, const std::string& command, const nlohmann::json& config) {
    log << "[" << command << "] config " << config.dump() << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << text;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string sample_id(const std::string& split, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%05zu", index);
    return split + buf;
}

// Ids of *.<ext> files directly under `dir`, sorted.
std::vector<std::string> stems_in(const fs::path& dir, const std::string& ext) {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path().stem().string());
    }
    if (ec) fail(ErrorCode::MissingFile, "cannot list '" + dir.string() + "': " + ec.message());
    std::sort(out.begin(), out.end());
    return out;
}

// Runs fn(i) for i in [0, n) on a small pool. Callers write results into
// per-index slots, so output never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

template <typename Fn>
int run_guarded(std::ostream& err, const char* command, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        err << command << ": error (" << to_string(e.code()) << "): " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << command << ": error: " << e.what() << '\n';
    }
    return 1;
}

std::string fmt(double v, int prec) {
    if (std::isinf(v)) return "inf";
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

}  // namespace

int cmd_synth(const SynthCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "synth", [&] {
        if (cmd.resolution < kMinResolution) {
            fail(ErrorCode::InvalidArgument, "resolution must be at least " + std::to_string(kMinResolution));
        }
        const Manifest manifest = load_manifest(cmd.manifest);
        if (manifest.sources.empty()) fail(ErrorCode::InvalidArgument, "manifest lists no sources");

        PerturbConfig cfg;
        std::optional<std::string> cfg_path = cmd.perturb_config;
        if (!cfg_path && manifest.perturb_config) cfg_path = manifest.resolve(*manifest.perturb_config);
        if (cfg_path) cfg = load_perturb_config(*cfg_path);
        cfg.validate();
        const std::uint64_t seed = cmd.seed.value_or(manifest.seed);

        const nlohmann::json config = {{"manifest", cmd.manifest},
                                       {"perturb_config", cfg_path ? nlohmann::json(*cfg_path) : nlohmann::json()},
                                       {"out_dir", cmd.out_dir},
                                       {"seed", seed},
                                       {"resolution", cmd.resolution}};
        echo(log, "synth", config);

        const fs::path out(cmd.out_dir);
        ensure_dir(out);

        Manifest produced;
        produced.seed = seed;
        nlohmann::json generated = nlohmann::json::array();
        nlohmann::json skipped = nlohmann::json::array();
        std::map<std::string, std::size_t> per_split;

        struct Outcome {
            std::string id;
            std::optional<BenchmarkSample> sample;
            std::string skip_reason;
            std::string error;
        };
        std::vector<Outcome> outcomes(manifest.sources.size());
        for (std::size_t i = 0; i < manifest.sources.size(); ++i) {
            outcomes[i].id = sample_id(manifest.sources[i].split, per_split[manifest.sources[i].split]++);
        }
        parallel_for(manifest.sources.size(), [&](std::size_t i) {
            const SourceEntry& src = manifest.sources[i];
            Outcome& o = outcomes[i];
            try {
                ImageBuf image = load_image(manifest.resolve(src.image));
                LabelMap labels = decode_label_png(manifest.resolve(src.labels));
                if (image.width() != labels.width() || image.height() != labels.height()) {
                    fail(ErrorCode::DimensionMismatch, "image and label map sizes differ");
                }
                image = quantize_8bit(resize_bilinear(image, cmd.resolution, cmd.resolution));
                labels = resize_nearest(labels, cmd.resolution, cmd.resolution);
                if (labels.foreground_classes().empty()) {
                    o.skip_reason = "no foreground";
                    return;
                }
                o.sample = make_composite(image, labels, cfg, derive_seed(seed, i));
                o.sample->id = o.id;
            } catch (const std::exception& e) {
                o.error = e.what();
            }
        });

        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const SourceEntry& src = manifest.sources[i];
            Outcome& o = outcomes[i];
            if (o.sample) {
                try {
                    persist_sample(*o.sample, out.string());
                } catch (const Error& e) {
                    o.error = e.what();
                }
            }
            if (!o.skip_reason.empty()) {
                log << "[synth] skip " << o.id << " (" << src.image << "): " << o.skip_reason << '\n';
                skipped.push_back({{"id", o.id}, {"source", src.image}, {"reason", o.skip_reason}});
            } else if (!o.error.empty()) {
                err << "synth: " << o.id << " (" << src.image << ") failed: " << o.error << '\n';
                skipped.push_back({{"id", o.id}, {"source", src.image}, {"reason", o.error}});
            } else {
                const std::string& id = o.id;
                produced.samples.push_back({src.split, "real/" + id + ".png", "composite/" + id + ".png",
                                            "labels/" + id + ".png", "records/" + id + ".json"});
                generated.push_back({{"id", id}, {"source", src.image}, {"regions", o.sample->records.size()}});
                log << "[synth] " << id << ": " << o.sample->records.size() << " region(s)\n";
            }
            o.sample.reset();
        }

        if (generated.empty()) fail(ErrorCode::InvalidArgument, "no sample could be synthesized");
        save_manifest(produced, (out / "manifest.txt").string());
        nlohmann::json report = {{"config", config},
                                 {"perturb", perturb_config_to_json(cfg)},
                                 {"generated", generated},
                                 {"skipped", skipped}};
        write_text(out / "synth_report.json", report.dump(2) + "\n");
        log << "[synth] wrote " << generated.size() << " sample(s), skipped " << skipped.size() << '\n';
        return 0;
    });
}

int cmd_gen_corpus(const GenCorpusCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "gen-corpus", [&] {
        if (cmd.resolution < kMinResolution) {
            fail(ErrorCode::InvalidArgument, "resolution must be at least " + std::to_string(kMinResolution));
        }
        if (cmd.count <= 0) fail(ErrorCode::InvalidArgument, "count must be positive");
        echo(log, "gen-corpus",
             {{"count", cmd.count}, {"resolution", cmd.resolution}, {"seed", cmd.seed}, {"out_dir", cmd.out_dir}});
        const fs::path out(cmd.out_dir);
        ensure_dir(out / "images");
        ensure_dir(out / "labels");
        Manifest m;
        m.seed = cmd.seed;
        for (int i = 0; i < cmd.count; ++i) {
            const CorpusItem item = gen_procedural_item(i, cmd.resolution, cmd.resolution, cmd.seed);
            save_image(item.image, (out / "images" / (item.id + ".png")).string());
            save_label_png(item.labels, (out / "labels" / (item.id + ".png")).string());
            m.sources.push_back({"procedural", "images/" + item.id + ".png", "labels/" + item.id + ".png"});
        }
        save_manifest(m, (out / "manifest.txt").string());
        log << "[gen-corpus] wrote " << cmd.count << " item(s) to " << out.string() << '\n';
        return 0;
    });
}

int cmd_harmonize(const HarmonizeCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "harmonize", [&] {
        HarmonizeOptions opts;
        opts.mode = cmd.mode;
        opts.fit = {cmd.space, cmd.model};
        const bool needs_target = cmd.mode != HarmonizeMode::Blind;

        nlohmann::json config = {{"mode", to_string(cmd.mode)},
                                 {"space", to_string(cmd.space)},
                                 {"model", to_string(cmd.model)},
                                 {"out_dir", cmd.out_dir}};

        struct Job {
            std::string id;
            ImageBuf composite;
            std::optional<ImageBuf> target;
            std::vector<LabeledRegion> regions;
        };
        std::vector<Job> jobs;

        if (cmd.sample_root) {
            config["sample_root"] = *cmd.sample_root;
            if (cmd.id) config["id"] = *cmd.id;
            echo(log, "harmonize", config);
            const auto ids = cmd.id ? std::vector<std::string>{*cmd.id} : list_samples(*cmd.sample_root);
            if (ids.empty()) fail(ErrorCode::MissingFile, "no samples under '" + *cmd.sample_root + "'");
            for (const auto& id : ids) {
                BenchmarkSample s = load_sample(*cmd.sample_root, id);
                auto regions = cmd.region_labels.empty() ? regions_from_records(s.labels, s.records)
                                                         : regions_from_labels(s.labels, cmd.region_labels);
                jobs.push_back({id, std::move(s.composite), std::move(s.real), std::move(regions)});
            }
        } else {
            if (!cmd.image) fail(ErrorCode::InvalidArgument, "either a sample root or an image is required");
            if (!cmd.labels) fail(ErrorCode::MissingFile, "a label map is required to locate regions");
            config["image"] = *cmd.image;
            config["labels"] = *cmd.labels;
            if (cmd.target) config["target"] = *cmd.target;
            config["region_labels"] = cmd.region_labels;
            echo(log, "harmonize", config);
            Job job;
            job.id = fs::path(*cmd.image).stem().string();
            job.composite = load_image(*cmd.image);
            const LabelMap labels = decode_label_png(*cmd.labels);
            if (job.composite.width() != labels.width() || job.composite.height() != labels.height()) {
                fail(ErrorCode::DimensionMismatch, "image and label map sizes differ");
            }
            if (cmd.target) job.target = load_image(*cmd.target);
            job.regions = regions_from_labels(labels, cmd.region_labels);
            if (job.regions.empty()) fail(ErrorCode::NoForeground, "label map has no foreground");
            jobs.push_back(std::move(job));
        }

        const fs::path out(cmd.out_dir);
        ensure_dir(out);
        for (const Job& job : jobs) {
            if (needs_target && !job.target) {
                fail(ErrorCode::InvalidArgument, std::string(to_string(cmd.mode)) + " mode needs a target image");
            }
        }
        std::vector<std::optional<HarmonizeResult>> results(jobs.size());
        std::vector<std::exception_ptr> errors(jobs.size());
        parallel_for(jobs.size(), [&](std::size_t i) {
            try {
                HarmonizeOptions local = opts;
                local.target = jobs[i].target ? &*jobs[i].target : nullptr;
                results[i] = harmonize(jobs[i].composite, jobs[i].regions, local);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (errors[i]) std::rethrow_exception(errors[i]);
            const Job& job = jobs[i];
            const HarmonizeResult& result = *results[i];
            save_image(result.image, (out / (job.id + ".png")).string());
            save_masks(result.masks, (out / (job.id + ".omsk")).string());
            log << "[harmonize] " << job.id << ": " << job.regions.size() << " region(s)";
            if (job.target) {
                log << ", PSNR composite " << fmt(psnr(job.composite, *job.target), 2) << " dB -> harmonized "
                    << fmt(psnr(result.image, *job.target), 2) << " dB";
            }
            log << '\n';
        }
        return 0;
    });
}

int cmd_apply(const ApplyCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "apply", [&] {
        echo(log, "apply", {{"image", cmd.image}, {"masks", cmd.masks}, {"out", cmd.out}});
        const ImageBuf img = load_image(cmd.image);
        const OperatorMaskSet masks = load_masks(cmd.masks);
        if (img.width() != masks.width() || img.height() != masks.height()) {
            fail(ErrorCode::DimensionMismatch, "image and mask sizes differ");
        }
        save_image(apply(img, masks), cmd.out);
        return 0;
    });
}

int cmd_eval(const EvalCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "eval", [&] {
        std::optional<fs::path> gt_dir, comp_dir;
        if (cmd.gt_dir) gt_dir = *cmd.gt_dir;
        if (cmd.composite_dir) comp_dir = *cmd.composite_dir;
        if (cmd.samples_root) {
            if (!gt_dir) gt_dir = fs::path(*cmd.samples_root) / "real";
            if (!comp_dir) comp_dir = fs::path(*cmd.samples_root) / "composite";
        }
        if (!gt_dir) fail(ErrorCode::InvalidArgument, "a ground-truth directory or sample root is required");
        const fs::path masks_dir = cmd.masks_dir ? fs::path(*cmd.masks_dir) : fs::path(cmd.pred_dir);
        const std::string backend = cmd.backend.empty() ? std::string(DownsampledLumaL1::kName) : cmd.backend;
        PerceptualRegistry::global().get(backend);

        EvalReport report;
        report.perceptual_backend = backend;
        report.config = {{"pred_dir", cmd.pred_dir},
                         {"gt_dir", gt_dir->string()},
                         {"composite_dir", comp_dir ? nlohmann::json(comp_dir->string()) : nlohmann::json()},
                         {"samples_root", cmd.samples_root ? nlohmann::json(*cmd.samples_root) : nlohmann::json()},
                         {"masks_dir", masks_dir.string()},
                         {"iou_threshold", cmd.iou_threshold},
                         {"backend", backend}};
        echo(log, "eval", report.config);

        const auto pred_ids = stems_in(cmd.pred_dir, ".png");
        const auto gt_ids = stems_in(*gt_dir, ".png");
        std::vector<std::string> unpaired;
        std::set_symmetric_difference(pred_ids.begin(), pred_ids.end(), gt_ids.begin(), gt_ids.end(),
                                      std::back_inserter(unpaired));
        if (!unpaired.empty()) {
            fail(ErrorCode::MissingFile, "unpaired files, e.g. '" + unpaired.front() + ".png' (" +
                                             std::to_string(unpaired.size()) + " total)");
        }
        if (pred_ids.empty()) fail(ErrorCode::MissingFile, "no predictions in '" + cmd.pred_dir + "'");

        std::vector<std::optional<EvalRow>> rows(pred_ids.size());
        std::vector<std::exception_ptr> errors(pred_ids.size());
        parallel_for(pred_ids.size(), [&](std::size_t i) {
            try {
                const std::string& id = pred_ids[i];
                const ImageBuf pred = load_image((fs::path(cmd.pred_dir) / (id + ".png")).string());
                const ImageBuf gt = load_image((*gt_dir / (id + ".png")).string());
                if (pred.width() != gt.width() || pred.height() != gt.height()) {
                    fail(ErrorCode::DimensionMismatch, "'" + id + "' prediction and ground truth sizes differ");
                }
                EvalRow row{id, score_pair(pred, gt, backend), std::nullopt};
                if (comp_dir) {
                    const fs::path cp = *comp_dir / (id + ".png");
                    if (!fs::exists(cp)) fail(ErrorCode::MissingFile, "no composite for '" + id + "'");
                    row.composite = score_pair(load_image(cp.string()), gt, backend);
                }
                const fs::path mp = masks_dir / (id + ".omsk");
                if (cmd.samples_root && fs::exists(mp)) {
                    const BenchmarkSample s = load_sample(*cmd.samples_root, id);
                    RegionMask truth(s.labels.width(), s.labels.height());
                    for (const auto& r : regions_from_records(s.labels, s.records)) truth = truth | r.mask;
                    row.prediction.iou = mask_iou(binarize_add(load_masks(mp.string()), cmd.iou_threshold), truth);
                }
                rows[i] = std::move(row);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (errors[i]) std::rethrow_exception(errors[i]);
            report.rows.push_back(std::move(*rows[i]));
        }

        log << format_table(report);
        if (!cmd.report.empty()) {
            if (fs::path(cmd.report).has_parent_path()) ensure_dir(fs::path(cmd.report).parent_path());
            write_text(cmd.report, report_to_json(report).dump(2) + "\n");
            log << "[eval] report written to " << cmd.report << '\n';
        }
        return 0;
    });
}

int cmd_stats(const StatsCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "stats", [&] {
        echo(log, "stats", {{"manifest", cmd.manifest}});
        const Manifest m = load_manifest(cmd.manifest);
        const auto counts = stats(m);
        log << std::left << std::setw(16) << "split" << std::right << std::setw(10) << "count" << std::setw(10)
            << "listed" << '\n';
        for (const auto& c : counts) {
            log << std::left << std::setw(16) << c.split << std::right << std::setw(10) << c.count()
                << std::setw(10) << c.listed << '\n';
        }
        log << std::left << std::setw(16) << "total" << std::right << std::setw(10) << total_count(counts) << '\n';
        return 0;
    });
}

int cmd_serve(const ServeCommand& cmd, std::ostream& log, std::ostream& err) {
    return run_guarded(err, "serve", [&] {
        ServiceConfig cfg;
        cfg.session_root = cmd.session_root;
        cfg.export_dir = cmd.export_dir;
        cfg.mode = cmd.mode;
        cfg.fit = {cmd.space, cmd.model};
        if (!fs::is_directory(cmd.session_root)) {
            fail(ErrorCode::MissingFile, "session root '" + cmd.session_root + "' is not a directory");
        }
        echo(log, "serve",
             {{"host", cmd.host},
              {"port", cmd.port},
              {"session_root", cmd.session_root},
              {"export_dir", cmd.export_dir ? nlohmann::json(*cmd.export_dir) : nlohmann::json()},
              {"mode", to_string(cmd.mode)},
              {"space", to_string(cmd.space)},
              {"model", to_string(cmd.model)}});
        EditorService service(cfg);
        httplib::Server server;
        service.mount(server);
        if (!server.bind_to_port(cmd.host, cmd.port)) {
            fail(ErrorCode::Io, "cannot bind " + cmd.host + ":" + std::to_string(cmd.port));
        }
        log << "[serve] listening on http://" << cmd.host << ":" << cmd.port << std::endl;
        if (!server.listen_after_bind()) fail(ErrorCode::Io, "server stopped unexpectedly");
        return 0;
    });
}

}  // namespace harmony
