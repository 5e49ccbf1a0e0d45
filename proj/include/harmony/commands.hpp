#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "harmony/image.hpp"
#include "harmony/solver.hpp"

namespace harmony {

// Subcommand bodies behind the `harmony` binary. Each returns a process exit
// code and writes human-readable progress to `log`; errors go to `err`.

inline constexpr int kMinResolution = 32;

struct SynthCommand {
    std::string manifest;
    std::optional<std::string> perturb_config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int resolution = 256;
};
int cmd_synth(const SynthCommand& cmd, std::ostream& log, std::ostream& err);

struct GenCorpusCommand {
    int count = 10;
    int resolution = 256;
    std::uint64_t seed = 0;
    std::string out_dir;
};
int cmd_gen_corpus(const GenCorpusCommand& cmd, std::ostream& log, std::ostream& err);

struct HarmonizeCommand {
    // Either a persisted sample root (optionally one id)...
    std::optional<std::string> sample_root;
    std::optional<std::string> id;
    // ...or a loose composite + label map.
    std::optional<std::string> image;
    std::optional<std::string> labels;
    std::optional<std::string> target;
    std::vector<int> region_labels;

    HarmonizeMode mode = HarmonizeMode::Supervised;
    ColorSpace space = ColorSpace::LAB;
    FitModel model = FitModel::Affine;
    std::string out_dir;
};
int cmd_harmonize(const HarmonizeCommand& cmd, std::ostream& log, std::ostream& err);

struct ApplyCommand {
    std::string image;
    std::string masks;
    std::string out;
};
int cmd_apply(const ApplyCommand& cmd, std::ostream& log, std::ostream& err);

struct EvalCommand {
    std::string pred_dir;
    std::optional<std::string> gt_dir;
    std::optional<std::string> composite_dir;
    /// Sample root: supplies gt (real/), composite/ and true regions.
    std::optional<std::string> samples_root;
    /// Directory of <id>.omsk files; defaults to pred_dir.
    std::optional<std::string> masks_dir;
    std::string report;
    std::string backend;
    double iou_threshold = 1e-4;
};
int cmd_eval(const EvalCommand& cmd, std::ostream& log, std::ostream& err);

struct StatsCommand {
    std::string manifest;
};
int cmd_stats(const StatsCommand& cmd, std::ostream& log, std::ostream& err);

struct ServeCommand {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string session_root;
    std::optional<std::string> export_dir;
    HarmonizeMode mode = HarmonizeMode::Supervised;
    ColorSpace space = ColorSpace::LAB;
    FitModel model = FitModel::Affine;
};
int cmd_serve(const ServeCommand& cmd, std::ostream& log, std::ostream& err);

}  // namespace harmony
