#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmony/image.hpp"
#include "harmony/labels.hpp"
#include "harmony/perturb.hpp"
#include "harmony/solver.hpp"

namespace harmony {

// ---------------------------------------------------------------------------
// Manifest
//
// Line-oriented text. '#' starts a comment; tokens are whitespace separated
// and paths are relative to the manifest's directory.
//
//   harmony-manifest 1
//   seed <u64>
//   perturb_config <path>
//   split <name> <declared count>
//   source <split> <image path> <label path>
//   sample <split> <real> <composite> <labels> <records>
// ---------------------------------------------------------------------------

inline constexpr int kManifestSchema = 1;

struct SourceEntry {
    std::string split;
    std::string image;
    std::string labels;
};

struct SampleEntry {
    std::string split;
    std::string real;
    std::string composite;
    std::string labels;
    std::string records;
};

struct Manifest {
    int schema = kManifestSchema;
    std::uint64_t seed = 0;
    std::optional<std::string> perturb_config;
    /// split -> declared count, in declaration order.
    std::vector<std::pair<std::string, std::size_t>> declared;
    std::vector<SourceEntry> sources;
    std::vector<SampleEntry> samples;
    /// Directory that relative paths resolve against.
    std::string base_dir = ".";

    std::string resolve(const std::string& path) const;
};

/// Throws MissingFile, SchemaMismatch or DanglingPath.
Manifest load_manifest(const std::string& path);
Manifest parse_manifest(const std::string& text, const std::string& base_dir, bool check_paths = true);
std::string format_manifest(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const std::string& path);

struct SplitCount {
    std::string split;
    std::optional<std::size_t> declared;
    std::size_t listed = 0;
    /// Declared count when present, listed count otherwise.
    std::size_t count() const { return declared.value_or(listed); }
};

std::vector<SplitCount> stats(const Manifest& manifest);
std::size_t total_count(const std::vector<SplitCount>& counts);

// ---------------------------------------------------------------------------
// Procedural corpus
// ---------------------------------------------------------------------------

struct CorpusItem {
    std::string id;
    ImageBuf image;
    LabelMap labels;
};

struct ProceduralOptions {
    int min_classes = 4;
    int max_classes = 12;
    /// Minimum area of each foreground class, as a fraction of the image.
    double min_area_fraction = 0.005;
};

/// Value-noise textured images over a warped Voronoi label layout. Each item
/// has 4-12 disjoint foreground classes plus background; pixels are already
/// 8-bit quantized. Item i depends only on (seed, i).
std::vector<CorpusItem> gen_procedural_corpus(int n, int width, int height, std::uint64_t seed,
                                              const ProceduralOptions& opts = {});
CorpusItem gen_procedural_item(int index, int width, int height, std::uint64_t seed,
                               const ProceduralOptions& opts = {});

// ---------------------------------------------------------------------------
// Sample persistence: <root>/{real,composite,labels,records}/<id>.*
// ---------------------------------------------------------------------------

inline constexpr const char* kRecordsSchema = "harmony-records/1";

void persist_sample(const BenchmarkSample& sample, const std::string& root);
BenchmarkSample load_sample(const std::string& root, const std::string& id);
/// Sample ids present under <root>/composite, sorted.
std::vector<std::string> list_samples(const std::string& root);

nlohmann::json records_to_json(const BenchmarkSample& sample);
std::vector<PerturbRecord> records_from_json(const nlohmann::json& j);

/// One region per distinct record label, in record order.
std::vector<LabeledRegion> regions_from_records(const LabelMap& labels, const std::vector<PerturbRecord>& records);

}  // namespace harmony
