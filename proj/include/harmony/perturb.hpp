#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "harmony/image.hpp"
#include "harmony/labels.hpp"
#include "harmony/rng.hpp"

namespace harmony {

// ---------------------------------------------------------------------------
// Filter primitives
//
// Every primitive is a per-pixel map on SRGB_01 followed by a clamp to [0,1].
// Parameter layout per kind:
//   brightness     [factor >= 0]                 x * factor
//   contrast       [factor >= 0]                 (x - 0.5) * factor + 0.5
//   saturate       [factor >= 0]                 luminance-preserving matrix
//   hue_rotate     [degrees in [-360,360]]       luminance-preserving rotation
//   sepia          [amount in [0,1]]             sepia matrix blended with identity
//   gamma          [exponent > 0]                x ^ exponent
//   channel_curve  [gain_r,g,b, offset_r,g,b]    gain * x + offset
//   color_overlay  [r,g,b,a in [0,1]] + mode     lerp(x, blend(x, rgb), a)
// ---------------------------------------------------------------------------

enum class FilterKind { Brightness, Contrast, Saturate, HueRotate, Sepia, Gamma, ChannelCurve, ColorOverlay };
enum class BlendMode { Normal, Multiply, Screen, Overlay, SoftLight, Darken, Lighten };

std::string_view to_string(FilterKind kind);
std::string_view to_string(BlendMode mode);
FilterKind filter_kind_from_string(std::string_view name);
BlendMode blend_mode_from_string(std::string_view name);

struct FilterPrimitive {
    FilterKind kind = FilterKind::Brightness;
    std::vector<double> params;
    BlendMode blend = BlendMode::Normal;

    /// Throws InvalidArgument when params are outside the documented ranges.
    void validate() const;
    std::array<float, 3> apply(const std::array<float, 3>& rgb) const;

    friend bool operator==(const FilterPrimitive&, const FilterPrimitive&) = default;
};

// Row-major 3x3 matrices used by saturate / hue_rotate / sepia.
using ColorMatrix = std::array<std::array<double, 3>, 3>;
ColorMatrix saturate_matrix(double factor);
ColorMatrix hue_rotate_matrix(double degrees);
ColorMatrix sepia_matrix(double amount);

struct FilterChain {
    std::string name;
    std::vector<FilterPrimitive> steps;

    std::array<float, 3> apply(const std::array<float, 3>& rgb) const;
    friend bool operator==(const FilterChain&, const FilterChain&) = default;
};

class FilterBank {
public:
    FilterBank() = default;
    explicit FilterBank(std::vector<FilterChain> chains);

    const std::vector<FilterChain>& chains() const noexcept { return chains_; }
    std::size_t size() const noexcept { return chains_.size(); }
    bool empty() const noexcept { return chains_.empty(); }

    /// Throws UnknownChain.
    const FilterChain& find(std::string_view name) const;
    bool contains(std::string_view name) const;

private:
    std::vector<FilterChain> chains_;
};

/// Parses {"filters": [...], "css": [...]} (either key may be absent).
struct FilterBankFile {
    FilterBank filters;
    FilterBank css;
};
FilterBankFile parse_filter_banks(const nlohmann::json& doc);
FilterBankFile load_filter_banks(const std::string& path);
nlohmann::json filter_bank_to_json(const FilterBank& bank);

/// The bank shipped in data/filters.json (compiled in).
const FilterBankFile& default_filter_banks();
std::string_view default_filter_bank_json();

// ---------------------------------------------------------------------------
// Perturbation records and configuration
// ---------------------------------------------------------------------------

enum class PerturbMethod { FilterChain, LabScale, BlurNoise };
enum class NoiseKind { Gaussian, Laplace, Poisson, MotionBlur, Jpeg };

std::string_view to_string(PerturbMethod method);
std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// Noise parameter layout:
///   gaussian    [sigma]            additive, SRGB_01 units
///   laplace     [b]                additive, SRGB_01 units
///   poisson     [scale]            x' = Poisson(x * scale) / scale
///   motion_blur [length, angle]    line kernel of `length` taps, angle in degrees
///   jpeg        [quality]          encode/decode round trip
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    std::vector<double> params;
    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

struct ChainPayload {
    std::string chain_name;
    friend bool operator==(const ChainPayload&, const ChainPayload&) = default;
};
struct LabScalePayload {
    std::array<double, 3> multipliers{1.0, 1.0, 1.0};
    friend bool operator==(const LabScalePayload&, const LabScalePayload&) = default;
};
struct NoisePayload {
    NoiseSpec noise;
    friend bool operator==(const NoisePayload&, const NoisePayload&) = default;
};

struct PerturbRecord {
    int region_label = 0;
    std::variant<ChainPayload, LabScalePayload, NoisePayload> payload;
    std::optional<std::string> css_overlay;
    /// Seeds the noise realization; unused by deterministic methods.
    std::uint64_t seed = 0;

    PerturbMethod method() const noexcept { return static_cast<PerturbMethod>(payload.index()); }
    friend bool operator==(const PerturbRecord&, const PerturbRecord&) = default;
};

nlohmann::json record_to_json(const PerturbRecord& record);
PerturbRecord record_from_json(const nlohmann::json& j);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Range&, const Range&) = default;
};

struct NoiseRanges {
    Range gaussian_sigma{0.01, 0.06};
    Range laplace_b{0.01, 0.04};
    Range poisson_scale{20.0, 120.0};
    Range motion_length{3.0, 9.0};
    Range jpeg_quality{10.0, 40.0};
};

struct PerturbConfig {
    FilterBank filter_bank = default_filter_banks().filters;
    FilterBank css_bank = default_filter_banks().css;
    double css_probability = 0.5;
    std::array<Range, 3> lab_scale_range{Range{0.6, 1.4}, Range{0.6, 1.4}, Range{0.6, 1.4}};
    /// (filter_chain, lab_scale, blur_noise)
    std::array<double, 3> method_weights{0.6, 0.2, 0.2};
    std::vector<NoiseKind> noise_kinds{NoiseKind::Gaussian, NoiseKind::Laplace, NoiseKind::Poisson,
                                       NoiseKind::MotionBlur, NoiseKind::Jpeg};
    NoiseRanges noise;

    void validate() const;
};

/// Reads a JSON config. "filter_bank" may name a bank file relative to the
/// config's directory, or be omitted to use the compiled-in default.
PerturbConfig load_perturb_config(const std::string& path);
PerturbConfig perturb_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json perturb_config_to_json(const PerturbConfig& cfg);

/// Real image, composite, labels and the chain that produced the composite.
struct BenchmarkSample {
    std::string id;
    ImageBuf real;
    ImageBuf composite;
    LabelMap labels;
    std::vector<PerturbRecord> records;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

struct SelectedRegion {
    int label = 0;
    RegionMask mask;
};

/// Number of regions perturbed for an image with `classes` foreground classes.
constexpr int region_count_for(int classes) { return classes / 5 + 1; }

/// Draws floor(0.2 K) + 1 distinct foreground classes uniformly without
/// replacement. Throws NoForeground when K = 0.
std::vector<SelectedRegion> select_regions(const LabelMap& labels, Rng& rng);

ImageBuf apply_filter_chain(const ImageBuf& img, const RegionMask& mask, const FilterChain& chain);
ImageBuf apply_filter_chain(const ImageBuf& img, const RegionMask& mask, std::string_view chain_name,
                            const FilterBank& bank);

ImageBuf apply_lab_scale(const ImageBuf& img, const RegionMask& mask, const std::array<double, 3>& multipliers);
/// True when scaling any masked pixel leaves the sRGB gamut.
bool lab_scale_clamps(const ImageBuf& img, const RegionMask& mask, const std::array<double, 3>& multipliers);

/// Degrades `real` everywhere and `composite` outside `mask` with the same
/// noise realization.
std::pair<ImageBuf, ImageBuf> apply_blur_noise(const ImageBuf& real, const ImageBuf& composite,
                                               const RegionMask& mask, const NoiseSpec& noise,
                                               std::uint64_t seed);

/// Applies one record in place. Used by synthesis and replay.
void apply_record(ImageBuf& real, ImageBuf& composite, const LabelMap& labels, const PerturbRecord& record,
                  const PerturbConfig& cfg);

BenchmarkSample make_composite(const ImageBuf& image, const LabelMap& labels, const PerturbConfig& cfg,
                               std::uint64_t seed);

/// Re-applies `records` to the original image: returns (real, composite).
std::pair<ImageBuf, ImageBuf> replay_records(const ImageBuf& image, const LabelMap& labels,
                                             const std::vector<PerturbRecord>& records,
                                             const PerturbConfig& cfg);

}  // namespace harmony
