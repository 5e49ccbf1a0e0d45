#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "harmony/image.hpp"
#include "harmony/labels.hpp"
#include "harmony/retouch.hpp"

namespace harmony {

/// Gain/offset for one channel: y ~ gain * x + offset.
struct ChannelFit {
    double gain = 1.0;
    double offset = 0.0;
    /// Mean squared residual over the region, channel units squared.
    double residual = 0.0;
};

struct AffineFit {
    std::array<ChannelFit, 3> channels{};
    /// Only meaningful for descent fits.
    bool converged = true;
    int iterations = 0;
};

struct RegionStats {
    std::array<double, 3> mean{};
    std::array<double, 3> stddev{};
    std::size_t count = 0;
};

/// Affine fits both gain and offset; AddOnly pins gain to 1 and fits only the
/// offset, so every correction lands in the add planes.
enum class FitModel { Affine, AddOnly };

std::string_view to_string(FitModel model);
FitModel fit_model_from_string(std::string_view name);

/// Regions whose channel variance falls below this are fitted offset-only.
inline constexpr double kDegenerateVariance = 1e-8;

struct FitOptions {
    /// Working space; SRGB_01 inputs are converted into it.
    ColorSpace space = ColorSpace::LAB;
    FitModel model = FitModel::Affine;
};

/// Per-channel mean/std over `mask` (population std). Throws EmptyMask.
RegionStats region_stats(const ImageBuf& img, const RegionMask& mask, ColorSpace space = ColorSpace::LAB);

/// Closed-form least squares per channel. Throws EmptyMask.
AffineFit fit_affine_supervised(const ImageBuf& composite, const ImageBuf& target, const RegionMask& mask,
                                const FitOptions& opts = {});

/// Moment matching of the masked region against `reference`.
AffineFit fit_affine_blind(const ImageBuf& composite, const RegionMask& mask, const RegionStats& reference,
                           const FitOptions& opts = {});

struct DescentOptions {
    int max_iters = 200;
    /// Charbonnier epsilon, in normalized channel units.
    double epsilon = 1e-3;
    double armijo_c = 1e-4;
    double shrink = 0.5;
    double gradient_tol = 1e-12;
    double step_tol = 1e-13;
    /// Starting point per channel; defaults to (gain 1, offset 0).
    std::optional<std::array<ChannelFit, 3>> init;
};

/// Mean Charbonnier residual of gain*x + offset against y, after dividing
/// residuals by `scale` (the channel's normalization).
class CharbonnierObjective {
public:
    CharbonnierObjective(std::span<const double> x, std::span<const double> y, double scale, double epsilon);

    double value(double gain, double offset) const;
    std::array<double, 2> gradient(double gain, double offset) const;

private:
    std::span<const double> x_;
    std::span<const double> y_;
    double scale_;
    double epsilon_;
};

/// Normalization used by the descent objective: LAB channels / 100, HLS hue
/// / 360, HLS lightness and saturation as-is.
double channel_scale(ColorSpace space, int channel);

/// Iterative Charbonnier minimization per channel. Search directions come
/// from an iteratively reweighted least-squares solve, falling back to the
/// negative gradient; every step passes an Armijo backtracking test, so the
/// objective never increases. Returns the best iterate; `converged` is false
/// if max_iters ran out.
AffineFit fit_descent(const ImageBuf& composite, const ImageBuf& target, const RegionMask& mask,
                      const DescentOptions& descent = {}, const FitOptions& opts = {});

struct RegionFit {
    int label = 0;
    RegionMask mask;
    AffineFit fit;
};

/// Constant gain/offset inside each region, identity elsewhere. Throws
/// OverlappingRegions.
OperatorMaskSet masks_from_fits(const std::vector<RegionFit>& fits, int width, int height,
                                ColorSpace space = ColorSpace::LAB);

enum class HarmonizeMode { Supervised, Blind, Descent };

std::string_view to_string(HarmonizeMode mode);
HarmonizeMode harmonize_mode_from_string(std::string_view name);

struct LabeledRegion {
    int label = 0;
    RegionMask mask;
};

struct HarmonizeOptions {
    HarmonizeMode mode = HarmonizeMode::Supervised;
    FitOptions fit{};
    DescentOptions descent{};
    /// Ground truth for supervised/descent modes.
    const ImageBuf* target = nullptr;
    /// Blind reference; defaults to the statistics of pixels outside every region.
    std::optional<RegionStats> reference;
};

struct HarmonizeResult {
    ImageBuf image;
    OperatorMaskSet masks;
    std::vector<RegionFit> fits;
};

HarmonizeResult harmonize(const ImageBuf& composite, const std::vector<LabeledRegion>& regions,
                          const HarmonizeOptions& opts);

/// One region per listed label (all foreground classes when `only` is empty).
std::vector<LabeledRegion> regions_from_labels(const LabelMap& labels, const std::vector<int>& only = {});

}  // namespace harmony
