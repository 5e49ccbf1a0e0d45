#include "harmony/solver.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

namespace {

// Masked channel samples of `img`, converted into `space` if needed.
struct Samples {
    std::array<std::vector<double>, 3> values;
};

ImageBuf to_working_space(const ImageBuf& img, ColorSpace space) {
    if (space != ColorSpace::LAB && space != ColorSpace::HLS) {
        fail(ErrorCode::InvalidSpace, "fits operate in LAB or HLS");
    }
    if (img.space() == space) return img;
    if (img.space() != ColorSpace::SRGB_01) {
        fail(ErrorCode::InvalidSpace, "fit input must be SRGB_01 or already in " + std::string(to_string(space)));
    }
    return convert(img, space);
}

Samples gather(const ImageBuf& img, const RegionMask& mask) {
    if (!mask.same_dims(img.width(), img.height())) {
        fail(ErrorCode::DimensionMismatch, "mask and image dimensions differ");
    }
    Samples s;
    const std::size_t n = mask.count();
    if (n == 0) fail(ErrorCode::EmptyMask, "region mask is empty");
    for (int c = 0; c < 3; ++c) {
        s.values[c].reserve(n);
        const auto plane = img.plane(c);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) s.values[c].push_back(plane[i]);
        }
    }
    return s;
}

double mean_of(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

double mean_sq_residual(std::span<const double> x, std::span<const double> y, double gain, double offset) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = gain * x[i] + offset - y[i];
        sum += r * r;
    }
    return sum / static_cast<double>(x.size());
}

ChannelFit least_squares(std::span<const double> x, std::span<const double> y, FitModel model) {
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    ChannelFit fit;
    if (model == FitModel::AddOnly || sxx / static_cast<double>(x.size()) < kDegenerateVariance) {
        fit.gain = 1.0;
        fit.offset = my - mx;
    } else {
        fit.gain = sxy / sxx;
        fit.offset = my - fit.gain * mx;
    }
    fit.residual = mean_sq_residual(x, y, fit.gain, fit.offset);
    return fit;
}

ChannelFit descend_channel(const CharbonnierObjective& objective, std::span<const double> x,
                           std::span<const double> y, double scale, ChannelFit start, bool gain_fixed,
                           const DescentOptions& opts, int& iterations, bool& converged) {
    double m = start.gain;
    double a = start.offset;
    double value = objective.value(m, a);
    iterations = 0;
    converged = false;
    const double eps2 = opts.epsilon * opts.epsilon;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        auto g = objective.gradient(m, a);
        if (gain_fixed) g[0] = 0.0;
        if (std::hypot(g[0], g[1]) <= opts.gradient_tol) {
            converged = true;
            break;
        }

        // IRLS candidate: weighted least squares with w = 1/sqrt(r^2 + eps^2).
        double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = (m * x[i] + a - y[i]) / scale;
            const double w = 1.0 / std::sqrt(r * r + eps2);
            sw += w;
            swx += w * x[i];
            swy += w * y[i];
            swxx += w * x[i] * x[i];
            swxy += w * x[i] * y[i];
        }
        double cand_m = m, cand_a = a;
        const double det = sw * swxx - swx * swx;
        if (!gain_fixed && det > 1e-12 * sw * swxx) {
            cand_m = (sw * swxy - swx * swy) / det;
            cand_a = (swy - cand_m * swx) / sw;
        } else {
            cand_a = (swy - m * swx) / sw;
        }
        double dm = cand_m - m;
        double da = cand_a - a;
        double slope = g[0] * dm + g[1] * da;
        if (!(slope < 0.0)) {
            dm = -g[0];
            da = -g[1];
            slope = -(g[0] * g[0] + g[1] * g[1]);
        }

        double t = 1.0;
        bool accepted = false;
        double next_m = m, next_a = a, next_value = value;
        for (int k = 0; k < 60; ++k) {
            next_m = m + t * dm;
            next_a = a + t * da;
            next_value = objective.value(next_m, next_a);
            if (next_value <= value + opts.armijo_c * t * slope) {
                accepted = true;
                break;
            }
            t *= opts.shrink;
        }
        if (!accepted) {
            // No decrease representable along this direction: stationary to
            // working precision.
            converged = true;
            break;
        }
        const double step = std::hypot(t * dm, t * da);
        m = next_m;
        a = next_a;
        value = next_value;
        iterations = iter + 1;
        if (step <= opts.step_tol * (1.0 + std::hypot(m, a))) {
            converged = true;
            break;
        }
    }
    ChannelFit fit;
    fit.gain = m;
    fit.offset = a;
    fit.residual = mean_sq_residual(x, y, m, a);
    return fit;
}

}  // namespace

std::string_view to_string(FitModel model) { return model == FitModel::Affine ? "affine" : "add"; }

FitModel fit_model_from_string(std::string_view name) {
    if (name == "affine") return FitModel::Affine;
    if (name == "add" || name == "add_only") return FitModel::AddOnly;
    fail(ErrorCode::InvalidArgument, "fit model must be 'affine' or 'add', got '" + std::string(name) + "'");
}

std::string_view to_string(HarmonizeMode mode) {
    switch (mode) {
        case HarmonizeMode::Supervised: return "supervised";
        case HarmonizeMode::Blind: return "blind";
        case HarmonizeMode::Descent: return "descent";
    }
    return "?";
}

HarmonizeMode harmonize_mode_from_string(std::string_view name) {
    if (name == "supervised") return HarmonizeMode::Supervised;
    if (name == "blind") return HarmonizeMode::Blind;
    if (name == "descent") return HarmonizeMode::Descent;
    fail(ErrorCode::InvalidArgument, "mode must be supervised, blind or descent, got '" + std::string(name) + "'");
}

RegionStats region_stats(const ImageBuf& img, const RegionMask& mask, ColorSpace space) {
    const ImageBuf work = to_working_space(img, space);
    const Samples s = gather(work, mask);
    RegionStats stats;
    stats.count = s.values[0].size();
    for (int c = 0; c < 3; ++c) {
        const double mu = mean_of(s.values[c]);
        double ss = 0.0;
        for (double v : s.values[c]) ss += (v - mu) * (v - mu);
        stats.mean[c] = mu;
        stats.stddev[c] = std::sqrt(ss / static_cast<double>(stats.count));
    }
    return stats;
}

AffineFit fit_affine_supervised(const ImageBuf& composite, const ImageBuf& target, const RegionMask& mask,
                                const FitOptions& opts) {
    if (!composite.same_dims(target)) fail(ErrorCode::DimensionMismatch, "composite and target dimensions differ");
    const Samples xs = gather(to_working_space(composite, opts.space), mask);
    const Samples ys = gather(to_working_space(target, opts.space), mask);
    AffineFit fit;
    for (int c = 0; c < 3; ++c) fit.channels[c] = least_squares(xs.values[c], ys.values[c], opts.model);
    return fit;
}

AffineFit fit_affine_blind(const ImageBuf& composite, const RegionMask& mask, const RegionStats& reference,
                           const FitOptions& opts) {
    const RegionStats region = region_stats(composite, mask, opts.space);
    const double min_std = std::sqrt(kDegenerateVariance);
    AffineFit fit;
    for (int c = 0; c < 3; ++c) {
        if (!(reference.stddev[c] >= 0.0)) fail(ErrorCode::InvalidArgument, "reference std must be >= 0");
        auto& ch = fit.channels[c];
        if (opts.model == FitModel::AddOnly || region.stddev[c] < min_std) {
            ch.gain = 1.0;
        } else {
            ch.gain = reference.stddev[c] / region.stddev[c];
        }
        ch.offset = reference.mean[c] - ch.gain * region.mean[c];
        // Residual against the reference moments: (std difference)^2 + (mean difference)^2.
        const double mean_gap = ch.gain * region.mean[c] + ch.offset - reference.mean[c];
        const double std_gap = ch.gain * region.stddev[c] - reference.stddev[c];
        ch.residual = mean_gap * mean_gap + std_gap * std_gap;
    }
    return fit;
}

CharbonnierObjective::CharbonnierObjective(std::span<const double> x, std::span<const double> y, double scale,
                                           double epsilon)
    : x_(x), y_(y), scale_(scale), epsilon_(epsilon) {
    if (x.size() != y.size() || x.empty()) fail(ErrorCode::InvalidArgument, "objective needs equal, non-empty samples");
    if (!(scale > 0.0) || !(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "scale and epsilon must be > 0");
}

double CharbonnierObjective::value(double gain, double offset) const {
    const double eps2 = epsilon_ * epsilon_;
    double sum = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
        const double r = (gain * x_[i] + offset - y_[i]) / scale_;
        sum += std::sqrt(r * r + eps2);
    }
    return sum / static_cast<double>(x_.size());
}

std::array<double, 2> CharbonnierObjective::gradient(double gain, double offset) const {
    const double eps2 = epsilon_ * epsilon_;
    double gm = 0.0, ga = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
        const double r = (gain * x_[i] + offset - y_[i]) / scale_;
        const double d = r / std::sqrt(r * r + eps2) / scale_;
        gm += d * x_[i];
        ga += d;
    }
    const double n = static_cast<double>(x_.size());
    return {gm / n, ga / n};
}

double channel_scale(ColorSpace space, int channel) {
    if (space == ColorSpace::HLS) return channel == 0 ? 360.0 : 1.0;
    return 100.0;
}

AffineFit fit_descent(const ImageBuf& composite, const ImageBuf& target, const RegionMask& mask,
                      const DescentOptions& descent, const FitOptions& opts) {
    if (!composite.same_dims(target)) fail(ErrorCode::DimensionMismatch, "composite and target dimensions differ");
    if (descent.max_iters < 0) fail(ErrorCode::InvalidArgument, "max_iters must be >= 0");
    const Samples xs = gather(to_working_space(composite, opts.space), mask);
    const Samples ys = gather(to_working_space(target, opts.space), mask);
    AffineFit fit;
    fit.converged = true;
    for (int c = 0; c < 3; ++c) {
        const auto& x = xs.values[c];
        const auto& y = ys.values[c];
        const double scale = channel_scale(opts.space, c);
        const CharbonnierObjective objective(x, y, scale, descent.epsilon);
        const double mx = mean_of(x);
        double var = 0.0;
        for (double v : x) var += (v - mx) * (v - mx);
        var /= static_cast<double>(x.size());
        const bool gain_fixed = opts.model == FitModel::AddOnly || var < kDegenerateVariance;
        ChannelFit start = descent.init ? (*descent.init)[c] : ChannelFit{};
        if (gain_fixed) start.gain = opts.model == FitModel::AddOnly ? 1.0 : start.gain;
        int iterations = 0;
        bool converged = false;
        fit.channels[c] = descend_channel(objective, x, y, scale, start, gain_fixed, descent, iterations, converged);
        fit.iterations = std::max(fit.iterations, iterations);
        fit.converged = fit.converged && converged;
    }
    return fit;
}

OperatorMaskSet masks_from_fits(const std::vector<RegionFit>& fits, int width, int height, ColorSpace space) {
    OperatorMaskSet masks(width, height, space);
    RegionMask covered(width, height);
    for (const auto& rf : fits) {
        if (!rf.mask.same_dims(width, height)) fail(ErrorCode::DimensionMismatch, "region and mask dimensions differ");
        if (rf.mask.intersects(covered)) fail(ErrorCode::OverlappingRegions, "fit regions overlap");
        covered = covered | rf.mask;
        for (int c = 0; c < 3; ++c) {
            auto mul = masks.mul(c);
            auto add = masks.add(c);
            for (std::size_t i = 0; i < rf.mask.size(); ++i) {
                if (!rf.mask[i]) continue;
                mul[i] = rf.fit.channels[c].gain;
                add[i] = rf.fit.channels[c].offset;
            }
        }
    }
    return masks;
}

HarmonizeResult harmonize(const ImageBuf& composite, const std::vector<LabeledRegion>& regions,
                          const HarmonizeOptions& opts) {
    if (composite.space() != ColorSpace::SRGB_01) fail(ErrorCode::InvalidSpace, "harmonize: expected SRGB_01");
    const bool needs_target = opts.mode != HarmonizeMode::Blind;
    if (needs_target && opts.target == nullptr) {
        fail(ErrorCode::InvalidArgument, std::string(to_string(opts.mode)) + " mode needs a target image");
    }
    if (needs_target && !opts.target->same_dims(composite)) {
        fail(ErrorCode::DimensionMismatch, "composite and target dimensions differ");
    }

    const ImageBuf work = to_working_space(composite, opts.fit.space);
    ImageBuf target_work;
    if (needs_target) target_work = to_working_space(*opts.target, opts.fit.space);

    std::optional<RegionStats> reference = opts.reference;
    if (opts.mode == HarmonizeMode::Blind && !reference && !regions.empty()) {
        RegionMask foreground(composite.width(), composite.height());
        for (const auto& r : regions) foreground = foreground | r.mask;
        const RegionMask background = ~foreground;
        if (background.empty()) fail(ErrorCode::EmptyMask, "blind mode: no background pixels to use as reference");
        reference = region_stats(work, background, opts.fit.space);
    }

    HarmonizeResult result;
    for (const auto& region : regions) {
        RegionFit rf{region.label, region.mask, {}};
        switch (opts.mode) {
            case HarmonizeMode::Supervised:
                rf.fit = fit_affine_supervised(work, target_work, region.mask, opts.fit);
                break;
            case HarmonizeMode::Blind: rf.fit = fit_affine_blind(work, region.mask, *reference, opts.fit); break;
            case HarmonizeMode::Descent:
                rf.fit = fit_descent(work, target_work, region.mask, opts.descent, opts.fit);
                break;
        }
        result.fits.push_back(std::move(rf));
    }
    result.masks = masks_from_fits(result.fits, composite.width(), composite.height(), opts.fit.space);
    result.image = apply(composite, result.masks);
    return result;
}

std::vector<LabeledRegion> regions_from_labels(const LabelMap& labels, const std::vector<int>& only) {
    const std::vector<int> classes = only.empty() ? labels.foreground_classes() : only;
    std::vector<LabeledRegion> out;
    for (int label : classes) {
        if (std::any_of(out.begin(), out.end(), [&](const LabeledRegion& r) { return r.label == label; })) continue;
        RegionMask mask = labels.mask_for(label);
        if (mask.empty()) fail(ErrorCode::EmptyMask, "label " + std::to_string(label) + " has no pixels");
        out.push_back({label, std::move(mask)});
    }
    return out;
}

}  // namespace harmony
