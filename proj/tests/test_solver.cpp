#include "doctest.h"

#include <cmath>

#include "harmony/error.hpp"
#include "harmony/solver.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

// LAB-tagged image with L in [20,80], a/b in [-30,30].
ImageBuf random_lab(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    ImageBuf img(w, h, ColorSpace::LAB);
    for (float& v : img.plane(0)) v = static_cast<float>(rng.uniform(20.0, 80.0));
    for (int c = 1; c < 3; ++c) {
        for (float& v : img.plane(c)) v = static_cast<float>(rng.uniform(-30.0, 30.0));
    }
    return img;
}

ImageBuf affine(const ImageBuf& x, const std::array<double, 3>& gain, const std::array<double, 3>& offset) {
    ImageBuf y = x;
    for (int c = 0; c < 3; ++c) {
        for (float& v : y.plane(c)) v = static_cast<float>(gain[c] * v + offset[c]);
    }
    return y;
}

}  // namespace

TEST_CASE("supervised fit recovers an exact affine map") {
    const ImageBuf x = random_lab(32, 32, 1);
    const ImageBuf y = affine(x, {0.8, 1.2, 0.9}, {5.0, -3.0, 2.0});
    const RegionMask all(32, 32, true);
    const AffineFit fit = fit_affine_supervised(x, y, all);
    CHECK(fit.channels[0].gain == doctest::Approx(0.8).epsilon(1e-5));
    CHECK(fit.channels[1].gain == doctest::Approx(1.2).epsilon(1e-5));
    CHECK(fit.channels[2].offset == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(fit.channels[0].residual < 1e-8);

    FitOptions add_only;
    add_only.model = FitModel::AddOnly;
    const AffineFit shift = fit_affine_supervised(x, affine(x, {1, 1, 1}, {4, 0, -2}), all, add_only);
    CHECK(shift.channels[0].gain == 1.0);
    CHECK(shift.channels[0].offset == doctest::Approx(4.0).epsilon(1e-5));
    CHECK(shift.channels[2].offset == doctest::Approx(-2.0).epsilon(1e-5));
}

TEST_CASE("degenerate regions fall back to offset-only") {
    ImageBuf x(8, 8, ColorSpace::LAB, 40.0f);
    const ImageBuf y = affine(x, {1.0, 1.0, 1.0}, {7.0, 0.0, 0.0});
    const AffineFit fit = fit_affine_supervised(x, y, RegionMask(8, 8, true));
    CHECK(fit.channels[0].gain == 1.0);
    CHECK(fit.channels[0].offset == doctest::Approx(7.0));
    CHECK_THROWS_AS(fit_affine_supervised(x, y, RegionMask(8, 8)), Error);
    CHECK_THROWS_AS(fit_affine_supervised(x, ImageBuf(4, 4, ColorSpace::LAB), RegionMask(8, 8, true)), Error);
}

TEST_CASE("blind fit matches reference moments") {
    const ImageBuf x = random_lab(24, 24, 2);
    const RegionMask all(24, 24, true);
    RegionStats ref;
    ref.mean = {50.0, 2.0, -4.0};
    ref.stddev = {10.0, 5.0, 6.0};
    const AffineFit fit = fit_affine_blind(x, all, ref);
    const ImageBuf y = affine(x, {fit.channels[0].gain, fit.channels[1].gain, fit.channels[2].gain},
                              {fit.channels[0].offset, fit.channels[1].offset, fit.channels[2].offset});
    const RegionStats got = region_stats(y, all);
    for (int c = 0; c < 3; ++c) {
        CHECK(got.mean[c] == doctest::Approx(ref.mean[c]).epsilon(1e-4));
        CHECK(got.stddev[c] == doctest::Approx(ref.stddev[c]).epsilon(1e-4));
    }
}

TEST_CASE("Charbonnier objective gradient matches finite differences") {
    Rng rng(5);
    std::vector<double> xs(300), ys(300);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = rng.uniform(0.0, 100.0);
        ys[i] = 1.1 * xs[i] - 3.0 + rng.normal();
    }
    const CharbonnierObjective f(xs, ys, 100.0, 1e-3);
    const double h = 1e-4;
    for (int k = 0; k < 20; ++k) {
        const double g = rng.uniform(0.5, 1.5), o = rng.uniform(-10.0, 10.0);
        const auto grad = f.gradient(g, o);
        const double dg = (f.value(g + h, o) - f.value(g - h, o)) / (2 * h);
        const double dof = (f.value(g, o + h) - f.value(g, o - h)) / (2 * h);
        CHECK(std::abs(grad[0] - dg) <= 1e-3 * std::max(std::abs(dg), 1e-8));
        CHECK(std::abs(grad[1] - dof) <= 1e-3 * std::max(std::abs(dof), 1e-8));
    }
    CHECK_THROWS_AS(CharbonnierObjective(xs, ys, 100.0, 0.0), Error);
}

TEST_CASE("descent agrees with the closed form on affine data") {
    const ImageBuf x = random_lab(32, 32, 3);
    const ImageBuf y = affine(x, {0.9, 1.1, 0.7}, {4.0, 1.0, -2.0});
    const RegionMask all(32, 32, true);
    const AffineFit closed = fit_affine_supervised(x, y, all);
    const AffineFit desc = fit_descent(x, y, all);
    CHECK(desc.converged);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(desc.channels[c].gain - closed.channels[c].gain) < 1e-3);
        CHECK(std::abs(desc.channels[c].offset - closed.channels[c].offset) < 1e-3 * 100);
    }

    DescentOptions warm;
    warm.init = closed.channels;
    const AffineFit started = fit_descent(x, y, all, warm);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(started.channels[c].gain - closed.channels[c].gain) < 1e-3);
}

TEST_CASE("descent from the optimum takes no steps") {
    const ImageBuf x = random_lab(16, 16, 4);
    const AffineFit fit = fit_descent(x, x, RegionMask(16, 16, true));
    CHECK(fit.iterations == 0);
    CHECK(fit.channels[1].gain == 1.0);
    CHECK(fit.channels[1].offset == 0.0);
}

TEST_CASE("channel scales") {
    CHECK(channel_scale(ColorSpace::LAB, 0) == 100.0);
    CHECK(channel_scale(ColorSpace::HLS, 0) == 360.0);
    CHECK(channel_scale(ColorSpace::HLS, 2) == 1.0);
}

TEST_CASE("masks from fits") {
    const LabelMap labels = testsupport::quadrant_labels(8, 8);
    AffineFit f;
    f.channels[0] = {1.5, 2.0, 0.0};
    const std::vector<RegionFit> fits{{3, labels.mask_for(3), f}, {7, labels.mask_for(7), AffineFit{}}};
    const OperatorMaskSet m = masks_from_fits(fits, 8, 8);
    CHECK(m.mul(0)[7] == 1.5);   // (7,0) is class 3
    CHECK(m.add(0)[7] == 2.0);
    CHECK(m.mul(0)[0] == 1.0);
    const std::vector<RegionFit> overlap{{3, labels.mask_for(3), f}, {4, labels.mask_for(3), f}};
    CHECK_THROWS_AS(masks_from_fits(overlap, 8, 8), Error);
}

TEST_CASE("harmonize on sRGB input") {
    const ImageBuf real = quantize_8bit(testsupport::random_image(32, 32, 6, 0.3f, 0.7f));
    const LabelMap labels = testsupport::quadrant_labels(32, 32);
    const auto regions = regions_from_labels(labels);
    CHECK(regions.size() == 3);
    CHECK(regions_from_labels(labels, {9}).size() == 1);
    CHECK_THROWS_AS(regions_from_labels(labels, {42}), Error);

    HarmonizeOptions opts;
    CHECK_THROWS_AS(harmonize(real, regions, opts), Error);
    opts.target = &real;
    const HarmonizeResult same = harmonize(real, regions, opts);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < real.pixel_count(); ++i) CHECK(std::abs(same.image.plane(c)[i] - real.plane(c)[i]) < 1e-3);
    }
    CHECK(same.image == apply(real, same.masks));

    opts.mode = HarmonizeMode::Blind;
    opts.target = nullptr;
    CHECK_NOTHROW(harmonize(real, regions, opts));
    opts.fit.space = ColorSpace::HLS;
    CHECK(harmonize(real, regions, opts).masks.space() == ColorSpace::HLS);
}
