#include "doctest.h"

#include <cmath>
#include <numbers>

#include "harmony/error.hpp"
#include "harmony/metrics.hpp"
#include "support.hpp"

using namespace harmony;

namespace {

class Constant final : public PerceptualBackend {
public:
    std::string name() const override { return "constant"; }
    double distance(const ImageBuf&, const ImageBuf&) const override { return 0.25; }
};

}  // namespace

TEST_CASE("uniform offset of 16 levels gives 24.05 dB") {
    const ImageBuf a(16, 16, ColorSpace::SRGB_01, 100.0f / 255.0f);
    const ImageBuf b(16, 16, ColorSpace::SRGB_01, 116.0f / 255.0f);
    CHECK(mse(a, b) == doctest::Approx(256.0));
    CHECK(std::abs(psnr(a, b) - 24.05) <= 0.01);
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(65025.0 / 256.0)).epsilon(1e-12));
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr_from_mse(0.0) > 0);
    CHECK_THROWS_AS(mse(a, ImageBuf(8, 8)), Error);
}

TEST_CASE("SSIM matches skimage on a formula image") {
    const int w = 48, h = 40;
    std::vector<double> a(w * h), b(w * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double va = std::nearbyint(128 + 100 * std::sin(x * 0.3) * std::cos(y * 0.2));
            a[y * w + x] = va;
            b[y * w + x] = std::nearbyint(std::clamp(va + 20 * std::cos(x * 0.7 + y * 0.4), 0.0, 255.0));
        }
    }
    // skimage.metrics.structural_similarity(gaussian_weights=True, sigma=1.5,
    // use_sample_covariance=False, data_range=255)
    CHECK(ssim_plane(a, b, w, h) == doctest::Approx(0.8662508322127981).epsilon(1e-9));
    CHECK(ssim_plane(a, a, w, h) == 1.0);
    CHECK_THROWS_AS(ssim_plane(std::vector<double>(100), std::vector<double>(100), 10, 10), Error);
}

TEST_CASE("SSIM of an image with itself is exactly one") {
    const ImageBuf img = testsupport::random_image(40, 30, 2);
    CHECK(ssim(img, img) == 1.0);
    CHECK(ssim(img, testsupport::random_image(40, 30, 3)) < 0.5);
}

TEST_CASE("Charbonnier") {
    const std::vector<double> a{0.1, 0.5, 0.9};
    CHECK(charbonnier(a, a, 1e-3) == 1e-3);
    const std::vector<double> b{0.1, 0.5, 1.9};
    CHECK(charbonnier(a, b, 1e-3) == doctest::Approx((2e-3 + std::sqrt(1.0 + 1e-6)) / 3.0));
    const ImageBuf img = testsupport::random_image(8, 8, 1);
    CHECK(charbonnier(img, img, 0.01) == 0.01);
    CHECK_THROWS_AS(charbonnier(a, a, 0.0), Error);
    CHECK_THROWS_AS(charbonnier(a, std::vector<double>{1.0}, 1e-3), Error);
}

TEST_CASE("relativistic losses") {
    CriticScores same{{0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}};
    CHECK(std::abs(rel_d_loss(same) - 2.0 * std::numbers::ln2) < 1e-12);
    CHECK(std::abs(rel_g_loss(same) - 2.0 * std::numbers::ln2) < 1e-12);
    CriticScores confident{{20.0}, {-20.0}};
    CHECK(rel_d_loss(confident) < 1e-8);
    CHECK(rel_g_loss(confident) == doctest::Approx(-2.0 * std::log(1e-12)).epsilon(1e-9));
    CriticScores extreme{{1e6}, {-1e6}};
    CHECK(std::isfinite(rel_g_loss(extreme)));
    CHECK_THROWS_AS(rel_d_loss(CriticScores{{}, {}}), Error);
    CHECK_THROWS_AS(rel_d_loss(CriticScores{{1.0}, {1.0, 2.0}}), Error);
}

TEST_CASE("total loss weights") {
    CHECK(total_loss(2.0, 3.0, 100.0) == 5.5);
    CHECK(total_loss(1.0, 1.0, 1.0, {2.0, 0.0, 1.0}) == 3.0);
}

TEST_CASE("perceptual registry") {
    auto& reg = PerceptualRegistry::global();
    CHECK(reg.contains(std::string(DownsampledLumaL1::kName)));
    const ImageBuf img = testsupport::random_image(16, 16, 1);
    CHECK(perceptual_distance(img, img, std::string(DownsampledLumaL1::kName)) == 0.0);
    CHECK_THROWS_AS(perceptual_distance(img, img, "lpips-vgg"), Error);
    reg.add(std::make_shared<Constant>());
    CHECK(perceptual_distance(img, img, "constant") == 0.25);
    reg.remove("constant");
    CHECK(!reg.contains("constant"));
}

TEST_CASE("eval report") {
    const ImageBuf a = testsupport::random_image(16, 16, 1);
    const ImageBuf b = testsupport::random_image(16, 16, 2);
    EvalReport report;
    report.rows.push_back({"x", score_pair(a, a, report.perceptual_backend), score_pair(b, a, report.perceptual_backend)});
    report.rows.push_back({"y", score_pair(b, a, report.perceptual_backend), score_pair(b, a, report.perceptual_backend)});
    const ImageScores mean = report.mean_prediction();
    CHECK(mean.mse == doctest::Approx(report.rows[1].prediction.mse / 2.0));
    REQUIRE(report.mean_composite());
    const auto j = report_to_json(report);
    CHECK(j["schema"] == "harmony-eval/1");
    CHECK(j["images"].size() == 2);
    CHECK(j["images"][0]["harmonized"]["psnr"] == "inf");
    CHECK(j["aggregate"]["count"] == 2);
    CHECK(j["aggregate"]["composite"]["mse"].get<double>() == doctest::Approx(report.rows[1].composite->mse));
    const std::string table = format_table(report);
    CHECK(table.find("Composite") != std::string::npos);
    CHECK(table.find("Harmonized") != std::string::npos);
    CHECK(table.find("PSNR") != std::string::npos);
}
