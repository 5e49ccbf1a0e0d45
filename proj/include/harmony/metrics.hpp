#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "harmony/image.hpp"

namespace harmony {

/// Peak value of the 8-bit evaluation scale.
inline constexpr double kPeak = 255.0;

struct MetricOptions {
    /// Round samples to the nearest 8-bit level before comparing, as a
    /// file-based evaluation would.
    bool quantize = true;
};

/// Mean squared channel difference on the 0-255 scale.
double mse(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts = {});
/// 10 log10(255^2 / mse); +infinity when mse == 0.
double psnr_from_mse(double mse);
double psnr(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts = {});

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean SSIM over all fully-contained 11x11 Gaussian windows of two
/// single-channel rasters sampled on [0, dynamic_range].
double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height,
                  double dynamic_range = kPeak);
/// SSIM of the BT.601 luma (0-255) of two SRGB_01 images.
double ssim(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts = {});
std::vector<double> luma_255(const ImageBuf& img, bool quantize);

/// mean sqrt((a - b)^2 + eps^2) over all elements.
double charbonnier(std::span<const double> a, std::span<const double> b, double epsilon);
/// Same over every channel sample of two images (SRGB_01 units).
double charbonnier(const ImageBuf& a, const ImageBuf& b, double epsilon);

/// Critic outputs C(.) over a batch of real and fake images.
struct CriticScores {
    std::vector<double> real;
    std::vector<double> fake;
};

/// Relativistic discriminator loss:
///   -mean log s(C_real - mean C_fake) - mean log(1 - s(C_fake - mean C_real))
double rel_d_loss(const CriticScores& scores);
/// Generator counterpart with the roles of the two terms exchanged.
double rel_g_loss(const CriticScores& scores);

struct LossWeights {
    double charbonnier = 1.0;
    double perceptual = 1.0;
    double adversarial = 0.005;
};

double total_loss(double charbonnier_term, double perceptual_term, double adversarial_term,
                  const LossWeights& weights = {});

/// Pluggable perceptual distance. The repo ships no pretrained network.
class PerceptualBackend {
public:
    virtual ~PerceptualBackend() = default;
    virtual std::string name() const = 0;
    virtual double distance(const ImageBuf& a, const ImageBuf& b) const = 0;
};

/// NOT LPIPS: mean absolute difference of 4x box-downsampled luma on [0,1].
class DownsampledLumaL1 final : public PerceptualBackend {
public:
    static constexpr std::string_view kName = "luma-l1-4x-not-lpips";
    std::string name() const override { return std::string(kName); }
    double distance(const ImageBuf& a, const ImageBuf& b) const override;
};

class PerceptualRegistry {
public:
    /// Registry pre-populated with DownsampledLumaL1.
    static PerceptualRegistry& global();

    void add(std::shared_ptr<const PerceptualBackend> backend);
    void remove(const std::string& name);
    /// Throws NoBackend.
    const PerceptualBackend& get(const std::string& name) const;
    bool contains(const std::string& name) const;

private:
    std::map<std::string, std::shared_ptr<const PerceptualBackend>> backends_;
};

double perceptual_distance(const ImageBuf& a, const ImageBuf& b, const std::string& backend,
                           const PerceptualRegistry& registry = PerceptualRegistry::global());

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

struct ImageScores {
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    std::optional<double> iou;
};

ImageScores score_pair(const ImageBuf& prediction, const ImageBuf& truth, const std::string& backend,
                       const MetricOptions& opts = {});

struct EvalRow {
    std::string id;
    ImageScores prediction;
    std::optional<ImageScores> composite;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::string perceptual_backend = std::string(DownsampledLumaL1::kName);
    nlohmann::json config;

    /// Means over rows; composite mean is absent when any row lacks it.
    ImageScores mean_prediction() const;
    std::optional<ImageScores> mean_composite() const;
};

nlohmann::json report_to_json(const EvalReport& report);
/// Comparison table: one "Composite" baseline row and one "Harmonized" row.
std::string format_table(const EvalReport& report);

}  // namespace harmony
