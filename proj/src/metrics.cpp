#include "harmony/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "harmony/error.hpp"

namespace harmony {

namespace {

void require_same(const ImageBuf& a, const ImageBuf& b, const char* op) {
    if (!a.same_dims(b)) fail(ErrorCode::DimensionMismatch, std::string(op) + ": image dimensions differ");
    if (a.space() != b.space()) fail(ErrorCode::InvalidSpace, std::string(op) + ": color spaces differ");
}

double level(float v, bool quantize) {
    const double s = static_cast<double>(v) * kPeak;
    return quantize ? std::round(std::clamp(s, 0.0, kPeak)) : s;
}

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kSsimWindow);
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - r;
        k[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-mode filter: output is (w - 10) x (h - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

// log(sigmoid(x)) floored at log(1e-12), computed without overflow.
double log_sigmoid(double x) {
    const double softplus_neg = x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
    return std::max(-softplus_neg, std::log(1e-12));
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void validate_scores(const CriticScores& s) {
    if (s.real.empty() || s.real.size() != s.fake.size()) {
        fail(ErrorCode::InvalidArgument, "critic scores need equal, non-empty real and fake batches");
    }
    for (const auto* v : {&s.real, &s.fake}) {
        for (double x : *v) {
            if (!std::isfinite(x)) fail(ErrorCode::InvalidArgument, "critic scores must be finite");
        }
    }
}

// Shared body of both relativistic losses:
//   -mean log s(first - mean(second)) - mean log(1 - s(second - mean(first)))
double relativistic_term(const std::vector<double>& first, const std::vector<double>& second) {
    const double mean_first = mean_of(first);
    const double mean_second = mean_of(second);
    double a = 0.0;
    for (double c : first) a += log_sigmoid(c - mean_second);
    double b = 0.0;
    // log(1 - s(x)) = log s(-x)
    for (double c : second) b += log_sigmoid(-(c - mean_first));
    return -a / static_cast<double>(first.size()) - b / static_cast<double>(second.size());
}

std::string fmt(double v, int precision) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

nlohmann::json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

nlohmann::json scores_to_json(const ImageScores& s) {
    nlohmann::json j{{"mse", number_or_inf(s.mse)},
                     {"psnr", number_or_inf(s.psnr)},
                     {"ssim", s.ssim},
                     {"perceptual", s.perceptual}};
    if (s.iou) j["iou"] = *s.iou;
    return j;
}

ImageScores mean_scores(const std::vector<const ImageScores*>& rows) {
    ImageScores m;
    bool all_iou = !rows.empty();
    double iou = 0.0;
    for (const auto* r : rows) {
        m.mse += r->mse;
        m.psnr += r->psnr;
        m.ssim += r->ssim;
        m.perceptual += r->perceptual;
        if (r->iou) {
            iou += *r->iou;
        } else {
            all_iou = false;
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
    m.mse /= n;
    m.psnr /= n;
    m.ssim /= n;
    m.perceptual /= n;
    if (all_iou) m.iou = iou / n;
    return m;
}

}  // namespace

double mse(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts) {
    require_same(a, b, "mse");
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = a.plane(c);
        const auto pb = b.plane(c);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            const double d = level(pa[i], opts.quantize) - level(pb[i], opts.quantize);
            sum += d * d;
        }
    }
    return sum / (3.0 * static_cast<double>(a.pixel_count()));
}

double psnr_from_mse(double m) {
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kPeak * kPeak / m);
}

double psnr(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts) { return psnr_from_mse(mse(a, b, opts)); }

std::vector<double> luma_255(const ImageBuf& img, bool quantize) {
    std::vector<double> y(img.pixel_count());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.299 * level(img.plane(0)[i], quantize) + 0.587 * level(img.plane(1)[i], quantize) +
               0.114 * level(img.plane(2)[i], quantize);
    }
    return y;
}

double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height,
                  double dynamic_range) {
    if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height) {
        fail(ErrorCode::DimensionMismatch, "ssim: raster sizes differ");
    }
    if (width < kSsimWindow || height < kSsimWindow) {
        fail(ErrorCode::WindowTooLarge, "ssim: image smaller than the 11x11 window");
    }
    static const std::vector<double> kernel = gaussian_kernel();
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, width, height, kernel);
    const auto my = filter_valid(y, width, height, kernel);
    const auto mxx = filter_valid(xx, width, height, kernel);
    const auto myy = filter_valid(yy, width, height, kernel);
    const auto mxy = filter_valid(xy, width, height, kernel);
    const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
    const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
        const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
        total += num / den;
    }
    return total / static_cast<double>(mx.size());
}

double ssim(const ImageBuf& a, const ImageBuf& b, const MetricOptions& opts) {
    require_same(a, b, "ssim");
    return ssim_plane(luma_255(a, opts.quantize), luma_255(b, opts.quantize), a.width(), a.height());
}

double charbonnier(std::span<const double> a, std::span<const double> b, double epsilon) {
    if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "charbonnier: sizes differ");
    if (!(epsilon > 0.0)) fail(ErrorCode::InvalidArgument, "charbonnier: epsilon must be > 0");
    if (a.empty()) return epsilon;
    // sqrt(d^2 + e^2) = e + d^2 / (sqrt(d^2 + e^2) + e): exact e for d = 0 and
    // no cancellation for small d.
    double excess = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        const double d2 = d * d;
        excess += d2 / (std::sqrt(d2 + epsilon * epsilon) + epsilon);
    }
    return epsilon + excess / static_cast<double>(a.size());
}

double charbonnier(const ImageBuf& a, const ImageBuf& b, double epsilon) {
    require_same(a, b, "charbonnier");
    std::vector<double> va, vb;
    va.reserve(a.pixel_count() * 3);
    vb.reserve(a.pixel_count() * 3);
    for (int c = 0; c < 3; ++c) {
        va.insert(va.end(), a.plane(c).begin(), a.plane(c).end());
        vb.insert(vb.end(), b.plane(c).begin(), b.plane(c).end());
    }
    return charbonnier(va, vb, epsilon);
}

double rel_d_loss(const CriticScores& scores) {
    validate_scores(scores);
    return relativistic_term(scores.real, scores.fake);
}

double rel_g_loss(const CriticScores& scores) {
    validate_scores(scores);
    return relativistic_term(scores.fake, scores.real);
}

double total_loss(double charbonnier_term, double perceptual_term, double adversarial_term,
                  const LossWeights& w) {
    for (double v : {charbonnier_term, perceptual_term, adversarial_term}) {
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "loss components must be finite");
    }
    return w.charbonnier * charbonnier_term + w.perceptual * perceptual_term + w.adversarial * adversarial_term;
}

double DownsampledLumaL1::distance(const ImageBuf& a, const ImageBuf& b) const {
    require_same(a, b, "perceptual_distance");
    constexpr int kFactor = 4;
    const int bw = (a.width() + kFactor - 1) / kFactor;
    const int bh = (a.height() + kFactor - 1) / kFactor;
    const auto ya = luma_255(a, false);
    const auto yb = luma_255(b, false);
    double total = 0.0;
    for (int by = 0; by < bh; ++by) {
        for (int bx = 0; bx < bw; ++bx) {
            double sa = 0.0, sb = 0.0;
            int n = 0;
            for (int y = by * kFactor; y < std::min((by + 1) * kFactor, a.height()); ++y) {
                for (int x = bx * kFactor; x < std::min((bx + 1) * kFactor, a.width()); ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * a.width() + x;
                    sa += ya[i];
                    sb += yb[i];
                    ++n;
                }
            }
            total += std::abs(sa - sb) / n / kPeak;
        }
    }
    return total / (static_cast<double>(bw) * bh);
}

PerceptualRegistry& PerceptualRegistry::global() {
    static PerceptualRegistry registry = [] {
        PerceptualRegistry r;
        r.add(std::make_shared<DownsampledLumaL1>());
        return r;
    }();
    return registry;
}

void PerceptualRegistry::add(std::shared_ptr<const PerceptualBackend> backend) {
    backends_[backend->name()] = std::move(backend);
}

void PerceptualRegistry::remove(const std::string& name) { backends_.erase(name); }

const PerceptualBackend& PerceptualRegistry::get(const std::string& name) const {
    auto it = backends_.find(name);
    if (it == backends_.end()) fail(ErrorCode::NoBackend, "no perceptual backend registered as '" + name + "'");
    return *it->second;
}

bool PerceptualRegistry::contains(const std::string& name) const { return backends_.count(name) != 0; }

double perceptual_distance(const ImageBuf& a, const ImageBuf& b, const std::string& backend,
                           const PerceptualRegistry& registry) {
    return registry.get(backend).distance(a, b);
}

ImageScores score_pair(const ImageBuf& prediction, const ImageBuf& truth, const std::string& backend,
                       const MetricOptions& opts) {
    ImageScores s;
    s.mse = mse(prediction, truth, opts);
    s.psnr = psnr_from_mse(s.mse);
    s.ssim = ssim(prediction, truth, opts);
    s.perceptual = perceptual_distance(prediction, truth, backend);
    return s;
}

ImageScores EvalReport::mean_prediction() const {
    std::vector<const ImageScores*> ptrs;
    for (const auto& r : rows) ptrs.push_back(&r.prediction);
    return mean_scores(ptrs);
}

std::optional<ImageScores> EvalReport::mean_composite() const {
    std::vector<const ImageScores*> ptrs;
    for (const auto& r : rows) {
        if (!r.composite) return std::nullopt;
        ptrs.push_back(&*r.composite);
    }
    if (ptrs.empty()) return std::nullopt;
    return mean_scores(ptrs);
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row{{"id", r.id}, {"harmonized", scores_to_json(r.prediction)}};
        if (r.composite) row["composite"] = scores_to_json(*r.composite);
        rows.push_back(std::move(row));
    }
    nlohmann::json aggregate{{"harmonized", scores_to_json(report.mean_prediction())}, {"count", report.rows.size()}};
    if (auto c = report.mean_composite()) {
        aggregate["composite"] = scores_to_json(*c);
    } else {
        aggregate["composite"] = nullptr;
    }
    return {{"schema", "harmony-eval/1"},
            {"perceptual_backend", report.perceptual_backend},
            {"config", report.config},
            {"images", rows},
            {"aggregate", aggregate}};
}

std::string format_table(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s| %10s | %8s | %6s | %10s | %6s\n", "Method", "MSE", "PSNR", "SSIM",
                  "NOT-LPIPS", "IOU");
    out << line << std::string(67, '-') << '\n';
    auto row = [&](const char* name, const std::optional<ImageScores>& s) {
        if (!s) {
            std::snprintf(line, sizeof(line), "%-12s| %10s | %8s | %6s | %10s | %6s\n", name, "-", "-", "-", "-", "-");
        } else {
            std::snprintf(line, sizeof(line), "%-12s| %10s | %8s | %6s | %10s | %6s\n", name, fmt(s->mse, 2).c_str(),
                          fmt(s->psnr, 2).c_str(), fmt(s->ssim, 2).c_str(), fmt(s->perceptual, 3).c_str(),
                          s->iou ? fmt(*s->iou * 100.0, 1).c_str() : "-");
        }
        out << line;
    };
    row("Composite", report.mean_composite());
    row("Harmonized", report.mean_prediction());
    return out.str();
}

}  // namespace harmony
