#include "harmony/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "harmony/error.hpp"

namespace harmony {

namespace {

constexpr std::array<std::pair<FilterKind, std::string_view>, 8> kFilterNames{{
    {FilterKind::Brightness, "brightness"},
    {FilterKind::Contrast, "contrast"},
    {FilterKind::Saturate, "saturate"},
    {FilterKind::HueRotate, "hue_rotate"},
    {FilterKind::Sepia, "sepia"},
    {FilterKind::Gamma, "gamma"},
    {FilterKind::ChannelCurve, "channel_curve"},
    {FilterKind::ColorOverlay, "color_overlay"},
}};

constexpr std::array<std::pair<BlendMode, std::string_view>, 7> kBlendNames{{
    {BlendMode::Normal, "normal"},
    {BlendMode::Multiply, "multiply"},
    {BlendMode::Screen, "screen"},
    {BlendMode::Overlay, "overlay"},
    {BlendMode::SoftLight, "soft_light"},
    {BlendMode::Darken, "darken"},
    {BlendMode::Lighten, "lighten"},
}};

constexpr std::array<std::pair<NoiseKind, std::string_view>, 5> kNoiseNames{{
    {NoiseKind::Gaussian, "gaussian"},
    {NoiseKind::Laplace, "laplace"},
    {NoiseKind::Poisson, "poisson"},
    {NoiseKind::MotionBlur, "motion_blur"},
    {NoiseKind::Jpeg, "jpeg"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <typename Enum, std::size_t N>
Enum value_of(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view name,
              ErrorCode code, const char* what) {
    for (const auto& [e, n] : table) {
        if (n == name) return e;
    }
    fail(code, std::string("unknown ") + what + " '" + std::string(name) + "'");
}

std::array<float, 3> apply_matrix(const ColorMatrix& m, const std::array<float, 3>& p) {
    std::array<float, 3> out{};
    for (int r = 0; r < 3; ++r) {
        out[r] = static_cast<float>(m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2]);
    }
    return out;
}

double blend_channel(BlendMode mode, double b, double s) {
    switch (mode) {
        case BlendMode::Normal: return s;
        case BlendMode::Multiply: return b * s;
        case BlendMode::Screen: return b + s - b * s;
        case BlendMode::Overlay: return b <= 0.5 ? 2.0 * b * s : 1.0 - 2.0 * (1.0 - b) * (1.0 - s);
        case BlendMode::SoftLight: {
            if (s <= 0.5) return b - (1.0 - 2.0 * s) * b * (1.0 - b);
            const double d = b <= 0.25 ? ((16.0 * b - 12.0) * b + 4.0) * b : std::sqrt(b);
            return b + (2.0 * s - 1.0) * (d - b);
        }
        case BlendMode::Darken: return std::min(b, s);
        case BlendMode::Lighten: return std::max(b, s);
    }
    return s;
}

void require_params(const FilterPrimitive& p, std::size_t n) {
    if (p.params.size() != n) {
        fail(ErrorCode::InvalidArgument, std::string(to_string(p.kind)) + " expects " + std::to_string(n) +
                                             " parameter(s), got " + std::to_string(p.params.size()));
    }
    for (double v : p.params) {
        if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "filter parameters must be finite");
    }
}

void require_range(const FilterPrimitive& p, double v, double lo, double hi) {
    if (v < lo || v > hi) {
        fail(ErrorCode::InvalidArgument, std::string(to_string(p.kind)) + " parameter " + std::to_string(v) +
                                             " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

void require_image(const ImageBuf& img, int width, int height, const char* op) {
    if (img.space() != ColorSpace::SRGB_01) {
        fail(ErrorCode::InvalidSpace, std::string(op) + ": expected SRGB_01 input");
    }
    if (img.width() != width || img.height() != height) {
        fail(ErrorCode::DimensionMismatch, std::string(op) + ": image and mask dimensions differ");
    }
}

FilterChain chain_from_json(const nlohmann::json& j) {
    FilterChain chain;
    chain.name = j.at("name").get<std::string>();
    for (const auto& step : j.at("steps")) {
        FilterPrimitive p;
        p.kind = filter_kind_from_string(step.at("op").get<std::string>());
        p.params = step.value("params", std::vector<double>{});
        if (step.contains("mode")) p.blend = blend_mode_from_string(step.at("mode").get<std::string>());
        p.validate();
        chain.steps.push_back(std::move(p));
    }
    if (chain.steps.empty()) fail(ErrorCode::InvalidArgument, "filter chain '" + chain.name + "' is empty");
    return chain;
}

nlohmann::json chain_to_json(const FilterChain& chain) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& p : chain.steps) {
        nlohmann::json s{{"op", to_string(p.kind)}, {"params", p.params}};
        if (p.kind == FilterKind::ColorOverlay) s["mode"] = to_string(p.blend);
        steps.push_back(std::move(s));
    }
    return {{"name", chain.name}, {"steps", std::move(steps)}};
}

Range range_from_json(const nlohmann::json& j) {
    return Range{j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json range_to_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

// Noise value for element (pixel i, channel c) depends only on (seed, i, c),
// so the real image and the composite see the same realization.
Rng element_rng(std::uint64_t seed, std::size_t pixel, int channel) {
    return Rng(derive_seed(seed, pixel * 3 + static_cast<std::size_t>(channel)));
}

ImageBuf additive_noise(const ImageBuf& img, const NoiseSpec& noise, std::uint64_t seed) {
    ImageBuf out = img;
    const double scale = noise.params.at(0);
    for (int c = 0; c < 3; ++c) {
        auto plane = out.plane(c);
        for (std::size_t i = 0; i < plane.size(); ++i) {
            Rng rng = element_rng(seed, i, c);
            const double n = noise.kind == NoiseKind::Gaussian ? scale * rng.normal() : rng.laplace(scale);
            plane[i] = static_cast<float>(plane[i] + n);
        }
    }
    clamp_to_gamut(out);
    return out;
}

ImageBuf poisson_noise(const ImageBuf& img, double scale, std::uint64_t seed) {
    ImageBuf out = img;
    for (int c = 0; c < 3; ++c) {
        auto plane = out.plane(c);
        for (std::size_t i = 0; i < plane.size(); ++i) {
            Rng rng = element_rng(seed, i, c);
            plane[i] = static_cast<float>(static_cast<double>(rng.poisson(plane[i] * scale)) / scale);
        }
    }
    clamp_to_gamut(out);
    return out;
}

ImageBuf motion_blur(const ImageBuf& img, int length, double angle_deg) {
    if (length <= 1) return img;
    const double theta = angle_deg * std::numbers::pi / 180.0;
    std::vector<std::pair<int, int>> taps;
    for (int t = 0; t < length; ++t) {
        const double d = t - (length - 1) / 2.0;
        taps.emplace_back(static_cast<int>(std::lround(d * std::cos(theta))),
                          static_cast<int>(std::lround(d * std::sin(theta))));
    }
    const double weight = 1.0 / length;
    ImageBuf out(img.width(), img.height(), img.space());
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                double acc = 0.0;
                for (const auto& [dx, dy] : taps) {
                    const int sx = std::clamp(x + dx, 0, img.width() - 1);
                    const int sy = std::clamp(y + dy, 0, img.height() - 1);
                    acc += img.at(c, sx, sy);
                }
                out.at(c, x, y) = static_cast<float>(acc * weight);
            }
        }
    }
    return out;
}

ImageBuf degrade(const ImageBuf& img, const NoiseSpec& noise, std::uint64_t seed) {
    switch (noise.kind) {
        case NoiseKind::Gaussian:
        case NoiseKind::Laplace: return additive_noise(img, noise, seed);
        case NoiseKind::Poisson: return poisson_noise(img, noise.params.at(0), seed);
        case NoiseKind::MotionBlur:
            return motion_blur(img, static_cast<int>(std::lround(noise.params.at(0))), noise.params.at(1));
        case NoiseKind::Jpeg: {
            const int quality = static_cast<int>(std::lround(noise.params.at(0)));
            return decode_jpeg(encode_jpeg(img, quality));
        }
    }
    fail(ErrorCode::UnknownKind, "unknown noise kind");
}

void validate_noise(const NoiseSpec& noise) {
    const std::size_t expected = noise.kind == NoiseKind::MotionBlur ? 2 : 1;
    if (noise.params.size() != expected) {
        fail(ErrorCode::InvalidArgument, std::string(to_string(noise.kind)) + " expects " +
                                             std::to_string(expected) + " parameter(s)");
    }
    const double p = noise.params[0];
    switch (noise.kind) {
        case NoiseKind::Gaussian:
        case NoiseKind::Laplace:
            if (!(p >= 0.0)) fail(ErrorCode::InvalidArgument, "noise scale must be >= 0");
            break;
        case NoiseKind::Poisson:
            if (!(p > 0.0)) fail(ErrorCode::InvalidArgument, "poisson scale must be > 0");
            break;
        case NoiseKind::MotionBlur:
            if (!(p >= 1.0)) fail(ErrorCode::InvalidArgument, "motion blur length must be >= 1");
            break;
        case NoiseKind::Jpeg:
            if (!(p >= 1.0 && p <= 100.0)) fail(ErrorCode::InvalidArgument, "jpeg quality must be in [1,100]");
            break;
    }
}

NoiseSpec draw_noise(NoiseKind kind, const NoiseRanges& r, Rng& rng) {
    auto draw_int = [&](const Range& range) {
        const auto lo = static_cast<std::int64_t>(std::lround(range.lo));
        const auto hi = static_cast<std::int64_t>(std::lround(range.hi));
        return static_cast<double>(lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
    };
    switch (kind) {
        case NoiseKind::Gaussian: return {kind, {rng.uniform(r.gaussian_sigma.lo, r.gaussian_sigma.hi)}};
        case NoiseKind::Laplace: return {kind, {rng.uniform(r.laplace_b.lo, r.laplace_b.hi)}};
        case NoiseKind::Poisson: return {kind, {rng.uniform(r.poisson_scale.lo, r.poisson_scale.hi)}};
        case NoiseKind::MotionBlur: {
            const double length = draw_int(r.motion_length);
            return {kind, {length, rng.uniform(0.0, 180.0)}};
        }
        case NoiseKind::Jpeg: return {kind, {draw_int(r.jpeg_quality)}};
    }
    fail(ErrorCode::UnknownKind, "unknown noise kind");
}

std::size_t draw_categorical(const std::array<double, 3>& weights, Rng& rng) {
    const double total = weights[0] + weights[1] + weights[2];
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc && weights[i] > 0.0) return i;
    }
    // u landed on the upper edge through rounding; pick the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) return i;
    }
    return 0;
}

}  // namespace

std::string_view to_string(FilterKind kind) { return name_of(kFilterNames, kind); }
std::string_view to_string(BlendMode mode) { return name_of(kBlendNames, mode); }
std::string_view to_string(NoiseKind kind) { return name_of(kNoiseNames, kind); }

std::string_view to_string(PerturbMethod method) {
    switch (method) {
        case PerturbMethod::FilterChain: return "filter_chain";
        case PerturbMethod::LabScale: return "lab_scale";
        case PerturbMethod::BlurNoise: return "blur_noise";
    }
    return "?";
}

FilterKind filter_kind_from_string(std::string_view name) {
    return value_of(kFilterNames, name, ErrorCode::UnknownKind, "filter primitive");
}
BlendMode blend_mode_from_string(std::string_view name) {
    return value_of(kBlendNames, name, ErrorCode::UnknownKind, "blend mode");
}
NoiseKind noise_kind_from_string(std::string_view name) {
    return value_of(kNoiseNames, name, ErrorCode::UnknownKind, "noise kind");
}

ColorMatrix saturate_matrix(double s) {
    const auto& w = color::kLumaWeights;
    ColorMatrix m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = w[c] * (1.0 - s) + (r == c ? s : 0.0);
    }
    return m;
}

ColorMatrix hue_rotate_matrix(double degrees) {
    // Rotation about the gray axis in a luma/chroma basis (CSS filter form).
    const double a = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(a);
    const double sn = std::sin(a);
    const double wr = color::kLumaWeights[0], wg = color::kLumaWeights[1], wb = color::kLumaWeights[2];
    return {{
        {wr + cs * (1 - wr) - sn * wr, wg - cs * wg - sn * wg, wb - cs * wb + sn * (1 - wb)},
        {wr - cs * wr + sn * 0.143, wg + cs * (1 - wg) + sn * 0.140, wb - cs * wb - sn * 0.283},
        {wr - cs * wr - sn * (1 - wr), wg - cs * wg + sn * wg, wb + cs * (1 - wb) + sn * wb},
    }};
}

ColorMatrix sepia_matrix(double amount) {
    constexpr ColorMatrix kSepia{{
        {0.393, 0.769, 0.189},
        {0.349, 0.686, 0.168},
        {0.272, 0.534, 0.131},
    }};
    ColorMatrix m{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = amount * kSepia[r][c] + (1.0 - amount) * (r == c ? 1.0 : 0.0);
    }
    return m;
}

void FilterPrimitive::validate() const {
    switch (kind) {
        case FilterKind::Brightness:
        case FilterKind::Contrast:
        case FilterKind::Saturate:
            require_params(*this, 1);
            require_range(*this, params[0], 0.0, 1e6);
            break;
        case FilterKind::HueRotate:
            require_params(*this, 1);
            require_range(*this, params[0], -360.0, 360.0);
            break;
        case FilterKind::Sepia:
            require_params(*this, 1);
            require_range(*this, params[0], 0.0, 1.0);
            break;
        case FilterKind::Gamma:
            require_params(*this, 1);
            if (!(params[0] > 0.0)) fail(ErrorCode::InvalidArgument, "gamma exponent must be > 0");
            break;
        case FilterKind::ChannelCurve: require_params(*this, 6); break;
        case FilterKind::ColorOverlay:
            require_params(*this, 4);
            for (double v : params) require_range(*this, v, 0.0, 1.0);
            break;
    }
}

std::array<float, 3> FilterPrimitive::apply(const std::array<float, 3>& rgb) const {
    std::array<float, 3> out = rgb;
    switch (kind) {
        case FilterKind::Brightness:
            for (auto& v : out) v = static_cast<float>(v * params[0]);
            break;
        case FilterKind::Contrast:
            for (auto& v : out) v = static_cast<float>((v - 0.5) * params[0] + 0.5);
            break;
        case FilterKind::Saturate: out = apply_matrix(saturate_matrix(params[0]), rgb); break;
        case FilterKind::HueRotate: out = apply_matrix(hue_rotate_matrix(params[0]), rgb); break;
        case FilterKind::Sepia: out = apply_matrix(sepia_matrix(params[0]), rgb); break;
        case FilterKind::Gamma:
            for (auto& v : out) v = static_cast<float>(std::pow(std::max(v, 0.0f), params[0]));
            break;
        case FilterKind::ChannelCurve:
            for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(params[c] * rgb[c] + params[3 + c]);
            break;
        case FilterKind::ColorOverlay: {
            const double alpha = params[3];
            for (int c = 0; c < 3; ++c) {
                const double b = rgb[c];
                const double blended = blend_channel(blend, b, params[c]);
                out[c] = static_cast<float>(b + alpha * (blended - b));
            }
            break;
        }
    }
    for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

std::array<float, 3> FilterChain::apply(const std::array<float, 3>& rgb) const {
    std::array<float, 3> p = rgb;
    for (const auto& step : steps) p = step.apply(p);
    return p;
}

FilterBank::FilterBank(std::vector<FilterChain> chains) : chains_(std::move(chains)) {
    for (std::size_t i = 0; i < chains_.size(); ++i) {
        if (chains_[i].steps.empty()) {
            fail(ErrorCode::InvalidArgument, "filter chain '" + chains_[i].name + "' is empty");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (chains_[j].name == chains_[i].name) {
                fail(ErrorCode::InvalidArgument, "duplicate filter chain name '" + chains_[i].name + "'");
            }
        }
    }
}

const FilterChain& FilterBank::find(std::string_view name) const {
    for (const auto& c : chains_) {
        if (c.name == name) return c;
    }
    fail(ErrorCode::UnknownChain, "unknown filter chain '" + std::string(name) + "'");
}

bool FilterBank::contains(std::string_view name) const {
    return std::any_of(chains_.begin(), chains_.end(), [&](const FilterChain& c) { return c.name == name; });
}

FilterBankFile parse_filter_banks(const nlohmann::json& doc) {
    auto parse_list = [](const nlohmann::json& list) {
        std::vector<FilterChain> chains;
        for (const auto& item : list) chains.push_back(chain_from_json(item));
        return FilterBank(std::move(chains));
    };
    FilterBankFile out;
    try {
        if (doc.contains("filters")) out.filters = parse_list(doc.at("filters"));
        if (doc.contains("css")) out.css = parse_list(doc.at("css"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("malformed filter bank: ") + e.what());
    }
    return out;
}

FilterBankFile load_filter_banks(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open filter bank '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, "filter bank '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_filter_banks(doc);
}

nlohmann::json filter_bank_to_json(const FilterBank& bank) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : bank.chains()) list.push_back(chain_to_json(c));
    return list;
}

const FilterBankFile& default_filter_banks() {
    static const FilterBankFile banks = parse_filter_banks(nlohmann::json::parse(default_filter_bank_json()));
    return banks;
}

// --- records ---------------------------------------------------------------

nlohmann::json record_to_json(const PerturbRecord& record) {
    nlohmann::json j{{"region_label", record.region_label},
                     {"method", to_string(record.method())},
                     {"seed", record.seed}};
    std::visit(
        [&](const auto& payload) {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, ChainPayload>) {
                j["chain"] = payload.chain_name;
            } else if constexpr (std::is_same_v<T, LabScalePayload>) {
                j["multipliers"] = payload.multipliers;
            } else {
                j["noise"] = {{"kind", to_string(payload.noise.kind)}, {"params", payload.noise.params}};
            }
        },
        record.payload);
    j["css_overlay"] = record.css_overlay ? nlohmann::json(*record.css_overlay) : nlohmann::json(nullptr);
    return j;
}

PerturbRecord record_from_json(const nlohmann::json& j) {
    PerturbRecord r;
    try {
        r.region_label = j.at("region_label").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        const auto method = j.at("method").get<std::string>();
        int populated = static_cast<int>(j.contains("chain")) + static_cast<int>(j.contains("multipliers")) +
                        static_cast<int>(j.contains("noise"));
        if (populated != 1) fail(ErrorCode::SchemaMismatch, "record must carry exactly one method payload");
        if (method == "filter_chain") {
            r.payload = ChainPayload{j.at("chain").get<std::string>()};
        } else if (method == "lab_scale") {
            LabScalePayload p{j.at("multipliers").get<std::array<double, 3>>()};
            for (double m : p.multipliers) {
                if (!(m > 0.0)) fail(ErrorCode::SchemaMismatch, "lab multipliers must be > 0");
            }
            r.payload = p;
        } else if (method == "blur_noise") {
            const auto& n = j.at("noise");
            r.payload = NoisePayload{
                NoiseSpec{noise_kind_from_string(n.at("kind").get<std::string>()), n.at("params").get<std::vector<double>>()}};
        } else {
            fail(ErrorCode::SchemaMismatch, "unknown perturbation method '" + method + "'");
        }
        if (j.contains("css_overlay") && !j.at("css_overlay").is_null()) {
            r.css_overlay = j.at("css_overlay").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("malformed perturb record: ") + e.what());
    }
    return r;
}

// --- config ----------------------------------------------------------------

void PerturbConfig::validate() const {
    if (!(css_probability >= 0.0 && css_probability <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "css_probability must be in [0,1]");
    }
    for (const auto& r : lab_scale_range) {
        if (!(r.lo > 0.0) || r.hi < r.lo) fail(ErrorCode::InvalidArgument, "lab_scale_range needs 0 < lo <= hi");
    }
    double total = 0.0;
    for (double w : method_weights) {
        if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "method weights must be >= 0");
        total += w;
    }
    if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "method weights must not all be zero");
    if (method_weights[0] > 0.0 && filter_bank.empty()) {
        fail(ErrorCode::InvalidArgument, "filter_chain weight is positive but the filter bank is empty");
    }
    if (method_weights[2] > 0.0 && noise_kinds.empty()) {
        fail(ErrorCode::InvalidArgument, "blur_noise weight is positive but no noise kinds are enabled");
    }
}

PerturbConfig perturb_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
    PerturbConfig cfg;
    try {
        if (j.contains("filter_bank")) {
            std::filesystem::path p = j.at("filter_bank").get<std::string>();
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            auto banks = load_filter_banks(p.string());
            cfg.filter_bank = std::move(banks.filters);
            cfg.css_bank = std::move(banks.css);
        }
        if (j.contains("filters") || j.contains("css")) {
            auto banks = parse_filter_banks(j);
            if (j.contains("filters")) cfg.filter_bank = std::move(banks.filters);
            if (j.contains("css")) cfg.css_bank = std::move(banks.css);
        }
        cfg.css_probability = j.value("css_probability", cfg.css_probability);
        if (j.contains("lab_scale_range")) {
            const auto& r = j.at("lab_scale_range");
            for (int c = 0; c < 3; ++c) cfg.lab_scale_range[c] = range_from_json(r.at(c));
        }
        if (j.contains("method_weights")) cfg.method_weights = j.at("method_weights").get<std::array<double, 3>>();
        if (j.contains("noise_kinds")) {
            cfg.noise_kinds.clear();
            for (const auto& k : j.at("noise_kinds")) cfg.noise_kinds.push_back(noise_kind_from_string(k.get<std::string>()));
        }
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            if (n.contains("gaussian_sigma")) cfg.noise.gaussian_sigma = range_from_json(n.at("gaussian_sigma"));
            if (n.contains("laplace_b")) cfg.noise.laplace_b = range_from_json(n.at("laplace_b"));
            if (n.contains("poisson_scale")) cfg.noise.poisson_scale = range_from_json(n.at("poisson_scale"));
            if (n.contains("motion_length")) cfg.noise.motion_length = range_from_json(n.at("motion_length"));
            if (n.contains("jpeg_quality")) cfg.noise.jpeg_quality = range_from_json(n.at("jpeg_quality"));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("malformed perturb config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PerturbConfig load_perturb_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::MissingFile, "cannot open perturb config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, "perturb config '" + path + "' is not valid JSON: " + e.what());
    }
    return perturb_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

nlohmann::json perturb_config_to_json(const PerturbConfig& cfg) {
    nlohmann::json kinds = nlohmann::json::array();
    for (auto k : cfg.noise_kinds) kinds.push_back(to_string(k));
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& r : cfg.lab_scale_range) ranges.push_back(range_to_json(r));
    return {
        {"css_probability", cfg.css_probability},
        {"lab_scale_range", ranges},
        {"method_weights", cfg.method_weights},
        {"noise_kinds", kinds},
        {"noise",
         {{"gaussian_sigma", range_to_json(cfg.noise.gaussian_sigma)},
          {"laplace_b", range_to_json(cfg.noise.laplace_b)},
          {"poisson_scale", range_to_json(cfg.noise.poisson_scale)},
          {"motion_length", range_to_json(cfg.noise.motion_length)},
          {"jpeg_quality", range_to_json(cfg.noise.jpeg_quality)}}},
        {"filters", filter_bank_to_json(cfg.filter_bank)},
        {"css", filter_bank_to_json(cfg.css_bank)},
    };
}

// --- operations ------------------------------------------------------------

std::vector<SelectedRegion> select_regions(const LabelMap& labels, Rng& rng) {
    std::vector<int> classes = labels.foreground_classes();
    const int k = static_cast<int>(classes.size());
    if (k == 0) fail(ErrorCode::NoForeground, "label map has no foreground classes");
    const int n = region_count_for(k);
    // Partial Fisher-Yates.
    for (int i = 0; i < n; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(k - i)));
        std::swap(classes[i], classes[j]);
    }
    std::vector<SelectedRegion> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back({classes[i], labels.mask_for(classes[i])});
    return out;
}

ImageBuf apply_filter_chain(const ImageBuf& img, const RegionMask& mask, const FilterChain& chain) {
    require_image(img, mask.width(), mask.height(), "apply_filter_chain");
    ImageBuf out = img;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.set_pixel(i, chain.apply(img.pixel(i)));
    }
    return out;
}

ImageBuf apply_filter_chain(const ImageBuf& img, const RegionMask& mask, std::string_view chain_name,
                            const FilterBank& bank) {
    return apply_filter_chain(img, mask, bank.find(chain_name));
}

ImageBuf apply_lab_scale(const ImageBuf& img, const RegionMask& mask, const std::array<double, 3>& multipliers) {
    for (double m : multipliers) {
        if (!(m > 0.0)) fail(ErrorCode::InvalidArgument, "lab multipliers must be > 0");
    }
    require_image(img, mask.width(), mask.height(), "apply_lab_scale");
    ImageBuf out = img;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        auto lab = color::srgb_to_lab(img.pixel(i));
        for (int c = 0; c < 3; ++c) lab[c] = static_cast<float>(lab[c] * multipliers[c]);
        auto rgb = color::lab_to_srgb(lab);
        for (auto& v : rgb) v = std::clamp(v, 0.0f, 1.0f);
        out.set_pixel(i, rgb);
    }
    return out;
}

bool lab_scale_clamps(const ImageBuf& img, const RegionMask& mask, const std::array<double, 3>& multipliers) {
    require_image(img, mask.width(), mask.height(), "lab_scale_clamps");
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        auto lab = color::srgb_to_lab(img.pixel(i));
        for (int c = 0; c < 3; ++c) lab[c] = static_cast<float>(lab[c] * multipliers[c]);
        for (float v : color::lab_to_srgb(lab)) {
            if (v < 0.0f || v > 1.0f) return true;
        }
    }
    return false;
}

std::pair<ImageBuf, ImageBuf> apply_blur_noise(const ImageBuf& real, const ImageBuf& composite,
                                               const RegionMask& mask, const NoiseSpec& noise,
                                               std::uint64_t seed) {
    require_image(real, mask.width(), mask.height(), "apply_blur_noise");
    require_image(composite, mask.width(), mask.height(), "apply_blur_noise");
    validate_noise(noise);
    ImageBuf degraded_real = degrade(real, noise, seed);
    const ImageBuf degraded_comp = degrade(composite, noise, seed);
    ImageBuf out_comp = composite;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) out_comp.set_pixel(i, degraded_comp.pixel(i));
    }
    return {std::move(degraded_real), std::move(out_comp)};
}

void apply_record(ImageBuf& real, ImageBuf& composite, const LabelMap& labels, const PerturbRecord& record,
                  const PerturbConfig& cfg) {
    const RegionMask mask = labels.mask_for(record.region_label);
    std::visit(
        [&](const auto& payload) {
            using T = std::decay_t<decltype(payload)>;
            if constexpr (std::is_same_v<T, ChainPayload>) {
                composite = apply_filter_chain(composite, mask, payload.chain_name, cfg.filter_bank);
            } else if constexpr (std::is_same_v<T, LabScalePayload>) {
                composite = apply_lab_scale(composite, mask, payload.multipliers);
            } else {
                auto [r, c] = apply_blur_noise(real, composite, mask, payload.noise, record.seed);
                real = std::move(r);
                composite = std::move(c);
            }
        },
        record.payload);
    if (record.css_overlay) composite = apply_filter_chain(composite, mask, *record.css_overlay, cfg.css_bank);
}

BenchmarkSample make_composite(const ImageBuf& image, const LabelMap& labels, const PerturbConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    if (image.space() != ColorSpace::SRGB_01) fail(ErrorCode::InvalidSpace, "make_composite: expected SRGB_01");
    if (image.width() != labels.width() || image.height() != labels.height()) {
        fail(ErrorCode::DimensionMismatch, "make_composite: image and label map dimensions differ");
    }
    Rng rng(seed);
    const auto regions = select_regions(labels, rng);

    BenchmarkSample sample{"", image, image, labels, {}};
    for (const auto& region : regions) {
        PerturbRecord rec;
        rec.region_label = region.label;
        const std::size_t method = draw_categorical(cfg.method_weights, rng);
        rec.seed = rng.seed_child();
        switch (method) {
            case 0: {
                const auto& chain = cfg.filter_bank.chains()[rng.below(cfg.filter_bank.size())];
                rec.payload = ChainPayload{chain.name};
                break;
            }
            case 1: {
                LabScalePayload p;
                for (int c = 0; c < 3; ++c) {
                    p.multipliers[c] = rng.uniform(cfg.lab_scale_range[c].lo, cfg.lab_scale_range[c].hi);
                }
                rec.payload = p;
                break;
            }
            default: {
                const NoiseKind kind = cfg.noise_kinds[rng.below(cfg.noise_kinds.size())];
                rec.payload = NoisePayload{draw_noise(kind, cfg.noise, rng)};
                break;
            }
        }
        // Always consume the draw so the stream does not depend on the css bank.
        const double css_draw = rng.uniform();
        const std::uint64_t css_pick = rng.next_u64();
        if (css_draw < cfg.css_probability && !cfg.css_bank.empty()) {
            rec.css_overlay = cfg.css_bank.chains()[css_pick % cfg.css_bank.size()].name;
        }
        apply_record(sample.real, sample.composite, labels, rec, cfg);
        sample.records.push_back(std::move(rec));
    }
    return sample;
}

std::pair<ImageBuf, ImageBuf> replay_records(const ImageBuf& image, const LabelMap& labels,
                                             const std::vector<PerturbRecord>& records,
                                             const PerturbConfig& cfg) {
    ImageBuf real = image;
    ImageBuf composite = image;
    for (const auto& rec : records) apply_record(real, composite, labels, rec, cfg);
    return {std::move(real), std::move(composite)};
}

}  // namespace harmony
