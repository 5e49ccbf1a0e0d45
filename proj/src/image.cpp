#include "harmony/image.hpp"

#include <algorithm>
#include <cmath>

#include "harmony/error.hpp"

namespace harmony {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// sRGB primaries, D65.
constexpr Mat3 kRgbToXyz{{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

Mat3 invert(const Mat3& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    Mat3 r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

const Mat3& xyz_to_rgb_matrix() {
    static const Mat3 inv = invert(kRgbToXyz);
    return inv;
}

// Reference white is the image of RGB (1,1,1), so white maps to a = b = 0.
constexpr double kWhiteX = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 0.0193339 + 0.1191920 + 0.9503041;

constexpr double kLabEpsilon = 216.0 / 24389.0;
constexpr double kLabKappa = 24389.0 / 27.0;

double lab_f(double t) {
    return t > kLabEpsilon ? std::cbrt(t) : (kLabKappa * t + 16.0) / 116.0;
}

double lab_f_inv(double f) {
    const double f3 = f * f * f;
    return f3 > kLabEpsilon ? f3 : (116.0 * f - 16.0) / kLabKappa;
}

double srgb_to_linear_d(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb_d(double v) {
    if (v <= 0.0031308) return v * 12.92;
    return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double hls_value(double m1, double m2, double hue) {
    hue -= std::floor(hue);
    if (hue < 1.0 / 6.0) return m1 + (m2 - m1) * hue * 6.0;
    if (hue < 0.5) return m2;
    if (hue < 2.0 / 3.0) return m1 + (m2 - m1) * (2.0 / 3.0 - hue) * 6.0;
    return m1;
}

void require_space(const ImageBuf& img, ColorSpace expected, const char* op) {
    if (img.space() != expected) {
        fail(ErrorCode::InvalidSpace, std::string(op) + ": expected " +
                                          std::string(to_string(expected)) + " input, got " +
                                          std::string(to_string(img.space())));
    }
}

template <typename Fn>
ImageBuf map_pixels(const ImageBuf& img, ColorSpace out_space, Fn&& fn) {
    ImageBuf out(img.width(), img.height(), out_space);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) out.set_pixel(i, fn(img.pixel(i)));
    return out;
}

float wrap_hue(float h) {
    float w = std::fmod(h, 360.0f);
    if (w < 0.0f) w += 360.0f;
    // fmod of a tiny negative value can round up to exactly 360.
    return w >= 360.0f ? 0.0f : w;
}

}  // namespace

std::string_view to_string(ColorSpace space) {
    switch (space) {
        case ColorSpace::SRGB_01: return "SRGB_01";
        case ColorSpace::LINEAR_RGB: return "LINEAR_RGB";
        case ColorSpace::LAB: return "LAB";
        case ColorSpace::HLS: return "HLS";
    }
    return "?";
}

ColorSpace color_space_from_string(std::string_view name) {
    if (name == "SRGB_01" || name == "srgb") return ColorSpace::SRGB_01;
    if (name == "LINEAR_RGB" || name == "linear") return ColorSpace::LINEAR_RGB;
    if (name == "LAB" || name == "lab") return ColorSpace::LAB;
    if (name == "HLS" || name == "hls") return ColorSpace::HLS;
    fail(ErrorCode::InvalidSpace, "unknown color space '" + std::string(name) + "'");
}

ImageBuf::ImageBuf(int width, int height, ColorSpace space, float fill)
    : width_(width), height_(height), space_(space) {
    if (width <= 0 || height <= 0) {
        fail(ErrorCode::ZeroDimension, "image dimensions must be positive");
    }
    for (auto& p : planes_) p.assign(pixel_count(), fill);
}

namespace color {

float srgb_to_linear(float v) { return static_cast<float>(srgb_to_linear_d(v)); }
float linear_to_srgb(float v) { return static_cast<float>(linear_to_srgb_d(v)); }

std::array<float, 3> srgb_to_lab(const std::array<float, 3>& rgb) {
    const double r = srgb_to_linear_d(rgb[0]);
    const double g = srgb_to_linear_d(rgb[1]);
    const double b = srgb_to_linear_d(rgb[2]);
    const auto& m = kRgbToXyz;
    const double x = (m[0][0] * r + m[0][1] * g + m[0][2] * b) / kWhiteX;
    const double y = (m[1][0] * r + m[1][1] * g + m[1][2] * b) / kWhiteY;
    const double z = (m[2][0] * r + m[2][1] * g + m[2][2] * b) / kWhiteZ;
    const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
    return {static_cast<float>(116.0 * fy - 16.0), static_cast<float>(500.0 * (fx - fy)),
            static_cast<float>(200.0 * (fy - fz))};
}

std::array<float, 3> lab_to_srgb(const std::array<float, 3>& lab) {
    const double fy = (static_cast<double>(lab[0]) + 16.0) / 116.0;
    const double fx = fy + lab[1] / 500.0;
    const double fz = fy - lab[2] / 200.0;
    const double y = lab[0] > kLabKappa * kLabEpsilon ? fy * fy * fy : lab[0] / kLabKappa;
    const double x = lab_f_inv(fx) * kWhiteX;
    const double z = lab_f_inv(fz) * kWhiteZ;
    const auto& m = xyz_to_rgb_matrix();
    std::array<float, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const double lin = m[c][0] * x + m[c][1] * y * kWhiteY + m[c][2] * z;
        out[c] = static_cast<float>(linear_to_srgb_d(lin));
    }
    return out;
}

std::array<float, 3> srgb_to_hls(const std::array<float, 3>& rgb) {
    const double r = rgb[0], g = rgb[1], b = rgb[2];
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    const double l = (minc + maxc) / 2.0;
    if (maxc == minc) return {0.0f, static_cast<float>(l), 0.0f};
    const double span = maxc - minc;
    const double s = l <= 0.5 ? span / (maxc + minc) : span / (2.0 - maxc - minc);
    const double rc = (maxc - r) / span;
    const double gc = (maxc - g) / span;
    const double bc = (maxc - b) / span;
    double h;
    if (r == maxc) {
        h = bc - gc;
    } else if (g == maxc) {
        h = 2.0 + rc - bc;
    } else {
        h = 4.0 + gc - rc;
    }
    h = h / 6.0;
    h -= std::floor(h);
    return {wrap_hue(static_cast<float>(h * 360.0)), static_cast<float>(l), static_cast<float>(s)};
}

std::array<float, 3> hls_to_srgb(const std::array<float, 3>& hls) {
    const double h = wrap_hue(hls[0]) / 360.0;
    const double l = hls[1];
    const double s = hls[2];
    if (s == 0.0) return {hls[1], hls[1], hls[1]};
    const double m2 = l <= 0.5 ? l * (1.0 + s) : l + s - l * s;
    const double m1 = 2.0 * l - m2;
    return {static_cast<float>(hls_value(m1, m2, h + 1.0 / 3.0)),
            static_cast<float>(hls_value(m1, m2, h)),
            static_cast<float>(hls_value(m1, m2, h - 1.0 / 3.0))};
}

}  // namespace color

ImageBuf srgb_to_linear(const ImageBuf& img) {
    require_space(img, ColorSpace::SRGB_01, "srgb_to_linear");
    return map_pixels(img, ColorSpace::LINEAR_RGB, [](const std::array<float, 3>& p) {
        return std::array<float, 3>{color::srgb_to_linear(p[0]), color::srgb_to_linear(p[1]),
                                    color::srgb_to_linear(p[2])};
    });
}

ImageBuf linear_to_srgb(const ImageBuf& img) {
    require_space(img, ColorSpace::LINEAR_RGB, "linear_to_srgb");
    auto out = map_pixels(img, ColorSpace::SRGB_01, [](const std::array<float, 3>& p) {
        return std::array<float, 3>{color::linear_to_srgb(p[0]), color::linear_to_srgb(p[1]),
                                    color::linear_to_srgb(p[2])};
    });
    clamp_to_gamut(out);
    return out;
}

ImageBuf srgb_to_lab(const ImageBuf& img) {
    require_space(img, ColorSpace::SRGB_01, "srgb_to_lab");
    return map_pixels(img, ColorSpace::LAB, color::srgb_to_lab);
}

ImageBuf lab_to_srgb(const ImageBuf& img) {
    require_space(img, ColorSpace::LAB, "lab_to_srgb");
    auto out = map_pixels(img, ColorSpace::SRGB_01, color::lab_to_srgb);
    clamp_to_gamut(out);
    return out;
}

ImageBuf srgb_to_hls(const ImageBuf& img) {
    require_space(img, ColorSpace::SRGB_01, "srgb_to_hls");
    return map_pixels(img, ColorSpace::HLS, color::srgb_to_hls);
}

ImageBuf hls_to_srgb(const ImageBuf& img) {
    require_space(img, ColorSpace::HLS, "hls_to_srgb");
    auto out = map_pixels(img, ColorSpace::SRGB_01, color::hls_to_srgb);
    clamp_to_gamut(out);
    return out;
}

ImageBuf convert(const ImageBuf& img, ColorSpace target) {
    if (img.space() == target) return img;
    switch (img.space()) {
        case ColorSpace::SRGB_01:
            switch (target) {
                case ColorSpace::LINEAR_RGB: return srgb_to_linear(img);
                case ColorSpace::LAB: return srgb_to_lab(img);
                case ColorSpace::HLS: return srgb_to_hls(img);
                default: break;
            }
            break;
        case ColorSpace::LINEAR_RGB: return convert(linear_to_srgb(img), target);
        case ColorSpace::LAB: return convert(lab_to_srgb(img), target);
        case ColorSpace::HLS: return convert(hls_to_srgb(img), target);
    }
    return img;
}

void clamp_to_gamut(ImageBuf& img) {
    auto clamp_plane = [&](int c, float lo, float hi) {
        for (float& v : img.plane(c)) v = std::clamp(v, lo, hi);
    };
    switch (img.space()) {
        case ColorSpace::SRGB_01:
        case ColorSpace::LINEAR_RGB:
            for (int c = 0; c < 3; ++c) clamp_plane(c, 0.0f, 1.0f);
            break;
        case ColorSpace::LAB:
            clamp_plane(0, 0.0f, 100.0f);
            clamp_plane(1, -128.0f, 127.0f);
            clamp_plane(2, -128.0f, 127.0f);
            break;
        case ColorSpace::HLS:
            for (float& h : img.plane(0)) h = wrap_hue(h);
            clamp_plane(1, 0.0f, 1.0f);
            clamp_plane(2, 0.0f, 1.0f);
            break;
    }
}

ImageBuf resize_bilinear(const ImageBuf& img, int width, int height) {
    if (width < 1 || height < 1) {
        fail(ErrorCode::ZeroDimension, "resize target dimensions must be >= 1");
    }
    if (width == img.width() && height == img.height()) return img;

    ImageBuf out(width, height, img.space());
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    const int max_x = img.width() - 1;
    const int max_y = img.height() - 1;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, max_y);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, max_x);
            const double tx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(c, x0, y0) * (1.0 - tx) + img.at(c, x1, y0) * tx;
                const double bottom = img.at(c, x0, y1) * (1.0 - tx) + img.at(c, x1, y1) * tx;
                out.at(c, x, y) = static_cast<float>(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    return out;
}

ImageBuf quantize_8bit(const ImageBuf& img) {
    require_space(img, ColorSpace::SRGB_01, "quantize_8bit");
    ImageBuf out = img;
    for (int c = 0; c < 3; ++c) {
        for (float& v : out.plane(c)) {
            v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
        }
    }
    return out;
}

}  // namespace harmony
