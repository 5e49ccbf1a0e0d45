#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harmony {

/// Color space carried by an ImageBuf. White point is fixed to D65.
///
/// Conversions exist only along the edges SRGB_01 <-> LINEAR_RGB <-> LAB and
/// SRGB_01 <-> HLS. LAB is stored unnormalized (L in [0,100], a/b roughly
/// [-128,127]); HLS stores hue in degrees [0,360) and L,S in [0,1].
enum class ColorSpace { SRGB_01, LINEAR_RGB, LAB, HLS };

std::string_view to_string(ColorSpace space);
ColorSpace color_space_from_string(std::string_view name);

/// Planar three-channel float image.
class ImageBuf {
public:
    ImageBuf() = default;
    ImageBuf(int width, int height, ColorSpace space = ColorSpace::SRGB_01, float fill = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    ColorSpace space() const noexcept { return space_; }
    bool empty() const noexcept { return pixel_count() == 0; }

    std::span<float> plane(int channel) { return planes_[channel]; }
    std::span<const float> plane(int channel) const { return planes_[channel]; }

    float& at(int channel, int x, int y) { return planes_[channel][index(x, y)]; }
    float at(int channel, int x, int y) const { return planes_[channel][index(x, y)]; }

    std::array<float, 3> pixel(std::size_t i) const {
        return {planes_[0][i], planes_[1][i], planes_[2][i]};
    }
    void set_pixel(std::size_t i, const std::array<float, 3>& v) {
        planes_[0][i] = v[0];
        planes_[1][i] = v[1];
        planes_[2][i] = v[2];
    }

    /// Re-tags the buffer without touching samples.
    void retag(ColorSpace space) noexcept { space_ = space; }

    bool same_dims(const ImageBuf& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    ColorSpace space_ = ColorSpace::SRGB_01;
    std::array<std::vector<float>, 3> planes_;
};

// Per-pixel conversions. These are the scalar kernels behind the image-level
// functions and are exposed for tests and for code that edits single pixels.
namespace color {

float srgb_to_linear(float v);
float linear_to_srgb(float v);

std::array<float, 3> srgb_to_lab(const std::array<float, 3>& rgb);
/// Unclamped: out-of-gamut LAB yields sRGB values outside [0,1].
std::array<float, 3> lab_to_srgb(const std::array<float, 3>& lab);
std::array<float, 3> srgb_to_hls(const std::array<float, 3>& rgb);
std::array<float, 3> hls_to_srgb(const std::array<float, 3>& hls);

/// Rec.709 luma weights, shared by saturate filters and metric luma.
inline constexpr std::array<float, 3> kLumaWeights{0.2126f, 0.7152f, 0.0722f};

}  // namespace color

ImageBuf srgb_to_linear(const ImageBuf& img);
ImageBuf linear_to_srgb(const ImageBuf& img);
ImageBuf srgb_to_lab(const ImageBuf& img);
ImageBuf lab_to_srgb(const ImageBuf& img);
ImageBuf srgb_to_hls(const ImageBuf& img);
ImageBuf hls_to_srgb(const ImageBuf& img);

/// Converts along the conversion graph, routing through SRGB_01 where needed.
ImageBuf convert(const ImageBuf& img, ColorSpace target);

/// Clamps samples to the nominal range of the image's space. Idempotent.
void clamp_to_gamut(ImageBuf& img);

ImageBuf resize_bilinear(const ImageBuf& img, int width, int height);

/// Rounds every sample to the nearest 1/255 level (SRGB_01 only).
ImageBuf quantize_8bit(const ImageBuf& img);

// Codec I/O. Images are row-major with a top-left origin.
enum class ImageFormat { PNG, JPEG };

ImageBuf load_image(const std::string& path);
void save_image(const ImageBuf& img, const std::string& path, ImageFormat format = ImageFormat::PNG,
                int jpeg_quality = 95);

std::vector<unsigned char> encode_png(const ImageBuf& img);
ImageBuf decode_png(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_jpeg(const ImageBuf& img, int quality);
ImageBuf decode_jpeg(std::span<const unsigned char> bytes);

/// 8-bit single-channel raster (used for label maps and binary masks).
struct GrayRaster {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> values;
};

/// Reads an 8-bit grayscale or palette PNG as raw values (palette indices are
/// not expanded). RGB images without a palette are rejected.
GrayRaster load_gray_png(const std::string& path);
void save_gray_png(const GrayRaster& raster, const std::string& path);

}  // namespace harmony
