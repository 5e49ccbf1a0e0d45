#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmony/image.hpp"
#include "harmony/labels.hpp"

namespace harmony {

enum class MaskOp { Mul, Add };

std::string_view to_string(MaskOp op);
MaskOp mask_op_from_string(std::string_view name);

/// Six full-resolution operator planes acting on LAB or HLS channels:
///
///     out_c = in_c * mul_c + add_c
///
/// Multiplication happens first. Channel order is (L, a, b) for LAB and
/// (H, L, S) for HLS. Planes are held in double precision so that edits such
/// as +d followed by -d cancel exactly; application and serialization round
/// every plane value to float32 first, so a saved set reproduces the
/// in-memory result bit for bit.
class OperatorMaskSet {
public:
    OperatorMaskSet() = default;
    /// Identity set: mul = 1, add = 0. Throws InvalidSpace for RGB spaces.
    OperatorMaskSet(int width, int height, ColorSpace space);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    ColorSpace space() const noexcept { return space_; }

    std::span<const double> mul(int channel) const { return mul_.at(channel); }
    std::span<const double> add(int channel) const { return add_.at(channel); }
    std::span<double> mul(int channel) { return mul_.at(channel); }
    std::span<double> add(int channel) { return add_.at(channel); }
    std::span<const double> plane(MaskOp op, int channel) const { return op == MaskOp::Mul ? mul(channel) : add(channel); }
    std::span<double> plane(MaskOp op, int channel) { return op == MaskOp::Mul ? mul(channel) : add(channel); }

    bool is_identity() const;
    /// Throws InvalidArgument if any plane holds a non-finite value.
    void validate() const;

    friend bool operator==(const OperatorMaskSet&, const OperatorMaskSet&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    ColorSpace space_ = ColorSpace::LAB;
    std::array<std::vector<double>, 3> mul_;
    std::array<std::vector<double>, 3> add_;
};

OperatorMaskSet identity_masks(int width, int height, ColorSpace space = ColorSpace::LAB);

/// Scalar retouch kernel shared by apply() and tests.
inline float retouch_value(float x, double mul, double add) {
    return x * static_cast<float>(mul) + static_cast<float>(add);
}

/// Converts `composite` (SRGB_01) into masks.space(), applies the masks and
/// converts back with a single gamut clamp at the end.
ImageBuf apply(const ImageBuf& composite, const OperatorMaskSet& masks);

/// Pixel set iff max_c |add_c| > threshold.
RegionMask binarize_add(const OperatorMaskSet& masks, double threshold = 1e-4);

/// |a & b| / |a | b|; 1.0 when both are empty.
double mask_iou(const RegionMask& a, const RegionMask& b);

/// Resolves "L"/"a"/"b" (LAB), "H"/"L"/"S" (HLS) or "0"/"1"/"2" to a channel
/// index. Throws UnknownChannel.
int channel_index(ColorSpace space, std::string_view name);
std::string_view channel_name(ColorSpace space, int channel);

/// Returns a new set with one plane edited inside `region` (whole image when
/// nullopt): add edits add `value`, mul edits multiply by `value`.
OperatorMaskSet edit(const OperatorMaskSet& masks, int channel, MaskOp op, const std::optional<RegionMask>& region,
                     double value);

// OMSK1 file format, all integers little-endian:
//   0   char[8]   "OMSK1\0\0\0"
//   8   uint32    width
//   12  uint32    height
//   16  uint32    space (0 = LAB, 1 = HLS)
//   20  uint64[6] byte offsets of mul0 mul1 mul2 add0 add1 add2
//   68  uint32    reserved (0)
//   72  planes, each width*height float32 little-endian, row-major
inline constexpr std::size_t kOmskHeaderSize = 72;

std::vector<unsigned char> encode_masks(const OperatorMaskSet& masks);
OperatorMaskSet decode_masks(std::span<const unsigned char> bytes);
void save_masks(const OperatorMaskSet& masks, const std::string& path);
OperatorMaskSet load_masks(const std::string& path);

}  // namespace harmony
