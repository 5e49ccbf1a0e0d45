#include "harmony/retouch.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "harmony/error.hpp"

namespace harmony {

namespace {

void require_mask_space(ColorSpace space) {
    if (space != ColorSpace::LAB && space != ColorSpace::HLS) {
        fail(ErrorCode::InvalidSpace, "operator masks act on LAB or HLS, not " + std::string(to_string(space)));
    }
}

void put_u32(std::vector<unsigned char>& out, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out[at + i] = static_cast<unsigned char>(v >> (8 * i));
}

void put_u64(std::vector<unsigned char>& out, std::size_t at, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out[at + i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint32_t get_u32(std::span<const unsigned char> in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
    return v;
}

constexpr char kMagic[8] = {'O', 'M', 'S', 'K', '1', 0, 0, 0};

}  // namespace

std::string_view to_string(MaskOp op) { return op == MaskOp::Mul ? "mul" : "add"; }

MaskOp mask_op_from_string(std::string_view name) {
    if (name == "mul") return MaskOp::Mul;
    if (name == "add") return MaskOp::Add;
    fail(ErrorCode::InvalidArgument, "mask operation must be 'mul' or 'add', got '" + std::string(name) + "'");
}

OperatorMaskSet::OperatorMaskSet(int width, int height, ColorSpace space)
    : width_(width), height_(height), space_(space) {
    if (width <= 0 || height <= 0) fail(ErrorCode::ZeroDimension, "mask dimensions must be positive");
    require_mask_space(space);
    for (auto& p : mul_) p.assign(pixel_count(), 1.0);
    for (auto& p : add_) p.assign(pixel_count(), 0.0);
}

bool OperatorMaskSet::is_identity() const {
    for (int c = 0; c < 3; ++c) {
        for (double v : mul_[c]) {
            if (v != 1.0) return false;
        }
        for (double v : add_[c]) {
            if (v != 0.0) return false;
        }
    }
    return true;
}

void OperatorMaskSet::validate() const {
    for (int c = 0; c < 3; ++c) {
        for (const auto* plane : {&mul_[c], &add_[c]}) {
            for (double v : *plane) {
                if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "operator mask holds a non-finite value");
            }
        }
    }
}

OperatorMaskSet identity_masks(int width, int height, ColorSpace space) {
    return OperatorMaskSet(width, height, space);
}

ImageBuf apply(const ImageBuf& composite, const OperatorMaskSet& masks) {
    if (composite.space() != ColorSpace::SRGB_01) {
        fail(ErrorCode::InvalidSpace, "apply: expected SRGB_01 composite");
    }
    if (composite.width() != masks.width() || composite.height() != masks.height()) {
        fail(ErrorCode::DimensionMismatch, "apply: image and operator mask dimensions differ");
    }
    ImageBuf work = convert(composite, masks.space());
    for (int c = 0; c < 3; ++c) {
        auto plane = work.plane(c);
        const auto mul = masks.mul(c);
        const auto add = masks.add(c);
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = retouch_value(plane[i], mul[i], add[i]);
    }
    // lab_to_srgb / hls_to_srgb clamp once, after the inverse conversion.
    return convert(work, ColorSpace::SRGB_01);
}

RegionMask binarize_add(const OperatorMaskSet& masks, double threshold) {
    if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "binarization threshold must be > 0");
    RegionMask out(masks.width(), masks.height());
    for (std::size_t i = 0; i < masks.pixel_count(); ++i) {
        double m = 0.0;
        for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(masks.add(c)[i]));
        if (m > threshold) out.set(i);
    }
    return out;
}

double mask_iou(const RegionMask& a, const RegionMask& b) {
    if (!a.same_dims(b)) fail(ErrorCode::DimensionMismatch, "mask_iou: dimensions differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += (a[i] && b[i]) ? 1 : 0;
        uni += (a[i] || b[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

int channel_index(ColorSpace space, std::string_view name) {
    if (name == "0" || name == "1" || name == "2") return name[0] - '0';
    for (int c = 0; c < 3; ++c) {
        if (channel_name(space, c) == name) return c;
    }
    fail(ErrorCode::UnknownChannel, "unknown channel '" + std::string(name) + "' for " + std::string(to_string(space)));
}

std::string_view channel_name(ColorSpace space, int channel) {
    static constexpr std::array<std::string_view, 3> kLab{"L", "a", "b"};
    static constexpr std::array<std::string_view, 3> kHls{"H", "L", "S"};
    if (channel < 0 || channel > 2) fail(ErrorCode::UnknownChannel, "channel index out of range");
    return space == ColorSpace::HLS ? kHls[channel] : kLab[channel];
}

OperatorMaskSet edit(const OperatorMaskSet& masks, int channel, MaskOp op, const std::optional<RegionMask>& region,
                     double value) {
    if (channel < 0 || channel > 2) fail(ErrorCode::UnknownChannel, "channel index out of range");
    if (!std::isfinite(value)) fail(ErrorCode::InvalidArgument, "edit value must be finite");
    if (region && !region->same_dims(masks.width(), masks.height())) {
        fail(ErrorCode::DimensionMismatch, "edit: region and mask dimensions differ");
    }
    OperatorMaskSet out = masks;
    auto plane = out.plane(op, channel);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        if (region && !(*region)[i]) continue;
        if (op == MaskOp::Add) {
            plane[i] += value;
        } else {
            plane[i] *= value;
        }
    }
    return out;
}

std::vector<unsigned char> encode_masks(const OperatorMaskSet& masks) {
    masks.validate();
    const std::size_t n = masks.pixel_count();
    std::vector<unsigned char> out(kOmskHeaderSize + 6 * n * 4, 0);
    std::memcpy(out.data(), kMagic, sizeof(kMagic));
    put_u32(out, 8, static_cast<std::uint32_t>(masks.width()));
    put_u32(out, 12, static_cast<std::uint32_t>(masks.height()));
    put_u32(out, 16, masks.space() == ColorSpace::LAB ? 0u : 1u);
    for (int p = 0; p < 6; ++p) {
        const std::size_t offset = kOmskHeaderSize + p * n * 4;
        put_u64(out, 20 + p * 8, offset);
        const auto plane = masks.plane(p < 3 ? MaskOp::Mul : MaskOp::Add, p % 3);
        for (std::size_t i = 0; i < n; ++i) {
            put_u32(out, offset + i * 4, std::bit_cast<std::uint32_t>(static_cast<float>(plane[i])));
        }
    }
    return out;
}

OperatorMaskSet decode_masks(std::span<const unsigned char> bytes) {
    if (bytes.size() < kOmskHeaderSize || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        fail(ErrorCode::SchemaMismatch, "not an OMSK1 operator-mask file");
    }
    const auto width = static_cast<int>(get_u32(bytes, 8));
    const auto height = static_cast<int>(get_u32(bytes, 12));
    const std::uint32_t space_tag = get_u32(bytes, 16);
    if (space_tag > 1) fail(ErrorCode::SchemaMismatch, "OMSK1: unknown space tag");
    if (width <= 0 || height <= 0) fail(ErrorCode::SchemaMismatch, "OMSK1: invalid dimensions");
    OperatorMaskSet masks(width, height, space_tag == 0 ? ColorSpace::LAB : ColorSpace::HLS);
    const std::size_t n = masks.pixel_count();
    for (int p = 0; p < 6; ++p) {
        const std::uint64_t offset = get_u64(bytes, 20 + p * 8);
        if (offset < kOmskHeaderSize || offset + n * 4 > bytes.size()) {
            fail(ErrorCode::SchemaMismatch, "OMSK1: plane offset out of range");
        }
        auto plane = masks.plane(p < 3 ? MaskOp::Mul : MaskOp::Add, p % 3);
        for (std::size_t i = 0; i < n; ++i) {
            plane[i] = std::bit_cast<float>(get_u32(bytes, offset + i * 4));
        }
    }
    masks.validate();
    return masks;
}

void save_masks(const OperatorMaskSet& masks, const std::string& path) {
    const auto bytes = encode_masks(masks);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "short write to '" + path + "'");
}

OperatorMaskSet load_masks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFile, "cannot open '" + path + "'");
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_masks(bytes);
}

}  // namespace harmony
