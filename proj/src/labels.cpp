#include "harmony/labels.hpp"

#include <algorithm>
#include <set>

#include "harmony/error.hpp"
#include "harmony/image.hpp"

namespace harmony {

RegionMask::RegionMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    if (width <= 0 || height <= 0) fail(ErrorCode::ZeroDimension, "mask dimensions must be positive");
}

std::size_t RegionMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool RegionMask::intersects(const RegionMask& other) const {
    if (!same_dims(other)) fail(ErrorCode::DimensionMismatch, "mask dimensions differ");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i] && other.bits_[i]) return true;
    }
    return false;
}

RegionMask RegionMask::operator|(const RegionMask& other) const {
    if (!same_dims(other)) fail(ErrorCode::DimensionMismatch, "mask dimensions differ");
    RegionMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] |= other.bits_[i];
    return out;
}

RegionMask RegionMask::operator&(const RegionMask& other) const {
    if (!same_dims(other)) fail(ErrorCode::DimensionMismatch, "mask dimensions differ");
    RegionMask out = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] &= other.bits_[i];
    return out;
}

RegionMask RegionMask::operator~() const {
    RegionMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
}

LabelMap::LabelMap(int width, int height, int fill)
    : width_(width), height_(height), labels_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0) fail(ErrorCode::ZeroDimension, "label map dimensions must be positive");
    if (fill < 0) fail(ErrorCode::InvalidArgument, "class ids must be >= 0");
}

void LabelMap::set(std::size_t i, int label) {
    if (label < 0) fail(ErrorCode::InvalidArgument, "class ids must be >= 0");
    labels_[i] = label;
}

std::vector<int> LabelMap::foreground_classes() const {
    std::set<int> seen;
    for (int l : labels_) {
        if (l != kBackground) seen.insert(l);
    }
    return {seen.begin(), seen.end()};
}

RegionMask LabelMap::mask_for(int label) const {
    RegionMask mask(width_, height_);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) mask.set(i);
    }
    return mask;
}

std::size_t LabelMap::area(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

LabelMap resize_nearest(const LabelMap& labels, int width, int height) {
    if (width < 1 || height < 1) fail(ErrorCode::ZeroDimension, "resize target dimensions must be >= 1");
    if (width == labels.width() && height == labels.height()) return labels;
    LabelMap out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(labels.height() - 1,
                                static_cast<int>((y + 0.5) * labels.height() / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(labels.width() - 1,
                                    static_cast<int>((x + 0.5) * labels.width() / width));
            out.set(x, y, labels.at(sx, sy));
        }
    }
    return out;
}

LabelMap decode_label_png(const std::string& path) {
    const GrayRaster raster = load_gray_png(path);
    LabelMap labels(raster.width, raster.height);
    for (std::size_t i = 0; i < raster.values.size(); ++i) labels.set(i, raster.values[i]);
    return labels;
}

void save_label_png(const LabelMap& labels, const std::string& path) {
    GrayRaster raster{labels.width(), labels.height(), {}};
    raster.values.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 255) fail(ErrorCode::InvalidArgument, "class id exceeds 8-bit label range");
        raster.values[i] = static_cast<unsigned char>(labels[i]);
    }
    save_gray_png(raster, path);
}

}  // namespace harmony
