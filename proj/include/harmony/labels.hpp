#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace harmony {

/// Binary per-pixel mask.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(int width, int height, bool fill = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
    void set(int x, int y, bool v = true) { set(static_cast<std::size_t>(y) * width_ + x, v); }

    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }
    bool same_dims(int width, int height) const noexcept { return width_ == width && height_ == height; }
    bool same_dims(const RegionMask& o) const noexcept { return same_dims(o.width_, o.height_); }
    bool intersects(const RegionMask& other) const;

    RegionMask operator|(const RegionMask& other) const;
    RegionMask operator&(const RegionMask& other) const;
    RegionMask operator~() const;

    friend bool operator==(const RegionMask&, const RegionMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Per-pixel semantic class ids; 0 is background.
class LabelMap {
public:
    static constexpr int kBackground = 0;

    LabelMap() = default;
    LabelMap(int width, int height, int fill = kBackground);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return labels_.size(); }

    int operator[](std::size_t i) const { return labels_[i]; }
    int at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(std::size_t i, int label);
    void set(int x, int y, int label) { set(static_cast<std::size_t>(y) * width_ + x, label); }

    /// Distinct non-background class ids, ascending.
    std::vector<int> foreground_classes() const;
    RegionMask mask_for(int label) const;
    std::size_t area(int label) const;

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<int> labels_;
};

/// Nearest-neighbour resize; label ids are never blended.
LabelMap resize_nearest(const LabelMap& labels, int width, int height);

LabelMap decode_label_png(const std::string& path);
/// Writes an 8-bit grayscale PNG; class ids must be <= 255.
void save_label_png(const LabelMap& labels, const std::string& path);

}  // namespace harmony
