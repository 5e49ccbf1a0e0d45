#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "harmony/image.hpp"
#include "harmony/labels.hpp"
#include "harmony/rng.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("harmony_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

private:
    std::filesystem::path path_;
};

inline harmony::ImageBuf random_image(int w, int h, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    harmony::Rng rng(seed);
    harmony::ImageBuf img(w, h);
    for (int c = 0; c < 3; ++c) {
        for (float& v : img.plane(c)) v = static_cast<float>(rng.uniform(lo, hi));
    }
    return img;
}

// Quadrant layout: background top-left, classes 3, 7, 9 elsewhere.
inline harmony::LabelMap quadrant_labels(int w, int h) {
    harmony::LabelMap labels(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool right = x >= w / 2, bottom = y >= h / 2;
            labels.set(x, y, !right && !bottom ? 0 : (right && !bottom ? 3 : (!right ? 7 : 9)));
        }
    }
    return labels;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace testsupport
