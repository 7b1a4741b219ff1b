// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace videomemory {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

/// 8-bit interleaved RGB raster.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height, Rgb fill = {});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb color);
    void fill(const Rect& rect, Rgb color);

    const std::vector<std::uint8_t>& bytes() const { return pixels_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Encodes with fixed settings and no ancillary chunks, so equal rasters give
/// byte-identical files.
std::string encode_png(const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// Decodes any libpng-supported PNG into 8-bit RGB (alpha dropped, palette and
/// grey expanded). Throws IoError on unreadable or malformed files.
RgbImage read_png(const std::filesystem::path& path);

/// Per-channel mean over the pixels of `image` for which `include(x, y)` holds.
/// Returns the pixel count through `count`.
template <typename Pred>
std::array<double, 3> mean_rgb(const RgbImage& image, Pred include, long* count = nullptr) {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    long n = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!include(x, y)) continue;
            const Rgb p = image.at(x, y);
            sum[0] += p.r;
            sum[1] += p.g;
            sum[2] += p.b;
            ++n;
        }
    }
    if (count) *count = n;
    if (n == 0) return sum;
    for (auto& s : sum) s /= static_cast<double>(n);
    return sum;
}

}  // namespace videomemory
