#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ztrack {

/// Binary foreground image: 1 = foreground, 0 = background, row-major.
struct FrameMask {
    int width = 0;
    int height = 0;
    long frame_index = 0;
    std::vector<std::uint8_t> pixels;

    FrameMask() = default;
    FrameMask(int w, int h, long frame = 0)
        : width(w), height(h), frame_index(frame), pixels(static_cast<std::size_t>(w) * h, 0) {}

    bool well_formed() const {
        return width >= 0 && height >= 0 &&
               pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    /// Out-of-bounds reads are background.
    bool at(int x, int y) const {
        return in_bounds(x, y) && pixels[static_cast<std::size_t>(y) * width + x] != 0;
    }

    void set(int x, int y, bool fg = true) {
        if (!in_bounds(x, y)) throw std::out_of_range("FrameMask::set out of bounds");
        pixels[static_cast<std::size_t>(y) * width + x] = fg ? 1 : 0;
    }

    bool operator==(const FrameMask& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

/// Connected-component label image: 0 = background, components numbered from 1
/// in detection order.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;

    LabelMap() = default;
    LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    std::int32_t at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return 0;
        return labels[static_cast<std::size_t>(y) * width + x];
    }

    void set(int x, int y, std::int32_t v) { labels[static_cast<std::size_t>(y) * width + x] = v; }
};

/// Fixed global threshold over 8-bit gray values: > threshold is foreground.
inline FrameMask mask_from_gray(const std::vector<std::uint8_t>& gray, int width, int height,
                                int threshold = 127, long frame_index = 0) {
    if (gray.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("mask_from_gray: buffer size does not match dimensions");
    }
    FrameMask m(width, height, frame_index);
    for (std::size_t i = 0; i < gray.size(); ++i) m.pixels[i] = gray[i] > threshold ? 1 : 0;
    return m;
}

} // namespace ztrack
