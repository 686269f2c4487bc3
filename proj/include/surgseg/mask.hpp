#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace surgseg {

using FrameIndex = int;
using ObjectId = int;
using ClassId = int;

/// Axis-aligned pixel rectangle, inclusive on all four edges.
struct PixelBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool operator==(const PixelBox&) const = default;
    bool contains(int x, int y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

/// Rectangular binary pixel grid. Bitmap is row-major; the run-length
/// encoding is column-major with alternating counts starting at background,
/// matching the COCO convention.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    static BinaryMask from_bitmap(int width, int height, std::vector<std::uint8_t> bits);
    /// Throws ParseError when the run counts do not sum to width*height.
    static BinaryMask from_rle(int width, int height, std::span<const std::uint64_t> runs);

    int width() const { return width_; }
    int height() const { return height_; }
    std::uint64_t pixel_count() const {
        return static_cast<std::uint64_t>(width_) * static_cast<std::uint64_t>(height_);
    }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    bool empty() const;
    std::uint64_t foreground_count() const;
    /// Tight bounds of the foreground; nullopt when the mask is empty.
    std::optional<PixelBox> tight_bbox() const;

    std::vector<std::uint64_t> to_rle() const;
    const std::vector<std::uint8_t>& bitmap() const { return bits_; }

    /// Shift by (dx, dy); pixels leaving the grid are dropped.
    BinaryMask translated(int dx, int dy) const;
    /// Morphological erosion with a square structuring element of the given
    /// radius (side 2*radius+1). Outside the grid counts as background.
    BinaryMask eroded(int radius) const;
    BinaryMask intersect(const BinaryMask& other) const;
    BinaryMask unite(const BinaryMask& other) const;
    /// Foreground restricted to the box.
    BinaryMask cropped_to(const PixelBox& box) const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// 4-connected foreground components, ordered by first pixel in row-major
/// scan order. Each component is returned as a full-size mask.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// FNV-1a over dimensions and bitmap, for manifests and run logs.
std::uint64_t mask_digest(const BinaryMask& mask);
std::string digest_hex(std::uint64_t digest);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace surgseg
