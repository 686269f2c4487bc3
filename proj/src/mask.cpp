#include "surgseg/mask.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "surgseg/errors.hpp"

namespace surgseg {

namespace {

WarnHandler g_warn_handler = nullptr;
std::mutex g_warn_mutex;

}  // namespace

void set_warn_handler(WarnHandler handler) {
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    g_warn_handler = handler;
}

void warn(const std::string& message) {
    std::lock_guard<std::mutex> lock(g_warn_mutex);
    if (g_warn_handler) {
        g_warn_handler(message);
    } else {
        std::fprintf(stderr, "[surgseg] warning: %s\n", message.c_str());
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
            fill ? 1 : 0) {
    if (width < 0 || height < 0) {
        throw InvalidArgument("BinaryMask: negative dimensions");
    }
}

BinaryMask BinaryMask::from_bitmap(int width, int height, std::vector<std::uint8_t> bits) {
    if (bits.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidArgument("BinaryMask::from_bitmap: bitmap size mismatch");
    }
    BinaryMask m(width, height);
    for (auto& b : bits) b = b ? 1 : 0;
    m.bits_ = std::move(bits);
    return m;
}

BinaryMask BinaryMask::from_rle(int width, int height, std::span<const std::uint64_t> runs) {
    BinaryMask m(width, height);
    const std::uint64_t total = m.pixel_count();
    std::uint64_t sum = 0;
    for (auto r : runs) sum += r;
    if (sum != total) {
        throw ParseError("RLE runs sum to " + std::to_string(sum) + ", expected " +
                         std::to_string(total) + " for " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
    // Column-major: position p covers pixel (x = p / height, y = p % height).
    std::uint64_t pos = 0;
    bool value = false;
    for (auto r : runs) {
        if (value) {
            for (std::uint64_t p = pos; p < pos + r; ++p) {
                const int x = static_cast<int>(p / static_cast<std::uint64_t>(height));
                const int y = static_cast<int>(p % static_cast<std::uint64_t>(height));
                m.bits_[m.index(x, y)] = 1;
            }
        }
        pos += r;
        value = !value;
    }
    return m;
}

bool BinaryMask::empty() const {
    return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end();
}

std::uint64_t BinaryMask::foreground_count() const {
    return std::accumulate(bits_.begin(), bits_.end(), std::uint64_t{0});
}

std::optional<PixelBox> BinaryMask::tight_bbox() const {
    PixelBox box{width_, height_, -1, -1};
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!bits_[index(x, y)]) continue;
            box.x_min = std::min(box.x_min, x);
            box.y_min = std::min(box.y_min, y);
            box.x_max = std::max(box.x_max, x);
            box.y_max = std::max(box.y_max, y);
        }
    }
    if (box.x_max < 0) return std::nullopt;
    return box;
}

std::vector<std::uint64_t> BinaryMask::to_rle() const {
    std::vector<std::uint64_t> runs;
    std::uint64_t count = 0;
    bool value = false;  // first run counts background, possibly zero
    for (int x = 0; x < width_; ++x) {
        for (int y = 0; y < height_; ++y) {
            const bool v = bits_[index(x, y)] != 0;
            if (v == value) {
                ++count;
            } else {
                runs.push_back(count);
                value = v;
                count = 1;
            }
        }
    }
    runs.push_back(count);
    if (runs.size() == 1 && runs[0] == 0) runs[0] = 0;  // 0x0 mask: single zero run
    return runs;
}

BinaryMask BinaryMask::translated(int dx, int dy) const {
    BinaryMask out(width_, height_);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!bits_[index(x, y)]) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (out.in_bounds(nx, ny)) out.bits_[out.index(nx, ny)] = 1;
        }
    }
    return out;
}

BinaryMask BinaryMask::eroded(int radius) const {
    if (radius <= 0) return *this;
    // Separable min-filter: horizontal pass then vertical pass.
    BinaryMask horiz(width_, height_);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            bool all = true;
            for (int dx = -radius; dx <= radius && all; ++dx) {
                const int nx = x + dx;
                all = nx >= 0 && nx < width_ && bits_[index(nx, y)];
            }
            horiz.bits_[horiz.index(x, y)] = all ? 1 : 0;
        }
    }
    BinaryMask out(width_, height_);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            bool all = true;
            for (int dy = -radius; dy <= radius && all; ++dy) {
                const int ny = y + dy;
                all = ny >= 0 && ny < height_ && horiz.bits_[horiz.index(x, ny)];
            }
            out.bits_[out.index(x, y)] = all ? 1 : 0;
        }
    }
    return out;
}

BinaryMask BinaryMask::intersect(const BinaryMask& other) const {
    if (width_ != other.width_ || height_ != other.height_) {
        throw InvalidArgument("BinaryMask::intersect: dimension mismatch");
    }
    BinaryMask out(width_, height_);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = bits_[i] & other.bits_[i];
    }
    return out;
}

BinaryMask BinaryMask::unite(const BinaryMask& other) const {
    if (width_ != other.width_ || height_ != other.height_) {
        throw InvalidArgument("BinaryMask::unite: dimension mismatch");
    }
    BinaryMask out(width_, height_);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = bits_[i] | other.bits_[i];
    }
    return out;
}

BinaryMask BinaryMask::cropped_to(const PixelBox& box) const {
    BinaryMask out(width_, height_);
    const int x0 = std::max(0, box.x_min);
    const int y0 = std::max(0, box.y_min);
    const int x1 = std::min(width_ - 1, box.x_max);
    const int y1 = std::min(height_ - 1, box.y_max);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            out.bits_[out.index(x, y)] = bits_[index(x, y)];
        }
    }
    return out;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<BinaryMask> components;
    std::vector<std::pair<int, int>> stack;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!mask.at(x, y) || label[i] >= 0) continue;
            const int id = static_cast<int>(components.size());
            components.emplace_back(w, h);
            stack.clear();
            stack.emplace_back(x, y);
            label[i] = id;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                components[id].set(cx, cy, true);
                static constexpr int kDx[4] = {1, -1, 0, 0};
                static constexpr int kDy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int nx = cx + kDx[d];
                    const int ny = cy + kDy[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.at(nx, ny) && label[ni] < 0) {
                        label[ni] = id;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
        }
    }
    return components;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    std::uint64_t hash = seed;
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t mask_digest(const BinaryMask& mask) {
    const std::int32_t dims[2] = {mask.width(), mask.height()};
    std::uint64_t h = fnv1a(dims, sizeof(dims));
    return fnv1a(mask.bitmap().data(), mask.bitmap().size(), h);
}

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf);
}

}  // namespace surgseg
