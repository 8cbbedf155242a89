#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ripple {

/// One 8-bit channel, indexed (row = y, col = x).
using Plane = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Binary mask with the same indexing as Plane.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Lossless 8-bit RGB image stored as three planes.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {});

    int width() const { return static_cast<int>(channels_[0].cols()); }
    int height() const { return static_cast<int>(channels_[0].rows()); }
    bool empty() const { return channels_[0].size() == 0; }

    const Plane& channel(int c) const { return channels_[static_cast<std::size_t>(c)]; }
    Plane& channel(int c) { return channels_[static_cast<std::size_t>(c)]; }

    Rgb at(int x, int y) const {
        return {channels_[0](y, x), channels_[1](y, x), channels_[2](y, x)};
    }
    void set(int x, int y, Rgb px) {
        channels_[0](y, x) = px.r;
        channels_[1](y, x) = px.g;
        channels_[2](y, x) = px.b;
    }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width() && y < height(); }

    friend bool operator==(const Image& a, const Image& b) {
        if (a.width() != b.width() || a.height() != b.height()) return false;
        for (int c = 0; c < 3; ++c)
            if ((a.channel(c) != b.channel(c)).any()) return false;
        return true;
    }

private:
    std::array<Plane, 3> channels_;
};

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Box-filter downscale by an integer factor (edge blocks are averaged over what exists).
Image downscale(const Image& image, int factor);

}  // namespace ripple
