#pragma once

#include "headsplat/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace headsplat {

/// Interleaved RGB image, row-major, linear values nominally in [0, 1].
template <typename T>
struct ImageT {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    ImageT() = default;
    ImageT(int w, int h, T fill = T(0)) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::size_t byte_size() const { return data.size() * sizeof(T); }

    T& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    const T& at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }

    template <typename U>
    ImageT<U> cast() const {
        ImageT<U> out;
        out.width = width;
        out.height = height;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

using Image = ImageT<float>;

float srgb_to_linear(float v);
float linear_to_srgb(float v);

/// Quantises linear values to 8-bit sRGB, exactly as write_png does.
std::vector<std::uint8_t> encode_srgb8(const Image& image);
Image decode_srgb8(const std::vector<std::uint8_t>& bytes, int width, int height);

/// 8-bit sRGB PNG, linear-to-sRGB on write.
void write_png(const std::filesystem::path& path, const Image& image);
/// Decodes to linear floats. Grey and alpha channels are folded to RGB.
Image read_png(const std::filesystem::path& path);
/// Raw 8-bit RGB rows without colour conversion (for diagnostics).
void write_png_rgb8(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb,
                    int width, int height);

} // namespace headsplat
