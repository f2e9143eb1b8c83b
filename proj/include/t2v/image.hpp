#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2v/error.hpp"

namespace t2v {

// 8-bit image, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct Image {
    size_t width = 0;
    size_t height = 0;
    size_t channels = 0;
    std::vector<uint8_t> pixels;  // height * width * channels

    size_t numel() const { return width * height * channels; }
    uint8_t& at(size_t y, size_t x, size_t c) {
        return pixels[(y * width + x) * channels + c];
    }
    uint8_t at(size_t y, size_t x, size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

// Binary netpbm: P6 (RGB) for 3-channel, P5 (grayscale) for 1-channel,
// maxval 255. Reading accepts either and reports the channel count.
void write_netpbm(const std::string& path, const Image& img);
Image read_netpbm(const std::string& path);

// Pixel scaling used across the pipeline: u8 [0,255] <-> float [0,1].
inline float pixel_to_unit(uint8_t v) { return float(v) / 255.0f; }
inline uint8_t unit_to_pixel(float v) {
    float s = v * 255.0f;
    if (s < 0.0f) s = 0.0f;
    if (s > 255.0f) s = 255.0f;
    return uint8_t(s + 0.5f);
}

}  // namespace t2v
