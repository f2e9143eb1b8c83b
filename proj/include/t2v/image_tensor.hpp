#pragma once

#include "t2v/image.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

// Image (HWC, u8) -> [C,H,W] float tensor in [0,1].
inline Tensor<float> tensor_from_image(const Image& img) {
    Tensor<float> t = Tensor<float>::zeros({img.channels, img.height, img.width});
    auto& v = t.vec();
    const size_t hw = img.height * img.width;
    for (size_t y = 0; y < img.height; ++y)
        for (size_t x = 0; x < img.width; ++x)
            for (size_t c = 0; c < img.channels; ++c)
                v[c * hw + y * img.width + x] = pixel_to_unit(img.at(y, x, c));
    return t;
}

// [C,H,W] float tensor -> Image; values clamped to [0,1] before quantization.
inline Image image_from_tensor(const Tensor<float>& t) {
    if (t.shape().size() != 3)
        throw DimensionError("image_from_tensor expects [C,H,W], got " + shape_str(t.shape()));
    Image img;
    img.channels = t.shape()[0];
    img.height = t.shape()[1];
    img.width = t.shape()[2];
    if (img.channels != 1 && img.channels != 3)
        throw DimensionError("image_from_tensor supports 1 or 3 channels, got " +
                             std::to_string(img.channels));
    img.pixels.resize(t.numel());
    const auto& v = t.vec();
    const size_t hw = img.height * img.width;
    for (size_t y = 0; y < img.height; ++y)
        for (size_t x = 0; x < img.width; ++x)
            for (size_t c = 0; c < img.channels; ++c)
                img.at(y, x, c) = unit_to_pixel(v[c * hw + y * img.width + x]);
    return img;
}

}  // namespace t2v
