#pragma once

#include <string>
#include <vector>

#include "lfe/tensor.hpp"

// 8-bit RGB PNG in/out. Grayscale, palette and 16-bit inputs are expanded to
// RGB8; an alpha channel is stripped (flagged so callers can warn).
// Normalization to feature maps is value / 255.

namespace lfe {

struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel
    bool alpha_stripped = false;
};

ImageU8 load_png(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);

template <typename T>
Tensor<T> image_to_feature(const ImageU8& img) {
    Tensor<T> t({img.height, img.width, 3});
    for (long long i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(img.rgb[static_cast<size_t>(i)]) / T(255);
    return t;
}

template <typename T>
ImageU8 feature_to_image(const Tensor<T>& t) {
    if (t.rank() != 3 || t.dim(2) != 3) throw ShapeError("feature_to_image: expected (H,W,3)");
    ImageU8 img;
    img.height = t.dim(0);
    img.width = t.dim(1);
    img.rgb.resize(static_cast<size_t>(t.numel()));
    for (long long i = 0; i < t.numel(); ++i) {
        T v = t[i];
        if (v < T(0)) v = T(0);
        if (v > T(1)) v = T(1);
        img.rgb[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(static_cast<double>(v) * 255.0));
    }
    return img;
}

// Grayscale export of a map in [lo, hi] (used for SSIM maps).
template <typename T>
ImageU8 map_to_gray_image(const Tensor<T>& t, T lo, T hi) {
    if (t.rank() != 3 || t.dim(2) != 1) throw ShapeError("map_to_gray_image: expected (H,W,1)");
    ImageU8 img;
    img.height = t.dim(0);
    img.width = t.dim(1);
    img.rgb.resize(static_cast<size_t>(t.numel()) * 3);
    for (long long i = 0; i < t.numel(); ++i) {
        double v = (static_cast<double>(t[i]) - lo) / (hi - lo);
        v = std::min(1.0, std::max(0.0, v));
        auto b = static_cast<uint8_t>(std::lround(v * 255.0));
        img.rgb[static_cast<size_t>(i) * 3 + 0] = b;
        img.rgb[static_cast<size_t>(i) * 3 + 1] = b;
        img.rgb[static_cast<size_t>(i) * 3 + 2] = b;
    }
    return img;
}

}  // namespace lfe
