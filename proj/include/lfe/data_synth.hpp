#pragma once

#include "lfe/tensor.hpp"

// Deterministic synthetic low/high pairs for the bundled sample data: a
// colorful structured scene as the normal-light image, and a gamma-darkened,
// slightly noisy version as the low-light input.

namespace lfe {

template <typename T>
Tensor<T> synth_scene(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Tensor<T> img({h, w, 3});
    double pr = rng.uniform(0.0, 2.0 * kPi), pg = rng.uniform(0.0, 2.0 * kPi),
           pb = rng.uniform(0.0, 2.0 * kPi);
    double fr = rng.uniform(0.8, 1.6), fg = rng.uniform(0.8, 1.6), fb = rng.uniform(0.8, 1.6);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double u = static_cast<double>(x) / w, v = static_cast<double>(y) / h;
            img.at3(y, x, 0) = static_cast<T>(0.55 + 0.28 * std::sin(2 * kPi * fr * u + pr));
            img.at3(y, x, 1) = static_cast<T>(0.52 + 0.26 * std::sin(2 * kPi * fg * v + pg));
            img.at3(y, x, 2) = static_cast<T>(0.5 + 0.27 * std::sin(2 * kPi * fb * (u + v) / 2 + pb));
        }
    // soft-edged discs of random color
    int discs = 4 + static_cast<int>(rng.next_u64() % 4);
    for (int k = 0; k < discs; ++k) {
        double cx = rng.uniform(0.1, 0.9) * w, cy = rng.uniform(0.1, 0.9) * h;
        double r = rng.uniform(0.08, 0.22) * std::min(h, w);
        double col[3] = {rng.uniform(0.2, 0.95), rng.uniform(0.2, 0.95), rng.uniform(0.2, 0.95)};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d = std::hypot(x - cx, y - cy);
                double a = 1.0 / (1.0 + std::exp((d - r) / (0.05 * r + 0.5)));
                for (int c = 0; c < 3; ++c) {
                    double cur = img.at3(y, x, c);
                    img.at3(y, x, c) = static_cast<T>(cur * (1 - a) + col[c] * a);
                }
            }
    }
    // mild texture so the high-frequency bands are populated
    double tf = rng.uniform(6.0, 10.0), tp = rng.uniform(0.0, 2.0 * kPi);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double t = 0.03 * std::sin(2 * kPi * tf * x / w + tp) * std::sin(2 * kPi * tf * y / h);
            for (int c = 0; c < 3; ++c) {
                double v = img.at3(y, x, c) + t;
                img.at3(y, x, c) = static_cast<T>(std::min(0.98, std::max(0.03, v)));
            }
        }
    return img;
}

// low = gain * high^gamma with a mild per-channel cast and sensor-ish noise.
template <typename T>
Tensor<T> darken(const Tensor<T>& high, uint64_t seed, double gamma = 2.2, double gain = 0.42) {
    Rng rng(seed);
    const double cast[3] = {0.96, 1.0, 0.92};
    Tensor<T> low(high.dims());
    const int c = high.dim(2);
    for (long long i = 0; i < high.numel(); ++i) {
        int ch = static_cast<int>(i % c);
        double v = gain * cast[ch % 3] * std::pow(static_cast<double>(high[i]), gamma);
        v += 0.004 * rng.normal();
        low[i] = static_cast<T>(std::min(1.0, std::max(0.0, v)));
    }
    return low;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> synth_pair(int h, int w, uint64_t seed) {
    Tensor<T> high = synth_scene<T>(h, w, seed);
    Tensor<T> low = darken(high, seed ^ 0xabcdef1234567890ull);
    return {std::move(low), std::move(high)};
}

}  // namespace lfe
