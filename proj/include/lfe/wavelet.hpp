#pragma once

#include "lfe/tensor.hpp"

// Single-level 2D Haar transform. The analysis filters are the orthonormal
// pair 1/sqrt(2)*[1,1] and 1/sqrt(2)*[1,-1]; applied along both axes of each
// disjoint 2x2 block [[a,b],[c,d]] they reduce to the closed forms below.
// The transform matrix is orthogonal, so the inverse doubles as the adjoint.

namespace lfe {

template <typename T>
struct WaveletBands {
    Tensor<T> ll, lh, hl, hh;
};

enum class BandSwap { kLowLow, kHigh };

template <typename T>
WaveletBands<T> dwt2d(const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("dwt2d: input must be rank-3 (H,W,C)");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("dwt2d: height and width must be even");
    WaveletBands<T> out;
    out.ll = Tensor<T>({h / 2, w / 2, c});
    out.lh = Tensor<T>({h / 2, w / 2, c});
    out.hl = Tensor<T>({h / 2, w / 2, c});
    out.hh = Tensor<T>({h / 2, w / 2, c});
    for (int y = 0; y < h / 2; ++y) {
        for (int x2 = 0; x2 < w / 2; ++x2) {
            const T* pa = &x.at3(2 * y, 2 * x2, 0);
            const T* pb = &x.at3(2 * y, 2 * x2 + 1, 0);
            const T* pc = &x.at3(2 * y + 1, 2 * x2, 0);
            const T* pd = &x.at3(2 * y + 1, 2 * x2 + 1, 0);
            T* ll = &out.ll.at3(y, x2, 0);
            T* lh = &out.lh.at3(y, x2, 0);
            T* hl = &out.hl.at3(y, x2, 0);
            T* hh = &out.hh.at3(y, x2, 0);
            for (int i = 0; i < c; ++i) {
                T a = pa[i], b = pb[i], cc = pc[i], d = pd[i];
                ll[i] = (a + b + cc + d) * T(0.5);
                lh[i] = (a + b - cc - d) * T(0.5);
                hl[i] = (a - b + cc - d) * T(0.5);
                hh[i] = (a - b - cc + d) * T(0.5);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> iwt2d(const WaveletBands<T>& bands) {
    check_same_shape(bands.ll, bands.lh, "iwt2d bands");
    check_same_shape(bands.ll, bands.hl, "iwt2d bands");
    check_same_shape(bands.ll, bands.hh, "iwt2d bands");
    if (bands.ll.rank() != 3) throw ShapeError("iwt2d: bands must be rank-3");
    const int h2 = bands.ll.dim(0), w2 = bands.ll.dim(1), c = bands.ll.dim(2);
    Tensor<T> out({2 * h2, 2 * w2, c});
    for (int y = 0; y < h2; ++y) {
        for (int x2 = 0; x2 < w2; ++x2) {
            const T* ll = &bands.ll.at3(y, x2, 0);
            const T* lh = &bands.lh.at3(y, x2, 0);
            const T* hl = &bands.hl.at3(y, x2, 0);
            const T* hh = &bands.hh.at3(y, x2, 0);
            T* pa = &out.at3(2 * y, 2 * x2, 0);
            T* pb = &out.at3(2 * y, 2 * x2 + 1, 0);
            T* pc = &out.at3(2 * y + 1, 2 * x2, 0);
            T* pd = &out.at3(2 * y + 1, 2 * x2 + 1, 0);
            for (int i = 0; i < c; ++i) {
                T l = ll[i], v = lh[i], hz = hl[i], d = hh[i];
                pa[i] = (l + v + hz + d) * T(0.5);
                pb[i] = (l + v - hz - d) * T(0.5);
                pc[i] = (l - v + hz - d) * T(0.5);
                pd[i] = (l - v - hz + d) * T(0.5);
            }
        }
    }
    return out;
}

template <typename T>
WaveletBands<T> swap_bands(const WaveletBands<T>& source, const WaveletBands<T>& donor,
                           BandSwap which) {
    check_same_shape(source.ll, donor.ll, "swap_bands");
    WaveletBands<T> out;
    if (which == BandSwap::kLowLow) {
        out.ll = donor.ll;
        out.lh = source.lh;
        out.hl = source.hl;
        out.hh = source.hh;
    } else {
        out.ll = source.ll;
        out.lh = donor.lh;
        out.hl = donor.hl;
        out.hh = donor.hh;
    }
    return out;
}

template <typename T>
T band_energy(const WaveletBands<T>& b) {
    return sum_squares(b.ll) + sum_squares(b.lh) + sum_squares(b.hl) + sum_squares(b.hh);
}

}  // namespace lfe
