#pragma once

#include <array>
#include <cmath>
#include <tuple>

#include "lfe/tensor.hpp"

// Forward and backward kernels shared by the plain evaluation path and the
// gradient tape. Everything operates on (H, W, C) feature maps or (L, D)
// sequences in double or float.

namespace lfe {

// ----- elementwise -----

template <typename T>
Tensor<T> ew_add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = a;
    for (long long i = 0; i < out.numel(); ++i) out[i] += b[i];
    return out;
}

template <typename T>
Tensor<T> ew_sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    Tensor<T> out = a;
    for (long long i = 0; i < out.numel(); ++i) out[i] -= b[i];
    return out;
}

template <typename T>
Tensor<T> ew_mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    Tensor<T> out = a;
    for (long long i = 0; i < out.numel(); ++i) out[i] *= b[i];
    return out;
}

template <typename T>
Tensor<T> ew_scale(const Tensor<T>& a, T s) {
    Tensor<T> out = a;
    for (long long i = 0; i < out.numel(); ++i) out[i] *= s;
    return out;
}

template <typename T>
void ew_axpy(Tensor<T>& acc, const Tensor<T>& x, T a = T(1)) {
    if (acc.empty()) acc = Tensor<T>(x.dims());
    check_same_shape(acc, x, "axpy");
    for (long long i = 0; i < x.numel(); ++i) acc[i] += a * x[i];
}

template <typename T, typename F>
Tensor<T> ew_map(const Tensor<T>& a, F f) {
    Tensor<T> out = a;
    for (long long i = 0; i < out.numel(); ++i) out[i] = f(out[i]);
    return out;
}

// ----- convolution -----
// Weight layout (ky, kx, Cin/groups, Cout); zero padding k/2 keeps spatial
// size at stride 1. Group g maps input channels [g*Cin/G, (g+1)*Cin/G) to
// output channels [g*Cout/G, (g+1)*Cout/G).

template <typename T>
void conv2d_check(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int groups) {
    if (x.rank() != 3) throw ShapeError("conv2d: input must be rank-3 (H,W,C)");
    if (w.rank() != 4) throw ShapeError("conv2d: weight must be rank-4 (k,k,Cin,Cout)");
    int k = w.dim(0);
    if (w.dim(1) != k) throw ShapeError("conv2d: kernel must be square");
    if (k % 2 == 0) throw ShapeError("conv2d: kernel spatial size must be odd");
    int cin = x.dim(2), cout = w.dim(3);
    if (groups < 1 || cin % groups != 0 || cout % groups != 0)
        throw ShapeError("conv2d: channels not divisible by groups");
    if (w.dim(2) != cin / groups)
        throw ShapeError("conv2d: weight input channels " + std::to_string(w.dim(2)) +
                         " do not match input channels " + std::to_string(cin) + " with groups " +
                         std::to_string(groups));
    if (b.numel() != cout) throw ShapeError("conv2d: bias length must equal output channels");
    if (stride < 1) throw ShapeError("conv2d: stride must be positive");
    if (x.dim(0) % stride != 0 || x.dim(1) % stride != 0)
        throw ShapeError("conv2d: stride does not divide padded extent");
}

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1,
                     int groups = 1) {
    conv2d_check(x, w, b, stride, groups);
    const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
    const int k = w.dim(0), cout = w.dim(3), pad = k / 2;
    const int oh = h / stride, ow = wd / stride;
    const int cing = cin / groups, coutg = cout / groups;
    Tensor<T> out({oh, ow, cout});
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* orow = &out.at3(oy, ox, 0);
            for (int co = 0; co < cout; ++co) orow[co] = b[co];
            for (int dy = 0; dy < k; ++dy) {
                int iy = oy * stride + dy - pad;
                if (iy < 0 || iy >= h) continue;
                for (int dx = 0; dx < k; ++dx) {
                    int ix = ox * stride + dx - pad;
                    if (ix < 0 || ix >= wd) continue;
                    const T* irow = &x.at3(iy, ix, 0);
                    for (int g = 0; g < groups; ++g) {
                        for (int ci = 0; ci < cing; ++ci) {
                            T xv = irow[g * cing + ci];
                            const T* wrow = &w.at4(dy, dx, ci, g * coutg);
                            T* og = orow + g * coutg;
                            for (int co = 0; co < coutg; ++co) og[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_bwd_input(const Tensor<T>& gout, const Tensor<T>& w, const std::vector<int>& xdims,
                           int stride, int groups) {
    const int h = xdims[0], wd = xdims[1], cin = xdims[2];
    const int k = w.dim(0), cout = w.dim(3), pad = k / 2;
    const int oh = h / stride, ow = wd / stride;
    const int cing = cin / groups, coutg = cout / groups;
    Tensor<T> gx(xdims);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* grow = &gout.at3(oy, ox, 0);
            for (int dy = 0; dy < k; ++dy) {
                int iy = oy * stride + dy - pad;
                if (iy < 0 || iy >= h) continue;
                for (int dx = 0; dx < k; ++dx) {
                    int ix = ox * stride + dx - pad;
                    if (ix < 0 || ix >= wd) continue;
                    T* xrow = &gx.at3(iy, ix, 0);
                    for (int g = 0; g < groups; ++g) {
                        for (int ci = 0; ci < cing; ++ci) {
                            const T* wrow = &w.at4(dy, dx, ci, g * coutg);
                            const T* gg = grow + g * coutg;
                            T acc = T(0);
                            for (int co = 0; co < coutg; ++co) acc += wrow[co] * gg[co];
                            xrow[g * cing + ci] += acc;
                        }
                    }
                }
            }
        }
    }
    return gx;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> conv2d_bwd_params(const Tensor<T>& gout, const Tensor<T>& x,
                                                  const std::vector<int>& wdims, int stride,
                                                  int groups) {
    const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
    const int k = wdims[0], cout = wdims[3], pad = k / 2;
    const int oh = h / stride, ow = wd / stride;
    const int cing = cin / groups, coutg = cout / groups;
    Tensor<T> gw(wdims);
    Tensor<T> gb({cout});
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* grow = &gout.at3(oy, ox, 0);
            for (int co = 0; co < cout; ++co) gb[co] += grow[co];
            for (int dy = 0; dy < k; ++dy) {
                int iy = oy * stride + dy - pad;
                if (iy < 0 || iy >= h) continue;
                for (int dx = 0; dx < k; ++dx) {
                    int ix = ox * stride + dx - pad;
                    if (ix < 0 || ix >= wd) continue;
                    const T* irow = &x.at3(iy, ix, 0);
                    for (int g = 0; g < groups; ++g) {
                        for (int ci = 0; ci < cing; ++ci) {
                            T xv = irow[g * cing + ci];
                            T* wrow = &gw.at4(dy, dx, ci, g * coutg);
                            const T* gg = grow + g * coutg;
                            for (int co = 0; co < coutg; ++co) wrow[co] += xv * gg[co];
                        }
                    }
                }
            }
        }
    }
    return {std::move(gw), std::move(gb)};
}

// ----- linear (sequence projection) -----
// x: (L, Din), w: (Din, Dout), b: (Dout) or empty for no bias.

template <typename T>
Tensor<T> linear_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2) throw ShapeError("linear: x and w must be rank-2");
    const int l = x.dim(0), din = x.dim(1), dout = w.dim(1);
    if (w.dim(0) != din) throw ShapeError("linear: weight rows must match input dims");
    if (!b.empty() && b.numel() != dout) throw ShapeError("linear: bias length mismatch");
    Tensor<T> out({l, dout});
    for (int i = 0; i < l; ++i) {
        T* orow = &out.at2(i, 0);
        if (!b.empty())
            for (int o = 0; o < dout; ++o) orow[o] = b[o];
        const T* xrow = &x.at2(i, 0);
        for (int d = 0; d < din; ++d) {
            T xv = xrow[d];
            const T* wrow = &w.at2(d, 0);
            for (int o = 0; o < dout; ++o) orow[o] += xv * wrow[o];
        }
    }
    return out;
}

template <typename T>
std::tuple<Tensor<T>, Tensor<T>, Tensor<T>> linear_bwd(const Tensor<T>& gout, const Tensor<T>& x,
                                                       const Tensor<T>& w, bool has_bias) {
    const int l = x.dim(0), din = x.dim(1), dout = w.dim(1);
    Tensor<T> gx({l, din});
    Tensor<T> gw({din, dout});
    Tensor<T> gb = has_bias ? Tensor<T>({dout}) : Tensor<T>();
    for (int i = 0; i < l; ++i) {
        const T* grow = &gout.at2(i, 0);
        const T* xrow = &x.at2(i, 0);
        T* gxrow = &gx.at2(i, 0);
        if (has_bias)
            for (int o = 0; o < dout; ++o) gb[o] += grow[o];
        for (int d = 0; d < din; ++d) {
            const T* wrow = &w.at2(d, 0);
            T* gwrow = &gw.at2(d, 0);
            T acc = T(0);
            T xv = xrow[d];
            for (int o = 0; o < dout; ++o) {
                acc += wrow[o] * grow[o];
                gwrow[o] += xv * grow[o];
            }
            gxrow[d] += acc;
        }
    }
    return {std::move(gx), std::move(gw), std::move(gb)};
}

// ----- layer norm over the channel axis, per pixel -----

template <typename T>
Tensor<T> layer_norm_fwd(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift, T eps) {
    if (x.rank() != 3) throw ShapeError("layer_norm: input must be rank-3");
    const int c = x.dim(2);
    if (gain.numel() != c || shift.numel() != c)
        throw ShapeError("layer_norm: gain/shift length must equal channels");
    Tensor<T> out(x.dims());
    const long long pixels = static_cast<long long>(x.dim(0)) * x.dim(1);
    for (long long p = 0; p < pixels; ++p) {
        const T* xr = x.data() + p * c;
        T* orow = out.data() + p * c;
        T mu = T(0);
        for (int i = 0; i < c; ++i) mu += xr[i];
        mu /= T(c);
        T var = T(0);
        for (int i = 0; i < c; ++i) {
            T d = xr[i] - mu;
            var += d * d;
        }
        var /= T(c);
        T inv = T(1) / std::sqrt(var + eps);
        for (int i = 0; i < c; ++i) orow[i] = gain[i] * (xr[i] - mu) * inv + shift[i];
    }
    return out;
}

template <typename T>
std::tuple<Tensor<T>, Tensor<T>, Tensor<T>> layer_norm_bwd(const Tensor<T>& gout, const Tensor<T>& x,
                                                           const Tensor<T>& gain, T eps) {
    const int c = x.dim(2);
    Tensor<T> gx(x.dims());
    Tensor<T> ggain({c});
    Tensor<T> gshift({c});
    const long long pixels = static_cast<long long>(x.dim(0)) * x.dim(1);
    std::vector<T> xhat(static_cast<size_t>(c));
    for (long long p = 0; p < pixels; ++p) {
        const T* xr = x.data() + p * c;
        const T* gr = gout.data() + p * c;
        T* gxr = gx.data() + p * c;
        T mu = T(0);
        for (int i = 0; i < c; ++i) mu += xr[i];
        mu /= T(c);
        T var = T(0);
        for (int i = 0; i < c; ++i) {
            T d = xr[i] - mu;
            var += d * d;
        }
        var /= T(c);
        T inv = T(1) / std::sqrt(var + eps);
        T gh_mean = T(0), ghx_mean = T(0);
        for (int i = 0; i < c; ++i) {
            xhat[static_cast<size_t>(i)] = (xr[i] - mu) * inv;
            T gh = gr[i] * gain[i];
            gh_mean += gh;
            ghx_mean += gh * xhat[static_cast<size_t>(i)];
            ggain[i] += gr[i] * xhat[static_cast<size_t>(i)];
            gshift[i] += gr[i];
        }
        gh_mean /= T(c);
        ghx_mean /= T(c);
        for (int i = 0; i < c; ++i) {
            T gh = gr[i] * gain[i];
            gxr[i] = inv * (gh - gh_mean - xhat[static_cast<size_t>(i)] * ghx_mean);
        }
    }
    return {std::move(gx), std::move(ggain), std::move(gshift)};
}

// ----- pixel shuffle / unshuffle (factor 2) -----
// Unshuffle packs each 2x2 block into channels: out(y,x,(dy*2+dx)*C + c) =
// in(2y+dy, 2x+dx, c). Shuffle is the exact inverse.

template <typename T>
Tensor<T> pixel_unshuffle2(const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("pixel_unshuffle2: rank-3 required");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("pixel_unshuffle2: spatial dims must be even");
    Tensor<T> out({h / 2, w / 2, 4 * c});
    for (int y = 0; y < h / 2; ++y)
        for (int x2 = 0; x2 < w / 2; ++x2)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const T* src = &x.at3(2 * y + dy, 2 * x2 + dx, 0);
                    T* dst = &out.at3(y, x2, (dy * 2 + dx) * c);
                    for (int i = 0; i < c; ++i) dst[i] = src[i];
                }
    return out;
}

template <typename T>
Tensor<T> pixel_shuffle2(const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("pixel_shuffle2: rank-3 required");
    const int h = x.dim(0), w = x.dim(1), c4 = x.dim(2);
    if (c4 % 4 != 0) throw ShapeError("pixel_shuffle2: channels must be divisible by 4");
    const int c = c4 / 4;
    Tensor<T> out({2 * h, 2 * w, c});
    for (int y = 0; y < h; ++y)
        for (int x2 = 0; x2 < w; ++x2)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const T* src = &x.at3(y, x2, (dy * 2 + dx) * c);
                    T* dst = &out.at3(2 * y + dy, 2 * x2 + dx, 0);
                    for (int i = 0; i < c; ++i) dst[i] = src[i];
                }
    return out;
}

// ----- resampling -----
// down: pixel-unshuffle (C -> 4C) then 1x1 conv to 2C.
// up:   1x1 conv to 2C then pixel-shuffle (-> C/2 at twice the size).

template <typename T>
Tensor<T> resample_down(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.dim(0) % 2 != 0 || x.dim(1) % 2 != 0)
        throw ShapeError("resample down: spatial dims must be even");
    return conv2d_fwd(pixel_unshuffle2(x), w, b);
}

template <typename T>
Tensor<T> resample_up(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.dim(2) % 2 != 0) throw ShapeError("resample up: channel count must be even");
    return pixel_shuffle2(conv2d_fwd(x, w, b));
}

// ----- channel concat / split -----

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 3 || b.rank() != 3) throw ShapeError("concat_channels: rank-3 required");
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
        throw ShapeError("concat_channels: spatial dims differ");
    const int h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
    Tensor<T> out({h, w, ca + cb});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* pa = &a.at3(y, x, 0);
            const T* pb = &b.at3(y, x, 0);
            T* po = &out.at3(y, x, 0);
            for (int i = 0; i < ca; ++i) po[i] = pa[i];
            for (int i = 0; i < cb; ++i) po[ca + i] = pb[i];
        }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int ca) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor<T> a({h, w, ca}), b({h, w, c - ca});
    for (int y = 0; y < h; ++y)
        for (int x2 = 0; x2 < w; ++x2) {
            const T* px = &x.at3(y, x2, 0);
            T* pa = &a.at3(y, x2, 0);
            T* pb = &b.at3(y, x2, 0);
            for (int i = 0; i < ca; ++i) pa[i] = px[i];
            for (int i = 0; i < c - ca; ++i) pb[i] = px[ca + i];
        }
    return {std::move(a), std::move(b)};
}

// ----- spatial utilities (no gradients needed) -----

// Box average over factor x factor blocks.
template <typename T>
Tensor<T> area_downsample(const Tensor<T>& x, int factor) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % factor != 0 || w % factor != 0)
        throw ShapeError("area_downsample: dims not divisible by factor");
    Tensor<T> out({h / factor, w / factor, c});
    const T inv = T(1) / static_cast<T>(factor * factor);
    for (int y = 0; y < h / factor; ++y)
        for (int x2 = 0; x2 < w / factor; ++x2)
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) {
                    const T* src = &x.at3(y * factor + dy, x2 * factor + dx, 0);
                    T* dst = &out.at3(y, x2, 0);
                    for (int i = 0; i < c; ++i) dst[i] += src[i] * inv;
                }
    return out;
}

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

// Pads on the bottom/right with mirrored rows/columns (no edge repeat) so a
// later crop back to the original size is exact.
template <typename T>
Tensor<T> pad_reflect_to(const Tensor<T>& x, int th, int tw) {
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (th < h || tw < w) throw ShapeError("pad_reflect_to: target smaller than input");
    if (th - h > h - 1 || tw - w > w - 1)
        throw InputError("pad_reflect_to: image too small for required padding");
    Tensor<T> out({th, tw, c});
    for (int y = 0; y < th; ++y) {
        int sy = reflect101(y, h);
        for (int x2 = 0; x2 < tw; ++x2) {
            int sx = reflect101(x2, w);
            const T* src = &x.at3(sy, sx, 0);
            T* dst = &out.at3(y, x2, 0);
            for (int i = 0; i < c; ++i) dst[i] = src[i];
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, int th, int tw) {
    const int c = x.dim(2);
    if (th > x.dim(0) || tw > x.dim(1)) throw ShapeError("crop_to: target larger than input");
    Tensor<T> out({th, tw, c});
    for (int y = 0; y < th; ++y)
        for (int x2 = 0; x2 < tw; ++x2) {
            const T* src = &x.at3(y, x2, 0);
            T* dst = &out.at3(y, x2, 0);
            for (int i = 0; i < c; ++i) dst[i] = src[i];
        }
    return out;
}

template <typename T>
Tensor<T> crop_window(const Tensor<T>& x, int y0, int x0, int th, int tw) {
    const int c = x.dim(2);
    if (y0 < 0 || x0 < 0 || y0 + th > x.dim(0) || x0 + tw > x.dim(1))
        throw ShapeError("crop_window: window out of bounds");
    Tensor<T> out({th, tw, c});
    for (int y = 0; y < th; ++y)
        for (int x2 = 0; x2 < tw; ++x2) {
            const T* src = &x.at3(y0 + y, x0 + x2, 0);
            T* dst = &out.at3(y, x2, 0);
            for (int i = 0; i < c; ++i) dst[i] = src[i];
        }
    return out;
}

}  // namespace lfe
