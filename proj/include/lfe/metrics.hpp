#pragma once

#include "lfe/kernels.hpp"

// PSNR and single-scale SSIM. SSIM uses the standard 11x11 Gaussian window
// (sigma 1.5), k1 = 0.01, k2 = 0.03, dynamic range 1.0, computed per channel
// and averaged; boundaries are mirrored so the map has no dark border bias.

namespace lfe {

inline constexpr double kPsnrCap = 99.0;

template <typename T>
T psnr(const Tensor<T>& a, const Tensor<T>& b, T peak = T(1)) {
    check_same_shape(a, b, "psnr");
    T mse = T(0);
    for (long long i = 0; i < a.numel(); ++i) {
        T d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<T>(a.numel());
    if (mse == T(0)) return T(kPsnrCap);  // identical images: +inf sentinel
    return T(10) * std::log10(peak * peak / mse);
}

template <typename T>
struct QualityReport {
    T psnr = T(0);
    T ssim = T(0);
    Tensor<T> ssim_map;  // (H, W, 1), per-pixel mean over channels
};

namespace detail {

template <typename T>
std::vector<T> gaussian_window_11() {
    std::vector<T> w(11);
    const double sigma = 1.5;
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        w[static_cast<size_t>(i)] = static_cast<T>(std::exp(-d * d / (2 * sigma * sigma)));
        sum += w[static_cast<size_t>(i)];
    }
    for (auto& v : w) v = static_cast<T>(v / sum);
    return w;
}

// Separable Gaussian blur with mirrored boundaries, one channel plane.
template <typename T>
void blur_plane(const std::vector<T>& in, std::vector<T>& out, std::vector<T>& tmp, int h, int w,
                const std::vector<T>& win) {
    const int r = 5;
    tmp.resize(in.size());
    out.resize(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int k = -r; k <= r; ++k)
                acc += win[static_cast<size_t>(k + r)] * in[static_cast<size_t>(y) * w + reflect101(x + k, w)];
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T acc = T(0);
            for (int k = -r; k <= r; ++k)
                acc += win[static_cast<size_t>(k + r)] * tmp[static_cast<size_t>(reflect101(y + k, h)) * w + x];
            out[static_cast<size_t>(y) * w + x] = acc;
        }
}

}  // namespace detail

template <typename T>
QualityReport<T> ssim(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "ssim");
    const int h = a.dim(0), w = a.dim(1), c = a.dim(2);
    if (h < 11 || w < 11) throw ParamError("ssim: images smaller than the 11x11 window");
    const T c1 = T(0.01 * 0.01), c2 = T(0.03 * 0.03);
    auto win = detail::gaussian_window_11<T>();

    QualityReport<T> rep;
    rep.ssim_map = Tensor<T>({h, w, 1});
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<T> xa(plane), xb(plane), aa(plane), bb(plane), ab(plane);
    std::vector<T> mu_a, mu_b, m_aa, m_bb, m_ab, tmp;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                T va = a.at3(y, x, ch), vb = b.at3(y, x, ch);
                size_t i = static_cast<size_t>(y) * w + x;
                xa[i] = va;
                xb[i] = vb;
                aa[i] = va * va;
                bb[i] = vb * vb;
                ab[i] = va * vb;
            }
        detail::blur_plane(xa, mu_a, tmp, h, w, win);
        detail::blur_plane(xb, mu_b, tmp, h, w, win);
        detail::blur_plane(aa, m_aa, tmp, h, w, win);
        detail::blur_plane(bb, m_bb, tmp, h, w, win);
        detail::blur_plane(ab, m_ab, tmp, h, w, win);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                size_t i = static_cast<size_t>(y) * w + x;
                T ma = mu_a[i], mb = mu_b[i];
                T var_a = m_aa[i] - ma * ma;
                T var_b = m_bb[i] - mb * mb;
                T cov = m_ab[i] - ma * mb;
                T v = ((T(2) * ma * mb + c1) * (T(2) * cov + c2)) /
                      ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                rep.ssim_map.at3(y, x, 0) += v / static_cast<T>(c);
            }
    }
    T mean = T(0);
    for (long long i = 0; i < rep.ssim_map.numel(); ++i) mean += rep.ssim_map[i];
    rep.ssim = mean / static_cast<T>(rep.ssim_map.numel());
    rep.psnr = psnr(a, b);
    return rep;
}

}  // namespace lfe
