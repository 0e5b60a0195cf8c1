#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "lfe/tensor.hpp"

// 2D discrete Fourier analysis/synthesis in polar (amplitude, phase) form.
// The forward transform is the unitary X(u,v) = (1/sqrt(HW)) sum x(h,w)
// e^{-j2pi(hu/H + wv/W)}; the inverse uses the matching 1/sqrt(HW). 1D
// lengths that are powers of two use an iterative radix-2 kernel; other
// lengths go through Bluestein's chirp-z reduction to a power-of-two size.

namespace lfe {

template <typename T>
struct Pow2Fft {
    int n = 1;
    std::vector<int> rev;
    std::vector<std::complex<T>> tw;  // e^{-2pi i j / n}, j < n/2

    explicit Pow2Fft(int size) : n(size) {
        if (n <= 0 || (n & (n - 1)) != 0) throw ParamError("Pow2Fft: size must be a power of two");
        rev.resize(static_cast<size_t>(n));
        int logn = 0;
        while ((1 << logn) < n) ++logn;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < logn; ++b)
                if (i & (1 << b)) r |= 1 << (logn - 1 - b);
            rev[static_cast<size_t>(i)] = r;
        }
        tw.resize(static_cast<size_t>(n / 2));
        for (int j = 0; j < n / 2; ++j) {
            double a = -2.0 * kPi * j / n;
            tw[static_cast<size_t>(j)] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
        }
    }

    // Unnormalized transform; inverse conjugates the twiddles (still no 1/n).
    void run(std::complex<T>* d, bool inverse) const {
        for (int i = 0; i < n; ++i) {
            int r = rev[static_cast<size_t>(i)];
            if (i < r) std::swap(d[i], d[r]);
        }
        for (int len = 2; len <= n; len <<= 1) {
            int half = len / 2, step = n / len;
            for (int i = 0; i < n; i += len) {
                for (int j = 0; j < half; ++j) {
                    std::complex<T> w = tw[static_cast<size_t>(j * step)];
                    if (inverse) w = std::conj(w);
                    std::complex<T> u = d[i + j];
                    std::complex<T> v = d[i + j + half] * w;
                    d[i + j] = u + v;
                    d[i + j + half] = u - v;
                }
            }
        }
    }
};

template <typename T>
class Fft1d {
public:
    explicit Fft1d(int size) : n_(size) {
        if (n_ <= 0) throw ParamError("Fft1d: size must be positive");
        if ((n_ & (n_ - 1)) == 0) {
            base_ = std::make_unique<Pow2Fft<T>>(n_);
            return;
        }
        int m = 1;
        while (m < 2 * n_ - 1) m <<= 1;
        base_ = std::make_unique<Pow2Fft<T>>(m);
        chirp_.resize(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            // i^2 mod 2n keeps the chirp argument small and exact.
            long long q = (static_cast<long long>(i) * i) % (2LL * n_);
            double a = -kPi * static_cast<double>(q) / n_;
            chirp_[static_cast<size_t>(i)] = {static_cast<T>(std::cos(a)),
                                              static_cast<T>(std::sin(a))};
        }
        bfft_.assign(static_cast<size_t>(m), std::complex<T>(0, 0));
        bfft_[0] = std::conj(chirp_[0]);
        for (int i = 1; i < n_; ++i) {
            bfft_[static_cast<size_t>(i)] = std::conj(chirp_[static_cast<size_t>(i)]);
            bfft_[static_cast<size_t>(m - i)] = std::conj(chirp_[static_cast<size_t>(i)]);
        }
        base_->run(bfft_.data(), false);
    }

    int size() const { return n_; }

    // Unnormalized DFT, X_k = sum_n x_n e^{-2pi i nk/n}.
    void forward(std::complex<T>* d) const {
        if (chirp_.empty()) {
            base_->run(d, false);
            return;
        }
        const int m = base_->n;
        std::vector<std::complex<T>> buf(static_cast<size_t>(m), std::complex<T>(0, 0));
        for (int i = 0; i < n_; ++i) buf[static_cast<size_t>(i)] = d[i] * chirp_[static_cast<size_t>(i)];
        base_->run(buf.data(), false);
        for (int i = 0; i < m; ++i) buf[static_cast<size_t>(i)] *= bfft_[static_cast<size_t>(i)];
        base_->run(buf.data(), true);
        const T inv_m = T(1) / static_cast<T>(m);
        for (int k = 0; k < n_; ++k)
            d[k] = chirp_[static_cast<size_t>(k)] * buf[static_cast<size_t>(k)] * inv_m;
    }

    // Unnormalized inverse (e^{+2pi i nk/n}); F^{-1} = conj . F . conj.
    void inverse(std::complex<T>* d) const {
        for (int i = 0; i < n_; ++i) d[i] = std::conj(d[i]);
        forward(d);
        for (int i = 0; i < n_; ++i) d[i] = std::conj(d[i]);
    }

private:
    int n_;
    std::unique_ptr<Pow2Fft<T>> base_;
    std::vector<std::complex<T>> chirp_;
    std::vector<std::complex<T>> bfft_;
};

// In-place unitary 2D transform of one H x W complex plane (row-major).
template <typename T>
void fft2d_plane(std::complex<T>* plane, int h, int w, bool inverse, const Fft1d<T>& plan_h,
                 const Fft1d<T>& plan_w) {
    for (int y = 0; y < h; ++y) {
        if (inverse)
            plan_w.inverse(plane + static_cast<size_t>(y) * w);
        else
            plan_w.forward(plane + static_cast<size_t>(y) * w);
    }
    std::vector<std::complex<T>> col(static_cast<size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[static_cast<size_t>(y)] = plane[static_cast<size_t>(y) * w + x];
        if (inverse)
            plan_h.inverse(col.data());
        else
            plan_h.forward(col.data());
        for (int y = 0; y < h; ++y) plane[static_cast<size_t>(y) * w + x] = col[static_cast<size_t>(y)];
    }
    const T scale = T(1) / std::sqrt(static_cast<T>(h) * static_cast<T>(w));
    const long long n = static_cast<long long>(h) * w;
    for (long long i = 0; i < n; ++i) plane[i] *= scale;
}

// Per-channel unitary transform of complex data held as two (H,W,C) tensors.
template <typename T>
void fft2d_unitary_channels(Tensor<T>& re, Tensor<T>& im, bool inverse) {
    check_same_shape(re, im, "fft2d_unitary_channels");
    const int h = re.dim(0), w = re.dim(1), c = re.dim(2);
    Fft1d<T> plan_h(h), plan_w(w);
    std::vector<std::complex<T>> plane(static_cast<size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                plane[static_cast<size_t>(y) * w + x] = {re.at3(y, x, ch), im.at3(y, x, ch)};
        fft2d_plane(plane.data(), h, w, inverse, plan_h, plan_w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                re.at3(y, x, ch) = plane[static_cast<size_t>(y) * w + x].real();
                im.at3(y, x, ch) = plane[static_cast<size_t>(y) * w + x].imag();
            }
    }
}

// ----- polar form -----

template <typename T>
struct PolarSpectrum {
    Tensor<T> amplitude;  // >= 0
    Tensor<T> phase;      // in (-pi, pi]
};

enum class PolarSwap { kAmplitude, kPhase };

template <typename T>
void polar_from_complex(const Tensor<T>& re, const Tensor<T>& im, PolarSpectrum<T>& out) {
    out.amplitude = Tensor<T>(re.dims());
    out.phase = Tensor<T>(re.dims());
    for (long long i = 0; i < re.numel(); ++i) {
        T r = re[i], m = im[i];
        out.amplitude[i] = std::hypot(r, m);
        T p = (r == T(0) && m == T(0)) ? T(0) : std::atan2(m, r);
        if (p <= T(-kPi)) p = T(kPi);
        out.phase[i] = p;
    }
}

template <typename T>
PolarSpectrum<T> fft2d_polar(const Tensor<T>& x) {
    if (x.rank() != 3) throw ShapeError("fft2d_polar: input must be rank-3");
    Tensor<T> re = x;
    Tensor<T> im(x.dims());
    fft2d_unitary_channels(re, im, false);
    PolarSpectrum<T> out;
    polar_from_complex(re, im, out);
    return out;
}

// Reconstructs Re = A cos P, Im = A sin P, applies the unitary inverse and
// returns the real plane. The imaginary residual is reported through
// residual_imag_max; a non-Hermitian spectrum (e.g. after component swaps)
// legitimately produces one.
template <typename T>
Tensor<T> ifft2d_polar(const PolarSpectrum<T>& s, T* residual_imag_max = nullptr) {
    check_same_shape(s.amplitude, s.phase, "ifft2d_polar");
    Tensor<T> re(s.amplitude.dims()), im(s.amplitude.dims());
    for (long long i = 0; i < re.numel(); ++i) {
        re[i] = s.amplitude[i] * std::cos(s.phase[i]);
        im[i] = s.amplitude[i] * std::sin(s.phase[i]);
    }
    fft2d_unitary_channels(re, im, true);
    if (residual_imag_max) {
        T m = T(0);
        for (long long i = 0; i < im.numel(); ++i) m = std::max(m, std::abs(im[i]));
        *residual_imag_max = m;
    }
    return re;
}

template <typename T>
PolarSpectrum<T> swap_polar(const PolarSpectrum<T>& source, const PolarSpectrum<T>& donor,
                            PolarSwap which) {
    check_same_shape(source.amplitude, donor.amplitude, "swap_polar");
    PolarSpectrum<T> out;
    if (which == PolarSwap::kAmplitude) {
        out.amplitude = donor.amplitude;
        out.phase = source.phase;
    } else {
        out.amplitude = source.amplitude;
        out.phase = donor.phase;
    }
    return out;
}

}  // namespace lfe
