#pragma once

#include <tuple>

#include "lfe/kernels.hpp"
#include "lfe/tensor.hpp"

// State-space core. Continuous parameters (A, B) with a timescale delta are
// discretized by the zeroth-order hold, Abar = e^{dA} and
// Bbar = (dA)^{-1}(e^{dA} - 1) dB, and run through the linear recurrence
// h(t) = Abar h(t-1) + Bbar x(t), y(t) = C h(t) + D x(t). A is diagonal.
// In selective mode delta, B and C are per-step functions of the input.

namespace lfe {

// Elementwise ZOH with the series limit Bbar -> dB (1 + dA/2) for |dA| < 1e-6.
template <typename T>
inline void zoh_scalar(T a, T b, T delta, T& abar, T& bbar) {
    T z = delta * a;
    abar = std::exp(z);
    if (std::abs(z) < T(1e-6))
        bbar = delta * b * (T(1) + z * T(0.5));
    else
        bbar = (std::expm1(z) / a) * b;
}

// Gradient of the discretization factor f(delta, a) = (e^{da} - 1)/a, so
// Bbar = f * b. df/ddelta = e^{da} (exact in either branch), and
// df/da = (delta e^{da} - f)/a, or delta^2/2 near da = 0.
template <typename T>
inline T zoh_f(T a, T delta) {
    T z = delta * a;
    if (std::abs(z) < T(1e-6)) return delta * (T(1) + z * T(0.5));
    return std::expm1(z) / a;
}

template <typename T>
inline T zoh_df_da(T a, T delta, T abar, T f) {
    T z = delta * a;
    if (std::abs(z) < T(1e-6)) return delta * delta * T(0.5);
    return (delta * abar - f) / a;
}

// a_diag: (N) shared across dims or (D,N); b: (D,N) or (N) broadcast across
// dims; delta: (D). Returns (Abar, Bbar), each (D,N).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> zoh_discretize(const Tensor<T>& a_diag, const Tensor<T>& b,
                                               const Tensor<T>& delta) {
    if (delta.rank() != 1) throw ParamError("zoh_discretize: delta must be rank-1 (D)");
    const int d = delta.dim(0);
    for (int i = 0; i < d; ++i)
        if (!(delta[i] > T(0))) throw ParamError("zoh_discretize: delta must be positive");
    int n;
    if (a_diag.rank() == 1)
        n = a_diag.dim(0);
    else if (a_diag.rank() == 2 && a_diag.dim(0) == d)
        n = a_diag.dim(1);
    else
        throw ShapeError("zoh_discretize: A diagonal must be (N) or (D,N)");
    bool b_shared = (b.rank() == 1);
    if (b_shared ? (b.dim(0) != n) : (b.rank() != 2 || b.dim(0) != d || b.dim(1) != n))
        throw ShapeError("zoh_discretize: B must be (N) or (D,N)");
    Tensor<T> abar({d, n}), bbar({d, n});
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < n; ++j) {
            T a = (a_diag.rank() == 1) ? a_diag[j] : a_diag.at2(i, j);
            T bv = b_shared ? b[j] : b.at2(i, j);
            zoh_scalar(a, bv, delta[i], abar.at2(i, j), bbar.at2(i, j));
        }
    return {std::move(abar), std::move(bbar)};
}

// Fixed (non-selective) parameter set.
template <typename T>
struct SSMParams {
    int state_size = 0;   // N
    Tensor<T> a_diag;     // (N), entries <= 0 for stability
    Tensor<T> b;          // (D,N)
    Tensor<T> c;          // (D,N)
    Tensor<T> d_skip;     // (D)
    Tensor<T> delta;      // (D), > 0

    void validate(int dims) const {
        if (a_diag.rank() != 1 || a_diag.dim(0) != state_size)
            throw ShapeError("SSMParams: A diagonal must be (N)");
        if (b.rank() != 2 || b.dim(0) != dims || b.dim(1) != state_size)
            throw ShapeError("SSMParams: B must be (D,N)");
        if (c.rank() != 2 || c.dim(0) != dims || c.dim(1) != state_size)
            throw ShapeError("SSMParams: C must be (D,N)");
        if (d_skip.numel() != dims) throw ShapeError("SSMParams: D_skip must be (D)");
        if (delta.numel() != dims) throw ShapeError("SSMParams: delta must be (D)");
        for (int i = 0; i < dims; ++i)
            if (!(delta[i] > T(0))) throw ParamError("SSMParams: delta must be positive");
    }
};

// Linear recurrence with fixed discretized parameters; x is (L,D).
template <typename T>
Tensor<T> scan(const SSMParams<T>& params, const Tensor<T>& x) {
    if (x.rank() != 2) throw ShapeError("scan: input must be rank-2 (L,D)");
    const int l = x.dim(0), d = x.dim(1), n = params.state_size;
    params.validate(d);
    auto [abar, bbar] = zoh_discretize(params.a_diag, params.b, params.delta);
    Tensor<T> y({l, d});
    Tensor<T> h({d, n});
    for (int t = 0; t < l; ++t) {
        const T* xr = &x.at2(t, 0);
        T* yr = &y.at2(t, 0);
        for (int i = 0; i < d; ++i) {
            T* hr = &h.at2(i, 0);
            const T* ar = &abar.at2(i, 0);
            const T* br = &bbar.at2(i, 0);
            const T* cr = &params.c.at2(i, 0);
            T xv = xr[i];
            T acc = T(0);
            for (int j = 0; j < n; ++j) {
                hr[j] = ar[j] * hr[j] + br[j] * xv;
                acc += cr[j] * hr[j];
            }
            yr[i] = acc + params.d_skip[i] * xv;
        }
        for (int i = 0; i < d; ++i) {
            if (!std::isfinite(yr[i]))
                throw NumericError("scan: non-finite state at step " + std::to_string(t));
        }
    }
    return y;
}

// ----- selective core -----
// Per-step parameters: delta (L,D), B (L,N), C (L,N); diagonal A (D,N) <= 0
// and skip gain (D). Used by the tape with stored forward caches.

template <typename T>
struct SelectiveCache {
    Tensor<T> h;     // (L,D,N)
    Tensor<T> abar;  // (L,D,N), also e^{delta a}
    Tensor<T> f;     // (L,D,N), Bbar = f * B
};

template <typename T>
Tensor<T> selective_core_fwd(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& bseq,
                             const Tensor<T>& cseq, const Tensor<T>& a, const Tensor<T>& d_skip,
                             SelectiveCache<T>* cache = nullptr) {
    const int l = u.dim(0), d = u.dim(1);
    const int n = a.dim(1);
    if (delta.dim(0) != l || delta.dim(1) != d) throw ShapeError("selective_core: delta must be (L,D)");
    if (bseq.dim(0) != l || bseq.dim(1) != n) throw ShapeError("selective_core: B must be (L,N)");
    if (cseq.dim(0) != l || cseq.dim(1) != n) throw ShapeError("selective_core: C must be (L,N)");
    if (a.dim(0) != d) throw ShapeError("selective_core: A must be (D,N)");
    if (d_skip.numel() != d) throw ShapeError("selective_core: D_skip must be (D)");
    Tensor<T> y({l, d});
    Tensor<T> h({d, n});
    if (cache) {
        cache->h = Tensor<T>({l, d, n});
        cache->abar = Tensor<T>({l, d, n});
        cache->f = Tensor<T>({l, d, n});
    }
    for (int t = 0; t < l; ++t) {
        const T* ur = &u.at2(t, 0);
        const T* dr = &delta.at2(t, 0);
        const T* br = &bseq.at2(t, 0);
        const T* cr = &cseq.at2(t, 0);
        T* yr = &y.at2(t, 0);
        for (int i = 0; i < d; ++i) {
            if (!(dr[i] > T(0)))
                throw ParamError("selective_core: nonpositive delta at step " + std::to_string(t));
            T* hr = &h.at2(i, 0);
            const T* ar = &a.at2(i, 0);
            T xv = ur[i];
            T acc = T(0);
            T* ch = cache ? &cache->h[(static_cast<long long>(t) * d + i) * n] : nullptr;
            T* ca = cache ? &cache->abar[(static_cast<long long>(t) * d + i) * n] : nullptr;
            T* cf = cache ? &cache->f[(static_cast<long long>(t) * d + i) * n] : nullptr;
            for (int j = 0; j < n; ++j) {
                T abar = std::exp(dr[i] * ar[j]);
                T f = zoh_f(ar[j], dr[i]);
                hr[j] = abar * hr[j] + f * br[j] * xv;
                acc += cr[j] * hr[j];
                if (cache) {
                    ch[j] = hr[j];
                    ca[j] = abar;
                    cf[j] = f;
                }
            }
            yr[i] = acc + d_skip[i] * xv;
            if (!std::isfinite(yr[i]))
                throw NumericError("selective_core: non-finite state at step " + std::to_string(t));
        }
    }
    return y;
}

template <typename T>
struct SelectiveGrads {
    Tensor<T> u, delta, bseq, cseq, a, d_skip;
};

template <typename T>
SelectiveGrads<T> selective_core_bwd(const Tensor<T>& gy, const Tensor<T>& u, const Tensor<T>& delta,
                                     const Tensor<T>& bseq, const Tensor<T>& cseq, const Tensor<T>& a,
                                     const Tensor<T>& d_skip, const SelectiveCache<T>& cache) {
    const int l = u.dim(0), d = u.dim(1), n = a.dim(1);
    SelectiveGrads<T> g;
    g.u = Tensor<T>({l, d});
    g.delta = Tensor<T>({l, d});
    g.bseq = Tensor<T>({l, n});
    g.cseq = Tensor<T>({l, n});
    g.a = Tensor<T>({d, n});
    g.d_skip = Tensor<T>({d});
    Tensor<T> dh_next({d, n});  // Abar(t+1) * dh(t+1), rolled backward
    for (int t = l - 1; t >= 0; --t) {
        const T* gyr = &gy.at2(t, 0);
        const T* ur = &u.at2(t, 0);
        const T* dr = &delta.at2(t, 0);
        const T* br = &bseq.at2(t, 0);
        const T* cr = &cseq.at2(t, 0);
        T* gur = &g.u.at2(t, 0);
        T* gdr = &g.delta.at2(t, 0);
        T* gbr = &g.bseq.at2(t, 0);
        T* gcr = &g.cseq.at2(t, 0);
        for (int i = 0; i < d; ++i) {
            const T* hc = &cache.h[(static_cast<long long>(t) * d + i) * n];
            const T* hp = t > 0 ? &cache.h[(static_cast<long long>(t - 1) * d + i) * n] : nullptr;
            const T* ac = &cache.abar[(static_cast<long long>(t) * d + i) * n];
            const T* fc = &cache.f[(static_cast<long long>(t) * d + i) * n];
            const T* ar = &a.at2(i, 0);
            T* gar = &g.a.at2(i, 0);
            T* dhn = &dh_next.at2(i, 0);
            T gyv = gyr[i];
            T xv = ur[i];
            T gu_acc = d_skip[i] * gyv;
            T gd_acc = T(0);
            for (int j = 0; j < n; ++j) {
                T dh = gyv * cr[j] + dhn[j];
                gcr[j] += gyv * hc[j];
                T hprev = hp ? hp[j] : T(0);
                T dabar = dh * hprev;
                T dbbar = dh * xv;
                gu_acc += dh * fc[j] * br[j];
                // Abar = e^{da}: d/ddelta = a Abar, d/da = delta Abar.
                // Bbar = f(delta,a) B: df/ddelta = Abar, df/da per zoh_df_da.
                gd_acc += dabar * ar[j] * ac[j] + dbbar * br[j] * ac[j];
                gar[j] += dabar * dr[i] * ac[j] +
                          dbbar * br[j] * zoh_df_da(ar[j], dr[i], ac[j], fc[j]);
                gbr[j] += dbbar * fc[j];
                dhn[j] = dh * ac[j];
            }
            gur[i] = gu_acc;
            gdr[i] = gd_acc;
            g.d_skip[i] += gyv * xv;
        }
    }
    return g;
}

// Selective projection weights; the scanned sequence carries channels as the
// feature dims D, so the state mixes information per channel.
template <typename T>
struct SelectiveScanWeights {
    Tensor<T> w_dt, b_dt;  // (D,D), (D): delta = softplus(x W + b)
    Tensor<T> w_b;         // (D,N)
    Tensor<T> w_c;         // (D,N)
    Tensor<T> a_log;       // (D,N): A = -exp(a_log)
    Tensor<T> d_skip;      // (D)
};

// Plain (inference) selective scan: projections + per-step ZOH + recurrence.
template <typename T>
Tensor<T> selective_scan_channel(const Tensor<T>& x, const SelectiveScanWeights<T>& w) {
    if (x.rank() != 2) throw ShapeError("selective_scan_channel: input must be rank-2 (L,D)");
    Tensor<T> delta = linear_fwd(x, w.w_dt, w.b_dt);
    for (long long i = 0; i < delta.numel(); ++i) delta[i] = softplus_s(delta[i]);
    Tensor<T> bseq = linear_fwd(x, w.w_b, Tensor<T>());
    Tensor<T> cseq = linear_fwd(x, w.w_c, Tensor<T>());
    Tensor<T> a(w.a_log.dims());
    for (long long i = 0; i < a.numel(); ++i) a[i] = -std::exp(w.a_log[i]);
    return selective_core_fwd(x, delta, bseq, cseq, a, w.d_skip);
}

}  // namespace lfe
