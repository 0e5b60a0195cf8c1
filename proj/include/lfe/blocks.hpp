#pragma once

#include "lfe/autodiff.hpp"

// The two composite blocks, both shape-preserving (H,W,C) -> (H,W,C).
//
// Wavelet-Mamba block: token-mixer residual wrapping. The mixer decomposes
// the normalized input with a Haar DWT, enhances the LL band with a
// channel-wise selective scan over the flattened spatial sequence, passes
// the three high bands through one grouped 3x3 conv, and reconstructs with
// the inverse transform.
//
// Fourier adjustment block: pointwise conv-activation refinement of the
// amplitude and phase planes, inverse transform, closing 3x3 conv and skip.

namespace lfe {

// ----- weight structs (V = Tensor for plain eval, Var for the tape) -----

template <typename V>
struct ChannelMambaWeights {
    V in_x_w, in_x_b;  // C -> M scan path (M = 2C)
    V in_z_w, in_z_b;  // C -> M gate path
    V out_w, out_b;    // M -> C
    V dt_w, dt_b;      // M -> M, delta projection (softplus)
    V b_w, c_w;        // M -> N
    V a_log;           // (M, N)
    V d_skip;          // (M)
};

template <typename V>
struct WMBWeights {
    V ln1_g, ln1_b;
    V low_in_w, low_in_b;    // 3x3 C -> C, + GELU
    ChannelMambaWeights<V> mamba;
    V low_out_w, low_out_b;  // 3x3 C -> C
    V high_w, high_b;        // 3x3 3C -> 3C, groups = 3
    V ln2_g, ln2_b;
    V ffn1_w, ffn1_b;        // 1x1 C -> 2C, + GELU
    V ffn2_w, ffn2_b;        // 1x1 2C -> C
};

template <typename V>
struct FFABWeights {
    V amp1_w, amp1_b, amp2_w, amp2_b;  // 1x1 C -> C conv-activation blocks
    V ph1_w, ph1_b, ph2_w, ph2_b;
    V out_w, out_b;                    // 3x3 C -> C
};

// ----- parameter registration -----

template <typename T>
void register_conv(ParamStore<T>& ps, const std::string& prefix, int k, int cin, int cout, Rng& rng,
                   T gain = T(1)) {
    T std_dev = gain * std::sqrt(T(2) / static_cast<T>(k * k * cin));
    ps.add(prefix + ".w", Tensor<T>::random_normal({k, k, cin, cout}, rng, std_dev));
    ps.add(prefix + ".b", Tensor<T>({cout}));
}

template <typename T>
void register_linear(ParamStore<T>& ps, const std::string& prefix, int din, int dout, Rng& rng,
                     T gain = T(1)) {
    T std_dev = gain * std::sqrt(T(1) / static_cast<T>(din));
    ps.add(prefix + ".w", Tensor<T>::random_normal({din, dout}, rng, std_dev));
    ps.add(prefix + ".b", Tensor<T>({dout}));
}

// Inner output layers start small so deep residual stacks open near the
// identity but still receive gradient everywhere.
inline constexpr double kResidualGain = 0.1;

template <typename T>
void register_channel_mamba(ParamStore<T>& ps, const std::string& prefix, int c, int state_n,
                            Rng& rng) {
    const int m = 2 * c;  // expansion factor 2
    register_linear(ps, prefix + ".in_x", c, m, rng);
    register_linear(ps, prefix + ".in_z", c, m, rng);
    register_linear(ps, prefix + ".out", m, c, rng, T(kResidualGain));
    ps.add(prefix + ".dt.w", Tensor<T>::random_normal({m, m}, rng, T(0.1) / std::sqrt(T(m))));
    Tensor<T> dt_b({m});
    for (int i = 0; i < m; ++i) {
        // softplus(b) log-spaced in [1e-3, 1e-1]
        T dt0 = std::exp(static_cast<T>(rng.uniform(std::log(1e-3), std::log(1e-1))));
        dt_b[i] = std::log(std::expm1(dt0));
    }
    ps.add(prefix + ".dt.b", std::move(dt_b));
    ps.add(prefix + ".b_proj.w", Tensor<T>::random_normal({m, state_n}, rng, T(1) / std::sqrt(T(m))));
    ps.add(prefix + ".c_proj.w", Tensor<T>::random_normal({m, state_n}, rng, T(1) / std::sqrt(T(m))));
    Tensor<T> a_log({m, state_n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < state_n; ++j) a_log.at2(i, j) = std::log(static_cast<T>(j + 1));
    ps.add(prefix + ".a_log", std::move(a_log));
    ps.add(prefix + ".d_skip", Tensor<T>::full({m}, T(1)));
}

template <typename T>
void register_wmb(ParamStore<T>& ps, const std::string& prefix, int c, int state_n, Rng& rng) {
    ps.add(prefix + ".ln1.g", Tensor<T>::full({c}, T(1)));
    ps.add(prefix + ".ln1.b", Tensor<T>({c}));
    register_conv(ps, prefix + ".low_in", 3, c, c, rng);
    register_channel_mamba(ps, prefix + ".mamba", c, state_n, rng);
    register_conv(ps, prefix + ".low_out", 3, c, c, rng, T(kResidualGain));
    // grouped conv over the stacked high bands: weight (3,3,C,3C), groups 3
    register_conv(ps, prefix + ".high", 3, c, 3 * c, rng, T(kResidualGain));
    ps.add(prefix + ".ln2.g", Tensor<T>::full({c}, T(1)));
    ps.add(prefix + ".ln2.b", Tensor<T>({c}));
    register_conv(ps, prefix + ".ffn1", 1, c, 2 * c, rng);
    register_conv(ps, prefix + ".ffn2", 1, 2 * c, c, rng, T(kResidualGain));
}

template <typename T>
void register_ffab(ParamStore<T>& ps, const std::string& prefix, int c, Rng& rng) {
    register_conv(ps, prefix + ".amp1", 1, c, c, rng);
    register_conv(ps, prefix + ".amp2", 1, c, c, rng);
    register_conv(ps, prefix + ".ph1", 1, c, c, rng);
    register_conv(ps, prefix + ".ph2", 1, c, c, rng);
    register_conv(ps, prefix + ".out", 3, c, c, rng, T(kResidualGain));
}

// ----- binding -----

template <class E, typename T>
ChannelMambaWeights<typename E::V> bind_channel_mamba(E& eng, const ParamStore<T>& ps,
                                                      const std::string& prefix) {
    ChannelMambaWeights<typename E::V> w;
    w.in_x_w = eng.param(ps, prefix + ".in_x.w");
    w.in_x_b = eng.param(ps, prefix + ".in_x.b");
    w.in_z_w = eng.param(ps, prefix + ".in_z.w");
    w.in_z_b = eng.param(ps, prefix + ".in_z.b");
    w.out_w = eng.param(ps, prefix + ".out.w");
    w.out_b = eng.param(ps, prefix + ".out.b");
    w.dt_w = eng.param(ps, prefix + ".dt.w");
    w.dt_b = eng.param(ps, prefix + ".dt.b");
    w.b_w = eng.param(ps, prefix + ".b_proj.w");
    w.c_w = eng.param(ps, prefix + ".c_proj.w");
    w.a_log = eng.param(ps, prefix + ".a_log");
    w.d_skip = eng.param(ps, prefix + ".d_skip");
    return w;
}

template <class E, typename T>
WMBWeights<typename E::V> bind_wmb(E& eng, const ParamStore<T>& ps, const std::string& prefix) {
    WMBWeights<typename E::V> w;
    w.ln1_g = eng.param(ps, prefix + ".ln1.g");
    w.ln1_b = eng.param(ps, prefix + ".ln1.b");
    w.low_in_w = eng.param(ps, prefix + ".low_in.w");
    w.low_in_b = eng.param(ps, prefix + ".low_in.b");
    w.mamba = bind_channel_mamba(eng, ps, prefix + ".mamba");
    w.low_out_w = eng.param(ps, prefix + ".low_out.w");
    w.low_out_b = eng.param(ps, prefix + ".low_out.b");
    w.high_w = eng.param(ps, prefix + ".high.w");
    w.high_b = eng.param(ps, prefix + ".high.b");
    w.ln2_g = eng.param(ps, prefix + ".ln2.g");
    w.ln2_b = eng.param(ps, prefix + ".ln2.b");
    w.ffn1_w = eng.param(ps, prefix + ".ffn1.w");
    w.ffn1_b = eng.param(ps, prefix + ".ffn1.b");
    w.ffn2_w = eng.param(ps, prefix + ".ffn2.w");
    w.ffn2_b = eng.param(ps, prefix + ".ffn2.b");
    return w;
}

template <class E, typename T>
FFABWeights<typename E::V> bind_ffab(E& eng, const ParamStore<T>& ps, const std::string& prefix) {
    FFABWeights<typename E::V> w;
    w.amp1_w = eng.param(ps, prefix + ".amp1.w");
    w.amp1_b = eng.param(ps, prefix + ".amp1.b");
    w.amp2_w = eng.param(ps, prefix + ".amp2.w");
    w.amp2_b = eng.param(ps, prefix + ".amp2.b");
    w.ph1_w = eng.param(ps, prefix + ".ph1.w");
    w.ph1_b = eng.param(ps, prefix + ".ph1.b");
    w.ph2_w = eng.param(ps, prefix + ".ph2.w");
    w.ph2_b = eng.param(ps, prefix + ".ph2.b");
    w.out_w = eng.param(ps, prefix + ".out.w");
    w.out_b = eng.param(ps, prefix + ".out.b");
    return w;
}

// ----- forward wiring -----

// Selective scan with input-dependent delta/B/C, per-step ZOH inside the
// core. x is (L, D).
template <class E>
typename E::V selective_scan(E& eng, const typename E::V& x,
                             const ChannelMambaWeights<typename E::V>& w) {
    auto delta = eng.softplus(eng.linear(x, w.dt_w, w.dt_b));
    auto bseq = eng.linear_nb(x, w.b_w);
    auto cseq = eng.linear_nb(x, w.c_w);
    auto a = eng.neg_exp(w.a_log);
    return eng.selective_core(x, delta, bseq, cseq, a, w.d_skip);
}

// SiLU-gated dual path around the scan, with in/out projections.
template <class E>
typename E::V channel_mamba(E& eng, const typename E::V& x_seq,
                            const ChannelMambaWeights<typename E::V>& w) {
    auto u = eng.silu(eng.linear(x_seq, w.in_x_w, w.in_x_b));
    auto z = eng.silu(eng.linear(x_seq, w.in_z_w, w.in_z_b));
    auto s = selective_scan(eng, u, w);
    return eng.linear(eng.mul(s, z), w.out_w, w.out_b);
}

// DWT -> low branch (conv-act, channel mamba over flattened spatial tokens,
// conv) and high branch (grouped conv) -> IWT. If ll_out is non-null it
// receives the enhanced low band F'_LL (pre-IWT), the tap used by the
// wavelet loss.
template <class E>
typename E::V wavelet_mamba(E& eng, const typename E::V& x, const WMBWeights<typename E::V>& w,
                            typename E::V* ll_out = nullptr) {
    const auto& xv = eng.value(x);
    if (xv.dim(0) % 2 != 0 || xv.dim(1) % 2 != 0)
        throw ShapeError("wavelet_mamba: spatial dims must be even");
    const int c = xv.dim(2);
    auto bands = eng.dwt(x);
    const int h2 = eng.value(bands[0]).dim(0), w2 = eng.value(bands[0]).dim(1);

    auto low = eng.gelu(eng.conv2d(bands[0], w.low_in_w, w.low_in_b));
    auto seq = eng.reshape(low, {h2 * w2, c});
    auto mixed = channel_mamba(eng, seq, w.mamba);
    auto low_sp = eng.reshape(mixed, {h2, w2, c});
    auto ll_prime = eng.conv2d(low_sp, w.low_out_w, w.low_out_b);
    if (ll_out) *ll_out = ll_prime;

    auto high = eng.concat_ch(eng.concat_ch(bands[1], bands[2]), bands[3]);
    auto high_prime = eng.conv2d(high, w.high_w, w.high_b, 1, 3);
    auto primed = eng.split3(high_prime, c);
    return eng.iwt(ll_prime, primed[0], primed[1], primed[2]);
}

// Token-mixer residual pair: I' = WM(LN(x)) + x; out = FFN(LN(I')) + I'.
template <class E>
std::pair<typename E::V, typename E::V> wmb_forward(E& eng, const typename E::V& x,
                                                    const WMBWeights<typename E::V>& w,
                                                    typename E::Scalar ln_eps) {
    typename E::V ll_pred;
    auto mixed = wavelet_mamba(eng, eng.layer_norm(x, w.ln1_g, w.ln1_b, ln_eps), w, &ll_pred);
    auto i_prime = eng.add(mixed, x);
    auto h = eng.gelu(eng.conv2d(eng.layer_norm(i_prime, w.ln2_g, w.ln2_b, ln_eps), w.ffn1_w, w.ffn1_b));
    auto out = eng.add(eng.conv2d(h, w.ffn2_w, w.ffn2_b), i_prime);
    return {out, ll_pred};
}

// FFT -> conv-activation refinement of amplitude and phase -> inverse FFT ->
// closing 3x3 conv plus skip connection.
template <class E>
typename E::V ffab_forward(E& eng, const typename E::V& x, const FFABWeights<typename E::V>& w) {
    auto [amp, ph] = eng.fft_polar(x);
    auto amp2 = eng.gelu(eng.conv2d(eng.gelu(eng.conv2d(amp, w.amp1_w, w.amp1_b)), w.amp2_w, w.amp2_b));
    auto ph2 = eng.gelu(eng.conv2d(eng.gelu(eng.conv2d(ph, w.ph1_w, w.ph1_b)), w.ph2_w, w.ph2_b));
    auto rec = eng.ifft_polar(amp2, ph2);
    return eng.add(eng.conv2d(rec, w.out_w, w.out_b), x);
}

}  // namespace lfe
