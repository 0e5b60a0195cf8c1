#pragma once

#include <array>
#include <functional>
#include <memory>
#include <unordered_set>

#include "lfe/fourier.hpp"
#include "lfe/kernels.hpp"
#include "lfe/param_store.hpp"
#include "lfe/ssm.hpp"
#include "lfe/wavelet.hpp"

// Reverse-mode tape over tensor-level operations. Each node stores its
// output value(s) and a closure that pulls the output gradients and
// accumulates into its parents. backward() walks reverse post-order from the
// loss, which is a valid topological order on the DAG.
//
// PlainEngine and TapeEngine expose the same op surface, so block and model
// wiring is written once and runs either on bare tensors (inference) or on
// the tape (training, gradient checks) with identical arithmetic.

namespace lfe {

template <typename T>
struct Node;

template <typename T>
struct Var {
    std::shared_ptr<Node<T>> node;
    int slot = 0;

    bool defined() const { return node != nullptr; }
    const Tensor<T>& value() const { return node->out[static_cast<size_t>(slot)]; }
    const Tensor<T>& grad() const { return node->grad[static_cast<size_t>(slot)]; }
    bool needs_grad() const { return node && node->needs_grad; }
};

template <typename T>
struct Node {
    std::vector<Tensor<T>> out;
    std::vector<Tensor<T>> grad;  // allocated on first accumulation
    std::vector<Var<T>> parents;
    std::function<void(Node&)> back;
    bool needs_grad = false;
    const char* tag = "";
};

template <typename T>
void accum_grad(const Var<T>& v, const Tensor<T>& g) {
    if (!v.defined() || !v.node->needs_grad) return;
    Tensor<T>& slot = v.node->grad[static_cast<size_t>(v.slot)];
    if (slot.empty())
        slot = g;
    else
        ew_axpy(slot, g);
}

// Gradient of an output slot during backprop; nullptr when no consumer
// contributed (treated as zero).
template <typename T>
const Tensor<T>* grad_of_slot(Node<T>& n, int slot) {
    const Tensor<T>& g = n.grad[static_cast<size_t>(slot)];
    return g.empty() ? nullptr : &g;
}

template <typename T>
void backward(const Var<T>& loss) {
    if (!loss.defined() || loss.value().numel() != 1)
        throw ParamError("backward: loss must be a defined scalar");
    if (!loss.node->needs_grad) return;
    // iterative post-order DFS over parents
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    struct Frame {
        Node<T>* n;
        size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node.get()});
    visited.insert(loss.node.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            Node<T>* p = f.n->parents[f.next++].node.get();
            if (p && p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    loss.node->grad[static_cast<size_t>(loss.slot)] = Tensor<T>({1}, T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (!n->back) continue;
        bool any = false;
        for (const auto& g : n->grad)
            if (!g.empty()) {
                any = true;
                break;
            }
        if (any) n->back(*n);
    }
}

// ----- plain engine -----

template <typename T>
struct PlainEngine {
    using V = Tensor<T>;
    using Scalar = T;
    static constexpr bool kIsTape = false;

    const Tensor<T>& value(const V& v) const { return v; }
    V input(Tensor<T> t) { return t; }
    V param(const ParamStore<T>& ps, const std::string& name) { return ps.value(name); }

    V add(const V& a, const V& b) { return ew_add(a, b); }
    V sub(const V& a, const V& b) { return ew_sub(a, b); }
    V mul(const V& a, const V& b) { return ew_mul(a, b); }
    V scale(const V& a, T s) { return ew_scale(a, s); }
    V scale_by(const V& x, const V& s) { return ew_scale(x, s[0]); }
    V gelu(const V& x) { return ew_map(x, [](T v) { return gelu_s(v); }); }
    V silu(const V& x) { return ew_map(x, [](T v) { return silu_s(v); }); }
    V softplus(const V& x) { return ew_map(x, [](T v) { return softplus_s(v); }); }
    V neg_exp(const V& x) { return ew_map(x, [](T v) { return -std::exp(v); }); }
    V conv2d(const V& x, const V& w, const V& b, int stride = 1, int groups = 1) {
        return conv2d_fwd(x, w, b, stride, groups);
    }
    V linear(const V& x, const V& w, const V& b) { return linear_fwd(x, w, b); }
    V linear_nb(const V& x, const V& w) { return linear_fwd(x, w, Tensor<T>()); }
    V layer_norm(const V& x, const V& g, const V& s, T eps) { return layer_norm_fwd(x, g, s, eps); }
    V reshape(const V& x, std::vector<int> dims) { return x.reshaped(std::move(dims)); }
    V concat_ch(const V& a, const V& b) { return concat_channels(a, b); }
    V pixel_unshuffle(const V& x) { return pixel_unshuffle2(x); }
    V pixel_shuffle(const V& x) { return pixel_shuffle2(x); }
    V area_down(const V& x, int f) { return area_downsample(x, f); }

    std::array<V, 3> split3(const V& x, int c) {
        auto [a, rest] = split_channels(x, c);
        auto [b, d] = split_channels(rest, c);
        return {std::move(a), std::move(b), std::move(d)};
    }

    std::array<V, 4> dwt(const V& x) {
        auto b = dwt2d(x);
        return {std::move(b.ll), std::move(b.lh), std::move(b.hl), std::move(b.hh)};
    }
    V iwt(const V& ll, const V& lh, const V& hl, const V& hh) {
        WaveletBands<T> b{ll, lh, hl, hh};
        return iwt2d(b);
    }
    std::pair<V, V> fft_polar(const V& x) {
        auto s = fft2d_polar(x);
        return {std::move(s.amplitude), std::move(s.phase)};
    }
    V ifft_polar(const V& amp, const V& ph) {
        PolarSpectrum<T> s{amp, ph};
        return ifft2d_polar(s);
    }
    V selective_core(const V& u, const V& delta, const V& bs, const V& cs, const V& a, const V& d) {
        return selective_core_fwd(u, delta, bs, cs, a, d);
    }

    V mse_mean(const V& a, const V& b) {
        check_same_shape(a, b, "mse_mean");
        T acc = T(0);
        for (long long i = 0; i < a.numel(); ++i) {
            T di = a[i] - b[i];
            acc += di * di;
        }
        return Tensor<T>({1}, acc / static_cast<T>(a.numel()));
    }
    V sqrt_plus(const V& x, T c) { return Tensor<T>({1}, std::sqrt(x[0] + c)); }
    V sum_all(const V& x) {
        T acc = T(0);
        for (long long i = 0; i < x.numel(); ++i) acc += x[i];
        return Tensor<T>({1}, acc);
    }
    V mean_all(const V& x) {
        return Tensor<T>({1}, sum_all(x)[0] / static_cast<T>(x.numel()));
    }
};

// ----- tape engine -----

template <typename T>
struct TapeEngine {
    using V = Var<T>;
    using Scalar = T;
    static constexpr bool kIsTape = true;

    std::map<std::string, V> bound;  // parameter leaves by name

    const Tensor<T>& value(const V& v) const { return v.value(); }

    static V leaf(Tensor<T> t, bool needs) {
        auto n = std::make_shared<Node<T>>();
        n->out.push_back(std::move(t));
        n->grad.emplace_back();
        n->needs_grad = needs;
        n->tag = "leaf";
        return V{std::move(n), 0};
    }

    V input(Tensor<T> t) { return leaf(std::move(t), false); }

    V param(const ParamStore<T>& ps, const std::string& name) {
        auto it = bound.find(name);
        if (it != bound.end()) return it->second;
        const auto& e = ps.entry(name);
        V v = leaf(e.value, e.trainable);
        v.node->tag = "param";
        bound.emplace(name, v);
        return v;
    }

    // Gradient of a bound parameter after backward(); zeros if untouched.
    Tensor<T> grad_of(const std::string& name) const {
        auto it = bound.find(name);
        if (it == bound.end()) throw ParamError("TapeEngine: parameter was never bound: " + name);
        const Tensor<T>& g = it->second.node->grad[0];
        if (g.empty()) return Tensor<T>(it->second.value().dims());
        return g;
    }

    static V make(const char* tag, std::vector<Tensor<T>> outs, std::vector<V> parents,
                  std::function<void(Node<T>&)> back) {
        auto n = std::make_shared<Node<T>>();
        n->out = std::move(outs);
        n->grad.resize(n->out.size());
        n->parents = std::move(parents);
        n->tag = tag;
        for (const auto& p : n->parents)
            if (p.needs_grad()) n->needs_grad = true;
        if (n->needs_grad) n->back = std::move(back);
        return V{std::move(n), 0};
    }

    V add(const V& a, const V& b) {
        return make("add", {ew_add(a.value(), b.value())}, {a, b}, [a, b](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) {
                accum_grad(a, *g);
                accum_grad(b, *g);
            }
        });
    }

    V sub(const V& a, const V& b) {
        return make("sub", {ew_sub(a.value(), b.value())}, {a, b}, [a, b](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) {
                accum_grad(a, *g);
                accum_grad(b, ew_scale(*g, T(-1)));
            }
        });
    }

    V mul(const V& a, const V& b) {
        return make("mul", {ew_mul(a.value(), b.value())}, {a, b}, [a, b](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) {
                accum_grad(a, ew_mul(*g, b.value()));
                accum_grad(b, ew_mul(*g, a.value()));
            }
        });
    }

    V scale(const V& a, T s) {
        return make("scale", {ew_scale(a.value(), s)}, {a}, [a, s](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) accum_grad(a, ew_scale(*g, s));
        });
    }

    // x * s where s is a scalar (shape {1}) variable.
    V scale_by(const V& x, const V& s) {
        return make("scale_by", {ew_scale(x.value(), s.value()[0])}, {x, s}, [x, s](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) {
                accum_grad(x, ew_scale(*g, s.value()[0]));
                T acc = T(0);
                const Tensor<T>& xv = x.value();
                for (long long i = 0; i < xv.numel(); ++i) acc += (*g)[i] * xv[i];
                accum_grad(s, Tensor<T>({1}, acc));
            }
        });
    }

    V gelu(const V& x) { return unary(x, "gelu", gelu_s<T>, gelu_grad_s<T>); }
    V silu(const V& x) { return unary(x, "silu", silu_s<T>, silu_grad_s<T>); }
    V softplus(const V& x) { return unary(x, "softplus", softplus_s<T>, softplus_grad_s<T>); }

    V neg_exp(const V& x) {
        return unary(x, "neg_exp", [](T v) { return -std::exp(v); },
                     [](T v) { return -std::exp(v); });
    }

    V conv2d(const V& x, const V& w, const V& b, int stride = 1, int groups = 1) {
        return make("conv2d", {conv2d_fwd(x.value(), w.value(), b.value(), stride, groups)},
                    {x, w, b}, [x, w, b, stride, groups](Node<T>& n) {
                        auto* g = grad_of_slot(n, 0);
                        if (!g) return;
                        if (x.needs_grad())
                            accum_grad(x, conv2d_bwd_input(*g, w.value(), x.value().dims(), stride,
                                                           groups));
                        if (w.needs_grad() || b.needs_grad()) {
                            auto [gw, gb] =
                                conv2d_bwd_params(*g, x.value(), w.value().dims(), stride, groups);
                            accum_grad(w, gw);
                            accum_grad(b, gb);
                        }
                    });
    }

    V linear(const V& x, const V& w, const V& b) { return linear_impl(x, w, b, true); }
    V linear_nb(const V& x, const V& w) { return linear_impl(x, w, V{}, false); }

    V layer_norm(const V& x, const V& g, const V& s, T eps) {
        return make("layer_norm", {layer_norm_fwd(x.value(), g.value(), s.value(), eps)}, {x, g, s},
                    [x, g, s, eps](Node<T>& n) {
                        auto* go = grad_of_slot(n, 0);
                        if (!go) return;
                        auto [gx, gg, gs] = layer_norm_bwd(*go, x.value(), g.value(), eps);
                        accum_grad(x, gx);
                        accum_grad(g, gg);
                        accum_grad(s, gs);
                    });
    }

    V reshape(const V& x, std::vector<int> dims) {
        std::vector<int> xdims = x.value().dims();
        return make("reshape", {x.value().reshaped(std::move(dims))}, {x}, [x, xdims](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) accum_grad(x, g->reshaped(xdims));
        });
    }

    V concat_ch(const V& a, const V& b) {
        int ca = a.value().dim(2);
        return make("concat_ch", {concat_channels(a.value(), b.value())}, {a, b},
                    [a, b, ca](Node<T>& n) {
                        if (auto* g = grad_of_slot(n, 0)) {
                            auto [ga, gb] = split_channels(*g, ca);
                            accum_grad(a, ga);
                            accum_grad(b, gb);
                        }
                    });
    }

    V pixel_unshuffle(const V& x) {
        return make("pixel_unshuffle", {pixel_unshuffle2(x.value())}, {x}, [x](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) accum_grad(x, pixel_shuffle2(*g));
        });
    }

    V pixel_shuffle(const V& x) {
        return make("pixel_shuffle", {pixel_shuffle2(x.value())}, {x}, [x](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0)) accum_grad(x, pixel_unshuffle2(*g));
        });
    }

    std::array<V, 3> split3(const V& x, int c) {
        auto [a, rest] = split_channels(x.value(), c);
        auto [b, d] = split_channels(rest, c);
        V first = make("split3", {std::move(a), std::move(b), std::move(d)}, {x}, [x, c](Node<T>& n) {
            std::vector<int> pd = n.out[0].dims();
            auto pick = [&](int i) {
                auto* g = grad_of_slot(n, i);
                return g ? *g : Tensor<T>(pd);
            };
            accum_grad(x, concat_channels(concat_channels(pick(0), pick(1)), pick(2)));
        });
        return {first, V{first.node, 1}, V{first.node, 2}};
    }

    V area_down(const V& x, int f) {
        return make("area_down", {area_downsample(x.value(), f)}, {x}, [x, f](Node<T>& n) {
            auto* g = grad_of_slot(n, 0);
            if (!g) return;
            Tensor<T> gx(x.value().dims());
            const int h = gx.dim(0), w = gx.dim(1), c = gx.dim(2);
            const T inv = T(1) / static_cast<T>(f * f);
            for (int y = 0; y < h; ++y)
                for (int x2 = 0; x2 < w; ++x2) {
                    const T* src = &g->at3(y / f, x2 / f, 0);
                    T* dst = &gx.at3(y, x2, 0);
                    for (int i = 0; i < c; ++i) dst[i] = src[i] * inv;
                }
            accum_grad(x, gx);
        });
    }

    // Orthonormal transform: the adjoint of the analysis step is the
    // synthesis step and vice versa.
    std::array<V, 4> dwt(const V& x) {
        auto bands = dwt2d(x.value());
        V first = make("dwt", {std::move(bands.ll), std::move(bands.lh), std::move(bands.hl),
                               std::move(bands.hh)},
                       {x}, [x](Node<T>& n) {
                           std::vector<int> bd = n.out[0].dims();
                           auto pick = [&](int i) {
                               auto* g = grad_of_slot(n, i);
                               return g ? *g : Tensor<T>(bd);
                           };
                           WaveletBands<T> gb{pick(0), pick(1), pick(2), pick(3)};
                           accum_grad(x, iwt2d(gb));
                       });
        return {first, V{first.node, 1}, V{first.node, 2}, V{first.node, 3}};
    }

    V iwt(const V& ll, const V& lh, const V& hl, const V& hh) {
        WaveletBands<T> b{ll.value(), lh.value(), hl.value(), hh.value()};
        return make("iwt", {iwt2d(b)}, {ll, lh, hl, hh}, [ll, lh, hl, hh](Node<T>& n) {
            auto* g = grad_of_slot(n, 0);
            if (!g) return;
            auto gb = dwt2d(*g);
            accum_grad(ll, gb.ll);
            accum_grad(lh, gb.lh);
            accum_grad(hl, gb.hl);
            accum_grad(hh, gb.hh);
        });
    }

    // x -> (amplitude, phase). The transform is linear; amplitude/phase are
    // a polar read-out. At near-zero amplitude the phase has no stable
    // derivative, so that contribution is dropped there.
    std::pair<V, V> fft_polar(const V& x) {
        auto s = fft2d_polar(x.value());
        V amp = make("fft_polar", {std::move(s.amplitude), std::move(s.phase)}, {x},
                     [x](Node<T>& n) {
                         const Tensor<T>* ga = grad_of_slot(n, 0);
                         const Tensor<T>* gp = grad_of_slot(n, 1);
                         if (!ga && !gp) return;
                         const Tensor<T>& amp_v = n.out[0];
                         const Tensor<T>& ph_v = n.out[1];
                         Tensor<T> gre(amp_v.dims()), gim(amp_v.dims());
                         for (long long i = 0; i < amp_v.numel(); ++i) {
                             T c = std::cos(ph_v[i]), sn = std::sin(ph_v[i]);
                             T gav = ga ? (*ga)[i] : T(0);
                             T gpv = gp ? (*gp)[i] : T(0);
                             T re = gav * c, im = gav * sn;
                             if (amp_v[i] > T(1e-12)) {
                                 re -= gpv * sn / amp_v[i];
                                 im += gpv * c / amp_v[i];
                             }
                             gre[i] = re;
                             gim[i] = im;
                         }
                         // adjoint of the unitary forward transform restricted
                         // to real inputs: real part of the unitary inverse
                         fft2d_unitary_channels(gre, gim, true);
                         accum_grad(x, gre);
                     });
        return {amp, V{amp.node, 1}};
    }

    V ifft_polar(const V& amp, const V& ph) {
        PolarSpectrum<T> s{amp.value(), ph.value()};
        return make("ifft_polar", {ifft2d_polar(s)}, {amp, ph}, [amp, ph](Node<T>& n) {
            auto* g = grad_of_slot(n, 0);
            if (!g) return;
            // adjoint of Re(unitary inverse): forward transform of the grad
            Tensor<T> gre = *g;
            Tensor<T> gim(g->dims());
            fft2d_unitary_channels(gre, gim, false);
            const Tensor<T>& av = amp.value();
            const Tensor<T>& pv = ph.value();
            Tensor<T> gamp(av.dims()), gph(av.dims());
            for (long long i = 0; i < av.numel(); ++i) {
                T c = std::cos(pv[i]), sn = std::sin(pv[i]);
                gamp[i] = gre[i] * c + gim[i] * sn;
                gph[i] = av[i] * (gim[i] * c - gre[i] * sn);
            }
            accum_grad(amp, gamp);
            accum_grad(ph, gph);
        });
    }

    V selective_core(const V& u, const V& delta, const V& bs, const V& cs, const V& a, const V& d) {
        auto cache = std::make_shared<SelectiveCache<T>>();
        Tensor<T> y = selective_core_fwd(u.value(), delta.value(), bs.value(), cs.value(), a.value(),
                                         d.value(), cache.get());
        return make("selective_core", {std::move(y)}, {u, delta, bs, cs, a, d},
                    [u, delta, bs, cs, a, d, cache](Node<T>& n) {
                        auto* g = grad_of_slot(n, 0);
                        if (!g) return;
                        auto grads = selective_core_bwd(*g, u.value(), delta.value(), bs.value(),
                                                        cs.value(), a.value(), d.value(), *cache);
                        accum_grad(u, grads.u);
                        accum_grad(delta, grads.delta);
                        accum_grad(bs, grads.bseq);
                        accum_grad(cs, grads.cseq);
                        accum_grad(a, grads.a);
                        accum_grad(d, grads.d_skip);
                    });
    }

    V mse_mean(const V& a, const V& b) {
        check_same_shape(a.value(), b.value(), "mse_mean");
        T acc = T(0);
        const Tensor<T>& av = a.value();
        const Tensor<T>& bv = b.value();
        for (long long i = 0; i < av.numel(); ++i) {
            T d = av[i] - bv[i];
            acc += d * d;
        }
        return make("mse_mean", {Tensor<T>({1}, acc / static_cast<T>(av.numel()))}, {a, b},
                    [a, b](Node<T>& n) {
                        auto* g = grad_of_slot(n, 0);
                        if (!g) return;
                        const Tensor<T>& av = a.value();
                        const Tensor<T>& bv = b.value();
                        T s = (*g)[0] * T(2) / static_cast<T>(av.numel());
                        Tensor<T> ga(av.dims());
                        for (long long i = 0; i < av.numel(); ++i) ga[i] = s * (av[i] - bv[i]);
                        if (b.needs_grad()) accum_grad(b, ew_scale(ga, T(-1)));
                        accum_grad(a, ga);
                    });
    }

    V sqrt_plus(const V& x, T c) {
        T out = std::sqrt(x.value()[0] + c);
        return make("sqrt_plus", {Tensor<T>({1}, out)}, {x}, [x, out](Node<T>& n) {
            auto* g = grad_of_slot(n, 0);
            if (!g) return;
            T denom = std::max(out, T(1e-12));
            accum_grad(x, Tensor<T>({1}, (*g)[0] / (T(2) * denom)));
        });
    }

    V sum_all(const V& x) {
        T acc = T(0);
        for (long long i = 0; i < x.value().numel(); ++i) acc += x.value()[i];
        return make("sum_all", {Tensor<T>({1}, acc)}, {x}, [x](Node<T>& n) {
            if (auto* g = grad_of_slot(n, 0))
                accum_grad(x, Tensor<T>::full(x.value().dims(), (*g)[0]));
        });
    }

    V mean_all(const V& x) {
        T inv = T(1) / static_cast<T>(x.value().numel());
        return scale(sum_all(x), inv);
    }

private:
    template <typename F, typename G>
    V unary(const V& x, const char* tag, F f, G df) {
        return make(tag, {ew_map(x.value(), f)}, {x}, [x, df](Node<T>& n) {
            auto* g = grad_of_slot(n, 0);
            if (!g) return;
            Tensor<T> gx(x.value().dims());
            const Tensor<T>& xv = x.value();
            for (long long i = 0; i < xv.numel(); ++i) gx[i] = (*g)[i] * df(xv[i]);
            accum_grad(x, gx);
        });
    }

    V linear_impl(const V& x, const V& w, const V& b, bool has_bias) {
        Tensor<T> out = linear_fwd(x.value(), w.value(), has_bias ? b.value() : Tensor<T>());
        std::vector<V> parents = {x, w};
        if (has_bias) parents.push_back(b);
        return make("linear", {std::move(out)}, std::move(parents),
                    [x, w, b, has_bias](Node<T>& n) {
                        auto* g = grad_of_slot(n, 0);
                        if (!g) return;
                        auto [gx, gw, gb] = linear_bwd(*g, x.value(), w.value(), has_bias);
                        accum_grad(x, gx);
                        accum_grad(w, gw);
                        if (has_bias) accum_grad(b, gb);
                    });
    }
};

}  // namespace lfe
