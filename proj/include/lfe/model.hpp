#pragma once

#include <fstream>
#include <sstream>

#include "lfe/blocks.hpp"

// The full enhancement network. Stem (two-way 1x1 + 3x3 conv), a
// three-level wavelet-mamba encoder with downsampling, a six-block Fourier
// latent with sequential skip wiring
//   y0 = F(a2), y_i = F(y_{i-1}) i=1..3, y4 = F(fuse(y1,y3)),
//   y5 = F(fuse(y0,y4)),
// a mirrored decoder with learnable scalar fusion weights, and a 3x3 head
// with a global input residual.

namespace lfe {

struct ModelConfig {
    int base_width = 16;                 // C
    std::array<int, 3> encoder_depths = {2, 3, 4};
    int latent_ffabs = 6;
    int ssm_state = 16;                  // N
    double lambda = 0.1;                 // aux loss weight
    double epsilon_charbonnier = 1e-3;
    double ln_eps = 1e-6;

    void validate() const {
        if (base_width <= 0 || ssm_state <= 0) throw ParamError("config: widths must be positive");
        if (latent_ffabs != 6) throw ParamError("config: latent_ffabs is fixed at 6");
        for (int d : encoder_depths)
            if (d <= 0) throw ParamError("config: encoder depths must be positive");
    }
};

// ----- registration -----

template <typename T>
ParamStore<T> register_model_params(const ModelConfig& cfg, uint64_t seed, bool zero_head = true) {
    cfg.validate();
    ParamStore<T> ps;
    Rng rng(seed);
    const int c = cfg.base_width, n = cfg.ssm_state;

    register_conv(ps, "stem.conv1", 1, 3, c, rng);
    register_conv(ps, "stem.conv3", 3, 3, c, rng);

    const int widths[3] = {c, 2 * c, 4 * c};
    for (int lvl = 0; lvl < 3; ++lvl) {
        std::string p = "enc" + std::to_string(lvl);
        for (int i = 0; i < cfg.encoder_depths[static_cast<size_t>(lvl)]; ++i)
            register_wmb(ps, p + ".wmb" + std::to_string(i), widths[lvl], n, rng);
        if (lvl < 2) register_conv(ps, p + ".down", 1, 4 * widths[lvl], 2 * widths[lvl], rng);
    }

    for (int i = 0; i < cfg.latent_ffabs; ++i)
        register_ffab(ps, "lat.ffab" + std::to_string(i), 4 * c, rng);
    register_conv(ps, "lat.fuse0", 1, 8 * c, 4 * c, rng);
    register_conv(ps, "lat.fuse1", 1, 8 * c, 4 * c, rng);

    for (int lvl = 2; lvl >= 0; --lvl) {
        std::string p = "dec" + std::to_string(lvl);
        for (int i = 0; i < cfg.encoder_depths[static_cast<size_t>(lvl)]; ++i)
            register_wmb(ps, p + ".wmb" + std::to_string(i), widths[lvl], n, rng);
        if (lvl > 0) register_conv(ps, p + ".up", 1, widths[lvl], 2 * widths[lvl], rng);
    }

    ps.add("omega1", Tensor<T>::full({1}, T(1)));
    ps.add("omega2", Tensor<T>::full({1}, T(1)));

    register_conv(ps, "head", 3, c, 3, rng);
    if (zero_head) {
        ps.value("head.w").fill(T(0));
        ps.value("head.b").fill(T(0));
    }
    // projections feeding the wavelet and phase losses
    register_conv(ps, "aux.ll_proj", 1, c, 3, rng, T(0.2));
    register_conv(ps, "aux.lat_proj", 1, 4 * c, 3, rng, T(0.2));
    return ps;
}

// ----- bound weights -----

template <typename V>
struct ModelWeights {
    V stem1_w, stem1_b, stem3_w, stem3_b;
    std::array<std::vector<WMBWeights<V>>, 3> enc;
    V down0_w, down0_b, down1_w, down1_b;
    std::vector<FFABWeights<V>> ffabs;
    V fuse0_w, fuse0_b, fuse1_w, fuse1_b;
    std::array<std::vector<WMBWeights<V>>, 3> dec;  // index = level
    V up2_w, up2_b, up1_w, up1_b;
    V omega1, omega2;
    V head_w, head_b;
    V llproj_w, llproj_b, latproj_w, latproj_b;
};

template <class E, typename T>
ModelWeights<typename E::V> bind_model(E& eng, const ParamStore<T>& ps, const ModelConfig& cfg) {
    ModelWeights<typename E::V> w;
    w.stem1_w = eng.param(ps, "stem.conv1.w");
    w.stem1_b = eng.param(ps, "stem.conv1.b");
    w.stem3_w = eng.param(ps, "stem.conv3.w");
    w.stem3_b = eng.param(ps, "stem.conv3.b");
    for (int lvl = 0; lvl < 3; ++lvl) {
        std::string pe = "enc" + std::to_string(lvl);
        std::string pd = "dec" + std::to_string(lvl);
        for (int i = 0; i < cfg.encoder_depths[static_cast<size_t>(lvl)]; ++i) {
            w.enc[static_cast<size_t>(lvl)].push_back(bind_wmb(eng, ps, pe + ".wmb" + std::to_string(i)));
            w.dec[static_cast<size_t>(lvl)].push_back(bind_wmb(eng, ps, pd + ".wmb" + std::to_string(i)));
        }
    }
    w.down0_w = eng.param(ps, "enc0.down.w");
    w.down0_b = eng.param(ps, "enc0.down.b");
    w.down1_w = eng.param(ps, "enc1.down.w");
    w.down1_b = eng.param(ps, "enc1.down.b");
    for (int i = 0; i < cfg.latent_ffabs; ++i)
        w.ffabs.push_back(bind_ffab(eng, ps, "lat.ffab" + std::to_string(i)));
    w.fuse0_w = eng.param(ps, "lat.fuse0.w");
    w.fuse0_b = eng.param(ps, "lat.fuse0.b");
    w.fuse1_w = eng.param(ps, "lat.fuse1.w");
    w.fuse1_b = eng.param(ps, "lat.fuse1.b");
    w.up2_w = eng.param(ps, "dec2.up.w");
    w.up2_b = eng.param(ps, "dec2.up.b");
    w.up1_w = eng.param(ps, "dec1.up.w");
    w.up1_b = eng.param(ps, "dec1.up.b");
    w.omega1 = eng.param(ps, "omega1");
    w.omega2 = eng.param(ps, "omega2");
    w.head_w = eng.param(ps, "head.w");
    w.head_b = eng.param(ps, "head.b");
    w.llproj_w = eng.param(ps, "aux.ll_proj.w");
    w.llproj_b = eng.param(ps, "aux.ll_proj.b");
    w.latproj_w = eng.param(ps, "aux.lat_proj.w");
    w.latproj_b = eng.param(ps, "aux.lat_proj.b");
    return w;
}

// ----- forward -----

template <typename V>
struct ModelOutputs {
    V enhanced;    // (H, W, 3)
    V ll_pred;     // (H/2, W/2, 3): projected low band of the last decoder WMB
    V latent_out;  // (H/4, W/4, 3): projected latent output y5
};

// Optional per-stage L2-norm trace for numeric diagnostics.
template <typename T>
using StageTrace = std::vector<std::pair<std::string, T>>;

template <class E>
ModelOutputs<typename E::V> model_forward(E& eng, const typename E::V& image,
                                          const ModelWeights<typename E::V>& w,
                                          const ModelConfig& cfg,
                                          StageTrace<typename E::Scalar>* trace = nullptr) {
    using T = typename E::Scalar;
    const Tensor<T>& img = eng.value(image);
    if (img.rank() != 3 || img.dim(2) != 3) throw ShapeError("model: input must be (H,W,3)");
    const int h = img.dim(0), wd = img.dim(1);
    if (h % 8 != 0 || wd % 8 != 0)
        throw ShapeError("model: H and W must be divisible by 8 (pad the input first); got " +
                         img.shape_str());
    const T eps = static_cast<T>(cfg.ln_eps);

    auto stage = [&](const char* name, const typename E::V& v) {
        const Tensor<T>& t = eng.value(v);
        if (trace) trace->emplace_back(name, std::sqrt(sum_squares(t) / static_cast<T>(t.numel())));
        if (!all_finite(t)) throw NumericError(std::string("model forward: non-finite values at stage ") + name);
    };

    // stem: two-way convolution, double receptive field
    auto f0 = eng.add(eng.conv2d(image, w.stem1_w, w.stem1_b),
                      eng.conv2d(image, w.stem3_w, w.stem3_b));
    stage("stem", f0);

    // encoder
    auto x = f0;
    std::array<typename E::V, 3> alpha;
    for (int lvl = 0; lvl < 3; ++lvl) {
        for (const auto& wmb : w.enc[static_cast<size_t>(lvl)])
            x = wmb_forward(eng, x, wmb, eps).first;
        alpha[static_cast<size_t>(lvl)] = x;
        stage(("enc" + std::to_string(lvl)).c_str(), x);
        if (lvl == 0) x = eng.conv2d(eng.pixel_unshuffle(x), w.down0_w, w.down0_b);
        if (lvl == 1) x = eng.conv2d(eng.pixel_unshuffle(x), w.down1_w, w.down1_b);
    }

    // latent: sequential skips with 1x1 fusion after each concat
    auto y0 = ffab_forward(eng, alpha[2], w.ffabs[0]);
    auto y1 = ffab_forward(eng, y0, w.ffabs[1]);
    auto y2 = ffab_forward(eng, y1, w.ffabs[2]);
    auto y3 = ffab_forward(eng, y2, w.ffabs[3]);
    auto y4 = ffab_forward(eng, eng.conv2d(eng.concat_ch(y1, y3), w.fuse0_w, w.fuse0_b), w.ffabs[4]);
    auto y5 = ffab_forward(eng, eng.conv2d(eng.concat_ch(y0, y4), w.fuse1_w, w.fuse1_b), w.ffabs[5]);
    stage("latent", y5);

    // decoder with omega-weighted encoder fusion
    x = y5;
    typename E::V ll_last;
    for (int lvl = 2; lvl >= 0; --lvl) {
        for (size_t i = 0; i < w.dec[static_cast<size_t>(lvl)].size(); ++i) {
            bool last_wmb = (lvl == 0 && i + 1 == w.dec[0].size());
            auto [out, ll] = wmb_forward(eng, x, w.dec[static_cast<size_t>(lvl)][i], eps);
            x = out;
            if (last_wmb) ll_last = ll;
        }
        stage(("dec" + std::to_string(lvl)).c_str(), x);
        if (lvl == 2) {
            x = eng.pixel_shuffle(eng.conv2d(x, w.up2_w, w.up2_b));
            x = eng.add(x, eng.scale_by(alpha[1], w.omega1));
        } else if (lvl == 1) {
            x = eng.pixel_shuffle(eng.conv2d(x, w.up1_w, w.up1_b));
            x = eng.add(x, eng.scale_by(alpha[0], w.omega2));
        }
    }

    ModelOutputs<typename E::V> outs;
    outs.enhanced = eng.add(eng.conv2d(x, w.head_w, w.head_b), image);  // global residual
    outs.ll_pred = eng.conv2d(ll_last, w.llproj_w, w.llproj_b);
    outs.latent_out = eng.conv2d(y5, w.latproj_w, w.latproj_b);
    stage("head", outs.enhanced);
    return outs;
}

// ----- losses -----
// l_c  = sqrt(mean((I_e - G)^2) + eps^2)            (Charbonnier)
// l_w  = rms(ll_pred - LL(G))                        (wavelet low band)
// l_f  = rms(phase(latent_out) - phase(down4(G)))    (Fourier phase)
// l_total = l_c + lambda (l_w + l_f)

template <typename V>
struct LossVars {
    V total, lc, lw, lf;
};

template <class E>
LossVars<typename E::V> compute_losses(E& eng, const ModelOutputs<typename E::V>& outs,
                                       const typename E::V& ground_truth, const ModelConfig& cfg) {
    using T = typename E::Scalar;
    const Tensor<T>& g = eng.value(ground_truth);
    const Tensor<T>& e = eng.value(outs.enhanced);
    if (!g.same_shape(e)) throw ShapeError("losses: prediction/ground-truth shape mismatch");
    T epsc = static_cast<T>(cfg.epsilon_charbonnier);

    LossVars<typename E::V> l;
    l.lc = eng.sqrt_plus(eng.mse_mean(outs.enhanced, ground_truth), epsc * epsc);

    auto gll = eng.dwt(ground_truth)[0];
    check_same_shape(eng.value(outs.ll_pred), eng.value(gll), "losses: ll_pred");
    l.lw = eng.sqrt_plus(eng.mse_mean(outs.ll_pred, gll), T(0));

    auto gdown = eng.area_down(ground_truth, g.dim(0) / eng.value(outs.latent_out).dim(0));
    check_same_shape(eng.value(outs.latent_out), eng.value(gdown), "losses: latent_out");
    auto lat_phase = eng.fft_polar(outs.latent_out).second;
    auto g_phase = eng.fft_polar(gdown).second;
    l.lf = eng.sqrt_plus(eng.mse_mean(lat_phase, g_phase), T(0));

    l.total = eng.add(l.lc, eng.scale(eng.add(l.lw, l.lf), static_cast<T>(cfg.lambda)));
    return l;
}

template <typename T>
struct LossValues {
    T total = 0, lc = 0, lw = 0, lf = 0;
};

// Plain-path loss evaluation for reporting.
template <typename T>
LossValues<T> compute_loss_values(const Tensor<T>& enhanced, const Tensor<T>& ll_pred,
                                  const Tensor<T>& latent_out, const Tensor<T>& ground_truth,
                                  const ModelConfig& cfg) {
    PlainEngine<T> eng;
    ModelOutputs<Tensor<T>> outs{enhanced, ll_pred, latent_out};
    auto l = compute_losses(eng, outs, ground_truth, cfg);
    return {l.total[0], l.lc[0], l.lw[0], l.lf[0]};
}

// ----- optimization -----

template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m, v;
    long long t = 0;
    T beta1 = T(0.9), beta2 = T(0.999), eps = T(1e-8);
};

// Cosine annealing from lr0 to lr_min over total steps.
template <typename T>
T cosine_lr(T lr0, T lr_min, long long step, long long total_steps) {
    if (lr_min > lr0) lr_min = lr0;
    if (total_steps <= 1) return lr0;
    double p = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    if (p > 1.0) p = 1.0;
    return static_cast<T>(lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(kPi * p)));
}

template <typename T>
void adam_update(ParamStore<T>& ps, const std::map<std::string, Tensor<T>>& grads, AdamState<T>& st,
                 T lr) {
    ++st.t;
    T bc1 = T(1) - std::pow(st.beta1, static_cast<T>(st.t));
    T bc2 = T(1) - std::pow(st.beta2, static_cast<T>(st.t));
    for (auto& [name, e] : ps) {
        if (!e.trainable) continue;
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        const Tensor<T>& g = git->second;
        Tensor<T>& m = st.m.try_emplace(name, Tensor<T>(e.value.dims())).first->second;
        Tensor<T>& v = st.v.try_emplace(name, Tensor<T>(e.value.dims())).first->second;
        for (long long i = 0; i < g.numel(); ++i) {
            m[i] = st.beta1 * m[i] + (T(1) - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (T(1) - st.beta2) * g[i] * g[i];
            T mhat = m[i] / bc1;
            T vhat = v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

template <typename T>
std::string diagnose_stages(const ParamStore<T>& ps, const Tensor<T>& low, const ModelConfig& cfg);

// One optimization step on a batch: per-pair tape forward/backward with
// gradient accumulation (mean over the batch), then a single Adam update.
template <typename T>
LossValues<T> train_step(ParamStore<T>& ps, const std::vector<std::pair<Tensor<T>, Tensor<T>>>& batch,
                         AdamState<T>& adam, const ModelConfig& cfg, T lr) {
    if (batch.empty()) throw InputError("train_step: empty batch");
    std::map<std::string, Tensor<T>> grads;
    LossValues<T> rec;
    const T inv_b = T(1) / static_cast<T>(batch.size());
    for (const auto& [low, high] : batch) {
        TapeEngine<T> eng;
        auto w = bind_model(eng, ps, cfg);
        auto img = eng.input(low);
        auto gt = eng.input(high);
        ModelOutputs<Var<T>> outs;
        try {
            outs = model_forward(eng, img, w, cfg);
        } catch (const NumericError& err) {
            // re-run on the plain path to collect per-stage norms for the abort diagnostic
            throw NumericError(std::string(err.what()) + diagnose_stages(ps, low, cfg));
        }
        auto l = compute_losses(eng, outs, gt, cfg);
        T lt = eng.value(l.total)[0];
        if (!std::isfinite(lt))
            throw NumericError("train_step: non-finite loss" + diagnose_stages(ps, low, cfg));
        rec.total += lt * inv_b;
        rec.lc += eng.value(l.lc)[0] * inv_b;
        rec.lw += eng.value(l.lw)[0] * inv_b;
        rec.lf += eng.value(l.lf)[0] * inv_b;
        backward(l.total);
        for (const auto& [name, var] : eng.bound) {
            if (!var.node->needs_grad) continue;
            Tensor<T> g = eng.grad_of(name);
            auto it = grads.find(name);
            if (it == grads.end())
                grads.emplace(name, ew_scale(g, inv_b));
            else
                ew_axpy(it->second, g, inv_b);
        }
    }
    adam_update(ps, grads, adam, lr);
    return rec;
}

template <typename T>
std::string diagnose_stages(const ParamStore<T>& ps, const Tensor<T>& low, const ModelConfig& cfg) {
    std::ostringstream os;
    os << "\nper-stage rms norms:";
    StageTrace<T> trace;
    std::string aborted;
    try {
        PlainEngine<T> eng;
        auto w = bind_model(eng, ps, cfg);
        model_forward(eng, eng.input(low), w, cfg, &trace);
    } catch (const std::exception& e) {
        aborted = e.what();
    }
    for (auto& [name, norm] : trace) os << "\n  " << name << ": " << norm;
    if (!aborted.empty()) os << "\n  (trace aborted: " << aborted << ")";
    return os.str();
}

template <typename T>
long long model_param_count(const ParamStore<T>& ps) {
    return ps.total_count();
}

// ----- config file (key = value lines, # comments) -----

struct TrainSettings {
    long long steps = 200;
    double lr = 8e-4;
    double lr_min = 1e-6;
    int batch_size = 1;
    int crop = 64;
    long long eval_every = 25;
    uint64_t seed = 7;
};

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline void parse_config_line(const std::string& key, const std::string& value, ModelConfig& mc,
                              TrainSettings& ts) {
    auto as_ll = [&](const std::string& v) { return std::stoll(v); };
    auto as_d = [&](const std::string& v) { return std::stod(v); };
    if (key == "base_width") mc.base_width = static_cast<int>(as_ll(value));
    else if (key == "encoder_depths") {
        std::istringstream is(value);
        std::string tok;
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(is, tok, ',')) throw InputError("config: encoder_depths needs 3 values");
            mc.encoder_depths[static_cast<size_t>(i)] = static_cast<int>(as_ll(trim(tok)));
        }
    } else if (key == "latent_ffabs") mc.latent_ffabs = static_cast<int>(as_ll(value));
    else if (key == "ssm_state") mc.ssm_state = static_cast<int>(as_ll(value));
    else if (key == "lambda") mc.lambda = as_d(value);
    else if (key == "epsilon_charbonnier") mc.epsilon_charbonnier = as_d(value);
    else if (key == "ln_eps") mc.ln_eps = as_d(value);
    else if (key == "steps") ts.steps = as_ll(value);
    else if (key == "lr") ts.lr = as_d(value);
    else if (key == "lr_min") ts.lr_min = as_d(value);
    else if (key == "batch_size") ts.batch_size = static_cast<int>(as_ll(value));
    else if (key == "crop") ts.crop = static_cast<int>(as_ll(value));
    else if (key == "eval_every") ts.eval_every = as_ll(value);
    else if (key == "seed") ts.seed = static_cast<uint64_t>(as_ll(value));
    else if (key == "format_version") {
        if (as_ll(value) != 1) throw VersionError("config: unsupported format_version " + value);
    } else throw InputError("config: unknown key: " + key);
}

inline void parse_config_text(std::istream& in, ModelConfig& mc, TrainSettings& ts) {
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw InputError("config: expected 'key = value', got: " + line);
        parse_config_line(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), mc, ts);
    }
}

inline void load_config_file(const std::string& path, ModelConfig& mc, TrainSettings& ts) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open: " + path);
    parse_config_text(f, mc, ts);
}

inline std::string serialize_config(const ModelConfig& mc, const TrainSettings& ts) {
    std::ostringstream os;
    os.precision(17);
    os << "format_version = 1\n";
    os << "base_width = " << mc.base_width << "\n";
    os << "encoder_depths = " << mc.encoder_depths[0] << "," << mc.encoder_depths[1] << ","
       << mc.encoder_depths[2] << "\n";
    os << "latent_ffabs = " << mc.latent_ffabs << "\n";
    os << "ssm_state = " << mc.ssm_state << "\n";
    os << "lambda = " << mc.lambda << "\n";
    os << "epsilon_charbonnier = " << mc.epsilon_charbonnier << "\n";
    os << "ln_eps = " << mc.ln_eps << "\n";
    os << "steps = " << ts.steps << "\n";
    os << "lr = " << ts.lr << "\n";
    os << "lr_min = " << ts.lr_min << "\n";
    os << "batch_size = " << ts.batch_size << "\n";
    os << "crop = " << ts.crop << "\n";
    os << "eval_every = " << ts.eval_every << "\n";
    os << "seed = " << ts.seed << "\n";
    return os.str();
}

}  // namespace lfe
