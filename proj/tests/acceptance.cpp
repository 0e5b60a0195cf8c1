// Acceptance suite: runs every criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit code is the number of failures.

#include <chrono>
#include <complex>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "lfe/cli.hpp"
#include "lfe/grad_check.hpp"
#include "lfe/metrics.hpp"
#include "lfe/model.hpp"
#include "lfe/trainer.hpp"

using namespace lfe;

namespace {

int g_failures = 0;

class Criterion {
public:
    Criterion(int id, const std::string& name)
        : id_(id), name_(name), start_(std::chrono::steady_clock::now()) {}

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ok_ = false;
            detail_ += (detail_.empty() ? "" : "; ") + what;
        }
    }

    template <typename T>
    void expect_le(T value, T bound, const std::string& what) {
        std::ostringstream os;
        os << what << " = " << std::setprecision(6) << value << " (bound " << bound << ")";
        expect(value <= bound, os.str());
    }

    void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }

    ~Criterion() {
        auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::cout << (ok_ ? "PASS" : "FAIL") << " [" << id_ << "] " << name_ << " (" << std::fixed
                  << std::setprecision(1) << secs << "s)";
        if (!notes_.empty()) std::cout << " -- " << notes_;
        if (!ok_) {
            std::cout << " -- " << detail_;
            ++g_failures;
        }
        std::cout << "\n" << std::defaultfloat;
    }

private:
    int id_;
    std::string name_;
    bool ok_ = true;
    std::string detail_, notes_;
    std::chrono::steady_clock::time_point start_;
};

std::string data_path(const std::string& rel) { return std::string(LFE_DATA_DIR) + "/" + rel; }

void criterion_1_wavelet() {
    Criterion c(1, "wavelet exactness: 1000 random round trips and energy conservation");
    Rng rng(9001);
    double worst_rt = 0, worst_energy = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int h = 2 * rng.uniform_int(1, 16);
        int w = 2 * rng.uniform_int(1, 16);
        int ch = rng.uniform_int(1, 8);
        auto x = Tensor<double>::random_uniform({h, w, ch}, rng, -2.0, 2.0);
        auto bands = dwt2d(x);
        worst_rt = std::max(worst_rt, static_cast<double>(max_abs_diff(iwt2d(bands), x)));
        double ex = sum_squares(x);
        worst_energy = std::max(worst_energy, std::abs(band_energy(bands) - ex) / ex);
    }
    c.expect_le(worst_rt, 1e-12, "max reconstruction error");
    c.expect_le(worst_energy, 1e-9, "max relative energy error");
}

void criterion_2_fourier() {
    Criterion c(2, "fourier exactness: unitary round trip, Parseval, direct DFT oracle <= 16");
    Rng rng(9002);
    double worst_rt = 0, worst_parseval = 0;
    for (int trial = 0; trial < 50; ++trial) {
        int h = rng.uniform_int(1, 24), w = rng.uniform_int(1, 24), ch = rng.uniform_int(1, 4);
        auto x = Tensor<double>::random_uniform({h, w, ch}, rng, -1.0, 1.0);
        auto s = fft2d_polar(x);
        worst_rt = std::max(worst_rt, static_cast<double>(max_abs_diff(ifft2d_polar(s), x)));
        double ex = sum_squares(x);
        worst_parseval = std::max(worst_parseval, std::abs(sum_squares(s.amplitude) - ex) / ex);
    }
    c.expect_le(worst_rt, 1e-10, "max round-trip error");
    c.expect_le(worst_parseval, 1e-9, "max relative Parseval error");

    double worst_oracle = 0;
    for (int h = 1; h <= 16; ++h)
        for (int w = 1; w <= 16; ++w) {
            Rng r2(static_cast<uint64_t>(h * 131 + w));
            auto x = Tensor<double>::random_uniform({h, w, 1}, r2, -1.0, 1.0);
            auto s = fft2d_polar(x);
            for (int u = 0; u < h; ++u)
                for (int v = 0; v < w; ++v) {
                    std::complex<double> acc(0, 0);
                    for (int a = 0; a < h; ++a)
                        for (int b = 0; b < w; ++b) {
                            double ang = -2.0 * kPi * (static_cast<double>(a) * u / h +
                                                       static_cast<double>(b) * v / w);
                            acc += x.at3(a, b, 0) *
                                   std::complex<double>(std::cos(ang), std::sin(ang));
                        }
                    acc /= std::sqrt(static_cast<double>(h) * w);
                    double re = s.amplitude.at3(u, v, 0) * std::cos(s.phase.at3(u, v, 0));
                    double im = s.amplitude.at3(u, v, 0) * std::sin(s.phase.at3(u, v, 0));
                    worst_oracle = std::max({worst_oracle, std::abs(re - acc.real()),
                                             std::abs(im - acc.imag())});
                }
        }
    c.expect_le(worst_oracle, 1e-9, "max deviation from O(N^2) DFT oracle");
}

void criterion_3_zoh() {
    Criterion c(3, "ZOH correctness: scalar closed form and series-branch agreement");
    double abar, bbar;
    zoh_scalar(-1.0, 1.0, 1.0, abar, bbar);
    c.expect_le(std::abs(abar - std::exp(-1.0)), 1e-12, "|Abar - e^{-1}|");
    c.expect_le(std::abs(bbar - (1.0 - std::exp(-1.0))), 1e-12, "|Bbar - (1 - e^{-1})|");
    for (double a : {1e-4, -1e-4}) {
        double exact = std::expm1(a) / a;          // delta = 1, B = 1
        double series = 1.0 * (1.0 + a * 0.5);
        c.expect_le(std::abs(series - exact), 1e-8, "series vs exact at |dA|=1e-4");
    }
}

void criterion_4_scan_oracle() {
    Criterion c(4, "scan oracle equivalence over 100 random configurations");
    Rng rng(9004);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        int l = rng.uniform_int(1, 32), d = rng.uniform_int(1, 8), n = rng.uniform_int(1, 8);
        SSMParams<double> p;
        p.state_size = n;
        p.a_diag = Tensor<double>({n});
        for (int j = 0; j < n; ++j) p.a_diag[j] = -rng.uniform(0.05, 3.0);
        p.b = Tensor<double>::random_normal({d, n}, rng, 1.0);
        p.c = Tensor<double>::random_normal({d, n}, rng, 1.0);
        p.d_skip = Tensor<double>::random_normal({d}, rng, 1.0);
        p.delta = Tensor<double>({d});
        for (int i = 0; i < d; ++i) p.delta[i] = rng.uniform(0.01, 2.0);
        auto x = Tensor<double>::random_uniform({l, d}, rng, -1.0, 1.0);

        auto [ab, bb] = zoh_discretize(p.a_diag, p.b, p.delta);
        Tensor<double> y({l, d});
        std::vector<double> h(static_cast<size_t>(d) * n, 0.0);
        for (int t = 0; t < l; ++t)
            for (int i = 0; i < d; ++i) {
                double acc = 0;
                for (int j = 0; j < n; ++j) {
                    double& hv = h[static_cast<size_t>(i) * n + j];
                    hv = ab.at2(i, j) * hv + bb.at2(i, j) * x.at2(t, i);
                    acc += p.c.at2(i, j) * hv;
                }
                y.at2(t, i) = acc + p.d_skip[i] * x.at2(t, i);
            }
        worst = std::max(worst, static_cast<double>(max_abs_diff(scan(p, x), y)));
    }
    c.expect_le(worst, 1e-12, "max production-vs-naive deviation");
}

void criterion_5_gradients() {
    Criterion c(5, "gradient suite: conv, layer norm, selective scan, WMB, FFAB, omega, full model");
    GradCheckOptions opt;
    opt.samples_per_tensor = 3;
    Rng rng(9005);

    {  // conv + layer norm affine
        ParamStore<double> ps;
        ps.add("conv.w", Tensor<double>::random_normal({3, 3, 3, 4}, rng, 0.4));
        ps.add("conv.b", Tensor<double>::random_normal({4}, rng, 0.4));
        ps.add("ln.g", Tensor<double>::random_normal({4}, rng, 0.4));
        ps.add("ln.s", Tensor<double>::random_normal({4}, rng, 0.4));
        auto x = Tensor<double>::random_uniform({8, 8, 3}, rng, -1.0, 1.0);
        auto t = Tensor<double>::random_uniform({8, 8, 4}, rng, -1.0, 1.0);
        auto build = [&](auto& eng) {
            auto y = eng.conv2d(eng.input(x), eng.param(ps, "conv.w"), eng.param(ps, "conv.b"));
            auto z = eng.layer_norm(y, eng.param(ps, "ln.g"), eng.param(ps, "ln.s"), 1e-6);
            return eng.mse_mean(z, eng.input(t));
        };
        auto rep = grad_check(ps, build, opt);
        c.expect_le(rep.max_rel_err, 1e-3, "conv+layer-norm grad error (" + rep.worst_param + ")");
    }
    {  // selective scan weights
        ParamStore<double> ps;
        const int l = 8, d = 4, n = 4;
        ps.add("dt.w", Tensor<double>::random_normal({d, d}, rng, 0.3));
        ps.add("dt.b", Tensor<double>::random_normal({d}, rng, 0.3));
        ps.add("b.w", Tensor<double>::random_normal({d, n}, rng, 0.5));
        ps.add("c.w", Tensor<double>::random_normal({d, n}, rng, 0.5));
        ps.add("a_log", Tensor<double>::random_normal({d, n}, rng, 0.4));
        ps.add("d_skip", Tensor<double>::random_normal({d}, rng, 0.5));
        auto x = Tensor<double>::random_uniform({l, d}, rng, -1.0, 1.0);
        auto t = Tensor<double>::random_uniform({l, d}, rng, -1.0, 1.0);
        auto build = [&](auto& eng) {
            auto delta =
                eng.softplus(eng.linear(eng.input(x), eng.param(ps, "dt.w"), eng.param(ps, "dt.b")));
            auto bs = eng.linear_nb(eng.input(x), eng.param(ps, "b.w"));
            auto cs = eng.linear_nb(eng.input(x), eng.param(ps, "c.w"));
            auto y = eng.selective_core(eng.input(x), delta, bs, cs,
                                        eng.neg_exp(eng.param(ps, "a_log")), eng.param(ps, "d_skip"));
            return eng.mse_mean(y, eng.input(t));
        };
        auto rep = grad_check(ps, build, opt);
        c.expect_le(rep.max_rel_err, 1e-3, "selective-scan grad error (" + rep.worst_param + ")");
    }
    {  // wmb block
        ParamStore<double> ps;
        Rng r2(9105);
        register_wmb(ps, "blk", 4, 4, r2);
        auto x = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        auto t = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        auto build = [&](auto& eng) {
            auto w = bind_wmb(eng, ps, "blk");
            auto [out, ll] = wmb_forward(eng, eng.input(x), w, 1e-6);
            return eng.add(eng.mse_mean(out, eng.input(t)), eng.scale(eng.sum_all(ll), 0.01));
        };
        auto rep = grad_check(ps, build, opt);
        c.expect_le(rep.max_rel_err, 1e-3, "WMB grad error (" + rep.worst_param + ")");
    }
    {  // ffab block
        ParamStore<double> ps;
        Rng r2(9106);
        register_ffab(ps, "blk", 4, r2);
        auto x = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        auto t = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        auto build = [&](auto& eng) {
            auto w = bind_ffab(eng, ps, "blk");
            return eng.mse_mean(ffab_forward(eng, eng.input(x), w), eng.input(t));
        };
        auto rep = grad_check(ps, build, opt);
        c.expect_le(rep.max_rel_err, 1e-3, "FFAB grad error (" + rep.worst_param + ")");
    }
    {  // omega fusion weights and the full model at 16x16, default configuration
        ModelConfig cfg;  // C=16, D=[2,3,4], N=16
        auto ps = register_model_params<double>(cfg, 9205, /*zero_head=*/false);
        auto low = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
        auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
        auto build = [&](auto& eng) {
            auto w = bind_model(eng, ps, cfg);
            auto outs = model_forward(eng, eng.input(low), w, cfg);
            return compute_losses(eng, outs, eng.input(high), cfg).total;
        };
        GradCheckOptions omega_opt;
        omega_opt.name_filter = [](const std::string& n) { return n == "omega1" || n == "omega2"; };
        auto rep_omega = grad_check(ps, build, omega_opt);
        c.expect_le(rep_omega.max_rel_err, 1e-3, "omega grad error");

        GradCheckOptions full_opt;
        full_opt.samples_per_tensor = 2;
        auto rep = grad_check(ps, build, full_opt);
        c.expect_le(rep.max_rel_err, 1e-3,
                    "full-model grad error (" + rep.worst_param + ")");
        c.note("full model checked " + std::to_string(rep.checked) + " sampled entries, " +
               std::to_string(rep.skipped_nonsmooth) + " skipped at phase branch cuts");
    }
}

void criterion_6_residual_identities() {
    Criterion c(6, "residual identities: zeroed inner outputs and zero head");
    Rng rng(9006);
    {
        ParamStore<double> ps;
        Rng r2(9306);
        register_wmb(ps, "blk", 4, 4, r2);
        for (const char* n : {"blk.low_out.w", "blk.low_out.b", "blk.high.w", "blk.high.b",
                              "blk.ffn2.w", "blk.ffn2.b"})
            ps.value(n).fill(0.0);
        PlainEngine<double> eng;
        auto w = bind_wmb(eng, ps, "blk");
        auto x = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        c.expect_le(static_cast<double>(max_abs_diff(wmb_forward(eng, x, w, 1e-6).first, x)), 1e-12,
                    "WMB zeroed-output identity error");
    }
    {
        ParamStore<double> ps;
        Rng r2(9307);
        register_ffab(ps, "blk", 4, r2);
        ps.value("blk.out.w").fill(0.0);
        ps.value("blk.out.b").fill(0.0);
        PlainEngine<double> eng;
        auto w = bind_ffab(eng, ps, "blk");
        auto x = Tensor<double>::random_uniform({8, 8, 4}, rng, 0.0, 1.0);
        c.expect_le(static_cast<double>(max_abs_diff(ffab_forward(eng, x, w), x)), 1e-12,
                    "FFAB zeroed-output identity error");
    }
    {
        ModelConfig cfg;
        cfg.base_width = 8;
        cfg.encoder_depths = {1, 1, 1};
        cfg.ssm_state = 8;
        auto ps = register_model_params<double>(cfg, 9406);  // zero head
        PlainEngine<double> eng;
        auto w = bind_model(eng, ps, cfg);
        auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
        auto out = model_forward(eng, img, w, cfg).enhanced;
        c.expect(max_abs_diff(out, img) == 0.0, "zero-head model is not exactly the identity");
    }
}

void criterion_7_loss_floor() {
    Criterion c(7, "loss floor: perfect prediction gives lc = 1e-3, lw = lf = 0");
    ModelConfig cfg;
    Rng rng(9007);
    auto g = Tensor<double>::random_uniform({32, 32, 3}, rng, 0.0, 1.0);
    auto lv = compute_loss_values(g, dwt2d(g).ll, area_downsample(g, 4), g, cfg);
    c.expect_le(std::abs(lv.lc - 1e-3), 1e-15, "|lc - 1e-3|");
    c.expect(lv.lw == 0.0, "lw nonzero");
    c.expect(lv.lf == 0.0, "lf nonzero");
    c.expect_le(std::abs(lv.total - 1e-3), 1e-15, "|total - 1e-3|");
}

void criterion_8_toy_convergence() {
    Criterion c(8, "toy convergence: 200 steps halve the loss; enhanced beats input PSNR");
    std::ostringstream sink;
    PairSet<double> data = load_pair_dir<double>(data_path("toy"), sink);
    c.expect(data.size() == 8, "expected 8 bundled toy pairs");

    ModelConfig cfg;  // C=16, D=[2,3,4], N=16
    TrainSettings ts;
    ts.steps = 200;
    ts.crop = 64;
    ts.batch_size = 1;
    ts.seed = 7;
    ts.eval_every = 50;
    auto ps = register_model_params<double>(cfg, ts.seed);
    TrainOutcome<double> out = train_loop(ps, data, cfg, ts);
    c.note("loss " + std::to_string(out.initial_eval.total) + " -> " +
           std::to_string(out.final_eval.total));
    c.expect_le(out.final_eval.total, 0.5 * out.initial_eval.total,
                "final/initial loss ratio bound: final " + std::to_string(out.final_eval.total));

    double worst_gain = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < data.size(); ++i) {
        auto enhanced = enhance_image(ps, cfg, data.low[i]);
        double p_enh = psnr(enhanced, data.high[i]);
        double p_low = psnr(data.low[i], data.high[i]);
        worst_gain = std::min(worst_gain, p_enh - p_low);
    }
    c.expect(worst_gain > 0.0,
             "PSNR(enhanced, high) <= PSNR(low, high) on some pair (worst gain " +
                 std::to_string(worst_gain) + " dB)");
    c.note("worst per-pair PSNR gain " + std::to_string(worst_gain) + " dB");
}

void criterion_9_swap_ordering() {
    Criterion c(9, "swap experiment: LL swap outranks amplitude swap; complete swaps are exact");
    auto low = image_to_feature<double>(load_png(data_path("samples/low.png")));
    auto high = image_to_feature<double>(load_png(data_path("samples/high.png")));
    double s_ll = -2, s_amp = -2;
    for (auto& [name, img] : swap_variants(low, high)) {
        if (name == "swap_ll") s_ll = ssim(img, high).ssim;
        if (name == "swap_amplitude") s_amp = ssim(img, high).ssim;
        if (name == "swap_ll_high_bands")
            c.expect_le(static_cast<double>(max_abs_diff(img, high)), 1e-12,
                        "complete wavelet swap deviation from donor");
        if (name == "swap_amplitude_phase")
            c.expect_le(static_cast<double>(max_abs_diff(img, high)), 1e-9,
                        "complete Fourier swap deviation from donor");
    }
    std::ostringstream os;
    os << "SSIM(swap_ll, high) = " << s_ll << " vs SSIM(swap_amplitude, high) = " << s_amp;
    c.note(os.str());
    c.expect(s_ll > s_amp, "ordering violated: " + os.str());
}

void criterion_10_metric_sanity() {
    Criterion c(10, "metric sanity: PSNR closed forms, SSIM self-similarity, checkpoint round trip");
    Tensor<double> a({8, 8, 3}, 0.5), b({8, 8, 3}, 0.6);
    c.expect_le(std::abs(psnr(a, b) - 20.0), 1e-9, "|psnr(uniform 0.1) - 20|");
    c.expect(psnr(a, a) == 99.0, "identical-image cap");
    Rng rng(9010);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    c.expect(ssim(img, img).ssim == 1.0, "ssim(a,a) != 1");

    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.encoder_depths = {1, 1, 1};
    cfg.ssm_state = 4;
    auto ps = register_model_params<double>(cfg, 9510, false);
    std::string path = "/tmp/lfe_acceptance_ckpt.bin";
    save_checkpoint(ps, path);
    auto loaded = load_checkpoint<double>(path);
    bool bitexact = loaded.size() == ps.size();
    for (auto& [name, e] : ps) {
        if (!bitexact) break;
        bitexact = loaded.contains(name) &&
                   std::memcmp(loaded.value(name).data(), e.value.data(),
                               sizeof(double) * static_cast<size_t>(e.value.numel())) == 0;
    }
    c.expect(bitexact, "checkpoint round trip not bit-exact");
    std::remove(path.c_str());
}

void criterion_11_param_count() {
    Criterion c(11, "parameter-count report (informational)");
    ModelConfig cfg;  // C=16, D=[2,3,4], N=16
    auto ps = register_model_params<double>(cfg, 1);
    std::ostringstream os;
    os << "parameters at C=16, D=[2,3,4], N=16: " << model_param_count(ps)
       << " (reference architecture reports ~11.09M; internals are under-specified)";
    c.note(os.str());
}

}  // namespace

int main() {
    std::cout << "acceptance suite\n";
    criterion_1_wavelet();
    criterion_2_fourier();
    criterion_3_zoh();
    criterion_4_scan_oracle();
    criterion_5_gradients();
    criterion_6_residual_identities();
    criterion_7_loss_floor();
    criterion_8_toy_convergence();
    criterion_9_swap_ordering();
    criterion_10_metric_sanity();
    criterion_11_param_count();
    std::cout << (g_failures == 0 ? "all criteria passed\n"
                                  : std::to_string(g_failures) + " criteria failed\n");
    return g_failures == 0 ? 0 : 1;
}
