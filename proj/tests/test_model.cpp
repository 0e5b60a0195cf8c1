#include <doctest.h>

#include <cstring>
#include <sstream>

#include "lfe/grad_check.hpp"
#include "lfe/model.hpp"

using namespace lfe;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.base_width = 4;
    cfg.encoder_depths = {1, 1, 1};
    cfg.ssm_state = 4;
    return cfg;
}

Tensor<double> forward_plain(const ParamStore<double>& ps, const ModelConfig& cfg,
                             const Tensor<double>& img) {
    PlainEngine<double> eng;
    auto w = bind_model(eng, ps, cfg);
    return model_forward(eng, img, w, cfg).enhanced;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("forward preserves the image shape") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 80);
    Rng rng(81);
    auto img = Tensor<double>::random_uniform({24, 16, 3}, rng, 0.0, 1.0);
    PlainEngine<double> eng;
    auto w = bind_model(eng, ps, cfg);
    auto outs = model_forward(eng, img, w, cfg);
    CHECK(outs.enhanced.dims() == img.dims());
    CHECK(outs.ll_pred.dims() == std::vector<int>{12, 8, 3});
    CHECK(outs.latent_out.dims() == std::vector<int>{6, 4, 3});
}

TEST_CASE("default-width stem produces 16 channels") {
    ModelConfig cfg;  // C = 16, depths 2/3/4
    ParamStore<double> ps;
    Rng rng(82);
    register_conv(ps, "stem.conv1", 1, 3, cfg.base_width, rng);
    register_conv(ps, "stem.conv3", 3, 3, cfg.base_width, rng);
    Rng rng2(83);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng2, 0.0, 1.0);
    PlainEngine<double> eng;
    auto f0 = eng.add(eng.conv2d(img, ps.value("stem.conv1.w"), ps.value("stem.conv1.b")),
                      eng.conv2d(img, ps.value("stem.conv3.w"), ps.value("stem.conv3.b")));
    CHECK(f0.dims() == std::vector<int>{16, 16, 16});
}

TEST_CASE("stem hand cases") {
    ParamStore<double> ps;
    Rng rng(84);
    register_conv(ps, "stem.conv1", 1, 3, 4, rng);
    register_conv(ps, "stem.conv3", 3, 3, 4, rng);
    Rng rng2(85);
    auto img = Tensor<double>::random_uniform({8, 8, 3}, rng2, 0.0, 1.0);
    PlainEngine<double> eng;
    SUBCASE("zero weights give zero features") {
        ps.value("stem.conv1.w").fill(0.0);
        ps.value("stem.conv1.b").fill(0.0);
        ps.value("stem.conv3.w").fill(0.0);
        ps.value("stem.conv3.b").fill(0.0);
        auto f0 = eng.add(eng.conv2d(img, ps.value("stem.conv1.w"), ps.value("stem.conv1.b")),
                          eng.conv2d(img, ps.value("stem.conv3.w"), ps.value("stem.conv3.b")));
        CHECK(sum_squares(f0) == 0.0);
    }
    SUBCASE("identity-like 1x1 path embeds RGB in the first channels") {
        ps.value("stem.conv1.w").fill(0.0);
        for (int c = 0; c < 3; ++c) ps.value("stem.conv1.w").at4(0, 0, c, c) = 1.0;
        ps.value("stem.conv1.b").fill(0.0);
        ps.value("stem.conv3.w").fill(0.0);
        ps.value("stem.conv3.b").fill(0.0);
        auto f0 = eng.add(eng.conv2d(img, ps.value("stem.conv1.w"), ps.value("stem.conv1.b")),
                          eng.conv2d(img, ps.value("stem.conv3.w"), ps.value("stem.conv3.b")));
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                for (int c = 0; c < 3; ++c) CHECK(f0.at3(y, x, c) == img.at3(y, x, c));
                CHECK(f0.at3(y, x, 3) == 0.0);
            }
    }
}

TEST_CASE("all-zero parameters leave the image untouched via the global residual") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 86);
    for (auto& [name, e] : ps) e.value.fill(0.0);
    Rng rng(87);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto out = forward_plain(ps, cfg, img);
    CHECK(max_abs_diff(out, img) == 0.0);
}

TEST_CASE("zero head alone gives an exact identity") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 88);  // head starts zeroed by default
    Rng rng(89);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    CHECK(max_abs_diff(forward_plain(ps, cfg, img), img) == 0.0);
}

TEST_CASE("indivisible dimensions raise a shape error with a padding hint") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 90);
    Tensor<double> img({12, 16, 3});
    PlainEngine<double> eng;
    auto w = bind_model(eng, ps, cfg);
    CHECK_THROWS_WITH_AS(model_forward(eng, img, w, cfg), doctest::Contains("pad"), ShapeError);
}

TEST_CASE("NaN parameters surface as a numeric error naming the stage") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 91);
    ps.value("lat.ffab0.amp1.w")[0] = std::nan("");
    Rng rng(92);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    PlainEngine<double> eng;
    auto w = bind_model(eng, ps, cfg);
    CHECK_THROWS_WITH_AS(model_forward(eng, img, w, cfg), doctest::Contains("latent"), NumericError);
}

TEST_CASE("loss floor at perfect prediction") {
    auto cfg = tiny_config();
    Rng rng(93);
    auto g = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto lv = compute_loss_values(g, dwt2d(g).ll, area_downsample(g, 4), g, cfg);
    CHECK(std::abs(lv.lc - 1e-3) < 1e-15);
    CHECK(lv.lw == 0.0);
    CHECK(lv.lf == 0.0);
    CHECK(std::abs(lv.total - 1e-3) < 1e-15);
}

TEST_CASE("lambda = 0 collapses the total to the Charbonnier term") {
    auto cfg = tiny_config();
    cfg.lambda = 0.0;
    Rng rng(94);
    auto g = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto e = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto lv = compute_loss_values(e, dwt2d(e).ll, area_downsample(e, 4), g, cfg);
    CHECK(lv.total == lv.lc);
}

TEST_CASE("Charbonnier closed form for a constant offset") {
    auto cfg = tiny_config();
    Tensor<double> g({4, 4, 3}, 0.4);
    Tensor<double> e({4, 4, 3}, 0.5);  // uniform +0.1
    auto lv = compute_loss_values(e, dwt2d(g).ll, area_downsample(g, 4), g, cfg);
    CHECK(std::abs(lv.lc - std::sqrt(0.01 + 1e-6)) < 1e-12);
    CHECK(lv.lc == doctest::Approx(0.10005).epsilon(1e-4));
}

TEST_CASE("loss invariants on random predictions") {
    auto cfg = tiny_config();
    Rng rng(95);
    for (int trial = 0; trial < 5; ++trial) {
        auto g = Tensor<double>::random_uniform({8, 8, 3}, rng, 0.0, 1.0);
        auto e = Tensor<double>::random_uniform({8, 8, 3}, rng, 0.0, 1.0);
        auto ll = Tensor<double>::random_uniform({4, 4, 3}, rng, 0.0, 2.0);
        auto lat = Tensor<double>::random_uniform({2, 2, 3}, rng, 0.0, 1.0);
        auto lv = compute_loss_values(e, ll, lat, g, cfg);
        CHECK(lv.lc >= cfg.epsilon_charbonnier);
        CHECK(lv.lw >= 0.0);
        CHECK(lv.lf >= 0.0);
        CHECK(lv.total >= lv.lc);
    }
}

TEST_CASE("non-finite training aborts with a per-stage diagnostic dump") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 95100, false);
    ps.value("enc1.wmb0.ffn1.w")[0] = std::nan("");
    Rng rng(95101);
    auto low = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    AdamState<double> adam;
    CHECK_THROWS_WITH_AS(train_step(ps, {{low, high}}, adam, cfg, 1e-3),
                         doctest::Contains("per-stage rms norms"), NumericError);
}

TEST_CASE("zero learning rate leaves parameters bit-exactly unchanged") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 96, false);
    auto before = ps;  // deep copy
    Rng rng(97);
    auto low = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    AdamState<double> adam;
    train_step(ps, {{low, high}}, adam, cfg, 0.0);
    for (auto& [name, e] : ps) {
        const auto& b = before.value(name);
        CHECK(std::memcmp(e.value.data(), b.data(), sizeof(double) * static_cast<size_t>(b.numel())) == 0);
    }
}

TEST_CASE("50 steps on one pair decrease the loss monotonically over 10-step windows") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 98);
    Rng rng(99);
    auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.3, 0.9);
    Tensor<double> low(high.dims());
    for (long long i = 0; i < high.numel(); ++i) low[i] = 0.4 * high[i] * high[i];
    AdamState<double> adam;
    std::vector<std::pair<Tensor<double>, Tensor<double>>> batch{{low, high}};
    std::vector<double> window_means;
    double acc = 0;
    for (int step = 0; step < 50; ++step) {
        double lr = cosine_lr(2e-3, 1e-6, step, 50);
        acc += train_step(ps, batch, adam, cfg, lr).total;
        if ((step + 1) % 10 == 0) {
            window_means.push_back(acc / 10.0);
            acc = 0;
        }
    }
    REQUIRE(window_means.size() == 5);
    for (size_t i = 1; i < window_means.size(); ++i)
        CHECK(window_means[i] < window_means[i - 1]);
}

TEST_CASE("gradient of omega fusion weights matches finite differences") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 100, false);
    Rng rng(101);
    auto low = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto build = [&](auto& eng) {
        auto w = bind_model(eng, ps, cfg);
        auto outs = model_forward(eng, eng.input(low), w, cfg);
        return compute_losses(eng, outs, eng.input(high), cfg).total;
    };
    GradCheckOptions opt;
    opt.name_filter = [](const std::string& n) { return n == "omega1" || n == "omega2"; };
    auto rep = grad_check(ps, build, opt);
    CHECK(rep.checked == 2);
    CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("tiny model full gradient check") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 102, false);
    Rng rng(103);
    auto low = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto high = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto build = [&](auto& eng) {
        auto w = bind_model(eng, ps, cfg);
        auto outs = model_forward(eng, eng.input(low), w, cfg);
        return compute_losses(eng, outs, eng.input(high), cfg).total;
    };
    // At h=1e-3 one sampled coordinate carries ~1.1e-3 of pure truncation
    // error (scales as h^2; 5.6e-4 at h=5e-4), so screen coarsely at the
    // default step and tightly at the halved step.
    GradCheckOptions opt;
    opt.samples_per_tensor = 1;
    auto rep = grad_check(ps, build, opt);
    CHECK(rep.max_rel_err < 2.5e-3);
    opt.step = 5e-4;
    auto rep2 = grad_check(ps, build, opt);
    CHECK(rep2.max_rel_err < 1e-3);
}

TEST_CASE("checkpoint round trip reproduces the forward pass bit-exactly") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 104, false);
    Rng rng(105);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto want = forward_plain(ps, cfg, img);
    std::string path = "/tmp/lfe_model_ckpt.bin";
    save_checkpoint(ps, path);
    auto loaded = load_checkpoint<double>(path);
    auto got = forward_plain(loaded, cfg, img);
    CHECK(std::memcmp(got.data(), want.data(), sizeof(double) * static_cast<size_t>(want.numel())) == 0);
    std::remove(path.c_str());
}

TEST_CASE("tape and plain model forwards agree bit-exactly") {
    auto cfg = tiny_config();
    auto ps = register_model_params<double>(cfg, 106, false);
    Rng rng(107);
    auto img = Tensor<double>::random_uniform({16, 16, 3}, rng, 0.0, 1.0);
    auto want = forward_plain(ps, cfg, img);
    TapeEngine<double> eng;
    auto w = bind_model(eng, ps, cfg);
    auto got = model_forward(eng, eng.input(img), w, cfg).enhanced;
    CHECK(max_abs_diff(got.value(), want) == 0.0);
}

TEST_CASE("parameter count is reported at the reference configuration") {
    ModelConfig cfg;  // C=16, D=[2,3,4], N=16
    auto ps = register_model_params<double>(cfg, 108);
    long long count = model_param_count(ps);
    MESSAGE("parameter count at C=16, D=[2,3,4], N=16: ", count);
    CHECK(count > 1000000);  // order sanity only; internals are layout-specific
}

TEST_CASE("cosine learning-rate schedule") {
    CHECK(cosine_lr(8e-4, 1e-6, 0, 100) == doctest::Approx(8e-4));
    CHECK(cosine_lr(8e-4, 1e-6, 99, 100) == doctest::Approx(1e-6));
    double prev = 1.0;
    for (int t = 0; t < 100; ++t) {
        double lr = cosine_lr(8e-4, 1e-6, t, 100);
        CHECK(lr <= prev + 1e-18);
        prev = lr;
    }
    CHECK(cosine_lr(0.0, 1e-6, 50, 100) == 0.0);  // lr_min clamped to lr0
}

TEST_CASE("config file round trip and errors") {
    ModelConfig mc;
    TrainSettings ts;
    mc.base_width = 8;
    mc.encoder_depths = {1, 2, 3};
    ts.steps = 42;
    ts.seed = 99;
    std::string text = serialize_config(mc, ts);
    ModelConfig mc2;
    TrainSettings ts2;
    std::istringstream is(text);
    parse_config_text(is, mc2, ts2);
    CHECK(mc2.base_width == 8);
    CHECK(mc2.encoder_depths == std::array<int, 3>{1, 2, 3});
    CHECK(ts2.steps == 42);
    CHECK(ts2.seed == 99);

    std::istringstream bad("unknown_key = 1\n");
    CHECK_THROWS_AS(parse_config_text(bad, mc2, ts2), InputError);
    std::istringstream badver("format_version = 9\n");
    CHECK_THROWS_AS(parse_config_text(badver, mc2, ts2), VersionError);
    std::istringstream comments("# comment only\n  \nbase_width = 4 # trailing\n");
    parse_config_text(comments, mc2, ts2);
    CHECK(mc2.base_width == 4);
}

TEST_SUITE_END();
