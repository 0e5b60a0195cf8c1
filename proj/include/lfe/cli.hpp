#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "lfe/data_synth.hpp"
#include "lfe/fourier.hpp"
#include "lfe/image_io.hpp"
#include "lfe/metrics.hpp"
#include "lfe/trainer.hpp"
#include "lfe/wavelet.hpp"

// Command implementations behind the CLI verbs (swap, train, infer,
// metrics). Each prints its numbers to the log stream and mirrors every one
// of them into a machine-readable JSON report.

namespace lfe {

namespace fs = std::filesystem;

// ----- frequency component swap experiment -----

// The six variants of the low image, donor = high. Odd dimensions are
// reflect-padded to even before the transforms and cropped back after.
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> swap_variants(const Tensor<T>& low,
                                                             const Tensor<T>& high) {
    check_same_shape(low, high, "swap_variants");
    const int h = low.dim(0), w = low.dim(1);
    const int ph = h + (h % 2), pw = w + (w % 2);
    Tensor<T> lo = (ph != h || pw != w) ? pad_reflect_to(low, ph, pw) : low;
    Tensor<T> hi = (ph != h || pw != w) ? pad_reflect_to(high, ph, pw) : high;

    auto lo_b = dwt2d(lo);
    auto hi_b = dwt2d(hi);
    auto lo_s = fft2d_polar(lo);
    auto hi_s = fft2d_polar(hi);

    auto finish = [&](Tensor<T> t) {
        if (ph != h || pw != w) t = crop_to(t, h, w);
        for (long long i = 0; i < t.numel(); ++i) t[i] = std::min(T(1), std::max(T(0), t[i]));
        return t;
    };

    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("swap_ll", finish(iwt2d(swap_bands(lo_b, hi_b, BandSwap::kLowLow))));
    out.emplace_back("swap_amplitude",
                     finish(ifft2d_polar(swap_polar(lo_s, hi_s, PolarSwap::kAmplitude))));
    out.emplace_back("swap_ll_high_bands",
                     finish(iwt2d(swap_bands(swap_bands(lo_b, hi_b, BandSwap::kLowLow), hi_b,
                                             BandSwap::kHigh))));
    out.emplace_back("swap_amplitude_phase",
                     finish(ifft2d_polar(swap_polar(swap_polar(lo_s, hi_s, PolarSwap::kAmplitude),
                                                    hi_s, PolarSwap::kPhase))));
    out.emplace_back("swap_high_bands", finish(iwt2d(swap_bands(lo_b, hi_b, BandSwap::kHigh))));
    out.emplace_back("swap_phase", finish(ifft2d_polar(swap_polar(lo_s, hi_s, PolarSwap::kPhase))));
    return out;
}

template <typename T>
struct SwapVariantRow {
    std::string name;
    T psnr_vs_low, ssim_vs_low, psnr_vs_high, ssim_vs_high;
    std::string image_path, map_low_path, map_high_path;
};

template <typename T>
struct SwapOutcome {
    std::string pair_id;
    std::vector<SwapVariantRow<T>> rows;
    std::string report_path;
};

template <typename T>
SwapOutcome<T> run_swap(const std::string& low_path, const std::string& high_path,
                        const std::string& out_dir, std::ostream& log) {
    ImageU8 low_img = load_png(low_path);
    ImageU8 high_img = load_png(high_path);
    if (low_img.alpha_stripped || high_img.alpha_stripped)
        log << "warning: alpha channel stripped from input\n";
    if (low_img.width != high_img.width || low_img.height != high_img.height)
        throw InputError("swap: image dimensions differ");
    Tensor<T> low = image_to_feature<T>(low_img);
    Tensor<T> high = image_to_feature<T>(high_img);

    fs::create_directories(out_dir);
    SwapOutcome<T> outcome;
    outcome.pair_id = fs::path(low_path).stem().string() + "__" + fs::path(high_path).stem().string();

    nlohmann::json jrows = nlohmann::json::array();
    for (auto& [name, img] : swap_variants(low, high)) {
        SwapVariantRow<T> row;
        row.name = name;
        auto rep_low = ssim(img, low);
        auto rep_high = ssim(img, high);
        row.psnr_vs_low = rep_low.psnr;
        row.ssim_vs_low = rep_low.ssim;
        row.psnr_vs_high = rep_high.psnr;
        row.ssim_vs_high = rep_high.ssim;
        row.image_path = (fs::path(out_dir) / (name + ".png")).string();
        row.map_low_path = (fs::path(out_dir) / (name + "_ssim_map_vs_low.png")).string();
        row.map_high_path = (fs::path(out_dir) / (name + "_ssim_map_vs_high.png")).string();
        save_png(row.image_path, feature_to_image(img));
        save_png(row.map_low_path, map_to_gray_image(rep_low.ssim_map, T(-1), T(1)));
        save_png(row.map_high_path, map_to_gray_image(rep_high.ssim_map, T(-1), T(1)));
        log << name << " psnr_vs_low " << row.psnr_vs_low << " ssim_vs_low " << row.ssim_vs_low
            << " psnr_vs_high " << row.psnr_vs_high << " ssim_vs_high " << row.ssim_vs_high << "\n";
        jrows.push_back({{"name", name},
                         {"psnr_vs_low", row.psnr_vs_low},
                         {"ssim_vs_low", row.ssim_vs_low},
                         {"psnr_vs_high", row.psnr_vs_high},
                         {"ssim_vs_high", row.ssim_vs_high},
                         {"image", row.image_path},
                         {"ssim_map_vs_low", row.map_low_path},
                         {"ssim_map_vs_high", row.map_high_path}});
        outcome.rows.push_back(std::move(row));
    }
    nlohmann::json j = {{"pair_id", outcome.pair_id},
                        {"low", low_path},
                        {"high", high_path},
                        {"variants", jrows}};
    outcome.report_path = (fs::path(out_dir) / "swap_report.json").string();
    std::ofstream rf(outcome.report_path);
    if (!rf) throw IoError("swap: cannot write report: " + outcome.report_path);
    rf << j.dump(2) << "\n";
    return outcome;
}

// ----- shared dataset helpers -----

inline std::vector<std::string> list_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

template <typename T>
PairSet<T> load_pair_dir(const std::string& data_dir, std::ostream& log) {
    std::string low_dir = (fs::path(data_dir) / "low").string();
    std::string high_dir = (fs::path(data_dir) / "high").string();
    auto low_names = list_pngs(low_dir);
    auto high_names = list_pngs(high_dir);
    if (low_names != high_names) {
        std::string msg = "train: low/ and high/ filenames differ; orphans:";
        for (const auto& n : low_names)
            if (!std::count(high_names.begin(), high_names.end(), n)) msg += " low/" + n;
        for (const auto& n : high_names)
            if (!std::count(low_names.begin(), low_names.end(), n)) msg += " high/" + n;
        throw InputError(msg);
    }
    if (low_names.empty()) throw InputError("train: empty dataset in " + data_dir);
    PairSet<T> set;
    for (const auto& n : low_names) {
        ImageU8 li = load_png((fs::path(low_dir) / n).string());
        ImageU8 hi = load_png((fs::path(high_dir) / n).string());
        if (li.alpha_stripped || hi.alpha_stripped)
            log << "warning: alpha channel stripped from pair " << n << "\n";
        if (li.width != hi.width || li.height != hi.height)
            throw InputError("train: pair " + n + " has mismatched dimensions");
        set.names.push_back(n);
        set.low.push_back(image_to_feature<T>(li));
        set.high.push_back(image_to_feature<T>(hi));
    }
    return set;
}

// ----- train -----

template <typename T>
TrainOutcome<T> run_train(const std::string& data_dir, const ModelConfig& cfg,
                          const TrainSettings& ts, const std::string& out_ckpt, std::ostream& log) {
    PairSet<T> data = load_pair_dir<T>(data_dir, log);
    log << "training on " << data.size() << " pairs, " << ts.steps << " steps, seed " << ts.seed
        << "\n";
    ParamStore<T> ps = register_model_params<T>(cfg, ts.seed);
    log << "parameter count: " << model_param_count(ps) << "\n";
    TrainOutcome<T> out = train_loop(ps, data, cfg, ts, &log);
    if (!out_ckpt.empty()) {
        if (fs::path(out_ckpt).has_parent_path()) fs::create_directories(fs::path(out_ckpt).parent_path());
        save_checkpoint(out.best_params, out_ckpt);
        std::ofstream cf(out_ckpt + ".config");
        if (!cf) throw IoError("train: cannot write config next to checkpoint");
        cf << serialize_config(cfg, ts);
        nlohmann::json jlog = nlohmann::json::array();
        for (const auto& row : out.log)
            jlog.push_back({{"step", row.step + 1},
                            {"lr", row.lr},
                            {"total", row.loss.total},
                            {"lc", row.loss.lc},
                            {"lw", row.loss.lw},
                            {"lf", row.loss.lf}});
        nlohmann::json jevals = nlohmann::json::array();
        for (const auto& [step, ev] : out.evals)
            jevals.push_back({{"step", step},
                              {"total", ev.total},
                              {"lc", ev.lc},
                              {"lw", ev.lw},
                              {"lf", ev.lf}});
        nlohmann::json j = {
            {"pairs", data.size()},
            {"steps", ts.steps},
            {"seed", ts.seed},
            {"parameter_count", model_param_count(ps)},
            {"initial_eval",
             {{"total", out.initial_eval.total}, {"lc", out.initial_eval.lc},
              {"lw", out.initial_eval.lw}, {"lf", out.initial_eval.lf}}},
            {"final_eval",
             {{"total", out.final_eval.total}, {"lc", out.final_eval.lc},
              {"lw", out.final_eval.lw}, {"lf", out.final_eval.lf}}},
            {"best_step", out.best_step},
            {"best_val_lc", out.best_val_lc},
            {"evals", jevals},
            {"log", jlog}};
        std::ofstream jf(out_ckpt + ".trainlog.json");
        if (!jf) throw IoError("train: cannot write training log");
        jf << j.dump(2) << "\n";
        log << "saved best checkpoint (step " << out.best_step << ", val lc " << out.best_val_lc
            << ") to " << out_ckpt << "\n";
    }
    return out;
}

// ----- infer -----

template <typename T>
Tensor<T> enhance_image(const ParamStore<T>& ps, const ModelConfig& cfg, const Tensor<T>& img) {
    const int h = img.dim(0), w = img.dim(1);
    const int ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
    Tensor<T> padded = (ph != h || pw != w) ? pad_reflect_to(img, ph, pw) : img;
    PlainEngine<T> eng;
    auto weights = bind_model(eng, ps, cfg);
    Tensor<T> out = model_forward(eng, padded, weights, cfg).enhanced;
    if (ph != h || pw != w) out = crop_to(out, h, w);
    for (long long i = 0; i < out.numel(); ++i) out[i] = std::min(T(1), std::max(T(0), out[i]));
    return out;
}

template <typename T>
ParamStore<T> load_model_checkpoint(const std::string& ckpt_path, ModelConfig& cfg,
                                    TrainSettings& ts, const std::string& config_override) {
    std::string cfg_path = config_override.empty() ? ckpt_path + ".config" : config_override;
    load_config_file(cfg_path, cfg, ts);
    ParamStore<T> ps = load_checkpoint<T>(ckpt_path);
    // the config must describe exactly the checkpointed parameter set
    ParamStore<T> expect = register_model_params<T>(cfg, 0);
    if (expect.size() != ps.size())
        throw VersionError("checkpoint/config mismatch: parameter count differs");
    for (const auto& [name, e] : expect) {
        if (!ps.contains(name)) throw VersionError("checkpoint/config mismatch: missing " + name);
        if (ps.value(name).dims() != e.value.dims())
            throw VersionError("checkpoint/config mismatch: shape of " + name);
    }
    return ps;
}

template <typename T>
void run_infer(const std::string& ckpt_path, const std::string& config_override,
               const std::vector<std::string>& inputs, const std::string& out_dir,
               const std::string& reference_dir, std::ostream& log) {
    if (inputs.empty()) throw InputError("infer: no input images");
    ModelConfig cfg;
    TrainSettings ts;
    ParamStore<T> ps = load_model_checkpoint<T>(ckpt_path, cfg, ts, config_override);
    fs::create_directories(out_dir);

    nlohmann::json jrows = nlohmann::json::array();
    T mean_psnr = 0, mean_ssim = 0;
    int refs = 0;
    for (const auto& in_path : inputs) {
        ImageU8 img8 = load_png(in_path);
        if (img8.alpha_stripped) log << "warning: alpha channel stripped from " << in_path << "\n";
        Tensor<T> out = enhance_image(ps, cfg, image_to_feature<T>(img8));
        std::string name = fs::path(in_path).filename().string();
        std::string out_path = (fs::path(out_dir) / name).string();
        save_png(out_path, feature_to_image(out));
        log << "enhanced " << in_path << " -> " << out_path;
        nlohmann::json row = {{"input", in_path}, {"output", out_path}};
        if (!reference_dir.empty()) {
            std::string ref_path = (fs::path(reference_dir) / name).string();
            if (!fs::exists(ref_path)) throw InputError("infer: no reference for " + name);
            Tensor<T> ref = image_to_feature<T>(load_png(ref_path));
            auto rep = ssim(out, ref);
            log << " psnr " << rep.psnr << " ssim " << rep.ssim;
            row["psnr"] = rep.psnr;
            row["ssim"] = rep.ssim;
            mean_psnr += rep.psnr;
            mean_ssim += rep.ssim;
            ++refs;
        }
        log << "\n";
        jrows.push_back(row);
    }
    nlohmann::json j = {{"checkpoint", ckpt_path}, {"images", jrows}};
    if (refs > 0) {
        j["mean_psnr"] = mean_psnr / refs;
        j["mean_ssim"] = mean_ssim / refs;
        log << "mean psnr " << mean_psnr / refs << " mean ssim " << mean_ssim / refs << "\n";
    }
    std::ofstream jf((fs::path(out_dir) / "infer_report.json").string());
    if (!jf) throw IoError("infer: cannot write report");
    jf << j.dump(2) << "\n";
}

// ----- metrics -----

template <typename T>
std::pair<T, T> run_metrics(const std::string& a_dir, const std::string& b_dir,
                            const std::string& out_json, std::ostream& log) {
    auto a_names = list_pngs(a_dir);
    auto b_names = list_pngs(b_dir);
    std::vector<std::string> common, orphans;
    for (const auto& n : a_names)
        (std::count(b_names.begin(), b_names.end(), n) ? common : orphans).push_back(n);
    for (const auto& n : b_names)
        if (!std::count(a_names.begin(), a_names.end(), n)) orphans.push_back(n);
    if (!orphans.empty()) {
        std::string msg = "metrics: unmatched filenames:";
        for (const auto& n : orphans) msg += " " + n;
        throw InputError(msg);
    }
    if (common.empty()) throw InputError("metrics: no common images between directories");

    nlohmann::json jrows = nlohmann::json::array();
    T mean_psnr = 0, mean_ssim = 0;
    for (const auto& n : common) {
        Tensor<T> a = image_to_feature<T>(load_png((fs::path(a_dir) / n).string()));
        Tensor<T> b = image_to_feature<T>(load_png((fs::path(b_dir) / n).string()));
        if (!a.same_shape(b)) throw InputError("metrics: pair " + n + " has mismatched dimensions");
        auto rep = ssim(a, b);
        log << n << " psnr " << rep.psnr << " ssim " << rep.ssim << "\n";
        jrows.push_back({{"name", n}, {"psnr", rep.psnr}, {"ssim", rep.ssim}});
        mean_psnr += rep.psnr;
        mean_ssim += rep.ssim;
    }
    mean_psnr /= static_cast<T>(common.size());
    mean_ssim /= static_cast<T>(common.size());
    log << "mean psnr " << mean_psnr << " mean ssim " << mean_ssim << "\n";
    if (!out_json.empty()) {
        nlohmann::json j = {{"a_dir", a_dir},
                            {"b_dir", b_dir},
                            {"pairs", jrows},
                            {"mean_psnr", mean_psnr},
                            {"mean_ssim", mean_ssim}};
        std::ofstream jf(out_json);
        if (!jf) throw IoError("metrics: cannot write report: " + out_json);
        jf << j.dump(2) << "\n";
    }
    return {mean_psnr, mean_ssim};
}

}  // namespace lfe
