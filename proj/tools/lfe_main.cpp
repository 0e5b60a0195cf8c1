// lfe: low-light image enhancement with wavelet and Fourier frequency blocks.
//
// Verbs:
//   swap     reproduce the frequency-component swap experiment on an image pair
//   train    toy-scale training on a directory of low/high pairs
//   infer    enhance images with a trained checkpoint
//   metrics  PSNR/SSIM between two directories of images
//
// Exit codes: 0 success, 1 input error, 2 numeric error, 3 I/O error.

#include <CLI11.hpp>

#include <iostream>

#include "lfe/cli.hpp"

namespace {

struct SharedOpts {
    uint64_t seed = 7;
    std::string config;
    std::string out;
    std::string precision = "f64";
};

void add_shared(CLI::App* cmd, SharedOpts& o) {
    cmd->add_option("--seed", o.seed, "RNG seed (training init, crops)");
    cmd->add_option("--config", o.config, "config file (key = value per line)");
    cmd->add_option("--out", o.out, "output directory or checkpoint path");
    cmd->add_option("--precision", o.precision, "compute precision")
        ->check(CLI::IsMember({"f32", "f64"}));
}

template <typename T>
int dispatch(const std::string& verb, const SharedOpts& shared, bool seed_given,
             const std::string& low, const std::string& high, const std::string& data_dir,
             const std::string& ckpt, const std::vector<std::string>& inputs,
             const std::string& reference, const std::string& a_dir, const std::string& b_dir) {
    using namespace lfe;
    if (verb == "swap") {
        std::string out_dir = shared.out.empty() ? "swap_out" : shared.out;
        run_swap<T>(low, high, out_dir, std::cout);
        std::cout << "report: " << (fs::path(out_dir) / "swap_report.json").string() << "\n";
    } else if (verb == "train") {
        ModelConfig cfg;
        TrainSettings ts;
        if (!shared.config.empty()) load_config_file(shared.config, cfg, ts);
        if (seed_given) ts.seed = shared.seed;  // flag wins over the config file
        std::string out_ckpt = shared.out.empty() ? "model.ckpt" : shared.out;
        run_train<T>(data_dir, cfg, ts, out_ckpt, std::cout);
    } else if (verb == "infer") {
        std::string out_dir = shared.out.empty() ? "infer_out" : shared.out;
        run_infer<T>(ckpt, shared.config, inputs, out_dir, reference, std::cout);
    } else if (verb == "metrics") {
        std::string out_json = shared.out.empty() ? "" : (fs::path(shared.out) / "metrics.json").string();
        if (!shared.out.empty()) fs::create_directories(shared.out);
        run_metrics<T>(a_dir, b_dir, out_json, std::cout);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"low-light image enhancement with wavelet and Fourier frequency blocks"};
    app.require_subcommand(1);

    SharedOpts shared;
    std::string low, high, data_dir, ckpt, reference, a_dir, b_dir;
    std::vector<std::string> inputs;

    CLI::App* swap = app.add_subcommand("swap", "frequency component swap experiment");
    swap->add_option("low", low, "low-light image (PNG)")->required();
    swap->add_option("high", high, "normal-light image (PNG)")->required();
    add_shared(swap, shared);

    CLI::App* train = app.add_subcommand("train", "toy-scale training");
    train->add_option("data_dir", data_dir, "directory with low/ and high/ subdirs")->required();
    add_shared(train, shared);

    CLI::App* infer = app.add_subcommand("infer", "enhance images with a checkpoint");
    infer->add_option("checkpoint", ckpt, "checkpoint path")->required();
    infer->add_option("images", inputs, "input images (PNG)")->required();
    infer->add_option("--reference", reference, "directory of ground-truth images");
    add_shared(infer, shared);

    CLI::App* metrics = app.add_subcommand("metrics", "PSNR/SSIM between two directories");
    metrics->add_option("a_dir", a_dir, "first directory")->required();
    metrics->add_option("b_dir", b_dir, "second directory")->required();
    add_shared(metrics, shared);

    CLI11_PARSE(app, argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    std::string verb = sub->get_name();
    bool seed_given = sub->count("--seed") > 0;

    try {
        if (shared.precision == "f32")
            return dispatch<float>(verb, shared, seed_given, low, high, data_dir, ckpt, inputs,
                                   reference, a_dir, b_dir);
        return dispatch<double>(verb, shared, seed_given, low, high, data_dir, ckpt, inputs,
                                reference, a_dir, b_dir);
    } catch (const lfe::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const lfe::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
