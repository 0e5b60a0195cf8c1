// Regenerates the bundled synthetic sample data:
//   data/samples/low.png, data/samples/high.png   (swap experiment pair)
//   data/toy/{low,high}/pair_k.png, k = 0..7      (64x64 training pairs)

#include <filesystem>
#include <iostream>

#include "lfe/data_synth.hpp"
#include "lfe/image_io.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    std::string root = argc > 1 ? argv[1] : "data";

    fs::create_directories(fs::path(root) / "samples");
    fs::create_directories(fs::path(root) / "toy" / "low");
    fs::create_directories(fs::path(root) / "toy" / "high");

    auto [low, high] = lfe::synth_pair<double>(96, 128, 1001);
    lfe::save_png((fs::path(root) / "samples" / "low.png").string(), lfe::feature_to_image(low));
    lfe::save_png((fs::path(root) / "samples" / "high.png").string(), lfe::feature_to_image(high));
    std::cout << "wrote samples/low.png samples/high.png (96x128)\n";

    for (int k = 0; k < 8; ++k) {
        auto [tl, th] = lfe::synth_pair<double>(64, 64, 2000 + static_cast<uint64_t>(k));
        std::string name = "pair_" + std::to_string(k) + ".png";
        lfe::save_png((fs::path(root) / "toy" / "low" / name).string(), lfe::feature_to_image(tl));
        lfe::save_png((fs::path(root) / "toy" / "high" / name).string(), lfe::feature_to_image(th));
    }
    std::cout << "wrote toy/{low,high}/pair_0..7.png (64x64)\n";
    return 0;
}
