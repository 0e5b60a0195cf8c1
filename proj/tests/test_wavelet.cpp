#include <doctest.h>

#include "lfe/wavelet.hpp"

using namespace lfe;

TEST_SUITE_BEGIN("wavelet");

TEST_CASE("constant 2x2 block has only low-frequency content") {
    Tensor<double> x({2, 2, 1}, 1.0);
    auto b = dwt2d(x);
    CHECK(b.ll[0] == 2.0);
    CHECK(b.lh[0] == 0.0);
    CHECK(b.hl[0] == 0.0);
    CHECK(b.hh[0] == 0.0);
}

TEST_CASE("hand-evaluated 2x2 block") {
    Tensor<double> x({2, 2, 1});
    x.at3(0, 0, 0) = 1;
    x.at3(0, 1, 0) = 2;
    x.at3(1, 0, 0) = 3;
    x.at3(1, 1, 0) = 4;
    auto b = dwt2d(x);
    CHECK(b.ll[0] == 5.0);
    CHECK(b.lh[0] == -2.0);
    CHECK(b.hl[0] == -1.0);
    CHECK(b.hh[0] == 0.0);

    // inverse of the same case
    WaveletBands<double> bands;
    bands.ll = Tensor<double>({1, 1, 1}, 5.0);
    bands.lh = Tensor<double>({1, 1, 1}, -2.0);
    bands.hl = Tensor<double>({1, 1, 1}, -1.0);
    bands.hh = Tensor<double>({1, 1, 1}, 0.0);
    auto r = iwt2d(bands);
    CHECK(r.at3(0, 0, 0) == 1.0);
    CHECK(r.at3(0, 1, 0) == 2.0);
    CHECK(r.at3(1, 0, 0) == 3.0);
    CHECK(r.at3(1, 1, 0) == 4.0);
}

TEST_CASE("vertical gradient fires only the vertical-detail band") {
    Tensor<double> x({2, 2, 1});
    x.at3(0, 0, 0) = 1;
    x.at3(0, 1, 0) = 1;
    x.at3(1, 0, 0) = 3;
    x.at3(1, 1, 0) = 3;
    auto b = dwt2d(x);
    CHECK(b.ll[0] == 4.0);
    CHECK(b.lh[0] == -2.0);
    CHECK(b.hl[0] == 0.0);
    CHECK(b.hh[0] == 0.0);
}

TEST_CASE("perfect reconstruction and energy conservation on random tensors") {
    Rng rng(100);
    for (int trial = 0; trial < 50; ++trial) {
        int h = 2 * rng.uniform_int(1, 16);
        int w = 2 * rng.uniform_int(1, 16);
        int c = rng.uniform_int(1, 8);
        auto x = Tensor<double>::random_uniform({h, w, c}, rng, -2.0, 2.0);
        auto b = dwt2d(x);
        CHECK(max_abs_diff(iwt2d(b), x) < 1e-12);
        double ex = sum_squares(x);
        CHECK(std::abs(band_energy(b) - ex) / ex < 1e-9);
    }
}

TEST_CASE("inverse of the constant case") {
    WaveletBands<double> b;
    b.ll = Tensor<double>({2, 2, 1}, 2.0);
    b.lh = Tensor<double>({2, 2, 1});
    b.hl = Tensor<double>({2, 2, 1});
    b.hh = Tensor<double>({2, 2, 1});
    auto r = iwt2d(b);
    for (long long i = 0; i < r.numel(); ++i) CHECK(r[i] == 1.0);
}

TEST_CASE("transform is exactly linear") {
    Rng rng(101);
    auto x = Tensor<double>::random_uniform({6, 8, 2}, rng, -1.0, 1.0);
    auto y = Tensor<double>::random_uniform({6, 8, 2}, rng, -1.0, 1.0);
    const double a = 0.5, b = -0.25;  // dyadic so linearity is bitwise
    Tensor<double> mix(x.dims());
    for (long long i = 0; i < x.numel(); ++i) mix[i] = a * x[i] + b * y[i];
    auto bm = dwt2d(mix);
    auto bx = dwt2d(x);
    auto by = dwt2d(y);
    for (long long i = 0; i < bm.ll.numel(); ++i) {
        CHECK(bm.ll[i] == doctest::Approx(a * bx.ll[i] + b * by.ll[i]).epsilon(1e-14));
        CHECK(bm.hh[i] == doctest::Approx(a * bx.hh[i] + b * by.hh[i]).epsilon(1e-14));
    }
}

TEST_CASE("odd dimensions are rejected") {
    Tensor<double> x({3, 4, 1});
    CHECK_THROWS_AS(dwt2d(x), ShapeError);
    Tensor<double> y({4, 5, 1});
    CHECK_THROWS_AS(dwt2d(y), ShapeError);
}

TEST_CASE("band shape mismatch is rejected") {
    WaveletBands<double> b;
    b.ll = Tensor<double>({2, 2, 1});
    b.lh = Tensor<double>({2, 2, 1});
    b.hl = Tensor<double>({2, 2, 1});
    b.hh = Tensor<double>({2, 3, 1});
    CHECK_THROWS_AS(iwt2d(b), ShapeError);
}

TEST_CASE("swap_bands composition laws") {
    Rng rng(102);
    auto x = Tensor<double>::random_uniform({4, 4, 3}, rng, 0.0, 1.0);
    auto y = Tensor<double>::random_uniform({4, 4, 3}, rng, 0.0, 1.0);
    auto bx = dwt2d(x);
    auto by = dwt2d(y);

    auto self = swap_bands(bx, bx, BandSwap::kLowLow);
    CHECK(max_abs_diff(iwt2d(self), x) < 1e-13);  // self-swap identity

    auto complete = swap_bands(swap_bands(bx, by, BandSwap::kLowLow), by, BandSwap::kHigh);
    CHECK(max_abs_diff(complete.ll, by.ll) == 0.0);
    CHECK(max_abs_diff(complete.hh, by.hh) == 0.0);
    CHECK(max_abs_diff(iwt2d(complete), iwt2d(by)) == 0.0);

    WaveletBands<double> small = dwt2d(Tensor<double>({2, 2, 3}));
    CHECK_THROWS_AS(swap_bands(bx, small, BandSwap::kLowLow), ShapeError);
}

TEST_SUITE_END();
