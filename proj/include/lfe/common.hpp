#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lfe {

// Error taxonomy. The CLI maps these onto process exit codes:
// input/shape/parameter/version -> 1, numeric -> 2, I/O -> 3.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

// Deterministic RNG. mt19937_64 is fully pinned by the standard; the
// uniform/normal mappings are spelled out here instead of using
// std::*_distribution, whose streams vary across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller with a cached spare.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Inclusive range. Modulo bias is irrelevant here; determinism is not.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(gen_() % static_cast<uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ----- scalar activations (with derivatives for the tape) -----

template <typename T>
T sigmoid_s(T x) {
    if (x >= T(0)) {
        T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T gelu_s(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
}

template <typename T>
T gelu_grad_s(T x) {
    T cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
    T pdf = T(0.3989422804014326779) * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

template <typename T>
T silu_s(T x) {
    return x * sigmoid_s(x);
}

template <typename T>
T silu_grad_s(T x) {
    T s = sigmoid_s(x);
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
T softplus_s(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T softplus_grad_s(T x) {
    return sigmoid_s(x);
}

}  // namespace lfe
