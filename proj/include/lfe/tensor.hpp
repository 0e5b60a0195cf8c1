#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "lfe/common.hpp"

namespace lfe {

// Dense row-major tensor, last dimension fastest. Feature maps are rank-3
// (height, width, channels); scan sequences rank-2 (steps, dims); conv
// kernels rank-4 (ky, kx, in_channels, out_channels).
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> dims, T fill = T(0)) : dims_(std::move(dims)) {
        long long n = 1;
        for (int d : dims_) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive");
            n *= d;
        }
        data_.assign(static_cast<size_t>(n), fill);
    }

    Tensor(std::vector<int> dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        if (static_cast<long long>(data_.size()) != compute_numel(dims_))
            throw ShapeError("tensor data length does not match shape");
    }

    static long long compute_numel(const std::vector<int>& dims) {
        long long n = 1;
        for (int d : dims) n *= d;
        return n;
    }

    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(dims_.size()); }
    long long numel() const { return static_cast<long long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

    // rank-2 (rows, cols)
    T& at2(int r, int c) { return data_[static_cast<size_t>(r) * dims_[1] + c]; }
    const T& at2(int r, int c) const { return data_[static_cast<size_t>(r) * dims_[1] + c]; }

    // rank-3 (y, x, c)
    T& at3(int y, int x, int c) {
        return data_[(static_cast<size_t>(y) * dims_[1] + x) * dims_[2] + c];
    }
    const T& at3(int y, int x, int c) const {
        return data_[(static_cast<size_t>(y) * dims_[1] + x) * dims_[2] + c];
    }

    // rank-4 (a, b, c, d)
    T& at4(int a, int b, int c, int d) {
        return data_[((static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c) * dims_[3] + d];
    }
    const T& at4(int a, int b, int c, int d) const {
        return data_[((static_cast<size_t>(a) * dims_[1] + b) * dims_[2] + c) * dims_[3] + d];
    }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    Tensor reshaped(std::vector<int> new_dims) const {
        if (compute_numel(new_dims) != numel()) throw ShapeError("reshape changes element count");
        Tensor out;
        out.dims_ = std::move(new_dims);
        out.data_ = data_;
        return out;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
        os << ")";
        return os.str();
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.dims()); }

    static Tensor full(std::vector<int> dims, T v) { return Tensor(std::move(dims), v); }

    static Tensor random_normal(std::vector<int> dims, Rng& rng, T stddev) {
        Tensor t(std::move(dims));
        for (auto& v : t.data_) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static Tensor random_uniform(std::vector<int> dims, Rng& rng, T lo, T hi) {
        Tensor t(std::move(dims));
        for (auto& v : t.data_) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

private:
    std::vector<int> dims_;
    std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (long long i = 0; i < t.numel(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& stage) {
    if (!all_finite(t)) throw NumericError("non-finite values at stage: " + stage);
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "max_abs_diff");
    T m = T(0);
    for (long long i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename T>
T sum_squares(const Tensor<T>& t) {
    T s = T(0);
    for (long long i = 0; i < t.numel(); ++i) s += t[i] * t[i];
    return s;
}

}  // namespace lfe
