// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "splm/common.hpp"

namespace splm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// Dense row-major tensor. T is float for training, double for gradient-check
// mode; the whole model stack is templated on it.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size()) {
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    static Tensor zeros(Shape s) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<T>(n, T(0)));
    }

    static Tensor full(Shape s, T v) {
        std::size_t n = shape_numel(s);
        return Tensor(std::move(s), std::vector<T>(n, v));
    }

    static Tensor scalar(T v) { return Tensor({1, 1}, {v}); }

    static Tensor row(std::initializer_list<T> vals) {
        return Tensor({1, vals.size()}, std::vector<T>(vals));
    }

    static Tensor vec(std::initializer_list<T> vals) {
        return Tensor({vals.size()}, std::vector<T>(vals));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    // 2-D accessors; 1-D tensors are treated as a single row.
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.size() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]); }

    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
    }

    void fill_normal(Rng& rng, double mean, double stddev) {
        for (auto& v : data) v = static_cast<T>(rng.normal(mean, stddev));
    }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64(shape.data(), shape.size() * sizeof(std::size_t));
        return fnv1a64(data.data(), data.size() * sizeof(T), h);
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// Raw matrix kernels shared by forward ops and their backward passes.
// A, B, C are row-major. "nn" = A*B, "nt" = A*B^T, "tn" = A^T*B.
// accumulate=true adds into C instead of overwriting.
// ---------------------------------------------------------------------------

template <typename T>
void mm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
           bool accumulate = false) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = T(0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void mm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
           bool accumulate = false) {
    // a: m x k, b: n x k, c: m x n
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = accumulate ? crow[j] : T(0);
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

template <typename T>
void mm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
           bool accumulate = false) {
    // a: k x m, b: k x n, c: m x n
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) c[i] = T(0);
    }
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Exact erf-based GELU.
template <typename T>
T gelu_scalar(T x) {
    return static_cast<T>(0.5 * static_cast<double>(x) *
                          (1.0 + std::erf(static_cast<double>(x) * 0.70710678118654752440)));
}

template <typename T>
T gelu_grad_scalar(T x) {
    double xd = static_cast<double>(x);
    double cdf = 0.5 * (1.0 + std::erf(xd * 0.70710678118654752440));
    double pdf = std::exp(-0.5 * xd * xd) * 0.39894228040143267794;  // N(0,1) density
    return static_cast<T>(cdf + xd * pdf);
}

template <typename T>
T sigmoid_scalar(T x) {
    double xd = static_cast<double>(x);
    if (xd >= 0) {
        return static_cast<T>(1.0 / (1.0 + std::exp(-xd)));
    }
    double e = std::exp(xd);
    return static_cast<T>(e / (1.0 + e));
}

}  // namespace splm
