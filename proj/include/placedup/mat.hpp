#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "placedup/rng.hpp"

namespace placedup {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. All model parameters live in these.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }
    std::size_t size() const { return a.size(); }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (double& x : a) x = rng.uniform(lo, hi);
    }

    void fill_normal(Rng& rng, double mean, double sigma) {
        for (double& x : a) x = rng.normal(mean, sigma);
    }

    Vec row_vec(int i) const { return Vec(row(i), row(i) + cols); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline double dot(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double dot(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
    return dot(x.data(), y.data(), static_cast<int>(x.size()));
}

inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline double squared_l2(const double* x, const double* y, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

inline double squared_l2(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("squared_l2: dimension mismatch");
    return squared_l2(x.data(), y.data(), static_cast<int>(x.size()));
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x.data(), x.data(), static_cast<int>(x.size()))); }

// y = W x + b, W is (out x in)
inline void affine(const Mat& w, const Vec& b, const Vec& x, Vec& y) {
    if (static_cast<int>(x.size()) != w.cols || static_cast<int>(b.size()) != w.rows)
        throw std::invalid_argument("affine: dimension mismatch");
    y.assign(static_cast<std::size_t>(w.rows), 0.0);
    for (int i = 0; i < w.rows; ++i) y[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] + dot(w.row(i), x.data(), w.cols);
}

// Numerically stable logistic helpers.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x))
inline double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Mat& m) {
    for (double x : m.a)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace placedup
