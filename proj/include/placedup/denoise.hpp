#pragma once

#include <cmath>
#include <vector>

#include "placedup/mat.hpp"
#include "placedup/rng.hpp"

namespace placedup {

constexpr double kDenoiseEps = 1e-12;  // floor inside the KL log

// Soft assignment of an embedding to cluster centers under a Student-t
// kernel with one degree of freedom:
//   d_k = (1 + ||u - c_k||^2)^-1 / sum_j (1 + ||u - c_j||^2)^-1
inline Vec soft_assign(const Vec& u, const Mat& centers) {
    if (centers.rows < 1) throw std::invalid_argument("soft_assign: need at least one center");
    if (static_cast<int>(u.size()) != centers.cols) throw std::invalid_argument("soft_assign: dimension mismatch");
    Vec d(static_cast<std::size_t>(centers.rows));
    double z = 0.0;
    for (int k = 0; k < centers.rows; ++k) {
        double t = 1.0 / (1.0 + squared_l2(u.data(), centers.row(k), centers.cols));
        d[static_cast<std::size_t>(k)] = t;
        z += t;
    }
    for (double& v : d) v /= z;
    return d;
}

inline Mat soft_assign_all(const Mat& u, const Mat& centers) {
    Mat d(u.rows, centers.rows);
    for (int i = 0; i < u.rows; ++i) {
        Vec row = soft_assign(u.row_vec(i), centers);
        std::copy(row.begin(), row.end(), d.row(i));
    }
    return d;
}

// Auxiliary target: assignments squared, divided by soft cluster mass
// g_k = sum_i d_ik, renormalized per row.
inline Mat target_dist(const Mat& d) {
    Vec mass(static_cast<std::size_t>(d.cols), 0.0);
    for (int i = 0; i < d.rows; ++i)
        for (int k = 0; k < d.cols; ++k) mass[static_cast<std::size_t>(k)] += d.at(i, k);
    Mat c(d.rows, d.cols);
    for (int i = 0; i < d.rows; ++i) {
        double z = 0.0;
        for (int k = 0; k < d.cols; ++k) {
            double g = mass[static_cast<std::size_t>(k)];
            double v = g > 0.0 ? d.at(i, k) * d.at(i, k) / g : 0.0;
            c.at(i, k) = v;
            z += v;
        }
        if (z > 0.0)
            for (int k = 0; k < d.cols; ++k) c.at(i, k) /= z;
    }
    return c;
}

// rho * KL(C || D) accumulated over rows; c is a constant target.
inline double denoise_loss_row(const double* c, const double* d, int k, double rho) {
    double kl = 0.0;
    for (int j = 0; j < k; ++j) {
        if (c[j] <= 0.0) continue;  // 0 log 0 = 0
        kl += c[j] * std::log(c[j] / std::max(d[j], kDenoiseEps));
    }
    return rho * kl;
}

inline double denoise_loss(const Mat& d, const Mat& c, double rho) {
    if (d.rows != c.rows || d.cols != c.cols) throw std::invalid_argument("denoise_loss: shape mismatch");
    double total = 0.0;
    for (int i = 0; i < d.rows; ++i) total += denoise_loss_row(c.row(i), d.row(i), d.cols, rho);
    return total;
}

// Gradient of KL(c || d(u)) for one embedding, with d recomputed from u and
// the centers. Accumulates scale * dKL into du and dcenters.
inline void denoise_grad_row(const Vec& u, const Mat& centers, const double* c, double scale, Vec& du, Mat& dcenters) {
    int k = centers.rows;
    int dim = centers.cols;
    Vec t(static_cast<std::size_t>(k));
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
        t[static_cast<std::size_t>(j)] = 1.0 / (1.0 + squared_l2(u.data(), centers.row(j), dim));
        z += t[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < k; ++j) {
        double tj = t[static_cast<std::size_t>(j)];
        double dj = tj / z;
        double coeff = 2.0 * scale * tj * (c[j] - dj);
        const double* cj = centers.row(j);
        double* dcj = dcenters.row(j);
        for (int m = 0; m < dim; ++m) {
            double diff = u[static_cast<std::size_t>(m)] - cj[m];
            du[static_cast<std::size_t>(m)] += coeff * diff;
            dcj[m] -= coeff * diff;
        }
    }
}

// k-means++ seeding followed by Lloyd iterations until the assignment reaches
// a fixpoint or the iteration cap. Deterministic given the seed.
inline Mat init_centers(const Mat& points, int k, std::uint64_t seed, int max_iters = 100) {
    if (k < 1) throw std::invalid_argument("init_centers: k must be >= 1");
    if (points.rows < k) throw std::invalid_argument("init_centers: fewer points than clusters");
    int n = points.rows, dim = points.cols;
    Rng rng(seed);

    std::vector<int> chosen;
    chosen.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(n))));
    Vec best_d(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) best_d[static_cast<std::size_t>(i)] = squared_l2(points.row(i), points.row(chosen[0]), dim);
    while (static_cast<int>(chosen.size()) < k) {
        DiscreteSampler sampler(best_d);
        int next = sampler.empty() ? static_cast<int>(rng.index(static_cast<std::size_t>(n))) : static_cast<int>(sampler.sample(rng));
        chosen.push_back(next);
        for (int i = 0; i < n; ++i) {
            double d = squared_l2(points.row(i), points.row(next), dim);
            if (d < best_d[static_cast<std::size_t>(i)]) best_d[static_cast<std::size_t>(i)] = d;
        }
    }

    Mat centers(k, dim);
    for (int j = 0; j < k; ++j) std::copy(points.row(chosen[static_cast<std::size_t>(j)]), points.row(chosen[static_cast<std::size_t>(j)]) + dim, centers.row(j));

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = squared_l2(points.row(i), centers.row(0), dim);
            for (int j = 1; j < k; ++j) {
                double d = squared_l2(points.row(i), centers.row(j), dim);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        Mat sums(k, dim);
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            int j = assign[static_cast<std::size_t>(i)];
            axpy(1.0, points.row(i), sums.row(j), dim);
            ++counts[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] == 0) continue;  // empty cluster keeps its center
            double inv = 1.0 / counts[static_cast<std::size_t>(j)];
            double* row = centers.row(j);
            for (int m = 0; m < dim; ++m) row[m] = sums.at(j, m) * inv;
        }
    }
    return centers;
}

}  // namespace placedup
