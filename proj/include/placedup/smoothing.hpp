#pragma once

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "placedup/mat.hpp"
#include "placedup/network.hpp"
#include "placedup/rng.hpp"

namespace placedup {

struct SmoothingConfig {
    int k_neg = 5;
    double lr = 0.05;
    double lr_floor = 1e-4;
    std::int64_t steps = 0;  // 0 -> 10 * n_places + 10000
    double noise_exponent = 0.75;
    std::uint64_t seed = 1;
    int threads = 1;  // >1 enables the lock-free mode (nondeterministic)

    void validate() const {
        if (k_neg < 1) throw std::invalid_argument("SmoothingConfig: k_neg must be >= 1");
        if (lr <= 0.0) throw std::invalid_argument("SmoothingConfig: lr must be > 0");
        if (steps < 0) throw std::invalid_argument("SmoothingConfig: steps must be >= 0");
        if (threads < 1) throw std::invalid_argument("SmoothingConfig: threads must be >= 1");
    }
};

// Smoothing map g(x) = tanh(W x + b) plus a per-place context table phi.
// W starts near identity so training begins from the unsmoothed features.
struct SmoothingModel {
    Mat w;    // D x D
    Vec b;    // D
    Mat phi;  // N x D

    Vec apply(const Vec& x) const {
        Vec y;
        affine(w, b, x, y);
        for (double& v : y) v = std::tanh(v);
        return y;
    }
};

inline SmoothingModel init_smoothing_model(int dim, int n_places, std::uint64_t seed) {
    Rng rng(seed);
    SmoothingModel m;
    m.w = Mat::identity(dim);
    for (double& v : m.w.a) v += rng.normal(0.0, 0.01);
    m.b.assign(static_cast<std::size_t>(dim), 0.0);
    m.phi = Mat(n_places, dim);
    return m;
}

// Per-sample pieces, shared by the trainer and the gradient tests.
// One sample group: center i with feature x, positive context c, k negatives.
// Loss = -log sigmoid(phi_c . g(x)) - sum_n log sigmoid(-phi_n . g(x)).
struct SmoothingGrad {
    double loss = 0.0;
    Mat dw;
    Vec db;
    std::vector<std::pair<int, Vec>> dphi;  // touched context rows
};

inline SmoothingGrad smoothing_sample_grad(const SmoothingModel& m, const Vec& x, int pos, const std::vector<int>& negs) {
    int dim = m.w.rows;
    SmoothingGrad out;
    out.dw = Mat(dim, dim);
    out.db.assign(static_cast<std::size_t>(dim), 0.0);

    Vec pre;
    affine(m.w, m.b, x, pre);
    Vec g(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) g[i] = std::tanh(pre[i]);

    Vec dg(static_cast<std::size_t>(dim), 0.0);
    auto accumulate = [&](int ctx, double gamma) {
        const double* phi = m.phi.row(ctx);
        double score = dot(phi, g.data(), dim);
        out.loss -= log_sigmoid(gamma * score);
        // d/dscore of -log sigmoid(gamma * score) = -gamma * sigmoid(-gamma * score)
        double ds = -gamma * sigmoid(-gamma * score);
        axpy(ds, phi, dg.data(), dim);
        Vec dphi_row(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k) dphi_row[static_cast<std::size_t>(k)] = ds * g[static_cast<std::size_t>(k)];
        out.dphi.emplace_back(ctx, std::move(dphi_row));
    };
    accumulate(pos, 1.0);
    for (int n : negs) accumulate(n, -1.0);

    for (int r = 0; r < dim; ++r) {
        double dpre = dg[static_cast<std::size_t>(r)] * (1.0 - g[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(r)]);
        out.db[static_cast<std::size_t>(r)] = dpre;
        double* wrow = out.dw.row(r);
        for (int c = 0; c < dim; ++c) wrow[c] = dpre * x[static_cast<std::size_t>(c)];
    }
    return out;
}

// Loss of a single (center, context, gamma) sample at the current model; the
// per-sample unit the expectation in the objective ranges over.
inline double smoothing_sample_loss(const SmoothingModel& m, const Vec& x, int ctx, double gamma) {
    Vec g = m.apply(x);
    return -log_sigmoid(gamma * dot(m.phi.row(ctx), g.data(), m.w.rows));
}

struct SmoothingResult {
    SmoothingModel model;
    Mat smoothed;  // N x D, row i = g(x_i)
    bool trained = false;
    std::string warning;
};

// Negative-sampling SGD on the place network. Positives are uniform edge
// draws, mixed 50/50 between coordinate and category edges when both exist;
// negatives follow degree^noise_exponent over all places.
inline SmoothingResult train_smoothing(const Mat& features, const PlaceNetwork& net, const SmoothingConfig& cfg) {
    cfg.validate();
    if (features.rows != net.size()) throw std::invalid_argument("train_smoothing: features/network size mismatch");
    int n = features.rows;
    int dim = features.cols;

    SmoothingResult res;
    res.model = init_smoothing_model(dim, n, cfg.seed);

    auto emit = [&]() {
        res.smoothed = Mat(n, dim);
        for (int i = 0; i < n; ++i) {
            Vec y = res.model.apply(features.row_vec(i));
            std::copy(y.begin(), y.end(), res.smoothed.row(i));
        }
    };

    bool coord_edges = net.coord_edge_count() > 0;
    bool cat_edges = net.has_category_edges();
    if (!coord_edges && !cat_edges) {
        res.warning = "place network has no edges; features passed through the identity-initialized map";
        emit();
        return res;
    }

    std::vector<double> deg = net.degrees();
    for (double& d : deg) d = std::pow(d, cfg.noise_exponent);
    DiscreteSampler noise(deg);

    std::int64_t steps = cfg.steps > 0 ? cfg.steps : 10LL * n + 10000;

    auto run_steps = [&](Rng& rng, std::int64_t count, std::int64_t step_base, std::int64_t total) {
        std::vector<int> negs;
        for (std::int64_t s = 0; s < count; ++s) {
            double lr = cfg.lr * std::max(cfg.lr_floor, 1.0 - static_cast<double>(step_base + s) / static_cast<double>(total));
            bool use_coord = coord_edges && (!cat_edges || rng.bernoulli(0.5));
            auto [i, c] = use_coord ? net.sample_coord_edge(rng) : net.sample_cat_edge(rng);
            negs.clear();
            for (int k = 0; k < cfg.k_neg; ++k) {
                int v = static_cast<int>(noise.sample(rng));
                for (int tries = 0; v == c && tries < 8; ++tries) v = static_cast<int>(noise.sample(rng));
                negs.push_back(v);
            }
            SmoothingGrad grad = smoothing_sample_grad(res.model, features.row_vec(i), c, negs);
            axpy(-lr, grad.dw.a.data(), res.model.w.a.data(), static_cast<int>(grad.dw.a.size()));
            axpy(-lr, grad.db.data(), res.model.b.data(), dim);
            for (const auto& [row, dphi] : grad.dphi) axpy(-lr, dphi.data(), res.model.phi.row(row), dim);
        }
    };

    if (cfg.threads <= 1) {
        Rng rng(cfg.seed + 0x5eedULL);
        run_steps(rng, steps, 0, steps);
    } else {
        std::vector<std::thread> workers;
        std::int64_t chunk = (steps + cfg.threads - 1) / cfg.threads;
        for (int t = 0; t < cfg.threads; ++t) {
            workers.emplace_back([&, t]() {
                Rng rng(cfg.seed + 0x5eedULL + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(t + 1));
                std::int64_t lo = static_cast<std::int64_t>(t) * chunk;
                std::int64_t count = std::min(chunk, steps - lo);
                if (count > 0) run_steps(rng, count, lo, steps);
            });
        }
        for (auto& w : workers) w.join();
    }

    res.trained = true;
    emit();
    return res;
}

// Diagnostic for the smoothing effect: mean squared distance among same-bin
// pairs over mean squared distance among all pairs (subsampled uniformly when
// the pair count explodes).
inline double same_bin_distance_ratio(const Mat& x, const PlaceNetwork& net, std::int64_t max_pairs = 200000,
                                      std::uint64_t seed = 11) {
    double same_sum = 0.0;
    std::int64_t same_n = 0;
    for (const auto& members : net.bin_members()) {
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                same_sum += squared_l2(x.row(members[i]), x.row(members[j]), x.cols);
                ++same_n;
            }
        if (same_n > max_pairs) break;
    }
    if (same_n == 0) throw std::invalid_argument("same_bin_distance_ratio: no same-bin pairs");

    Rng rng(seed);
    double all_sum = 0.0;
    std::int64_t all_n = 0;
    std::int64_t want = std::min<std::int64_t>(max_pairs, static_cast<std::int64_t>(x.rows) * (x.rows - 1) / 2);
    while (all_n < want) {
        int i = rng.uniform_int(x.rows);
        int j = rng.uniform_int(x.rows);
        if (i == j) continue;
        all_sum += squared_l2(x.row(i), x.row(j), x.cols);
        ++all_n;
    }
    return (same_sum / static_cast<double>(same_n)) / (all_sum / static_cast<double>(all_n));
}

}  // namespace placedup
