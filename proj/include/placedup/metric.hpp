#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "placedup/mat.hpp"
#include "placedup/rng.hpp"

namespace placedup {

enum class LossKind { Pairwise, Triplet };
enum class DistanceKind { Euclidean, Cosine, Bilinear };

inline const char* to_string(LossKind k) { return k == LossKind::Pairwise ? "pairwise" : "triplet"; }
inline const char* to_string(DistanceKind k) {
    switch (k) {
        case DistanceKind::Euclidean: return "euclidean";
        case DistanceKind::Cosine: return "cosine";
        default: return "bilinear";
    }
}

inline LossKind loss_kind_from(const std::string& s) {
    if (s == "pairwise") return LossKind::Pairwise;
    if (s == "triplet") return LossKind::Triplet;
    throw std::invalid_argument("unknown loss kind '" + s + "'");
}

inline DistanceKind distance_kind_from(const std::string& s) {
    if (s == "euclidean") return DistanceKind::Euclidean;
    if (s == "cosine") return DistanceKind::Cosine;
    if (s == "bilinear") return DistanceKind::Bilinear;
    throw std::invalid_argument("unknown distance kind '" + s + "'");
}

// Shared trunk MLP with a key head and a value head. The value embedding
// u_i = v(x_i) is the place embedding; key embeddings only feed the
// source-attention weights. q holds one vector per label source, sized
// 2 * dk to match the concatenated pair of keys.
struct MetricModel {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
    Mat wk;
    Vec bk;
    Mat wv;
    Vec bv;
    std::vector<std::string> sources;  // sorted
    Mat q;                             // S x (2 * dk)
    Mat bilinear;                      // dv x dv, empty unless distance == Bilinear
    double alpha = 1.0;
    DistanceKind distance = DistanceKind::Euclidean;
    LossKind loss = LossKind::Pairwise;

    int input_dim() const { return w1.cols; }
    int hidden1() const { return w1.rows; }
    int hidden2() const { return w2.rows; }
    int dk() const { return wk.rows; }
    int dv() const { return wv.rows; }

    int source_index(const std::string& s) const {
        auto it = std::lower_bound(sources.begin(), sources.end(), s);
        if (it == sources.end() || *it != s) throw std::invalid_argument("unregistered label source '" + s + "'");
        return static_cast<int>(it - sources.begin());
    }
};

inline MetricModel init_metric_model(int input_dim, int hidden1, int hidden2, int dk, int dv,
                                     std::vector<std::string> sources, DistanceKind distance, LossKind loss,
                                     double alpha, std::uint64_t seed) {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1 || dk < 1 || dv < 1)
        throw std::invalid_argument("init_metric_model: dimensions must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("init_metric_model: alpha must be > 0");
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

    Rng rng(seed);
    auto glorot = [&rng](Mat& m, int fan_in, int fan_out) {
        double r = std::sqrt(6.0 / (fan_in + fan_out));
        m.fill_uniform(rng, -r, r);
    };
    MetricModel m;
    m.w1 = Mat(hidden1, input_dim);
    glorot(m.w1, input_dim, hidden1);
    m.b1.assign(static_cast<std::size_t>(hidden1), 0.0);
    m.w2 = Mat(hidden2, hidden1);
    glorot(m.w2, hidden1, hidden2);
    m.b2.assign(static_cast<std::size_t>(hidden2), 0.0);
    m.wk = Mat(dk, hidden2);
    glorot(m.wk, hidden2, dk);
    m.bk.assign(static_cast<std::size_t>(dk), 0.0);
    m.wv = Mat(dv, hidden2);
    glorot(m.wv, hidden2, dv);
    m.bv.assign(static_cast<std::size_t>(dv), 0.0);
    m.q = Mat(static_cast<int>(sources.size()), 2 * dk);
    m.sources = std::move(sources);
    if (distance == DistanceKind::Bilinear) m.bilinear = Mat::identity(dv);
    m.alpha = alpha;
    m.distance = distance;
    m.loss = loss;
    return m;
}

// Forward pass cache; kept around for the hand-derived backward pass.
struct Forward {
    Vec x;
    Vec z1, h1;  // pre-activation and ReLU output of the first trunk layer
    Vec z2, h2;
    Vec key;
    Vec value;
};

inline Forward forward(const MetricModel& m, const Vec& x) {
    if (static_cast<int>(x.size()) != m.input_dim())
        throw std::invalid_argument("forward: input dimension " + std::to_string(x.size()) + " != " + std::to_string(m.input_dim()));
    Forward f;
    f.x = x;
    affine(m.w1, m.b1, f.x, f.z1);
    f.h1 = f.z1;
    for (double& v : f.h1) v = std::max(0.0, v);
    affine(m.w2, m.b2, f.h1, f.z2);
    f.h2 = f.z2;
    for (double& v : f.h2) v = std::max(0.0, v);
    affine(m.wk, m.bk, f.h2, f.key);
    affine(m.wv, m.bv, f.h2, f.value);
    return f;
}

// --- Distances ---------------------------------------------------------------

// Distance as reported by the model: squared L2, cosine distance, or the raw
// bilinear similarity score.
inline double distance_value(const MetricModel& m, const Vec& ua, const Vec& ub) {
    if (ua.size() != ub.size()) throw std::invalid_argument("distance: dimension mismatch");
    switch (m.distance) {
        case DistanceKind::Euclidean:
            return squared_l2(ua, ub);
        case DistanceKind::Cosine: {
            double na = norm2(ua), nb = norm2(ub);
            if (na < 1e-12 || nb < 1e-12) return 1.0;
            return 1.0 - dot(ua, ub) / (na * nb);
        }
        case DistanceKind::Bilinear: {
            if (m.bilinear.rows != static_cast<int>(ua.size())) throw std::invalid_argument("distance: bilinear matrix missing");
            double s = 0.0;
            for (int i = 0; i < m.bilinear.rows; ++i) s += ua[static_cast<std::size_t>(i)] * dot(m.bilinear.row(i), ub.data(), m.bilinear.cols);
            return s;
        }
    }
    return 0.0;
}

// Distance fed to losses and ranking; the bilinear similarity is negated so
// that smaller always means more alike.
inline double loss_distance(const MetricModel& m, const Vec& ua, const Vec& ub) {
    double v = distance_value(m, ua, ub);
    return m.distance == DistanceKind::Bilinear ? -v : v;
}

// Accumulates upstream * d(loss_distance)/d(ua, ub[, M]).
inline void loss_distance_grad(const MetricModel& m, const Vec& ua, const Vec& ub, double upstream, Vec& dua, Vec& dub,
                               Mat* dbilinear) {
    int n = static_cast<int>(ua.size());
    switch (m.distance) {
        case DistanceKind::Euclidean: {
            for (int i = 0; i < n; ++i) {
                double diff = 2.0 * (ua[static_cast<std::size_t>(i)] - ub[static_cast<std::size_t>(i)]) * upstream;
                dua[static_cast<std::size_t>(i)] += diff;
                dub[static_cast<std::size_t>(i)] -= diff;
            }
            break;
        }
        case DistanceKind::Cosine: {
            double na = norm2(ua), nb = norm2(ub);
            if (na < 1e-12 || nb < 1e-12) return;  // flat at the guard
            double ip = dot(ua, ub);
            for (int i = 0; i < n; ++i) {
                dua[static_cast<std::size_t>(i)] +=
                    upstream * (-(ub[static_cast<std::size_t>(i)] / (na * nb)) + ip * ua[static_cast<std::size_t>(i)] / (na * na * na * nb));
                dub[static_cast<std::size_t>(i)] +=
                    upstream * (-(ua[static_cast<std::size_t>(i)] / (na * nb)) + ip * ub[static_cast<std::size_t>(i)] / (nb * nb * nb * na));
            }
            break;
        }
        case DistanceKind::Bilinear: {
            // d = -ua' M ub
            for (int i = 0; i < n; ++i) {
                dua[static_cast<std::size_t>(i)] -= upstream * dot(m.bilinear.row(i), ub.data(), n);
                double s = 0.0;
                for (int r = 0; r < n; ++r) s += ua[static_cast<std::size_t>(r)] * m.bilinear.at(r, i);
                dub[static_cast<std::size_t>(i)] -= upstream * s;
            }
            if (dbilinear)
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < n; ++c) dbilinear->at(r, c) -= upstream * ua[static_cast<std::size_t>(r)] * ub[static_cast<std::size_t>(c)];
            break;
        }
    }
}

// --- Losses --------------------------------------------------------------------

// y * d + (1 - y) * max(0, alpha - d)
inline double pair_loss(double d, int y, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("pair_loss: alpha must be > 0");
    return y == 1 ? d : std::max(0.0, alpha - d);
}

inline double pair_loss_ddist(double d, int y, double alpha) {
    return y == 1 ? 1.0 : (d < alpha ? -1.0 : 0.0);
}

inline double pair_loss(const Vec& ua, const Vec& ub, int y, double alpha) {
    return pair_loss(squared_l2(ua, ub), y, alpha);
}

// max(0, d(a, p) - d(a, n) + alpha)
inline double triplet_loss(double d_ap, double d_an, double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("triplet_loss: alpha must be > 0");
    return std::max(0.0, d_ap - d_an + alpha);
}

inline double triplet_loss(const Vec& ua, const Vec& up, const Vec& un, double alpha) {
    return triplet_loss(squared_l2(ua, up), squared_l2(ua, un), alpha);
}

// --- Batch-wise hard sampling ----------------------------------------------------

// Signed score of a labeled pair: positives keep their distance, negatives
// negate it, so large scores mean "model currently gets this pair wrong".
inline double hard_sample_score(double d, int y) { return y == 1 ? d : -d; }

// Selects pairs whose score strictly exceeds the slack-scaled batch mean.
// A degenerate batch (nothing above the threshold) falls back to the single
// argmax pair so every batch yields a gradient.
inline std::vector<int> hard_select(const std::vector<double>& scores, double beta) {
    if (scores.empty()) throw std::invalid_argument("hard_select: empty batch");
    if (beta < 0.0) throw std::invalid_argument("hard_select: beta must be >= 0");
    double mean = 0.0;
    for (double s : scores) mean += s;
    double tau = beta * mean / static_cast<double>(scores.size());
    std::vector<int> out;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] > tau) out.push_back(static_cast<int>(i));
    if (out.empty()) {
        int best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i)
            if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        out.push_back(best);
    }
    return out;
}

// --- Source-oriented attention -----------------------------------------------------

// Softmax over all registered sources of [key_a, key_b]' q(s'), stabilized by
// max subtraction. Endpoint keys are concatenated in canonical id order.
inline Vec attention_all_weights(const MetricModel& m, const Vec& key_a, const Vec& key_b) {
    if (m.q.rows == 0) throw std::invalid_argument("attention: no registered sources");
    int dk = m.dk();
    if (static_cast<int>(key_a.size()) != dk || static_cast<int>(key_b.size()) != dk)
        throw std::invalid_argument("attention: key dimension mismatch");
    Vec scores(static_cast<std::size_t>(m.q.rows));
    for (int s = 0; s < m.q.rows; ++s) {
        const double* qs = m.q.row(s);
        scores[static_cast<std::size_t>(s)] = dot(key_a.data(), qs, dk) + dot(key_b.data(), qs + dk, dk);
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        z += s;
    }
    for (double& s : scores) s /= z;
    return scores;
}

inline double attention_weight(const MetricModel& m, const Vec& key_a, const Vec& key_b, int source) {
    Vec w = attention_all_weights(m, key_a, key_b);
    if (source < 0 || source >= static_cast<int>(w.size())) throw std::invalid_argument("attention: source index out of range");
    return w[static_cast<std::size_t>(source)];
}

}  // namespace placedup
