#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "placedup/denoise.hpp"
#include "placedup/metric.hpp"
#include "placedup/util.hpp"

namespace placedup {

// One labeled training pair over the feature matrix; endpoints keep the
// canonical id order of the underlying label.
struct PairSample {
    int a = 0;
    int b = 0;
    int y = 0;
    int source = 0;  // index into the model's sorted source list
};

struct TrainConfig {
    LossKind loss = LossKind::Pairwise;
    DistanceKind distance = DistanceKind::Euclidean;
    double lr = 0.05;
    double momentum = 0.9;
    int epochs = 30;
    int batch_size = 128;
    double alpha = 1.0;
    // component toggles
    bool hard = false;
    double beta = 1.0;
    bool attention = false;
    bool denoise = false;
    double rho = 0.5;
    int clusters = 0;  // 0 -> round(sqrt(N))
    int refresh_interval = 100;
    int warmup_epochs = 1;
    int kmeans_max_iters = 100;
    // architecture
    int hidden1 = 64;
    int hidden2 = 64;
    int dk = 16;
    int dv = 32;
    std::uint64_t seed = 1;
    // training-loss probes (for convergence studies); 0 disables
    int probe_interval = 0;
    int probe_pairs = 2000;

    void validate() const {
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
        if (alpha <= 0.0) throw std::invalid_argument("TrainConfig: alpha must be > 0");
        if (beta < 0.0) throw std::invalid_argument("TrainConfig: beta must be >= 0");
        if (rho < 0.0) throw std::invalid_argument("TrainConfig: rho must be >= 0");
        if (refresh_interval < 1) throw std::invalid_argument("TrainConfig: refresh_interval must be >= 1");
        if (warmup_epochs < 0) throw std::invalid_argument("TrainConfig: warmup_epochs must be >= 0");
    }
};

// Gradient (or momentum) buffers mirroring the model parameters plus the
// denoising centers.
struct MetricGrads {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
    Mat wk;
    Vec bk;
    Mat wv;
    Vec bv;
    Mat q;
    Mat bilinear;
    Mat centers;

    static MetricGrads like(const MetricModel& m, const Mat* centers) {
        MetricGrads g;
        g.w1 = Mat(m.w1.rows, m.w1.cols);
        g.b1.assign(m.b1.size(), 0.0);
        g.w2 = Mat(m.w2.rows, m.w2.cols);
        g.b2.assign(m.b2.size(), 0.0);
        g.wk = Mat(m.wk.rows, m.wk.cols);
        g.bk.assign(m.bk.size(), 0.0);
        g.wv = Mat(m.wv.rows, m.wv.cols);
        g.bv.assign(m.bv.size(), 0.0);
        g.q = Mat(m.q.rows, m.q.cols);
        if (!m.bilinear.empty()) g.bilinear = Mat(m.bilinear.rows, m.bilinear.cols);
        if (centers && !centers->empty()) g.centers = Mat(centers->rows, centers->cols);
        return g;
    }
};

// Named flat views over every parameter group; the same traversal serves the
// optimizer and the finite-difference oracle.
struct ParamView {
    std::string name;
    double* data;
    std::size_t size;
};

namespace detail {

template <typename M>
inline void push_views(M& m, std::vector<ParamView>& out) {
    out.push_back({"trunk_w1", m.w1.a.data(), m.w1.a.size()});
    out.push_back({"trunk_b1", m.b1.data(), m.b1.size()});
    out.push_back({"trunk_w2", m.w2.a.data(), m.w2.a.size()});
    out.push_back({"trunk_b2", m.b2.data(), m.b2.size()});
    out.push_back({"key_w", m.wk.a.data(), m.wk.a.size()});
    out.push_back({"key_b", m.bk.data(), m.bk.size()});
    out.push_back({"value_w", m.wv.a.data(), m.wv.a.size()});
    out.push_back({"value_b", m.bv.data(), m.bv.size()});
    out.push_back({"source_q", m.q.a.data(), m.q.a.size()});
    if (!m.bilinear.empty()) out.push_back({"bilinear_m", m.bilinear.a.data(), m.bilinear.a.size()});
}

}  // namespace detail

inline std::vector<ParamView> param_views(MetricModel& m, Mat* centers = nullptr) {
    std::vector<ParamView> out;
    detail::push_views(m, out);
    if (centers && !centers->empty()) out.push_back({"centers", centers->a.data(), centers->a.size()});
    return out;
}

inline std::vector<ParamView> grad_views(MetricGrads& g, bool with_centers) {
    std::vector<ParamView> out;
    detail::push_views(g, out);
    if (with_centers && !g.centers.empty()) out.push_back({"centers", g.centers.a.data(), g.centers.a.size()});
    return out;
}

// Soft-clustering state carried across steps. `target` rows are the constant
// c_i for every place, refreshed every refresh_interval steps.
struct DenoisingState {
    Mat centers;  // K x dv
    Mat target;   // N x K
    bool active = false;
    double rho = 0.0;
};

struct BatchResult {
    double objective = 0.0;     // what the optimizer descends
    double monitor_loss = 0.0;  // unweighted mean base loss over the full batch
    int selected = 0;
    MetricGrads grads;
};

// Loss and hand-derived gradients for one mini-batch. Covers the pairwise and
// triplet losses, batch-wise hard sampling, source attention, and the
// soft-clustering KL term for every distinct place touched by the batch (plus
// extra_places, which lets callers evaluate a denoise-only objective).
//
// Objective: sum_{l in selected} w_l * loss_l / |selected|
//          + rho * mean_{i in places} KL(c_i || d_i).
inline BatchResult metric_batch(const MetricModel& model, const Mat& features, const std::vector<PairSample>& batch,
                                const TrainConfig& cfg, const DenoisingState* dn, Rng& rng,
                                const std::map<int, std::vector<int>>* nondups_of = nullptr,
                                const std::vector<int>& extra_places = {}) {
    BatchResult res;
    bool dn_active = dn && dn->active && !dn->centers.empty();
    res.grads = MetricGrads::like(model, dn_active ? &dn->centers : nullptr);

    // Forward every distinct place once.
    std::unordered_map<int, int> slot_of;
    std::vector<int> place_ids;
    std::vector<Forward> fwd;
    auto slot = [&](int place) {
        auto it = slot_of.find(place);
        if (it != slot_of.end()) return it->second;
        int s = static_cast<int>(fwd.size());
        slot_of.emplace(place, s);
        place_ids.push_back(place);
        fwd.push_back(forward(model, features.row_vec(place)));
        return s;
    };
    for (const auto& p : batch) {
        slot(p.a);
        slot(p.b);
    }
    for (int p : extra_places) slot(p);

    int dv = model.dv();
    int dk = model.dk();

    // Triplets are synthesized up front so every touched place is slotted
    // before the gradient accumulators are sized.
    struct Triplet {
        int a, p, n, source;
    };
    std::vector<Triplet> triplets;          // one per positive batch pair (when a negative exists)
    std::vector<int> triplet_pair_index;    // batch index the triplet came from
    if (!batch.empty() && model.loss == LossKind::Triplet) {
        std::vector<int> pool;
        pool.reserve(slot_of.size());
        for (const auto& [place, s] : slot_of) {
            (void)s;
            pool.push_back(place);
        }
        std::sort(pool.begin(), pool.end());
        for (std::size_t l = 0; l < batch.size(); ++l) {
            const auto& pr = batch[l];
            if (pr.y != 1) continue;
            int neg = -1;
            if (nondups_of) {
                auto it = nondups_of->find(pr.a);
                if (it != nondups_of->end() && !it->second.empty()) neg = it->second[rng.index(it->second.size())];
            }
            if (neg < 0 && pool.size() > 2) {
                for (int tries = 0; tries < 16 && neg < 0; ++tries) {
                    int cand = pool[rng.index(pool.size())];
                    if (cand != pr.a && cand != pr.b) neg = cand;
                }
            }
            if (neg >= 0) {
                triplets.push_back({pr.a, pr.b, neg, pr.source});
                triplet_pair_index.push_back(static_cast<int>(l));
            }
        }
        for (const auto& t : triplets) slot(t.n);
    }

    std::vector<Vec> dvalue(fwd.size(), Vec(static_cast<std::size_t>(dv), 0.0));
    std::vector<Vec> dkey(fwd.size(), Vec(static_cast<std::size_t>(dk), 0.0));

    if (!batch.empty() && model.loss == LossKind::Pairwise) {
        std::vector<double> dist(batch.size());
        std::vector<double> base(batch.size());
        for (std::size_t l = 0; l < batch.size(); ++l) {
            const auto& p = batch[l];
            dist[l] = loss_distance(model, fwd[static_cast<std::size_t>(slot(p.a))].value, fwd[static_cast<std::size_t>(slot(p.b))].value);
            base[l] = pair_loss(dist[l], p.y, cfg.alpha);
            res.monitor_loss += base[l];
        }
        res.monitor_loss /= static_cast<double>(batch.size());

        std::vector<int> selected;
        if (cfg.hard) {
            std::vector<double> scores(batch.size());
            for (std::size_t l = 0; l < batch.size(); ++l) scores[l] = hard_sample_score(dist[l], batch[l].y);
            selected = hard_select(scores, cfg.beta);
        } else {
            selected.resize(batch.size());
            for (std::size_t l = 0; l < batch.size(); ++l) selected[l] = static_cast<int>(l);
        }
        res.selected = static_cast<int>(selected.size());
        double coeff = 1.0 / static_cast<double>(selected.size());

        for (int li : selected) {
            const auto& p = batch[static_cast<std::size_t>(li)];
            int sa = slot(p.a), sb = slot(p.b);
            double w = 1.0;
            Vec weights;
            if (cfg.attention) {
                weights = attention_all_weights(model, fwd[static_cast<std::size_t>(sa)].key, fwd[static_cast<std::size_t>(sb)].key);
                w = weights[static_cast<std::size_t>(p.source)];
            }
            double loss_l = base[static_cast<std::size_t>(li)];
            res.objective += coeff * w * loss_l;

            // through the distance
            double up_d = coeff * w * pair_loss_ddist(dist[static_cast<std::size_t>(li)], p.y, cfg.alpha);
            if (up_d != 0.0)
                loss_distance_grad(model, fwd[static_cast<std::size_t>(sa)].value, fwd[static_cast<std::size_t>(sb)].value, up_d,
                                   dvalue[static_cast<std::size_t>(sa)], dvalue[static_cast<std::size_t>(sb)],
                                   res.grads.bilinear.empty() ? nullptr : &res.grads.bilinear);

            // through the attention weight: dJ/dz_s' = coeff * loss * w * (delta - w_s')
            if (cfg.attention) {
                double up_w = coeff * loss_l;
                for (int s = 0; s < model.q.rows; ++s) {
                    double dz = up_w * w * ((s == p.source ? 1.0 : 0.0) - weights[static_cast<std::size_t>(s)]);
                    if (dz == 0.0) continue;
                    const double* qs = model.q.row(s);
                    double* gq = res.grads.q.row(s);
                    for (int j = 0; j < dk; ++j) {
                        gq[j] += dz * fwd[static_cast<std::size_t>(sa)].key[static_cast<std::size_t>(j)];
                        gq[dk + j] += dz * fwd[static_cast<std::size_t>(sb)].key[static_cast<std::size_t>(j)];
                        dkey[static_cast<std::size_t>(sa)][static_cast<std::size_t>(j)] += dz * qs[j];
                        dkey[static_cast<std::size_t>(sb)][static_cast<std::size_t>(j)] += dz * qs[dk + j];
                    }
                }
            }
        }
    } else if (!batch.empty()) {
        // Triplet alternative: anchors come from positive pairs; the negative
        // is a labeled non-duplicate of the anchor when one exists, otherwise
        // a random distinct batch place. Hard selection runs on the labeled
        // pairs; only triplets from selected pairs contribute gradients.
        for (const auto& t : triplets) {
            double d_ap = loss_distance(model, fwd[static_cast<std::size_t>(slot(t.a))].value, fwd[static_cast<std::size_t>(slot(t.p))].value);
            double d_an = loss_distance(model, fwd[static_cast<std::size_t>(slot(t.a))].value, fwd[static_cast<std::size_t>(slot(t.n))].value);
            res.monitor_loss += triplet_loss(d_ap, d_an, cfg.alpha);
        }
        if (!triplets.empty()) res.monitor_loss /= static_cast<double>(triplets.size());

        std::vector<bool> pair_selected(batch.size(), true);
        if (cfg.hard) {
            std::vector<double> scores(batch.size());
            for (std::size_t l = 0; l < batch.size(); ++l) {
                const auto& p = batch[l];
                double d = loss_distance(model, fwd[static_cast<std::size_t>(slot(p.a))].value,
                                         fwd[static_cast<std::size_t>(slot(p.b))].value);
                scores[l] = hard_sample_score(d, p.y);
            }
            pair_selected.assign(batch.size(), false);
            for (int li : hard_select(scores, cfg.beta)) pair_selected[static_cast<std::size_t>(li)] = true;
        }
        std::vector<Triplet> active;
        for (std::size_t t = 0; t < triplets.size(); ++t)
            if (pair_selected[static_cast<std::size_t>(triplet_pair_index[t])]) active.push_back(triplets[t]);

        res.selected = static_cast<int>(active.size());
        if (!active.empty()) {
            double coeff = 1.0 / static_cast<double>(active.size());
            for (const auto& t : active) {
                int sa = slot(t.a), sp = slot(t.p), sn = slot(t.n);
                double d_ap = loss_distance(model, fwd[static_cast<std::size_t>(sa)].value, fwd[static_cast<std::size_t>(sp)].value);
                double d_an = loss_distance(model, fwd[static_cast<std::size_t>(sa)].value, fwd[static_cast<std::size_t>(sn)].value);
                double w = 1.0;
                Vec weights;
                if (cfg.attention) {
                    weights = attention_all_weights(model, fwd[static_cast<std::size_t>(sa)].key, fwd[static_cast<std::size_t>(sp)].key);
                    w = weights[static_cast<std::size_t>(t.source)];
                }
                double loss_t = triplet_loss(d_ap, d_an, cfg.alpha);
                res.objective += coeff * w * loss_t;
                if (loss_t > 0.0) {
                    loss_distance_grad(model, fwd[static_cast<std::size_t>(sa)].value, fwd[static_cast<std::size_t>(sp)].value, coeff * w,
                                       dvalue[static_cast<std::size_t>(sa)], dvalue[static_cast<std::size_t>(sp)],
                                       res.grads.bilinear.empty() ? nullptr : &res.grads.bilinear);
                    loss_distance_grad(model, fwd[static_cast<std::size_t>(sa)].value, fwd[static_cast<std::size_t>(sn)].value, -coeff * w,
                                       dvalue[static_cast<std::size_t>(sa)], dvalue[static_cast<std::size_t>(sn)],
                                       res.grads.bilinear.empty() ? nullptr : &res.grads.bilinear);
                }
                if (cfg.attention) {
                    double up_w = coeff * loss_t;
                    for (int s = 0; s < model.q.rows; ++s) {
                        double dz = up_w * w * ((s == t.source ? 1.0 : 0.0) - weights[static_cast<std::size_t>(s)]);
                        if (dz == 0.0) continue;
                        const double* qs = model.q.row(s);
                        double* gq = res.grads.q.row(s);
                        for (int j = 0; j < dk; ++j) {
                            gq[j] += dz * fwd[static_cast<std::size_t>(sa)].key[static_cast<std::size_t>(j)];
                            gq[dk + j] += dz * fwd[static_cast<std::size_t>(sp)].key[static_cast<std::size_t>(j)];
                            dkey[static_cast<std::size_t>(sa)][static_cast<std::size_t>(j)] += dz * qs[j];
                            dkey[static_cast<std::size_t>(sp)][static_cast<std::size_t>(j)] += dz * qs[dk + j];
                        }
                    }
                }
            }
        }
    }

    // Soft-clustering KL over the places touched by this batch.
    if (dn_active) {
        double scale = dn->rho / static_cast<double>(fwd.size());
        for (std::size_t s = 0; s < fwd.size(); ++s) {
            int place = place_ids[s];
            const double* c = dn->target.row(place);
            Vec d = soft_assign(fwd[s].value, dn->centers);
            res.objective += denoise_loss_row(c, d.data(), dn->centers.rows, scale);
            denoise_grad_row(fwd[s].value, dn->centers, c, scale, dvalue[s], res.grads.centers);
        }
    }

    // Backprop through the heads and trunk for every touched place.
    for (std::size_t s = 0; s < fwd.size(); ++s) {
        const Forward& f = fwd[s];
        const Vec& du = dvalue[s];
        const Vec& dke = dkey[s];
        bool du_zero = true, dk_zero = true;
        for (double v : du)
            if (v != 0.0) {
                du_zero = false;
                break;
            }
        for (double v : dke)
            if (v != 0.0) {
                dk_zero = false;
                break;
            }
        if (du_zero && dk_zero) continue;

        int h2n = model.hidden2(), h1n = model.hidden1(), in = model.input_dim();
        Vec dh2(static_cast<std::size_t>(h2n), 0.0);
        if (!du_zero) {
            for (int r = 0; r < dv; ++r) {
                double g = du[static_cast<std::size_t>(r)];
                if (g == 0.0) continue;
                res.grads.bv[static_cast<std::size_t>(r)] += g;
                axpy(g, f.h2.data(), res.grads.wv.row(r), h2n);
                axpy(g, model.wv.row(r), dh2.data(), h2n);
            }
        }
        if (!dk_zero) {
            for (int r = 0; r < dk; ++r) {
                double g = dke[static_cast<std::size_t>(r)];
                if (g == 0.0) continue;
                res.grads.bk[static_cast<std::size_t>(r)] += g;
                axpy(g, f.h2.data(), res.grads.wk.row(r), h2n);
                axpy(g, model.wk.row(r), dh2.data(), h2n);
            }
        }

        Vec dh1(static_cast<std::size_t>(h1n), 0.0);
        for (int r = 0; r < h2n; ++r) {
            double g = f.z2[static_cast<std::size_t>(r)] > 0.0 ? dh2[static_cast<std::size_t>(r)] : 0.0;
            if (g == 0.0) continue;
            res.grads.b2[static_cast<std::size_t>(r)] += g;
            axpy(g, f.h1.data(), res.grads.w2.row(r), h1n);
            axpy(g, model.w2.row(r), dh1.data(), h1n);
        }
        for (int r = 0; r < h1n; ++r) {
            double g = f.z1[static_cast<std::size_t>(r)] > 0.0 ? dh1[static_cast<std::size_t>(r)] : 0.0;
            if (g == 0.0) continue;
            res.grads.b1[static_cast<std::size_t>(r)] += g;
            axpy(g, f.x.data(), res.grads.w1.row(r), in);
        }
    }
    return res;
}

// Value embeddings of every row of the feature matrix.
inline Mat value_embeddings(const MetricModel& model, const Mat& features) {
    Mat out(features.rows, model.dv());
    for (int i = 0; i < features.rows; ++i) {
        Forward f = forward(model, features.row_vec(i));
        std::copy(f.value.begin(), f.value.end(), out.row(i));
    }
    return out;
}

struct TrainResult {
    MetricModel model;
    Mat centers;  // final denoising centers, empty when denoising never ran
    std::vector<double> epoch_monitor;
    std::vector<std::pair<std::int64_t, double>> probes;  // (step, probe loss)
    std::int64_t steps = 0;
};

// Full training loop: shuffled mini-batches with SGD + momentum, optional
// hard sampling, attention, and denoising (centers k-means++-initialized
// after the warm-up epoch, target refreshed every refresh_interval steps).
// Deterministic for a fixed config and seed.
inline TrainResult train_metric(const Mat& features, const std::vector<PairSample>& pairs,
                                const std::vector<std::string>& sources, const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw ValidationError("train_metric: empty label set");
    for (const auto& p : pairs) {
        if (p.a < 0 || p.a >= features.rows || p.b < 0 || p.b >= features.rows)
            throw ValidationError("train_metric: pair endpoint has no feature row");
        if (p.source < 0 || p.source >= static_cast<int>(sources.size()))
            throw ValidationError("train_metric: pair references unknown source");
    }

    TrainResult out;
    out.model = init_metric_model(features.cols, cfg.hidden1, cfg.hidden2, cfg.dk, cfg.dv, sources, cfg.distance,
                                  cfg.loss, cfg.alpha, cfg.seed);
    if (out.model.q.rows != static_cast<int>(sources.size()))
        throw ValidationError("train_metric: sources must be unique and sorted");

    std::map<int, std::vector<int>> nondups_of;
    if (cfg.loss == LossKind::Triplet) {
        for (const auto& p : pairs) {
            if (p.y == 0) {
                nondups_of[p.a].push_back(p.b);
                nondups_of[p.b].push_back(p.a);
            }
        }
    }

    DenoisingState dn;
    dn.rho = cfg.rho;
    int activation_epoch = cfg.denoise ? std::min(cfg.warmup_epochs, cfg.epochs - 1) : -1;

    MetricGrads velocity = MetricGrads::like(out.model, nullptr);
    bool velocity_has_centers = false;

    Rng rng(cfg.seed ^ 0x7a21b5ed1ull);
    Rng batch_rng(cfg.seed + 0x1234567ull);

    std::vector<int> probe_set;
    if (cfg.probe_interval > 0) {
        std::vector<int> all(pairs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        Rng probe_rng(cfg.seed ^ 0xabcdefULL);
        probe_rng.shuffle(all);
        int want = std::min<int>(cfg.probe_pairs, static_cast<int>(all.size()));
        probe_set.assign(all.begin(), all.begin() + want);
    }
    auto probe_loss = [&]() {
        double total = 0.0;
        std::unordered_map<int, Vec> cache;
        auto val = [&](int place) -> const Vec& {
            auto it = cache.find(place);
            if (it == cache.end()) it = cache.emplace(place, forward(out.model, features.row_vec(place)).value).first;
            return it->second;
        };
        for (int pi : probe_set) {
            const auto& p = pairs[static_cast<std::size_t>(pi)];
            total += pair_loss(loss_distance(out.model, val(p.a), val(p.b)), p.y, cfg.alpha);
        }
        return total / static_cast<double>(probe_set.size());
    };

    auto refresh_target = [&]() {
        Mat u = value_embeddings(out.model, features);
        Mat d = soft_assign_all(u, dn.centers);
        dn.target = target_dist(d);
    };

    std::vector<int> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    std::int64_t step = 0;
    std::int64_t last_refresh = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == activation_epoch && !dn.active) {
            Mat u = value_embeddings(out.model, features);
            int k = cfg.clusters > 0 ? cfg.clusters : std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(features.rows)))));
            if (k > features.rows) k = features.rows;
            dn.centers = init_centers(u, k, cfg.seed ^ 0xdecdecULL, cfg.kmeans_max_iters);
            dn.active = true;
            refresh_target();
            last_refresh = step;
            velocity.centers = Mat(dn.centers.rows, dn.centers.cols);
            velocity_has_centers = true;
        }

        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            if (dn.active && step - last_refresh >= cfg.refresh_interval) {
                refresh_target();
                last_refresh = step;
            }
            if (cfg.probe_interval > 0 && step % cfg.probe_interval == 0) out.probes.emplace_back(step, probe_loss());

            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<PairSample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[static_cast<std::size_t>(order[i])]);

            BatchResult br = metric_batch(out.model, features, batch, cfg, dn.active ? &dn : nullptr, batch_rng,
                                          nondups_of.empty() ? nullptr : &nondups_of);
            epoch_loss += br.monitor_loss;
            ++batches;

            auto gv = grad_views(br.grads, dn.active);
            auto vv = grad_views(velocity, velocity_has_centers && dn.active);
            std::vector<ParamView> pv = param_views(out.model, dn.active ? &dn.centers : nullptr);
            for (std::size_t g = 0; g < gv.size(); ++g) {
                for (std::size_t i = 0; i < gv[g].size; ++i) {
                    vv[g].data[i] = cfg.momentum * vv[g].data[i] - cfg.lr * gv[g].data[i];
                    pv[g].data[i] += vv[g].data[i];
                }
            }
            ++step;
        }
        out.epoch_monitor.push_back(batches > 0 ? epoch_loss / batches : 0.0);
    }
    if (cfg.probe_interval > 0) out.probes.emplace_back(step, probe_loss());
    out.steps = step;
    out.centers = dn.centers;
    return out;
}

}  // namespace placedup
