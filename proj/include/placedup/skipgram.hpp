#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "placedup/embedding.hpp"
#include "placedup/mat.hpp"
#include "placedup/rng.hpp"
#include "placedup/text.hpp"

namespace placedup {

struct SgdConfig {
    int dim = 50;
    int k_neg = 5;
    double lr = 0.05;           // linear decay to lr * lr_floor
    double lr_floor = 1e-4;
    int epochs = 5;
    double noise_exponent = 0.75;
    std::uint64_t seed = 1;
    int threads = 1;            // >1 enables the lock-free mode (nondeterministic)
    // subword enrichment
    int bucket_count = 1 << 18;
    int ngram_min = 3;
    int ngram_max = 5;
    // context window; 0 means full enumeration (names are short)
    int window = 0;

    void validate() const {
        if (dim < 1) throw std::invalid_argument("SgdConfig: dim must be >= 1");
        if (k_neg < 1) throw std::invalid_argument("SgdConfig: k_neg must be >= 1");
        if (lr <= 0.0) throw std::invalid_argument("SgdConfig: lr must be > 0");
        if (epochs < 1) throw std::invalid_argument("SgdConfig: epochs must be >= 1");
        if (threads < 1) throw std::invalid_argument("SgdConfig: threads must be >= 1");
    }
};

// Every ordered pair of distinct in-vocab positions; when window > 0 only
// positions within that distance pair up. Full enumeration avoids the length
// bias of sliding-window sampling on short texts.
inline std::vector<std::pair<int, int>> sample_pairs(const std::vector<int>& indices, int window = 0) {
    std::vector<std::pair<int, int>> out;
    int n = static_cast<int>(indices.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (window > 0 && std::abs(i - j) > window) continue;
            out.emplace_back(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

struct SkipgramResult {
    EmbeddingTable table;
    std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

namespace detail {

struct SgnsStep {
    // One positive pair plus k_neg negatives against a shared input vector.
    // Returns the loss; grad_h receives dL/dh and context rows are updated.
    static double run(const Vec& h, int ctx, const std::vector<int>& negs, Mat& context, double lr, Vec& grad_h) {
        int dim = context.cols;
        grad_h.assign(static_cast<std::size_t>(dim), 0.0);
        double loss = 0.0;
        auto one = [&](int target, double label) {
            double* crow = context.row(target);
            double score = dot(h.data(), crow, dim);
            loss -= label > 0.5 ? log_sigmoid(score) : log_sigmoid(-score);
            double g = label - sigmoid(score);
            axpy(g, crow, grad_h.data(), dim);
            axpy(lr * g, h.data(), crow, dim);
        };
        one(ctx, 1.0);
        for (int n : negs) one(n, 0.0);
        return loss;
    }
};

}  // namespace detail

// Skip-gram with negative sampling over (center, context) pairs drawn from
// the corpus. Loss per positive pair (w, c):
//   -log sigmoid(u_w . v_c) - sum_j log sigmoid(-u_w . v_nj)
// with negatives from the unigram^noise_exponent distribution. With subword
// enrichment on, u_w is the mean of the word vector and its hashed n-gram
// bucket vectors.
inline SkipgramResult train_skipgram(const std::vector<std::vector<std::string>>& corpus, const Vocabulary& vocab,
                                     const SgdConfig& cfg, bool subword) {
    cfg.validate();
    int v = vocab.size();
    int dim = cfg.dim;

    SkipgramResult res;
    EmbeddingTable& table = res.table;
    table.dim = dim;
    table.tokens = vocab.tokens;
    for (int i = 0; i < v; ++i) table.index.emplace(vocab.tokens[static_cast<std::size_t>(i)], i);
    table.ngram_min = cfg.ngram_min;
    table.ngram_max = cfg.ngram_max;

    Rng rng(cfg.seed);
    table.word = Mat(v, dim);
    table.word.fill_uniform(rng, -0.5 / dim, 0.5 / dim);
    table.context = Mat(v, dim);
    std::vector<std::vector<int>> word_buckets;
    if (subword) {
        table.buckets = Mat(cfg.bucket_count, dim);
        table.buckets.fill_uniform(rng, -0.5 / dim, 0.5 / dim);
        word_buckets.resize(static_cast<std::size_t>(v));
        for (int i = 0; i < v; ++i)
            word_buckets[static_cast<std::size_t>(i)] =
                subword_buckets(vocab.tokens[static_cast<std::size_t>(i)], cfg.ngram_min, cfg.ngram_max, cfg.bucket_count);
    }

    std::vector<std::pair<int, int>> pairs;
    for (const auto& line : corpus) {
        auto idx = to_indices(line, vocab);
        auto p = sample_pairs(idx, cfg.window);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    if (pairs.empty()) return res;

    std::vector<double> noise_w(static_cast<std::size_t>(v));
    for (int i = 0; i < v; ++i)
        noise_w[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(vocab.freqs[static_cast<std::size_t>(i)]), cfg.noise_exponent);
    DiscreteSampler noise(noise_w);

    const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(pairs.size());
    std::int64_t step = 0;

    // Gradient for one pair at the composed input vector; spreads dL/dh
    // uniformly over the word row and its bucket rows.
    auto train_pair = [&](int w, int c, Rng& r, double lr, Vec& h, Vec& grad_h, std::vector<int>& negs) -> double {
        const auto* bks = subword ? &word_buckets[static_cast<std::size_t>(w)] : nullptr;
        int parts = 1 + (bks ? static_cast<int>(bks->size()) : 0);
        h.assign(table.word.row(w), table.word.row(w) + dim);
        if (bks)
            for (int b : *bks) axpy(1.0, table.buckets.row(b), h.data(), dim);
        for (double& x : h) x /= parts;

        negs.clear();
        for (int k = 0; k < cfg.k_neg; ++k) {
            int n = static_cast<int>(noise.sample(r));
            for (int tries = 0; n == c && tries < 8; ++tries) n = static_cast<int>(noise.sample(r));
            negs.push_back(n);
        }
        double loss = detail::SgnsStep::run(h, c, negs, table.context, lr, grad_h);
        double scale = lr / parts;
        axpy(scale, grad_h.data(), table.word.row(w), dim);
        if (bks)
            for (int b : *bks) axpy(scale, grad_h.data(), table.buckets.row(b), dim);
        return loss;
    };

    res.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(pairs);
        double epoch_loss = 0.0;
        if (cfg.threads <= 1) {
            Vec h, grad_h;
            std::vector<int> negs;
            for (const auto& [w, c] : pairs) {
                double lr = cfg.lr * std::max(cfg.lr_floor, 1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
                epoch_loss += train_pair(w, c, rng, lr, h, grad_h, negs);
                ++step;
            }
        } else {
            // Lock-free mode: workers update shared rows unsynchronized.
            std::vector<std::thread> workers;
            std::vector<double> worker_loss(static_cast<std::size_t>(cfg.threads), 0.0);
            std::size_t chunk = (pairs.size() + static_cast<std::size_t>(cfg.threads) - 1) / static_cast<std::size_t>(cfg.threads);
            double lr = cfg.lr * std::max(cfg.lr_floor, 1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
            for (int t = 0; t < cfg.threads; ++t) {
                workers.emplace_back([&, t]() {
                    Rng local(cfg.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(t + 1)) ^ static_cast<std::uint64_t>(epoch));
                    Vec h, grad_h;
                    std::vector<int> negs;
                    std::size_t lo = static_cast<std::size_t>(t) * chunk;
                    std::size_t hi = std::min(pairs.size(), lo + chunk);
                    for (std::size_t i = lo; i < hi; ++i)
                        worker_loss[static_cast<std::size_t>(t)] += train_pair(pairs[i].first, pairs[i].second, local, lr, h, grad_h, negs);
                });
            }
            for (auto& w : workers) w.join();
            for (double l : worker_loss) epoch_loss += l;
            step += static_cast<std::int64_t>(pairs.size());
        }
        res.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
    }
    return res;
}

}  // namespace placedup
