#pragma once

// Brute-force reference implementations for the evaluation metrics. These
// deliberately share no code with the library versions: plain loops, full
// sorts, and the metric formulas written out directly.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "placedup/place.hpp"

namespace oracle {

using Embeddings = std::map<std::string, std::vector<double>>;

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline double acc_reference(const Embeddings& emb, const placedup::EvalSets& sets) {
    double total = 0.0;
    for (const auto& a : sets.omega) {
        const auto& ua = emb.at(a);
        const auto& dups = sets.dups.at(a);
        const auto& nondups = sets.nondups.at(a);
        long hits = 0;
        for (const auto& p : dups)
            for (const auto& n : nondups)
                if (sqdist(ua, emb.at(p)) < sqdist(ua, emb.at(n))) ++hits;
        total += static_cast<double>(hits) / (static_cast<double>(dups.size()) * static_cast<double>(nondups.size()));
    }
    return total / static_cast<double>(sets.omega.size());
}

// All other points sorted by (distance, id) ascending.
inline std::vector<std::string> ranked_neighbors(const Embeddings& emb, const std::string& query) {
    std::vector<std::pair<double, std::string>> order;
    const auto& q = emb.at(query);
    for (const auto& [id, v] : emb) {
        if (id == query) continue;
        order.emplace_back(sqdist(q, v), id);
    }
    std::sort(order.begin(), order.end());
    std::vector<std::string> out;
    for (const auto& [d, id] : order) {
        (void)d;
        out.push_back(id);
    }
    return out;
}

struct Curves {
    std::vector<double> pre, rec;
};

inline Curves precision_recall_reference(const Embeddings& emb, const placedup::EvalSets& sets, int k_max) {
    Curves c;
    c.pre.assign(static_cast<std::size_t>(k_max), 0.0);
    c.rec.assign(static_cast<std::size_t>(k_max), 0.0);
    for (const auto& a : sets.theta) {
        auto ranked = ranked_neighbors(emb, a);
        const auto& dups = sets.dups.at(a);
        for (int k = 1; k <= k_max; ++k) {
            long hits = 0;
            for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i)
                if (std::find(dups.begin(), dups.end(), ranked[static_cast<std::size_t>(i)]) != dups.end()) ++hits;
            c.pre[static_cast<std::size_t>(k - 1)] += static_cast<double>(hits) / k;
            c.rec[static_cast<std::size_t>(k - 1)] += static_cast<double>(hits) / static_cast<double>(dups.size());
        }
    }
    for (double& v : c.pre) v /= static_cast<double>(sets.theta.size());
    for (double& v : c.rec) v /= static_cast<double>(sets.theta.size());
    return c;
}

}  // namespace oracle
