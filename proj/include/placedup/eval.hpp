#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "placedup/mat.hpp"
#include "placedup/place.hpp"
#include "placedup/util.hpp"

namespace placedup {

// Exact nearest-neighbor search over a fixed embedding set. Full scan;
// perfectly adequate at evaluation scale and free of index-approximation
// caveats.
struct KnnIndex {
    std::vector<std::string> ids;
    Mat embeddings;  // N x D
    std::unordered_map<std::string, int> by_id;

    static KnnIndex build(std::vector<std::string> ids, Mat embeddings) {
        if (static_cast<int>(ids.size()) != embeddings.rows)
            throw std::invalid_argument("KnnIndex: ids/embeddings size mismatch");
        if (!all_finite(embeddings)) throw ValidationError("KnnIndex: non-finite embedding");
        KnnIndex idx;
        idx.ids = std::move(ids);
        idx.embeddings = std::move(embeddings);
        for (std::size_t i = 0; i < idx.ids.size(); ++i)
            if (!idx.by_id.emplace(idx.ids[i], static_cast<int>(i)).second)
                throw ValidationError("KnnIndex: duplicate id '" + idx.ids[i] + "'");
        return idx;
    }

    int size() const { return embeddings.rows; }

    int index_of(const std::string& id) const {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("KnnIndex: unknown id '" + id + "'");
        return it->second;
    }
};

// K nearest ids by squared Euclidean distance, query excluded, ties broken by
// ascending id.
inline std::vector<std::string> knn_exact(const KnnIndex& index, const std::string& query, int k) {
    int qi = index.index_of(query);
    int n = index.size();
    if (k < 1 || k >= n) throw std::invalid_argument("knn_exact: require 1 <= K < N");
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<std::size_t>(n) - 1);
    const double* q = index.embeddings.row(qi);
    for (int i = 0; i < n; ++i) {
        if (i == qi) continue;
        dist.emplace_back(squared_l2(q, index.embeddings.row(i), index.embeddings.cols), i);
    }
    auto cmp = [&](const std::pair<double, int>& x, const std::pair<double, int>& y) {
        if (x.first != y.first) return x.first < y.first;
        return index.ids[static_cast<std::size_t>(x.second)] < index.ids[static_cast<std::size_t>(y.second)];
    };
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end(), cmp);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(index.ids[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)]);
    return out;
}

// Average pairwise accuracy: per probe, the fraction of (duplicate,
// non-duplicate) pairs ranked correctly by squared Euclidean distance.
// Strict inequality; ties count as failures. Per-probe values come from
// integer hit counts so independent references can match exactly.
inline double acc(const KnnIndex& index, const EvalSets& sets) {
    if (sets.omega.empty()) throw ValidationError("acc: Omega is empty, metric undefined");
    double total = 0.0;
    for (const auto& a : sets.omega) {
        const double* ua = index.embeddings.row(index.index_of(a));
        const auto& dups = sets.dups.at(a);
        const auto& nondups = sets.nondups.at(a);
        long hits = 0;
        for (const auto& p : dups) {
            double dp = squared_l2(ua, index.embeddings.row(index.index_of(p)), index.embeddings.cols);
            for (const auto& nn : nondups) {
                double dn = squared_l2(ua, index.embeddings.row(index.index_of(nn)), index.embeddings.cols);
                if (dp < dn) ++hits;
            }
        }
        total += static_cast<double>(hits) / (static_cast<double>(dups.size()) * static_cast<double>(nondups.size()));
    }
    return total / static_cast<double>(sets.omega.size());
}

struct EvalReport {
    double acc = 0.0;
    std::vector<double> pre_at_k;  // K = 1..k_max
    std::vector<double> rec_at_k;
    double avg_pre = 0.0;
    double avg_rec = 0.0;
};

// PRE@K and REC@K curves over probes with labeled duplications, macro
// averaged (per probe, then mean). When fewer than K neighbors exist the
// retrieved set simply saturates.
inline void precision_recall_at_k(const KnnIndex& index, const EvalSets& sets, EvalReport& report, int k_max = 100) {
    if (sets.theta.empty()) throw ValidationError("precision_recall_at_k: Theta is empty, metric undefined");
    if (k_max < 1) throw std::invalid_argument("precision_recall_at_k: k_max must be >= 1");
    int n = index.size();
    int k_eff = std::min(k_max, n - 1);
    if (k_eff < 1) throw ValidationError("precision_recall_at_k: need at least two embedded places");

    report.pre_at_k.assign(static_cast<std::size_t>(k_max), 0.0);
    report.rec_at_k.assign(static_cast<std::size_t>(k_max), 0.0);
    for (const auto& a : sets.theta) {
        auto neighbors = knn_exact(index, a, k_eff);
        const auto& dups = sets.dups.at(a);
        std::unordered_set<std::string> dup_set(dups.begin(), dups.end());
        long hits = 0;
        for (int k = 1; k <= k_max; ++k) {
            if (k <= k_eff && dup_set.count(neighbors[static_cast<std::size_t>(k - 1)])) ++hits;
            report.pre_at_k[static_cast<std::size_t>(k - 1)] += static_cast<double>(hits) / k;
            report.rec_at_k[static_cast<std::size_t>(k - 1)] += static_cast<double>(hits) / static_cast<double>(dups.size());
        }
    }
    double m = static_cast<double>(sets.theta.size());
    for (double& v : report.pre_at_k) v /= m;
    for (double& v : report.rec_at_k) v /= m;
    report.avg_pre = 0.0;
    report.avg_rec = 0.0;
    for (double v : report.pre_at_k) report.avg_pre += v;
    for (double v : report.rec_at_k) report.avg_rec += v;
    report.avg_pre /= static_cast<double>(k_max);
    report.avg_rec /= static_cast<double>(k_max);
}

inline EvalReport evaluate(const KnnIndex& index, const EvalSets& sets, int k_max = 100) {
    EvalReport report;
    report.acc = acc(index, sets);
    precision_recall_at_k(index, sets, report, k_max);
    return report;
}

// --- Report files ------------------------------------------------------------

inline void write_report_json(const std::string& path, const EvalReport& report, const std::string& config_hash,
                              std::uint64_t seed) {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["acc"] = report.acc;
    j["avg_pre"] = report.avg_pre;
    j["avg_rec"] = report.avg_rec;
    j["pre_at_k"] = report.pre_at_k;
    j["rec_at_k"] = report.rec_at_k;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_report_json: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline EvalReport load_report_json(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    EvalReport r;
    r.acc = j.at("acc").get<double>();
    r.avg_pre = j.at("avg_pre").get<double>();
    r.avg_rec = j.at("avg_rec").get<double>();
    r.pre_at_k = j.at("pre_at_k").get<std::vector<double>>();
    r.rec_at_k = j.at("rec_at_k").get<std::vector<double>>();
    return r;
}

inline void write_curves_tsv(const std::string& path, const EvalReport& report, const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_curves_tsv: cannot open " + path);
    out << "# config_hash=" << config_hash << '\n';
    out << "K\tPRE\tREC\n";
    for (std::size_t k = 0; k < report.pre_at_k.size(); ++k)
        out << (k + 1) << '\t' << format_double(report.pre_at_k[k]) << '\t' << format_double(report.rec_at_k[k]) << '\n';
}

// --- Per-place embedding file (same text format as the token tables) -----------

inline void save_place_embeddings(const std::string& path, const std::vector<std::string>& ids, const Mat& embeddings) {
    if (static_cast<int>(ids.size()) != embeddings.rows)
        throw std::invalid_argument("save_place_embeddings: ids/matrix mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_place_embeddings: cannot open " + path);
    out << embeddings.rows << ' ' << embeddings.cols << '\n';
    for (int i = 0; i < embeddings.rows; ++i) {
        if (ids[static_cast<std::size_t>(i)].find_first_of(" \t\n") != std::string::npos)
            throw FormatError("save_place_embeddings: id contains whitespace: '" + ids[static_cast<std::size_t>(i)] + "'");
        out << ids[static_cast<std::size_t>(i)];
        for (int j = 0; j < embeddings.cols; ++j) out << ' ' << format_double(embeddings.at(i, j));
        out << '\n';
    }
}

struct PlaceEmbeddings {
    std::vector<std::string> ids;
    Mat embeddings;
};

inline PlaceEmbeddings load_place_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_place_embeddings: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ":1: empty file");
    long rows = 0, cols = 0;
    char extra;
    if (std::sscanf(line.c_str(), "%ld %ld %c", &rows, &cols, &extra) != 2 || rows < 0 || cols < 1)
        throw FormatError(path + ":1: malformed header, expected 'N D'");
    PlaceEmbeddings pe;
    pe.embeddings = Mat(static_cast<int>(rows), static_cast<int>(cols));
    pe.ids.reserve(static_cast<std::size_t>(rows));
    for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw FormatError(path + ": expected " + std::to_string(rows) + " rows");
        std::size_t pos = line.find(' ');
        if (pos == std::string::npos || pos == 0) throw FormatError(path + ":" + std::to_string(i + 2) + ": expected 'id x1 ... xD'");
        pe.ids.push_back(line.substr(0, pos));
        const char* p = line.c_str() + pos;
        for (long j = 0; j < cols; ++j) {
            char* end = nullptr;
            double v = std::strtod(p, &end);
            if (end == p) throw FormatError(path + ":" + std::to_string(i + 2) + ": short row");
            pe.embeddings.at(static_cast<int>(i), static_cast<int>(j)) = v;
            p = end;
        }
    }
    return pe;
}

}  // namespace placedup
