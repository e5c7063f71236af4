#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "placedup/util.hpp"

namespace placedup {

struct Coordinate {
    double lat = 0.0;
    double lon = 0.0;
};

// One online place page. Address and coordinate are frequently missing in
// real data, so both are optional. A place whose name normalizes to nothing
// is unusable for text features; the embedding stage flags those.
struct Place {
    std::string id;
    std::string name;
    std::optional<std::string> address;
    std::optional<Coordinate> coordinate;
    std::vector<std::string> categories;  // sorted, unique
};

// A labeled pair of place ids, y = 1 for duplications. Stored in canonical
// order: lexicographically smaller id first.
struct LabeledPair {
    std::string a;
    std::string b;
    int y = 0;
    std::string source;

    bool operator==(const LabeledPair& o) const { return a == o.a && b == o.b && y == o.y && source == o.source; }
    bool operator<(const LabeledPair& o) const {
        return std::tie(a, b, y, source) < std::tie(o.a, o.b, o.y, o.source);
    }
};

struct Dataset {
    std::vector<Place> places;
    std::unordered_map<std::string, int> by_id;

    int size() const { return static_cast<int>(places.size()); }

    int index_of(const std::string& id) const {
        auto it = by_id.find(id);
        return it == by_id.end() ? -1 : it->second;
    }

    const Place& at(int i) const { return places[static_cast<std::size_t>(i)]; }

    void add(Place p) {
        if (p.id.empty()) throw ValidationError("place with empty id");
        if (!by_id.emplace(p.id, static_cast<int>(places.size())).second)
            throw ValidationError("duplicate place id '" + p.id + "'");
        if (p.coordinate) {
            if (p.coordinate->lat < -90.0 || p.coordinate->lat > 90.0)
                throw ValidationError("place '" + p.id + "': lat out of range");
            if (p.coordinate->lon < -180.0 || p.coordinate->lon > 180.0)
                throw ValidationError("place '" + p.id + "': lon out of range");
        }
        std::sort(p.categories.begin(), p.categories.end());
        p.categories.erase(std::unique(p.categories.begin(), p.categories.end()), p.categories.end());
        places.push_back(std::move(p));
    }

    // Categories present in the dataset, sorted.
    std::vector<std::string> category_catalogue() const {
        std::set<std::string> cats;
        for (const auto& p : places) cats.insert(p.categories.begin(), p.categories.end());
        return std::vector<std::string>(cats.begin(), cats.end());
    }
};

// --- places.jsonl ------------------------------------------------------------
// One object per line: id, name, address (string|null), lat, lon
// (number|null, both present or both null), categories (array of strings).

inline Dataset load_places(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    Dataset ds;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto where = [&] { return path + ":" + std::to_string(lineno) + ": "; };
        try {
            Place p;
            if (!j.is_object()) throw ValidationError(where() + "expected a JSON object");
            p.id = j.at("id").get<std::string>();
            p.name = j.at("name").get<std::string>();
            if (j.contains("address") && !j["address"].is_null()) p.address = j["address"].get<std::string>();
            bool has_lat = j.contains("lat") && !j["lat"].is_null();
            bool has_lon = j.contains("lon") && !j["lon"].is_null();
            if (has_lat != has_lon) throw ValidationError(where() + "lat and lon must both be present or both null");
            if (has_lat) p.coordinate = Coordinate{j["lat"].get<double>(), j["lon"].get<double>()};
            if (j.contains("categories") && !j["categories"].is_null())
                p.categories = j["categories"].get<std::vector<std::string>>();
            ds.add(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where() + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(e.what()).find(path) == 0 ? e.what() : where() + e.what());
        }
    }
    return ds;
}

inline void save_places(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& p : ds.places) {
        nlohmann::ordered_json j;
        j["id"] = p.id;
        j["name"] = p.name;
        j["address"] = p.address ? nlohmann::json(*p.address) : nlohmann::json(nullptr);
        j["lat"] = p.coordinate ? nlohmann::json(p.coordinate->lat) : nlohmann::json(nullptr);
        j["lon"] = p.coordinate ? nlohmann::json(p.coordinate->lon) : nlohmann::json(nullptr);
        j["categories"] = p.categories;
        out << j.dump() << '\n';
    }
}

// --- labels.tsv --------------------------------------------------------------
// Tab-separated: id_a, id_b, y, source. '#'-prefixed lines are comments.
// Endpoints are canonicalized, self-pairs rejected, exact repeats collapsed;
// conflicting rows survive so downstream denoising sees them.

inline std::vector<LabeledPair> load_labels(const std::string& path, const Dataset& places) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<LabeledPair> out;
    std::set<LabeledPair> seen;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto where = [&] { return path + ":" + std::to_string(lineno) + ": "; };
        auto cols = split(line, '\t');
        if (cols.size() != 4) throw ParseError(where() + "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
        LabeledPair lp;
        lp.a = cols[0];
        lp.b = cols[1];
        if (cols[2] == "0")
            lp.y = 0;
        else if (cols[2] == "1")
            lp.y = 1;
        else
            throw ValidationError(where() + "label must be 0 or 1, got '" + cols[2] + "'");
        lp.source = cols[3];
        if (lp.a == lp.b) throw ValidationError(where() + "self-pair (" + lp.a + ", " + lp.b + ")");
        if (places.index_of(lp.a) < 0) throw ValidationError(where() + "unknown place id '" + lp.a + "'");
        if (places.index_of(lp.b) < 0) throw ValidationError(where() + "unknown place id '" + lp.b + "'");
        if (lp.b < lp.a) std::swap(lp.a, lp.b);
        if (seen.insert(lp).second) out.push_back(lp);
    }
    return out;
}

inline void save_labels(const std::string& path, const std::vector<LabeledPair>& labels,
                        const std::vector<std::string>& header_comments = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& c : header_comments) out << "# " << c << '\n';
    for (const auto& l : labels) out << l.a << '\t' << l.b << '\t' << l.y << '\t' << l.source << '\n';
}

// --- ground_truth.tsv ---------------------------------------------------------

inline std::map<std::string, std::string> load_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::map<std::string, std::string> truth;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cols = split(line, '\t');
        if (cols.size() != 2) throw ParseError(path + ":" + std::to_string(lineno) + ": expected 2 columns");
        if (!truth.emplace(cols[0], cols[1]).second)
            throw ValidationError(path + ":" + std::to_string(lineno) + ": duplicate id '" + cols[0] + "'");
    }
    return truth;
}

inline void save_ground_truth(const std::string& path, const std::map<std::string, std::string>& truth,
                              const std::vector<std::string>& header_comments = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& c : header_comments) out << "# " << c << '\n';
    for (const auto& [id, tid] : truth) out << id << '\t' << tid << '\n';
}

// --- Evaluation sets ----------------------------------------------------------

// Probe sets for the pairwise and retrieval metrics. Theta holds ids with at
// least one labeled duplication, Omega additionally requires a labeled
// non-duplication. dups/nondups are the per-probe sets (sorted).
struct EvalSets {
    std::vector<std::string> theta;
    std::vector<std::string> omega;
    std::map<std::string, std::vector<std::string>> dups;
    std::map<std::string, std::vector<std::string>> nondups;
};

// Builds the sets symmetrically: a labeled pair contributes membership from
// both endpoints' perspectives. A pair carrying contradictory labels anywhere
// in the set is excluded from eval membership entirely, which keeps the
// dups/nondups sets disjoint.
inline EvalSets build_eval_sets(const std::vector<LabeledPair>& labels) {
    std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> pair_y;  // (saw y=1, saw y=0)
    for (const auto& l : labels) {
        auto& flags = pair_y[{l.a, l.b}];
        (l.y == 1 ? flags.first : flags.second) = true;
    }
    std::map<std::string, std::set<std::string>> dups, nondups;
    for (const auto& [pr, flags] : pair_y) {
        if (flags.first && flags.second) continue;  // conflicted
        auto& target = flags.first ? dups : nondups;
        target[pr.first].insert(pr.second);
        target[pr.second].insert(pr.first);
    }
    EvalSets es;
    for (const auto& [id, s] : dups) {
        es.theta.push_back(id);
        es.dups[id] = std::vector<std::string>(s.begin(), s.end());
        auto it = nondups.find(id);
        if (it != nondups.end() && !it->second.empty()) es.omega.push_back(id);
    }
    for (const auto& [id, s] : nondups) es.nondups[id] = std::vector<std::string>(s.begin(), s.end());
    return es;
}

}  // namespace placedup
