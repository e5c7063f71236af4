#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "placedup/place.hpp"
#include "placedup/rng.hpp"
#include "placedup/text.hpp"
#include "placedup/util.hpp"

namespace placedup {

// Desk-scale stand-in for a multi-source labeled place graph: true places get
// composable names, duplicate pages get corrupted copies of the attributes,
// and each label source samples pairs with its own flip rate.
struct SyntheticConfig {
    int n_true_places = 100;
    double dup_rate = 1.0;  // mean duplicates per true place (Poisson)
    int n_sources = 3;
    std::vector<double> flip_rates;  // per source; cycled defaults if shorter
    int labels_per_source = 0;       // 0 -> 4 * n_true_places

    // corruption knobs
    double misspell_prob = 0.35;
    double abbrev_prob = 0.35;
    double city_suffix_prob = 0.30;
    double address_drop_prob = 0.15;
    double coord_jitter_sigma = 0.004;  // degrees

    // label sampling
    double positive_frac = 0.4;
    double near_miss_frac = 0.7;  // negatives biased to same-bin pairs
    double bin_size = 0.01;       // degrees; same gridding as the place network

    std::uint64_t seed = 1;

    void validate() const {
        if (n_true_places < 1) throw ValidationError("SyntheticConfig: n_true_places must be >= 1");
        if (dup_rate < 0.0) throw ValidationError("SyntheticConfig: dup_rate must be >= 0");
        if (n_sources < 1) throw ValidationError("SyntheticConfig: n_sources must be >= 1");
        auto prob = [](double p, const char* name) {
            if (p < 0.0 || p > 1.0) throw ValidationError(std::string("SyntheticConfig: ") + name + " must be in [0, 1]");
        };
        for (double f : flip_rates) prob(f, "flip_rate");
        prob(misspell_prob, "misspell_prob");
        prob(abbrev_prob, "abbrev_prob");
        prob(city_suffix_prob, "city_suffix_prob");
        prob(address_drop_prob, "address_drop_prob");
        prob(positive_frac, "positive_frac");
        prob(near_miss_frac, "near_miss_frac");
        if (coord_jitter_sigma < 0.0) throw ValidationError("SyntheticConfig: coord_jitter_sigma must be >= 0");
        if (bin_size <= 0.0) throw ValidationError("SyntheticConfig: bin_size must be > 0");
        if (labels_per_source < 0) throw ValidationError("SyntheticConfig: labels_per_source must be >= 0");
    }

    double flip_rate(int source) const {
        static const double defaults[] = {0.05, 0.15, 0.30};
        if (!flip_rates.empty()) return flip_rates[static_cast<std::size_t>(source) % flip_rates.size()];
        return defaults[static_cast<std::size_t>(source) % 3];
    }
};

struct SyntheticData {
    Dataset dataset;
    std::vector<LabeledPair> labels;
    std::map<std::string, std::string> truth;  // page id -> true place id
};

namespace pools {

inline const std::vector<std::string>& adjectives() {
    static const std::vector<std::string> v = {
        "golden", "silver", "royal", "grand", "little", "old", "sunny", "happy", "blue", "red",
        "green", "lucky", "corner", "central", "garden", "river", "lake", "hill", "star", "crystal",
        "copper", "iron", "velvet", "urban", "rustic", "cozy", "modern", "classic", "twin", "white",
        "black", "pacific", "northern", "southern", "eastern", "western"};
    return v;
}

inline const std::vector<std::string>& nouns() {
    static const std::vector<std::string> v = {
        "oak", "maple", "willow", "anchor", "harbor", "bridge", "castle", "crown", "dragon", "eagle",
        "falcon", "fox", "harvest", "lantern", "meadow", "mill", "orchard", "pearl", "phoenix", "pine",
        "rose", "spring", "stone", "summit", "tiger", "valley", "wave", "wolf"};
    return v;
}

// Establishment type word paired with its catalogue category.
inline const std::vector<std::pair<std::string, std::string>>& types() {
    static const std::vector<std::pair<std::string, std::string>> v = {
        {"restaurant", "Restaurant"}, {"cafe", "Cafe"},       {"bakery", "Bakery"},     {"bar", "Bar"},
        {"hotel", "Hotel"},           {"museum", "Museum"},   {"gallery", "Arts"},      {"park", "Park"},
        {"gym", "Fitness"},           {"salon", "Beauty"},    {"pharmacy", "Pharmacy"}, {"market", "Grocery"},
        {"bank", "Bank"},             {"theater", "Theater"}, {"library", "Education"}, {"clinic", "Health"},
        {"mall", "Shopping"},         {"arena", "Sports"},    {"garage", "Services"}};
    return v;
}

// 19 common categories, mirroring the type pool above.
inline const std::vector<std::string>& categories() {
    static const std::vector<std::string> v = {
        "Arts", "Bakery", "Bank", "Bar", "Beauty", "Cafe", "Education", "Fitness", "Grocery", "Health",
        "Hotel", "Museum", "Park", "Pharmacy", "Restaurant", "Services", "Shopping", "Sports", "Theater"};
    return v;
}

inline const std::vector<std::string>& cities() {
    static const std::vector<std::string> v = {
        "springfield", "riverton", "oakdale", "fairview", "lakewood", "ashford", "brookhaven", "clarkson",
        "danbury", "eastport", "glenville", "harmony", "kingsford", "linden", "milltown", "norwood",
        "pinecrest", "westbrook"};
    return v;
}

inline const std::vector<std::string>& streets() {
    static const std::vector<std::string> v = {
        "main", "oak", "maple", "cedar", "elm", "park", "washington", "lincoln", "jefferson", "madison",
        "franklin", "highland", "sunset", "ridge", "lake", "hill", "church", "market", "union", "spruce",
        "walnut", "chestnut", "willow", "birch"};
    return v;
}

inline const std::vector<std::string>& street_types() {
    static const std::vector<std::string> v = {"street", "avenue", "boulevard", "road", "drive", "lane"};
    return v;
}

inline const std::map<std::string, std::string>& abbreviations() {
    static const std::map<std::string, std::string> v = {
        {"street", "st"}, {"avenue", "ave"}, {"boulevard", "blvd"}, {"road", "rd"},
        {"drive", "dr"},  {"lane", "ln"},    {"north", "n"},        {"south", "s"},
        {"east", "e"},    {"west", "w"},     {"restaurant", "rest"}};
    return v;
}

}  // namespace pools

// Default gazetteer for name normalization: the generator's city pool.
inline std::vector<std::string> default_gazetteer() { return pools::cities(); }

namespace detail {

struct TruthPlace {
    std::vector<std::string> name_tokens;
    std::vector<std::string> address_tokens;
    Coordinate coord;
    std::vector<std::string> categories;
    std::string city;
};

inline std::string misspell(const std::string& word, Rng& rng) {
    if (word.size() < 4) return word;
    std::string w = word;
    std::size_t pos = 1 + rng.index(w.size() - 2);
    if (rng.bernoulli(0.5)) {
        std::swap(w[pos], w[pos + 1 < w.size() ? pos + 1 : pos - 1]);
    } else {
        w.erase(pos, 1);
    }
    return w;
}

inline std::vector<std::string> corrupt_tokens(const std::vector<std::string>& tokens, const SyntheticConfig& cfg, Rng& rng) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
        std::string t = tok;
        auto ab = pools::abbreviations().find(t);
        if (ab != pools::abbreviations().end() && rng.bernoulli(cfg.abbrev_prob)) {
            t = ab->second;
        } else if (rng.bernoulli(cfg.misspell_prob)) {
            t = misspell(t, rng);
        }
        out.push_back(std::move(t));
    }
    return out;
}

inline std::pair<std::int64_t, std::int64_t> grid_bin(const Coordinate& c, double bin) {
    return {static_cast<std::int64_t>(std::floor(c.lat / bin)), static_cast<std::int64_t>(std::floor(c.lon / bin))};
}

}  // namespace detail

// Deterministic for a fixed config. Ground truth is returned for evaluation
// and acceptance checks; training code must never read it.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SyntheticData data;

    // Geographic box sized for a handful of true places per bin, so near-miss
    // negatives (same bin, different truth) actually exist.
    int grid_n = std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_true_places) / 4.0))));
    double box = cfg.bin_size * grid_n;

    std::vector<detail::TruthPlace> truths;
    truths.reserve(static_cast<std::size_t>(cfg.n_true_places));
    for (int t = 0; t < cfg.n_true_places; ++t) {
        detail::TruthPlace tp;
        const auto& type = pools::types()[rng.index(pools::types().size())];
        tp.name_tokens = {pools::adjectives()[rng.index(pools::adjectives().size())],
                          pools::nouns()[rng.index(pools::nouns().size())], type.first};
        tp.city = pools::cities()[rng.index(pools::cities().size())];
        tp.address_tokens = {std::to_string(1 + rng.uniform_int(999)), pools::streets()[rng.index(pools::streets().size())],
                             pools::street_types()[rng.index(pools::street_types().size())], tp.city};
        tp.coord = Coordinate{rng.uniform(0.0, box), rng.uniform(0.0, box)};
        tp.categories.push_back(type.second);
        if (rng.bernoulli(0.3)) {
            const auto& extra = pools::categories()[rng.index(pools::categories().size())];
            if (extra != type.second) tp.categories.push_back(extra);
        }
        truths.push_back(std::move(tp));
    }

    auto page_id = [](int n) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "p%06d", n);
        return std::string(buf);
    };
    auto truth_id = [](int n) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "t%06d", n);
        return std::string(buf);
    };

    std::vector<int> truth_of_page;
    int page_counter = 0;
    for (int t = 0; t < cfg.n_true_places; ++t) {
        const auto& tp = truths[static_cast<std::size_t>(t)];
        int dups = rng.poisson(cfg.dup_rate);
        for (int copy = 0; copy <= dups; ++copy) {
            Place p;
            p.id = page_id(page_counter++);
            std::vector<std::string> name_toks = tp.name_tokens;
            std::vector<std::string> addr_toks = tp.address_tokens;
            Coordinate coord = tp.coord;
            bool drop_address = false;
            if (copy > 0) {
                name_toks = detail::corrupt_tokens(name_toks, cfg, rng);
                if (rng.bernoulli(cfg.city_suffix_prob)) name_toks.push_back(tp.city);
                addr_toks = detail::corrupt_tokens(addr_toks, cfg, rng);
                drop_address = rng.bernoulli(cfg.address_drop_prob);
                coord.lat += rng.normal(0.0, cfg.coord_jitter_sigma);
                coord.lon += rng.normal(0.0, cfg.coord_jitter_sigma);
                coord.lat = std::min(89.9, std::max(-89.9, coord.lat));
                coord.lon = std::min(179.9, std::max(-179.9, coord.lon));
            }
            p.name = join(name_toks, " ");
            if (!drop_address) p.address = join(addr_toks, " ");
            p.coordinate = coord;
            p.categories = tp.categories;
            if (copy > 0 && p.categories.size() > 1 && rng.bernoulli(0.2)) p.categories.pop_back();
            data.truth[p.id] = truth_id(t);
            truth_of_page.push_back(t);
            data.dataset.add(std::move(p));
        }
    }

    int n_pages = data.dataset.size();

    // Index pages by grid bin for near-miss negative sampling.
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<int>> bins;
    for (int i = 0; i < n_pages; ++i) bins[detail::grid_bin(*data.dataset.at(i).coordinate, cfg.bin_size)].push_back(i);
    std::vector<const std::vector<int>*> mixed_bins;  // bins spanning >= 2 truths
    for (const auto& [key, members] : bins) {
        (void)key;
        for (std::size_t k = 1; k < members.size(); ++k)
            if (truth_of_page[static_cast<std::size_t>(members[k])] != truth_of_page[static_cast<std::size_t>(members[0])]) {
                mixed_bins.push_back(&members);
                break;
            }
    }

    // Pages grouped by truth, for positive sampling.
    std::vector<std::vector<int>> pages_of_truth(static_cast<std::size_t>(cfg.n_true_places));
    for (int i = 0; i < n_pages; ++i) pages_of_truth[static_cast<std::size_t>(truth_of_page[static_cast<std::size_t>(i)])].push_back(i);
    std::vector<int> dup_truths;  // truths with >= 2 pages
    for (int t = 0; t < cfg.n_true_places; ++t)
        if (pages_of_truth[static_cast<std::size_t>(t)].size() >= 2) dup_truths.push_back(t);

    int labels_per_source = cfg.labels_per_source > 0 ? cfg.labels_per_source : 4 * cfg.n_true_places;
    if (n_pages >= 2) {
        for (int s = 0; s < cfg.n_sources; ++s) {
            std::string source = "src_" + std::to_string(s);
            double flip = cfg.flip_rate(s);
            for (int k = 0; k < labels_per_source; ++k) {
                int a = -1, b = -1;
                bool want_positive = rng.bernoulli(cfg.positive_frac) && !dup_truths.empty();
                if (want_positive) {
                    const auto& group = pages_of_truth[static_cast<std::size_t>(dup_truths[rng.index(dup_truths.size())])];
                    a = group[rng.index(group.size())];
                    do {
                        b = group[rng.index(group.size())];
                    } while (b == a);
                } else if (!mixed_bins.empty() && rng.bernoulli(cfg.near_miss_frac)) {
                    const auto& members = *mixed_bins[rng.index(mixed_bins.size())];
                    for (int tries = 0; tries < 16; ++tries) {
                        a = members[rng.index(members.size())];
                        b = members[rng.index(members.size())];
                        if (a != b && truth_of_page[static_cast<std::size_t>(a)] != truth_of_page[static_cast<std::size_t>(b)]) break;
                        a = b = -1;
                    }
                }
                if (a < 0 || b < 0) {
                    for (int tries = 0; tries < 64; ++tries) {
                        a = rng.uniform_int(n_pages);
                        b = rng.uniform_int(n_pages);
                        if (a != b && truth_of_page[static_cast<std::size_t>(a)] != truth_of_page[static_cast<std::size_t>(b)]) break;
                        a = b = -1;
                    }
                    if (a < 0 || b < 0) continue;  // single-truth datasets may have no negatives
                }
                LabeledPair lp;
                lp.a = data.dataset.at(a).id;
                lp.b = data.dataset.at(b).id;
                if (lp.b < lp.a) std::swap(lp.a, lp.b);
                int y_true = truth_of_page[static_cast<std::size_t>(a)] == truth_of_page[static_cast<std::size_t>(b)] ? 1 : 0;
                lp.y = rng.bernoulli(flip) ? 1 - y_true : y_true;
                lp.source = source;
                data.labels.push_back(std::move(lp));
            }
        }
    }
    return data;
}

// Clean evaluation sets built from ground truth: duplicates are the other
// pages of the same true place; non-duplicates are sampled near misses
// (same-bin pages of a different truth preferred). Mirrors a curated golden
// set. Not for training.
inline EvalSets eval_sets_from_truth(const Dataset& ds, const std::map<std::string, std::string>& truth,
                                     double bin_size = 0.01, int negatives_per_probe = 4, std::uint64_t seed = 7) {
    Rng rng(seed);
    int n = ds.size();
    std::map<std::string, std::vector<int>> pages_of_truth;
    for (int i = 0; i < n; ++i) {
        auto it = truth.find(ds.at(i).id);
        if (it == truth.end()) throw ValidationError("eval_sets_from_truth: no truth for id '" + ds.at(i).id + "'");
        pages_of_truth[it->second].push_back(i);
    }
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<int>> bins;
    for (int i = 0; i < n; ++i)
        if (ds.at(i).coordinate) bins[detail::grid_bin(*ds.at(i).coordinate, bin_size)].push_back(i);

    EvalSets es;
    for (int i = 0; i < n; ++i) {
        const std::string& id = ds.at(i).id;
        const std::string& tid = truth.at(id);
        const auto& group = pages_of_truth.at(tid);
        if (group.size() < 2) continue;
        std::vector<std::string> dups;
        for (int j : group)
            if (j != i) dups.push_back(ds.at(j).id);
        std::sort(dups.begin(), dups.end());

        std::vector<int> candidates;
        if (ds.at(i).coordinate) {
            const auto& members = bins.at(detail::grid_bin(*ds.at(i).coordinate, bin_size));
            for (int j : members)
                if (truth.at(ds.at(j).id) != tid) candidates.push_back(j);
        }
        std::vector<std::string> negs;
        std::size_t want = static_cast<std::size_t>(negatives_per_probe);
        if (candidates.size() <= want) {
            for (int j : candidates) negs.push_back(ds.at(j).id);
        } else {
            rng.shuffle(candidates);
            for (std::size_t k = 0; k < want; ++k) negs.push_back(ds.at(candidates[k]).id);
        }
        while (negs.size() < want && n > static_cast<int>(group.size())) {
            int j = rng.uniform_int(n);
            if (truth.at(ds.at(j).id) == tid) continue;
            negs.push_back(ds.at(j).id);
        }
        std::sort(negs.begin(), negs.end());
        negs.erase(std::unique(negs.begin(), negs.end()), negs.end());

        es.theta.push_back(id);
        es.dups[id] = std::move(dups);
        if (!negs.empty()) {
            es.omega.push_back(id);
            es.nondups[id] = std::move(negs);
        }
    }
    return es;
}

}  // namespace placedup
