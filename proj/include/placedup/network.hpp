#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "placedup/place.hpp"
#include "placedup/rng.hpp"

namespace placedup {

// Place network N = {P, E1 u E2}: coordinate edges join places in the same
// grid bin, category edges join places sharing a category. Membership lists
// are stored instead of explicit edge sets; neighbors and uniform edge draws
// are derived on demand, so dense categories never materialize quadratically.
class PlaceNetwork {
public:
    PlaceNetwork() = default;

    double bin_size() const { return bin_size_; }
    int size() const { return n_; }

    int bin_of(int place) const { return bin_of_[static_cast<std::size_t>(place)]; }
    const std::vector<std::vector<int>>& bin_members() const { return bin_members_; }
    const std::vector<std::pair<std::int64_t, std::int64_t>>& bin_keys() const { return bin_keys_; }
    const std::vector<std::vector<int>>& category_members() const { return cat_members_; }
    const std::vector<std::string>& catalogue() const { return catalogue_; }
    const std::vector<std::vector<int>>& categories_of() const { return cats_of_; }

    // Distinct same-bin neighbors (E1), excluding the place itself.
    std::vector<int> coord_neighbors(int place) const {
        std::vector<int> out;
        int b = bin_of_[static_cast<std::size_t>(place)];
        if (b < 0) return out;
        for (int j : bin_members_[static_cast<std::size_t>(b)])
            if (j != place) out.push_back(j);
        return out;
    }

    // Distinct category-sharing neighbors (E2), excluding the place itself.
    std::vector<int> category_neighbors(int place) const {
        std::vector<int> out;
        for (int c : cats_of_[static_cast<std::size_t>(place)])
            for (int j : cat_members_[static_cast<std::size_t>(c)])
                if (j != place) out.push_back(j);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool has_coord_edge(int a, int b) const {
        if (a == b) return false;
        int ba = bin_of_[static_cast<std::size_t>(a)];
        return ba >= 0 && ba == bin_of_[static_cast<std::size_t>(b)];
    }

    bool has_cat_edge(int a, int b) const {
        if (a == b) return false;
        return shared_categories(a, b) > 0;
    }

    int shared_categories(int a, int b) const {
        const auto& ca = cats_of_[static_cast<std::size_t>(a)];
        const auto& cb = cats_of_[static_cast<std::size_t>(b)];
        int shared = 0;
        std::size_t i = 0, j = 0;
        while (i < ca.size() && j < cb.size()) {
            if (ca[i] == cb[j]) {
                ++shared;
                ++i;
                ++j;
            } else if (ca[i] < cb[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        return shared;
    }

    std::uint64_t coord_edge_count() const {
        std::uint64_t total = 0;
        for (const auto& m : bin_members_) total += static_cast<std::uint64_t>(m.size()) * (m.size() - 1) / 2;
        return total;
    }

    bool has_category_edges() const {
        for (const auto& m : cat_members_)
            if (m.size() >= 2) return true;
        return false;
    }

    bool has_edges() const { return coord_edge_count() > 0 || has_category_edges(); }

    // Uniform draw over E1: bins partition places, so weighting bins by
    // C(size, 2) is exact.
    std::pair<int, int> sample_coord_edge(Rng& rng) const {
        const auto& members = bin_members_[coord_bin_sampler_.sample(rng)];
        std::size_t i = rng.index(members.size());
        std::size_t j = rng.index(members.size() - 1);
        if (j >= i) ++j;
        return {members[i], members[j]};
    }

    // Uniform draw over E2: category groups overlap (a pair sharing m
    // categories would be drawn m times as often), so group draws are
    // accepted with probability 1/m.
    std::pair<int, int> sample_cat_edge(Rng& rng) const {
        while (true) {
            const auto& members = cat_members_[cat_group_sampler_.sample(rng)];
            std::size_t i = rng.index(members.size());
            std::size_t j = rng.index(members.size() - 1);
            if (j >= i) ++j;
            int a = members[i], b = members[j];
            int m = shared_categories(a, b);
            if (m == 1 || rng.next_double() < 1.0 / m) return {a, b};
        }
    }

    // Node degree across both edge types (distinct neighbors per type).
    std::vector<double> degrees() const {
        std::vector<double> deg(static_cast<std::size_t>(n_), 0.0);
        for (int i = 0; i < n_; ++i) {
            int b = bin_of_[static_cast<std::size_t>(i)];
            if (b >= 0) deg[static_cast<std::size_t>(i)] += static_cast<double>(bin_members_[static_cast<std::size_t>(b)].size() - 1);
            deg[static_cast<std::size_t>(i)] += static_cast<double>(category_neighbors(i).size());
        }
        return deg;
    }

    friend PlaceNetwork build_network(const Dataset& ds, double bin_size, const std::vector<std::string>& catalogue);

private:
    int n_ = 0;
    double bin_size_ = 0.01;
    std::vector<int> bin_of_;  // -1 when the place has no coordinate
    std::vector<std::pair<std::int64_t, std::int64_t>> bin_keys_;
    std::vector<std::vector<int>> bin_members_;
    std::vector<std::string> catalogue_;
    std::vector<std::vector<int>> cat_members_;
    std::vector<std::vector<int>> cats_of_;  // sorted catalogue indices per place
    DiscreteSampler coord_bin_sampler_;
    DiscreteSampler cat_group_sampler_;
};

inline PlaceNetwork build_network(const Dataset& ds, double bin_size, const std::vector<std::string>& catalogue = {}) {
    if (bin_size <= 0.0) throw std::invalid_argument("build_network: bin_size must be > 0");
    PlaceNetwork net;
    net.n_ = ds.size();
    net.bin_size_ = bin_size;
    net.catalogue_ = catalogue.empty() ? ds.category_catalogue() : catalogue;
    std::vector<std::string> sorted_cat = net.catalogue_;
    std::sort(sorted_cat.begin(), sorted_cat.end());
    if (std::adjacent_find(sorted_cat.begin(), sorted_cat.end()) != sorted_cat.end())
        throw std::invalid_argument("build_network: catalogue has duplicate categories");
    net.catalogue_ = sorted_cat;

    std::map<std::string, int> cat_index;
    for (std::size_t c = 0; c < net.catalogue_.size(); ++c) cat_index[net.catalogue_[c]] = static_cast<int>(c);
    net.cat_members_.assign(net.catalogue_.size(), {});
    net.cats_of_.assign(static_cast<std::size_t>(net.n_), {});

    std::map<std::pair<std::int64_t, std::int64_t>, int> bin_index;
    net.bin_of_.assign(static_cast<std::size_t>(net.n_), -1);
    for (int i = 0; i < net.n_; ++i) {
        const Place& p = ds.at(i);
        if (p.coordinate) {
            auto key = std::make_pair(static_cast<std::int64_t>(std::floor(p.coordinate->lat / bin_size)),
                                      static_cast<std::int64_t>(std::floor(p.coordinate->lon / bin_size)));
            auto [it, inserted] = bin_index.emplace(key, static_cast<int>(net.bin_keys_.size()));
            if (inserted) {
                net.bin_keys_.push_back(key);
                net.bin_members_.emplace_back();
            }
            net.bin_of_[static_cast<std::size_t>(i)] = it->second;
            net.bin_members_[static_cast<std::size_t>(it->second)].push_back(i);
        }
        for (const auto& cat : p.categories) {
            auto it = cat_index.find(cat);
            if (it == cat_index.end()) continue;  // outside the catalogue
            net.cats_of_[static_cast<std::size_t>(i)].push_back(it->second);
            net.cat_members_[static_cast<std::size_t>(it->second)].push_back(i);
        }
        std::sort(net.cats_of_[static_cast<std::size_t>(i)].begin(), net.cats_of_[static_cast<std::size_t>(i)].end());
    }

    std::vector<double> bin_w(net.bin_members_.size());
    for (std::size_t b = 0; b < net.bin_members_.size(); ++b) {
        double m = static_cast<double>(net.bin_members_[b].size());
        bin_w[b] = m * (m - 1.0) / 2.0;
    }
    net.coord_bin_sampler_ = DiscreteSampler(bin_w);

    std::vector<double> cat_w(net.cat_members_.size());
    for (std::size_t c = 0; c < net.cat_members_.size(); ++c) {
        double m = static_cast<double>(net.cat_members_[c].size());
        cat_w[c] = m * (m - 1.0) / 2.0;
    }
    net.cat_group_sampler_ = DiscreteSampler(cat_w);
    return net;
}

}  // namespace placedup
