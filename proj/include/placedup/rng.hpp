#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace placedup {

// splitmix64 generator with hand-rolled distributions. std::<random>
// distributions are implementation-defined, which would break the
// byte-reproducibility contract across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // [0, n)
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n == 0");
        return static_cast<std::size_t>(next_u64() % n);
    }

    int uniform_int(int n) { return static_cast<int>(index(static_cast<std::size_t>(n))); }

    bool bernoulli(double p) { return next_double() < p; }

    // Box-Muller, no spare caching so the draw sequence is position-independent.
    double normal() {
        double u1 = 1.0 - next_double();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Knuth's product method; fine for the small rates used here.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        double limit = std::exp(-lambda);
        double prod = next_double();
        int k = 0;
        while (prod > limit) {
            ++k;
            prod *= next_double();
        }
        return k;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Sampling from a fixed discrete distribution via cumulative weights.
class DiscreteSampler {
public:
    DiscreteSampler() = default;

    explicit DiscreteSampler(const std::vector<double>& weights) {
        cum_.reserve(weights.size());
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("DiscreteSampler: negative weight");
            total += w;
            cum_.push_back(total);
        }
        total_ = total;
    }

    bool empty() const { return cum_.empty() || total_ <= 0.0; }

    std::size_t sample(Rng& rng) const {
        if (empty()) throw std::logic_error("DiscreteSampler: empty distribution");
        double x = rng.next_double() * total_;
        std::size_t lo = 0, hi = cum_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (cum_[mid] > x)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

private:
    std::vector<double> cum_;
    double total_ = 0.0;
};

}  // namespace placedup
