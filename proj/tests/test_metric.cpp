#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "placedup/metric.hpp"

using namespace placedup;

TEST_CASE("forward with zero weights yields zero key and value", "[metric]") {
    MetricModel m = init_metric_model(4, 6, 6, 3, 5, {"s"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
    m.w1.fill(0.0);
    m.w2.fill(0.0);
    m.wk.fill(0.0);
    m.wv.fill(0.0);
    Forward f = forward(m, {1.0, -2.0, 0.5, 3.0});
    for (double v : f.key) REQUIRE(v == 0.0);
    for (double v : f.value) REQUIRE(v == 0.0);
}

TEST_CASE("forward is deterministic and has the configured dims", "[metric]") {
    MetricModel m = init_metric_model(4, 8, 8, 3, 5, {"s"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 7);
    Vec x = {0.1, 0.2, -0.3, 0.4};
    Forward a = forward(m, x);
    Forward b = forward(m, x);
    REQUIRE(a.key == b.key);
    REQUIRE(a.value == b.value);
    REQUIRE(a.key.size() == 3);
    REQUIRE(a.value.size() == 5);
    REQUIRE_THROWS_AS(forward(m, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("distance values", "[metric]") {
    MetricModel m = init_metric_model(2, 2, 2, 2, 2, {"s"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
    Vec u = {0.5, -1.5};
    REQUIRE(distance_value(m, u, u) == 0.0);
    REQUIRE(distance_value(m, {1.0, 0.0}, {0.0, 1.0}) == 2.0);

    m.distance = DistanceKind::Cosine;
    REQUIRE_THAT(distance_value(m, {1.0, 0.0}, {0.0, 2.0}), Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(distance_value(m, {1.0, 1.0}, {2.0, 2.0}), Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE(distance_value(m, {0.0, 0.0}, {1.0, 1.0}) == 1.0);  // zero-vector guard

    m.distance = DistanceKind::Bilinear;
    m.bilinear = Mat::identity(2);
    REQUIRE(distance_value(m, {1.0, 2.0}, {3.0, 4.0}) == 11.0);
    REQUIRE(loss_distance(m, {1.0, 2.0}, {3.0, 4.0}) == -11.0);  // negated for ranking

    m.distance = DistanceKind::Euclidean;
    REQUIRE_THROWS_AS(distance_value(m, {1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("pair loss formula", "[metric]") {
    REQUIRE(pair_loss(0.25, 1, 1.0) == 0.25);
    REQUIRE(pair_loss(0.25, 0, 1.0) == 0.75);
    REQUIRE(pair_loss(2.0, 0, 1.0) == 0.0);
}

TEST_CASE("pair loss is nonnegative and zero exactly on the satisfied set", "[metric][property]") {
    Rng rng(55);
    for (int trial = 0; trial < 500; ++trial) {
        double d = rng.uniform(0.0, 3.0);
        int y = rng.bernoulli(0.5) ? 1 : 0;
        double alpha = rng.uniform(0.1, 2.0);
        double l = pair_loss(d, y, alpha);
        REQUIRE(l >= 0.0);
        bool zero_set = (y == 1 && d == 0.0) || (y == 0 && d >= alpha);
        REQUIRE((l == 0.0) == zero_set);
    }
}

TEST_CASE("triplet loss formula", "[metric]") {
    REQUIRE(triplet_loss(0.2, 0.5, 0.1) == 0.0);
    REQUIRE_THAT(triplet_loss(0.2, 0.5, 0.4), Catch::Matchers::WithinAbs(0.1, 1e-12));
    Vec u = {1.0, 2.0};
    Vec p = {0.5, 0.5};
    REQUIRE(triplet_loss(u, p, p, 0.7) == 0.7);  // identical positive and negative leave the margin
}

TEST_CASE("hard selection follows the slack-scaled batch mean", "[metric]") {
    SECTION("worked example: positive d=2, negative d=1, beta=1") {
        // scores {+2, -1}, tau = 0.5, strict > selects only the positive
        auto sel = hard_select({hard_sample_score(2.0, 1), hard_sample_score(1.0, 0)}, 1.0);
        REQUIRE(sel == std::vector<int>{0});
    }
    SECTION("all scores equal falls back to one argmax pair") {
        auto sel = hard_select({0.5, 0.5, 0.5}, 1.0);
        REQUIRE(sel.size() == 1);
    }
    SECTION("beta = 0 selects exactly the positive-score pairs") {
        auto sel = hard_select({0.3, -0.2, 0.0, 1.5}, 0.0);
        REQUIRE(sel == std::vector<int>{0, 3});
    }
}

TEST_CASE("hard selection is monotone in score", "[metric][property]") {
    Rng rng(66);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(2 + rng.index(20));
        for (double& s : scores) s = rng.uniform(-2.0, 2.0);
        double beta = rng.uniform(0.0, 2.0);
        auto sel = hard_select(scores, beta);
        std::vector<bool> in(scores.size(), false);
        for (int i : sel) in[static_cast<std::size_t>(i)] = true;
        if (sel.size() > 1 || scores.size() == 1) {  // threshold rule applied (no fallback)
            for (std::size_t i = 0; i < scores.size(); ++i)
                for (std::size_t j = 0; j < scores.size(); ++j)
                    if (in[i] && scores[j] > scores[i]) REQUIRE(in[j]);
        }
    }
}

TEST_CASE("attention weights", "[metric]") {
    SECTION("single source gets weight one") {
        MetricModel m = init_metric_model(2, 2, 2, 1, 2, {"only"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
        REQUIRE(attention_weight(m, {0.7}, {0.3}, 0) == 1.0);
    }
    SECTION("two sources with equal scores split evenly") {
        MetricModel m = init_metric_model(2, 2, 2, 1, 2, {"s1", "s2"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
        m.q.fill(0.25);
        auto w = attention_all_weights(m, {0.7}, {0.3});
        REQUIRE_THAT(w[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
        REQUIRE_THAT(w[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
    }
    SECTION("scores (ln 3, 0) give weights (0.75, 0.25)") {
        MetricModel m = init_metric_model(2, 2, 2, 1, 2, {"s1", "s2"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
        m.q.fill(0.0);
        m.q.at(0, 0) = std::log(3.0);  // q(s1) = (ln 3, 0), q(s2) = (0, 0)
        auto w = attention_all_weights(m, {1.0}, {0.0});
        REQUIRE_THAT(w[0], Catch::Matchers::WithinAbs(0.75, 1e-12));
        REQUIRE_THAT(w[1], Catch::Matchers::WithinAbs(0.25, 1e-12));
    }
    SECTION("unregistered source is an error") {
        MetricModel m = init_metric_model(2, 2, 2, 1, 2, {"s1"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0, 1);
        REQUIRE_THROWS_AS(m.source_index("nope"), std::invalid_argument);
    }
}

TEST_CASE("attention weights sum to one and ignore constant score shifts", "[metric][property]") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        int dk = 3;
        MetricModel m = init_metric_model(2, 2, 2, dk, 2, {"a", "b", "c"}, DistanceKind::Euclidean, LossKind::Pairwise, 1.0,
                                          trial + 1);
        m.q.fill_uniform(rng, -1.0, 1.0);
        Vec ka(static_cast<std::size_t>(dk)), kb(static_cast<std::size_t>(dk));
        for (double& v : ka) v = rng.uniform(-1.0, 1.0);
        for (double& v : kb) v = rng.uniform(-1.0, 1.0);
        auto w = attention_all_weights(m, ka, kb);
        double total = 0.0;
        for (double v : w) total += v;
        REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-9));

        // adding mu * cat to every q row shifts all scores by the same constant
        Vec cat = ka;
        cat.insert(cat.end(), kb.begin(), kb.end());
        double cat_sq = dot(cat, cat);
        if (cat_sq < 1e-9) continue;
        double mu = rng.uniform(-2.0, 2.0);
        MetricModel shifted = m;
        for (int s = 0; s < shifted.q.rows; ++s)
            for (int j = 0; j < shifted.q.cols; ++j) shifted.q.at(s, j) += mu * cat[static_cast<std::size_t>(j)];
        auto w2 = attention_all_weights(shifted, ka, kb);
        for (std::size_t i = 0; i < w.size(); ++i) REQUIRE_THAT(w2[i], Catch::Matchers::WithinAbs(w[i], 1e-9));
    }
}

TEST_CASE("scaling all q vectors preserves the argmax source", "[metric][property]") {
    Rng rng(88);
    for (int trial = 0; trial < 100; ++trial) {
        MetricModel m = init_metric_model(2, 2, 2, 2, 2, {"a", "b", "c", "d"}, DistanceKind::Euclidean,
                                          LossKind::Pairwise, 1.0, trial + 100);
        m.q.fill_uniform(rng, -1.0, 1.0);
        Vec ka = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        Vec kb = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        auto w = attention_all_weights(m, ka, kb);
        MetricModel scaled = m;
        double lambda = rng.uniform(0.1, 5.0);
        for (double& v : scaled.q.a) v *= lambda;
        auto w2 = attention_all_weights(scaled, ka, kb);
        auto argmax = [](const Vec& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
        REQUIRE(argmax(w) == argmax(w2));
    }
}
