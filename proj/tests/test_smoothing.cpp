#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gradcheck.hpp"
#include "placedup/network.hpp"
#include "placedup/smoothing.hpp"
#include "placedup/synthetic.hpp"

using namespace placedup;

TEST_CASE("per-sample loss at score zero is log 2", "[smoothing]") {
    SmoothingModel m = init_smoothing_model(4, 3, 1);
    // phi initializes to zero, so phi_c . g(x) = 0 and sigma(0) = 0.5
    Vec x = {0.3, -0.2, 0.5, 0.1};
    double loss = smoothing_sample_loss(m, x, 1, +1.0);
    REQUIRE_THAT(loss, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
    REQUIRE_THAT(smoothing_sample_loss(m, x, 2, -1.0), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
}

TEST_CASE("per-sample losses are strictly positive", "[smoothing][property]") {
    Rng rng(31);
    SmoothingModel m = init_smoothing_model(5, 8, 2);
    m.phi.fill_uniform(rng, -1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vec x(5);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        double loss = smoothing_sample_loss(m, x, rng.uniform_int(8), rng.bernoulli(0.5) ? 1.0 : -1.0);
        REQUIRE(loss > 0.0);
    }
}

TEST_CASE("smoothing gradient matches central finite differences", "[smoothing][oracle]") {
    const int dim = 5;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        SmoothingModel m = init_smoothing_model(dim, 6, seed);
        m.phi.fill_uniform(rng, -0.8, 0.8);
        Vec x(dim);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        int pos = 2;
        std::vector<int> negs = {0, 4, 5};

        SmoothingGrad grad = smoothing_sample_grad(m, x, pos, negs);
        Mat dphi(m.phi.rows, m.phi.cols);
        for (const auto& [row, g] : grad.dphi) axpy(1.0, g.data(), dphi.row(row), dim);

        auto loss = [&]() {
            double l = smoothing_sample_loss(m, x, pos, +1.0);
            for (int n : negs) l += smoothing_sample_loss(m, x, n, -1.0);
            return l;
        };
        std::vector<ParamView> params = {{"w", m.w.a.data(), m.w.a.size()},
                                         {"b", m.b.data(), m.b.size()},
                                         {"phi", m.phi.a.data(), m.phi.a.size()}};
        std::vector<ParamView> analytic = {{"w", grad.dw.a.data(), grad.dw.a.size()},
                                           {"b", grad.db.data(), grad.db.size()},
                                           {"phi", dphi.a.data(), dphi.a.size()}};
        auto res = gradcheck::check(params, analytic, loss);
        INFO("seed " << seed << " worst " << res.worst);
        REQUIRE(res.max_rel_err <= 1e-4);
    }
}

TEST_CASE("zero-edge network passes features through the initial map", "[smoothing]") {
    Dataset ds;
    for (int i = 0; i < 3; ++i) {
        Place p;
        p.id = "p" + std::to_string(i);
        p.name = p.id;
        ds.add(std::move(p));  // no coordinates, no categories
    }
    PlaceNetwork net = build_network(ds, 0.01);
    REQUIRE_FALSE(net.has_edges());

    Mat x(3, 4);
    Rng rng(2);
    x.fill_uniform(rng, -1.0, 1.0);
    SmoothingConfig cfg;
    cfg.seed = 11;
    SmoothingResult res = train_smoothing(x, net, cfg);
    REQUIRE_FALSE(res.trained);
    REQUIRE_FALSE(res.warning.empty());
    SmoothingModel init = init_smoothing_model(4, 3, cfg.seed);
    for (int i = 0; i < 3; ++i) {
        Vec expect = init.apply(x.row_vec(i));
        for (int j = 0; j < 4; ++j) REQUIRE(res.smoothed.at(i, j) == expect[static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("training is deterministic per seed", "[smoothing]") {
    SyntheticConfig scfg;
    scfg.n_true_places = 40;
    scfg.dup_rate = 1.0;
    scfg.seed = 17;
    SyntheticData data = generate_synthetic(scfg);
    PlaceNetwork net = build_network(data.dataset, 0.01);
    Mat x(data.dataset.size(), 6);
    Rng rng(3);
    x.fill_uniform(rng, -0.5, 0.5);

    SmoothingConfig cfg;
    cfg.steps = 2000;
    cfg.seed = 23;
    SmoothingResult a = train_smoothing(x, net, cfg);
    SmoothingResult b = train_smoothing(x, net, cfg);
    REQUIRE(a.smoothed.a == b.smoothed.a);
    REQUIRE(a.model.w.a == b.model.w.a);
    REQUIRE(a.model.phi.a == b.model.phi.a);
}

TEST_CASE("smoothing tightens same-bin pairs relative to all pairs", "[smoothing][derived]") {
    SyntheticConfig scfg;
    scfg.n_true_places = 150;
    scfg.dup_rate = 1.5;
    scfg.seed = 29;
    SyntheticData data = generate_synthetic(scfg);
    PlaceNetwork net = build_network(data.dataset, 0.01);

    Mat x(data.dataset.size(), 10);
    Rng rng(41);
    x.fill_uniform(rng, -0.7, 0.7);

    double before = same_bin_distance_ratio(x, net);
    SmoothingConfig cfg;
    cfg.steps = 30000;
    cfg.seed = 31;
    SmoothingResult res = train_smoothing(x, net, cfg);
    double after = same_bin_distance_ratio(res.smoothed, net);
    REQUIRE(after < before);
}

TEST_CASE("lock-free smoothing stays finite", "[smoothing][threads]") {
    SyntheticConfig scfg;
    scfg.n_true_places = 40;
    scfg.dup_rate = 1.0;
    scfg.seed = 19;
    SyntheticData data = generate_synthetic(scfg);
    PlaceNetwork net = build_network(data.dataset, 0.01);
    Mat x(data.dataset.size(), 6);
    Rng rng(3);
    x.fill_uniform(rng, -0.5, 0.5);
    SmoothingConfig cfg;
    cfg.steps = 4000;
    cfg.threads = 4;
    SmoothingResult res = train_smoothing(x, net, cfg);
    REQUIRE(all_finite(res.smoothed));
}
