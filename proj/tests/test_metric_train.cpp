#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gradcheck.hpp"
#include "placedup/metric_train.hpp"

using namespace placedup;

namespace {

struct Scenario {
    Mat features;
    std::vector<PairSample> pairs;
    std::vector<std::string> sources;
    MetricModel model;
    TrainConfig cfg;
    DenoisingState dn;
    std::map<int, std::vector<int>> nondups;
};

Scenario make_scenario(std::uint64_t seed, DistanceKind distance, LossKind loss, bool attention, bool denoise) {
    Scenario sc;
    Rng rng(seed);
    const int n = 8, input = 5;
    sc.features = Mat(n, input);
    sc.features.fill_uniform(rng, -1.0, 1.0);
    sc.sources = {"s0", "s1", "s2"};
    sc.pairs = {{0, 1, 1, 0}, {2, 3, 0, 1}, {4, 5, 1, 2}, {6, 7, 0, 0}, {1, 4, 0, 1}};
    sc.nondups[0] = {3};
    sc.nondups[4] = {6};

    sc.cfg.loss = loss;
    sc.cfg.distance = distance;
    sc.cfg.attention = attention;
    sc.cfg.denoise = denoise;
    sc.cfg.hard = false;
    sc.cfg.alpha = 1.0;
    sc.cfg.rho = 0.8;
    sc.cfg.hidden1 = 6;
    sc.cfg.hidden2 = 6;
    sc.cfg.dk = 3;
    sc.cfg.dv = 4;
    sc.model = init_metric_model(input, 6, 6, 3, 4, sc.sources, distance, loss, sc.cfg.alpha, seed ^ 0xfeedULL);
    // break the zero-init symmetry of the source table
    sc.model.q.fill_uniform(rng, -0.4, 0.4);

    if (denoise) {
        sc.dn.active = true;
        sc.dn.rho = sc.cfg.rho;
        sc.dn.centers = Mat(3, 4);
        sc.dn.centers.fill_uniform(rng, -0.5, 0.5);
        Mat u = value_embeddings(sc.model, sc.features);
        sc.dn.target = target_dist(soft_assign_all(u, sc.dn.centers));
    }
    return sc;
}

// Gradient checks need the loss surface to be smooth in an FD-sized
// neighborhood: every ReLU pre-activation and every hinge must sit away
// from its kink.
bool kink_safe(const Scenario& sc, double margin = 1e-3) {
    std::vector<Forward> fwd;
    for (int i = 0; i < sc.features.rows; ++i) {
        Forward f = forward(sc.model, sc.features.row_vec(i));
        for (double z : f.z1)
            if (std::fabs(z) < margin) return false;
        for (double z : f.z2)
            if (std::fabs(z) < margin) return false;
        for (double v : f.value)
            if (!std::isfinite(v)) return false;
        fwd.push_back(std::move(f));
    }
    if (sc.model.loss == LossKind::Pairwise) {
        for (const auto& p : sc.pairs) {
            double d = loss_distance(sc.model, fwd[static_cast<std::size_t>(p.a)].value, fwd[static_cast<std::size_t>(p.b)].value);
            if (p.y == 0 && std::fabs(sc.cfg.alpha - d) < margin) return false;
        }
    } else {
        for (const auto& p : sc.pairs) {
            if (p.y != 1) continue;
            auto it = sc.nondups.find(p.a);
            if (it == sc.nondups.end()) continue;
            int neg = it->second[0];
            double d_ap = loss_distance(sc.model, fwd[static_cast<std::size_t>(p.a)].value, fwd[static_cast<std::size_t>(p.b)].value);
            double d_an = loss_distance(sc.model, fwd[static_cast<std::size_t>(p.a)].value, fwd[static_cast<std::size_t>(neg)].value);
            if (std::fabs(d_ap - d_an + sc.cfg.alpha) < margin) return false;
        }
    }
    if (sc.model.distance == DistanceKind::Cosine) {
        for (const auto& f : fwd)
            if (norm2(f.value) < 1e-2) return false;
    }
    return true;
}

double check_full_model(DistanceKind distance, LossKind loss, bool attention, bool denoise, int points) {
    double worst = 0.0;
    int done = 0;
    for (std::uint64_t seed = 1; done < points && seed < 400; ++seed) {
        Scenario sc = make_scenario(seed, distance, loss, attention, denoise);
        if (!kink_safe(sc)) continue;
        ++done;

        Rng grad_rng(99);
        BatchResult br = metric_batch(sc.model, sc.features, sc.pairs, sc.cfg, denoise ? &sc.dn : nullptr, grad_rng,
                                      sc.nondups.empty() ? nullptr : &sc.nondups);
        auto loss_fn = [&]() {
            Rng fd_rng(99);
            return metric_batch(sc.model, sc.features, sc.pairs, sc.cfg, denoise ? &sc.dn : nullptr, fd_rng,
                                sc.nondups.empty() ? nullptr : &sc.nondups)
                .objective;
        };
        auto params = param_views(sc.model, denoise ? &sc.dn.centers : nullptr);
        auto analytic = grad_views(br.grads, denoise);
        auto res = gradcheck::check(params, analytic, loss_fn);
        INFO("seed " << seed << " worst " << res.worst);
        worst = std::max(worst, res.max_rel_err);
    }
    REQUIRE(done == points);
    return worst;
}

}  // namespace

TEST_CASE("pairwise loss full-model gradient matches finite differences", "[metric_train][oracle]") {
    REQUIRE(check_full_model(DistanceKind::Euclidean, LossKind::Pairwise, false, false, 5) <= 1e-4);
}

TEST_CASE("cosine and bilinear pairwise gradients match finite differences", "[metric_train][oracle]") {
    REQUIRE(check_full_model(DistanceKind::Cosine, LossKind::Pairwise, false, false, 3) <= 1e-4);
    REQUIRE(check_full_model(DistanceKind::Bilinear, LossKind::Pairwise, false, false, 3) <= 1e-4);
}

TEST_CASE("attention-weighted loss gradient matches finite differences", "[metric_train][oracle]") {
    REQUIRE(check_full_model(DistanceKind::Euclidean, LossKind::Pairwise, true, false, 5) <= 1e-4);
}

TEST_CASE("triplet loss full-model gradient matches finite differences", "[metric_train][oracle]") {
    REQUIRE(check_full_model(DistanceKind::Euclidean, LossKind::Triplet, false, false, 5) <= 1e-4);
}

TEST_CASE("denoising KL full-model gradient matches finite differences", "[metric_train][oracle]") {
    REQUIRE(check_full_model(DistanceKind::Euclidean, LossKind::Pairwise, false, true, 5) <= 1e-4);
}

TEST_CASE("denoise-only objective via extra_places", "[metric_train][oracle]") {
    Scenario sc = make_scenario(3, DistanceKind::Euclidean, LossKind::Pairwise, false, true);
    std::vector<int> places = {0, 1, 2, 3, 4, 5, 6, 7};
    Rng rng(1);
    BatchResult br = metric_batch(sc.model, sc.features, {}, sc.cfg, &sc.dn, rng, nullptr, places);
    REQUIRE(br.objective > 0.0);
    auto loss_fn = [&]() {
        Rng r(1);
        return metric_batch(sc.model, sc.features, {}, sc.cfg, &sc.dn, r, nullptr, places).objective;
    };
    auto params = param_views(sc.model, &sc.dn.centers);
    auto analytic = grad_views(br.grads, true);
    auto res = gradcheck::check(params, analytic, loss_fn);
    INFO(res.worst);
    REQUIRE(res.max_rel_err <= 1e-4);
}

TEST_CASE("training separates two toy entities", "[metric_train][derived]") {
    // 4 places, 2 true entities {0,1} and {2,3}, clean labels.
    Rng rng(17);
    Mat x(4, 6);
    x.fill_uniform(rng, -1.0, 1.0);
    std::vector<PairSample> pairs = {{0, 1, 1, 0}, {2, 3, 1, 0}, {0, 2, 0, 0}, {1, 3, 0, 0}, {0, 3, 0, 0}, {1, 2, 0, 0}};
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 6;
    cfg.lr = 0.02;
    cfg.hidden1 = 8;
    cfg.hidden2 = 8;
    cfg.dk = 2;
    cfg.dv = 4;
    cfg.seed = 5;
    TrainResult res = train_metric(x, pairs, {"s0"}, cfg);

    Mat u = value_embeddings(res.model, x);
    double intra1 = squared_l2(u.row(0), u.row(1), u.cols);
    double intra2 = squared_l2(u.row(2), u.row(3), u.cols);
    double inter = std::min({squared_l2(u.row(0), u.row(2), u.cols), squared_l2(u.row(0), u.row(3), u.cols),
                             squared_l2(u.row(1), u.row(2), u.cols), squared_l2(u.row(1), u.row(3), u.cols)});
    REQUIRE(intra1 < inter);
    REQUIRE(intra2 < inter);
}

TEST_CASE("training is bitwise deterministic per seed", "[metric_train]") {
    Rng rng(23);
    Mat x(10, 5);
    x.fill_uniform(rng, -1.0, 1.0);
    std::vector<PairSample> pairs;
    for (int i = 0; i < 9; ++i) pairs.push_back({i, i + 1, i % 2, i % 3});
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.hard = true;
    cfg.attention = true;
    cfg.denoise = true;
    cfg.clusters = 3;
    cfg.hidden1 = 6;
    cfg.hidden2 = 6;
    cfg.dk = 2;
    cfg.dv = 3;
    cfg.seed = 77;
    TrainResult a = train_metric(x, pairs, {"s0", "s1", "s2"}, cfg);
    TrainResult b = train_metric(x, pairs, {"s0", "s1", "s2"}, cfg);
    REQUIRE(a.model.w1.a == b.model.w1.a);
    REQUIRE(a.model.wv.a == b.model.wv.a);
    REQUIRE(a.model.q.a == b.model.q.a);
    REQUIRE(a.centers.a == b.centers.a);
    REQUIRE(a.epoch_monitor == b.epoch_monitor);
}

TEST_CASE("empty label set is an error", "[metric_train]") {
    Mat x(4, 3);
    TrainConfig cfg;
    REQUIRE_THROWS_AS(train_metric(x, {}, {"s"}, cfg), ValidationError);
}

TEST_CASE("probe losses are recorded at the configured cadence", "[metric_train]") {
    Rng rng(29);
    Mat x(12, 4);
    x.fill_uniform(rng, -1.0, 1.0);
    std::vector<PairSample> pairs;
    for (int i = 0; i + 1 < 12; i += 2) pairs.push_back({i, i + 1, (i / 2) % 2, 0});
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 3;
    cfg.probe_interval = 2;
    cfg.probe_pairs = 4;
    cfg.hidden1 = 4;
    cfg.hidden2 = 4;
    cfg.dk = 2;
    cfg.dv = 2;
    TrainResult res = train_metric(x, pairs, {"s0", "s1"}, cfg);
    REQUIRE_FALSE(res.probes.empty());
    REQUIRE(res.probes.front().first == 0);
    for (std::size_t i = 1; i + 1 < res.probes.size(); ++i) REQUIRE(res.probes[i].first % 2 == 0);
    REQUIRE(res.probes.back().first == res.steps);
}
