#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "placedup/eval.hpp"
#include "placedup/rng.hpp"

using namespace placedup;

namespace {

KnnIndex line_index() {
    Mat e(3, 1);
    e.at(0, 0) = 0.0;
    e.at(1, 0) = 1.0;
    e.at(2, 0) = 3.0;
    return KnnIndex::build({"a", "b", "c"}, std::move(e));
}

std::pair<KnnIndex, oracle::Embeddings> random_instance(Rng& rng, int n, int dim) {
    Mat e(n, dim);
    e.fill_uniform(rng, -2.0, 2.0);
    std::vector<std::string> ids;
    oracle::Embeddings emb;
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "p%03d", i);
        ids.emplace_back(buf);
        emb[buf] = e.row_vec(i);
    }
    return {KnnIndex::build(ids, std::move(e)), std::move(emb)};
}

EvalSets random_eval_sets(Rng& rng, const std::vector<std::string>& ids) {
    std::vector<LabeledPair> labels;
    for (int k = 0; k < static_cast<int>(ids.size()) * 3; ++k) {
        std::size_t i = rng.index(ids.size());
        std::size_t j = rng.index(ids.size());
        if (i == j) continue;
        LabeledPair lp;
        lp.a = ids[std::min(i, j)];
        lp.b = ids[std::max(i, j)];
        lp.y = rng.bernoulli(0.4) ? 1 : 0;
        lp.source = "s";
        labels.push_back(lp);
    }
    return build_eval_sets(labels);
}

}  // namespace

TEST_CASE("knn on a line returns nearer point first", "[eval]") {
    KnnIndex idx = line_index();
    auto got = knn_exact(idx, "b", 2);
    REQUIRE(got == std::vector<std::string>{"a", "c"});
}

TEST_CASE("knn breaks distance ties by ascending id", "[eval]") {
    Mat e(3, 1);
    e.at(0, 0) = 0.0;  // query
    e.at(1, 0) = 1.0;
    e.at(2, 0) = -1.0;
    KnnIndex idx = KnnIndex::build({"q", "zz", "aa"}, std::move(e));
    auto got = knn_exact(idx, "q", 2);
    REQUIRE(got == std::vector<std::string>{"aa", "zz"});
}

TEST_CASE("knn contract errors", "[eval]") {
    KnnIndex idx = line_index();
    REQUIRE_THROWS_AS(knn_exact(idx, "nope", 1), ValidationError);
    REQUIRE_THROWS_AS(knn_exact(idx, "a", 3), std::invalid_argument);  // K < N required
    REQUIRE_THROWS_AS(knn_exact(idx, "a", 0), std::invalid_argument);
}

TEST_CASE("knn equals the brute-force sort oracle", "[eval][oracle][property]") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 5 + static_cast<int>(rng.index(60));
        auto [idx, emb] = random_instance(rng, n, 4);
        std::string query = idx.ids[rng.index(idx.ids.size())];
        int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n - 1)));
        auto fast = knn_exact(idx, query, k);
        auto ranked = oracle::ranked_neighbors(emb, query);
        ranked.resize(static_cast<std::size_t>(k));
        REQUIRE(fast == ranked);
    }
}

TEST_CASE("acc on hand-built probes", "[eval]") {
    Mat e(3, 1);
    e.at(0, 0) = 0.0;
    e.at(1, 0) = 0.5;  // duplicate, d = 0.25
    e.at(2, 0) = 1.0;  // non-duplicate, d = 1.0
    KnnIndex idx = KnnIndex::build({"a", "p", "n"}, std::move(e));
    EvalSets sets;
    sets.omega = {"a"};
    sets.theta = {"a"};
    sets.dups["a"] = {"p"};
    sets.nondups["a"] = {"n"};
    REQUIRE(acc(idx, sets) == 1.0);

    Mat tie(3, 1);
    tie.at(0, 0) = 0.0;
    tie.at(1, 0) = 1.0;
    tie.at(2, 0) = -1.0;
    KnnIndex tie_idx = KnnIndex::build({"a", "p", "n"}, std::move(tie));
    REQUIRE(acc(tie_idx, sets) == 0.0);  // ties count as failures
}

TEST_CASE("acc requires a nonempty Omega", "[eval]") {
    KnnIndex idx = line_index();
    EvalSets sets;
    REQUIRE_THROWS_AS(acc(idx, sets), ValidationError);
}

TEST_CASE("acc equals the brute-force reference exactly", "[eval][oracle][property]") {
    Rng rng(9);
    int done = 0;
    for (int trial = 0; done < 20 && trial < 200; ++trial) {
        auto [idx, emb] = random_instance(rng, 20, 3);
        EvalSets sets = random_eval_sets(rng, idx.ids);
        if (sets.omega.empty()) continue;
        ++done;
        REQUIRE(acc(idx, sets) == oracle::acc_reference(emb, sets));
    }
    REQUIRE(done == 20);
}

TEST_CASE("precision and recall at K on a hand-built probe", "[eval][derived]") {
    // probe with 2 duplicates, both within the top 5
    Mat e(8, 1);
    std::vector<std::string> ids = {"a", "d1", "d2", "x1", "x2", "x3", "x4", "x5"};
    double pos[8] = {0.0, 0.1, 0.2, 0.3, 0.4, 10.0, 11.0, 12.0};
    for (int i = 0; i < 8; ++i) e.at(i, 0) = pos[i];
    KnnIndex idx = KnnIndex::build(ids, std::move(e));
    EvalSets sets;
    sets.theta = {"a"};
    sets.omega = {"a"};
    sets.dups["a"] = {"d1", "d2"};
    sets.nondups["a"] = {"x1"};
    EvalReport r;
    precision_recall_at_k(idx, sets, r, 7);
    REQUIRE_THAT(r.pre_at_k[4], Catch::Matchers::WithinAbs(0.4, 1e-12));  // PRE@5 = 2/5
    REQUIRE_THAT(r.rec_at_k[4], Catch::Matchers::WithinAbs(1.0, 1e-12));  // REC@5 = 1
    // K = N-1 retrieves everything
    REQUIRE_THAT(r.rec_at_k[6], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("curves match the brute-force reference exactly", "[eval][oracle][property]") {
    Rng rng(12);
    int done = 0;
    for (int trial = 0; done < 15 && trial < 200; ++trial) {
        auto [idx, emb] = random_instance(rng, 25, 3);
        EvalSets sets = random_eval_sets(rng, idx.ids);
        if (sets.theta.empty()) continue;
        ++done;
        EvalReport r;
        precision_recall_at_k(idx, sets, r, 30);
        auto ref = oracle::precision_recall_reference(emb, sets, 30);
        for (int k = 0; k < 30; ++k) {
            REQUIRE(r.pre_at_k[static_cast<std::size_t>(k)] == ref.pre[static_cast<std::size_t>(k)]);
            REQUIRE(r.rec_at_k[static_cast<std::size_t>(k)] == ref.rec[static_cast<std::size_t>(k)]);
        }
    }
    REQUIRE(done == 15);
}

TEST_CASE("REC@K and K*PRE@K are monotone in K", "[eval][property]") {
    Rng rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        auto [idx, emb] = random_instance(rng, 30, 3);
        (void)emb;
        EvalSets sets = random_eval_sets(rng, idx.ids);
        if (sets.theta.empty()) continue;
        EvalReport r;
        precision_recall_at_k(idx, sets, r, 40);
        for (int k = 1; k < 40; ++k) {
            REQUIRE(r.rec_at_k[static_cast<std::size_t>(k)] >= r.rec_at_k[static_cast<std::size_t>(k - 1)] - 1e-12);
            double hits_k = (k + 1) * r.pre_at_k[static_cast<std::size_t>(k)];
            double hits_prev = k * r.pre_at_k[static_cast<std::size_t>(k - 1)];
            REQUIRE(hits_k >= hits_prev - 1e-12);
        }
        for (double v : r.pre_at_k) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("acc is invariant under isometries and positive scaling", "[eval][property]") {
    Rng rng(19);
    auto [idx, emb] = random_instance(rng, 24, 3);
    (void)emb;
    EvalSets sets = random_eval_sets(rng, idx.ids);
    REQUIRE_FALSE(sets.omega.empty());
    double base = acc(idx, sets);

    // translation + Givens rotation + positive scale
    double theta = 0.7;
    double scale = 2.5;
    Mat moved = idx.embeddings;
    for (int i = 0; i < moved.rows; ++i) {
        double x = idx.embeddings.at(i, 0), y = idx.embeddings.at(i, 1), z = idx.embeddings.at(i, 2);
        double rx = std::cos(theta) * x - std::sin(theta) * y;
        double ry = std::sin(theta) * x + std::cos(theta) * y;
        moved.at(i, 0) = scale * (rx + 10.0);
        moved.at(i, 1) = scale * (ry - 3.0);
        moved.at(i, 2) = scale * (z + 1.0);
    }
    KnnIndex moved_idx = KnnIndex::build(idx.ids, std::move(moved));
    REQUIRE_THAT(acc(moved_idx, sets), Catch::Matchers::WithinAbs(base, 1e-9));
}

TEST_CASE("report json and curves tsv round-trip", "[eval]") {
    EvalReport r;
    r.acc = 0.875;
    r.pre_at_k = {0.5, 0.25};
    r.rec_at_k = {0.5, 1.0};
    r.avg_pre = 0.375;
    r.avg_rec = 0.75;
    auto tmp = std::filesystem::temp_directory_path();
    std::string jpath = (tmp / "placedup_report.json").string();
    write_report_json(jpath, r, "cafe0123", 5);
    EvalReport back = load_report_json(jpath);
    REQUIRE(back.acc == r.acc);
    REQUIRE(back.pre_at_k == r.pre_at_k);
    REQUIRE(back.rec_at_k == r.rec_at_k);
    std::remove(jpath.c_str());

    std::string tpath = (tmp / "placedup_curves.tsv").string();
    write_curves_tsv(tpath, r, "cafe0123");
    std::string blob = read_file(tpath);
    REQUIRE(blob.find("# config_hash=cafe0123") == 0);
    REQUIRE(blob.find("K\tPRE\tREC") != std::string::npos);
    std::remove(tpath.c_str());
}

TEST_CASE("place embedding file round-trip", "[eval]") {
    Mat e(2, 3);
    e.at(0, 0) = 0.1;
    e.at(0, 1) = -1.0 / 3.0;
    e.at(1, 2) = 42.0;
    auto tmp = std::filesystem::temp_directory_path();
    std::string path = (tmp / "placedup_place.emb").string();
    save_place_embeddings(path, {"p1", "p2"}, e);
    PlaceEmbeddings back = load_place_embeddings(path);
    REQUIRE(back.ids == std::vector<std::string>{"p1", "p2"});
    REQUIRE(back.embeddings.a == e.a);
    std::remove(path.c_str());
}
