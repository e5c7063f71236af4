#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "placedup/embedding.hpp"
#include "placedup/rng.hpp"
#include "placedup/util.hpp"

using namespace placedup;

namespace {

EmbeddingTable tiny_table(bool subword) {
    EmbeddingTable t;
    t.dim = 3;
    t.tokens = {"oak", "cafe"};
    t.index = {{"oak", 0}, {"cafe", 1}};
    t.word = Mat(2, 3);
    double w[2][3] = {{0.1, -0.25, 1.0 / 3.0}, {2.0, 0.5, -0.125}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) t.word.at(i, j) = w[i][j];
    if (subword) {
        t.buckets = Mat(16, 3);
        Rng rng(5);
        t.buckets.fill_uniform(rng, -0.2, 0.2);
    }
    return t;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("embed_text averages token vectors", "[embedding]") {
    EmbeddingTable t = tiny_table(false);
    auto e = embed_text({"oak", "oak"}, t);
    REQUIRE_FALSE(e.empty);
    for (int j = 0; j < 3; ++j) REQUIRE(e.v[static_cast<std::size_t>(j)] == t.word.at(0, j));
}

TEST_CASE("embed_text of nothing is the flagged zero vector", "[embedding]") {
    EmbeddingTable t = tiny_table(false);
    auto e = embed_text({}, t);
    REQUIRE(e.empty);
    for (double v : e.v) REQUIRE(v == 0.0);
    // OOV-only input with subword off also contributes nothing
    auto oov = embed_text({"zzz"}, t);
    REQUIRE(oov.empty);
}

TEST_CASE("embed_text is order-invariant", "[embedding][property]") {
    EmbeddingTable t = tiny_table(true);
    auto ab = embed_text({"oak", "cafe"}, t);
    auto ba = embed_text({"cafe", "oak"}, t);
    REQUIRE(ab.v == ba.v);
}

TEST_CASE("embed_text scales linearly with the table", "[embedding][property]") {
    EmbeddingTable t = tiny_table(true);
    const double lambda = 3.5;
    EmbeddingTable scaled = t;
    for (double& v : scaled.word.a) v *= lambda;
    for (double& v : scaled.buckets.a) v *= lambda;
    auto base = embed_text({"oak", "cafe", "zzz"}, t);
    auto big = embed_text({"oak", "cafe", "zzz"}, scaled);
    for (std::size_t j = 0; j < base.v.size(); ++j)
        REQUIRE_THAT(big.v[j], Catch::Matchers::WithinAbs(lambda * base.v[j], 1e-12));
}

TEST_CASE("OOV tokens contribute their n-gram bucket mean when subword is on", "[embedding]") {
    EmbeddingTable t = tiny_table(true);
    auto e = embed_text({"oaks"}, t);
    REQUIRE_FALSE(e.empty);
    auto buckets = subword_buckets("oaks", t.ngram_min, t.ngram_max, t.buckets.rows);
    REQUIRE_FALSE(buckets.empty());
    Vec expect(3, 0.0);
    for (int b : buckets) axpy(1.0, t.buckets.row(b), expect.data(), 3);
    for (double& v : expect) v /= static_cast<double>(buckets.size());
    REQUIRE(e.v == expect);
}

TEST_CASE("subword bucket ids are deterministic and in range", "[embedding]") {
    auto a = subword_buckets("street", 3, 5, 1 << 10);
    auto b = subword_buckets("street", 3, 5, 1 << 10);
    REQUIRE(a == b);
    // framed "<street>" has 8 chars: 6 trigrams + 5 quadgrams + 4 pentagrams
    REQUIRE(a.size() == 15);
    for (int id : a) {
        REQUIRE(id >= 0);
        REQUIRE(id < (1 << 10));
    }
}

TEST_CASE("table save/load round-trips every vector exactly", "[embedding]") {
    EmbeddingTable t = tiny_table(true);
    std::string path = temp_path("placedup_table_rt.emb");
    save_table(path, t);
    EmbeddingTable back = load_table(path);
    REQUIRE(back.dim == t.dim);
    REQUIRE(back.tokens == t.tokens);
    REQUIRE(back.word.a == t.word.a);
    REQUIRE(back.buckets.a == t.buckets.a);
    REQUIRE(back.context.empty());  // inference-only load

    // byte-identical re-save
    save_table(path + ".again", back);
    REQUIRE(read_file(path) == read_file(path + ".again"));
    std::remove((path + ".buckets").c_str());
    std::remove((path + ".again.buckets").c_str());
    std::remove((path + ".again").c_str());
    std::remove(path.c_str());
}

TEST_CASE("table loader rejects malformed rows", "[embedding]") {
    std::string path = temp_path("placedup_table_bad.emb");
    {
        std::ofstream out(path);
        out << "1 3\n";
        out << "tok 0.5 0.25\n";  // declares D=3, row has 2 values
    }
    REQUIRE_THROWS_AS(load_table(path), FormatError);
    {
        std::ofstream out(path);
        out << "2 2\n";
        out << "tok 0.5 0.25\n";  // one row missing
    }
    REQUIRE_THROWS_AS(load_table(path), FormatError);
    {
        std::ofstream out(path);
        out << "1 2\n";
        out << "tok 0.5 0.25 0.75\n";  // extra value
    }
    REQUIRE_THROWS_AS(load_table(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("external pre-trained file in the plain format loads", "[embedding]") {
    std::string path = temp_path("placedup_pretrained.emb");
    {
        std::ofstream out(path);
        out << "2 3\n";
        out << "plaza 0.5 -1 0.125\n";
        out << "square 2 0.25 -0.5\n";
    }
    EmbeddingTable t = load_table(path);
    REQUIRE(t.word.rows == 2);
    REQUIRE(t.dim == 3);
    REQUIRE(t.lookup("plaza") == 0);
    REQUIRE_FALSE(t.subword());
    std::remove(path.c_str());
}
