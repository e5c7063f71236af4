#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "placedup/mat.hpp"
#include "placedup/text.hpp"
#include "placedup/util.hpp"

namespace placedup {

// Token -> vector table, optionally enriched with hashed character n-gram
// buckets. The context matrix exists only during training and is not
// persisted; tables loaded from disk are inference-only.
struct EmbeddingTable {
    int dim = 0;
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;
    Mat word;     // V x D
    Mat context;  // V x D, training only
    Mat buckets;  // B x D when subword enrichment is on, else empty
    int ngram_min = 3;
    int ngram_max = 5;

    bool subword() const { return !buckets.empty(); }

    int lookup(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? -1 : it->second;
    }
};

// Hashed n-gram bucket ids for a token framed with boundary markers,
// n in [ngram_min, ngram_max] over the framed byte sequence.
inline std::vector<int> subword_buckets(const std::string& token, int ngram_min, int ngram_max, int bucket_count) {
    std::vector<int> out;
    if (bucket_count <= 0) return out;
    std::string framed = "<" + token + ">";
    int len = static_cast<int>(framed.size());
    for (int n = ngram_min; n <= ngram_max; ++n) {
        for (int start = 0; start + n <= len; ++start) {
            std::uint64_t h = fnv1a64(framed.data() + start, static_cast<std::size_t>(n));
            out.push_back(static_cast<int>(h % static_cast<std::uint64_t>(bucket_count)));
        }
    }
    return out;
}

// Input vector of a token: mean of the word's own vector and its n-gram
// bucket vectors. OOV tokens (subword on) use the bucket mean alone.
// Returns false when the token contributes nothing.
inline bool compose_token_vector(const EmbeddingTable& table, const std::string& token, Vec& out) {
    out.assign(static_cast<std::size_t>(table.dim), 0.0);
    int idx = table.lookup(token);
    int parts = 0;
    if (idx >= 0) {
        axpy(1.0, table.word.row(idx), out.data(), table.dim);
        ++parts;
    }
    if (table.subword()) {
        for (int b : subword_buckets(token, table.ngram_min, table.ngram_max, table.buckets.rows)) {
            axpy(1.0, table.buckets.row(b), out.data(), table.dim);
            ++parts;
        }
    }
    if (parts == 0) return false;
    for (double& x : out) x /= parts;
    return true;
}

struct TextEmbedding {
    Vec v;
    bool empty = false;  // nothing contributed; v is the zero vector
};

// Mean of per-token vectors. Order-invariant by construction.
inline TextEmbedding embed_text(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    TextEmbedding out;
    out.v.assign(static_cast<std::size_t>(table.dim), 0.0);
    Vec tok_vec;
    int contributed = 0;
    for (const auto& t : tokens) {
        if (compose_token_vector(table, t, tok_vec)) {
            axpy(1.0, tok_vec.data(), out.v.data(), table.dim);
            ++contributed;
        }
    }
    if (contributed == 0) {
        out.empty = true;
        return out;
    }
    for (double& x : out.v) x /= contributed;
    return out;
}

// --- File format -----------------------------------------------------------
//
//   line 1:  "V D"
//   V lines: "token x1 ... xD"
//
// Companion bucket file (when subword is on): header "B D", B value rows.
// Values use the shortest decimal form that round-trips the double exactly.

inline void save_table(const std::string& path, const EmbeddingTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_table: cannot open " + path);
    out << table.word.rows << ' ' << table.dim << '\n';
    for (int i = 0; i < table.word.rows; ++i) {
        const std::string& tok = table.tokens[static_cast<std::size_t>(i)];
        if (tok.empty() || tok.find_first_of(" \t\n") != std::string::npos)
            throw FormatError("save_table: token not representable in the text format: '" + tok + "'");
        out << tok;
        for (int j = 0; j < table.dim; ++j) out << ' ' << format_double(table.word.at(i, j));
        out << '\n';
    }
    if (table.subword()) {
        std::ofstream bout(path + ".buckets", std::ios::binary);
        if (!bout) throw FormatError("save_table: cannot open " + path + ".buckets");
        bout << table.buckets.rows << ' ' << table.dim << '\n';
        for (int i = 0; i < table.buckets.rows; ++i) {
            for (int j = 0; j < table.dim; ++j) {
                if (j) bout << ' ';
                bout << format_double(table.buckets.at(i, j));
            }
            bout << '\n';
        }
    }
}

namespace detail {

inline void parse_header(const std::string& line, const std::string& path, long& rows, long& cols) {
    char extra;
    if (std::sscanf(line.c_str(), "%ld %ld %c", &rows, &cols, &extra) != 2 || rows < 0 || cols < 1)
        throw FormatError(path + ":1: malformed header, expected 'V D'");
}

}  // namespace detail

// Loads a table in the text format above. Pre-trained files from elsewhere
// load fine: the context matrix is never part of the format.
inline EmbeddingTable load_table(const std::string& path, int ngram_min = 3, int ngram_max = 5) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_table: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ":1: empty file");
    long rows = 0, cols = 0;
    detail::parse_header(line, path, rows, cols);

    EmbeddingTable t;
    t.dim = static_cast<int>(cols);
    t.ngram_min = ngram_min;
    t.ngram_max = ngram_max;
    t.word = Mat(static_cast<int>(rows), static_cast<int>(cols));
    t.tokens.reserve(static_cast<std::size_t>(rows));
    for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw FormatError(path + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(i));
        std::size_t pos = line.find(' ');
        if (pos == std::string::npos || pos == 0)
            throw FormatError(path + ":" + std::to_string(i + 2) + ": expected 'token x1 ... xD'");
        std::string tok = line.substr(0, pos);
        const char* p = line.c_str() + pos;
        for (long j = 0; j < cols; ++j) {
            char* end = nullptr;
            double v = std::strtod(p, &end);
            if (end == p) throw FormatError(path + ":" + std::to_string(i + 2) + ": row has fewer than " + std::to_string(cols) + " values");
            t.word.at(static_cast<int>(i), static_cast<int>(j)) = v;
            p = end;
        }
        while (*p == ' ' || *p == '\r') ++p;
        if (*p != '\0') throw FormatError(path + ":" + std::to_string(i + 2) + ": row has more than " + std::to_string(cols) + " values");
        if (!t.index.emplace(tok, static_cast<int>(i)).second)
            throw FormatError(path + ":" + std::to_string(i + 2) + ": duplicate token '" + tok + "'");
        t.tokens.push_back(std::move(tok));
    }

    std::ifstream bin(path + ".buckets", std::ios::binary);
    if (bin) {
        if (!std::getline(bin, line)) throw FormatError(path + ".buckets:1: empty file");
        long brows = 0, bcols = 0;
        detail::parse_header(line, path + ".buckets", brows, bcols);
        if (bcols != cols) throw FormatError(path + ".buckets: dimension " + std::to_string(bcols) + " does not match table dimension " + std::to_string(cols));
        t.buckets = Mat(static_cast<int>(brows), static_cast<int>(bcols));
        for (long i = 0; i < brows; ++i) {
            if (!std::getline(bin, line)) throw FormatError(path + ".buckets: expected " + std::to_string(brows) + " rows, got " + std::to_string(i));
            const char* p = line.c_str();
            for (long j = 0; j < bcols; ++j) {
                char* end = nullptr;
                double v = std::strtod(p, &end);
                if (end == p) throw FormatError(path + ".buckets:" + std::to_string(i + 2) + ": short row");
                t.buckets.at(static_cast<int>(i), static_cast<int>(j)) = v;
                p = end;
            }
        }
    }
    return t;
}

}  // namespace placedup
