#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "placedup/util.hpp"

namespace placedup {

// --- UTF-8 / character classification -------------------------------------
//
// Letters and digits survive normalization, everything else becomes a space.
// Classification is exact for ASCII and covers the common letter scripts by
// range; unclassified code points (symbols, punctuation, emoji) separate.

inline bool utf8_decode(const std::string& s, std::size_t& i, std::uint32_t& cp) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        cp = c;
        i += 1;
        return true;
    }
    int len = 0;
    if ((c & 0xe0) == 0xc0) {
        cp = c & 0x1f;
        len = 1;
    } else if ((c & 0xf0) == 0xe0) {
        cp = c & 0x0f;
        len = 2;
    } else if ((c & 0xf8) == 0xf0) {
        cp = c & 0x07;
        len = 3;
    } else {
        i += 1;  // stray continuation byte
        return false;
    }
    if (i + static_cast<std::size_t>(len) >= s.size()) {
        i = s.size();
        return false;
    }
    for (int k = 0; k < len; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + 1 + static_cast<std::size_t>(k)]);
        if ((cc & 0xc0) != 0x80) {
            i += 1;
            return false;
        }
        cp = (cp << 6) | (cc & 0x3f);
    }
    i += static_cast<std::size_t>(len) + 1;
    return true;
}

inline void utf8_append(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

inline bool is_word_codepoint(std::uint32_t cp) {
    if (cp < 0x80)
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (cp >= 0xc0 && cp <= 0xff) return cp != 0xd7 && cp != 0xf7;  // Latin-1 letters
    if (cp >= 0x100 && cp <= 0x24f) return true;                    // Latin extended
    if (cp >= 0x370 && cp <= 0x3ff) return cp >= 0x386;             // Greek
    if (cp >= 0x400 && cp <= 0x4ff) return true;                    // Cyrillic
    if (cp >= 0x600 && cp <= 0x6ff) return true;                    // Arabic
    if (cp >= 0x3040 && cp <= 0x30ff) return cp != 0x3099 && cp != 0x309a;  // Kana
    if (cp >= 0x4e00 && cp <= 0x9fff) return true;                  // CJK
    if (cp >= 0xac00 && cp <= 0xd7a3) return true;                  // Hangul
    return false;
}

// Case folding where the mapping is a fixed offset; other scripts pass through.
inline std::uint32_t fold_codepoint(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;       // Latin-1
    if (cp >= 0x391 && cp <= 0x3a9 && cp != 0x3a2) return cp + 0x20;    // Greek
    if (cp >= 0x410 && cp <= 0x42f) return cp + 0x20;                   // Cyrillic
    if (cp >= 0x400 && cp <= 0x40f) return cp + 0x50;
    return cp;
}

// Lowercase + split into word tokens; non-word code points separate tokens.
inline std::vector<std::string> tokenize(const std::string& text, bool lowercase = true) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        std::uint32_t cp = 0;
        std::size_t before = i;
        bool ok = utf8_decode(text, i, cp);
        if (i == before) ++i;  // defensive: never stall
        if (ok && is_word_codepoint(cp)) {
            utf8_append(cur, lowercase ? fold_codepoint(cp) : cp);
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

// --- Normalizer ------------------------------------------------------------

struct NormalizerConfig {
    // Location phrases stripped from the start/end of a name. Stored
    // normalized (lowercase, single-spaced).
    std::vector<std::vector<std::string>> gazetteer;
    bool lowercase = true;

    NormalizerConfig() = default;

    explicit NormalizerConfig(const std::vector<std::string>& phrases, bool lc = true) : lowercase(lc) {
        for (const auto& p : phrases) {
            auto toks = tokenize(p, true);
            if (!toks.empty()) gazetteer.push_back(std::move(toks));
        }
    }
};

namespace detail {

inline bool matches_at(const std::vector<std::string>& tokens, std::size_t pos, const std::vector<std::string>& phrase) {
    if (pos + phrase.size() > tokens.size()) return false;
    for (std::size_t k = 0; k < phrase.size(); ++k)
        if (tokens[pos + k] != phrase[k]) return false;
    return true;
}

}  // namespace detail

// Normalize raw text into tokens: special characters become spaces, letters
// are lowercased, and leading/trailing gazetteer phrases are removed. A name
// that consists solely of a gazetteer phrase is kept as-is, so every place
// with a non-empty raw name keeps a non-empty token list unless the name had
// no word characters at all.
inline std::vector<std::string> normalize(const std::string& text, const NormalizerConfig& cfg = {}) {
    std::vector<std::string> tokens = tokenize(text, cfg.lowercase);
    if (tokens.empty() || cfg.gazetteer.empty()) return tokens;

    std::size_t lo = 0, hi = tokens.size();
    bool changed = true;
    while (changed && lo < hi) {
        changed = false;
        std::size_t best = 0;
        for (const auto& phrase : cfg.gazetteer)
            if (phrase.size() > best && detail::matches_at(tokens, lo, phrase) && lo + phrase.size() <= hi) best = phrase.size();
        if (best > 0 && hi - lo > best) {
            lo += best;
            changed = true;
        }
        best = 0;
        for (const auto& phrase : cfg.gazetteer)
            if (phrase.size() > best && hi >= phrase.size() && hi - phrase.size() >= lo && detail::matches_at(tokens, hi - phrase.size(), phrase))
                best = phrase.size();
        if (best > 0 && hi - lo > best) {
            hi -= best;
            changed = true;
        }
    }
    return std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(lo), tokens.begin() + static_cast<std::ptrdiff_t>(hi));
}

// --- Vocabulary ------------------------------------------------------------

struct Vocabulary {
    std::vector<std::string> tokens;              // index -> token
    std::vector<std::int64_t> freqs;              // index -> count
    std::unordered_map<std::string, int> index;   // token -> index
    std::int64_t min_count = 1;

    int size() const { return static_cast<int>(tokens.size()); }

    int lookup(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? -1 : it->second;
    }
};

// Count tokens over the corpus and keep those with frequency >= min_count.
// Indices are dense, ordered by descending frequency then lexicographically.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::int64_t min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
    std::map<std::string, std::int64_t> counts;
    for (const auto& line : corpus)
        for (const auto& tok : line) ++counts[tok];

    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [tok, n] : counts)
        if (n >= min_count) kept.emplace_back(tok, n);
    if (kept.empty()) throw ValidationError("build_vocab: no token reaches min_count");

    std::sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });

    Vocabulary v;
    v.min_count = min_count;
    v.tokens.reserve(kept.size());
    v.freqs.reserve(kept.size());
    for (const auto& [tok, n] : kept) {
        v.index.emplace(tok, static_cast<int>(v.tokens.size()));
        v.tokens.push_back(tok);
        v.freqs.push_back(n);
    }
    return v;
}

// Map tokens to vocabulary indices, dropping OOV tokens.
inline std::vector<int> to_indices(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        int idx = vocab.lookup(t);
        if (idx >= 0) out.push_back(idx);
    }
    return out;
}

}  // namespace placedup
