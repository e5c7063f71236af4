#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "placedup/checkpoint.hpp"
#include "placedup/embedding.hpp"
#include "placedup/eval.hpp"
#include "placedup/metric_train.hpp"
#include "placedup/network.hpp"
#include "placedup/place.hpp"
#include "placedup/skipgram.hpp"
#include "placedup/smoothing.hpp"
#include "placedup/synthetic.hpp"
#include "placedup/util.hpp"

namespace placedup {

// --- Flat key=value config ----------------------------------------------------

// Config files are flat `key=value` lines; '#' starts a comment. Flags
// override file values, the resolved map is what gets hashed.
struct KvConfig {
    std::map<std::string, std::string> values;

    static KvConfig from_file(const std::string& path) {
        KvConfig cfg;
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file " + path);
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            std::size_t a = line.find_first_not_of(" \t");
            if (a == std::string::npos) continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
            auto trim = [](std::string s) {
                std::size_t lo = s.find_first_not_of(" \t");
                std::size_t hi = s.find_last_not_of(" \t");
                return lo == std::string::npos ? std::string() : s.substr(lo, hi - lo + 1);
            };
            std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
            cfg.values[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
};

inline std::string config_hash(const std::map<std::string, std::string>& kv) {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [k, v] : kv) {
        h = fnv1a64(k.data(), k.size(), h);
        h = fnv1a64("=", 1, h);
        h = fnv1a64(v.data(), v.size(), h);
        h = fnv1a64("\n", 1, h);
    }
    return to_hex(h);
}

inline void write_meta(const std::string& path, const std::string& stage, const std::string& hash, std::uint64_t seed,
                       const std::map<std::string, std::string>& kv,
                       const std::map<std::string, std::int64_t>& counts = {}) {
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["config_hash"] = hash;
    j["seed"] = seed;
    j["config"] = kv;
    if (!counts.empty()) j["counts"] = counts;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_meta: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline void require_artifact(const std::string& path, const std::string& producing_stage) {
    if (!file_exists(path))
        throw ValidationError("missing artifact '" + path + "'; run the '" + producing_stage + "' stage first");
}

inline std::string default_out_dir() {
    const char* env = std::getenv("PLACEDUP_OUT");
    return env && *env ? env : "out";
}

inline void ensure_dir(const std::string& dir) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

inline std::string path_join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// --- synth ---------------------------------------------------------------------

struct SynthStage {
    std::string out_dir = default_out_dir();
    SyntheticConfig synth;

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["true_places"] = std::to_string(synth.n_true_places);
        kv["dup_rate"] = format_double(synth.dup_rate);
        kv["sources"] = std::to_string(synth.n_sources);
        std::string flips;
        for (int s = 0; s < synth.n_sources; ++s) {
            if (s) flips += ",";
            flips += format_double(synth.flip_rate(s));
        }
        kv["flip_rates"] = flips;
        kv["labels_per_source"] = std::to_string(synth.labels_per_source);
        kv["misspell_prob"] = format_double(synth.misspell_prob);
        kv["abbrev_prob"] = format_double(synth.abbrev_prob);
        kv["city_suffix_prob"] = format_double(synth.city_suffix_prob);
        kv["address_drop_prob"] = format_double(synth.address_drop_prob);
        kv["coord_jitter_sigma"] = format_double(synth.coord_jitter_sigma);
        kv["positive_frac"] = format_double(synth.positive_frac);
        kv["near_miss_frac"] = format_double(synth.near_miss_frac);
        kv["bin_size"] = format_double(synth.bin_size);
        kv["seed"] = std::to_string(synth.seed);
        return kv;
    }
};

struct SynthResult {
    std::string hash;
    int n_places = 0;
    int n_labels = 0;
};

inline SynthResult run_synth(const SynthStage& stage) {
    stage.synth.validate();
    ensure_dir(stage.out_dir);
    auto kv = stage.to_kv();
    std::string hash = config_hash(kv);

    SyntheticData data = generate_synthetic(stage.synth);
    save_places(path_join(stage.out_dir, "places.jsonl"), data.dataset);
    std::vector<std::string> header = {"config_hash=" + hash, "seed=" + std::to_string(stage.synth.seed)};
    save_labels(path_join(stage.out_dir, "labels.tsv"), data.labels, header);
    save_ground_truth(path_join(stage.out_dir, "ground_truth.tsv"), data.truth, header);
    write_meta(path_join(stage.out_dir, "synth.meta.json"), "synth", hash, stage.synth.seed, kv,
               {{"places", data.dataset.size()}, {"labels", static_cast<std::int64_t>(data.labels.size())}});
    return {hash, data.dataset.size(), static_cast<int>(data.labels.size())};
}

// --- embed ---------------------------------------------------------------------

struct EmbedStage {
    std::string places_path;
    std::string out_dir = default_out_dir();
    int name_dim = 50;
    int address_dim = 50;
    int min_count = 2;
    bool subword = true;
    int bucket_count = 1 << 15;
    int epochs = 5;
    double lr = 0.05;
    int k_neg = 5;
    int address_window = 5;  // names use full enumeration
    int threads = 1;
    std::uint64_t seed = 1;
    std::vector<std::string> gazetteer = default_gazetteer();
    bool save_tables = true;

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["places"] = places_path;
        kv["name_dim"] = std::to_string(name_dim);
        kv["address_dim"] = std::to_string(address_dim);
        kv["min_count"] = std::to_string(min_count);
        kv["subword"] = subword ? "true" : "false";
        kv["bucket_count"] = std::to_string(bucket_count);
        kv["epochs"] = std::to_string(epochs);
        kv["lr"] = format_double(lr);
        kv["k_neg"] = std::to_string(k_neg);
        kv["address_window"] = std::to_string(address_window);
        kv["gazetteer_size"] = std::to_string(gazetteer.size());
        kv["seed"] = std::to_string(seed);
        return kv;
    }
};

struct EmbedResult {
    std::string hash;
    int n_places = 0;
    int empty_names = 0;
    int empty_addresses = 0;
};

inline EmbedResult run_embed(const EmbedStage& stage) {
    require_artifact(stage.places_path, "synth");
    ensure_dir(stage.out_dir);
    auto kv = stage.to_kv();
    std::string hash = config_hash(kv);

    Dataset ds = load_places(stage.places_path);
    NormalizerConfig name_norm(stage.gazetteer);
    NormalizerConfig addr_norm;

    std::vector<std::vector<std::string>> name_corpus(static_cast<std::size_t>(ds.size()));
    std::vector<std::vector<std::string>> addr_corpus;
    for (int i = 0; i < ds.size(); ++i) {
        name_corpus[static_cast<std::size_t>(i)] = normalize(ds.at(i).name, name_norm);
        if (ds.at(i).address) addr_corpus.push_back(normalize(*ds.at(i).address, addr_norm));
    }

    SgdConfig name_cfg;
    name_cfg.dim = stage.name_dim;
    name_cfg.k_neg = stage.k_neg;
    name_cfg.lr = stage.lr;
    name_cfg.epochs = stage.epochs;
    name_cfg.seed = stage.seed;
    name_cfg.threads = stage.threads;
    name_cfg.bucket_count = stage.bucket_count;
    name_cfg.window = 0;
    Vocabulary name_vocab = build_vocab(name_corpus, stage.min_count);
    EmbeddingTable name_table = train_skipgram(name_corpus, name_vocab, name_cfg, stage.subword).table;

    bool have_addresses = !addr_corpus.empty();
    EmbeddingTable addr_table;
    if (have_addresses) {
        SgdConfig addr_cfg = name_cfg;
        addr_cfg.dim = stage.address_dim;
        addr_cfg.seed = stage.seed + 1;
        addr_cfg.window = stage.address_window;
        Vocabulary addr_vocab = build_vocab(addr_corpus, stage.min_count);
        addr_table = train_skipgram(addr_corpus, addr_vocab, addr_cfg, stage.subword).table;
    }

    EmbedResult res;
    res.hash = hash;
    res.n_places = ds.size();
    int feat_dim = stage.name_dim + (have_addresses ? stage.address_dim : 0);
    Mat features(ds.size(), feat_dim);
    std::vector<std::string> ids(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) {
        ids[static_cast<std::size_t>(i)] = ds.at(i).id;
        TextEmbedding name_vec = embed_text(name_corpus[static_cast<std::size_t>(i)], name_table);
        if (name_vec.empty) ++res.empty_names;  // unusable name: zero block, flagged
        std::copy(name_vec.v.begin(), name_vec.v.end(), features.row(i));
        if (have_addresses) {
            if (ds.at(i).address) {
                TextEmbedding addr_vec = embed_text(normalize(*ds.at(i).address, addr_norm), addr_table);
                if (addr_vec.empty) ++res.empty_addresses;
                std::copy(addr_vec.v.begin(), addr_vec.v.end(), features.row(i) + stage.name_dim);
            } else {
                ++res.empty_addresses;
            }
        }
    }

    if (stage.save_tables) {
        save_table(path_join(stage.out_dir, "name.emb"), name_table);
        if (have_addresses) save_table(path_join(stage.out_dir, "address.emb"), addr_table);
    }
    save_place_embeddings(path_join(stage.out_dir, "features.emb"), ids, features);
    write_meta(path_join(stage.out_dir, "embed.meta.json"), "embed", hash, stage.seed, kv,
               {{"places", res.n_places}, {"empty_names", res.empty_names}, {"empty_addresses", res.empty_addresses}});
    return res;
}

// --- smooth --------------------------------------------------------------------

struct SmoothStage {
    std::string places_path;
    std::string features_path;
    std::string out_dir = default_out_dir();
    double bin_size = 0.01;
    SmoothingConfig smoothing;

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["places"] = places_path;
        kv["features"] = features_path;
        kv["bin_size"] = format_double(bin_size);
        kv["k_neg"] = std::to_string(smoothing.k_neg);
        kv["lr"] = format_double(smoothing.lr);
        kv["steps"] = std::to_string(smoothing.steps);
        kv["seed"] = std::to_string(smoothing.seed);
        return kv;
    }
};

struct SmoothResult {
    std::string hash;
    bool trained = false;
    std::string warning;
};

// Features from an embedding file reordered to dataset order.
inline Mat features_in_dataset_order(const Dataset& ds, const PlaceEmbeddings& pe) {
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = 0; i < pe.ids.size(); ++i) row_of.emplace(pe.ids[i], static_cast<int>(i));
    Mat out(ds.size(), pe.embeddings.cols);
    for (int i = 0; i < ds.size(); ++i) {
        auto it = row_of.find(ds.at(i).id);
        if (it == row_of.end()) throw ValidationError("feature file has no row for place '" + ds.at(i).id + "'");
        std::copy(pe.embeddings.row(it->second), pe.embeddings.row(it->second) + pe.embeddings.cols, out.row(i));
    }
    return out;
}

inline SmoothResult run_smooth(const SmoothStage& stage) {
    require_artifact(stage.places_path, "synth");
    require_artifact(stage.features_path, "embed");
    ensure_dir(stage.out_dir);
    auto kv = stage.to_kv();
    std::string hash = config_hash(kv);

    Dataset ds = load_places(stage.places_path);
    PlaceEmbeddings pe = load_place_embeddings(stage.features_path);
    Mat features = features_in_dataset_order(ds, pe);
    PlaceNetwork net = build_network(ds, stage.bin_size);
    SmoothingResult sm = train_smoothing(features, net, stage.smoothing);

    std::vector<std::string> ids(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) ids[static_cast<std::size_t>(i)] = ds.at(i).id;
    save_place_embeddings(path_join(stage.out_dir, "smoothed.emb"), ids, sm.smoothed);
    write_meta(path_join(stage.out_dir, "smooth.meta.json"), "smooth", hash, stage.smoothing.seed, kv,
               {{"places", ds.size()}, {"trained", sm.trained ? 1 : 0}});
    return {hash, sm.trained, sm.warning};
}

// --- train ---------------------------------------------------------------------

// Ablation presets named after the method codes used across the experiments.
inline void apply_preset(const std::string& preset, TrainConfig& cfg) {
    if (preset.empty()) return;
    cfg.loss = LossKind::Pairwise;
    cfg.distance = DistanceKind::Euclidean;
    if (preset == "pe") {
        cfg.hard = cfg.attention = cfg.denoise = false;
    } else if (preset == "peh") {
        cfg.hard = true;
        cfg.attention = cfg.denoise = false;
    } else if (preset == "peha") {
        cfg.hard = cfg.attention = true;
        cfg.denoise = false;
    } else if (preset == "pehad") {
        cfg.hard = cfg.attention = cfg.denoise = true;
    } else {
        throw ValidationError("unknown preset '" + preset + "' (expected pe, peh, peha, pehad)");
    }
}

struct TrainStage {
    std::string features_path;  // smoothed features
    std::string labels_path;
    std::string out_dir = default_out_dir();
    std::string preset;  // optional; overrides toggles
    TrainConfig train;

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["features"] = features_path;
        kv["labels"] = labels_path;
        kv["preset"] = preset;
        kv["loss"] = to_string(train.loss);
        kv["distance"] = to_string(train.distance);
        kv["lr"] = format_double(train.lr);
        kv["momentum"] = format_double(train.momentum);
        kv["epochs"] = std::to_string(train.epochs);
        kv["batch_size"] = std::to_string(train.batch_size);
        kv["alpha"] = format_double(train.alpha);
        kv["hard"] = train.hard ? "true" : "false";
        kv["beta"] = format_double(train.beta);
        kv["attention"] = train.attention ? "true" : "false";
        kv["denoise"] = train.denoise ? "true" : "false";
        kv["rho"] = format_double(train.rho);
        kv["clusters"] = std::to_string(train.clusters);
        kv["refresh_interval"] = std::to_string(train.refresh_interval);
        kv["hidden1"] = std::to_string(train.hidden1);
        kv["hidden2"] = std::to_string(train.hidden2);
        kv["dk"] = std::to_string(train.dk);
        kv["dv"] = std::to_string(train.dv);
        kv["seed"] = std::to_string(train.seed);
        return kv;
    }
};

struct TrainStageResult {
    std::string hash;
    TrainResult result;
    std::vector<std::string> sources;
};

inline TrainStageResult run_train(const TrainStage& stage_in) {
    TrainStage stage = stage_in;
    apply_preset(stage.preset, stage.train);
    require_artifact(stage.features_path, "smooth");
    require_artifact(stage.labels_path, "synth");
    ensure_dir(stage.out_dir);
    auto kv = stage.to_kv();
    std::string hash = config_hash(kv);

    PlaceEmbeddings pe = load_place_embeddings(stage.features_path);
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = 0; i < pe.ids.size(); ++i) row_of.emplace(pe.ids[i], static_cast<int>(i));

    // Labels are validated against the feature rows; a places file is not
    // needed at this stage.
    Dataset pseudo;
    for (const auto& id : pe.ids) {
        Place p;
        p.id = id;
        p.name = id;
        pseudo.add(std::move(p));
    }
    std::vector<LabeledPair> labels = load_labels(stage.labels_path, pseudo);
    if (labels.empty()) throw ValidationError("run_train: label file has no usable rows");

    std::vector<std::string> sources;
    for (const auto& l : labels) sources.push_back(l.source);
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    std::map<std::string, int> source_idx;
    for (std::size_t s = 0; s < sources.size(); ++s) source_idx[sources[s]] = static_cast<int>(s);

    std::vector<PairSample> pairs;
    pairs.reserve(labels.size());
    for (const auto& l : labels)
        pairs.push_back({row_of.at(l.a), row_of.at(l.b), l.y, source_idx.at(l.source)});

    TrainResult result = train_metric(pe.embeddings, pairs, sources, stage.train);

    Checkpoint ckpt;
    ckpt.model = result.model;
    ckpt.centers = result.centers;
    ckpt.config_hash = hash;
    ckpt.seed = stage.train.seed;
    save_checkpoint(path_join(stage.out_dir, "model.ckpt"), ckpt);

    std::map<std::string, std::int64_t> counts = {{"pairs", static_cast<std::int64_t>(pairs.size())},
                                                  {"sources", static_cast<std::int64_t>(sources.size())},
                                                  {"steps", result.steps}};
    write_meta(path_join(stage.out_dir, "train.meta.json"), "train", hash, stage.train.seed, kv, counts);
    return {hash, std::move(result), std::move(sources)};
}

// --- eval ----------------------------------------------------------------------

struct EvalStage {
    // embeddings come either from a raw per-place embedding file or from a
    // checkpoint applied to a feature file
    std::string embeddings_path;
    std::string checkpoint_path;
    std::string features_path;
    // eval sets come from labels or from ground truth
    std::string labels_path;
    std::string truth_path;
    std::string places_path;  // for near-miss negatives with ground truth
    std::string out_dir = default_out_dir();
    int k_max = 100;
    int negatives_per_probe = 4;
    double bin_size = 0.01;
    std::uint64_t seed = 7;

    std::map<std::string, std::string> to_kv() const {
        std::map<std::string, std::string> kv;
        kv["embeddings"] = embeddings_path;
        kv["checkpoint"] = checkpoint_path;
        kv["features"] = features_path;
        kv["labels"] = labels_path;
        kv["truth"] = truth_path;
        kv["places"] = places_path;
        kv["k_max"] = std::to_string(k_max);
        kv["negatives_per_probe"] = std::to_string(negatives_per_probe);
        kv["bin_size"] = format_double(bin_size);
        kv["seed"] = std::to_string(seed);
        return kv;
    }
};

inline PlaceEmbeddings apply_checkpoint(const Checkpoint& ckpt, const PlaceEmbeddings& features) {
    if (features.embeddings.cols != ckpt.model.input_dim())
        throw ValidationError("apply_checkpoint: feature dimension " + std::to_string(features.embeddings.cols) +
                              " does not match checkpoint input_dim " + std::to_string(ckpt.model.input_dim()));
    PlaceEmbeddings out;
    out.ids = features.ids;
    out.embeddings = value_embeddings(ckpt.model, features.embeddings);
    return out;
}

struct EvalStageResult {
    std::string hash;
    EvalReport report;
};

inline EvalStageResult run_eval(const EvalStage& stage) {
    auto kv = stage.to_kv();
    std::string hash = config_hash(kv);
    ensure_dir(stage.out_dir);

    PlaceEmbeddings pe;
    if (!stage.embeddings_path.empty()) {
        require_artifact(stage.embeddings_path, "smooth");
        pe = load_place_embeddings(stage.embeddings_path);
    } else {
        require_artifact(stage.checkpoint_path, "train");
        require_artifact(stage.features_path, "smooth");
        pe = apply_checkpoint(load_checkpoint(stage.checkpoint_path), load_place_embeddings(stage.features_path));
    }

    EvalSets sets;
    if (!stage.truth_path.empty()) {
        require_artifact(stage.truth_path, "synth");
        require_artifact(stage.places_path, "synth");
        Dataset ds = load_places(stage.places_path);
        sets = eval_sets_from_truth(ds, load_ground_truth(stage.truth_path), stage.bin_size, stage.negatives_per_probe,
                                    stage.seed);
    } else {
        require_artifact(stage.labels_path, "synth");
        Dataset pseudo;
        for (const auto& id : pe.ids) {
            Place p;
            p.id = id;
            p.name = id;
            pseudo.add(std::move(p));
        }
        sets = build_eval_sets(load_labels(stage.labels_path, pseudo));
    }

    KnnIndex index = KnnIndex::build(pe.ids, std::move(pe.embeddings));
    EvalReport report = evaluate(index, sets, stage.k_max);
    write_report_json(path_join(stage.out_dir, "report.json"), report, hash, stage.seed);
    write_curves_tsv(path_join(stage.out_dir, "curves.tsv"), report, hash);
    write_meta(path_join(stage.out_dir, "eval.meta.json"), "eval", hash, stage.seed, kv,
               {{"probes_theta", static_cast<std::int64_t>(sets.theta.size())},
                {"probes_omega", static_cast<std::int64_t>(sets.omega.size())}});
    return {hash, report};
}

}  // namespace placedup
