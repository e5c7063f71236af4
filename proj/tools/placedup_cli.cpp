// Command-line front end for the place-deduplication embedding pipeline.
// Stages write their artifacts to --out and can be re-run independently;
// every stage logs its resolved config hash and seed.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "placedup/placedup.hpp"

namespace {

using namespace placedup;

// Flags override config-file values: the file (when given) seeds the stage
// struct before CLI11 parses the command line.
KvConfig preload_config(int argc, char** argv) {
    for (int i = 1; i < argc - 1; ++i) {
        std::string arg = argv[i];
        if (arg == "--config") return KvConfig::from_file(argv[i + 1]);
    }
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg.rfind("--config=", 0) == 0) return KvConfig::from_file(arg.substr(9));
    }
    return {};
}

double get_d(const KvConfig& kv, const std::string& key, double fallback) {
    return kv.has(key) ? std::stod(kv.get(key, "")) : fallback;
}
int get_i(const KvConfig& kv, const std::string& key, int fallback) {
    return kv.has(key) ? std::stoi(kv.get(key, "")) : fallback;
}
std::uint64_t get_u64(const KvConfig& kv, const std::string& key, std::uint64_t fallback) {
    return kv.has(key) ? std::stoull(kv.get(key, "")) : fallback;
}
bool get_b(const KvConfig& kv, const std::string& key, bool fallback) {
    if (!kv.has(key)) return fallback;
    std::string v = kv.get(key, "");
    return v == "1" || v == "true" || v == "yes" || v == "on";
}
std::string get_s(const KvConfig& kv, const std::string& key, const std::string& fallback) {
    return kv.get(key, fallback);
}

void add_config_flag(CLI::App* cmd) {
    static std::string dummy;
    cmd->add_option("--config", dummy, "flat key=value config file; flags override file values");
}

int dispatch(int argc, char** argv) {
    CLI::App app{"place deduplication embedding toolkit"};
    app.require_subcommand(1);
    KvConfig file_cfg = preload_config(argc, argv);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled place dataset");
    SynthStage synth;
    synth.out_dir = get_s(file_cfg, "out", default_out_dir());
    synth.synth.n_true_places = get_i(file_cfg, "true_places", synth.synth.n_true_places);
    synth.synth.dup_rate = get_d(file_cfg, "dup_rate", synth.synth.dup_rate);
    synth.synth.n_sources = get_i(file_cfg, "sources", synth.synth.n_sources);
    synth.synth.labels_per_source = get_i(file_cfg, "labels_per_source", synth.synth.labels_per_source);
    synth.synth.misspell_prob = get_d(file_cfg, "misspell_prob", synth.synth.misspell_prob);
    synth.synth.abbrev_prob = get_d(file_cfg, "abbrev_prob", synth.synth.abbrev_prob);
    synth.synth.city_suffix_prob = get_d(file_cfg, "city_suffix_prob", synth.synth.city_suffix_prob);
    synth.synth.address_drop_prob = get_d(file_cfg, "address_drop_prob", synth.synth.address_drop_prob);
    synth.synth.coord_jitter_sigma = get_d(file_cfg, "coord_jitter_sigma", synth.synth.coord_jitter_sigma);
    synth.synth.positive_frac = get_d(file_cfg, "positive_frac", synth.synth.positive_frac);
    synth.synth.near_miss_frac = get_d(file_cfg, "near_miss_frac", synth.synth.near_miss_frac);
    synth.synth.bin_size = get_d(file_cfg, "bin_size", synth.synth.bin_size);
    synth.synth.seed = get_u64(file_cfg, "seed", synth.synth.seed);
    std::string flip_spec = get_s(file_cfg, "flip_rates", "");
    add_config_flag(synth_cmd);
    synth_cmd->add_option("--out", synth.out_dir, "output directory");
    synth_cmd->add_option("--true-places", synth.synth.n_true_places, "number of true places");
    synth_cmd->add_option("--dup-rate", synth.synth.dup_rate, "mean duplicates per true place");
    synth_cmd->add_option("--sources", synth.synth.n_sources, "number of label sources");
    synth_cmd->add_option("--flip-rates", flip_spec, "comma-separated per-source flip rates");
    synth_cmd->add_option("--labels-per-source", synth.synth.labels_per_source, "labels per source (0 = auto)");
    synth_cmd->add_option("--misspell-prob", synth.synth.misspell_prob);
    synth_cmd->add_option("--abbrev-prob", synth.synth.abbrev_prob);
    synth_cmd->add_option("--city-suffix-prob", synth.synth.city_suffix_prob);
    synth_cmd->add_option("--address-drop-prob", synth.synth.address_drop_prob);
    synth_cmd->add_option("--coord-jitter-sigma", synth.synth.coord_jitter_sigma);
    synth_cmd->add_option("--positive-frac", synth.synth.positive_frac);
    synth_cmd->add_option("--near-miss-frac", synth.synth.near_miss_frac);
    synth_cmd->add_option("--bin-size", synth.synth.bin_size);
    synth_cmd->add_option("--seed", synth.synth.seed);

    // ---- embed ----
    auto* embed_cmd = app.add_subcommand("embed", "train name/address embeddings and build place features");
    EmbedStage embed;
    embed.out_dir = get_s(file_cfg, "out", default_out_dir());
    embed.places_path = get_s(file_cfg, "places", "");
    embed.name_dim = get_i(file_cfg, "name_dim", embed.name_dim);
    embed.address_dim = get_i(file_cfg, "address_dim", embed.address_dim);
    embed.min_count = get_i(file_cfg, "min_count", embed.min_count);
    embed.subword = get_b(file_cfg, "subword", embed.subword);
    embed.bucket_count = get_i(file_cfg, "bucket_count", embed.bucket_count);
    embed.epochs = get_i(file_cfg, "epochs", embed.epochs);
    embed.lr = get_d(file_cfg, "lr", embed.lr);
    embed.k_neg = get_i(file_cfg, "k_neg", embed.k_neg);
    embed.threads = get_i(file_cfg, "threads", embed.threads);
    embed.seed = get_u64(file_cfg, "seed", embed.seed);
    std::string gazetteer_path = get_s(file_cfg, "gazetteer", "");
    add_config_flag(embed_cmd);
    embed_cmd->add_option("--out", embed.out_dir, "output directory");
    embed_cmd->add_option("--places", embed.places_path, "places.jsonl path");
    embed_cmd->add_option("--name-dim", embed.name_dim);
    embed_cmd->add_option("--address-dim", embed.address_dim);
    embed_cmd->add_option("--min-count", embed.min_count);
    embed_cmd->add_flag("--subword,!--no-subword", embed.subword, "character n-gram enrichment");
    embed_cmd->add_option("--bucket-count", embed.bucket_count);
    embed_cmd->add_option("--epochs", embed.epochs);
    embed_cmd->add_option("--lr", embed.lr);
    embed_cmd->add_option("--k-neg", embed.k_neg);
    embed_cmd->add_option("--threads", embed.threads, ">1 enables nondeterministic lock-free updates");
    embed_cmd->add_option("--seed", embed.seed);
    embed_cmd->add_option("--gazetteer", gazetteer_path, "file with one location phrase per line");

    // ---- smooth ----
    auto* smooth_cmd = app.add_subcommand("smooth", "refine features on the coordinate/category place network");
    SmoothStage smooth;
    smooth.out_dir = get_s(file_cfg, "out", default_out_dir());
    smooth.places_path = get_s(file_cfg, "places", "");
    smooth.features_path = get_s(file_cfg, "features", "");
    smooth.bin_size = get_d(file_cfg, "bin_size", smooth.bin_size);
    smooth.smoothing.k_neg = get_i(file_cfg, "k_neg", smooth.smoothing.k_neg);
    smooth.smoothing.lr = get_d(file_cfg, "lr", smooth.smoothing.lr);
    smooth.smoothing.steps = get_i(file_cfg, "steps", static_cast<int>(smooth.smoothing.steps));
    smooth.smoothing.threads = get_i(file_cfg, "threads", smooth.smoothing.threads);
    smooth.smoothing.seed = get_u64(file_cfg, "seed", smooth.smoothing.seed);
    add_config_flag(smooth_cmd);
    smooth_cmd->add_option("--out", smooth.out_dir, "output directory");
    smooth_cmd->add_option("--places", smooth.places_path);
    smooth_cmd->add_option("--features", smooth.features_path);
    smooth_cmd->add_option("--bin-size", smooth.bin_size, "grid bin size in degrees");
    smooth_cmd->add_option("--k-neg", smooth.smoothing.k_neg);
    smooth_cmd->add_option("--lr", smooth.smoothing.lr);
    smooth_cmd->add_option("--steps", smooth.smoothing.steps, "SGD steps (0 = auto)");
    smooth_cmd->add_option("--threads", smooth.smoothing.threads);
    smooth_cmd->add_option("--seed", smooth.smoothing.seed);

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "supervised metric learning on labeled pairs");
    TrainStage train;
    train.out_dir = get_s(file_cfg, "out", default_out_dir());
    train.features_path = get_s(file_cfg, "features", "");
    train.labels_path = get_s(file_cfg, "labels", "");
    train.preset = get_s(file_cfg, "preset", "");
    std::string loss_name = get_s(file_cfg, "loss", "pairwise");
    std::string dist_name = get_s(file_cfg, "distance", "euclidean");
    train.train.lr = get_d(file_cfg, "lr", train.train.lr);
    train.train.momentum = get_d(file_cfg, "momentum", train.train.momentum);
    train.train.epochs = get_i(file_cfg, "epochs", train.train.epochs);
    train.train.batch_size = get_i(file_cfg, "batch_size", train.train.batch_size);
    train.train.alpha = get_d(file_cfg, "alpha", train.train.alpha);
    train.train.hard = get_b(file_cfg, "hard", train.train.hard);
    train.train.beta = get_d(file_cfg, "beta", train.train.beta);
    train.train.attention = get_b(file_cfg, "attention", train.train.attention);
    train.train.denoise = get_b(file_cfg, "denoise", train.train.denoise);
    train.train.rho = get_d(file_cfg, "rho", train.train.rho);
    train.train.clusters = get_i(file_cfg, "clusters", train.train.clusters);
    train.train.refresh_interval = get_i(file_cfg, "refresh_interval", train.train.refresh_interval);
    train.train.hidden1 = get_i(file_cfg, "hidden1", train.train.hidden1);
    train.train.hidden2 = get_i(file_cfg, "hidden2", train.train.hidden2);
    train.train.dk = get_i(file_cfg, "dk", train.train.dk);
    train.train.dv = get_i(file_cfg, "dv", train.train.dv);
    train.train.seed = get_u64(file_cfg, "seed", train.train.seed);
    add_config_flag(train_cmd);
    train_cmd->add_option("--out", train.out_dir, "output directory");
    train_cmd->add_option("--features", train.features_path, "smoothed feature file");
    train_cmd->add_option("--labels", train.labels_path);
    train_cmd->add_option("--preset", train.preset, "pe | peh | peha | pehad");
    train_cmd->add_option("--loss", loss_name, "pairwise | triplet");
    train_cmd->add_option("--distance", dist_name, "euclidean | cosine | bilinear");
    train_cmd->add_option("--lr", train.train.lr);
    train_cmd->add_option("--momentum", train.train.momentum);
    train_cmd->add_option("--epochs", train.train.epochs);
    train_cmd->add_option("--batch-size", train.train.batch_size);
    train_cmd->add_option("--alpha", train.train.alpha, "contrastive margin");
    train_cmd->add_flag("--hard,!--no-hard", train.train.hard, "batch-wise hard sampling");
    train_cmd->add_option("--beta", train.train.beta, "hard-sampling slack");
    train_cmd->add_flag("--attention,!--no-attention", train.train.attention, "source-oriented attention");
    train_cmd->add_flag("--denoise,!--no-denoise", train.train.denoise, "soft-clustering label denoising");
    train_cmd->add_option("--rho", train.train.rho, "denoising loss weight");
    train_cmd->add_option("--clusters", train.train.clusters, "cluster count (0 = sqrt(N))");
    train_cmd->add_option("--refresh-interval", train.train.refresh_interval);
    train_cmd->add_option("--hidden1", train.train.hidden1);
    train_cmd->add_option("--hidden2", train.train.hidden2);
    train_cmd->add_option("--dk", train.train.dk, "key embedding dimension");
    train_cmd->add_option("--dv", train.train.dv, "value embedding dimension");
    train_cmd->add_option("--seed", train.train.seed);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "compute ACC and PRE/REC@K for an embedding");
    EvalStage eval;
    eval.out_dir = get_s(file_cfg, "out", default_out_dir());
    eval.embeddings_path = get_s(file_cfg, "embeddings", "");
    eval.checkpoint_path = get_s(file_cfg, "checkpoint", "");
    eval.features_path = get_s(file_cfg, "features", "");
    eval.labels_path = get_s(file_cfg, "labels", "");
    eval.truth_path = get_s(file_cfg, "truth", "");
    eval.places_path = get_s(file_cfg, "places", "");
    eval.k_max = get_i(file_cfg, "k_max", eval.k_max);
    eval.negatives_per_probe = get_i(file_cfg, "negatives_per_probe", eval.negatives_per_probe);
    eval.bin_size = get_d(file_cfg, "bin_size", eval.bin_size);
    eval.seed = get_u64(file_cfg, "seed", eval.seed);
    add_config_flag(eval_cmd);
    eval_cmd->add_option("--out", eval.out_dir, "output directory");
    eval_cmd->add_option("--embeddings", eval.embeddings_path, "per-place embedding file to evaluate directly");
    eval_cmd->add_option("--checkpoint", eval.checkpoint_path, "model checkpoint (with --features)");
    eval_cmd->add_option("--features", eval.features_path, "feature file the checkpoint applies to");
    eval_cmd->add_option("--labels", eval.labels_path, "labels.tsv defining the eval sets");
    eval_cmd->add_option("--truth", eval.truth_path, "ground_truth.tsv defining clean eval sets");
    eval_cmd->add_option("--places", eval.places_path, "places.jsonl (needed with --truth)");
    eval_cmd->add_option("--k-max", eval.k_max);
    eval_cmd->add_option("--negatives-per-probe", eval.negatives_per_probe);
    eval_cmd->add_option("--bin-size", eval.bin_size);
    eval_cmd->add_option("--seed", eval.seed);

    // ---- knn ----
    auto* knn_cmd = app.add_subcommand("knn", "query nearest neighbors of a place");
    std::string knn_embeddings = get_s(file_cfg, "embeddings", "");
    std::string knn_checkpoint = get_s(file_cfg, "checkpoint", "");
    std::string knn_features = get_s(file_cfg, "features", "");
    std::string knn_query;
    int knn_k = 10;
    add_config_flag(knn_cmd);
    knn_cmd->add_option("--embeddings", knn_embeddings);
    knn_cmd->add_option("--checkpoint", knn_checkpoint);
    knn_cmd->add_option("--features", knn_features);
    knn_cmd->add_option("--query", knn_query, "place id to probe")->required();
    knn_cmd->add_option("-k,--k", knn_k, "neighbor count");

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "summarize an eval report");
    std::string report_path = get_s(file_cfg, "report", path_join(get_s(file_cfg, "out", default_out_dir()), "report.json"));
    report_cmd->add_option("--report", report_path, "report.json path");
    add_config_flag(report_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (synth_cmd->parsed()) {
        if (!flip_spec.empty()) {
            synth.synth.flip_rates.clear();
            for (const auto& part : split(flip_spec, ',')) synth.synth.flip_rates.push_back(std::stod(part));
        }
        SynthResult r = run_synth(synth);
        std::printf("[synth] config_hash=%s seed=%llu places=%d labels=%d out=%s\n", r.hash.c_str(),
                    static_cast<unsigned long long>(synth.synth.seed), r.n_places, r.n_labels, synth.out_dir.c_str());
    } else if (embed_cmd->parsed()) {
        if (embed.places_path.empty()) embed.places_path = path_join(embed.out_dir, "places.jsonl");
        if (!gazetteer_path.empty()) {
            embed.gazetteer.clear();
            for (const auto& line : split(read_file(gazetteer_path), '\n'))
                if (!line.empty() && line[0] != '#') embed.gazetteer.push_back(line);
        }
        EmbedResult r = run_embed(embed);
        std::printf("[embed] config_hash=%s seed=%llu places=%d empty_names=%d empty_addresses=%d\n", r.hash.c_str(),
                    static_cast<unsigned long long>(embed.seed), r.n_places, r.empty_names, r.empty_addresses);
    } else if (smooth_cmd->parsed()) {
        if (smooth.places_path.empty()) smooth.places_path = path_join(smooth.out_dir, "places.jsonl");
        if (smooth.features_path.empty()) smooth.features_path = path_join(smooth.out_dir, "features.emb");
        SmoothResult r = run_smooth(smooth);
        std::printf("[smooth] config_hash=%s seed=%llu trained=%d\n", r.hash.c_str(),
                    static_cast<unsigned long long>(smooth.smoothing.seed), r.trained ? 1 : 0);
        if (!r.warning.empty()) std::fprintf(stderr, "warning: %s\n", r.warning.c_str());
    } else if (train_cmd->parsed()) {
        if (train.features_path.empty()) train.features_path = path_join(train.out_dir, "smoothed.emb");
        if (train.labels_path.empty()) train.labels_path = path_join(train.out_dir, "labels.tsv");
        train.train.loss = loss_kind_from(loss_name);
        train.train.distance = distance_kind_from(dist_name);
        TrainStageResult r = run_train(train);
        std::printf("[train] config_hash=%s seed=%llu steps=%lld final_loss=%.6f\n", r.hash.c_str(),
                    static_cast<unsigned long long>(train.train.seed), static_cast<long long>(r.result.steps),
                    r.result.epoch_monitor.empty() ? 0.0 : r.result.epoch_monitor.back());
    } else if (eval_cmd->parsed()) {
        if (eval.embeddings_path.empty() && eval.checkpoint_path.empty())
            throw ValidationError("eval: pass --embeddings, or --checkpoint with --features");
        if (eval.labels_path.empty() && eval.truth_path.empty())
            throw ValidationError("eval: pass --labels or --truth (with --places)");
        EvalStageResult r = run_eval(eval);
        std::printf("[eval] config_hash=%s acc=%.4f avg_pre=%.5f avg_rec=%.4f out=%s\n", r.hash.c_str(), r.report.acc,
                    r.report.avg_pre, r.report.avg_rec, eval.out_dir.c_str());
    } else if (knn_cmd->parsed()) {
        PlaceEmbeddings pe;
        if (!knn_embeddings.empty()) {
            pe = load_place_embeddings(knn_embeddings);
        } else if (!knn_checkpoint.empty() && !knn_features.empty()) {
            pe = apply_checkpoint(load_checkpoint(knn_checkpoint), load_place_embeddings(knn_features));
        } else {
            throw ValidationError("knn: pass --embeddings, or --checkpoint with --features");
        }
        KnnIndex index = KnnIndex::build(pe.ids, std::move(pe.embeddings));
        int qi = index.index_of(knn_query);
        auto neighbors = knn_exact(index, knn_query, std::min(knn_k, index.size() - 1));
        for (const auto& id : neighbors) {
            double d = squared_l2(index.embeddings.row(qi), index.embeddings.row(index.index_of(id)), index.embeddings.cols);
            std::printf("%s\t%.6f\n", id.c_str(), d);
        }
    } else if (report_cmd->parsed()) {
        EvalReport r = load_report_json(report_path);
        std::printf("ACC      %.4f\n", r.acc);
        std::printf("avg PRE  %.5f\n", r.avg_pre);
        std::printf("avg REC  %.4f\n", r.avg_rec);
        for (int k : {1, 5, 10, 20, 50, 100})
            if (k <= static_cast<int>(r.pre_at_k.size()))
                std::printf("K=%-3d    PRE %.5f  REC %.4f\n", k, r.pre_at_k[static_cast<std::size_t>(k - 1)],
                            r.rec_at_k[static_cast<std::size_t>(k - 1)]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const CLI::Error&) {
        return 2;  // CLI11 already printed usage
    } catch (const placedup::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const placedup::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const placedup::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
