// car: command-line front end for the clustering-and-ranking selection
// pipeline. Stages exchange files; each output gets a sidecar manifest.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "car/car.hpp"
#include "car/remote.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRemote = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void log_line(const std::string& msg) { std::cerr << "[car] " << msg << "\n"; }

std::string json_scalar_to_arg(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

/// Fills options that were not given on the command line from the JSON
/// config: top-level keys apply to every subcommand, an object under the
/// subcommand's name overrides them. Keys are long option names without
/// dashes.
void apply_config(CLI::App& sub, const std::string& path) {
    if (path.empty()) return;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(car::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw car::data_error("config '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw car::data_error("config '" + path + "' must be a JSON object");

    std::map<std::string, nlohmann::json> values;
    for (const auto& [key, value] : doc.items())
        if (!value.is_object()) values[key] = value;
    if (auto it = doc.find(sub.get_name()); it != doc.end() && it->is_object())
        for (const auto& [key, value] : it->items()) values[key] = value;

    for (CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || opt->count() > 0) continue;
        auto it = values.find(name);
        if (it == values.end()) continue;
        if (it->second.is_array()) {
            for (const auto& v : it->second) opt->add_result(json_scalar_to_arg(v));
        } else {
            opt->add_result(json_scalar_to_arg(it->second));
        }
        opt->run_callback();
    }
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string("missing required option --") + flag);
}

void require_file(const std::string& path, const char* flag) {
    require(path, flag);
    if (!fs::is_regular_file(path)) throw UsageError(std::string("--") + flag + ": no such file '" + path + "'");
}

std::string ensure_dir(const std::string& dir, const char* flag) {
    require(dir, flag);
    fs::create_directories(dir);
    return dir;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string base(const std::string& path) { return car::RunManifest::file_name(path); }

std::vector<std::size_t> parse_grid(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    for (const auto& part : car::split(text, ',')) {
        if (part.empty()) continue;
        long long v = 0;
        try {
            v = car::parse_int(part, flag);
        } catch (const car::Error& e) {
            throw UsageError(e.what());
        }
        if (v < 0) throw UsageError(std::string("--") + flag + ": values must be non-negative");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw UsageError(std::string("--") + flag + ": empty grid");
    return out;
}

// ---------------------------------------------------------------------------
// Embedding options shared by embed and train-scorer
// ---------------------------------------------------------------------------

struct EmbedFlags {
    std::string backend = "hash";
    std::size_t dim = 384;
    std::uint64_t seed = 0;
    std::string path;
    std::string endpoint;
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 4;
    double timeout = 30.0;
    int retries = 3;
    bool instruction_only = false;

    void bind(CLI::App* app) {
        app->add_option("--backend", backend, "Embedding backend: hash|file|remote");
        app->add_option("--dim", dim, "Embedding dimension");
        app->add_option("--embed-seed", seed, "Seed of the hashing embedder");
        app->add_option("--embeddings-file", path, "Precomputed EMB1 file (file backend)");
        app->add_option("--embed-endpoint", endpoint, "Embedding service URL (remote backend)");
        app->add_option("--batch-size", batch_size, "Texts per remote request");
        app->add_option("--max-in-flight", max_in_flight, "Concurrent remote requests");
        app->add_option("--timeout", timeout, "Remote request timeout in seconds");
        app->add_option("--retries", retries, "Remote retries per batch");
        app->add_flag("--instruction-only", instruction_only, "Embed the instruction field only");
    }

    car::EmbedderSpec spec() const {
        car::EmbedderSpec s;
        s.backend = car::parse_backend(backend);
        s.dim = dim;
        s.seed = seed;
        s.path = path;
        s.endpoint = endpoint;
        s.batch_size = batch_size;
        s.max_in_flight = max_in_flight;
        s.timeout_seconds = timeout;
        s.retries = retries;
        s.instruction_only = instruction_only;
        s.validate();
        return s;
    }

    ordered_json to_json() const {
        ordered_json j{{"backend", backend}, {"dim", dim}, {"embed-seed", seed}};
        if (backend == "file") j["embeddings-file"] = base(path);
        if (backend == "remote") {
            j["embed-endpoint"] = endpoint;
            j["batch-size"] = batch_size;
            j["max-in-flight"] = max_in_flight;
            j["timeout"] = timeout;
            j["retries"] = retries;
        }
        j["instruction-only"] = instruction_only;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct Ingest {
    std::string input, out_dir;
    bool dedupe = false;

    void bind(CLI::App* app) {
        app->add_option("--input", input, "Alpaca-style JSON dataset");
        app->add_option("--out-dir", out_dir, "Output directory");
        app->add_flag("--dedupe", dedupe, "Drop pairs whose text duplicates an earlier pair");
    }

    int run() {
        require_file(input, "input");
        ensure_dir(out_dir, "out-dir");
        const auto ds = car::load_dataset(input);
        auto ids = car::all_ids(ds);
        if (dedupe) ids = car::dedupe_pairs(ids, ds);
        const auto out = join(out_dir, "dataset.json");
        car::write_dataset(ds, ids, out);
        log_line("ingested " + std::to_string(ds.size()) + " pairs, wrote " + std::to_string(ids.size()));

        car::RunManifest m;
        m.command = "ingest";
        m.config = {{"input", base(input)}, {"dedupe", dedupe}};
        m.add_input(input);
        m.add_output(out);
        m.corpus_hash = car::file_hash(out);
        m.extra["pairs_read"] = ds.size();
        m.extra["pairs_written"] = ids.size();
        car::write_manifest(out, m);
        return kExitOk;
    }
};

struct Embed {
    std::string dataset, out;
    EmbedFlags flags;

    void bind(CLI::App* app) {
        app->add_option("--dataset", dataset, "Ingested dataset JSON");
        app->add_option("--out", out, "Output EMB1 file");
        flags.bind(app);
    }

    int run() {
        require_file(dataset, "dataset");
        require(out, "out");
        const auto spec = flags.spec();
        if (spec.backend == car::EmbedBackend::file) require_file(spec.path, "embeddings-file");
        const auto ds = car::load_dataset(dataset);
        const auto matrix = car::embed_corpus(ds, spec);
        car::save_embeddings(matrix, out);
        log_line("embedded " + std::to_string(matrix.n()) + " x " + std::to_string(matrix.d()));

        car::RunManifest m;
        m.command = "embed";
        m.config = flags.to_json();
        m.config["dataset"] = base(dataset);
        m.seed = spec.seed;
        m.add_input(dataset);
        m.add_output(out);
        m.corpus_hash = car::file_hash(dataset);
        car::write_manifest(out, m);
        return kExitOk;
    }
};

struct TrainScorer {
    std::string prefs, originals, revised, out, save_prefs;
    std::optional<long long> min_edit;
    std::uint64_t split_seed = 0;
    std::size_t epochs = 200;
    double step = 0.1;
    double ridge = 0.0;
    EmbedFlags flags;

    void bind(CLI::App* app) {
        app->add_option("--prefs", prefs, "Preference JSON: [{chosen, rejected}, ...]");
        app->add_option("--originals", originals, "Original pairs (rejected side), aligned with --revised");
        app->add_option("--revised", revised, "Expert-revised pairs (chosen side)");
        app->add_option("--min-edit", min_edit, "Keep aligned pairs whose edit distance exceeds this");
        app->add_option("--save-prefs", save_prefs, "Write the curated preference set here");
        app->add_option("--out", out, "Output IQS1 model file");
        app->add_option("--split-seed", split_seed, "Seed of the 8:1:1 split");
        app->add_option("--epochs", epochs, "Full-batch gradient steps");
        app->add_option("--step", step, "Step size");
        app->add_option("--ridge", ridge, "L2 penalty on the weights");
        flags.bind(app);
    }

    int run() {
        require(out, "out");
        std::vector<car::PreferenceExample> examples;
        if (!prefs.empty()) {
            require_file(prefs, "prefs");
            examples = car::load_preferences(prefs);
        } else {
            require_file(originals, "originals");
            require_file(revised, "revised");
            if (!min_edit) throw UsageError("--min-edit is required with --originals/--revised");
            examples = car::curate_preferences(car::load_dataset(originals), car::load_dataset(revised), *min_edit);
            log_line("curated " + std::to_string(examples.size()) + " preference pairs");
            if (!save_prefs.empty()) car::save_preferences(examples, save_prefs);
        }
        const auto spec = flags.spec();
        const auto embedder = car::make_embedder(spec);
        const auto split = car::split_811(examples, split_seed);

        car::TrainConfig cfg{epochs, step, ridge, split_seed};
        auto model = car::train_scorer(split.train, *embedder, cfg, [&](std::size_t epoch, double loss) {
            if (epoch % 50 == 0 || epoch == epochs) log_line("epoch " + std::to_string(epoch) + " loss " + car::format_fixed(loss, 6));
        });
        const double acc_train = car::eval_pref_accuracy(model, split.train, *embedder);
        const double acc_val = car::eval_pref_accuracy(model, split.val, *embedder);
        const double acc_test = car::eval_pref_accuracy(model, split.test, *embedder);
        log_line("accuracy train " + car::format_fixed(acc_train, 4) + " val " + car::format_fixed(acc_val, 4) +
                 " test " + car::format_fixed(acc_test, 4));

        car::RunManifest m;
        m.command = "train-scorer";
        m.config = flags.to_json();
        m.config["prefs"] = prefs.empty() ? std::string() : base(prefs);
        m.config["originals"] = originals.empty() ? std::string() : base(originals);
        m.config["revised"] = revised.empty() ? std::string() : base(revised);
        if (min_edit) m.config["min-edit"] = *min_edit;
        m.config["split-seed"] = split_seed;
        m.config["epochs"] = epochs;
        m.config["step"] = step;
        m.config["ridge"] = ridge;
        m.seed = split_seed;

        model.extra_meta = nlohmann::json{{"config_hash", m.config_hash()},
                                          {"embedder", nlohmann::json::parse(flags.to_json().dump())},
                                          {"split", {split.train.size(), split.val.size(), split.test.size()}}};
        car::save_model(model, out);

        for (const auto& in : {prefs, originals, revised})
            if (!in.empty()) m.add_input(in);
        m.add_output(out);
        m.extra["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
        m.extra["accuracy"] = {{"train", acc_train}, {"val", acc_val}, {"test", acc_test}};
        m.extra["final_loss"] = model.loss_history.back();
        car::write_manifest(out, m);
        return kExitOk;
    }
};

struct Score {
    std::string embeddings, model, out;

    void bind(CLI::App* app) {
        app->add_option("--embeddings", embeddings, "Corpus EMB1 file");
        app->add_option("--model", model, "IQS1 scorer model");
        app->add_option("--out", out, "Output scores CSV");
    }

    int run() {
        require_file(embeddings, "embeddings");
        require_file(model, "model");
        require(out, "out");
        const auto matrix = car::load_embeddings(embeddings);
        const auto scorer = car::load_model(model);
        const auto scores = car::score_pairs(scorer, matrix);
        car::save_scores_csv(scores, out);
        log_line("scored " + std::to_string(scores.size()) + " pairs");

        car::RunManifest m;
        m.command = "score";
        m.config = {{"embeddings", base(embeddings)}, {"model", base(model)}};
        m.add_input(embeddings);
        m.add_input(model);
        m.add_output(out);
        m.corpus_hash = car::shared_corpus_hash({embeddings});
        car::write_manifest(out, m);
        return kExitOk;
    }
};

struct Cluster {
    std::string embeddings, out_dir;
    std::optional<std::size_t> k;
    double pca_target = 0.95;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::size_t restarts = 1;
    std::size_t threads = 1;

    void bind(CLI::App* app) {
        app->add_option("--embeddings", embeddings, "Corpus EMB1 file");
        app->add_option("--out-dir", out_dir, "Output directory");
        app->add_option("--k", k, "Number of clusters (default ceil(sqrt(n/2)))");
        app->add_option("--pca-target", pca_target, "Variance fraction PCA retains");
        app->add_option("--seed", seed, "k-means seed");
        app->add_option("--max-iter", max_iter, "Lloyd iteration cap");
        app->add_option("--tol", tol, "Centroid max-norm shift tolerance");
        app->add_option("--restarts", restarts, "Independent k-means runs; lowest inertia wins");
        app->add_option("--threads", threads, "Threads for the assignment step");
    }

    int run() {
        require_file(embeddings, "embeddings");
        ensure_dir(out_dir, "out-dir");
        const auto matrix = car::load_embeddings(embeddings);
        const auto pca = car::fit_pca(matrix.data, pca_target);
        const auto reduced = car::pca_transform(pca, matrix.data);
        const std::size_t clusters = k.value_or(car::default_k(matrix.n()));
        log_line("pca kept " + std::to_string(pca.m()) + " of " + std::to_string(pca.d()) + " dims (" +
                 car::format_fixed(pca.explained_ratio, 4) + "), k = " + std::to_string(clusters));
        const auto assignment = car::kmeans(reduced, clusters, seed, {max_iter, tol, restarts, threads});
        log_line("k-means: " + std::to_string(assignment.iterations) + " iterations, inertia " +
                 car::format_fixed(assignment.inertia, 6));

        const auto labels_path = join(out_dir, "assignment.csv");
        const auto centroids_path = join(out_dir, "centroids.cen");
        const auto pca_path = join(out_dir, "pca.pca");
        car::save_assignment_csv(assignment.labels, labels_path);
        car::save_centroids(assignment, centroids_path);
        car::save_pca(pca, pca_path);

        car::RunManifest m;
        m.command = "cluster";
        m.config = {{"embeddings", base(embeddings)}, {"k", clusters},     {"k_defaulted", !k.has_value()},
                    {"pca-target", pca_target},       {"seed", seed},      {"max-iter", max_iter},
                    {"tol", tol},                     {"restarts", restarts}};
        m.seed = assignment.seed;
        m.add_input(embeddings);
        m.corpus_hash = car::shared_corpus_hash({embeddings});
        m.extra["pca_dims"] = pca.m();
        m.extra["explained_ratio"] = pca.explained_ratio;
        m.extra["inertia"] = assignment.inertia;
        m.extra["iterations"] = assignment.iterations;
        for (const auto& p : {labels_path, centroids_path, pca_path}) {
            car::RunManifest each = m;
            each.add_output(p);
            car::write_manifest(p, each);
        }
        return kExitOk;
    }
};

struct Select {
    std::string dataset, scores, clusters, out_dir;
    std::size_t n1 = 1000;
    std::size_t n2 = 1;
    bool content_dedupe = true;

    void bind(CLI::App* app) {
        app->add_option("--dataset", dataset, "Ingested dataset JSON");
        app->add_option("--scores", scores, "Scores CSV");
        app->add_option("--clusters", clusters, "Cluster assignment CSV");
        app->add_option("--out-dir", out_dir, "Output directory");
        app->add_option("--n1", n1, "Global top-n1 by score");
        app->add_option("--n2", n2, "Top-n2 per cluster");
        app->add_flag("!--no-content-dedupe", content_dedupe, "Keep exact text duplicates in the subset");
    }

    int run() {
        require_file(dataset, "dataset");
        require_file(scores, "scores");
        require_file(clusters, "clusters");
        ensure_dir(out_dir, "out-dir");

        const std::string corpus = car::file_hash(dataset);
        car::check_lineage({scores, clusters}, corpus);

        const auto ds = car::load_dataset(dataset);
        const auto score_list = car::load_scores_csv(scores);
        const auto labels = car::load_assignment_csv(clusters);
        if (labels.size() != ds.size())
            throw car::data_error("cluster file covers " + std::to_string(labels.size()) + " pairs, dataset has " +
                                  std::to_string(ds.size()));

        const auto result = car::car_select(score_list, labels, {n1, n2});
        const auto final_ids = content_dedupe ? car::dedupe_pairs(result.selected_ids, ds) : result.selected_ids;
        const auto report = car::selection_report(result, score_list, labels);

        const auto subset_path = join(out_dir, "subset.json");
        const auto manifest_csv = join(out_dir, "selection.csv");
        const auto report_path = join(out_dir, "report.json");
        car::write_dataset(ds, final_ids, subset_path);
        car::write_file(manifest_csv, car::selection_manifest_csv(result, final_ids, score_list, labels));

        ordered_json rep{{"corpus_size", report.corpus_size},
                         {"selected", report.subset_size},
                         {"written", final_ids.size()},
                         {"content_duplicates_removed", result.selected_ids.size() - final_ids.size()},
                         {"percent_of_corpus", report.percent_of_corpus},
                         {"clusters", report.clusters},
                         {"clusters_covered", report.clusters_covered},
                         {"cluster_coverage", report.cluster_coverage},
                         {"overlap_count", report.overlap_count},
                         {"mean_selected_score", report.mean_selected_score},
                         {"min_selected_score", report.min_selected_score},
                         {"mean_corpus_score", report.mean_corpus_score},
                         {"n1", n1},
                         {"n2", n2}};
        car::write_file(report_path, rep.dump(2) + "\n");
        log_line("selected " + std::to_string(final_ids.size()) + " of " + std::to_string(ds.size()) + " pairs (" +
                 car::format_fixed(report.percent_of_corpus, 2) + "%)");

        car::RunManifest m;
        m.command = "select";
        m.config = {{"dataset", base(dataset)}, {"scores", base(scores)}, {"clusters", base(clusters)},
                    {"n1", n1},                 {"n2", n2},               {"content-dedupe", content_dedupe}};
        m.add_input(dataset);
        m.add_input(scores);
        m.add_input(clusters);
        m.corpus_hash = corpus;
        m.extra["report"] = rep;
        for (const auto& p : {subset_path, manifest_csv, report_path}) m.add_output(p);
        car::write_manifest(subset_path, m);
        return kExitOk;
    }
};

struct Eval {
    std::string tests, judge = "mock-longer", script, endpoint, format = "scores", out_dir;
    std::size_t concurrency = 4;
    int retries = 2;
    double timeout = 60.0;

    void bind(CLI::App* app) {
        app->add_option("--tests", tests, "Test set: [{instruction, response_candidate, response_baseline}]");
        app->add_option("--judge", judge, "mock-longer|mock-script|remote");
        app->add_option("--script", script, "Scripted verdicts for mock-script");
        app->add_option("--judge-endpoint", endpoint, "Judge service URL for remote");
        app->add_option("--template", format, "Prompt template: scores|bracket");
        app->add_option("--concurrency", concurrency, "Concurrent judge calls");
        app->add_option("--retries", retries, "Retries per judge call");
        app->add_option("--timeout", timeout, "Judge request timeout in seconds");
        app->add_option("--out-dir", out_dir, "Output directory");
    }

    int run() {
        require_file(tests, "tests");
        ensure_dir(out_dir, "out-dir");
        const auto samples = car::parse_eval_samples(car::read_file(tests), tests);
        std::unique_ptr<car::JudgeClient> client;
        if (judge == "mock-longer") {
            client = std::make_unique<car::LongerResponseJudge>();
        } else if (judge == "mock-script") {
            require_file(script, "script");
            client = std::make_unique<car::ScriptedJudge>(car::ScriptedJudge::from_json(nlohmann::json::parse(car::read_file(script))));
        } else if (judge == "remote") {
            require(endpoint, "judge-endpoint");
            client = std::make_unique<car::RemoteJudge>(endpoint, timeout);
        } else {
            throw UsageError("--judge must be mock-longer, mock-script or remote");
        }
        car::EvalOptions opts{car::parse_prompt_format(format), concurrency, retries};
        const auto result = car::run_eval(samples, *client, opts);

        const auto log_path = join(out_dir, "samples.csv");
        const auto summary_path = join(out_dir, "summary.json");
        car::write_file(log_path, car::eval_log_csv(result));
        car::write_file(summary_path, car::metrics_json(result.metrics).dump(2) + "\n");
        const auto& mr = result.metrics;
        log_line("WS " + car::format_fixed(mr.ws, 3) + " WR " + car::format_fixed(100 * mr.wr, 1) + "% QS " +
                 car::format_fixed(100 * mr.qs, 1) + "% (" + std::to_string(mr.n_all) + " judged, " +
                 std::to_string(mr.n_skipped) + " skipped)");

        car::RunManifest m;
        m.command = "eval";
        m.config = {{"tests", base(tests)}, {"judge", judge}, {"template", format}, {"retries", retries}};
        if (!script.empty()) m.config["script"] = base(script);
        if (judge == "remote") m.config["judge-endpoint"] = endpoint;
        m.add_input(tests);
        m.add_output(log_path);
        m.add_output(summary_path);
        car::write_manifest(summary_path, m);
        return kExitOk;
    }
};

struct Cost {
    std::size_t n_pairs = 52002;
    std::string mode = "local";
    double fraction = 1.0;
    car::CostConfig cfg;
    bool csv = false;
    std::string out;

    void bind(CLI::App* app) {
        app->add_option("--n-pairs", n_pairs, "Pairs evaluated during selection");
        app->add_option("--mode", mode, "Selection mode: none|api|local");
        app->add_option("--fraction", fraction, "Fraction of the corpus used for training, in (0, 1]");
        app->add_option("--api-price", cfg.api_price_per_1k_tokens, "API price per 1k tokens");
        app->add_option("--tokens-per-pair", cfg.avg_tokens_per_pair, "Average tokens sent per pair");
        app->add_option("--gpu-rate", cfg.gpu_hour_rate, "GPU rental price per hour");
        app->add_option("--train-hours", cfg.full_train_hours, "GPU hours to train on the full corpus");
        app->add_option("--selection-hours", cfg.local_selection_hours, "GPU hours for local selection");
        app->add_flag("--csv", csv, "Print CSV instead of an aligned table");
        app->add_option("--out", out, "Also write the CSV table here");
    }

    int run() {
        const auto rows = car::cost_table(n_pairs, car::parse_selection_mode(mode), fraction, cfg);
        std::cout << (csv ? car::cost_table_csv(rows) : car::cost_table_text(rows));
        if (!out.empty()) car::write_file(out, car::cost_table_csv(rows));
        return kExitOk;
    }
};

struct Bench {
    car::WorldConfig world;
    std::optional<std::size_t> low_cluster;
    std::string n1_grid = "20,40,60,80,100,150,200";
    std::string n2_grid = "0,1,2,3,4,5";
    std::size_t n1 = 60;
    std::size_t n2 = 1;
    std::string out_dir;

    void bind(CLI::App* app) {
        world.k = 6;
        world.per_cluster_n = 100;
        app->add_option("--k", world.k, "Planted clusters");
        app->add_option("--per-cluster", world.per_cluster_n, "Points per cluster");
        app->add_option("--dim", world.dim, "Embedding dimension");
        app->add_option("--sep", world.sep, "Center separation in std units");
        app->add_option("--seed", world.seed, "World seed");
        app->add_option("--quality-spread", world.quality_shift_std, "Std of per-cluster quality offsets");
        app->add_option("--low-cluster", low_cluster, "Blob whose quality is shifted down");
        app->add_option("--low-shift", world.low_shift, "Quality offset of the low blob");
        app->add_option("--n1-grid", n1_grid, "Comma-separated n1 values (n2 fixed at --n2)");
        app->add_option("--n2-grid", n2_grid, "Comma-separated n2 values (n1 fixed at --n1)");
        app->add_option("--n1", n1, "Fixed n1 for the n2 sweep");
        app->add_option("--n2", n2, "Fixed n2 for the n1 sweep");
        app->add_option("--out-dir", out_dir, "Output directory");
    }

    int run() {
        ensure_dir(out_dir, "out-dir");
        world.low_cluster = low_cluster;
        const auto w = car::gen_blobs(world);
        const auto assignment = car::cluster_world(w);
        const auto rows1 = car::sweep_n1(w, assignment.labels, parse_grid(n1_grid, "n1-grid"), n2);
        const auto rows2 = car::sweep_n2(w, assignment.labels, n1, parse_grid(n2_grid, "n2-grid"));
        const auto p1 = join(out_dir, "sweep_n1.csv");
        const auto p2 = join(out_dir, "sweep_n2.csv");
        car::write_file(p1, car::sweep_csv(rows1));
        car::write_file(p2, car::sweep_csv(rows2));

        car::RunManifest m;
        m.command = "bench";
        m.config = {{"k", world.k},         {"per-cluster", world.per_cluster_n}, {"dim", world.dim},
                    {"sep", world.sep},     {"quality-spread", world.quality_shift_std},
                    {"n1-grid", n1_grid},   {"n2-grid", n2_grid},                 {"n1", n1},
                    {"n2", n2}};
        if (low_cluster) {
            m.config["low-cluster"] = *low_cluster;
            m.config["low-shift"] = world.low_shift;
            const auto rescue = car::diversity_rescue(w, *low_cluster, n1, n2);
            m.extra["rescue"] = {{"quality_only_low_coverage", rescue.quality_only_low_coverage},
                                 {"car_from_low", rescue.car_from_low},
                                 {"car_cluster_coverage", rescue.car_cluster_coverage}};
        }
        m.seed = world.seed;
        m.add_output(p1);
        m.add_output(p2);
        car::write_manifest(p1, m);
        car::write_manifest(p2, m);
        log_line("wrote " + p1 + " and " + p2);
        return kExitOk;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering-and-ranking instruction data selection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(car::kVersion));

    Ingest ingest;
    Embed embed;
    TrainScorer train;
    Score score;
    Cluster cluster;
    Select select;
    Eval eval;
    Cost cost;
    Bench bench;

    std::map<CLI::App*, std::function<int()>> runners;
    std::map<CLI::App*, std::string> config_paths;
    auto add = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        cmd.bind(sub);
        sub->add_option("--config", config_paths[sub], "JSON config; command-line flags take precedence");
        runners[sub] = [&cmd] { return cmd.run(); };
    };
    add("ingest", "Load, validate and normalize an Alpaca-style dataset", ingest);
    add("embed", "Embed every pair of a dataset", embed);
    add("train-scorer", "Train the pairwise preference scorer", train);
    add("score", "Score every pair with a trained scorer", score);
    add("cluster", "PCA-reduce embeddings and run k-means", cluster);
    add("select", "Top-n1 by score plus top-n2 per cluster", select);
    add("eval", "Swap-order pairwise judging and WS/WR/QS", eval);
    add("cost", "Selection and training cost estimate", cost);
    add("bench", "Synthetic n1/n2 sweeps on planted worlds", bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (auto& [sub, run] : runners) {
            if (!sub->parsed()) continue;
            apply_config(*sub, config_paths[sub]);
            return run();
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const car::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == car::ErrorKind::remote ? kExitRemote : (e.kind() == car::ErrorKind::usage ? kExitUsage : kExitData);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
