#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "car/common.hpp"
#include "car/dataset.hpp"
#include "car/embedding.hpp"

namespace car {

/// Unit-cost edit distance over Unicode scalar values.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    const auto x = utf8_decode(a);
    const auto y = utf8_decode(b);
    if (x.empty()) return y.size();
    if (y.empty()) return x.size();
    std::vector<std::size_t> row(y.size() + 1);
    for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (x[i - 1] == y[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[y.size()];
}

/// Expert-revised pair (chosen) against the original machine-generated pair
/// (rejected).
struct PreferenceExample {
    InstructionPair chosen;
    InstructionPair rejected;
    std::size_t edit_distance = 0;
};

/// Keeps aligned index i when the concat_text edit distance exceeds
/// `min_edit` (strictly) and the two texts differ.
inline std::vector<PreferenceExample> curate_preferences(const Dataset& originals, const Dataset& revised, long long min_edit) {
    if (originals.size() != revised.size())
        throw data_error("curate_preferences: originals have " + std::to_string(originals.size()) +
                         " pairs, revised have " + std::to_string(revised.size()));
    std::vector<PreferenceExample> out;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        const std::string r = concat_text(originals[i]);
        const std::string c = concat_text(revised[i]);
        if (r == c) continue;
        const std::size_t dist = levenshtein(c, r);
        if (static_cast<long long>(dist) > min_edit) out.push_back({revised[i], originals[i], dist});
    }
    return out;
}

struct PreferenceSplit {
    std::vector<PreferenceExample> train, val, test;
};

/// Seeded shuffle, then floor(0.8n) / floor(0.1n) / remainder.
inline PreferenceSplit split_811(const std::vector<PreferenceExample>& examples, std::uint64_t seed) {
    const std::size_t n = examples.size();
    if (n < 10) throw data_error("split_811: need at least 10 examples, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_train = n * 8 / 10;
    const std::size_t n_val = n / 10;
    PreferenceSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
        dst.push_back(examples[order[i]]);
    }
    return split;
}

// ---------------------------------------------------------------------------
// Pairwise logistic (Bradley-Terry) scorer
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 200;
    double step = 0.1;
    double ridge = 0.0;
    std::uint64_t seed = 0;
};

struct ScorerModel {
    std::vector<double> w;
    double b = 0.0;
    TrainConfig train_meta;
    std::vector<double> loss_history;
    nlohmann::json extra_meta = nlohmann::json::object();

    std::size_t d() const { return w.size(); }

    double score(std::span<const double> x) const {
        if (x.size() != w.size())
            throw data_error("score: feature dimension " + std::to_string(x.size()) + " != model dimension " +
                             std::to_string(w.size()));
        double s = b;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
        return s;
    }
};

/// Embedded preference pair; only the difference enters the loss.
struct PreferenceFeatures {
    RowMatrix chosen;    // n x d
    RowMatrix rejected;  // n x d
};

inline PreferenceFeatures embed_preferences(const std::vector<PreferenceExample>& examples, const Embedder& embedder) {
    std::vector<std::string> chosen, rejected;
    chosen.reserve(examples.size());
    rejected.reserve(examples.size());
    for (const auto& e : examples) {
        chosen.push_back(concat_text(e.chosen));
        rejected.push_back(concat_text(e.rejected));
    }
    PreferenceFeatures f{embedder.embed(chosen), embedder.embed(rejected)};
    check_finite(f.chosen, "preference features");
    check_finite(f.rejected, "preference features");
    return f;
}

/// softplus(-x) = -ln sigmoid(x), stable for large |x|.
inline double neg_log_sigmoid(double x) {
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Sum over pairs of -ln sigma(w . (x_c - x_r)) + ridge * ||w||^2.
inline double pairwise_loss(std::span<const double> w, double ridge, const PreferenceFeatures& f) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < f.chosen.rows(); ++i) {
        double margin = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            margin += w[j] * (f.chosen(i, jj) - f.rejected(i, jj));
        }
        loss += neg_log_sigmoid(margin);
    }
    double norm2 = 0.0;
    for (double x : w) norm2 += x * x;
    return loss + ridge * norm2;
}

/// Gradient of pairwise_loss: sum of -sigma(-margin) * (x_c - x_r), plus 2 * ridge * w.
inline std::vector<double> pairwise_gradient(std::span<const double> w, double ridge, const PreferenceFeatures& f) {
    std::vector<double> g(w.size(), 0.0);
    std::vector<double> diff(w.size());
    for (Eigen::Index i = 0; i < f.chosen.rows(); ++i) {
        double margin = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            diff[j] = f.chosen(i, jj) - f.rejected(i, jj);
            margin += w[j] * diff[j];
        }
        const double coeff = -sigmoid(-margin);
        for (std::size_t j = 0; j < w.size(); ++j) g[j] += coeff * diff[j];
    }
    for (std::size_t j = 0; j < w.size(); ++j) g[j] += 2.0 * ridge * w[j];
    return g;
}

using EpochLogger = std::function<void(std::size_t epoch, double loss)>;

/// Full-batch gradient descent from w = 0, b = 0. The bias cancels in the
/// pairwise margin and stays at zero. `loss_history[e]` is the loss before
/// update e; the final entry is the loss of the returned weights.
inline ScorerModel train_on_features(const PreferenceFeatures& f, const TrainConfig& cfg, const EpochLogger& log = {}) {
    if (f.chosen.rows() == 0) throw data_error("train_scorer: empty training set");
    if (f.chosen.rows() != f.rejected.rows() || f.chosen.cols() != f.rejected.cols())
        throw data_error("train_scorer: chosen/rejected feature shapes differ");
    ScorerModel model;
    model.train_meta = cfg;
    model.w.assign(static_cast<std::size_t>(f.chosen.cols()), 0.0);

    auto record = [&](std::size_t epoch) {
        const double loss = pairwise_loss(model.w, cfg.ridge, f);
        if (!std::isfinite(loss)) {
            double norm2 = 0.0;
            for (double x : model.w) norm2 += x * x;
            throw data_error("train_scorer: non-finite loss at epoch " + std::to_string(epoch) + " (step " +
                             format_exact(cfg.step) + ", ridge " + format_exact(cfg.ridge) + ", |w|^2 " +
                             format_exact(norm2) + ")");
        }
        model.loss_history.push_back(loss);
        if (log) log(epoch, loss);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        record(epoch);
        const auto g = pairwise_gradient(model.w, cfg.ridge, f);
        for (std::size_t j = 0; j < model.w.size(); ++j) model.w[j] -= cfg.step * g[j];
    }
    record(cfg.epochs);
    return model;
}

inline ScorerModel train_scorer(const std::vector<PreferenceExample>& train, const Embedder& embedder,
                                const TrainConfig& cfg, const EpochLogger& log = {}) {
    if (train.empty()) throw data_error("train_scorer: empty training set");
    return train_on_features(embed_preferences(train, embedder), cfg, log);
}

/// score_i = w . x_i + b for every row.
inline std::vector<std::pair<std::size_t, double>> score_pairs(const ScorerModel& model, const EmbeddingMatrix& m) {
    if (m.n() > 0 && m.d() != model.d())
        throw data_error("score_pairs: embedding dimension " + std::to_string(m.d()) + " != model dimension " +
                         std::to_string(model.d()));
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) {
        const auto row = m.data.row(static_cast<Eigen::Index>(i));
        out.emplace_back(i, model.score(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    }
    return out;
}

/// Fraction of pairs with score(chosen) > score(rejected); ties are wrong.
inline double accuracy_on_features(const ScorerModel& model, const PreferenceFeatures& f) {
    if (f.chosen.rows() == 0) throw data_error("eval_pref_accuracy: empty example set");
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < f.chosen.rows(); ++i) {
        const auto c = f.chosen.row(i);
        const auto r = f.rejected.row(i);
        const double sc = model.score(std::span<const double>(c.data(), static_cast<std::size_t>(c.size())));
        const double sr = model.score(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())));
        if (sc > sr) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(f.chosen.rows());
}

inline double eval_pref_accuracy(const ScorerModel& model, const std::vector<PreferenceExample>& examples,
                                 const Embedder& embedder) {
    if (examples.empty()) throw data_error("eval_pref_accuracy: empty example set");
    return accuracy_on_features(model, embed_preferences(examples, embedder));
}

// ---------------------------------------------------------------------------
// Files: IQS1 model, scores CSV, preference JSON
// ---------------------------------------------------------------------------

inline nlohmann::json model_metadata(const ScorerModel& model) {
    nlohmann::json meta = model.extra_meta.is_object() ? model.extra_meta : nlohmann::json::object();
    meta["seed"] = model.train_meta.seed;
    meta["epochs"] = model.train_meta.epochs;
    meta["step"] = model.train_meta.step;
    meta["ridge"] = model.train_meta.ridge;
    return meta;
}

/// "IQS1", u32 d, d weights, bias, then the metadata JSON text to end of file.
inline void save_model(const ScorerModel& model, const std::string& path) {
    std::ostringstream out;
    binio::put_magic(out, "IQS1");
    binio::put_u32(out, static_cast<std::uint32_t>(model.d()));
    for (double x : model.w) binio::put_f64(out, x);
    binio::put_f64(out, model.b);
    out << model_metadata(model).dump();
    write_file(path, out.str());
}

inline ScorerModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    binio::expect_magic(in, "IQS1");
    const auto d = binio::get_u32(in, "IQS1 dimension");
    ScorerModel model;
    model.w.resize(d);
    for (auto& x : model.w) x = binio::get_f64(in, "IQS1 weights");
    model.b = binio::get_f64(in, "IQS1 bias");
    std::ostringstream rest;
    rest << in.rdbuf();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(rest.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error("'" + path + "': bad metadata block: " + e.what());
    }
    model.train_meta.seed = meta.value("seed", std::uint64_t{0});
    model.train_meta.epochs = meta.value("epochs", std::size_t{0});
    model.train_meta.step = meta.value("step", 0.0);
    model.train_meta.ridge = meta.value("ridge", 0.0);
    for (const char* key : {"seed", "epochs", "step", "ridge"}) meta.erase(key);
    model.extra_meta = meta;
    for (double x : model.w)
        if (!std::isfinite(x)) throw data_error("'" + path + "': non-finite weight");
    if (!std::isfinite(model.b)) throw data_error("'" + path + "': non-finite bias");
    return model;
}

inline std::string scores_csv(const std::vector<std::pair<std::size_t, double>>& scores) {
    std::string out = "pair_id,score\n";
    for (const auto& [id, s] : scores) out += std::to_string(id) + "," + format_fixed(s, 6) + "\n";
    return out;
}

inline void save_scores_csv(const std::vector<std::pair<std::size_t, double>>& scores, const std::string& path) {
    write_file(path, scores_csv(scores));
}

inline std::vector<std::pair<std::size_t, double>> load_scores_csv(const std::string& path) {
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& row : read_csv(path, "pair_id,score")) {
        if (row.size() != 2) throw data_error("'" + path + "': expected 2 fields per row");
        const auto id = parse_int(row[0], "pair_id");
        if (id < 0) throw data_error("'" + path + "': negative pair id");
        out.emplace_back(static_cast<std::size_t>(id), parse_real(row[1], "score"));
    }
    return out;
}

inline std::vector<PreferenceExample> parse_preferences(const std::string& text, const std::string& origin = "<memory>") {
    const auto doc = detail::parse_json(text, origin);
    if (!doc.is_array()) throw data_error("'" + origin + "': preference file must be a JSON array");
    std::vector<PreferenceExample> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& item = doc[i];
        if (!item.is_object() || !item.contains("chosen") || !item.contains("rejected"))
            throw data_error("'" + origin + "': entry " + std::to_string(i) + " needs 'chosen' and 'rejected'");
        // A side is either a full pair object or a bare string taken as the instruction.
        auto side = [&](const nlohmann::json& v) {
            if (v.is_string()) return InstructionPair{i, v.get<std::string>(), "", ""};
            return detail::pair_from_json(v, i);
        };
        PreferenceExample e;
        e.chosen = side(item["chosen"]);
        e.rejected = side(item["rejected"]);
        const auto c = concat_text(e.chosen);
        const auto r = concat_text(e.rejected);
        if (c == r) throw data_error("'" + origin + "': entry " + std::to_string(i) + " has identical chosen and rejected text");
        e.edit_distance = levenshtein(c, r);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<PreferenceExample> load_preferences(const std::string& path) {
    return parse_preferences(read_file(path), path);
}

inline void save_preferences(const std::vector<PreferenceExample>& examples, const std::string& path) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : examples)
        arr.push_back(nlohmann::ordered_json{{"chosen", detail::pair_to_json(e.chosen)},
                                             {"rejected", detail::pair_to_json(e.rejected)}});
    write_file(path, arr.dump(2) + "\n");
}

}  // namespace car
