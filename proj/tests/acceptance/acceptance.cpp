// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../cli_chain.hpp"
#include "../main_results_fixture.hpp"
#include "car/car.hpp"

using namespace car;

namespace {

// Every tolerance and budget used below.
constexpr double kIdentityTol = 1e-12;
constexpr double kGradRelTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kHeldOutFloor = 0.95;
constexpr double kAriFloor = 0.99;
constexpr double kExplainedFloor = 0.95;
constexpr double kEckartYoungSlack = 1e-9;
constexpr double kMetricsBudgetS = 1.0;
constexpr double kPcaBudgetS = 10.0;
constexpr double kRescueBudgetS = 5.0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int decimals = 3) { return format_fixed(v, decimals); }

// 1 ---------------------------------------------------------------------------
Outcome main_results_inversion() {
    Clock clock;
    std::size_t cells = 0, unique = 0, agree = 0;
    std::string first_problem;
    for (const auto& row : car_test::kMainResults)
        for (std::size_t set = 0; set < 4; ++set) {
            const auto& cell = row.cells[set];
            const std::size_t n = car_test::kTestSetSizes[set];
            std::vector<std::array<std::size_t, 3>> hits;
            for (std::size_t w = 0; w <= n; ++w)
                for (std::size_t t = 0; w + t <= n; ++t) {
                    const auto m = metrics_from_counts(w, t, n - w - t);
                    if (std::abs(m.ws - cell.ws) <= car_test::kWsTolerance &&
                        std::abs(100 * m.wr - cell.wr_pct) <= car_test::kPctTolerance &&
                        std::abs(100 * m.qs - cell.qs_pct) <= car_test::kPctTolerance)
                        hits.push_back({w, t, n - w - t});
                }
            ++cells;
            unique += hits.size() == 1;
            const bool ok = hits.size() == 1 && hits[0] == std::array<std::size_t, 3>{cell.win, cell.tie, cell.lose};
            agree += ok;
            if (!ok && first_problem.empty())
                first_problem = std::string(row.method) + " " + row.size + " on " + car_test::kTestSetNames[set] + ": " +
                                std::to_string(hits.size()) + " candidate counts";
        }
    const auto example = metrics_from_counts(92, 44, 34);
    const bool example_ok = fmt(example.ws) == "1.341" && fmt(100 * example.wr, 1) == "54.1" && fmt(100 * example.qs, 1) == "80.0";
    const double secs = clock.seconds();
    Outcome o;
    o.pass = agree == cells && example_ok && secs < kMetricsBudgetS;
    o.detail = std::to_string(unique) + "/" + std::to_string(cells) + " cells invert to a unique (win, tie, lose); " +
               "92/44/34 -> " + fmt(example.ws) + " / " + fmt(100 * example.wr, 1) + "% / " + fmt(100 * example.qs, 1) +
               "%; " + fmt(secs) + " s";
    if (!first_problem.empty()) o.detail += "; " + first_problem;
    return o;
}

// 2 ---------------------------------------------------------------------------
Outcome ws_identity() {
    Rng rng(20240601);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 1 + rng.below(400);
        std::vector<MatchOutcome> v(n);
        for (auto& o : v) o = static_cast<MatchOutcome>(rng.below(3));
        const auto m = compute_metrics(v);
        worst = std::max(worst, std::abs(m.ws - (m.wr + m.qs)));
    }
    return {worst <= kIdentityTol, "10000 multisets, max |WS - (WR + QS)| = " + format_exact(worst)};
}

// 3 ---------------------------------------------------------------------------
Outcome truth_table() {
    using V = JudgeVerdict;
    using O = MatchOutcome;
    // Candidate-relative verdicts from both orders.
    const std::map<std::pair<V, V>, O> table{
        {{V::A, V::A}, O::WIN},  {{V::A, V::TIE}, O::WIN},  {{V::TIE, V::A}, O::WIN},
        {{V::A, V::B}, O::TIE},  {{V::B, V::A}, O::TIE},    {{V::TIE, V::TIE}, O::TIE},
        {{V::B, V::B}, O::LOSE}, {{V::B, V::TIE}, O::LOSE}, {{V::TIE, V::B}, O::LOSE},
    };
    std::size_t ok = 0, sym = 0;
    for (const auto& [in, out] : table) {
        ok += combine_swapped(in.first, in.second) == out;
        sym += combine_swapped(reorient(in.first), reorient(in.second)) == flip(out);
    }
    // End to end: a judge always preferring the first slot is position bias only, and must tie.
    class FirstSlot final : public JudgeClient {
    public:
        std::string complete(const JudgeRequest& r) override { return format_reply(r.format, JudgeVerdict::A); }
    } biased;
    const auto res = run_eval({{"q", "a", "b"}}, biased, {PromptFormat::bracket, 1, 0});
    const bool bias_cancels = res.samples[0].outcome == MatchOutcome::TIE;
    return {ok == 9 && sym == 9 && bias_cancels,
            std::to_string(ok) + "/9 cases, " + std::to_string(sym) + "/9 label-swap symmetric, position bias " +
                (bias_cancels ? "cancels" : "leaks")};
}

// 4 ---------------------------------------------------------------------------
// Set-based reading of the definition, independent of the library's ranking.
std::vector<std::size_t> oracle_select(const ScoreList& s, const std::vector<std::size_t>& labels, std::size_t n1, std::size_t n2) {
    auto before = [&](std::size_t a, std::size_t b) {
        return s[a].second > s[b].second || (s[a].second == s[b].second && s[a].first < s[b].first);
    };
    std::set<std::size_t> chosen;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::size_t rank = 0, rank_in_cluster = 0;
        for (std::size_t j = 0; j < s.size(); ++j)
            if (before(j, i)) {
                ++rank;
                if (labels[s[j].first] == labels[s[i].first]) ++rank_in_cluster;
            }
        if (rank < n1 || rank_in_cluster < n2) chosen.insert(s[i].first);
    }
    return {chosen.begin(), chosen.end()};
}

Outcome selection_oracle() {
    Rng rng(77);
    std::size_t agree = 0, bounded = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(6, n));
        std::vector<std::size_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = i < k ? i : rng.below(k);
        std::vector<std::size_t> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        rng.shuffle(ids);
        ScoreList s;
        for (auto id : ids) s.emplace_back(id, static_cast<double>(rng.below(6)) / 2.0);
        const std::size_t n1 = rng.below(n + 1), n2 = rng.below(4);
        const auto got = car_select(s, labels, {n1, n2}).selected_ids;
        agree += got == oracle_select(s, labels, n1, n2);
        bounded += got.size() <= n1 + k * n2;
    }
    // Full-scale configuration with random scores and a balanced 178-way partition.
    const std::size_t n = 52002, k = 178;
    ScoreList s;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.emplace_back(i, rng.normal());
        labels[i] = i % k;
    }
    const auto big = car_select(s, labels, {1000, 1}).selected_ids.size();
    const std::size_t bound = 1000 + k * 1;
    return {agree == 200 && bounded == 200 && big <= bound && bound == 1178,
            std::to_string(agree) + "/200 match the oracle, " + std::to_string(bounded) +
                "/200 within n1 + k*n2; full scale selects " + std::to_string(big) + " <= " + std::to_string(bound) +
                " (the published 1,017 needs the original scores and is not reproduced)"};
}

// 5 ---------------------------------------------------------------------------
Outcome selection_monotonicity() {
    const std::vector<std::size_t> n2_grid{0, 1, 2, 3, 4, 5};
    const std::vector<std::size_t> n1_grid{20, 40, 60, 80, 100, 150, 200};
    std::size_t mean_ok = 0, nest_ok = 0;
    std::string first_violation;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        WorldConfig cfg;
        cfg.k = 6;
        cfg.per_cluster_n = 100;
        cfg.seed = seed;
        const auto w = gen_blobs(cfg);
        const auto labels = cluster_world(w).labels;
        const auto rows = sweep_n2(w, labels, 60, n2_grid);
        bool m = true;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].mean_quality > rows[i - 1].mean_quality) {
                m = false;
                if (first_violation.empty())
                    first_violation = "seed " + std::to_string(seed) + " n2=" + std::to_string(n2_grid[i]) + ": " +
                                      format_exact(rows[i].mean_quality) + " > " + format_exact(rows[i - 1].mean_quality);
            }
        mean_ok += m;
        const auto scores = planted_scores(w);
        std::vector<std::size_t> prev;
        bool nested = true;
        for (auto n1 : n1_grid) {
            const auto ids = car_select(scores, labels, {n1, 1}).selected_ids;
            nested = nested && std::includes(ids.begin(), ids.end(), prev.begin(), prev.end());
            prev = ids;
        }
        nest_ok += nested;
    }
    Outcome o{mean_ok == 100 && nest_ok == 100,
              std::to_string(mean_ok) + "/100 worlds with mean quality non-increasing over n2 = 0..5 at n1 = 60, " +
                  std::to_string(nest_ok) + "/100 nested over n1"};
    if (!first_violation.empty()) o.detail += "; first violation " + first_violation;
    return o;
}

// 6 ---------------------------------------------------------------------------
Outcome pca_planted_rank() {
    Clock clock;
    const Eigen::Index n = 5000, d = 384;
    std::string detail;
    bool pass = true;
    for (Eigen::Index r : {1, 2, 5}) {
        Rng rng(static_cast<std::uint64_t>(100 + r));
        RowMatrix coeff(n, r), basis(r, d), noise(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < r; ++j) coeff(i, j) = rng.normal();
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < d; ++j) basis(i, j) = rng.normal();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) noise(i, j) = 1e-3 * rng.normal();
        RowMatrix x = coeff * basis + noise;
        x.rowwise() += Eigen::RowVectorXd::Constant(d, 3.0);

        const auto a = fit_pca(x, kExplainedFloor);
        const auto b = fit_pca(x, kExplainedFloor);
        const RowMatrix back = pca_reconstruct(a, pca_transform(a, x));
        const Eigen::MatrixXd centered = x.rowwise() - a.mean;
        // Squared relative residual equals the discarded variance share.
        const double rel2 = (x - back).squaredNorm() / centered.squaredNorm();
        const bool ey = std::abs(rel2 - (1.0 - a.explained_ratio)) <= kEckartYoungSlack;
        const bool same = a.components == b.components && a.mean == b.mean && a.explained_ratio == b.explained_ratio;
        const bool ok = a.m() == static_cast<std::size_t>(r) && a.explained_ratio >= kExplainedFloor && ey && same;
        pass = pass && ok;
        detail += "r=" + std::to_string(r) + ": m=" + std::to_string(a.m()) + " ratio " + fmt(a.explained_ratio, 6) +
                  " residual^2 " + format_exact(rel2) + (same ? "" : " NONDETERMINISTIC") + "; ";
    }
    const double secs = clock.seconds();
    detail += fmt(secs, 2) + " s";
    return {pass && secs < kPcaBudgetS, detail};
}

// 7 ---------------------------------------------------------------------------
Outcome kmeans_checks() {
    bool guard_live = false;
    try {
        detail::check_non_increasing(1.0, 1.5, 3);
    } catch (const std::logic_error&) {
        guard_live = true;
    }
    Rng rng(5);
    std::size_t monotone = 0;
    for (int trial = 0; trial < 20; ++trial) {
        RowMatrix y(300, 4);
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) = rng.normal();
        const auto a = kmeans(y, 2 + rng.below(12), rng());
        bool ok = true;
        for (std::size_t i = 1; i < a.inertia_history.size(); ++i) ok = ok && a.inertia_history[i] <= a.inertia_history[i - 1];
        monotone += ok;
    }
    double worst_ari = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto w = gen_blobs(3, 30, 8, 10.0, seed);
        worst_ari = std::min(worst_ari, adjusted_rand_index(kmeans(w.embeddings, 3, seed).labels, w.true_labels));
    }
    const auto k = default_k(52002);
    return {guard_live && monotone == 20 && worst_ari >= kAriFloor && k == 162,
            std::to_string(monotone) + "/20 runs with non-increasing inertia (in-loop guard " +
                (guard_live ? "active" : "MISSING") + "), worst 3-blob ARI " + fmt(worst_ari, 4) + ", default_k(52002) = " +
                std::to_string(k) + " (published run used 178)"};
}

// 8 ---------------------------------------------------------------------------
Outcome scorer_checks() {
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng.below(10));
        const auto d = static_cast<Eigen::Index>(1 + rng.below(8));
        PreferenceFeatures f{RowMatrix(n, d), RowMatrix(n, d)};
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) {
                f.chosen(i, j) = rng.normal();
                f.rejected(i, j) = rng.normal();
            }
        std::vector<double> w(static_cast<std::size_t>(d));
        for (auto& x : w) x = rng.normal();
        const double ridge = trial % 2 ? 0.0 : rng.uniform();
        const auto g = pairwise_gradient(w, ridge, f);
        double diff2 = 0, ref2 = 0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            auto wp = w, wm = w;
            wp[j] += kFdStep;
            wm[j] -= kFdStep;
            const double fd = (pairwise_loss(wp, ridge, f) - pairwise_loss(wm, ridge, f)) / (2 * kFdStep);
            diff2 += (g[j] - fd) * (g[j] - fd);
            ref2 += std::max(g[j] * g[j], fd * fd);
        }
        worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-12));
    }
    // chosen = rejected + delta * u for one hidden unit direction u.
    const Eigen::Index n = 600, d = 32;
    Eigen::RowVectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) u(j) = rng.normal();
    u.normalize();
    PreferenceFeatures all{RowMatrix(n, d), RowMatrix(n, d)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) all.rejected(i, j) = rng.normal();
        all.chosen.row(i) = all.rejected.row(i) + 0.5 * u;
    }
    const PreferenceFeatures train{all.chosen.topRows(480), all.rejected.topRows(480)};
    const PreferenceFeatures held{all.chosen.bottomRows(120), all.rejected.bottomRows(120)};
    const auto model = train_on_features(train, {200, 0.01, 0.0, 0});
    bool loss_down = true;
    for (std::size_t i = 1; i < model.loss_history.size(); ++i)
        loss_down = loss_down && model.loss_history[i] < model.loss_history[i - 1];
    const double acc = accuracy_on_features(model, held);
    return {worst <= kGradRelTol && acc >= kHeldOutFloor && loss_down,
            "worst gradient relative error " + format_exact(worst) + " over 50 instances; separable held-out accuracy " +
                fmt(acc, 4) + ", loss " + (loss_down ? "strictly decreasing" : "NOT monotone") +
                " (the published 84.25% needs the original encoder and expert data and is not reproduced)"};
}

// 9 ---------------------------------------------------------------------------
Outcome cli_determinism() {
    const auto root = std::filesystem::temp_directory_path() / ("car_acceptance_" + std::to_string(::getpid()));
    std::filesystem::remove_all(root);
    const auto a = car_test::run_chain((root / "a").string());
    const auto b = car_test::run_chain((root / "b").string());
    Outcome o;
    if (a.code != 0 || b.code != 0) {
        o = {false, "chain failed at " + (a.code ? a.failed_step : b.failed_step)};
    } else {
        const auto sa = car_test::snapshot((root / "a").string()), sb = car_test::snapshot((root / "b").string());
        std::size_t same = 0;
        std::string differing;
        for (const auto& [name, bytes] : sa) {
            const auto it = sb.find(name);
            if (it != sb.end() && it->second == bytes) ++same;
            else if (differing.empty()) differing = name;
        }
        o.pass = same == sa.size() && sa.size() == sb.size() && sa.size() > 0;
        o.detail = std::to_string(same) + "/" + std::to_string(sa.size()) + " artifacts byte-identical across two runs";
        if (!differing.empty()) o.detail += "; first difference " + differing;
    }
    std::filesystem::remove_all(root);
    return o;
}

// 10 --------------------------------------------------------------------------
Outcome diversity_rescue_check() {
    Clock clock;
    std::size_t ok = 0;
    double worst_low = 0.0, worst_cov = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        WorldConfig cfg;
        cfg.k = 6;
        cfg.per_cluster_n = 100;
        cfg.seed = seed;
        cfg.low_cluster = 2;
        const auto r = diversity_rescue(gen_blobs(cfg), 2, 60, 1);
        worst_low = std::max(worst_low, r.quality_only_low_coverage);
        worst_cov = std::min(worst_cov, r.car_cluster_coverage);
        ok += r.quality_only_low_coverage == 0.0 && r.car_cluster_coverage == 1.0 && r.car_from_low >= 1;
    }
    const double secs = clock.seconds();
    return {ok == 10 && secs < kRescueBudgetS,
            std::to_string(ok) + "/10 worlds: quality-only covers at most " + fmt(100 * worst_low, 1) +
                "% of the low blob, CaR covers at least " + fmt(100 * worst_cov, 1) + "% of clusters; " + fmt(secs, 2) + " s"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric reproduction", main_results_inversion},
        {"WS = WR + QS", ws_identity},
        {"judge combination truth table", truth_table},
        {"selection oracle", selection_oracle},
        {"selection monotonicity", selection_monotonicity},
        {"PCA planted rank", pca_planted_rank},
        {"k-means", kmeans_checks},
        {"scorer", scorer_checks},
        {"CLI determinism", cli_determinism},
        {"diversity rescue", diversity_rescue_check},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
