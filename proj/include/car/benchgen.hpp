#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "car/cluster.hpp"
#include "car/common.hpp"
#include "car/selection.hpp"

namespace car {

struct WorldConfig {
    std::size_t k = 3;
    std::size_t per_cluster_n = 30;
    std::size_t dim = 8;
    double sep = 10.0;              // minimum center distance, in within-blob std units
    std::uint64_t seed = 0;
    double quality_shift_std = 1.0; // spread of the per-cluster quality offsets
    std::optional<std::size_t> low_cluster;  // blob whose quality is shifted down
    double low_shift = -100.0;
};

/// Planted clusters with planted per-point quality.
struct SyntheticWorld {
    RowMatrix embeddings;   // n x dim
    RowMatrix centers;      // k x dim
    std::vector<std::size_t> true_labels;
    std::vector<double> true_quality;
    std::uint64_t seed = 0;

    std::size_t n() const { return true_labels.size(); }
    std::size_t k() const { return static_cast<std::size_t>(centers.rows()); }
};

namespace detail {

inline RowMatrix blob_centers(std::size_t k, std::size_t dim, double sep, Rng& rng) {
    RowMatrix centers = RowMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
    if (k <= 1) return centers;
    if (dim >= k) {
        // Scaled simplex corners: every pair sits exactly `sep` apart.
        const double scale = sep / std::sqrt(2.0);
        for (std::size_t c = 0; c < k; ++c) centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = scale;
        return centers;
    }
    double radius = sep;
    for (int attempt = 0; attempt < 64; ++attempt, radius *= 1.5) {
        for (std::size_t c = 0; c < k; ++c) {
            Eigen::RowVectorXd v(static_cast<Eigen::Index>(dim));
            for (std::size_t j = 0; j < dim; ++j) v(static_cast<Eigen::Index>(j)) = rng.normal();
            v *= radius / std::max(v.norm(), 1e-12);
            centers.row(static_cast<Eigen::Index>(c)) = v;
        }
        double min_dist = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b)
                min_dist = std::min(min_dist, (centers.row(static_cast<Eigen::Index>(a)) -
                                               centers.row(static_cast<Eigen::Index>(b))).norm());
        if (min_dist >= sep) return centers;
    }
    throw std::runtime_error("gen_blobs: could not place separated centers");
}

}  // namespace detail

/// k isotropic unit-variance Gaussian blobs. Quality is a per-cluster offset
/// plus unit Gaussian noise per point.
inline SyntheticWorld gen_blobs(const WorldConfig& cfg) {
    if (cfg.k < 1 || cfg.per_cluster_n < 1 || cfg.dim < 1) throw std::invalid_argument("gen_blobs: k, per_cluster_n and dim must be positive");
    if (!(cfg.sep >= 0.0)) throw std::invalid_argument("gen_blobs: sep must be non-negative");
    if (cfg.low_cluster && *cfg.low_cluster >= cfg.k) throw std::invalid_argument("gen_blobs: low_cluster out of range");

    Rng rng(cfg.seed);
    SyntheticWorld w;
    w.seed = cfg.seed;
    w.centers = detail::blob_centers(cfg.k, cfg.dim, cfg.sep, rng);

    std::vector<double> offsets(cfg.k);
    for (std::size_t c = 0; c < cfg.k; ++c) offsets[c] = cfg.quality_shift_std * rng.normal();
    if (cfg.low_cluster) offsets[*cfg.low_cluster] = cfg.low_shift;

    const std::size_t n = cfg.k * cfg.per_cluster_n;
    w.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.dim));
    w.true_labels.resize(n);
    w.true_quality.resize(n);
    for (std::size_t c = 0; c < cfg.k; ++c) {
        for (std::size_t p = 0; p < cfg.per_cluster_n; ++p) {
            const std::size_t i = c * cfg.per_cluster_n + p;
            for (std::size_t j = 0; j < cfg.dim; ++j)
                w.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    w.centers(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) + rng.normal();
            w.true_labels[i] = c;
            w.true_quality[i] = offsets[c] + rng.normal();
        }
    }
    return w;
}

inline SyntheticWorld gen_blobs(std::size_t k, std::size_t per_cluster_n, std::size_t dim, double sep, std::uint64_t seed) {
    WorldConfig cfg;
    cfg.k = k;
    cfg.per_cluster_n = per_cluster_n;
    cfg.dim = dim;
    cfg.sep = sep;
    cfg.seed = seed;
    return gen_blobs(cfg);
}

inline ScoreList planted_scores(const SyntheticWorld& w) {
    ScoreList scores;
    scores.reserve(w.n());
    for (std::size_t i = 0; i < w.n(); ++i) scores.emplace_back(i, w.true_quality[i]);
    return scores;
}

/// The pipeline's view of a world: k-means clusters over its embeddings.
inline ClusterAssignment cluster_world(const SyntheticWorld& w, std::optional<std::size_t> k = std::nullopt) {
    return kmeans(w.embeddings, k.value_or(w.k()), w.seed);
}

struct SweepRow {
    std::size_t param = 0;
    double mean_quality = 0.0;
    double coverage = 0.0;
    std::size_t subset_size = 0;
};

inline SweepRow evaluate_selection(const SyntheticWorld& w, const std::vector<std::size_t>& labels,
                                   const SelectionConfig& cfg, std::size_t param) {
    const auto result = car_select(planted_scores(w), labels, cfg);
    const auto report = selection_report(result, planted_scores(w), labels);
    SweepRow row;
    row.param = param;
    row.subset_size = result.selected_ids.size();
    row.coverage = report.cluster_coverage;
    double sum = 0.0;
    for (auto id : result.selected_ids) sum += w.true_quality[id];
    row.mean_quality = result.selected_ids.empty() ? 0.0 : sum / static_cast<double>(result.selected_ids.size());
    return row;
}

inline std::vector<SweepRow> sweep_n1(const SyntheticWorld& w, const std::vector<std::size_t>& labels,
                                      const std::vector<std::size_t>& n1_grid, std::size_t n2) {
    std::vector<SweepRow> rows;
    for (auto n1 : n1_grid) rows.push_back(evaluate_selection(w, labels, {n1, n2}, n1));
    return rows;
}

inline std::vector<SweepRow> sweep_n2(const SyntheticWorld& w, const std::vector<std::size_t>& labels, std::size_t n1,
                                      const std::vector<std::size_t>& n2_grid) {
    std::vector<SweepRow> rows;
    for (auto n2 : n2_grid) rows.push_back(evaluate_selection(w, labels, {n1, n2}, n2));
    return rows;
}

inline std::vector<SweepRow> sweep_n1(const SyntheticWorld& w, const std::vector<std::size_t>& n1_grid, std::size_t n2) {
    return sweep_n1(w, cluster_world(w).labels, n1_grid, n2);
}

inline std::vector<SweepRow> sweep_n2(const SyntheticWorld& w, std::size_t n1, const std::vector<std::size_t>& n2_grid) {
    return sweep_n2(w, cluster_world(w).labels, n1, n2_grid);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "param,mean_quality,coverage,subset_size\n";
    for (const auto& r : rows)
        out += std::to_string(r.param) + "," + format_exact(r.mean_quality) + "," + format_exact(r.coverage) + "," +
               std::to_string(r.subset_size) + "\n";
    return out;
}

/// Quality-only (top-n1) against CaR (top-n1 plus top-n2 per cluster) on a
/// world whose `low_cluster` blob has uniformly lower quality.
struct RescueOutcome {
    std::size_t low_blob_size = 0;
    std::size_t quality_only_from_low = 0;
    std::size_t car_from_low = 0;
    double quality_only_low_coverage = 0.0;  // fraction of the low blob selected
    double car_cluster_coverage = 0.0;       // fraction of clusters represented
    std::size_t quality_only_size = 0;
    std::size_t car_size = 0;
};

inline RescueOutcome diversity_rescue(const SyntheticWorld& w, std::size_t low_cluster, std::size_t n1, std::size_t n2) {
    const auto assignment = cluster_world(w);
    const auto scores = planted_scores(w);
    const auto quality_only = car_select(scores, assignment.labels, {n1, 0});
    const auto with_clusters = car_select(scores, assignment.labels, {n1, n2});

    RescueOutcome out;
    for (auto l : w.true_labels) out.low_blob_size += l == low_cluster;
    for (auto id : quality_only.selected_ids) out.quality_only_from_low += w.true_labels[id] == low_cluster;
    for (auto id : with_clusters.selected_ids) out.car_from_low += w.true_labels[id] == low_cluster;
    out.quality_only_low_coverage = static_cast<double>(out.quality_only_from_low) / static_cast<double>(out.low_blob_size);
    out.car_cluster_coverage = selection_report(with_clusters, scores, assignment.labels).cluster_coverage;
    out.quality_only_size = quality_only.selected_ids.size();
    out.car_size = with_clusters.selected_ids.size();
    return out;
}

}  // namespace car
