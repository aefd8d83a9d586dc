#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "car/cluster.hpp"
#include "car/common.hpp"

namespace car {

using ScoreList = std::vector<std::pair<std::size_t, double>>;

struct SelectionConfig {
    std::size_t n1 = 1000;
    std::size_t n2 = 1;
};

struct SelectionResult {
    std::vector<std::size_t> selected_ids;                   // ascending
    std::vector<std::size_t> from_global;                    // ascending
    std::map<std::size_t, std::vector<std::size_t>> from_cluster;  // rank order within each cluster
    std::size_t overlap_count = 0;
};

/// Ids by descending score, ties by ascending id.
inline std::vector<std::size_t> rank_by_score(const ScoreList& scores) {
    for (const auto& [id, s] : scores)
        if (!std::isfinite(s)) throw data_error("rank_by_score: non-finite score for pair " + std::to_string(id));
    std::vector<std::pair<std::size_t, double>> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::size_t> ids;
    ids.reserve(sorted.size());
    for (const auto& p : sorted) ids.push_back(p.first);
    return ids;
}

namespace detail {

/// Scores indexed by pair id; ids must be exactly {0, ..., n-1}.
inline std::vector<double> dense_scores(const ScoreList& scores, std::size_t n) {
    if (scores.size() != n)
        throw data_error("car_select: " + std::to_string(scores.size()) + " scores for " + std::to_string(n) +
                         " assigned pairs");
    std::vector<double> dense(n, 0.0);
    std::vector<bool> seen(n, false);
    for (const auto& [id, s] : scores) {
        if (id >= n) throw data_error("car_select: pair " + std::to_string(id) + " has a score but no cluster");
        if (seen[id]) throw data_error("car_select: duplicate score for pair " + std::to_string(id));
        seen[id] = true;
        dense[id] = s;
    }
    return dense;
}

}  // namespace detail

/// Global top-n1 by score, united with the top-n2 of every cluster (all of a
/// cluster smaller than n2), deduplicated by id.
inline SelectionResult car_select(const ScoreList& scores, const std::vector<std::size_t>& labels,
                                  const SelectionConfig& config) {
    const std::size_t n = labels.size();
    detail::dense_scores(scores, n);
    if (config.n1 > n)
        throw data_error("car_select: n1 = " + std::to_string(config.n1) + " exceeds dataset size " + std::to_string(n));

    const auto order = rank_by_score(scores);
    SelectionResult result;
    result.from_global.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.n1));

    std::size_t cluster_total = 0;
    if (config.n2 > 0) {
        for (auto id : order) {
            auto& picks = result.from_cluster[labels[id]];
            if (picks.size() < config.n2) {
                picks.push_back(id);
                ++cluster_total;
            }
        }
    }

    std::set<std::size_t> merged(result.from_global.begin(), result.from_global.end());
    for (const auto& [c, ids] : result.from_cluster) merged.insert(ids.begin(), ids.end());
    result.selected_ids.assign(merged.begin(), merged.end());
    std::sort(result.from_global.begin(), result.from_global.end());
    result.overlap_count = config.n1 + cluster_total - result.selected_ids.size();
    return result;
}

inline SelectionResult car_select(const ScoreList& scores, const ClusterAssignment& assignment,
                                  const SelectionConfig& config) {
    return car_select(scores, assignment.labels, config);
}

struct SelectionReport {
    std::size_t corpus_size = 0;
    std::size_t subset_size = 0;
    double percent_of_corpus = 0.0;
    std::size_t clusters = 0;             // non-empty clusters
    std::size_t clusters_covered = 0;
    double cluster_coverage = 0.0;
    double mean_selected_score = 0.0;
    double min_selected_score = 0.0;
    double mean_corpus_score = 0.0;
    std::size_t overlap_count = 0;
};

inline SelectionReport selection_report(const SelectionResult& result, const ScoreList& scores,
                                        const std::vector<std::size_t>& labels) {
    const auto dense = detail::dense_scores(scores, labels.size());
    SelectionReport r;
    r.corpus_size = labels.size();
    r.subset_size = result.selected_ids.size();
    r.overlap_count = result.overlap_count;
    r.percent_of_corpus = r.corpus_size ? 100.0 * static_cast<double>(r.subset_size) / static_cast<double>(r.corpus_size) : 0.0;

    std::set<std::size_t> clusters(labels.begin(), labels.end());
    std::set<std::size_t> covered;
    for (auto id : result.selected_ids) covered.insert(labels.at(id));
    r.clusters = clusters.size();
    r.clusters_covered = covered.size();
    r.cluster_coverage = r.clusters ? static_cast<double>(r.clusters_covered) / static_cast<double>(r.clusters) : 0.0;

    double sum = 0.0;
    for (double s : dense) sum += s;
    r.mean_corpus_score = dense.empty() ? 0.0 : sum / static_cast<double>(dense.size());
    if (!result.selected_ids.empty()) {
        double ssum = 0.0;
        double smin = std::numeric_limits<double>::infinity();
        for (auto id : result.selected_ids) {
            ssum += dense[id];
            smin = std::min(smin, dense[id]);
        }
        r.mean_selected_score = ssum / static_cast<double>(result.selected_ids.size());
        r.min_selected_score = smin;
    }
    return r;
}

inline const char* selection_source(const SelectionResult& result, std::size_t id, std::size_t cluster) {
    const bool global = std::binary_search(result.from_global.begin(), result.from_global.end(), id);
    bool from_cluster = false;
    if (auto it = result.from_cluster.find(cluster); it != result.from_cluster.end())
        from_cluster = std::find(it->second.begin(), it->second.end(), id) != it->second.end();
    if (global && from_cluster) return "both";
    return global ? "global" : "cluster";
}

/// CSV manifest `pair_id,score,cluster_id,source` over the given ids.
inline std::string selection_manifest_csv(const SelectionResult& result, const std::vector<std::size_t>& ids,
                                          const ScoreList& scores, const std::vector<std::size_t>& labels) {
    const auto dense = detail::dense_scores(scores, labels.size());
    std::string out = "pair_id,score,cluster_id,source\n";
    for (auto id : ids) {
        out += std::to_string(id) + "," + format_fixed(dense.at(id), 6) + "," + std::to_string(labels.at(id)) + "," +
               selection_source(result, id, labels.at(id)) + "\n";
    }
    return out;
}

}  // namespace car
