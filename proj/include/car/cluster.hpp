#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "car/common.hpp"

namespace car {

struct ClusterAssignment {
    std::vector<std::size_t> labels;   // labels[pair_id] in [0, k)
    RowMatrix centroids;               // k x m
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    double init_inertia = 0.0;         // inertia of the k-means++ centers
    std::vector<double> inertia_history;

    std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
    std::size_t n() const { return labels.size(); }

    std::vector<std::vector<std::size_t>> members() const {
        std::size_t kk = k();
        for (auto l : labels) kk = std::max(kk, l + 1);
        std::vector<std::vector<std::size_t>> out(kk);
        for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
        return out;
    }
};

/// ceil(sqrt(n / 2)) clamped to [1, n], computed in integers as the smallest
/// k with 2k^2 >= n.
inline std::size_t default_k(std::size_t n) {
    if (n < 2) throw data_error("default_k: need at least 2 points, got " + std::to_string(n));
    std::size_t k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n) / 2.0));
    while (k > 0 && 2 * (k - 1) * (k - 1) >= n) --k;
    while (2 * k * k < n) ++k;
    return std::clamp<std::size_t>(k, 1, n);
}

struct KMeansOptions {
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::size_t restarts = 1;
    std::size_t threads = 1;
};

namespace detail {

inline double sq_dist(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double diff = a(i, c) - b(j, c);
        s += diff * diff;
    }
    return s;
}

inline RowMatrix kmeanspp_init(const RowMatrix& y, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(y.rows());
    RowMatrix centers(static_cast<Eigen::Index>(k), y.cols());
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    std::size_t first = static_cast<std::size_t>(rng.below(n));
    centers.row(0) = y.row(static_cast<Eigen::Index>(first));
    chosen[first] = true;

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(y, static_cast<Eigen::Index>(i), centers, static_cast<Eigen::Index>(c - 1)));
            total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                acc += d2[i];
                pick = i;
                if (acc > r) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a center.
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        chosen[pick] = true;
        centers.row(static_cast<Eigen::Index>(c)) = y.row(static_cast<Eigen::Index>(pick));
    }
    return centers;
}

/// Nearest-centroid labels; ties go to the lower centroid index.
inline void assign(const RowMatrix& y, const RowMatrix& centers, std::vector<std::size_t>& labels,
                   std::vector<double>& dist, std::size_t threads) {
    const auto n = static_cast<std::size_t>(y.rows());
    const auto k = centers.rows();
    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t chunk) {
        const std::size_t end = std::min(n, (chunk + 1) * kChunk);
        for (std::size_t i = chunk * kChunk; i < end; ++i) {
            std::size_t best = 0;
            double best_d = sq_dist(y, static_cast<Eigen::Index>(i), centers, 0);
            for (Eigen::Index c = 1; c < k; ++c) {
                const double d = sq_dist(y, static_cast<Eigen::Index>(i), centers, c);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::size_t>(c);
                }
            }
            labels[i] = best;
            dist[i] = best_d;
        }
    });
}

/// Gives every empty cluster the point farthest from its own centroid, taken
/// from a cluster that keeps at least one member.
inline void reseed_empty(const RowMatrix& y, RowMatrix& centers, std::vector<std::size_t>& labels,
                         std::vector<double>& dist) {
    const auto k = static_cast<std::size_t>(centers.rows());
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] > 0) continue;
        std::size_t far = labels.size();
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (sizes[labels[i]] <= 1) continue;
            if (far == labels.size() || dist[i] > dist[far]) far = i;
        }
        if (far == labels.size()) throw std::logic_error("kmeans: cannot reseed empty cluster");
        --sizes[labels[far]];
        labels[far] = c;
        ++sizes[c];
        dist[far] = 0.0;
        centers.row(static_cast<Eigen::Index>(c)) = y.row(static_cast<Eigen::Index>(far));
    }
}

inline double sum_fixed_order(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline RowMatrix cluster_means(const RowMatrix& y, const std::vector<std::size_t>& labels, std::size_t k) {
    RowMatrix sums = RowMatrix::Zero(static_cast<Eigen::Index>(k), y.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.row(static_cast<Eigen::Index>(labels[i])) += y.row(static_cast<Eigen::Index>(i));
        ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) sums.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    return sums;
}

inline void check_non_increasing(double previous, double current, std::size_t iteration) {
    if (current > previous + 1e-10 * std::max(previous, 1e-300))
        throw std::logic_error("kmeans: inertia increased at iteration " + std::to_string(iteration) + " (" +
                               format_exact(previous) + " -> " + format_exact(current) + ")");
}

inline ClusterAssignment kmeans_single(const RowMatrix& y, std::size_t k, std::uint64_t seed,
                                       const KMeansOptions& opts) {
    const auto n = static_cast<std::size_t>(y.rows());
    Rng rng(seed);
    ClusterAssignment out;
    out.seed = seed;
    RowMatrix centers = kmeanspp_init(y, k, rng);
    std::vector<std::size_t> labels(n, 0);
    std::vector<double> dist(n, 0.0);

    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        assign(y, centers, labels, dist, opts.threads);
        if (it == 0) out.init_inertia = sum_fixed_order(dist);
        reseed_empty(y, centers, labels, dist);
        const double inertia = sum_fixed_order(dist);
        check_non_increasing(previous, inertia, it);
        out.inertia_history.push_back(inertia);
        previous = inertia;

        RowMatrix updated = cluster_means(y, labels, k);
        const double shift = (updated - centers).cwiseAbs().maxCoeff();
        centers = std::move(updated);
        out.iterations = it + 1;
        if (shift < opts.tol) break;
    }

    assign(y, centers, labels, dist, opts.threads);
    if (out.iterations == 0) out.init_inertia = sum_fixed_order(dist);
    reseed_empty(y, centers, labels, dist);
    out.inertia = sum_fixed_order(dist);
    check_non_increasing(previous, out.inertia, out.iterations);
    out.inertia_history.push_back(out.inertia);
    out.labels = std::move(labels);
    out.centroids = std::move(centers);
    return out;
}

}  // namespace detail

/// Seeded k-means: k-means++ initialization followed by Lloyd iterations
/// until the max-norm centroid shift drops below `tol`. With restarts > 1 the
/// lowest-inertia run wins (earliest run on ties); restart r uses seed
/// mix64(seed + r) for r > 0.
inline ClusterAssignment kmeans(const RowMatrix& y, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {}) {
    const auto n = static_cast<std::size_t>(y.rows());
    if (k < 1) throw data_error("kmeans: k must be >= 1");
    if (k > n) throw data_error("kmeans: k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
    if (!y.allFinite()) throw data_error("kmeans: input contains non-finite values");

    const std::size_t runs = std::max<std::size_t>(1, opts.restarts);
    ClusterAssignment best;
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t run_seed = r == 0 ? seed : mix64(seed + r);
        auto result = detail::kmeans_single(y, k, run_seed, opts);
        if (r == 0 || result.inertia < best.inertia) best = std::move(result);
    }
    return best;
}

inline double inertia_of(const RowMatrix& y, const std::vector<std::size_t>& labels, const RowMatrix& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        s += detail::sq_dist(y, static_cast<Eigen::Index>(i), centroids, static_cast<Eigen::Index>(labels[i]));
    return s;
}

/// Adjusted Rand index between two labelings of the same points.
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: size mismatch");
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, count] : table) index += choose2(count);
    for (const auto& [key, count] : rows) sum_rows += choose2(count);
    for (const auto& [key, count] : cols) sum_cols += choose2(count);
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Persistence: assignment CSV and CEN1 centroid files
// ---------------------------------------------------------------------------

inline std::string assignment_csv(const std::vector<std::size_t>& labels) {
    std::string out = "pair_id,cluster_id\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
    return out;
}

inline void save_assignment_csv(const std::vector<std::size_t>& labels, const std::string& path) {
    write_file(path, assignment_csv(labels));
}

/// Reads `pair_id,cluster_id` rows; every id in [0, n) must appear once.
inline std::vector<std::size_t> load_assignment_csv(const std::string& path) {
    const auto rows = read_csv(path, "pair_id,cluster_id");
    std::vector<std::size_t> labels(rows.size(), 0);
    std::vector<bool> seen(rows.size(), false);
    for (const auto& row : rows) {
        if (row.size() != 2) throw data_error("'" + path + "': expected 2 fields per row");
        const auto id = parse_int(row[0], "pair_id");
        const auto cluster = parse_int(row[1], "cluster_id");
        if (id < 0 || static_cast<std::size_t>(id) >= rows.size() || seen[static_cast<std::size_t>(id)])
            throw data_error("'" + path + "': pair ids must be 0..n-1, each exactly once (bad id " + row[0] + ")");
        if (cluster < 0) throw data_error("'" + path + "': negative cluster id");
        seen[static_cast<std::size_t>(id)] = true;
        labels[static_cast<std::size_t>(id)] = static_cast<std::size_t>(cluster);
    }
    return labels;
}

inline void save_centroids(const ClusterAssignment& a, const std::string& path) {
    std::ostringstream out;
    binio::put_magic(out, "CEN1");
    binio::put_u32(out, static_cast<std::uint32_t>(a.centroids.cols()));
    binio::put_u32(out, static_cast<std::uint32_t>(a.centroids.rows()));
    binio::put_matrix(out, a.centroids);
    binio::put_f64(out, a.inertia);
    write_file(path, out.str());
}

struct CentroidFile {
    RowMatrix centroids;
    double inertia = 0.0;
};

inline CentroidFile load_centroids(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    binio::expect_magic(in, "CEN1");
    const auto d = binio::get_u32(in, "CEN1 dimension");
    const auto k = binio::get_u32(in, "CEN1 cluster count");
    CentroidFile f;
    f.centroids = binio::get_matrix(in, k, d, "CEN1 centroids");
    f.inertia = binio::get_f64(in, "CEN1 inertia");
    binio::expect_eof(in, "CEN1");
    return f;
}

}  // namespace car
