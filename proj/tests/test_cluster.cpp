#include <gtest/gtest.h>

#include "car/benchgen.hpp"
#include "car/cluster.hpp"
#include "test_util.hpp"

using namespace car;

namespace {

RowMatrix gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
    RowMatrix m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
}

// Pair-counting reference: fraction-free Rand statistics from all n^2 pairs.
double ari_oracle(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double both = 0, in_a = 0, in_b = 0, pairs = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            in_a += sa;
            in_b += sb;
            pairs += 1;
        }
    const double expected = in_a * in_b / pairs;
    const double max_index = 0.5 * (in_a + in_b);
    return max_index == expected ? 1.0 : (both - expected) / (max_index - expected);
}

}  // namespace

TEST(DefaultK, Examples) {
    EXPECT_EQ(default_k(2), 1u);
    EXPECT_EQ(default_k(52002), 162u);
    EXPECT_EQ(default_k(200), 10u);
    EXPECT_THROW(default_k(1), Error);
}

TEST(DefaultK, MatchesCeilSqrtHalf) {
    for (std::size_t n = 2; n < 200000; n += 37) {
        const auto k = default_k(n);
        EXPECT_GE(2 * k * k, n);
        EXPECT_LT(2 * (k - 1) * (k - 1), n);
    }
}

TEST(KMeans, SingleClusterIsTheMean) {
    Rng rng(1);
    const auto y = gaussian(50, 3, rng);
    const auto a = kmeans(y, 1, 0);
    for (auto l : a.labels) EXPECT_EQ(l, 0u);
    const Eigen::RowVectorXd mean = y.colwise().mean();
    EXPECT_LT((a.centroids.row(0) - mean).norm(), 1e-12);
    const double total = (y.rowwise() - mean).squaredNorm();
    EXPECT_NEAR(a.inertia, total, 1e-9 * total);
}

TEST(KMeans, OneClusterPerPoint) {
    Rng rng(2);
    const auto y = gaussian(12, 2, rng);
    const auto a = kmeans(y, 12, 3);
    EXPECT_EQ(a.inertia, 0.0);
    std::vector<std::size_t> sorted = a.labels;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(KMeans, RecoversThreePlantedBlobs) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto w = gen_blobs(3, 30, 8, 10.0, seed);
        const auto a = kmeans(w.embeddings, 3, seed);
        EXPECT_GE(adjusted_rand_index(a.labels, w.true_labels), 0.99) << "seed " << seed;
    }
}

TEST(KMeans, InertiaHistoryNonIncreasingAndBelowInit) {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto y = gaussian(100 + static_cast<Eigen::Index>(rng.below(200)), 2 + static_cast<Eigen::Index>(rng.below(6)), rng);
        const auto k = 2 + rng.below(15);
        const auto a = kmeans(y, k, rng());
        ASSERT_FALSE(a.inertia_history.empty());
        for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
            EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] * (1 + 1e-12));
        EXPECT_LE(a.inertia, a.init_inertia * (1 + 1e-12));
        EXPECT_NEAR(a.inertia, inertia_of(y, a.labels, a.centroids), 1e-9 * std::max(1.0, a.inertia));
    }
}

TEST(KMeans, EveryClusterNonEmptyOnDuplicates) {
    // Many coincident points force the empty-cluster path.
    RowMatrix y(20, 2);
    for (Eigen::Index i = 0; i < 20; ++i) y.row(i) << (i < 15 ? 0.0 : static_cast<double>(i)), 0.0;
    const auto a = kmeans(y, 6, 4);
    std::vector<std::size_t> sizes(6, 0);
    for (auto l : a.labels) ++sizes[l];
    for (auto s : sizes) EXPECT_GT(s, 0u);
}

TEST(KMeans, DeterministicAndThreadIndependent) {
    Rng rng(5);
    const auto y = gaussian(2000, 4, rng);
    const auto a = kmeans(y, 7, 99, {300, 1e-6, 1, 1});
    const auto b = kmeans(y, 7, 99, {300, 1e-6, 1, 1});
    const auto c = kmeans(y, 7, 99, {300, 1e-6, 1, 4});
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.labels, c.labels);
    EXPECT_EQ(a.inertia, c.inertia);
}

TEST(KMeans, RestartsNeverWorseThanFirstRun) {
    Rng rng(6);
    const auto y = gaussian(300, 3, rng);
    const auto one = kmeans(y, 8, 11);
    const auto many = kmeans(y, 8, 11, {300, 1e-6, 5, 1});
    EXPECT_LE(many.inertia, one.inertia);
}

TEST(KMeans, Errors) {
    Rng rng(7);
    const auto y = gaussian(5, 2, rng);
    EXPECT_THROW(kmeans(y, 0, 0), Error);
    EXPECT_THROW(kmeans(y, 6, 0), Error);
    RowMatrix bad = y;
    bad(2, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(kmeans(bad, 2, 0), Error);
}

TEST(InertiaCheck, ThrowsOnIncrease) {
    EXPECT_NO_THROW(detail::check_non_increasing(10.0, 10.0, 1));
    EXPECT_THROW(detail::check_non_increasing(10.0, 10.001, 1), std::logic_error);
}

TEST(Ari, MatchesPairCountingOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 2 + rng.below(40);
        std::vector<std::size_t> a(n), b(n);
        const auto ka = 1 + rng.below(5), kb = 1 + rng.below(5);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.below(ka);
            b[i] = rng.below(kb);
        }
        EXPECT_NEAR(adjusted_rand_index(a, b), ari_oracle(a, b), 1e-12);
    }
    EXPECT_EQ(adjusted_rand_index({0, 0, 1, 1}, {5, 5, 2, 2}), 1.0);
}

TEST(AssignmentCsv, RoundTripAndValidation) {
    car_test::TempDir dir;
    const std::vector<std::size_t> labels{2, 0, 1, 1, 0};
    save_assignment_csv(labels, dir / "a.csv");
    EXPECT_EQ(load_assignment_csv(dir / "a.csv"), labels);
    EXPECT_EQ(read_file(dir / "a.csv"), "pair_id,cluster_id\n0,2\n1,0\n2,1\n3,1\n4,0\n");
    write_file(dir / "dup.csv", "pair_id,cluster_id\n0,1\n0,2\n");
    EXPECT_THROW(load_assignment_csv(dir / "dup.csv"), Error);
    write_file(dir / "neg.csv", "pair_id,cluster_id\n0,-1\n");
    EXPECT_THROW(load_assignment_csv(dir / "neg.csv"), Error);
    write_file(dir / "hdr.csv", "id,cluster\n0,1\n");
    EXPECT_THROW(load_assignment_csv(dir / "hdr.csv"), Error);
}

TEST(CentroidFile, RoundTrip) {
    car_test::TempDir dir;
    Rng rng(9);
    const auto a = kmeans(gaussian(40, 3, rng), 4, 1);
    save_centroids(a, dir / "c.cen");
    const auto back = load_centroids(dir / "c.cen");
    EXPECT_EQ(back.centroids, a.centroids);
    EXPECT_EQ(back.inertia, a.inertia);
}
