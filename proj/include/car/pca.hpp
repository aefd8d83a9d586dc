#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "car/common.hpp"

namespace car {

/// Principal subspace of a centered matrix.
///
/// `components` holds m orthonormal rows of length d, ordered by decreasing
/// singular value. `variance_ratios` is the per-component share of total
/// variance; it is populated by fit_pca but not persisted.
struct PcaModel {
    Eigen::RowVectorXd mean;
    RowMatrix components;
    double explained_ratio = 0.0;
    std::vector<double> variance_ratios;

    std::size_t d() const { return static_cast<std::size_t>(components.cols()); }
    std::size_t m() const { return static_cast<std::size_t>(components.rows()); }
};

/// Fits PCA by SVD of the column-centered matrix and keeps the shortest
/// prefix of components whose cumulative variance share reaches
/// `variance_target`. Singular values below max(n, d) * eps * sigma_max are
/// treated as exact zeros, so planted low-rank data keeps exactly its rank.
///
/// Each component is sign-normalized so its largest-magnitude entry (first
/// one on ties) is non-negative.
inline PcaModel fit_pca(const RowMatrix& x, double variance_target = 0.95) {
    if (x.rows() < 2) throw data_error("fit_pca: need at least 2 rows, got " + std::to_string(x.rows()));
    if (!(variance_target > 0.0 && variance_target <= 1.0))
        throw std::invalid_argument("fit_pca: variance target must be in (0, 1]");

    PcaModel model;
    model.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - model.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    Eigen::VectorXd sigma = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();

    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double cutoff = static_cast<double>(std::max(x.rows(), x.cols())) *
                          std::numeric_limits<double>::epsilon() * sigma_max;
    Eigen::Index rank = 0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) <= cutoff) sigma(i) = 0.0;
        if (sigma(i) > 0.0) rank = i + 1;
        total += sigma(i) * sigma(i);
    }
    const double scale = x.cwiseAbs().maxCoeff();
    if (!(total > 0.0) || sigma_max <= 16.0 * std::numeric_limits<double>::epsilon() * scale *
                                             std::sqrt(static_cast<double>(x.rows() * x.cols())))
        throw data_error("fit_pca: degenerate: zero variance");

    // The prefix sum is accumulated in the same order as `total`, so the
    // full-rank prefix reaches a ratio of exactly 1.
    double prefix = 0.0;
    Eigen::Index keep = 0;
    while (keep < rank) {
        const double s2 = sigma(keep) * sigma(keep);
        prefix += s2;
        model.variance_ratios.push_back(s2 / total);
        ++keep;
        if (prefix / total >= variance_target) break;
    }
    model.explained_ratio = prefix / total;

    model.components.resize(keep, x.cols());
    for (Eigen::Index c = 0; c < keep; ++c) {
        Eigen::RowVectorXd row = v.col(c).transpose();
        Eigen::Index arg = 0;
        for (Eigen::Index j = 1; j < row.size(); ++j)
            if (std::abs(row(j)) > std::abs(row(arg))) arg = j;
        if (row(arg) < 0.0) row = -row;
        model.components.row(c) = row;
    }
    return model;
}

/// Projects rows onto the retained components: (x - mean) * components^T.
inline RowMatrix pca_transform(const PcaModel& model, const RowMatrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.d())
        throw data_error("pca_transform: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.d()));
    return (x.rowwise() - model.mean) * model.components.transpose();
}

inline RowMatrix pca_reconstruct(const PcaModel& model, const RowMatrix& y) {
    if (static_cast<std::size_t>(y.cols()) != model.m())
        throw data_error("pca_reconstruct: input has " + std::to_string(y.cols()) + " columns, model keeps " +
                         std::to_string(model.m()));
    return (y * model.components).rowwise() + model.mean;
}

inline void save_pca(const PcaModel& model, const std::string& path) {
    std::ostringstream out;
    binio::put_magic(out, "PCA1");
    binio::put_u32(out, static_cast<std::uint32_t>(model.d()));
    binio::put_u32(out, static_cast<std::uint32_t>(model.m()));
    for (Eigen::Index j = 0; j < model.mean.size(); ++j) binio::put_f64(out, model.mean(j));
    binio::put_matrix(out, model.components);
    binio::put_f64(out, model.explained_ratio);
    write_file(path, out.str());
}

inline PcaModel load_pca(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    binio::expect_magic(in, "PCA1");
    const auto d = binio::get_u32(in, "PCA1 dimension");
    const auto m = binio::get_u32(in, "PCA1 retained dimension");
    PcaModel model;
    model.mean.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) model.mean(j) = binio::get_f64(in, "PCA1 mean");
    model.components = binio::get_matrix(in, m, d, "PCA1 components");
    model.explained_ratio = binio::get_f64(in, "PCA1 explained ratio");
    binio::expect_eof(in, "PCA1");
    return model;
}

}  // namespace car
