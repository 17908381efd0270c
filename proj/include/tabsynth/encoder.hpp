#pragma once

// Linear encoder: per-cluster z-score standardization (or centering only)
// followed by a PCA or l1-sparse PCA projection onto `latent_dim` loadings.
//
// Encoding is a pure projection, z = ((x - means) / scales) W. Directions
// dropped by the projection cannot be recovered downstream: two rows that
// differ only orthogonally to span(W) encode to the same latent vector.

#include <Eigen/SVD>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "kmeans.hpp"
#include "parallel.hpp"

namespace tabsynth {

struct SubspaceModel {
    Vector means;    // p
    Vector scales;   // p, strictly positive
    Matrix loadings; // p x l
    Vector explained_variance_ratio; // l
    std::vector<std::string> warnings;

    Matrix standardize(const Matrix& x) const {
        return (x.rowwise() - means.transpose()).array().rowwise() / scales.transpose().array();
    }
    Matrix unstandardize(const Matrix& xs) const {
        return (xs.array().rowwise() * scales.transpose().array()).matrix().rowwise() + means.transpose();
    }
    Matrix project(const Matrix& x) const { return standardize(x) * loadings; }
};

struct EncoderModel {
    Schema schema;          // columns (with log flags) the encoder was fitted on
    int latent_dim = 1;
    double sparsity = 0.0;
    // Frame in which cluster centroids live: global z-scores of the input.
    Vector cluster_means;
    Vector cluster_scales;
    Matrix centroids;       // k x p
    std::vector<SubspaceModel> clusters;

    int k() const { return static_cast<int>(clusters.size()); }

    std::vector<int> assign(const Matrix& x) const {
        if (k() == 1) return std::vector<int>(static_cast<std::size_t>(x.rows()), 0);
        const Matrix xs = (x.rowwise() - cluster_means.transpose()).array().rowwise() / cluster_scales.transpose().array();
        return assign_nearest(centroids, xs);
    }
};

struct EncoderConfig {
    int latent_dim = 10;
    double sparsity = 0.0;
    int clusters = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    // z-score columns before projecting; false centers only, which keeps
    // the geometry of same-unit data (point clouds) intact
    bool standardize = true;
};

namespace detail {

inline void column_moments(const Matrix& x, Vector& means, Vector& scales, std::vector<std::string>* warnings,
                           const Schema* schema, bool standardize = true) {
    means = x.colwise().mean().transpose();
    scales.resize(x.cols());
    if (!standardize) {
        scales.setOnes();
        return;
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double s = std::sqrt((x.col(j).array() - means[j]).square().sum() / static_cast<double>(x.rows()));
        if (s > 1e-12 * std::max(1.0, std::abs(means[j]))) {
            scales[j] = s;
        } else {
            scales[j] = 1.0;
            if (warnings) {
                const std::string name = schema ? (*schema)[static_cast<std::size_t>(j)].name : std::to_string(j);
                warnings->push_back("column '" + name + "' is constant; scale set to 1");
            }
        }
    }
}

// Largest-magnitude entry of each column made positive.
inline void fix_signs(Matrix& w) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
        Eigen::Index arg = 0;
        w.col(c).cwiseAbs().maxCoeff(&arg);
        if (w(arg, c) < 0.0) w.col(c) = -w.col(c);
    }
}

inline void zero_constant_rows(Matrix& w, const Matrix& xs) {
    for (Eigen::Index j = 0; j < xs.cols(); ++j)
        if (xs.col(j).squaredNorm() == 0.0) w.row(j).setZero();
}

inline Vector explained_ratio(const Matrix& xs, const Matrix& w) {
    const double total = xs.squaredNorm();
    Vector r(w.cols());
    for (Eigen::Index c = 0; c < w.cols(); ++c) r[c] = total > 0.0 ? (xs * w.col(c)).squaredNorm() / total : 0.0;
    return r;
}

inline void check_fit_args(Eigen::Index n, Eigen::Index p, int l) {
    if (n < 2) throw std::invalid_argument("encoder fit needs at least 2 rows");
    if (l < 1 || l > p)
        throw std::invalid_argument("latent dimension " + std::to_string(l) + " outside [1, " + std::to_string(p) + "]");
}

// Least-squares codes for fixed loadings: Z = X W (W^T W)^+.
inline Matrix least_squares_codes(const Matrix& xs, const Matrix& w) {
    const Matrix gram = w.transpose() * w;
    return (xs * w) * gram.completeOrthogonalDecomposition().pseudoInverse();
}

} // namespace detail

inline SubspaceModel fit_pca_subspace(const Matrix& x, int l, const Schema* schema = nullptr, bool standardize = true) {
    detail::check_fit_args(x.rows(), x.cols(), l);
    SubspaceModel m;
    detail::column_moments(x, m.means, m.scales, &m.warnings, schema, standardize);
    const Matrix xs = m.standardize(x);
    Eigen::BDCSVD<Matrix> svd(xs, Eigen::ComputeThinV);
    m.loadings = svd.matrixV().leftCols(l);
    detail::zero_constant_rows(m.loadings, xs);
    // Rows zeroed above belong to all-zero columns, which the SVD already
    // leaves (numerically) out of every singular vector.
    detail::fix_signs(m.loadings);
    m.explained_variance_ratio = detail::explained_ratio(xs, m.loadings);
    return m;
}

// Objective ||Xs - Z W^T||_F^2 + alpha * ||W||_1 with Z the least-squares
// codes for W.
inline double sparse_pca_objective(const Matrix& xs, const Matrix& w, double alpha) {
    const Matrix z = detail::least_squares_codes(xs, w);
    return (xs - z * w.transpose()).squaredNorm() + alpha * w.cwiseAbs().sum();
}

struct SparsePcaOptions {
    int max_iterations = 250;
    double tolerance = 1e-7;   // on objective improvement
    int lasso_sweeps = 200;
    double lasso_tolerance = 1e-12;
    bool standardize = true;
};

// Alternating minimization of ||Xs - Z W^T||^2 + alpha ||W||_1: least-squares
// codes, then a lasso per loading row by coordinate descent, then unit-norm
// columns. Starts from the PCA loadings, which are a fixed point at alpha = 0.
inline SubspaceModel fit_sparse_pca_subspace(const Matrix& x, int l, double alpha, std::uint64_t /*seed*/,
                                             const Schema* schema = nullptr, const SparsePcaOptions& opt = {},
                                             int* iterations_out = nullptr) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("sparsity weight must be non-negative");
    SubspaceModel m = fit_pca_subspace(x, l, schema, opt.standardize);
    if (alpha == 0.0) {
        if (iterations_out) *iterations_out = 0;
        return m;
    }
    const Matrix xs = m.standardize(x);
    const Eigen::Index p = xs.cols();
    Matrix w = m.loadings;
    double previous = sparse_pca_objective(xs, w, alpha);
    int it = 0;
    for (it = 1; it <= opt.max_iterations; ++it) {
        const Matrix z = detail::least_squares_codes(xs, w);
        const Matrix gram = z.transpose() * z;
        const Matrix corr = xs.transpose() * z; // p x l, row j = Z^T x_j
        Matrix next = w;
        for (Eigen::Index j = 0; j < p; ++j) {
            Eigen::RowVectorXd row = next.row(j);
            for (int sweep = 0; sweep < opt.lasso_sweeps; ++sweep) {
                double change = 0.0;
                for (Eigen::Index c = 0; c < l; ++c) {
                    if (gram(c, c) <= 0.0) {
                        row[c] = 0.0;
                        continue;
                    }
                    const double partial = corr(j, c) - gram.row(c).dot(row) + gram(c, c) * row[c];
                    const double shrunk = std::copysign(std::max(std::abs(partial) - alpha / 2.0, 0.0), partial);
                    const double updated = shrunk / gram(c, c);
                    change = std::max(change, std::abs(updated - row[c]));
                    row[c] = updated;
                }
                if (change < opt.lasso_tolerance) break;
            }
            next.row(j) = row;
        }
        for (Eigen::Index c = 0; c < l; ++c) {
            const double norm = next.col(c).norm();
            if (norm > 0.0) {
                next.col(c) /= norm;
            } else {
                // Fully thresholded: keep the single strongest coordinate.
                Eigen::Index arg = 0;
                corr.col(c).cwiseAbs().maxCoeff(&arg);
                next.col(c).setZero();
                next(arg, c) = corr(arg, c) < 0.0 ? -1.0 : 1.0;
            }
        }
        detail::zero_constant_rows(next, xs);
        const double objective = sparse_pca_objective(xs, next, alpha);
        const double improvement = previous - objective;
        if (improvement < 0.0) break; // keep the better iterate
        w = std::move(next);
        previous = objective;
        if (improvement < opt.tolerance) break;
    }
    if (iterations_out) *iterations_out = std::min(it, opt.max_iterations);
    detail::fix_signs(w);
    m.loadings = w;
    m.explained_variance_ratio = detail::explained_ratio(xs, w);
    return m;
}

namespace detail {

inline EncoderModel single_cluster_encoder(const Dataset& ds, SubspaceModel sub, int l, double alpha) {
    EncoderModel e;
    e.schema = ds.schema();
    e.latent_dim = l;
    e.sparsity = alpha;
    e.cluster_means = sub.means;
    e.cluster_scales = sub.scales;
    e.centroids = Matrix::Zero(1, ds.cols());
    e.clusters.push_back(std::move(sub));
    return e;
}

} // namespace detail

inline EncoderModel fit_pca(const Dataset& ds, int l, bool standardize = true) {
    return detail::single_cluster_encoder(ds, fit_pca_subspace(ds.values(), l, &ds.schema(), standardize), l, 0.0);
}

inline EncoderModel fit_sparse_pca(const Dataset& ds, int l, double alpha, std::uint64_t seed, bool standardize = true) {
    SparsePcaOptions opt;
    opt.standardize = standardize;
    return detail::single_cluster_encoder(ds, fit_sparse_pca_subspace(ds.values(), l, alpha, seed, &ds.schema(), opt),
                                          l, alpha);
}

struct EncoderFit {
    EncoderModel encoder;
    ClusterModel clusters;
};

// Clustering on globally standardized data, then one (sparse) PCA per
// cluster. With clusters == 1 this is fit_sparse_pca with a trivial cluster
// model.
inline EncoderFit fit_encoder(const Dataset& ds, const EncoderConfig& cfg) {
    detail::check_fit_args(ds.rows(), ds.cols(), cfg.latent_dim);
    if (cfg.clusters < 1) throw std::invalid_argument("cluster count must be at least 1");
    EncoderFit out;
    auto& e = out.encoder;
    e.schema = ds.schema();
    e.latent_dim = cfg.latent_dim;
    e.sparsity = cfg.sparsity;
    detail::column_moments(ds.values(), e.cluster_means, e.cluster_scales, nullptr, nullptr);

    if (cfg.clusters == 1) {
        out.clusters.k = 1;
        out.clusters.centroids = Matrix::Zero(1, ds.cols());
        out.clusters.assignments.assign(static_cast<std::size_t>(ds.rows()), 0);
    } else {
        const Matrix xs =
            (ds.values().rowwise() - e.cluster_means.transpose()).array().rowwise() / e.cluster_scales.transpose().array();
        out.clusters = kmeans(xs, cfg.clusters, cfg.seed);
    }
    e.centroids = out.clusters.centroids;

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(out.clusters.k));
    for (std::size_t i = 0; i < out.clusters.assignments.size(); ++i)
        members[static_cast<std::size_t>(out.clusters.assignments[i])].push_back(static_cast<Eigen::Index>(i));
    for (std::size_t c = 0; c < members.size(); ++c)
        if (members[c].size() < 2)
            throw ValidationError("cluster " + std::to_string(c) + " has fewer than 2 rows; reduce the cluster count");

    e.clusters.resize(members.size());
    SparsePcaOptions opt;
    opt.standardize = cfg.standardize;
    parallel_for(members.size(), cfg.threads, [&](std::size_t c) {
        const Matrix xc = ds.select_rows(members[c]).values();
        e.clusters[c] = fit_sparse_pca_subspace(xc, cfg.latent_dim, cfg.sparsity,
                                                derive_seed(cfg.seed, {static_cast<std::uint64_t>(c)}), &ds.schema(), opt);
    });
    return out;
}

// Latent codes for every row. Cluster membership comes from `clusters` when
// given (training rows), otherwise from the nearest fitted centroid.
inline Matrix encode(const EncoderModel& model, const Dataset& ds, const std::vector<int>* assignments = nullptr) {
    require_same_schema(ds.schema(), model.schema, "encode");
    const Dataset aligned = align_log_scale(ds, model.schema);
    const Matrix& x = aligned.values();
    const std::vector<int> own = assignments ? std::vector<int>{} : model.assign(x);
    const auto& which = assignments ? *assignments : own;
    if (static_cast<Eigen::Index>(which.size()) != x.rows())
        throw ValidationError("encode: assignment count does not match row count");
    Matrix z(x.rows(), model.latent_dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto& sub = model.clusters.at(static_cast<std::size_t>(which[static_cast<std::size_t>(i)]));
        const Eigen::RowVectorXd xs = (x.row(i) - sub.means.transpose()).array() / sub.scales.transpose().array();
        z.row(i) = xs * sub.loadings;
    }
    return z;
}

inline Matrix encode(const EncoderModel& model, const Dataset& ds, const ClusterModel& clusters) {
    return encode(model, ds, &clusters.assignments);
}

} // namespace tabsynth
