#pragma once

// Sample moments and cumulants, kurtosis-contrast ICA by fixed-point
// iteration with deflation, and sampling of latents through independent
// component marginals.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace tabsynth {

struct CumulantSet {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0, k5 = 0.0, k6 = 0.0;
};

inline CumulantSet cumulants(const Eigen::Ref<const Vector>& x) {
    if (x.size() < 2) throw ValidationError("cumulants: need at least 2 values");
    const double n = static_cast<double>(x.size());
    const double mean = x.mean();
    double m[7] = {};
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double d = x[i] - mean;
        double p = d * d;
        for (int k = 2; k <= 6; ++k, p *= d) m[k] += p;
    }
    for (int k = 2; k <= 6; ++k) m[k] /= n;
    CumulantSet c;
    c.k1 = mean;
    c.k2 = m[2];
    c.k3 = m[3];
    c.k4 = m[4] - 3.0 * m[2] * m[2];
    c.k5 = m[5] - 10.0 * m[3] * m[2];
    c.k6 = m[6] - 15.0 * m[4] * m[2] - 10.0 * m[3] * m[3] + 30.0 * m[2] * m[2] * m[2];
    return c;
}

inline CumulantSet cumulants(const std::vector<double>& x) {
    return cumulants(Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())));
}

struct IcaModel {
    Vector mean;
    Matrix whitening;   // z_white = whitening * (z - mean)
    Matrix dewhitening; // inverse of whitening
    Matrix unmixing;    // rows: unit components in whitened space
    Matrix mixing;      // z = mean + mixing * s
    Vector kurtosis;    // kappa_4 of each recovered component (unit variance)
    int iterations = 0;
    std::vector<std::string> warnings;

    // Independent components, one row per input row.
    Matrix sources(const Matrix& z) const {
        return ((z.rowwise() - mean.transpose()) * whitening.transpose()) * unmixing.transpose();
    }
};

struct IcaOptions {
    int max_iterations = 500;
    double tolerance = 1e-8;
    int restarts = 3;
    double gaussian_warning = 0.05;
    int stall_window = 100;
    double min_step = 0.1;
};

namespace detail {

// Eigen-decomposition of the population covariance.
inline void whiten(const Matrix& zc, Matrix& w, Matrix& dw) {
    const double n = static_cast<double>(zc.rows());
    const Matrix cov = (zc.transpose() * zc) / n;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("ica: covariance eigen-decomposition failed");
    const Vector ev = es.eigenvalues();
    if (!(ev.minCoeff() > 1e-12 * std::max(ev.maxCoeff(), 1e-300)))
        throw NumericError("ica: latent covariance is singular");
    const Matrix& e = es.eigenvectors();
    w = ev.cwiseSqrt().cwiseInverse().asDiagonal() * e.transpose();
    dw = e * ev.cwiseSqrt().asDiagonal();
}

} // namespace detail

inline IcaModel fit_ica(const Matrix& z, std::uint64_t seed, const IcaOptions& opt = {}) {
    const auto l = z.cols();
    if (l < 2) throw ValidationError("fit_ica: need at least 2 columns");
    if (z.rows() < 10 * l) throw ValidationError("fit_ica: need at least 10 rows per column");
    if (!z.allFinite()) throw ValidationError("fit_ica: non-finite input");

    IcaModel m;
    m.mean = z.colwise().mean().transpose();
    const Matrix zc = z.rowwise() - m.mean.transpose();
    detail::whiten(zc, m.whitening, m.dewhitening);
    const Matrix y = zc * m.whitening.transpose(); // n x l, identity covariance
    const double n = static_cast<double>(y.rows());

    m.unmixing = Matrix::Zero(l, l);
    for (Eigen::Index comp = 0; comp < l; ++comp) {
        bool converged = false;
        for (int attempt = 0; attempt <= opt.restarts && !converged; ++attempt) {
            Rng rng = make_rng(seed, {static_cast<std::uint64_t>(comp), static_cast<std::uint64_t>(attempt)});
            Vector w(l);
            for (Eigen::Index d = 0; d < l; ++d) w[d] = standard_normal(rng);
            auto deflate = [&](Vector& v) {
                for (Eigen::Index k = 0; k < comp; ++k) v -= v.dot(m.unmixing.row(k).transpose()) * m.unmixing.row(k).transpose();
                const double nv = v.norm();
                if (!(nv > 0.0)) return false;
                v /= nv;
                return true;
            };
            if (!deflate(w)) continue;
            // Plain fixed-point steps first; if they stall (finite-sample
            // cycling), switch to the damped Newton form with halving step.
            double mu = 1.0;
            for (int it = 0; it < opt.max_iterations; ++it) {
                if (it > 0 && it % opt.stall_window == 0 && mu > opt.min_step) mu *= 0.5;
                const Vector proj = y * w;
                const Vector g = (y.transpose() * proj.array().cube().matrix()) / n;
                Vector next;
                if (mu == 1.0) {
                    next = g - 3.0 * w;
                } else {
                    const double beta = proj.array().pow(4).mean();
                    next = w - mu * (g - beta * w) / (3.0 - beta);
                }
                if (!deflate(next)) break;
                const double change = std::abs(std::abs(next.dot(w)) - 1.0);
                w = next;
                ++m.iterations;
                if (change < opt.tolerance) {
                    converged = true;
                    break;
                }
            }
            if (converged) m.unmixing.row(comp) = w.transpose();
        }
        if (!converged)
            throw NumericError("fit_ica: component " + std::to_string(comp) + " did not converge after " +
                               std::to_string(opt.restarts) + " restarts");
    }
    m.mixing = m.dewhitening * m.unmixing.transpose();

    const Matrix s = y * m.unmixing.transpose();
    m.kurtosis.resize(l);
    for (Eigen::Index k = 0; k < l; ++k) {
        m.kurtosis[k] = cumulants(s.col(k)).k4;
        if (std::abs(m.kurtosis[k]) < opt.gaussian_warning)
            m.warnings.push_back("component " + std::to_string(k) + " is near-Gaussian (|kappa4| = " +
                                 std::to_string(std::abs(m.kurtosis[k])) + "); its direction is not identifiable");
    }
    for (Eigen::Index a = 0; a < l; ++a)
        for (Eigen::Index b = a + 1; b < l; ++b)
            if (std::abs(m.kurtosis[a] - m.kurtosis[b]) < opt.gaussian_warning)
                m.warnings.push_back("components " + std::to_string(a) + " and " + std::to_string(b) +
                                     " have nearly equal kurtosis; their order is ambiguous");
    return m;
}

inline std::vector<EmpiricalMarginal> fit_source_marginals(const IcaModel& model, const Matrix& z) {
    const Matrix s = model.sources(z);
    std::vector<EmpiricalMarginal> out;
    for (Eigen::Index k = 0; k < s.cols(); ++k) out.emplace_back(std::vector<double>(s.col(k).data(), s.col(k).data() + s.rows()));
    return out;
}

// Independent inverse-transform draws per component, mixed back into latent
// space.
inline Matrix ica_sample(const IcaModel& model, const std::vector<EmpiricalMarginal>& marginals, Eigen::Index count,
                         std::uint64_t seed) {
    const auto l = model.mixing.cols();
    if (static_cast<Eigen::Index>(marginals.size()) != l)
        throw ValidationError("ica_sample: expected " + std::to_string(l) + " marginals, got " +
                              std::to_string(marginals.size()));
    if (count < 1) throw std::invalid_argument("ica_sample: count must be at least 1");
    Matrix s(count, l);
    for (Eigen::Index k = 0; k < l; ++k) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(k)});
        for (Eigen::Index i = 0; i < count; ++i) s(i, k) = marginals[static_cast<std::size_t>(k)].from_uniform(uniform01(rng));
    }
    return (s * model.mixing.transpose()).rowwise() + model.mean.transpose();
}

// Per-cluster ICA on the training latents, then independent component
// sampling. Cluster sizes follow the same multinomial split as
// sample_latents.
inline LatentDraw ica_sample_latents(const Matrix& z, const std::vector<int>& assignments,
                                     const std::vector<double>& weights, Eigen::Index count, std::uint64_t seed,
                                     std::vector<std::string>* warnings = nullptr) {
    if (static_cast<Eigen::Index>(assignments.size()) != z.rows())
        throw ValidationError("ica_sample_latents: assignment count does not match latent rows");
    if (count < 1) throw std::invalid_argument("sample count must be at least 1");
    Rng alloc_rng = make_rng(seed, {0});
    const auto counts = allocate_counts(weights, count, alloc_rng);
    LatentDraw out;
    out.z.resize(count, z.cols());
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        std::vector<Eigen::Index> members;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == static_cast<int>(c)) members.push_back(static_cast<Eigen::Index>(i));
        Matrix zc(static_cast<Eigen::Index>(members.size()), z.cols());
        for (std::size_t r = 0; r < members.size(); ++r) zc.row(static_cast<Eigen::Index>(r)) = z.row(members[r]);
        const auto model = fit_ica(zc, derive_seed(seed, {2, static_cast<std::uint64_t>(c)}));
        if (warnings)
            for (const auto& w : model.warnings) warnings->push_back("cluster " + std::to_string(c) + ": " + w);
        out.z.middleRows(row, counts[c]) =
            ica_sample(model, fit_source_marginals(model, zc), counts[c], derive_seed(seed, {1, static_cast<std::uint64_t>(c)}));
        out.assignments.insert(out.assignments.end(), static_cast<std::size_t>(counts[c]), static_cast<int>(c));
        row += counts[c];
    }
    return out;
}

} // namespace tabsynth
