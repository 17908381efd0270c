#pragma once

// Dataset perturbation protocols for robustness testing.
//
//  * model-based: noise of size eps * std(latent_i) on each latent, decoded
//    through the forest. With residual correction the output is
//    X + (X_hat_eps - X_hat), which is X itself at eps = 0.
//  * raw: correlated Gaussian noise in feature space, scaled per column by
//    budget * std(column).
//  * quantile: uniform noise of half-width budget in empirical-quantile
//    space, mapped back through the interpolated empirical CDF.
//
// Raw and quantile only touch continuous columns. Quantile outputs stay in
// the observed [min, max] of each column; raw and model-based outputs may
// leave it, which truncate() repairs against schema bounds.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "decoder.hpp"
#include "encoder.hpp"
#include "rng.hpp"
#include "sampler.hpp"

namespace tabsynth {

struct ModelBased {
    double epsilon = 0.0;
    bool residual_correction = true;
};
struct Raw {
    double budget = 0.0;
};
struct Quantile {
    double budget = 0.0;
};

using Strategy = std::variant<ModelBased, Raw, Quantile>;

struct PerturbationPlan {
    Strategy strategy = ModelBased{};
    int replicates = 10;
    bool truncate = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (replicates < 1) throw std::invalid_argument("replicate count must be at least 1");
        std::visit(
            [](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ModelBased>) {
                    if (!(s.epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
                } else if constexpr (std::is_same_v<S, Raw>) {
                    if (!(s.budget >= 0.0)) throw std::invalid_argument("raw budget must be non-negative");
                } else {
                    if (!(s.budget >= 0.0 && s.budget <= 1.0)) throw std::invalid_argument("quantile budget must lie in [0, 1]");
                }
            },
            strategy);
    }
};

inline Dataset model_perturb(const Dataset& ds, const EncoderModel& enc, const DecoderForest& forest, double epsilon,
                             bool residual_correction, std::uint64_t seed) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("model_perturb: epsilon must be non-negative");
    require_same_schema(ds.schema(), forest.schema, "model_perturb");
    require_same_schema(enc.schema, forest.schema, "model_perturb (encoder vs forest)");
    if (schema_hash(enc.schema) != forest.schema_hash)
        throw ValidationError("model_perturb: forest was fitted on a different schema than the encoder");

    const Dataset aligned = align_log_scale(ds, enc.schema);
    const auto assignments = enc.assign(aligned.values());
    const Matrix z = encode(enc, aligned, &assignments);
    Matrix z_eps = z;
    if (epsilon > 0.0) {
        Rng rng = make_rng(seed, {0x6d62});
        Vector sd(z.cols());
        for (Eigen::Index d = 0; d < z.cols(); ++d) sd[d] = stddev_of(z.col(d));
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index d = 0; d < z.cols(); ++d) z_eps(i, d) += epsilon * sd[d] * standard_normal(rng);
    }

    Matrix x_hat = decode_model_scale(forest, z, &assignments);
    Matrix x_eps = decode_model_scale(forest, z_eps, &assignments);
    // Bring decoded columns onto the scale `ds` is stored in.
    for (std::size_t j = 0; j < forest.schema.size(); ++j) {
        if (forest.schema[j].log_transformed && !ds.schema()[j].log_transformed) {
            const auto c = static_cast<Eigen::Index>(j);
            x_hat.col(c) = x_hat.col(c).array().expm1().matrix();
            x_eps.col(c) = x_eps.col(c).array().expm1().matrix();
        }
    }

    Matrix out = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const bool discrete = ds.column(j).kind.is_discrete();
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (discrete) {
                if (x_eps(i, j) != x_hat(i, j)) out(i, j) = x_eps(i, j);
            } else if (residual_correction) {
                out(i, j) = ds(i, j) + (x_eps(i, j) - x_hat(i, j));
            } else {
                out(i, j) = x_eps(i, j);
            }
        }
    }
    return ds.with_values(std::move(out));
}

namespace detail {

inline std::vector<Eigen::Index> continuous_columns(const Dataset& ds) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < ds.cols(); ++j)
        if (!ds.column(j).kind.is_discrete()) out.push_back(j);
    return out;
}

// Pearson correlation of the columns of x; constant columns correlate 0 with
// everything else and 1 with themselves.
inline Matrix pearson(const Matrix& x) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Vector norms = centered.colwise().norm().transpose();
    Matrix r = Matrix::Identity(x.cols(), x.cols());
    for (Eigen::Index a = 0; a < x.cols(); ++a)
        for (Eigen::Index b = a + 1; b < x.cols(); ++b) {
            const double denom = norms[a] * norms[b];
            const double v = denom > 0.0 ? std::clamp(centered.col(a).dot(centered.col(b)) / denom, -1.0, 1.0) : 0.0;
            r(a, b) = r(b, a) = v;
        }
    return r;
}

} // namespace detail

// Symmetric square root of a correlation matrix with eigenvalues floored.
inline Matrix correlation_sqrt(const Matrix& r, double floor = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(r);
    const Vector vals = eig.eigenvalues().cwiseMax(floor).cwiseSqrt();
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

inline Dataset raw_perturb(const Dataset& ds, double budget, std::uint64_t seed) {
    if (!(budget >= 0.0)) throw std::invalid_argument("raw_perturb: budget must be non-negative");
    if (ds.rows() < 2) throw ValidationError("raw_perturb: need at least 2 rows");
    const auto cols = detail::continuous_columns(ds);
    if (budget == 0.0 || cols.empty()) return ds;
    const auto m = static_cast<Eigen::Index>(cols.size());
    Matrix xc(ds.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k) xc.col(k) = ds.values().col(cols[static_cast<std::size_t>(k)]);
    const Matrix root = correlation_sqrt(detail::pearson(xc));
    Vector scale(m);
    for (Eigen::Index k = 0; k < m; ++k) scale[k] = budget * stddev_of(xc.col(k));

    Rng rng = make_rng(seed, {0x7261});
    Matrix white(ds.rows(), m);
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        for (Eigen::Index k = 0; k < m; ++k) white(i, k) = standard_normal(rng);
    const Matrix noise = white * root; // rows ~ N(0, R) since root is symmetric
    Matrix out = ds.values();
    for (Eigen::Index k = 0; k < m; ++k) out.col(cols[static_cast<std::size_t>(k)]) += scale[k] * noise.col(k);
    return ds.with_values(std::move(out));
}

inline Dataset quantile_perturb(const Dataset& ds, double budget, std::uint64_t seed) {
    if (!(budget >= 0.0 && budget <= 1.0)) throw std::invalid_argument("quantile_perturb: budget must lie in [0, 1]");
    if (budget == 0.0) return ds;
    Matrix out = ds.values();
    Rng rng = make_rng(seed, {0x7175});
    std::uniform_real_distribution<double> shift(-budget, budget);
    for (Eigen::Index j : detail::continuous_columns(ds)) {
        if (ds.rows() < 2) break;
        const Vector col = ds.values().col(j);
        const EmpiricalMarginal ecdf(std::vector<double>(col.data(), col.data() + col.size()));
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            const double u = std::clamp(ecdf.to_uniform(col[i]) + shift(rng), 0.0, 1.0);
            out(i, j) = ecdf.from_uniform(u);
        }
    }
    return ds.with_values(std::move(out));
}

// Clamps continuous columns to their schema bounds. Bounds are on the
// original scale; for log-scale columns they are mapped through log1p.
inline Dataset truncate(const Dataset& ds) {
    Matrix out = ds.values();
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        const auto& c = ds.column(j);
        if (c.kind.is_discrete()) continue;
        auto lo = c.lower_bound, hi = c.upper_bound;
        if (c.log_transformed) {
            if (lo) lo = *lo > -1.0 ? std::log1p(*lo) : -std::numeric_limits<double>::infinity();
            if (hi) hi = *hi > -1.0 ? std::log1p(*hi) : -std::numeric_limits<double>::infinity();
        }
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            if (lo && out(i, j) < *lo) out(i, j) = *lo;
            if (hi && out(i, j) > *hi) out(i, j) = *hi;
        }
    }
    return ds.with_values(std::move(out));
}

// Generator for one perturbed replicate: (data, budget, seed) -> data.
using PerturbFn = std::function<Dataset(const Dataset&, double, std::uint64_t)>;

struct SweepItem {
    double budget = 0.0;
    int replicate = 0;
    std::uint64_t seed = 0;
    Dataset data;
};

inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t budget_index, int replicate) {
    return derive_seed(master, {static_cast<std::uint64_t>(budget_index), static_cast<std::uint64_t>(replicate)});
}

// Calls `sink` for every (budget, replicate) in grid order without holding
// more than one perturbed dataset at a time.
inline void for_each_replicate(const Dataset& ds, const std::vector<double>& budgets, int replicates,
                               std::uint64_t master_seed, const PerturbFn& generate, bool apply_truncation,
                               const std::function<void(const SweepItem&)>& sink) {
    if (replicates < 1) throw std::invalid_argument("replicate count must be at least 1");
    for (std::size_t b = 0; b < budgets.size(); ++b)
        for (int r = 0; r < replicates; ++r) {
            SweepItem item{budgets[b], r, replicate_seed(master_seed, b, r), {}};
            item.data = generate(ds, budgets[b], item.seed);
            if (apply_truncation) item.data = truncate(item.data);
            sink(item);
        }
}

inline std::vector<SweepItem> replicate_sweep(const Dataset& ds, const std::vector<double>& budgets, int replicates,
                                              std::uint64_t master_seed, const PerturbFn& generate,
                                              bool apply_truncation = false) {
    std::vector<SweepItem> out;
    for_each_replicate(ds, budgets, replicates, master_seed, generate, apply_truncation,
                       [&](const SweepItem& item) { out.push_back(item); });
    return out;
}

inline PerturbFn raw_generator() {
    return [](const Dataset& ds, double budget, std::uint64_t seed) { return raw_perturb(ds, budget, seed); };
}

inline PerturbFn quantile_generator() {
    return [](const Dataset& ds, double budget, std::uint64_t seed) { return quantile_perturb(ds, budget, seed); };
}

inline PerturbFn model_generator(const EncoderModel& enc, const DecoderForest& forest, bool residual_correction = true) {
    return [&enc, &forest, residual_correction](const Dataset& ds, double eps, std::uint64_t seed) {
        return model_perturb(ds, enc, forest, eps, residual_correction, seed);
    };
}

// Applies one plan to `ds`: replicate r uses replicate_seed(plan.seed, 0, r).
inline std::vector<Dataset> perturb(const Dataset& ds, const PerturbationPlan& plan, const EncoderModel* enc = nullptr,
                                    const DecoderForest* forest = nullptr) {
    plan.validate();
    PerturbFn gen;
    double budget = 0.0;
    if (const auto* m = std::get_if<ModelBased>(&plan.strategy)) {
        if (!enc || !forest) throw std::invalid_argument("model-based perturbation needs a fitted encoder and forest");
        gen = model_generator(*enc, *forest, m->residual_correction);
        budget = m->epsilon;
    } else if (const auto* r = std::get_if<Raw>(&plan.strategy)) {
        gen = raw_generator();
        budget = r->budget;
    } else {
        gen = quantile_generator();
        budget = std::get<Quantile>(plan.strategy).budget;
    }
    std::vector<Dataset> out;
    for (auto& item : replicate_sweep(ds, {budget}, plan.replicates, plan.seed, gen, plan.truncate))
        out.push_back(std::move(item.data));
    return out;
}

} // namespace tabsynth
