#pragma once

// Decoder forest: for every cluster, one boosted model per original column
// mapping latent codes back to that column. Continuous columns are regressed
// on their cluster-standardized values (modeling scale, i.e. after any log
// transform); binary columns use a logistic model; categorical columns use
// one logistic model per class and decode to the arg-max class.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "boosting.hpp"
#include "dataset.hpp"
#include "encoder.hpp"
#include "parallel.hpp"

namespace tabsynth {

struct ColumnDecoder {
    ColumnKind kind;
    std::vector<BoostedModel> models; // 1 for continuous/binary, `levels` for categorical
};

struct ClusterDecoder {
    Vector means;  // standardization of continuous targets (modeling scale)
    Vector scales;
    std::vector<ColumnDecoder> columns;
};

struct DecoderForest {
    Schema schema; // modeling-scale schema (log flags as fitted)
    std::uint64_t schema_hash = 0;
    int latent_dim = 0;
    BoostConfig config;
    std::vector<ClusterDecoder> clusters;

    // Schema of decoded output: original scale, log flags cleared.
    Schema output_schema() const {
        Schema s = schema;
        for (auto& c : s) c.log_transformed = false;
        return s;
    }
};

struct DecoderConfig {
    int max_depth = 2;
    int rounds = 200;
    double learning_rate = 0.1;
    double lambda = 1.0;
    double gamma = 0.0;
    unsigned threads = 1;

    BoostConfig boost(Loss loss) const { return {loss, max_depth, rounds, learning_rate, lambda, gamma}; }
};

inline DecoderForest fit_decoder_forest(const Matrix& z, const Dataset& ds, const EncoderModel& encoder,
                                        const std::vector<int>& assignments, const DecoderConfig& cfg) {
    if (z.rows() != ds.rows()) throw ValidationError("fit_decoder_forest: latent rows do not match data rows");
    if (z.cols() != encoder.latent_dim) throw ValidationError("fit_decoder_forest: latent width does not match encoder");
    if (static_cast<Eigen::Index>(assignments.size()) != ds.rows())
        throw ValidationError("fit_decoder_forest: assignment count does not match data rows");
    require_same_schema(ds.schema(), encoder.schema, "fit_decoder_forest");
    const Dataset aligned = align_log_scale(ds, encoder.schema);

    DecoderForest f;
    f.schema = encoder.schema;
    f.schema_hash = schema_hash(f.schema);
    f.latent_dim = encoder.latent_dim;
    f.config = cfg.boost(Loss::SquaredError);
    f.clusters.resize(encoder.clusters.size());

    std::vector<std::vector<Eigen::Index>> members(encoder.clusters.size());
    for (std::size_t i = 0; i < assignments.size(); ++i)
        members.at(static_cast<std::size_t>(assignments[i])).push_back(static_cast<Eigen::Index>(i));

    // Flattened (cluster, column) jobs so columns fit concurrently.
    struct Job {
        std::size_t cluster;
        Eigen::Index column;
    };
    std::vector<Job> jobs;
    std::vector<Matrix> zc(members.size());
    std::vector<Matrix> xc(members.size());
    const auto p = ds.cols();
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].empty()) throw ValidationError("fit_decoder_forest: cluster " + std::to_string(c) + " is empty");
        zc[c].resize(static_cast<Eigen::Index>(members[c].size()), z.cols());
        for (std::size_t r = 0; r < members[c].size(); ++r) zc[c].row(static_cast<Eigen::Index>(r)) = z.row(members[c][r]);
        xc[c] = aligned.select_rows(members[c]).values();
        auto& cd = f.clusters[c];
        cd.means = encoder.clusters[c].means;
        cd.scales = encoder.clusters[c].scales;
        cd.columns.resize(static_cast<std::size_t>(p));
        for (Eigen::Index j = 0; j < p; ++j) jobs.push_back({c, j});
    }

    parallel_for(jobs.size(), cfg.threads, [&](std::size_t k) {
        const auto [c, j] = jobs[k];
        const auto& kind = f.schema[static_cast<std::size_t>(j)].kind;
        auto& col = f.clusters[c].columns[static_cast<std::size_t>(j)];
        col.kind = kind;
        const Vector target = xc[c].col(j);
        switch (kind.tag) {
        case Kind::Continuous: {
            const Vector ys = (target.array() - f.clusters[c].means[j]) / f.clusters[c].scales[j];
            col.models.push_back(fit_boosted(zc[c], ys, cfg.boost(Loss::SquaredError)));
            break;
        }
        case Kind::Binary:
            col.models.push_back(fit_boosted(zc[c], target, cfg.boost(Loss::Logistic)));
            break;
        case Kind::Categorical:
            for (int level = 0; level < kind.cardinality; ++level) {
                const Vector y = (target.array() == static_cast<double>(level)).cast<double>();
                col.models.push_back(fit_boosted(zc[c], y, cfg.boost(Loss::Logistic)));
            }
            break;
        }
    });
    return f;
}

namespace detail {

inline void check_latents(const DecoderForest& f, const Matrix& z, const std::vector<int>* assignments) {
    if (z.cols() != f.latent_dim)
        throw ValidationError("decode: expected " + std::to_string(f.latent_dim) + " latent columns, got " +
                              std::to_string(z.cols()));
    if (assignments && static_cast<Eigen::Index>(assignments->size()) != z.rows())
        throw ValidationError("decode: assignment count does not match latent rows");
    if (!assignments && f.clusters.size() != 1)
        throw ValidationError("decode: cluster assignments are required for a multi-cluster forest");
}

} // namespace detail

// Decoded values on the modeling scale (log-transformed columns stay in log
// space); discrete columns hold class codes.
inline Matrix decode_model_scale(const DecoderForest& f, const Matrix& z, const std::vector<int>* assignments = nullptr) {
    detail::check_latents(f, z, assignments);
    const auto p = static_cast<Eigen::Index>(f.schema.size());
    Matrix out(z.rows(), p);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const auto c = assignments ? static_cast<std::size_t>((*assignments)[static_cast<std::size_t>(i)]) : 0;
        const auto& cd = f.clusters.at(c);
        const auto row = z.row(i);
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& col = cd.columns[static_cast<std::size_t>(j)];
            switch (col.kind.tag) {
            case Kind::Continuous:
                out(i, j) = col.models[0].raw_score(row) * cd.scales[j] + cd.means[j];
                break;
            case Kind::Binary:
                out(i, j) = col.models[0].raw_score(row) >= 0.0 ? 1.0 : 0.0; // sigmoid >= 0.5
                break;
            case Kind::Categorical: {
                int best = 0;
                double best_score = col.models[0].raw_score(row);
                for (std::size_t level = 1; level < col.models.size(); ++level) {
                    const double s = col.models[level].raw_score(row);
                    if (s > best_score) {
                        best_score = s;
                        best = static_cast<int>(level);
                    }
                }
                out(i, j) = best;
                break;
            }
            }
        }
    }
    return out;
}

// Undo the log transform for flagged columns of a modeling-scale matrix.
inline Matrix to_original_scale(const Schema& schema, Matrix values) {
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (schema[j].log_transformed)
            values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(j)).array().expm1().matrix();
    return values;
}

inline Dataset decode(const DecoderForest& f, const Matrix& z, const std::vector<int>* assignments = nullptr) {
    return Dataset(f.output_schema(), to_original_scale(f.schema, decode_model_scale(f, z, assignments)));
}

inline Vector traversal_grid(double lo, double hi, int steps) {
    if (!(lo < hi)) throw std::invalid_argument("traversal range must satisfy lo < hi");
    if (steps < 2) throw std::invalid_argument("traversal needs at least 2 steps");
    Vector g(steps);
    for (int s = 0; s < steps; ++s) g[s] = s == steps - 1 ? hi : lo + (hi - lo) * s / (steps - 1);
    return g;
}

// Decodes an evenly spaced sweep of latent `dim` over [lo, hi], holding the
// remaining coordinates at `anchor`.
inline Dataset latent_traversal(const DecoderForest& f, int dim, double lo, double hi, int steps, const Vector& anchor,
                                int cluster = 0) {
    if (dim < 0 || dim >= f.latent_dim) throw std::invalid_argument("traversal dimension out of range");
    if (anchor.size() != f.latent_dim) throw ValidationError("traversal anchor has the wrong length");
    if (cluster < 0 || cluster >= static_cast<int>(f.clusters.size()))
        throw std::invalid_argument("traversal cluster out of range");
    const Vector grid = traversal_grid(lo, hi, steps);
    Matrix z = anchor.transpose().replicate(steps, 1);
    z.col(dim) = grid;
    const std::vector<int> which(static_cast<std::size_t>(steps), cluster);
    return decode(f, z, &which);
}

} // namespace tabsynth
