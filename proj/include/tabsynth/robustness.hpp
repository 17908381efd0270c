#pragma once

// Robustness study: benchmark classifiers trained on a fixed split, then
// scored on perturbed copies of the test features across strategies,
// budgets and replicates.
//
// Cell (strategy s, budget b, replicate r) perturbs the test set once with
// seed derive_seed(seed, {s, b, r}) and scores every model on it, so all
// models see the same noise. Cells are independent; aggregation runs in a
// fixed order afterwards.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "boosting.hpp"
#include "csv.hpp"
#include "decoder.hpp"
#include "encoder.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "perturbation.hpp"

namespace tabsynth {

struct BenchmarkSpec {
    std::string name;
    int max_depth = 1;
    int rounds = 100;
    Loss loss = Loss::Logistic;
};

inline std::vector<BenchmarkSpec> default_benchmarks() {
    return {{"xgb1", 1, 100}, {"xgb2", 2, 100}, {"xgb5", 5, 300}};
}

struct TrainTestSplit {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

// Seeded shuffle; each part keeps ascending row order.
inline TrainTestSplit split_rows(Eigen::Index n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng = make_rng(seed, {0x73706c});
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == idx.size()) throw ValidationError("split leaves an empty train or test set");
    TrainTestSplit s{{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train)},
                     {idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end()}};
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline Vector select(const Vector& v, const std::vector<Eigen::Index>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
}

struct BenchmarkResult {
    BenchmarkSpec spec;
    BoostedModel model;
    double train_auc = 0.0;
    double test_auc = 0.0;
    double train_ll = 0.0;
    double test_ll = 0.0;
};

inline void require_binary_target(const Vector& y, const char* what) {
    bool zero = false, one = false;
    for (double v : y) {
        if (v == 0.0) zero = true;
        else if (v == 1.0) one = true;
        else throw ValidationError(std::string(what) + ": target must be 0/1");
    }
    if (!zero || !one) throw ValidationError(std::string(what) + ": target has a single class");
}

inline std::vector<BenchmarkResult> train_benchmarks(const Dataset& train, const Vector& y_train, const Dataset& test,
                                                     const Vector& y_test, const std::vector<BenchmarkSpec>& specs,
                                                     unsigned threads = 1) {
    require_same_schema(train.schema(), test.schema(), "train_benchmarks");
    if (y_train.size() != train.rows() || y_test.size() != test.rows())
        throw ValidationError("train_benchmarks: target length does not match rows");
    require_binary_target(y_train, "train_benchmarks");
    require_binary_target(y_test, "train_benchmarks");
    std::vector<BenchmarkResult> out(specs.size());
    parallel_for(specs.size(), threads, [&](std::size_t k) {
        auto& r = out[k];
        r.spec = specs[k];
        r.model = fit_boosted(train.values(), y_train, {specs[k].loss, specs[k].max_depth, specs[k].rounds});
        const Vector p_train = r.model.predict(train.values());
        const Vector p_test = r.model.predict(test.values());
        r.train_auc = auc(y_train, p_train);
        r.test_auc = auc(y_test, p_test);
        r.train_ll = logloss(y_train, p_train);
        r.test_ll = logloss(y_test, p_test);
    });
    return out;
}

enum class StrategyKind { ModelBased, Raw, Quantile };

inline std::string to_string(StrategyKind s) {
    switch (s) {
    case StrategyKind::ModelBased: return "model";
    case StrategyKind::Raw: return "raw";
    case StrategyKind::Quantile: return "quantile";
    }
    return "?";
}

inline StrategyKind parse_strategy(const std::string& s) {
    if (s == "model" || s == "model-based") return StrategyKind::ModelBased;
    if (s == "raw") return StrategyKind::Raw;
    if (s == "quantile") return StrategyKind::Quantile;
    throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline std::vector<double> default_budgets() { return {0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 1.0}; }

struct RobustnessConfig {
    std::vector<StrategyKind> strategies{StrategyKind::ModelBased, StrategyKind::Raw, StrategyKind::Quantile};
    std::vector<double> budgets = default_budgets();
    int replicates = 10;
    std::uint64_t seed = 0;
    bool truncate = false;
    bool residual_correction = true;
    unsigned threads = 1;
};

struct CurvePoint {
    std::string model;
    StrategyKind strategy = StrategyKind::Raw;
    double budget = 0.0;
    double mean_auc = 0.0;
    double std_auc = 0.0; // population std over replicates
    double mean_logloss = 0.0;
    int replicates = 0;
};

struct ModelMetrics {
    std::string name;
    int max_depth = 0;
    int rounds = 0;
    double train_auc = 0.0, test_auc = 0.0, train_ll = 0.0, test_ll = 0.0;
};

struct RobustnessReport {
    std::vector<ModelMetrics> metrics;
    std::vector<StrategyKind> strategies;
    std::vector<double> budgets;
    int replicates = 0;
    std::uint64_t seed = 0;
    bool truncate = false;
    std::vector<CurvePoint> curve; // model-major, then strategy, then budget
    std::vector<std::string> violations;

    const CurvePoint* find(const std::string& model, StrategyKind s, double budget) const {
        for (const auto& c : curve)
            if (c.model == model && c.strategy == s && c.budget == budget) return &c;
        return nullptr;
    }
};

// Budgets sorted ascending without duplicates; negatives rejected.
inline std::vector<double> normalize_budgets(std::vector<double> b) {
    for (double v : b)
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("budgets must be finite and non-negative");
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

// Curve checks: zero-budget identity for the identity-at-zero strategies,
// largest budget no better than zero budget, and weak decrease with at most
// one inversion smaller than 0.005.
inline std::vector<std::string> check_curves(const RobustnessReport& r, double identity_tol = 1e-12,
                                             double inversion_tol = 0.005) {
    std::vector<std::string> out;
    const bool has_zero = !r.budgets.empty() && r.budgets.front() == 0.0;
    for (const auto& m : r.metrics)
        for (auto s : r.strategies) {
            std::vector<double> a;
            for (double b : r.budgets) a.push_back(r.find(m.name, s, b)->mean_auc);
            const std::string tag = m.name + "/" + to_string(s);
            if (has_zero && s != StrategyKind::Raw && std::abs(a.front() - m.test_auc) > identity_tol)
                out.push_back(tag + ": budget-0 AUC differs from unperturbed test AUC");
            if (has_zero && a.size() > 1 && a.back() > a.front())
                out.push_back(tag + ": AUC at the largest budget exceeds AUC at budget 0");
            int inversions = 0;
            for (std::size_t k = 1; k < a.size(); ++k) {
                if (a[k] <= a[k - 1]) continue;
                ++inversions;
                if (a[k] - a[k - 1] >= inversion_tol)
                    out.push_back(tag + ": AUC rises by " + format_double(a[k] - a[k - 1]) + " at budget " +
                                  format_double(r.budgets[k]));
            }
            if (inversions > 1) out.push_back(tag + ": " + std::to_string(inversions) + " AUC inversions");
        }
    return out;
}

inline RobustnessReport run_robustness(const std::vector<BenchmarkResult>& models, const Dataset& test,
                                       const Vector& y_test, const RobustnessConfig& cfg,
                                       const EncoderModel* encoder = nullptr, const DecoderForest* forest = nullptr) {
    if (cfg.replicates < 1) throw std::invalid_argument("replicates must be at least 1");
    if (y_test.size() != test.rows()) throw ValidationError("run_robustness: target length does not match rows");
    RobustnessReport rep;
    rep.budgets = normalize_budgets(cfg.budgets);
    rep.strategies = cfg.strategies;
    rep.replicates = cfg.replicates;
    rep.seed = cfg.seed;
    rep.truncate = cfg.truncate;
    for (const auto& m : models) {
        if (m.model.num_features != test.cols())
            throw ValidationError("run_robustness: model '" + m.spec.name + "' expects a different column count");
        rep.metrics.push_back({m.spec.name, m.spec.max_depth, m.spec.rounds, m.train_auc, m.test_auc, m.train_ll, m.test_ll});
    }

    std::vector<PerturbFn> gens;
    for (auto s : cfg.strategies) {
        switch (s) {
        case StrategyKind::ModelBased:
            if (!encoder || !forest) throw std::invalid_argument("model-based strategy needs a fitted encoder and forest");
            require_same_schema(test.schema(), forest->schema, "run_robustness");
            gens.push_back(model_generator(*encoder, *forest, cfg.residual_correction));
            break;
        case StrategyKind::Raw: gens.push_back(raw_generator()); break;
        case StrategyKind::Quantile:
            if (!rep.budgets.empty() && rep.budgets.back() > 1.0)
                throw std::invalid_argument("quantile budgets must not exceed 1");
            gens.push_back(quantile_generator());
            break;
        }
    }

    const Vector y_before = y_test;
    const std::size_t nb = rep.budgets.size(), nr = static_cast<std::size_t>(cfg.replicates), nm = models.size();
    const std::size_t cells = gens.size() * nb * nr;
    std::vector<double> aucs(cells * nm), lls(cells * nm);
    parallel_for(cells, cfg.threads, [&](std::size_t cell) {
        const std::size_t s = cell / (nb * nr), b = (cell / nr) % nb, r = cell % nr;
        const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.strategies[s]), b, r});
        Dataset x = gens[s](test, rep.budgets[b], seed);
        if (cfg.truncate) x = truncate(x);
        if (x.rows() != test.rows() || x.schema() != test.schema())
            throw std::logic_error("perturbation changed the test set's shape or schema");
        for (std::size_t m = 0; m < nm; ++m) {
            const Vector p = models[m].model.predict(x.values());
            aucs[cell * nm + m] = auc(y_test, p);
            lls[cell * nm + m] = logloss(y_test, p);
        }
    });
    if (y_test != y_before) rep.violations.push_back("target column changed during perturbation");

    for (std::size_t m = 0; m < nm; ++m)
        for (std::size_t s = 0; s < gens.size(); ++s)
            for (std::size_t b = 0; b < nb; ++b) {
                double sum = 0.0, sum_ll = 0.0;
                for (std::size_t r = 0; r < nr; ++r) {
                    const auto cell = (s * nb + b) * nr + r;
                    sum += aucs[cell * nm + m];
                    sum_ll += lls[cell * nm + m];
                }
                const double mean = sum / static_cast<double>(nr);
                double var = 0.0;
                for (std::size_t r = 0; r < nr; ++r) {
                    const double d = aucs[((s * nb + b) * nr + r) * nm + m] - mean;
                    var += d * d;
                }
                rep.curve.push_back({models[m].spec.name, cfg.strategies[s], rep.budgets[b], mean,
                                     std::sqrt(var / static_cast<double>(nr)), sum_ll / static_cast<double>(nr),
                                     cfg.replicates});
            }
    const auto curve_issues = check_curves(rep);
    rep.violations.insert(rep.violations.end(), curve_issues.begin(), curve_issues.end());
    return rep;
}

inline void write_metrics_table(std::ostream& out, const RobustnessReport& r) {
    out << "model,max_depth,rounds,train_auc,test_auc,train_ll,test_ll\n";
    for (const auto& m : r.metrics)
        out << m.name << ',' << m.max_depth << ',' << m.rounds << ',' << format_double(m.train_auc) << ','
            << format_double(m.test_auc) << ',' << format_double(m.train_ll) << ',' << format_double(m.test_ll) << '\n';
}

inline void write_curve(std::ostream& out, const RobustnessReport& r, StrategyKind s) {
    out << "model,budget,mean_auc,std_auc,mean_logloss,replicates\n";
    for (const auto& c : r.curve)
        if (c.strategy == s)
            out << c.model << ',' << format_double(c.budget) << ',' << format_double(c.mean_auc) << ','
                << format_double(c.std_auc) << ',' << format_double(c.mean_logloss) << ',' << c.replicates << '\n';
}

inline nlohmann::json report_manifest(const RobustnessReport& r) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : r.metrics) models.push_back({{"name", m.name}, {"max_depth", m.max_depth}, {"rounds", m.rounds}});
    std::vector<std::string> strategies;
    for (auto s : r.strategies) strategies.push_back(to_string(s));
    return {{"seed", r.seed},       {"replicates", r.replicates}, {"budgets", r.budgets},
            {"strategies", strategies}, {"truncate", r.truncate}, {"models", models},
            {"violations", r.violations}};
}

// metrics.csv, curve_<strategy>.csv (when budgets exist) and report.json.
// Returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const RobustnessReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& name) {
        written.push_back(dir / name);
        std::ofstream f(written.back(), std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + written.back().string() + "'");
        return f;
    };
    {
        auto f = open("metrics.csv");
        write_metrics_table(f, r);
    }
    if (!r.budgets.empty())
        for (auto s : r.strategies) {
            auto f = open("curve_" + to_string(s) + ".csv");
            write_curve(f, r, s);
        }
    {
        auto f = open("report.json");
        f << report_manifest(r).dump(2) << '\n';
    }
    return written;
}

// End-to-end study on a predictor table and binary target: split, train the
// benchmarks, fit the encoder and forest on the (log-transformed) training
// predictors, then sweep the test set.
struct StudyConfig {
    double train_fraction = 0.7;
    std::uint64_t split_seed = 0;
    std::vector<BenchmarkSpec> benchmarks = default_benchmarks();
    std::vector<std::string> log_columns;
    EncoderConfig encoder{};
    DecoderConfig decoder{};
    RobustnessConfig robustness{};
};

struct StudyResult {
    std::vector<BenchmarkResult> models;
    EncoderModel encoder;
    DecoderForest forest;
    RobustnessReport report;
};

inline StudyResult run_study(const Dataset& predictors, const Vector& target, const StudyConfig& cfg) {
    if (target.size() != predictors.rows()) throw ValidationError("target length does not match predictor rows");
    require_binary_target(target, "robustness");
    const auto split = split_rows(predictors.rows(), cfg.train_fraction, cfg.split_seed);
    const Dataset train = predictors.select_rows(split.train), test = predictors.select_rows(split.test);
    const Vector y_train = select(target, split.train), y_test = select(target, split.test);

    StudyResult out;
    out.models = train_benchmarks(train, y_train, test, y_test, cfg.benchmarks, cfg.robustness.threads);
    const bool needs_model = std::find(cfg.robustness.strategies.begin(), cfg.robustness.strategies.end(),
                                       StrategyKind::ModelBased) != cfg.robustness.strategies.end();
    if (needs_model) {
        const Dataset train_model = log_transform(train, cfg.log_columns);
        auto fit = fit_encoder(train_model, cfg.encoder);
        const Matrix z = encode(fit.encoder, train_model, fit.clusters);
        out.forest = fit_decoder_forest(z, train_model, fit.encoder, fit.clusters.assignments, cfg.decoder);
        out.encoder = std::move(fit.encoder);
    }
    out.report = run_robustness(out.models, test, y_test, cfg.robustness, needs_model ? &out.encoder : nullptr,
                                needs_model ? &out.forest : nullptr);
    return out;
}

} // namespace tabsynth
