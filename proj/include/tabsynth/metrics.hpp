#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace tabsynth {

inline constexpr double kMassFloor = 1e-6;

struct BinnedDistribution {
    std::vector<double> edges;  // B + 1, ascending; outer edges may be infinite
    std::vector<double> masses; // B, sums to 1
};

// Masses floored at `floor` and renormalized to sum to 1.
inline std::vector<double> floor_masses(std::vector<double> m, double floor = kMassFloor) {
    double total = 0.0;
    for (auto& v : m) total += (v = std::max(v, floor));
    for (auto& v : m) v /= total;
    return m;
}

// Bin index for sorted edges: edges[b] <= v < edges[b+1]. Values past either
// outer edge fall in the outer bins.
inline std::size_t bin_of(const std::vector<double>& edges, double v) {
    const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, v);
    return static_cast<std::size_t>(it - (edges.begin() + 1));
}

inline std::vector<double> bin_proportions(const std::vector<double>& values, const std::vector<double>& edges) {
    if (edges.size() < 2) throw std::invalid_argument("need at least one bin");
    std::vector<double> m(edges.size() - 1, 0.0);
    for (double v : values) m[bin_of(edges, v)] += 1.0;
    for (auto& v : m) v /= static_cast<double>(values.size());
    return m;
}

inline BinnedDistribution binned(const std::vector<double>& values, const std::vector<double>& edges,
                                 double floor = kMassFloor) {
    if (values.empty()) throw std::invalid_argument("binned: empty input");
    return {edges, floor_masses(bin_proportions(values, edges), floor)};
}

// Linear-interpolation quantile (type 7) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Edges from the B-quantiles of `reference`; repeated cut points collapse, so
// heavily tied data yields fewer than B bins. Cuts at the reference minimum
// are dropped: a point mass there (e.g. zero-inflated amounts) joins the
// lowest bin instead of leaving an empty bin below it. Outer edges are
// infinite.
inline std::vector<double> quantile_edges(std::vector<double> reference, int bins) {
    if (reference.empty()) throw std::invalid_argument("quantile_edges: empty reference");
    if (bins < 1) throw std::invalid_argument("quantile_edges: bins must be positive");
    std::sort(reference.begin(), reference.end());
    std::vector<double> edges{-std::numeric_limits<double>::infinity()};
    for (int b = 1; b < bins; ++b) {
        const double cut = quantile_sorted(reference, static_cast<double>(b) / bins);
        if (cut > reference.front() && cut > edges.back()) edges.push_back(cut);
    }
    edges.push_back(std::numeric_limits<double>::infinity());
    return edges;
}

// One bin per class code in [0, levels).
inline std::vector<double> category_edges(int levels) {
    std::vector<double> e;
    for (int c = 0; c <= levels; ++c) e.push_back(c - 0.5);
    return e;
}

inline double kl(const BinnedDistribution& p, const BinnedDistribution& q) {
    if (p.edges != q.edges || p.masses.size() != q.masses.size()) throw std::invalid_argument("kl: bin edges differ");
    double s = 0.0;
    for (std::size_t i = 0; i < p.masses.size(); ++i) s += p.masses[i] * std::log(p.masses[i] / q.masses[i]);
    return s;
}

// Symmetrized KL on shared bins: sum (P_i - Q_i) ln(P_i / Q_i).
inline double psi_masses(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("psi: bin counts differ");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != q[i]) s += (p[i] - q[i]) * std::log(p[i] / q[i]);
    return s;
}

inline double psi(const BinnedDistribution& p, const BinnedDistribution& q) {
    if (p.edges != q.edges) throw std::invalid_argument("psi: bin edges differ");
    return psi_masses(p.masses, q.masses);
}

// PSI of `comparison` against `reference`: quantile bins of the reference for
// continuous data, one bin per code for discrete data. Natural log.
inline double psi(const std::vector<double>& reference, const std::vector<double>& comparison, int bins = 10,
                  const ColumnKind& kind = ColumnKind::continuous()) {
    if (reference.empty() || comparison.empty()) throw std::invalid_argument("psi: empty input");
    const auto edges = kind.is_discrete() ? category_edges(kind.levels()) : quantile_edges(reference, bins);
    return psi(binned(reference, edges), binned(comparison, edges));
}

inline std::vector<double> column_vector(const Dataset& ds, Eigen::Index j) {
    const Vector c = ds.values().col(j);
    return {c.data(), c.data() + c.size()};
}

struct PsiEntry {
    std::string column;
    double psi = 0.0;
    int bins = 0;
    std::string policy; // "quantile" or "category"
};

inline std::vector<PsiEntry> psi_report(const Dataset& reference, const Dataset& comparison, int bins = 10) {
    require_same_schema(reference.schema(), comparison.schema(), "psi_report");
    std::vector<PsiEntry> out;
    for (Eigen::Index j = 0; j < reference.cols(); ++j) {
        const auto& kind = reference.column(j).kind;
        const auto ref = column_vector(reference, j);
        const auto edges = kind.is_discrete() ? category_edges(kind.levels()) : quantile_edges(ref, bins);
        out.push_back({reference.column(j).name, psi(binned(ref, edges), binned(column_vector(comparison, j), edges)),
                       static_cast<int>(edges.size() - 1), kind.is_discrete() ? "category" : "quantile"});
    }
    return out;
}

// Equal-width histogram over [min, max] (unfloored proportions).
inline BinnedDistribution histogram(const std::vector<double>& values, int bins = 40) {
    if (values.empty()) throw std::invalid_argument("histogram: empty input");
    if (bins < 1) throw std::invalid_argument("histogram: bins must be positive");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    BinnedDistribution h;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + (hi - lo) * b / bins);
    h.masses.assign(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * bins));
        h.masses[std::min(b, static_cast<std::size_t>(bins - 1))] += 1.0;
    }
    for (auto& m : h.masses) m /= static_cast<double>(values.size());
    return h;
}

// Per column: std(X'_j - X_j) / std(X_j) for continuous columns, fraction of
// changed rows for discrete ones.
inline std::vector<double> effective_perturbation(const Dataset& original, const Dataset& perturbed) {
    require_same_schema(original.schema(), perturbed.schema(), "effective_perturbation");
    if (original.rows() != perturbed.rows()) throw ValidationError("effective_perturbation: row counts differ");
    std::vector<double> out;
    for (Eigen::Index j = 0; j < original.cols(); ++j) {
        const Vector a = original.values().col(j);
        const Vector b = perturbed.values().col(j);
        if (original.column(j).kind.is_discrete()) {
            out.push_back(static_cast<double>((a.array() != b.array()).count()) / static_cast<double>(a.size()));
        } else {
            const double s = stddev_of(a);
            out.push_back(s > 0.0 ? stddev_of(b - a) / s : 0.0);
        }
    }
    return out;
}

struct CorrelationMap {
    Matrix r;
    std::vector<std::string> warnings;
};

// Pearson correlation over all columns (codes treated as numbers). Constant
// columns get zero off-diagonal correlation and a warning.
inline CorrelationMap correlation_map(const Dataset& ds) {
    if (ds.rows() < 2) throw ValidationError("correlation_map: need at least 2 rows");
    const Matrix centered = ds.values().rowwise() - ds.values().colwise().mean();
    const Vector norms = centered.colwise().norm().transpose();
    CorrelationMap out;
    out.r = Matrix::Identity(ds.cols(), ds.cols());
    for (Eigen::Index a = 0; a < ds.cols(); ++a) {
        if (norms[a] == 0.0) out.warnings.push_back("column '" + ds.column(a).name + "' is constant");
        for (Eigen::Index b = a + 1; b < ds.cols(); ++b) {
            const double denom = norms[a] * norms[b];
            const double v = denom > 0.0 ? std::clamp(centered.col(a).dot(centered.col(b)) / denom, -1.0, 1.0) : 0.0;
            out.r(a, b) = out.r(b, a) = v;
        }
    }
    return out;
}

inline double correlation_distance(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

// Mann-Whitney AUC; tied scores count one half.
inline double auc(const Vector& labels, const Vector& scores) {
    if (labels.size() != scores.size()) throw std::invalid_argument("auc: length mismatch");
    const auto n = static_cast<std::size_t>(labels.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores[static_cast<Eigen::Index>(a)] < scores[static_cast<Eigen::Index>(b)];
    });
    double positives = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[static_cast<Eigen::Index>(idx[j])] == scores[static_cast<Eigen::Index>(idx[i])]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            const double y = labels[static_cast<Eigen::Index>(idx[k])];
            if (y != 0.0 && y != 1.0) throw std::invalid_argument("auc: labels must be 0 or 1");
            if (y == 1.0) {
                positives += 1.0;
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw std::invalid_argument("auc: both classes must be present");
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

inline double logloss(const Vector& labels, const Vector& probabilities) {
    if (labels.size() != probabilities.size()) throw std::invalid_argument("logloss: length mismatch");
    if (labels.size() == 0) throw std::invalid_argument("logloss: empty input");
    double s = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-15, 1.0 - 1e-15);
        s += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -s / static_cast<double>(labels.size());
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

// Plug-in mutual information (nats) on a bins x bins grid of equal-frequency
// bins from each marginal.
inline double mutual_information(const std::vector<double>& x, const std::vector<double>& y, int bins = 10) {
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("mutual_information: bad input");
    const auto ex = quantile_edges(x, bins);
    const auto ey = quantile_edges(y, bins);
    const std::size_t bx = ex.size() - 1, by = ey.size() - 1;
    std::vector<double> joint(bx * by, 0.0), px(bx, 0.0), py(by, 0.0);
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto a = bin_of(ex, x[i]);
        const auto b = bin_of(ey, y[i]);
        joint[a * by + b] += 1.0 / n;
        px[a] += 1.0 / n;
        py[b] += 1.0 / n;
    }
    double mi = 0.0;
    for (std::size_t a = 0; a < bx; ++a)
        for (std::size_t b = 0; b < by; ++b) {
            const double pj = joint[a * by + b];
            if (pj > 0.0) mi += pj * std::log(pj / (px[a] * py[b]));
        }
    return mi;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty input");
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace tabsynth
