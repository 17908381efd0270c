#pragma once

// Second-order gradient boosted regression trees with exact greedy splits.
//
// Each round fits one depth-limited tree to the gradients g and hessians h
// of the current scores. A split of a node with totals (G, H) into (G_L, H_L)
// and (G_R, H_R) scores
//
//   gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
//
// and leaves take weight -G/(H+lambda). Candidate thresholds sit halfway
// between consecutive distinct feature values within the node; rows with
// x < threshold go left. Ties between equal gains (up to a relative 1e-12,
// so summation order cannot decide them) go to the lowest feature index, then
// the lowest threshold.
//
// With max_depth 1 the fitted score is a sum of per-feature step functions
// (an additive model); with max_depth 2 it adds pairwise interactions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace tabsynth {

enum class Loss { SquaredError, Logistic };

inline std::string to_string(Loss l) { return l == Loss::SquaredError ? "squared_error" : "logistic"; }

inline Loss parse_loss(const std::string& s) {
    if (s == "squared_error") return Loss::SquaredError;
    if (s == "logistic") return Loss::Logistic;
    throw ValidationError("unknown loss '" + s + "'");
}

struct BoostConfig {
    Loss loss = Loss::SquaredError;
    int max_depth = 2;
    int rounds = 200;
    double learning_rate = 0.1;
    double lambda = 1.0; // L2 penalty on leaf weights
    double gamma = 0.0;  // minimum split gain

    void validate() const {
        if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
        if (rounds < 0) throw std::invalid_argument("rounds must be non-negative");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw std::invalid_argument("learning_rate must be in (0, 1]");
        if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
        if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
    }
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    template <class Row>
    int leaf_index(const Row& x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[n.feature] < n.threshold ? n.left : n.right;
        }
        return i;
    }

    template <class Row>
    double output(const Row& x) const {
        return nodes[static_cast<std::size_t>(leaf_index(x))].weight;
    }

    int depth() const {
        std::vector<int> d(nodes.size(), 0);
        int out = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            if (n.is_leaf()) continue;
            d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[i] + 1;
            out = std::max(out, d[i] + 1);
        }
        return out;
    }

    bool uses_feature(int f) const {
        return std::any_of(nodes.begin(), nodes.end(), [f](const TreeNode& n) { return n.feature == f; });
    }
};

inline double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

class BoostedModel {
public:
    BoostConfig config;
    double base_score = 0.0;
    int num_features = 0;
    std::vector<Tree> trees;
    std::vector<double> training_loss; // after each round, on the training set

    template <class Row>
    double raw_score(const Row& x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.output(x);
        return base_score + config.learning_rate * s;
    }

    // Raw scores for every row of x (margins for Logistic).
    Vector raw_scores(const Matrix& x) const {
        check_width(x);
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = raw_score(x.row(i));
        return out;
    }

    // Predicted values; probabilities for Logistic.
    Vector predict(const Matrix& x) const {
        Vector s = raw_scores(x);
        if (config.loss == Loss::Logistic) s = s.unaryExpr([](double v) { return sigmoid(v); });
        return s;
    }

    // 1{p >= 0.5}; only meaningful for Logistic.
    Vector predict_class(const Matrix& x) const {
        return predict(x).unaryExpr([](double p) { return p >= 0.5 ? 1.0 : 0.0; });
    }

private:
    void check_width(const Matrix& x) const {
        if (x.cols() != num_features)
            throw ValidationError("model expects " + std::to_string(num_features) + " features, got " +
                                  std::to_string(x.cols()));
    }
};

namespace detail {

inline double loss_value(Loss loss, const Vector& y, const Vector& score) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (loss == Loss::SquaredError) {
            total += 0.5 * (y[i] - score[i]) * (y[i] - score[i]);
        } else {
            // log(1 + e^s) - y s, evaluated stably
            const double s = score[i];
            total += (s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) - y[i] * s;
        }
    }
    return total / static_cast<double>(y.size());
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Builds one tree level by level. `order[f]` lists row indices sorted by
// feature f (ties by row index).
inline Tree grow_tree(const Matrix& x, const std::vector<std::vector<Eigen::Index>>& order, const Vector& g,
                      const Vector& h, const BoostConfig& cfg) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    constexpr double min_hess = 1e-16;

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(static_cast<std::size_t>(n), 0);
    std::vector<double> gsum(1, g.sum()), hsum(1, h.sum());
    std::vector<int> active{0};

    auto leaf_weight = [&](double G, double H) { return H + cfg.lambda > 0.0 ? -G / (H + cfg.lambda) : 0.0; };
    auto score = [&](double G, double H) { return H + cfg.lambda > 0.0 ? G * G / (H + cfg.lambda) : 0.0; };

    for (int depth = 0; depth < cfg.max_depth && !active.empty(); ++depth) {
        const std::size_t nodes_now = tree.nodes.size();
        std::vector<SplitCandidate> best(nodes_now);
        std::vector<double> gl(nodes_now), hl(nodes_now), last(nodes_now);
        std::vector<char> seen(nodes_now), is_active(nodes_now, 0);
        for (int a : active) is_active[static_cast<std::size_t>(a)] = 1;

        for (Eigen::Index f = 0; f < d; ++f) {
            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            std::fill(seen.begin(), seen.end(), 0);
            for (Eigen::Index i : order[static_cast<std::size_t>(f)]) {
                const int nd = node_of[static_cast<std::size_t>(i)];
                if (nd < 0 || !is_active[static_cast<std::size_t>(nd)]) continue;
                const auto k = static_cast<std::size_t>(nd);
                const double v = x(i, f);
                if (seen[k] && v > last[k]) {
                    const double GL = gl[k], HL = hl[k];
                    const double GR = gsum[k] - GL, HR = hsum[k] - HL;
                    if (HL + cfg.lambda > min_hess && HR + cfg.lambda > min_hess) {
                        const double gain =
                            0.5 * (score(GL, HL) + score(GR, HR) - score(gsum[k], hsum[k])) - cfg.gamma;
                        if (gain > best[k].gain + 1e-12 * std::abs(best[k].gain)) {
                            double thr = 0.5 * (last[k] + v);
                            if (!(thr > last[k])) thr = v;
                            best[k] = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                gl[k] += g[i];
                hl[k] += h[i];
                last[k] = v;
                seen[k] = 1;
            }
        }

        std::vector<int> next_active;
        std::vector<int> split_of(nodes_now, -1);
        for (int a : active) {
            const auto k = static_cast<std::size_t>(a);
            if (best[k].feature < 0) continue;
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[k];
            node.feature = best[k].feature;
            node.threshold = best[k].threshold;
            node.left = left;
            node.right = left + 1;
            gsum.resize(tree.nodes.size(), 0.0);
            hsum.resize(tree.nodes.size(), 0.0);
            next_active.push_back(left);
            next_active.push_back(left + 1);
            split_of[k] = a;
        }
        if (next_active.empty()) break;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& nd = node_of[static_cast<std::size_t>(i)];
            if (nd < 0 || static_cast<std::size_t>(nd) >= nodes_now || split_of[static_cast<std::size_t>(nd)] < 0) continue;
            const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
            nd = x(i, node.feature) < node.threshold ? node.left : node.right;
            gsum[static_cast<std::size_t>(nd)] += g[i];
            hsum[static_cast<std::size_t>(nd)] += h[i];
        }
        active = std::move(next_active);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
        if (tree.nodes[k].is_leaf()) tree.nodes[k].weight = leaf_weight(gsum[k], hsum[k]);
    return tree;
}

} // namespace detail

// Fits a boosted model to (x, y). Training is deterministic; `seed` is
// accepted for interface symmetry (no subsampling is performed).
inline BoostedModel fit_boosted(const Matrix& x, const Vector& y, const BoostConfig& cfg, std::uint64_t /*seed*/ = 0) {
    cfg.validate();
    if (x.rows() == 0 || x.cols() == 0) throw ValidationError("fit_boosted: empty data");
    if (x.rows() != y.size()) throw ValidationError("fit_boosted: feature rows and target length differ");
    if (!x.allFinite() || !y.allFinite()) throw ValidationError("fit_boosted: non-finite input");
    if (cfg.loss == Loss::Logistic)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("fit_boosted: logistic targets must be 0 or 1");

    const Eigen::Index n = x.rows();
    BoostedModel m;
    m.config = cfg;
    m.num_features = static_cast<int>(x.cols());
    const double ybar = y.mean();
    if (cfg.loss == Loss::SquaredError) {
        m.base_score = ybar;
    } else {
        const double rate = std::clamp(ybar, 1e-6, 1.0 - 1e-6);
        m.base_score = std::log(rate / (1.0 - rate));
    }

    std::vector<std::vector<Eigen::Index>> order(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& o = order[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(n));
        std::iota(o.begin(), o.end(), Eigen::Index{0});
        std::stable_sort(o.begin(), o.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
    }

    Vector score = Vector::Constant(n, m.base_score);
    Vector g(n), h(n);
    m.trees.reserve(static_cast<std::size_t>(cfg.rounds));
    for (int round = 0; round < cfg.rounds; ++round) {
        if (cfg.loss == Loss::SquaredError) {
            g = score - y;
            h.setOnes();
        } else {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double p = sigmoid(score[i]);
                g[i] = p - y[i];
                h[i] = p * (1.0 - p);
            }
        }
        Tree t = detail::grow_tree(x, order, g, h, cfg);
        for (Eigen::Index i = 0; i < n; ++i) score[i] += cfg.learning_rate * t.output(x.row(i));
        m.trees.push_back(std::move(t));
        m.training_loss.push_back(detail::loss_value(cfg.loss, y, score));
    }
    return m;
}

} // namespace tabsynth
