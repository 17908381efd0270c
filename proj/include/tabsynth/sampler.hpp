#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "decoder.hpp"
#include "rng.hpp"

namespace tabsynth {

// Interpolated empirical CDF of a sample. The k-th order statistic (1-based)
// sits at plotting position (k - 0.5)/n and the CDF is linear in between.
// Runs of tied values map to the middle of their position range. Outside the
// observed range the CDF is clamped to [0.5/n, 1 - 0.5/n], and the inverse
// clamps to the extreme order statistics.
class EmpiricalMarginal {
public:
    EmpiricalMarginal() = default;

    explicit EmpiricalMarginal(std::vector<double> values) : sorted_(std::move(values)) {
        if (sorted_.size() < 2) throw ValidationError("empirical marginal needs at least 2 values");
        for (double v : sorted_)
            if (!std::isfinite(v)) throw ValidationError("empirical marginal: non-finite value");
        std::sort(sorted_.begin(), sorted_.end());
    }

    static EmpiricalMarginal from_sorted(std::vector<double> sorted) {
        if (!std::is_sorted(sorted.begin(), sorted.end())) throw ValidationError("marginal values are not sorted");
        return EmpiricalMarginal(std::move(sorted));
    }

    const std::vector<double>& sorted_values() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }

    double to_uniform(double z) const {
        const double n = static_cast<double>(sorted_.size());
        if (z < sorted_.front()) return 0.5 / n;
        if (z > sorted_.back()) return 1.0 - 0.5 / n;
        const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), z);
        const auto hi = std::upper_bound(lo, sorted_.end(), z);
        const auto a = static_cast<double>(lo - sorted_.begin());
        if (lo != hi) {
            const auto b = static_cast<double>(hi - sorted_.begin()) - 1.0;
            return (0.5 * (a + b) + 0.5) / n;
        }
        // sorted_[a-1] < z < sorted_[a]
        const double left = sorted_[static_cast<std::size_t>(a) - 1];
        const double right = sorted_[static_cast<std::size_t>(a)];
        return (a - 0.5 + (z - left) / (right - left)) / n;
    }

    double from_uniform(double u) const {
        if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("from_uniform: u must lie in [0, 1]");
        const double n = static_cast<double>(sorted_.size());
        const double t = u * n - 0.5;
        if (t <= 0.0) return sorted_.front();
        if (t >= n - 1.0) return sorted_.back();
        const auto k = static_cast<std::size_t>(std::floor(t));
        const double frac = t - static_cast<double>(k);
        const double left = sorted_[k];
        const double right = sorted_[k + 1];
        return frac == 0.0 ? left : left + frac * (right - left);
    }

private:
    std::vector<double> sorted_;
};

struct LatentSampler {
    std::vector<std::vector<EmpiricalMarginal>> marginals; // [cluster][latent dim]
    std::vector<double> weights;                            // n_c / n

    int k() const { return static_cast<int>(marginals.size()); }
    int latent_dim() const { return marginals.empty() ? 0 : static_cast<int>(marginals.front().size()); }
};

inline LatentSampler fit_marginals(const Matrix& z, const std::vector<int>& assignments, int k) {
    if (static_cast<Eigen::Index>(assignments.size()) != z.rows())
        throw ValidationError("fit_marginals: assignment count does not match latent rows");
    if (k < 1) throw std::invalid_argument("fit_marginals: k must be at least 1");
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int a = assignments[i];
        if (a < 0 || a >= k) throw ValidationError("fit_marginals: assignment out of range");
        members[static_cast<std::size_t>(a)].push_back(static_cast<Eigen::Index>(i));
    }
    LatentSampler s;
    for (std::size_t c = 0; c < members.size(); ++c) {
        if (members[c].size() < 2)
            throw ValidationError("fit_marginals: cluster " + std::to_string(c) + " has fewer than 2 rows");
        std::vector<EmpiricalMarginal> dims;
        for (Eigen::Index d = 0; d < z.cols(); ++d) {
            std::vector<double> v;
            v.reserve(members[c].size());
            for (auto i : members[c]) v.push_back(z(i, d));
            dims.emplace_back(std::move(v));
        }
        s.marginals.push_back(std::move(dims));
        s.weights.push_back(static_cast<double>(members[c].size()) / static_cast<double>(z.rows()));
    }
    return s;
}

inline LatentSampler fit_marginals(const Matrix& z) {
    return fit_marginals(z, std::vector<int>(static_cast<std::size_t>(z.rows()), 0), 1);
}

// Multinomial split of `count` over the cluster weights.
inline std::vector<Eigen::Index> allocate_counts(const std::vector<double>& weights, Eigen::Index count, Rng& rng) {
    std::vector<Eigen::Index> out(weights.size(), 0);
    Eigen::Index left = count;
    double mass = 1.0;
    for (std::size_t c = 0; c + 1 < weights.size() && left > 0; ++c) {
        const double p = mass > 0.0 ? std::clamp(weights[c] / mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<Eigen::Index> b(left, p);
        out[c] = b(rng);
        left -= out[c];
        mass -= weights[c];
    }
    if (!out.empty()) out.back() += left;
    return out;
}

struct LatentDraw {
    Matrix z;
    std::vector<int> assignments;
};

// Per-cluster i.i.d. uniform hypercube points pushed through the inverse
// marginals, one dimension at a time.
inline LatentDraw sample_latents(const LatentSampler& sampler, Eigen::Index count, std::uint64_t seed) {
    if (sampler.marginals.empty()) throw ValidationError("sample: sampler is empty");
    if (count < 1) throw std::invalid_argument("sample count must be at least 1");
    Rng alloc_rng = make_rng(seed, {0});
    const auto counts = allocate_counts(sampler.weights, count, alloc_rng);
    LatentDraw out;
    out.z.resize(count, sampler.latent_dim());
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        Rng rng = make_rng(seed, {1, static_cast<std::uint64_t>(c)});
        for (Eigen::Index r = 0; r < counts[c]; ++r, ++row) {
            for (int d = 0; d < sampler.latent_dim(); ++d)
                out.z(row, d) = sampler.marginals[c][static_cast<std::size_t>(d)].from_uniform(uniform01(rng));
            out.assignments.push_back(static_cast<int>(c));
        }
    }
    return out;
}

inline Dataset sample_synthetic(const LatentSampler& sampler, const DecoderForest& forest, Eigen::Index count,
                                std::uint64_t seed) {
    if (sampler.k() != static_cast<int>(forest.clusters.size()))
        throw ValidationError("sample_synthetic: sampler and forest disagree on cluster count");
    if (sampler.latent_dim() != forest.latent_dim)
        throw ValidationError("sample_synthetic: sampler and forest disagree on latent dimension");
    const auto draw = sample_latents(sampler, count, seed);
    return decode(forest, draw.z, &draw.assignments);
}

} // namespace tabsynth
