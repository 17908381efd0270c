#pragma once

#include <cassert>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace tabsynth {

struct ClusterModel {
    int k = 1;
    Matrix centroids;                // k x p
    std::vector<int> assignments;    // length n, values in [0, k)
    std::vector<double> inertia_trace; // inertia after each Lloyd iteration
    int iterations = 0;

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
        for (int a : assignments) ++out[static_cast<std::size_t>(a)];
        return out;
    }
};

struct KMeansOptions {
    int max_iterations = 300;
    double tolerance = 1e-6; // on the largest centroid shift
};

// Nearest centroid by Euclidean distance; ties go to the lowest index.
inline int nearest_centroid(const Matrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x, double* dist2 = nullptr) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

inline std::vector<int> assign_nearest(const Matrix& centroids, const Matrix& x) {
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest_centroid(centroids, x.row(i));
    return out;
}

// Lloyd's algorithm with k-means++ seeding. `x` is expected to be
// standardized by the caller; clustering runs on whatever scale it is given.
inline ClusterModel kmeans(const Matrix& x, int k, std::uint64_t seed, const KMeansOptions& opt = {}) {
    const Eigen::Index n = x.rows();
    if (k < 1) throw std::invalid_argument("kmeans: k must be at least 1");
    if (k > n) throw std::invalid_argument("kmeans: k exceeds the number of rows");

    ClusterModel m;
    m.k = k;
    m.centroids.resize(k, x.cols());

    // k-means++ seeding
    Rng rng = make_rng(seed, {0x6b6d});
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    m.centroids.row(0) = x.row(first(rng));
    Vector d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - m.centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        m.centroids.row(c) = x.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (x.row(i) - m.centroids.row(c)).squaredNorm());
    }

    m.assignments.assign(static_cast<std::size_t>(n), 0);
    Vector dist(n);
    auto assign = [&] {
        for (Eigen::Index i = 0; i < n; ++i)
            m.assignments[static_cast<std::size_t>(i)] = nearest_centroid(m.centroids, x.row(i), &dist[i]);
    };

    for (m.iterations = 1; m.iterations <= opt.max_iterations; ++m.iterations) {
        assign();
        // Empty clusters take the point farthest from its current centroid.
        auto sizes = m.sizes();
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] != 0) continue;
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (sizes[static_cast<std::size_t>(m.assignments[static_cast<std::size_t>(i)])] < 2) continue;
                if (far < 0 || dist[i] > dist[far]) far = i;
            }
            if (far < 0) break;
            --sizes[static_cast<std::size_t>(m.assignments[static_cast<std::size_t>(far)])];
            ++sizes[static_cast<std::size_t>(c)];
            m.assignments[static_cast<std::size_t>(far)] = c;
            m.centroids.row(c) = x.row(far);
            dist[far] = 0.0;
        }

        Matrix updated = Matrix::Zero(k, x.cols());
        for (Eigen::Index i = 0; i < n; ++i) updated.row(m.assignments[static_cast<std::size_t>(i)]) += x.row(i);
        for (int c = 0; c < k; ++c)
            if (sizes[static_cast<std::size_t>(c)] > 0)
                updated.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
            else
                updated.row(c) = m.centroids.row(c);
        const double shift = (updated - m.centroids).rowwise().norm().maxCoeff();
        m.centroids = std::move(updated);

        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            inertia += (x.row(i) - m.centroids.row(m.assignments[static_cast<std::size_t>(i)])).squaredNorm();
        assert(m.inertia_trace.empty() || inertia <= m.inertia_trace.back() * (1.0 + 1e-12) + 1e-12);
        m.inertia_trace.push_back(inertia);
        if (shift < opt.tolerance) break;
    }
    m.iterations = std::min(m.iterations, opt.max_iterations);

    assign();
    for (auto s : m.sizes())
        if (s == 0) throw NumericError("kmeans: could not form " + std::to_string(k) + " non-empty clusters");
    return m;
}

inline ClusterModel kmeans(const Dataset& ds, int k, std::uint64_t seed, const KMeansOptions& opt = {}) {
    return kmeans(ds.values(), k, seed, opt);
}

} // namespace tabsynth
