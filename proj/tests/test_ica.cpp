#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace tabsynth;
using testing_support::normal_matrix;

namespace {

Vector exponential(Eigen::Index n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::exponential_distribution<double> e(1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = e(rng);
    return v;
}

Vector uniform_pm1(Eigen::Index n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 2.0 * uniform01(rng) - 1.0;
    return v;
}

Matrix rotation(double angle) {
    Matrix r(2, 2);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

// Central moments of Exp(1) from raw moments m'_k = k!, via the binomial
// expansion of E[(X - 1)^k].
std::vector<double> exp1_central_moments() {
    std::vector<double> raw{1, 1, 2, 6, 24, 120, 720};
    std::vector<double> c(7, 0.0);
    for (int k = 2; k <= 6; ++k)
        for (int j = 0; j <= k; ++j) {
            double binom = 1;
            for (int t = 1; t <= j; ++t) binom = binom * (k - j + t) / t;
            c[static_cast<std::size_t>(k)] += binom * raw[static_cast<std::size_t>(k - j)] * ((j % 2) ? -1.0 : 1.0);
        }
    return c;
}

double abs_corr(const Vector& a, const Vector& b) {
    const Vector x = a.array() - a.mean();
    const Vector y = b.array() - b.mean();
    return std::abs(x.dot(y) / (x.norm() * y.norm()));
}

} // namespace

TEST(Cumulants, ExponentialMatchesHandDerivation) {
    const auto mu = exp1_central_moments();
    EXPECT_DOUBLE_EQ(mu[2], 1.0);
    EXPECT_DOUBLE_EQ(mu[3], 2.0);
    EXPECT_DOUBLE_EQ(mu[4], 9.0);
    const double k3 = mu[3];
    const double k4 = mu[4] - 3 * mu[2] * mu[2];
    const auto c = cumulants(exponential(1000000, 1));
    EXPECT_NEAR(c.k3 / k3, 1.0, 0.1);
    EXPECT_NEAR(c.k4 / k4, 1.0, 0.1);
    EXPECT_NEAR(c.k1, 1.0, 0.01);
}

TEST(Cumulants, FormulasOnSmallSample) {
    const std::vector<double> v{0.3, -1.2, 2.5, 0.0, 4.1, -0.7};
    double mean = 0;
    for (double x : v) mean += x / 6.0;
    double m[7] = {};
    for (double x : v)
        for (int k = 2; k <= 6; ++k) m[k] += std::pow(x - mean, k) / 6.0;
    const auto c = cumulants(v);
    EXPECT_NEAR(c.k2, m[2], 1e-12);
    EXPECT_NEAR(c.k3, m[3], 1e-12);
    EXPECT_NEAR(c.k4, m[4] - 3 * m[2] * m[2], 1e-12);
    EXPECT_NEAR(c.k5, m[5] - 10 * m[3] * m[2], 1e-10);
    EXPECT_NEAR(c.k6, m[6] - 15 * m[4] * m[2] - 10 * m[3] * m[3] + 30 * std::pow(m[2], 3), 1e-9);
    EXPECT_THROW(cumulants(std::vector<double>{1.0}), ValidationError);
}

TEST(Cumulants, GaussianHigherOrdersVanish) {
    const Vector g = normal_matrix(1000000, 1, 2).col(0);
    EXPECT_LT(std::abs(cumulants(g).k4), 0.02);
    EXPECT_LT(std::abs(cumulants(g).k3), 0.01);
}

TEST(Cumulants, HomogeneityAndAdditivity) {
    const Vector x = exponential(1000000, 3);
    const double base = cumulants(x).k4;
    for (double c : {-2.0, 0.5, 3.0}) EXPECT_NEAR(cumulants(Vector(c * x)).k4, std::pow(c, 4) * base, 1e-9 * std::pow(c, 4) * std::abs(base));
    const Vector y = uniform_pm1(1000000, 4);
    const double sum = cumulants(Vector(x + y)).k4;
    const double parts = base + cumulants(y).k4;
    EXPECT_NEAR(sum, parts, 0.1 * std::abs(parts));
}

TEST(Ica, WhitenedCovarianceIsIdentity) {
    Matrix z = normal_matrix(5000, 3, 5);
    z.col(1) += 2.0 * z.col(0);
    z.col(2) = z.col(2).array().exp();
    const auto m = fit_ica(z, 1);
    const Matrix zc = z.rowwise() - m.mean.transpose();
    const Matrix y = zc * m.whitening.transpose();
    EXPECT_LT((y.transpose() * y / 5000.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((m.unmixing * m.unmixing.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((m.whitening * m.dewhitening - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ica, RecoversRotatedUniformSources) {
    const Eigen::Index n = 100000;
    Matrix s(n, 2);
    s.col(0) = uniform_pm1(n, 6);
    s.col(1) = uniform_pm1(n, 7);
    const Matrix z = s * rotation(0.6).transpose();
    const auto m = fit_ica(z, 2);
    const Matrix rec = m.sources(z);
    for (Eigen::Index k = 0; k < 2; ++k)
        EXPECT_GT(std::max(abs_corr(rec.col(k), s.col(0)), abs_corr(rec.col(k), s.col(1))), 0.95);
    for (Eigen::Index k = 0; k < 2; ++k) EXPECT_NEAR(m.kurtosis[k], -1.2, 0.05);
}

TEST(Ica, IndependentInputsGiveNearPermutation) {
    const Eigen::Index n = 50000;
    Matrix z(n, 2);
    z.col(0) = 3.0 * uniform_pm1(n, 8);
    z.col(1) = exponential(n, 9);
    const auto m = fit_ica(z, 3);
    Matrix total = m.unmixing * m.whitening;
    for (Eigen::Index r = 0; r < 2; ++r) total.row(r) /= total.row(r).norm();
    for (Eigen::Index r = 0; r < 2; ++r) {
        const Eigen::RowVectorXd a = total.row(r).cwiseAbs();
        EXPECT_LT(a.minCoeff(), 0.1);
        EXPECT_GT(a.maxCoeff(), 0.99);
    }
}

TEST(Ica, GaussianSourcesAreFlagged) {
    const Matrix z = normal_matrix(20000, 2, 10) * rotation(0.3);
    bool flagged = false;
    try {
        flagged = !fit_ica(z, 4).warnings.empty();
    } catch (const NumericError&) {
        flagged = true;
    }
    EXPECT_TRUE(flagged);
}

TEST(Ica, SecondOrderStatisticsCannotSeeRotation) {
    const Eigen::Index n = 100000;
    Matrix s(n, 2);
    s.col(0) = uniform_pm1(n, 11) * std::sqrt(3.0);
    s.col(1) = uniform_pm1(n, 12) * std::sqrt(3.0);
    const Matrix y = s * rotation(1.1).transpose();
    auto rng = make_rng(13);
    double k4_lo = 1e9, k4_hi = -1e9;
    for (int t = 0; t < 100; ++t) {
        const double a = 2.0 * std::numbers::pi * uniform01(rng);
        const Vector proj = y * (Vector(2) << std::cos(a), std::sin(a)).finished();
        const auto c = cumulants(proj);
        EXPECT_NEAR(c.k2, 1.0, 0.05);
        k4_lo = std::min(k4_lo, c.k4);
        k4_hi = std::max(k4_hi, c.k4);
    }
    EXPECT_GT(k4_hi - k4_lo, 0.3);
}

TEST(Ica, SamplingKeepsCovarianceAndSupport) {
    const Eigen::Index n = 100000;
    Matrix s(n, 2);
    s.col(0) = uniform_pm1(n, 14);
    s.col(1) = uniform_pm1(n, 15);
    const Matrix rot = rotation(0.7);
    const Matrix z = s * rot.transpose();
    const auto m = fit_ica(z, 5);
    const auto marg = fit_source_marginals(m, z);
    EXPECT_EQ(ica_sample(m, marg, 1, 1).rows(), 1);
    const Matrix syn = ica_sample(m, marg, n, 6);
    auto cov = [](const Matrix& x) {
        const Matrix c = x.rowwise() - x.colwise().mean();
        return Matrix(c.transpose() * c / static_cast<double>(x.rows()));
    };
    EXPECT_LT((cov(syn) - cov(z)).norm() / cov(z).norm(), 0.05);
    auto outside = [&](const Matrix& pts) {
        const Matrix back = pts * rot; // undo the rotation
        return static_cast<double>((back.cwiseAbs().rowwise().maxCoeff().array() > 1.0 + 1e-3).count()) /
               static_cast<double>(pts.rows());
    };
    EXPECT_LT(outside(syn), 0.01);
    const Matrix naive = sample_latents(fit_marginals(z), n, 7).z;
    EXPECT_GT(outside(naive), 0.05);
    EXPECT_THROW(ica_sample(m, {marg[0]}, 5, 1), ValidationError);
    EXPECT_THROW(ica_sample(m, marg, 0, 1), std::invalid_argument);
}

TEST(Ica, DeterministicAndValidated) {
    Matrix z(2000, 2);
    z.col(0) = uniform_pm1(2000, 16);
    z.col(1) = exponential(2000, 17);
    EXPECT_EQ(fit_ica(z, 9).unmixing, fit_ica(z, 9).unmixing);
    EXPECT_THROW(fit_ica(z.leftCols(1), 1), ValidationError);
    EXPECT_THROW(fit_ica(z.topRows(15), 1), ValidationError);
    Matrix singular(100, 2);
    singular.col(0) = uniform_pm1(100, 18);
    singular.col(1) = singular.col(0);
    EXPECT_THROW(fit_ica(singular, 1), NumericError);
}

TEST(Ica, ClusterSamplingShapes) {
    Matrix z(3000, 2);
    z.col(0) = uniform_pm1(3000, 19);
    z.col(1) = exponential(3000, 20);
    std::vector<int> a(3000);
    for (int i = 0; i < 3000; ++i) a[static_cast<std::size_t>(i)] = i < 1000 ? 0 : 1;
    const auto draw = ica_sample_latents(z, a, {1.0 / 3.0, 2.0 / 3.0}, 600, 3);
    EXPECT_EQ(draw.z.rows(), 600);
    EXPECT_EQ(draw.assignments.size(), 600u);
    EXPECT_EQ(ica_sample_latents(z, a, {1.0 / 3.0, 2.0 / 3.0}, 600, 3).z, draw.z);
}
