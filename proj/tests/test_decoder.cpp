#include <gtest/gtest.h>

#include "support.hpp"

using namespace tabsynth;
using testing_support::continuous;
using testing_support::normal_matrix;

namespace {

struct Fitted {
    EncoderModel enc;
    Matrix z;
    DecoderForest forest;
};

Fitted fit_all(const Dataset& ds, int l, const DecoderConfig& cfg, bool standardize = true) {
    Fitted f;
    f.enc = fit_pca(ds, l, standardize);
    f.z = encode(f.enc, ds);
    f.forest = fit_decoder_forest(f.z, ds, f.enc, std::vector<int>(static_cast<std::size_t>(ds.rows()), 0), cfg);
    return f;
}

// Least squared error of the best piecewise-constant fit of y (ordered by x)
// with `pieces` contiguous segments, by dynamic programming.
double best_step_sse(std::vector<std::pair<double, double>> xy, int pieces) {
    std::sort(xy.begin(), xy.end());
    const std::size_t n = xy.size();
    std::vector<double> s(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s[i + 1] = s[i] + xy[i].second;
        s2[i + 1] = s2[i] + xy[i].second * xy[i].second;
    }
    auto cost = [&](std::size_t a, std::size_t b) { // rows [a, b)
        const double m = static_cast<double>(b - a);
        const double sum = s[b] - s[a];
        return s2[b] - s2[a] - sum * sum / m;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
    prev[0] = 0.0;
    for (int k = 1; k <= pieces; ++k) {
        std::fill(cur.begin(), cur.end(), inf);
        for (std::size_t b = 1; b <= n; ++b)
            for (std::size_t a = 0; a < b; ++a)
                if (prev[a] < inf) cur[b] = std::min(cur[b], prev[a] + cost(a, b));
        cur[0] = 0.0;
        std::swap(prev, cur);
    }
    return prev[n];
}

} // namespace

TEST(Decoder, IdentityColumnRecovered) {
    Matrix x(1000, 1);
    auto rng = make_rng(1);
    for (Eigen::Index i = 0; i < 1000; ++i) x(i, 0) = uniform01(rng) * 10.0 - 3.0;
    const auto ds = continuous(x);
    const auto f = fit_all(ds, 1, DecoderConfig{});
    const Matrix out = decode(f.forest, f.z).values();
    const double ss_res = (out - x).squaredNorm();
    const double ss_tot = (x.array() - x.mean()).square().sum();
    EXPECT_GT(1.0 - ss_res / ss_tot, 0.999);
    // residual decays across rounds
    const auto& loss = f.forest.clusters[0].columns[0].models[0].training_loss;
    EXPECT_LT(loss.back(), 0.01 * loss.front());
}

TEST(Decoder, ConstantBinaryColumnStaysConstant) {
    Matrix x = normal_matrix(200, 3, 2);
    x.col(2).setOnes();
    Schema s{{"a", ColumnKind::continuous()}, {"b", ColumnKind::continuous()}, {"flag", ColumnKind::binary()}};
    const Dataset ds(s, x);
    const auto f = fit_all(ds, 2, DecoderConfig{});
    const Matrix out = decode(f.forest, normal_matrix(100, 2, 3) * 5.0).values();
    EXPECT_TRUE((out.col(2).array() == 1.0).all());
}

TEST(Decoder, HalfCircleBeatsSingleTreeOptimum) {
    const auto ds = gen_half_circle(400, 3.0, 0.0, std::nullopt, 4);
    const auto f = fit_all(ds, 1, DecoderConfig{}, false);
    const Matrix out = decode(f.forest, f.z).values();
    const double rmse = std::sqrt((out.col(1) - ds.values().col(1)).squaredNorm() / 400.0);
    std::vector<std::pair<double, double>> xy;
    for (Eigen::Index i = 0; i < 400; ++i) xy.emplace_back(f.z(i, 0), ds.values()(i, 1));
    // one depth-2 tree has four leaves; 200 boosted rounds must do at least as well
    const double oracle = std::sqrt(best_step_sse(xy, 4) / 400.0);
    EXPECT_LT(rmse, 0.35);
    EXPECT_LE(rmse, oracle);
}

TEST(Decoder, ZeroRoundsGiveTrainingMean) {
    const Matrix x = normal_matrix(100, 4, 5) * 3.0;
    const auto ds = continuous(x);
    DecoderConfig cfg;
    cfg.rounds = 0;
    const auto f = fit_all(ds, 2, cfg);
    const Matrix out = decode(f.forest, normal_matrix(10, 2, 6)).values();
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LT((out.col(j).array() - x.col(j).mean()).abs().maxCoeff(), 1e-12);
}

TEST(Decoder, MixedKindsDecodeToValidRows) {
    const auto data = testing_support::credit(1500);
    DecoderConfig cfg;
    cfg.rounds = 40;
    const auto f = fit_all(data.predictors, 5, cfg);
    // out-of-distribution latents still give valid codes
    const Dataset out = decode(f.forest, normal_matrix(300, 5, 7) * 4.0);
    EXPECT_EQ(out.schema().size(), data.predictors.schema().size());
    for (std::size_t j = 0; j < out.schema().size(); ++j) {
        EXPECT_EQ(out.schema()[j].name, data.predictors.schema()[j].name);
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            EXPECT_TRUE(out.schema()[j].kind.admits(out.values()(i, static_cast<Eigen::Index>(j))));
    }
}

TEST(Decoder, LinearDataNearLinearOracle) {
    const Matrix latent = normal_matrix(2000, 2, 8);
    const Matrix mix = normal_matrix(2, 5, 9);
    const auto ds = continuous(latent * mix);
    DecoderConfig cfg;
    cfg.rounds = 400;
    const auto f = fit_all(ds, 2, cfg);
    const auto& sub = f.enc.clusters[0];
    const Matrix xs = sub.standardize(ds.values());
    const Matrix rec = sub.standardize(decode(f.forest, f.z).values());
    const double mse = (rec - xs).squaredNorm() / static_cast<double>(xs.size());
    // a linear map from the codes fits exactly
    const Matrix coef = f.z.colPivHouseholderQr().solve(xs);
    const double linear = (f.z * coef - xs).squaredNorm() / static_cast<double>(xs.size());
    EXPECT_LT(linear, 1e-20);
    EXPECT_LT(mse, 1e-2);
}

TEST(Decoder, LogColumnsComeBackOnOriginalScale) {
    Matrix x = normal_matrix(300, 2, 10);
    x.col(1) = x.col(0).array().exp() * 100.0;
    const auto logged = log_transform(continuous(x), {"c1"});
    const auto f = fit_all(logged, 1, DecoderConfig{});
    const Dataset out = decode(f.forest, f.z);
    EXPECT_FALSE(out.schema()[1].log_transformed);
    const double rel = ((out.values().col(1) - x.col(1)).array().abs() / x.col(1).array()).mean();
    EXPECT_LT(rel, 0.1);
}

TEST(Decoder, DimensionMismatchRejected) {
    const auto ds = continuous(normal_matrix(50, 3, 11));
    const auto f = fit_all(ds, 2, DecoderConfig{});
    EXPECT_THROW(decode(f.forest, Matrix::Zero(3, 3)), ValidationError);
    EXPECT_THROW(fit_decoder_forest(f.z.topRows(10), ds, f.enc, std::vector<int>(50, 0), DecoderConfig{}), ValidationError);
}

TEST(Traversal, ConstantOutsideTrainingRange) {
    const auto ds = gen_half_circle(300, 3.0, 0.0, std::nullopt, 12);
    const auto f = fit_all(ds, 1, DecoderConfig{}, false);
    const double hi = f.z.maxCoeff();
    const double lo = f.z.minCoeff();
    const Matrix above = latent_traversal(f.forest, 0, hi, hi + 50.0, 11, Vector::Zero(1)).values();
    const Matrix below = latent_traversal(f.forest, 0, lo - 50.0, lo, 11, Vector::Zero(1)).values();
    for (Eigen::Index s = 1; s < 11; ++s) {
        EXPECT_EQ(above.row(s), above.row(0));
        EXPECT_EQ(below.row(s), below.row(0));
    }
}

TEST(Traversal, TwoStepsAreTheEndpoints) {
    const auto ds = continuous(normal_matrix(200, 4, 13));
    const auto f = fit_all(ds, 3, DecoderConfig{});
    const Vector anchor = (Vector(3) << 0.1, -0.2, 0.3).finished();
    const Matrix t = latent_traversal(f.forest, 1, -1.5, 2.0, 2, anchor).values();
    Matrix ends = anchor.transpose().replicate(2, 1);
    ends(0, 1) = -1.5;
    ends(1, 1) = 2.0;
    EXPECT_EQ(t, decode(f.forest, ends).values());
    EXPECT_THROW(latent_traversal(f.forest, 3, 0, 1, 5, anchor), std::invalid_argument);
    EXPECT_THROW(latent_traversal(f.forest, 0, 1, 1, 5, anchor), std::invalid_argument);
    EXPECT_THROW(latent_traversal(f.forest, 0, 0, 1, 1, anchor), std::invalid_argument);
}

TEST(Traversal, FollowsTheFittedArc) {
    const auto ds = gen_half_circle(400, 3.0, 0.0, std::nullopt, 14);
    const auto f = fit_all(ds, 1, DecoderConfig{}, false);
    const Matrix rec = decode(f.forest, f.z).values();
    auto off_circle = [](const Eigen::RowVectorXd& r) { return std::abs(r.norm() - 3.0); };
    double band = 0.0;
    for (Eigen::Index i = 0; i < rec.rows(); ++i) band = std::max(band, off_circle(rec.row(i)));
    const Matrix t = latent_traversal(f.forest, 0, f.z.minCoeff(), f.z.maxCoeff(), 101, Vector::Zero(1)).values();
    for (Eigen::Index s = 0; s < t.rows(); ++s) EXPECT_LE(off_circle(t.row(s)), band + 1e-12);
}

TEST(Decoder, FitIndependentOfThreads) {
    const auto ds = continuous(normal_matrix(300, 4, 15));
    DecoderConfig one, four;
    one.rounds = four.rounds = 30;
    four.threads = 4;
    const auto a = fit_all(ds, 2, one);
    const auto b = fit_all(ds, 2, four);
    EXPECT_EQ(decode(a.forest, a.z).values(), decode(b.forest, b.z).values());
}
