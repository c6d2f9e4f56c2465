#include <gtest/gtest.h>

#include <cmath>

#include "trnood/detectors.hpp"
#include "trnood/metrics.hpp"
#include "trnood/oracles.hpp"
#include "trnood/selfcheck.hpp"

using namespace trnood;

TEST(Energy, KnownValues) {
    Matrix<double> z(3, 2, {0, 0, 1, 0, 1000, 1000});
    const auto s = energy_score(z).scores;
    EXPECT_NEAR(s[0], -std::log(2.0), 1e-15);
    EXPECT_NEAR(s[1], -std::log(std::exp(1.0) + 1.0), 1e-15);
    EXPECT_NEAR(s[2], -1000 - std::log(2.0), 1e-12);
}

TEST(Energy, ShiftByConstant) {
    Matrix<double> a(1, 3, {0.3, -1.2, 2.0}), b(1, 3, {5.3, 3.8, 7.0});
    EXPECT_NEAR(energy_score(b).scores[0], energy_score(a).scores[0] - 5.0, 1e-12);
}

TEST(Msp, KnownValues) {
    Matrix<double> z(2, 4, {0, 0, 0, 0, 10, 0, 0, 0});
    const auto s = msp_score(z).scores;
    EXPECT_DOUBLE_EQ(s[0], -0.25);
    EXPECT_NEAR(s[1], -std::exp(10.0) / (std::exp(10.0) + 3.0), 1e-15);
    EXPECT_NEAR(s[1], -0.999864, 1e-6);
}

TEST(Msp, RaisingMaxLogitLowersScore) {
    Matrix<double> z(2, 3, {2, 1, 0, 3, 1, 0});
    const auto s = msp_score(z).scores;
    EXPECT_LT(s[1], s[0]);
}

TEST(Mahalanobis, IdentityCovarianceIsSquaredEuclidean) {
    Matrix<double> mu(1, 2, {1, -1}), cov(2, 2, {1, 0, 0, 1});
    MahalanobisModel m(mu, cov, 0.0);
    Matrix<double> f(2, 2, {1, -1, 4, 3});
    const auto s = m.score(f).scores;
    EXPECT_EQ(s[0], 0.0);
    EXPECT_NEAR(s[1], 9 + 16, 1e-12);
}

TEST(Mahalanobis, MatchesExplicitInverse) {
    Rng rng(1, "maha");
    const std::size_t d = 3, n = 40;
    Matrix<double> f(n, d);
    std::vector<std::int64_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<std::int64_t>(i % 2);
        for (std::size_t j = 0; j < d; ++j) f(i, j) = rng.normal() + (y[i] ? 2.0 : 0.0) + (j == 1 ? f(i, 0) : 0.0);
    }
    const auto m = MahalanobisModel::fit(f, y, 2);
    // Explicit 3x3 inverse of Sigma + eps I via the adjugate.
    auto a = m.covariance();
    for (std::size_t j = 0; j < d; ++j) a(j, j) += m.eps_cov();
    const double det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
                       a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
                       a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    Matrix<double> inv(3, 3);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t r1 = (c + 1) % 3, r2 = (c + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
            inv(r, c) = (a(r1, c1) * a(r2, c2) - a(r1, c2) * a(r2, c1)) / det;
        }
    Matrix<double> q(5, d);
    for (auto& v : q.data) v = rng.normal() * 2;
    const auto s = m.score(q).scores;
    for (std::size_t i = 0; i < 5; ++i) {
        double best = 1e300;
        for (std::size_t c = 0; c < 2; ++c) {
            double dist = 0;
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t k = 0; k < d; ++k)
                    dist += (q(i, r) - m.means()(c, r)) * inv(r, k) * (q(i, k) - m.means()(c, k));
            best = std::min(best, dist);
        }
        EXPECT_NEAR(s[i], best, 1e-8);
    }
}

TEST(Mahalanobis, AtClassMeanIsZero) {
    Matrix<double> f(4, 2, {0, 0, 2, 0, 10, 10, 12, 10});
    const auto m = MahalanobisModel::fit(f, {0, 0, 1, 1}, 2);
    EXPECT_NEAR(m.score(Matrix<double>(1, 2, {11, 10})).scores[0], 0.0, 1e-12);
}

TEST(Mahalanobis, SingularCovarianceIsRejected) {
    Matrix<double> mu(1, 2), cov(2, 2, {1, 1, 1, 1});
    EXPECT_THROW(MahalanobisModel(mu, cov, 0.0), std::runtime_error);
}

TEST(Propagation, AlphaOneIsIdentity) {
    TrnGraph g;
    g.n = 3;
    g.features = Matrix<float>(3, 1);
    g.edges = {{0, 1}, {1, 2}};
    const ScoreVector s{{1.5, -2.0, 0.25}};
    for (int k : {0, 1, 3, 7}) EXPECT_EQ(propagate_scores(s, g, k, 1.0).scores, s.scores);
}

TEST(Propagation, TwoNodeHandComputed) {
    TrnGraph g;
    g.n = 2;
    g.features = Matrix<float>(2, 1);
    g.edges = {{0, 1}};
    const auto s = propagate_scores(ScoreVector{{0.0, 1.0}}, g, 1, 0.5).scores;
    EXPECT_EQ(s, (std::vector<double>{0.5, 0.5}));
}

TEST(Propagation, IsolatedNodeDecays) {
    TrnGraph g;
    g.n = 1;
    g.features = Matrix<float>(1, 1);
    EXPECT_DOUBLE_EQ(propagate_scores(ScoreVector{{2.0}}, g, 3, 0.5).scores[0], 0.25);
}

TEST(Propagation, MatchesDenseOracle) {
    Rng rng(2, "prop");
    for (int t = 0; t < 50; ++t) {
        const auto g = random_small_graph(rng, 16);
        ScoreVector s;
        for (std::size_t i = 0; i < g.n; ++i) s.scores.push_back(rng.normal());
        const auto got = propagate_scores(s, g, 3, 0.5).scores;
        const auto want = oracle::propagate(s.scores, g.n, g.edges, 3, 0.5);
        for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
    }
}

TEST(Propagation, DefaultsAndValidation) {
    EXPECT_EQ(PropagationDefaults::K, 3);
    EXPECT_EQ(PropagationDefaults::alpha, 0.5);
    TrnGraph g;
    g.n = 1;
    g.features = Matrix<float>(1, 1);
    EXPECT_THROW(propagate_scores(ScoreVector{{1.0}}, g, -1, 0.5), std::invalid_argument);
    EXPECT_THROW(propagate_scores(ScoreVector{{1.0}}, g, 1, 1.5), std::invalid_argument);
    EXPECT_THROW(propagate_scores(ScoreVector{{1.0, 2.0}}, g, 1, 0.5), std::invalid_argument);
}

TEST(Elign, ZeroTemperatureIsEnergy) {
    Rng rng(3, "elign");
    Matrix<double> z(4, 3), p(4, 2), gh(4, 2);
    for (auto* m : {&z, &p, &gh})
        for (auto& v : m->data) v = rng.normal();
    const auto e = energy_score(z);
    EXPECT_EQ(elign_score(e, p, gh, 0.0).scores, e.scores);
}

TEST(Elign, AlignedUnitRowsSubtractT) {
    Matrix<double> p(2, 2, {1, 0, 0.6, 0.8});
    const ScoreVector e{{0.5, -1.0}};
    const auto s = elign_score(e, p, p, 2.0).scores;
    EXPECT_NEAR(s[0], 0.5 - 2.0, 1e-15);
    EXPECT_NEAR(s[1], -1.0 - 2.0, 1e-15);
}

TEST(Elign, RandomMatchesLoop) {
    Rng rng(4, "elign2");
    Matrix<double> p(6, 3), gh(6, 3);
    ScoreVector e;
    for (auto* m : {&p, &gh})
        for (auto& v : m->data) v = rng.normal();
    for (int i = 0; i < 6; ++i) e.scores.push_back(rng.normal());
    const auto s = elign_score(e, p, gh, 1.0).scores;
    for (std::size_t i = 0; i < 6; ++i) {
        double dot = 0;
        for (std::size_t j = 0; j < 3; ++j) dot += p(i, j) * gh(i, j);
        EXPECT_NEAR(s[i], e.scores[i] - dot, 1e-6);
    }
}

TEST(Elign, ZeroTemperatureWithPropagationIsGnnSafe) {
    Rng rng(5, "gnnsafe");
    const auto g = random_small_graph(rng, 12);
    Matrix<double> z(g.n, 3), p(g.n, 2), gh(g.n, 2);
    for (auto* m : {&z, &p, &gh})
        for (auto& v : m->data) v = rng.normal();
    const auto e = energy_score(z);
    EXPECT_EQ(propagate_scores(elign_score(e, p, gh, 0.0), g, 3, 0.5).scores, propagate_scores(e, g, 3, 0.5).scores);
}

TEST(Threshold, Boundaries) {
    const ScoreVector s{{0.1, 0.5, 0.9}};
    EXPECT_EQ(threshold(s, -std::numeric_limits<double>::infinity()), (std::vector<bool>{true, true, true}));
    EXPECT_EQ(threshold(s, 1.9), (std::vector<bool>{false, false, false}));
}

TEST(Threshold, NinetyFiveCutReproducesFpr95) {
    Rng rng(6, "thr");
    for (int t = 0; t < 30; ++t) {
        const auto m = random_metric_instance(rng, 50);
        // Largest tau that keeps >= 95 % of OOD above it.
        std::vector<double> pos;
        for (std::size_t i = 0; i < m.scores.size(); ++i)
            if (m.ood[i]) pos.push_back(m.scores[i]);
        std::sort(pos.begin(), pos.end(), std::greater<>());
        const std::size_t need = (pos.size() * 95 + 99) / 100;
        const double tau = pos[need - 1];
        const auto flags = threshold(ScoreVector{m.scores}, tau);
        std::size_t fp = 0, neg = 0;
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (!m.ood[i]) {
                ++neg;
                fp += flags[i];
            }
        EXPECT_EQ(double(fp) / double(neg), fpr95(m.scores, m.ood));
    }
}

TEST(Scores, NonFiniteIsRejected) {
    EXPECT_THROW(check_finite(ScoreVector{{1.0, std::nan("")}}), std::runtime_error);
}
