#include <gtest/gtest.h>

#include "fkforge/sle.hpp"

using namespace fkforge;
using namespace fkforge::sle;

TEST(Sle, ParamsAreValidated) {
    KrParams p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_NEAR(p.sigma() * p.sigma(), 4.0 / 3, 1e-15);
    EXPECT_NEAR(p.b(), 1.0 / 3, 1e-15);
    p.dt = 0;
    EXPECT_THROW(p.validate(), BadParams);
    p = {};
    p.phi0 = p.upsilon0 + 7;
    EXPECT_THROW(p.validate(), BadParams);
}

TEST(Sle, StreamsAreReproducible) {
    KrParams p;
    p.T = 0.2;
    auto a = simulate_sle_kr(p, 5, 1), b = simulate_sle_kr(p, 5, 1), c = simulate_sle_kr(p, 5, 2);
    EXPECT_EQ(a.Z, b.Z);
    EXPECT_EQ(a.driving.upsilon, b.driving.upsilon);
    EXPECT_NE(a.Z, c.Z);
    auto r = simulate_radial_sle(6, 0.5, 1e-3, 3);
    EXPECT_EQ(r.size(), 501u);
    EXPECT_EQ(r.upsilon, simulate_radial_sle(6, 0.5, 1e-3, 3).upsilon);
}

TEST(Sle, PathInvariants) {
    KrParams p;
    p.T = 0.5;
    p.dt = 1e-3;
    auto path = simulate_sle_kr(p, 1);
    for (std::size_t k = 0; k < path.Z.size(); ++k) {
        ASSERT_LE(std::abs(path.Z[k]), 1.0);
        ASSERT_GE(path.X[k], 0);
        ASSERT_LE(path.X[k], kPi);
        double gap = path.driving.phi[k] - path.driving.upsilon[k];
        ASSERT_NEAR(gap, 2 * path.X[k], 1e-12);
        ASSERT_NEAR(path.M[k], std::exp(path.driving.t[k]) * path.Z[k], 1e-12);
    }
}

TEST(Sle, MartingalesAndNegativeControl) {
    KrParams p;
    p.dt = 1e-3;
    p.T = 0.5;
    auto r = simulate_ensemble(p, 4000, {0.25, 0.5}, 7);
    for (std::size_t i = 0; i < r.checkpoints.size(); ++i) {
        EXPECT_LT(std::abs(r.M[i].mean - r.M0), 3 * r.M[i].se);
        EXPECT_LT(std::abs(r.N[i].mean - r.N0), 3 * r.N[i].se);
    }
    EXPECT_LT(r.qv.max_rel_error(), 0.1);

    KrParams wrong = p;
    wrong.kappa = 6;
    wrong.rho = 0;
    auto w = simulate_ensemble(wrong, 4000, {0.5}, 7);
    EXPECT_GT(std::abs(w.M[0].mean - w.M0), 3 * w.M[0].se);
}

TEST(Sle, ResultsDoNotDependOnWorkers) {
    KrParams p;
    p.dt = 1e-3;
    p.T = 0.2;
    setenv("FKFORGE_WORKERS", "1", 1);
    auto a = simulate_ensemble(p, 300, {0.2}, 4);
    setenv("FKFORGE_WORKERS", "3", 1);
    auto b = simulate_ensemble(p, 300, {0.2}, 4);
    unsetenv("FKFORGE_WORKERS");
    EXPECT_EQ(a.M[0].mean, b.M[0].mean);
    EXPECT_EQ(a.N[0].mean, b.N[0].mean);
    EXPECT_EQ(a.bessel.b, b.bessel.b);
}

TEST(Bessel, AccumulatorRecoversConstants) {
    // Euler steps of dX = b cot X dt + s dB kept away from the ends
    BesselAccumulator acc;
    Philox rng(8);
    const double b = 0.4, s2 = 1.2, dt = 1e-4;
    for (int i = 0; i < 200000; ++i) {
        double X = 0.3 + (kPi - 0.6) * rng.uniform();
        acc.add(X, b / std::tan(X) * dt + std::sqrt(s2 * dt) * rng.normal(), dt);
    }
    auto f = acc.fit();
    EXPECT_NEAR(f.b, b, 4 * f.b_se);
    EXPECT_NEAR(f.sigma2, s2, 0.02);
}

TEST(Branching, SingleTargetIsTheRootProcess) {
    auto tr = branching_sle({0.0}, 16.0 / 3, 0.3, 1e-3, 9);
    ASSERT_EQ(tr.paths.size(), 1u);
    EXPECT_TRUE(tr.branch_time.empty());
    KrParams p{16.0 / 3, -2.0 / 3, 0, 0, 0.3, 1e-3};
    auto ref = simulate_sle_kr(p, 9, 0);
    EXPECT_EQ(tr.paths[0].driving.upsilon, ref.driving.upsilon);
    EXPECT_EQ(tr.paths[0].Z, ref.Z);
}

TEST(Branching, UnbranchedFractionsAreFrozen) {
    // three targets, 200 trees at dt = 1e-3; fractions of pairs never separated
    const std::vector<cplx> targets{0.0, {0.3, 0.2}, {-0.4, -0.1}};
    std::vector<double> frac;
    for (double T : {2.5, 5.0}) {
        int unb = 0, pairs = 0;
        for (int s = 0; s < 200; ++s) {
            auto tr = branching_sle(targets, 16.0 / 3, T, 1e-3, 100 + s);
            EXPECT_TRUE(check_ultrametric(tr).empty());
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j) ++pairs, unb += !tr.branch_time.count({i, j});
        }
        frac.push_back(double(unb) / pairs);
    }
    EXPECT_NEAR(frac[0], 0.737, 1e-3);
    EXPECT_NEAR(frac[1], 0.335, 1e-3);
}

TEST(Branching, BadInputs) {
    EXPECT_THROW(branching_sle({}, 16.0 / 3, 1, 1e-3, 1), BadParams);
    EXPECT_THROW(branching_sle({0.0, 0.0}, 16.0 / 3, 1, 1e-3, 1), BadParams);
    EXPECT_THROW(branching_sle({1.5}, 16.0 / 3, 1, 1e-3, 1), BadParams);
    EXPECT_THROW(branching_sle({0.0}, 3, 1, 1e-3, 1), BadParams);
}
