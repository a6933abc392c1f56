#include <gtest/gtest.h>

#include <random>

#include "fkforge/dca.hpp"

using namespace fkforge;
using namespace fkforge::dca;
using lattice::P2;

namespace {

VertexField random_gamma(int half, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    VertexField f{Lattice::Gamma, 1.0, {}};
    for (int x = -2 * half; x <= 2 * half; x += 2)
        for (int y = -2 * half; y <= 2 * half; y += 2) f.values[{x, y}] = cplx(u(rng), u(rng));
    return f;
}

}  // namespace

TEST(Dca, DbarDIsQuarterLaplacian) {
    for (std::uint32_t seed : {1u, 2u, 3u}) {
        auto f = random_gamma(10, seed);
        auto dd = dbar1(d1(f));
        VertexField black{Lattice::Black, 1.0, {}};
        for (auto& [p, v] : f.values)
            if (on_lattice(Lattice::Black, p)) black.values[p] = v;
        auto lap = laplacian1(black);
        int n = 0;
        for (auto& [p, v] : lap.values) {
            if (!dd.has(p)) continue;
            EXPECT_NEAR(std::abs(dd.at(p) - 0.25 * v), 0, 1e-12);
            ++n;
        }
        EXPECT_GT(n, 100);
    }
}

TEST(Dca, NormalizedDerivativesOfZ) {
    VertexField z{Lattice::Gamma, 0.5, {}};
    for (int x = -10; x <= 10; x += 2)
        for (int y = -10; y <= 10; y += 2) z.values[{x, y}] = z.pos({x, y});
    for (auto& [p, v] : d1(z, true).values) EXPECT_NEAR(std::abs(v - 1.0), 0, 1e-12);
    for (auto& [p, v] : dbar1(z, true).values) EXPECT_NEAR(std::abs(v), 0, 1e-12);
}

TEST(Dca, LatticeMembership) {
    EXPECT_TRUE(on_lattice(Lattice::Black, {0, 0}));
    EXPECT_TRUE(on_lattice(Lattice::White, {2, 0}));
    EXPECT_TRUE(on_lattice(Lattice::GammaStar, {1, -1}));
    EXPECT_TRUE(on_lattice(Lattice::Diamond, {1, 0}));
    EXPECT_FALSE(on_lattice(Lattice::Gamma, {1, 0}));
}

class Green : public ::testing::Test {
protected:
    static void SetUpTestSuite() { g_ = greens_function(64); }
    static inline GreenResult g_;
};

TEST_F(Green, SolvesThePointSource) {
    EXPECT_LT(g_.residual, 1e-10);
    EXPECT_DOUBLE_EQ(g_.G.at({0, 0}).real(), 0.0);
    for (P2 p : {P2{2, 2}, P2{2, -2}, P2{-2, 2}, P2{-2, -2}}) EXPECT_NEAR(g_.G.at(p).real(), 0.25, 1e-10);
}

TEST_F(Green, LogarithmicGrowth) {
    double r = 64 * kSqrt2;
    double slope = log_slope(g_.G, r / 4, r / 2);
    EXPECT_NEAR(slope * 2 * kPi, 1.0, 0.02);
    // the defect times |z|^2 stays bounded, so the correction is O(delta^2 / |z|^2)
    EXPECT_LT(asymptotic_defect(g_, 8, 32), 0.1);
}

TEST_F(Green, SymmetricUnderLatticeRotation) {
    for (auto& [p, v] : g_.G.values) {
        P2 q{-p.y, p.x};
        if (g_.G.has(q)) ASSERT_NEAR(v.real(), g_.G.at(q).real(), 1e-10);
    }
}

TEST(GreenParams, RejectsTinyBoxes) { EXPECT_THROW(greens_function(4), ConfigError); }

TEST(Cauchy, KernelIsSholoAwayFromTheSource) {
    auto k = cauchy_kernel(32);
    for (auto& [p, r] : sholo_residuals(k.edges))
        if (!(p == P2{0, 0})) ASSERT_LT(r, 1e-12) << p.x << "," << p.y;
    EXPECT_LT(line_deviation(k.edges), 1e-12);
    EXPECT_GT(sholo_residuals(k.edges).at({0, 0}), 0.1);
}

TEST(Cauchy, FarFieldCoefficient) {
    auto k = cauchy_kernel(64);
    cplx c = far_field_coefficient(k, 8, 16);
    EXPECT_NEAR(c.real(), kSqrt2 / (2 * kPi), 0.05 * kSqrt2 / (2 * kPi));
    EXPECT_NEAR(c.imag(), 0, 1e-10);
}

TEST(Cauchy, DbarAtSourceIsFrozen) {
    // independent of the box: it only involves G at the four neighbours, which are 1/4
    for (int R : {16, 32}) EXPECT_NEAR(cauchy_kernel(R).dbar_at_z0, 0.5, 1e-10);
}
