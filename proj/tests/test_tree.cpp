#include <gtest/gtest.h>

#include <set>

#include "fkforge/tree.hpp"

using namespace fkforge;
using namespace fkforge::lattice;
using namespace fkforge::tree;

namespace {

struct Sampled {
    DomainPtr d;
    SquareId root;
    rcmodel::LoopEnsemble e;
};

Sampled sampled(int n, std::uint64_t stream) {
    auto d = build_rect_domain(n, n, 1.0 / n);
    return {d, default_root(*d), rcmodel::loop_representation(d, rcmodel::sample_sw(*d, 100, 5, stream))};
}

}  // namespace

TEST(Tree, BijectionExhaustive) {
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {5, 3}, {4, 4}}) {
        auto d = build_rect_domain(c, r, 1.0 / c);
        ASSERT_LE(d->num_bonds(), 12);
        auto root = default_root(*d);
        long n = 0;
        rcmodel::for_each_config(*d, [&](const rcmodel::BondConfig& cfg, int) {
            auto e = rcmodel::loop_representation(d, cfg);
            e.canonicalize();
            auto t = build_tree(e, root);
            auto back = recover_loops(t);
            back.canonicalize();
            ASSERT_EQ(back, e);
            ASSERT_TRUE(check_spanning(t).empty());
            ASSERT_TRUE(check_target_independence(t).empty());
            ++n;
        });
        EXPECT_EQ(n, 1L << d->num_bonds());
    }
}

TEST(Tree, OneBranchingSquarePerLoopWithFiveArms) {
    auto d = build_rect_domain(4, 4, 0.25);
    auto root = default_root(*d);
    rcmodel::for_each_config(*d, [&](const rcmodel::BondConfig& cfg, int loops) {
        auto t = build_tree(rcmodel::loop_representation(d, cfg), root);
        auto bs = branching_squares(t);
        ASSERT_EQ(int(bs.size()), loops);
        std::set<int> idx;
        for (auto& [q, l] : bs) {
            idx.insert(l);
            if (q != t.root) ASSERT_EQ(arm_count(t, q), 5);
        }
        ASSERT_EQ(int(idx.size()), loops);
    });
}

TEST(Tree, SkeletonAgreesWithFullTree) {
    auto s = sampled(8, 1);
    auto t = build_tree(s.e, s.root);
    auto sk = build_skeleton(s.e, s.root);
    ASSERT_EQ(sk.targets.size(), t.branches.size());
    for (auto& [target, b] : t.branches) EXPECT_EQ(sk.branch(target), b.path);
}

TEST(Tree, BranchesSharePrefixes) {
    auto s = sampled(10, 2);
    auto sk = build_skeleton(s.e, s.root);
    for (EdgeId x : sk.targets) {
        auto p = sk.branch(x);
        ASSERT_EQ(p.front(), sk.e_i);
        ASSERT_EQ(p.back(), x);
        for (std::size_t i = 1; i < p.size(); ++i) ASSERT_EQ(sk.parent[s.d->edge_head(p[i - 1])], p[i - 1]);
    }
}

TEST(Tree, InvalidTargetsAndRoots) {
    auto s = sampled(5, 3);
    auto t = build_tree(s.e, s.root);
    EXPECT_THROW(build_branch(s.e, s.root, -5), Error);
    SquareId interior = -1;
    for (SquareId q = 0; q < s.d->num_squares(); ++q)
        if (s.d->square(q).kind == SquareKind::Interior) interior = q;
    EXPECT_THROW(build_tree(s.e, interior), Error);
}

TEST(Tree, BranchCurvesAreSimple) {
    auto s = sampled(12, 4);
    auto sk = build_skeleton(s.e, s.root);
    for (std::size_t i = 0; i < sk.targets.size(); i += 7) {
        auto c = branch_curve(sk, sk.targets[i]);
        EXPECT_TRUE(loewner::polyline_is_simple(c)) << "target " << sk.targets[i];
    }
}

class Subtrees : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        d_ = build_rect_domain(8, 8, 1.0 / 8);
        auto f = default_f(*d_);
        auto m = d_->edge_midpoint2(f);
        phi_ = loewner::Uniformizer::for_domain(*d_, d_->point_pos(m.x, m.y));
        auto e = rcmodel::loop_representation(d_, rcmodel::sample_sw(*d_, 200, 5));
        sk_ = build_skeleton(e, default_root(*d_));
    }
    static inline DomainPtr d_;
    static inline loewner::Uniformizer phi_;
    static inline TreeSkeleton sk_;
};

TEST_F(Subtrees, WholeDiskGridIsTheCentre) {
    auto s = finite_subtree(sk_, 2.0, phi_);
    EXPECT_EQ(s.grid_points, 1);
    ASSERT_GE(s.targets.size(), 1u);
    // the first target is the one whose image is nearest 0
    double best = 1e9;
    for (EdgeId e : sk_.targets) {
        if (d_->edge_kind(e) != EdgeKind::Medial || sk_.parent[d_->edge_head(e)] != e) continue;
        auto m = d_->edge_midpoint2(e);
        best = std::min(best, std::abs(phi_.clamped(d_->point_pos(m.x, m.y))));
    }
    auto m = d_->edge_midpoint2(s.targets.front());
    EXPECT_DOUBLE_EQ(std::abs(phi_.clamped(d_->point_pos(m.x, m.y))), best);
}

TEST_F(Subtrees, ComponentsEndNarrowerThanEta) {
    for (double eta : {0.5, 0.25}) {
        auto s = finite_subtree(sk_, eta, phi_);
        int grid = 0;
        int half = int(std::floor(1 / eta));
        for (int i = -half; i <= half; ++i)
            for (int j = -half; j <= half; ++j) grid += std::abs(cplx(i * eta, j * eta)) < 1;
        EXPECT_EQ(s.grid_points, grid);
        EXPECT_GE(int(s.targets.size()), 1);
        EXPECT_LE(s.max_component, eta);
        EXPECT_EQ(s.unrefinable, 0);
        std::set<EdgeId> unique(s.targets.begin(), s.targets.end());
        EXPECT_EQ(unique.size(), s.targets.size());
    }
}

TEST_F(Subtrees, TinyEtaHasEmptyGridBalls) { EXPECT_THROW(finite_subtree(sk_, 0.01, phi_), NoLatticePoint); }

TEST_F(Subtrees, BadEta) { EXPECT_THROW(finite_subtree(sk_, 0, phi_), BadParams); }

TEST(Tree, RestrictKeepsChosenBranches) {
    auto s = sampled(5, 6);
    auto t = build_tree(s.e, s.root);
    Subtree sub;
    sub.targets = {t.branches.begin()->first, std::prev(t.branches.end())->first};
    auto r = restrict_tree(t, sub);
    EXPECT_EQ(r.branches.size(), 2u);
    sub.targets.push_back(-1);
    EXPECT_THROW(restrict_tree(t, sub), InvalidTarget);
}
