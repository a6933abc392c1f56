#include <gtest/gtest.h>

#include <set>

#include "fkforge/lattice.hpp"

using namespace fkforge;
using namespace fkforge::lattice;

namespace {

// interior primal edges of a cols x rows block of black faces with a wired boundary
int expected_bonds(int c, int r) { return (c - 1) * (r - 2) + (c - 2) * (r - 1); }

}  // namespace

TEST(Lattice, RectDomainBondCount) {
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {4, 4}, {5, 4}, {5, 5}, {8, 6}}) {
        auto d = build_rect_domain(c, r, 1.0 / c);
        EXPECT_EQ(d->num_bonds(), expected_bonds(c, r)) << c << "x" << r;
        EXPECT_TRUE(validate_admissible(*d).empty()) << c << "x" << r;
    }
}

TEST(Lattice, BoundaryIsAClosedMedialPath) {
    auto d = build_rect_domain(6, 5, 0.2);
    const auto& b = d->boundary();
    ASSERT_FALSE(b.empty());
    for (std::size_t i = 0; i < b.size(); ++i) {
        EdgeId e = b[i], next = b[(i + 1) % b.size()];
        EXPECT_EQ(d->edge_head(e), WiredDomain::edge_tail(next));
        EXPECT_TRUE(d->corner_on_boundary(WiredDomain::edge_tail(e)));
    }
}

TEST(Lattice, CornerAndEdgeIds) {
    auto d = build_rect_domain(4, 4, 0.25);
    for (CornerId c = 0; c < d->num_corners(); ++c) {
        EXPECT_EQ(4 * WiredDomain::corner_square(c) + int(WiredDomain::corner_dir(c)), c);
        EXPECT_EQ(WiredDomain::edge_tail(d->medial_edge(c)), c);
    }
    for (EdgeId e : d->interior_medial_edges()) {
        EXPECT_EQ(d->edge_kind(e), EdgeKind::Medial);
        EXPECT_TRUE(d->is_interior_medial(e));
        auto m = d->edge_midpoint2(e);
        EXPECT_NE((m.x + m.y) % 2, 0);  // odd-even or even-odd
    }
}

TEST(Lattice, TextRoundTrip) {
    auto d = build_rect_domain(5, 3, 0.2);
    auto back = parse_domain_text(d->to_text());
    EXPECT_EQ(back->hash(), d->hash());
    EXPECT_EQ(back->num_bonds(), d->num_bonds());
}

TEST(Lattice, ParseRejectsGarbage) { EXPECT_THROW(parse_domain_text("mesh=0.5\nBXB\n"), Error); }

TEST(Lattice, GridToFaceIsBlack) {
    for (int c = 0; c < 5; ++c)
        for (int r = 0; r < 5; ++r) EXPECT_TRUE(is_black_face(grid_to_face(c, r)));
}

TEST(Lattice, DobrushinMarking) {
    for (int n : {3, 4, 6}) {
        auto d = build_rect_domain(n, n, 1.0 / n);
        auto root = default_root(*d);
        auto f = default_f(*d);
        auto dd = mark_dobrushin(d, root, f);
        EXPECT_EQ(dd.f, f);
        EXPECT_EQ(d->edge_angle8(f), 0);
        EXPECT_TRUE(d->corner_on_boundary(dd.a()));
        EXPECT_TRUE(d->corner_on_boundary(dd.b()));
        EXPECT_NE(dd.a(), dd.b());
        auto m = d->edge_midpoint2(f);
        EXPECT_NEAR(std::abs(dd.w - d->point_pos(m.x, m.y)), 0, 1e-15);
    }
}

TEST(Lattice, NearestEastEdge) {
    auto d = build_rect_domain(6, 6, 1.0 / 6);
    auto f = default_f(*d);
    auto m = d->edge_midpoint2(f);
    EXPECT_EQ(nearest_east_edge(*d, d->point_pos(m.x, m.y)), f);
}
