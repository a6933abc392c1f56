#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "fkforge/rcmodel.hpp"

using namespace fkforge;
using namespace fkforge::lattice;
using namespace fkforge::rcmodel;

namespace {

// Independent loop count: with the wired faces merged, Euler's formula gives
// loops = 2 * clusters + open edges + const for a fixed domain.
struct Euler {
    std::vector<std::array<int, 2>> ends;
    int faces = 0;
    std::vector<int> wired;

    explicit Euler(const WiredDomain& d) {
        std::map<P2, int> index;
        auto id = [&](P2 f) {
            auto [it, fresh] = index.emplace(f, int(index.size()));
            return it->second;
        };
        for (SquareId s : d.bond_squares()) {
            P2 c = d.square(s).center;
            P2 a = d.square(s).type_a ? P2{c.x - 1, c.y - 1} : P2{c.x - 1, c.y + 1};
            P2 b = d.square(s).type_a ? P2{c.x + 1, c.y + 1} : P2{c.x + 1, c.y - 1};
            ends.push_back({id(a), id(b)});
        }
        for (auto& [f, i] : index) {
            bool boundary = false;
            for (P2 q : kQuadVec) {
                SquareId s = d.square_at(f + q);
                if (s < 0 || d.square(s).kind != SquareKind::Interior) boundary = true;
            }
            if (boundary) wired.push_back(i);
        }
        faces = int(index.size());
    }

    int value(const BondConfig& c) const {
        std::vector<int> p(faces);
        std::iota(p.begin(), p.end(), 0);
        std::function<int(int)> find = [&](int x) { return p[x] == x ? x : p[x] = find(p[x]); };
        for (std::size_t i = 1; i < wired.size(); ++i) p[find(wired[i])] = find(wired[0]);
        int open = 0;
        for (std::size_t b = 0; b < ends.size(); ++b)
            if (c[b]) ++open, p[find(ends[b][0])] = find(ends[b][1]);
        int k = 0;
        for (int i = 0; i < faces; ++i) k += find(i) == i;
        return 2 * k + open;
    }
};

double tv(const std::map<int, double>& a, const std::map<int, double>& b) {
    std::set<int> keys;
    for (auto& [k, v] : a) keys.insert(k);
    for (auto& [k, v] : b) keys.insert(k);
    double s = 0;
    for (int k : keys) s += std::abs((a.count(k) ? a.at(k) : 0) - (b.count(k) ? b.at(k) : 0));
    return s / 2;
}

}  // namespace

TEST(RcModel, LoopCountMatchesEulerFormula) {
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {4, 4}}) {
        auto d = build_rect_domain(c, r, 1.0 / c);
        Euler eu(*d);
        std::set<int> offsets;
        for_each_config(*d, [&](const BondConfig& cfg, int loops) {
            offsets.insert(loops - eu.value(cfg));
            EXPECT_EQ(loops, count_loops(loop_representation(d, cfg)));
        });
        EXPECT_EQ(offsets.size(), 1u) << c << "x" << r;
    }
}

TEST(RcModel, MeasureIsNormalized) {
    auto d = build_rect_domain(4, 4, 0.25);
    auto dist = loop_count_distribution(*d);
    double s = 0;
    for (auto& [k, p] : dist) s += p;
    EXPECT_NEAR(s, 1, 1e-12);
    auto m = enumerate_measure(*d);
    EXPECT_EQ(m.size(), std::size_t(1) << d->num_bonds());
}

TEST(RcModel, EnumerationGuard) {
    auto d = build_rect_domain(7, 7, 1.0 / 7);
    ASSERT_GT(d->num_bonds(), kEnumerationGuard);
    EXPECT_THROW(loop_count_distribution(*d), TooLarge);
}

TEST(RcModel, LoopsAreDcnilAndInvertible) {
    auto d = build_rect_domain(6, 5, 0.2);
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto cfg = sample_sw(*d, 10, 3, s);
        auto e = loop_representation(d, cfg);
        EXPECT_TRUE(validate_dcnil(e).empty());
        EXPECT_EQ(config_from_loops(e), cfg);
    }
}

TEST(RcModel, FlipDeltaIsPlusMinusOne) {
    auto d = build_rect_domain(5, 5, 0.2);
    LoopState st(*d, sample_sw(*d, 5, 1));
    for (int b = 0; b < d->num_bonds(); ++b) {
        int before = st.count_loops(), delta = st.flip_delta(b);
        EXPECT_TRUE(delta == 1 || delta == -1);
        st.flip(b);
        EXPECT_EQ(st.count_loops(), before + delta);
    }
}

TEST(RcModel, MetropolisAcceptanceValues) {
    auto d = build_rect_domain(4, 3, 0.25);
    MetropolisChain ch(*d, 7);
    for (int i = 0; i < 2000; ++i) ch.sweep();
    auto vals = ch.stats().acceptance_values;
    std::sort(vals.begin(), vals.end());
    ASSERT_EQ(vals.size(), 2u);
    EXPECT_DOUBLE_EQ(vals[0], 1 / kSqrt2);
    EXPECT_DOUBLE_EQ(vals[1], 1.0);
}

TEST(RcModel, SamplersMatchEnumeration) {
    auto d = build_rect_domain(4, 3, 0.25);
    auto exact = loop_count_distribution(*d);
    std::map<int, double> mc, sw;
    MetropolisChain ch(*d, 11);
    SwendsenWangChain sc(*d, 12);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        ch.sweep();
        sc.sweep();
        mc[ch.loops()] += 1.0 / n;
        sw[count_loops(loop_representation(d, sc.config()))] += 1.0 / n;
    }
    EXPECT_LT(tv(mc, exact), 0.02);
    EXPECT_LT(tv(sw, exact), 0.02);
}

TEST(RcModel, StreamsAreReproducible) {
    auto d = build_rect_domain(6, 6, 1.0 / 6);
    EXPECT_EQ(sample_sw(*d, 20, 5, 3), sample_sw(*d, 20, 5, 3));
    EXPECT_NE(sample_sw(*d, 20, 5, 3), sample_sw(*d, 20, 5, 4));
    EXPECT_EQ(sample_mc(*d, 20, 9), sample_mc(*d, 20, 9));
}

TEST(RcModel, LoopFileRoundTrip) {
    auto d = build_rect_domain(5, 4, 0.2);
    auto e = loop_representation(d, sample_sw(*d, 10, 2));
    e.canonicalize();
    auto path = (std::filesystem::temp_directory_path() / "fkforge_loops_test.txt").string();
    write_loops(e, 2, path);
    auto back = read_loops(d, path);
    back.canonicalize();
    EXPECT_EQ(back, e);
    auto cpath = path + ".cfg";
    auto cfg = sample_sw(*d, 10, 4);
    write_config(*d, cfg, cpath);
    EXPECT_EQ(read_config(*d, cpath), cfg);
    std::remove(path.c_str());
    std::remove(cpath.c_str());
}
