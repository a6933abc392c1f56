#include <algorithm>
#include <set>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/multi_point.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "fkforge/tree.hpp"

namespace fkforge::tree {

namespace bg = boost::geometry;

std::vector<cplx> branch_curve(const TreeSkeleton& t, EdgeId target) {
    const auto& d = *t.domain;
    auto path = t.branch(target);
    std::vector<cplx> out{d.corner_pos(WiredDomain::edge_tail(path.front()))};
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (d.edge_kind(path[i]) != lattice::EdgeKind::Medial) continue;
        auto m = d.edge_midpoint2(path[i]);
        out.push_back(d.point_pos(m.x, m.y));
    }
    auto m = d.edge_midpoint2(target);
    out.push_back(d.point_pos(m.x, m.y));
    return out;
}

namespace {

using BgPoint = bg::model::d2::point_xy<double>;

class Raster {
public:
    Raster(int n) : n_(n), h_(2.0 / n), cell_(std::size_t(n) * n, 0) {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (std::abs(center(i, j)) >= 1) cell_[idx(i, j)] = 1;
    }

    cplx center(int i, int j) const { return {-1 + (i + 0.5) * h_, -1 + (j + 0.5) * h_}; }
    int idx(int i, int j) const { return j * n_ + i; }
    int pixel(cplx z) const {
        int i = std::clamp(int((z.real() + 1) / h_), 0, n_ - 1);
        int j = std::clamp(int((z.imag() + 1) / h_), 0, n_ - 1);
        return idx(i, j);
    }

    void draw(cplx a, cplx b) {
        int steps = 1 + int(3 * std::abs(b - a) / h_);
        for (int k = 0; k <= steps; ++k) cell_[pixel(a + (b - a) * (double(k) / steps))] = 1;
    }

    // 4-connected components of the free pixels; label -1 on blocked pixels
    int label(std::vector<int>& lab) const {
        lab.assign(cell_.size(), -1);
        int count = 0;
        std::vector<int> stack;
        for (std::size_t s = 0; s < cell_.size(); ++s) {
            if (cell_[s] || lab[s] >= 0) continue;
            lab[s] = count;
            stack.push_back(int(s));
            while (!stack.empty()) {
                int p = stack.back();
                stack.pop_back();
                int i = p % n_, j = p / n_;
                const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int a = i + di[k], b = j + dj[k];
                    if (a < 0 || b < 0 || a >= n_ || b >= n_) continue;
                    int q = idx(a, b);
                    if (cell_[q] || lab[q] >= 0) continue;
                    lab[q] = count;
                    stack.push_back(q);
                }
            }
            ++count;
        }
        return count;
    }

    int size() const { return n_; }

private:
    int n_;
    double h_;
    std::vector<char> cell_;
};

// two farthest points of a set, through its convex hull
std::pair<cplx, cplx> diameter(const std::vector<cplx>& pts) {
    bg::model::multi_point<BgPoint> mp;
    for (auto z : pts) bg::append(mp, BgPoint(z.real(), z.imag()));
    bg::model::polygon<BgPoint> hull;
    bg::convex_hull(mp, hull);
    std::vector<cplx> h;
    for (auto& p : hull.outer()) h.push_back({p.x(), p.y()});
    if (h.empty()) h = pts;
    std::pair<cplx, cplx> best{h.front(), h.front()};
    double dmax = -1;
    for (std::size_t a = 0; a < h.size(); ++a)
        for (std::size_t b = a + 1; b < h.size(); ++b)
            if (std::abs(h[a] - h[b]) > dmax) dmax = std::abs(h[a] - h[b]), best = {h[a], h[b]};
    return best;
}

}  // namespace

Subtree finite_subtree(const TreeSkeleton& t, double eta, const loewner::Uniformizer& phi,
                       const SubtreeOptions& opt) {
    if (!(eta > 0)) throw BadParams("eta must be positive");
    const auto& d = *t.domain;

    // images of the admissible targets
    std::vector<EdgeId> cand;
    std::vector<cplx> img;
    for (EdgeId e : t.targets) {
        if (d.edge_kind(e) != lattice::EdgeKind::Medial) continue;
        if (t.parent[d.edge_head(e)] != e) continue;
        auto m = d.edge_midpoint2(e);
        cand.push_back(e);
        img.push_back(phi.clamped(d.point_pos(m.x, m.y)));
    }
    if (cand.empty()) throw NoLatticePoint("tree has no targets");

    Subtree out;
    std::set<EdgeId> chosen;
    auto add = [&](EdgeId e) {
        if (chosen.insert(e).second) out.targets.push_back(e);
    };

    int half = int(std::floor(1 / eta));
    for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j) {
            cplx g(i * eta, j * eta);
            if (std::abs(g) >= 1) continue;
            ++out.grid_points;
            std::size_t best = 0;
            for (std::size_t k = 1; k < img.size(); ++k)
                if (std::abs(img[k] - g) < std::abs(img[best] - g)) best = k;
            if (std::abs(img[best] - g) > eta / 2)
                throw NoLatticePoint("no lattice point within eta/2 of grid point (" + std::to_string(i) + ", " +
                                     std::to_string(j) + ")");
            add(cand[best]);
        }

    std::vector<cplx> corner_img;
    for (CornerId c = 0; c < d.num_corners(); ++c)
        if (t.parent[c] >= 0) corner_img.push_back(phi.clamped(d.corner_pos(c)));

    Raster raster(opt.raster);
    std::set<EdgeId> drawn;
    cplx root_img = phi.clamped(d.corner_pos(WiredDomain::edge_tail(t.e_i)));
    auto draw_branch = [&](EdgeId target) {
        // walk up until the part already on the raster
        std::vector<EdgeId> fresh;
        CornerId h = d.edge_head(target);
        while (true) {
            EdgeId x = t.parent[h];
            if (x < 0 || drawn.count(x)) break;
            fresh.push_back(x);
            drawn.insert(x);
            if (x == t.e_i) break;
            h = WiredDomain::edge_tail(x);
        }
        auto pos = [&](EdgeId x, bool head) {
            CornerId c = head ? d.edge_head(x) : WiredDomain::edge_tail(x);
            return phi.clamped(d.corner_pos(c));
        };
        for (EdgeId x : fresh) raster.draw(pos(x, false), pos(x, true));
    };
    for (EdgeId e : out.targets) draw_branch(e);

    std::vector<int> lab;
    while (true) {
        int nc = raster.label(lab);
        // a component is as wide as the lattice it holds; slivers between the
        // outermost corners and the circle hold none
        std::vector<std::vector<cplx>> comp(nc);
        for (cplx z : corner_img) {
            int l = lab[raster.pixel(z)];
            if (l >= 0) comp[l].push_back(z);
        }
        std::vector<std::vector<std::size_t>> members(nc);
        for (std::size_t k = 0; k < cand.size(); ++k) {
            int l = lab[raster.pixel(img[k])];
            if (l >= 0 && !chosen.count(cand[k])) members[l].push_back(k);
        }
        out.max_component = 0;
        out.unrefinable = 0;
        std::vector<EdgeId> round;
        for (int l = 0; l < nc; ++l) {
            if (comp[l].size() < 2) continue;
            auto [p, q] = diameter(comp[l]);
            double w = std::abs(p - q);
            out.max_component = std::max(out.max_component, w);
            if (w <= eta) continue;
            if (members[l].empty()) {
                ++out.unrefinable;
                continue;
            }
            if (std::abs(q - root_img) < std::abs(p - root_img)) std::swap(p, q);
            cplx aim = p + 0.875 * (q - p);
            std::size_t best = members[l].front();
            for (auto k : members[l])
                if (std::abs(img[k] - aim) < std::abs(img[best] - aim)) best = k;
            round.push_back(cand[best]);
        }
        if (round.empty() || out.refinements >= opt.max_refinements) break;
        for (EdgeId e : round) {
            add(e);
            draw_branch(e);
            ++out.refinements;
        }
    }
    return out;
}

ExplorationTree restrict_tree(const ExplorationTree& t, const Subtree& s) {
    ExplorationTree r = t;
    r.branches.clear();
    for (EdgeId e : s.targets) {
        auto it = t.branches.find(e);
        if (it == t.branches.end()) throw InvalidTarget("subtree target missing from the tree");
        r.branches.insert(*it);
    }
    return r;
}

}  // namespace fkforge::tree
