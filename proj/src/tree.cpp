#include "fkforge/tree.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>

#include <json.hpp>

namespace fkforge::tree {

using lattice::DobrushinDomain;

LoopIndex::LoopIndex(const LoopEnsemble& e) {
    const auto& d = *e.domain;
    succ.assign(d.num_corners(), -1);
    loop_of.assign(d.num_corners(), -1);
    for (std::size_t li = 0; li < e.loops.size(); ++li)
        for (EdgeId x : e.loops[li]) {
            succ[WiredDomain::edge_tail(x)] = d.edge_head(x);
            loop_of[WiredDomain::edge_tail(x)] = int(li);
        }
}

namespace {

// Grows the branches towards a group of targets at once. Branches share their
// prefix until the group splits; each split is explored depth first with the
// visited set restored afterwards, so every branch sees exactly the slit it
// would see on its own.
class Explorer {
public:
    struct Hooks {
        std::function<void(EdgeId, bool)> on_step;  // edge pushed, is a switch
        std::function<void(EdgeId)> on_target;      // target reached (path() is its branch)
    };

    Explorer(const LoopEnsemble& e, const DobrushinDomain& dd, Hooks hooks)
        : d_(*e.domain), idx_(e), dd_(dd), hooks_(std::move(hooks)) {
        int nc = d_.num_corners();
        visited_.assign(nc, 0);
        stamp_a_.assign(nc, 0);
        stamp_b_.assign(nc, 0);
        target_at_.assign(nc, -1);
        nb_ = WiredDomain::edge_tail(dd.e_o);
    }

    void run(const std::vector<EdgeId>& targets) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
            EdgeId t = targets[i];
            if (!d_.is_interior_medial(t)) throw InvalidTarget("target " + std::to_string(t) + " is not inside the domain");
            target_at_[WiredDomain::edge_tail(t)] = int(i);
        }
        CornerId a0 = WiredDomain::edge_tail(dd_.e_i);
        CornerId a1 = d_.edge_head(dd_.e_i);
        visited_[a0] = 1;
        mark(a1);
        path_.push_back(dd_.e_i);
        loops_.push_back(idx_.loop_of[a1]);
        squares_.push_back(dd_.root);
        steps_.push_back(0);
        if (hooks_.on_step) hooks_.on_step(dd_.e_i, false);
        std::vector<EdgeId> group = targets;
        explore(a1, group);
    }

    const std::vector<EdgeId>& path() const { return path_; }
    const std::vector<int>& loops() const { return loops_; }
    const std::vector<SquareId>& squares() const { return squares_; }
    const std::vector<int>& steps() const { return steps_; }
    int ambiguities() const { return ambiguities_; }

private:
    bool avail(CornerId c) const { return c >= 0 && d_.corner_interior(c) && !visited_[c]; }
    void mark(CornerId c) {
        visited_[c] = 1;
        log_.push_back(c);
    }

    struct Saved {
        std::size_t log, path, loops;
    };
    Saved save() const { return {log_.size(), path_.size(), loops_.size()}; }
    void restore(const Saved& s) {
        while (log_.size() > s.log) {
            visited_[log_.back()] = 0;
            log_.pop_back();
        }
        path_.resize(s.path);
        loops_.resize(s.loops);
        squares_.resize(s.loops);
        steps_.resize(s.loops);
    }

    void step(EdgeId e, bool sw, CornerId head) {
        path_.push_back(e);
        mark(head);
        if (sw) {
            loops_.push_back(idx_.loop_of[head]);
            squares_.push_back(WiredDomain::corner_square(head));
            steps_.push_back(int(path_.size()) - 1);
        }
        if (hooks_.on_step) hooks_.on_step(e, sw);
    }

    // Removing c1 from the free graph: returns false if nothing can split,
    // otherwise fills `side` with the stamp of the exhausted component.
    // c_other and m1 are the free neighbours of c1.
    bool splits(CornerId c1, CornerId c_other, CornerId m1, int& exhausted) {
        if (!avail(c_other) || !avail(m1)) return false;
        // the face around c_other -> c1 -> m1: if it is entirely free, the two
        // neighbours stay connected around it
        SquareId q = WiredDomain::corner_square(c1);
        int dc = WiredDomain::corner_dir(c_other), d1 = WiredDomain::corner_dir(c1);
        int quad = (d1 == (dc + 1) % 4) ? dc : d1;
        auto face = d_.square(q).center + lattice::kQuadVec[quad];
        bool free_face = true;
        for (CornerId x : d_.face_corners(face))
            if (x != c1 && !avail(x)) free_face = false;
        if (free_face) return false;

        visited_[c1] = 1;
        ++epoch_;
        std::vector<CornerId> qa{c_other}, qb{m1};
        std::size_t ia = 0, ib = 0;
        stamp_a_[c_other] = epoch_;
        stamp_b_[m1] = epoch_;
        bool met = false;
        auto expand = [&](std::vector<CornerId>& qu, std::size_t& i, std::vector<int>& mine,
                          std::vector<int>& other) {
            CornerId x = qu[i++];
            CornerId nbrs[3];
            int dirx = WiredDomain::corner_dir(x);
            SquareId sx = WiredDomain::corner_square(x);
            nbrs[0] = d_.medial_neighbor(x);
            nbrs[1] = 4 * sx + (dirx + 1) % 4;
            nbrs[2] = 4 * sx + (dirx + 3) % 4;
            for (CornerId y : nbrs) {
                if (!avail(y) || mine[y] == epoch_) continue;
                if (other[y] == epoch_) {
                    met = true;
                    return;
                }
                mine[y] = epoch_;
                qu.push_back(y);
            }
        };
        while (!met) {
            if (ia == qa.size()) {
                exhausted = 0;
                break;
            }
            expand(qa, ia, stamp_a_, stamp_b_);
            if (met) break;
            if (ib == qb.size()) {
                exhausted = 1;
                break;
            }
            expand(qb, ib, stamp_b_, stamp_a_);
        }
        visited_[c1] = 0;
        return !met;
    }

    bool in_side(CornerId x, int side) const { return (side == 0 ? stamp_a_ : stamp_b_)[x] == epoch_; }

    void explore(CornerId tip, std::vector<EdgeId> group) {
        while (!group.empty()) {
            if (!d_.incoming(tip)) {
                EdgeId e = d_.medial_edge(tip);
                CornerId m = d_.medial_neighbor(tip);
                if (!avail(m)) throw MalformedTree("exploration stuck at vertex " + std::to_string(tip));
                step(e, false, m);
                auto it = std::find(group.begin(), group.end(), e);
                if (it != group.end()) {
                    group.erase(it);
                    if (hooks_.on_target) hooks_.on_target(e);
                }
                tip = m;
                continue;
            }
            CornerId c = tip;
            SquareId q = WiredDomain::corner_square(c);
            CornerId c1 = idx_.succ[c];
            int dc = WiredDomain::corner_dir(c);
            CornerId o1 = 4 * q + (dc + 1) % 4, o2 = 4 * q + (dc + 3) % 4;
            CornerId c2 = (c1 == o1) ? o2 : o1;
            if (c1 != o1 && c1 != o2) throw MalformedTree("loop does not continue inside square " + std::to_string(q));
            bool av1 = avail(c1), av2 = avail(c2);
            if (!av1 && !av2) throw MalformedTree("exploration stuck at vertex " + std::to_string(c));
            if (!av1) {
                step(d_.side_edge(c, c2), true, c2);
                tip = c2;
                continue;
            }
            if (!av2) {
                step(d_.side_edge(c, c1), false, c1);
                tip = c1;
                continue;
            }
            CornerId c_other = 4 * q + (dc + 2) % 4;
            int exhausted = -1;
            if (!splits(c1, c_other, d_.medial_neighbor(c1), exhausted)) {
                step(d_.side_edge(c, c1), false, c1);
                tip = c1;
                continue;
            }
            bool nb_in = in_side(nb_, exhausted);
            // the component of b should be the one continuing along the loop
            if (nb_in != (exhausted == 1)) ++ambiguities_;
            std::vector<EdgeId> follow, other;
            for (EdgeId t : group) {
                CornerId tt = WiredDomain::edge_tail(t);
                if (tt == c1 || in_side(tt, exhausted) == nb_in)
                    follow.push_back(t);
                else
                    other.push_back(t);
            }
            if (!other.empty()) {
                auto s = save();
                step(d_.side_edge(c, c2), true, c2);
                explore(c2, other);
                restore(s);
            }
            group = follow;
            if (group.empty()) return;
            step(d_.side_edge(c, c1), false, c1);
            tip = c1;
        }
    }

    const WiredDomain& d_;
    LoopIndex idx_;
    const DobrushinDomain& dd_;
    Hooks hooks_;
    CornerId nb_;
    std::vector<char> visited_;
    std::vector<CornerId> log_;
    std::vector<int> stamp_a_, stamp_b_;
    int epoch_ = 0;
    std::vector<int> target_at_;
    std::vector<EdgeId> path_;
    std::vector<int> loops_;
    std::vector<SquareId> squares_;
    std::vector<int> steps_;
    int ambiguities_ = 0;
};

Branch snapshot(const Explorer& ex, EdgeId target) {
    Branch b;
    b.target = target;
    b.path = ex.path();
    b.loops = ex.loops();
    b.squares = ex.squares();
    b.switch_steps = ex.steps();
    return b;
}

}  // namespace

Branch build_branch(const LoopEnsemble& e, SquareId root, EdgeId target) {
    auto dd = lattice::mark_dobrushin(e.domain, root);
    Branch out;
    Explorer ex(e, dd, {nullptr, [&](EdgeId t) { out = snapshot(ex, t); }});
    ex.run({target});
    return out;
}

ExplorationTree build_tree(const LoopEnsemble& e, SquareId root) {
    auto dd = lattice::mark_dobrushin(e.domain, root);
    ExplorationTree t;
    t.domain = e.domain;
    t.root = root;
    t.e_i = dd.e_i;
    t.e_o = dd.e_o;
    t.cut = dd.cut;
    t.ensemble_hash = e.hash();
    Explorer ex(e, dd, {nullptr, [&](EdgeId tg) { t.branches[tg] = snapshot(ex, tg); }});
    ex.run(e.domain->interior_medial_edges());
    t.ambiguities = ex.ambiguities();
    return t;
}

TreeSkeleton build_skeleton(const LoopEnsemble& e, SquareId root, const std::vector<EdgeId>& targets) {
    auto dd = lattice::mark_dobrushin(e.domain, root);
    TreeSkeleton s;
    s.domain = e.domain;
    s.root = root;
    s.e_i = dd.e_i;
    s.parent.assign(e.domain->num_corners(), -1);
    s.targets = targets.empty() ? e.domain->interior_medial_edges() : targets;
    Explorer ex(e, dd, {[&](EdgeId x, bool) {
                            CornerId h = e.domain->edge_head(x);
                            if (s.parent[h] >= 0 && s.parent[h] != x)
                                throw MalformedTree("vertex reached by two tree edges");
                            s.parent[h] = x;
                        },
                        nullptr});
    ex.run(s.targets);
    return s;
}

std::vector<EdgeId> TreeSkeleton::branch(EdgeId target) const {
    std::vector<EdgeId> out;
    CornerId h = domain->edge_head(target);
    if (parent[h] != target) throw InvalidTarget("target not in tree");
    while (true) {
        EdgeId x = parent[h];
        out.push_back(x);
        if (x == e_i) break;
        h = WiredDomain::edge_tail(x);
        if (parent[h] < 0) throw MalformedTree("broken parent chain");
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<CornerId> TreeSkeleton::branch_corners(EdgeId target) const {
    auto p = branch(target);
    std::vector<CornerId> out{WiredDomain::edge_tail(p.front())};
    for (EdgeId x : p) out.push_back(domain->edge_head(x));
    return out;
}

namespace {

// tree edges keyed by head corner, with a conflict report
struct EdgeUnion {
    std::map<CornerId, EdgeId> parent;
    std::map<CornerId, EdgeId> owner;  // a branch target reaching the corner
};

const Branch* branch_into(const ExplorationTree& t, CornerId c) {
    for (auto& [tg, b] : t.branches)
        if (t.domain->edge_head(tg) == c) return &b;
    return nullptr;
}

std::vector<EdgeId> closed_loop(const ExplorationTree& t, const Branch& b, SquareId q, EdgeId closing) {
    const auto& d = *t.domain;
    // keep the part after the first exit from q
    std::size_t k = 0;
    while (k < b.path.size() && WiredDomain::corner_square(WiredDomain::edge_tail(b.path[k])) != q) ++k;
    while (k < b.path.size() && WiredDomain::corner_square(d.edge_head(b.path[k])) == q) ++k;
    if (k == 0 || k > b.path.size()) throw MalformedTree("branch does not leave square " + std::to_string(q));
    std::vector<EdgeId> loop(b.path.begin() + k, b.path.end());
    loop.push_back(closing);
    return loop;
}

}  // namespace

LoopEnsemble recover_loops(const ExplorationTree& t) {
    const auto& d = *t.domain;
    LoopEnsemble out;
    out.domain = t.domain;
    std::set<EdgeId> edges;
    for (auto& [tg, b] : t.branches) edges.insert(b.path.begin(), b.path.end());

    // root loop: branch into the tail of e_o, closed by the cut side
    CornerId nb = WiredDomain::edge_tail(t.e_o);
    const Branch* rb = branch_into(t, nb);
    if (!rb) throw MalformedTree("no branch reaches the root out-vertex");
    {
        std::vector<EdgeId> loop(rb->path.begin() + 1, rb->path.end());
        loop.push_back(t.cut);
        out.loops.push_back(loop);
    }
    for (SquareId q = 0; q < d.num_squares(); ++q) {
        if (q == t.root) continue;
        for (int k = 0; k < 4; ++k) {
            CornerId c = 4 * q + k;
            if (!d.incoming(c)) continue;
            EdgeId s0 = 2 * c, s1 = 2 * c + 1;
            if (!edges.count(s0) || !edges.count(s1)) continue;
            CornerId cp = 4 * q + (k + 2) % 4;
            const Branch* b2 = branch_into(t, cp);
            if (!b2) throw MalformedTree("branching square " + std::to_string(q) + " lacks the opposite incoming edge");
            // the closing side joins c' to the vertex where b2 left the square
            std::size_t j = 0;
            while (j < b2->path.size() && WiredDomain::corner_square(WiredDomain::edge_tail(b2->path[j])) != q) ++j;
            if (j == b2->path.size()) throw MalformedTree("branch does not cross square " + std::to_string(q));
            CornerId exit = d.edge_head(b2->path[j]);
            EdgeId closing = d.side_edge(cp, exit);
            if (closing < 0) throw MalformedTree("no closing side at square " + std::to_string(q));
            out.loops.push_back(closed_loop(t, *b2, q, closing));
        }
    }
    out.canonicalize();
    return out;
}

std::map<SquareId, int> branching_squares(const ExplorationTree& t) {
    auto loops = recover_loops(t);
    const auto& d = *t.domain;
    std::set<EdgeId> edges;
    for (auto& [tg, b] : t.branches) edges.insert(b.path.begin(), b.path.end());
    auto loop_index_of = [&](EdgeId x) {
        for (std::size_t i = 0; i < loops.loops.size(); ++i)
            if (std::find(loops.loops[i].begin(), loops.loops[i].end(), x) != loops.loops[i].end()) return int(i);
        return -1;
    };
    std::map<SquareId, int> out;
    out[t.root] = loop_index_of(t.cut);
    for (SquareId q = 0; q < d.num_squares(); ++q) {
        if (q == t.root) continue;
        for (int k = 0; k < 4; ++k) {
            CornerId c = 4 * q + k;
            if (!d.incoming(c) || !edges.count(2 * c) || !edges.count(2 * c + 1)) continue;
            CornerId cp = 4 * q + (k + 2) % 4;
            out[q] = loop_index_of(2 * d.medial_neighbor(cp) == -2 ? -1 : [&] {
                for (auto& [tg, b] : t.branches)
                    if (d.edge_head(tg) == cp) return tg;
                return EdgeId(-1);
            }());
        }
    }
    return out;
}

int arm_count(const ExplorationTree& t, SquareId q) {
    const auto& d = *t.domain;
    std::set<EdgeId> edges;
    for (auto& [tg, b] : t.branches) edges.insert(b.path.begin(), b.path.end());
    int n = 0;
    EdgeId arrival = -1;
    for (int k = 0; k < 4; ++k) {
        CornerId c = 4 * q + k;
        for (int j = 0; j < 2; ++j)
            if (d.edge_exists(2 * c + j) && edges.count(2 * c + j)) ++n;
        if (d.incoming(c) && edges.count(2 * c) && edges.count(2 * c + 1)) {
            CornerId m = d.medial_neighbor(c);
            arrival = m >= 0 ? d.medial_edge(m) : -1;
        }
        // edges arriving at the square
        CornerId m = d.medial_neighbor(c);
        if (d.incoming(c) && m >= 0 && edges.count(d.medial_edge(m))) ++n;
    }
    return arrival >= 0 ? n - 1 : n;
}

std::vector<Violation> check_spanning(const ExplorationTree& t) {
    const auto& d = *t.domain;
    std::vector<Violation> out;
    std::map<CornerId, EdgeId> parent;
    std::set<EdgeId> edges;
    CornerId root = WiredDomain::edge_tail(t.e_i);
    for (auto& [tg, b] : t.branches) {
        if (b.path.empty() || b.path.front() != t.e_i || b.path.back() != tg) {
            out.push_back({"malformed-branch", "branch to " + std::to_string(tg)});
            continue;
        }
        std::set<CornerId> seen{root};
        for (std::size_t k = 0; k < b.path.size(); ++k) {
            EdgeId x = b.path[k];
            if (!d.edge_exists(x) || (k && d.edge_head(b.path[k - 1]) != WiredDomain::edge_tail(x))) {
                out.push_back({"malformed-branch", "branch to " + std::to_string(tg) + " at edge " + std::to_string(x)});
                break;
            }
            CornerId h = d.edge_head(x);
            if (!seen.insert(h).second)
                out.push_back({"branch-not-simple", "branch to " + std::to_string(tg) + " revisits " + std::to_string(h)});
            edges.insert(x);
            auto [it, fresh] = parent.emplace(h, x);
            if (!fresh && it->second != x)
                out.push_back({"not-a-tree", "vertex " + std::to_string(h) + " has two parent edges"});
        }
    }
    std::size_t nv = 1;
    for (CornerId c = 0; c < d.num_corners(); ++c) {
        if (!d.corner_interior(c)) continue;
        ++nv;
        if (!parent.count(c)) {
            out.push_back({"not-spanning", "vertex " + std::to_string(c) + " not reached"});
            break;
        }
    }
    if (edges.size() + 1 != nv)
        out.push_back({"edge-count", std::to_string(edges.size()) + " edges for " + std::to_string(nv) + " vertices"});
    if (t.branches.size() != d.interior_medial_edges().size())
        out.push_back({"branch-count", std::to_string(t.branches.size()) + " branches"});
    return out;
}

std::vector<Violation> check_target_independence(const ExplorationTree& t) {
    const auto& d = *t.domain;
    std::vector<Violation> out;
    auto pair_name = [](EdgeId a, EdgeId b) { return "(" + std::to_string(a) + "," + std::to_string(b) + ")"; };

    // prefixes: a corner must be entered by the same edge on every branch
    std::map<CornerId, std::pair<EdgeId, EdgeId>> entered;  // corner -> (edge, target)
    // switch records attached to tree edges
    std::map<EdgeId, std::pair<int, SquareId>> switch_at;
    std::map<EdgeId, EdgeId> switch_owner;
    std::map<CornerId, std::map<EdgeId, std::vector<EdgeId>>> children;  // corner -> out edge -> targets
    for (auto& [tg, b] : t.branches) {
        for (EdgeId x : b.path) {
            CornerId h = d.edge_head(x);
            auto [it, fresh] = entered.emplace(h, std::make_pair(x, tg));
            if (!fresh && it->second.first != x) {
                out.push_back({"prefix-mismatch", "targets " + pair_name(it->second.second, tg) + " reach vertex " +
                                                      std::to_string(h) + " differently"});
            }
            children[WiredDomain::edge_tail(x)][x].push_back(tg);
        }
        for (std::size_t s = 1; s < b.switch_steps.size(); ++s) {
            EdgeId x = b.path[b.switch_steps[s]];
            auto rec = std::make_pair(b.loops[s], b.squares[s]);
            auto [it, fresh] = switch_at.emplace(x, rec);
            if (fresh)
                switch_owner[x] = tg;
            else if (it->second != rec)
                out.push_back({"sequence-mismatch", "targets " + pair_name(switch_owner[x], tg)});
        }
    }
    for (auto& [tg, b] : t.branches) {
        std::set<int> steps(b.switch_steps.begin() + 1, b.switch_steps.end());
        for (std::size_t k = 0; k < b.path.size(); ++k)
            if (switch_at.count(b.path[k]) && !steps.count(int(k)))
                out.push_back({"sequence-mismatch", "targets " + pair_name(switch_owner[b.path[k]], tg)});
    }
    if (!out.empty()) return out;

    // divergence points must disconnect the targets on either side
    for (auto& [c, outs] : children) {
        if (outs.size() < 2) continue;
        // slit = common prefix up to c
        std::vector<char> blocked(d.num_corners(), 0);
        const auto& any = t.branches.at(outs.begin()->second.front());
        blocked[WiredDomain::edge_tail(any.path.front())] = 1;
        for (EdgeId x : any.path) {
            blocked[d.edge_head(x)] = 1;
            if (d.edge_head(x) == c) break;
        }
        auto component = [&](CornerId removed) {
            std::vector<int> comp(d.num_corners(), -1);
            int nc = 0;
            for (CornerId s = 0; s < d.num_corners(); ++s) {
                if (comp[s] >= 0 || blocked[s] || s == removed || !d.corner_interior(s)) continue;
                std::deque<CornerId> qu{s};
                comp[s] = nc;
                while (!qu.empty()) {
                    CornerId x = qu.front();
                    qu.pop_front();
                    SquareId sx = WiredDomain::corner_square(x);
                    int dx = WiredDomain::corner_dir(x);
                    for (CornerId y : {d.medial_neighbor(x), 4 * sx + (dx + 1) % 4, 4 * sx + (dx + 3) % 4})
                        if (y >= 0 && comp[y] < 0 && !blocked[y] && y != removed && d.corner_interior(y)) {
                            comp[y] = nc;
                            qu.push_back(y);
                        }
                }
                ++nc;
            }
            return comp;
        };
        std::vector<std::vector<EdgeId>> groups;
        std::vector<CornerId> heads;
        for (auto& [x, tgs] : outs) {
            groups.push_back(tgs);
            heads.push_back(d.edge_head(x));
        }
        bool ok = false;
        for (CornerId removed : heads) {
            auto comp = component(removed);
            auto label = [&](EdgeId tg) {
                CornerId tt = WiredDomain::edge_tail(tg);
                return tt == removed ? -2 : comp[tt];
            };
            bool sep = true;
            for (EdgeId a : groups[0])
                for (EdgeId b : groups[1])
                    if (label(a) == label(b) && label(a) != -1) sep = false;
            if (sep) ok = true;
        }
        if (!ok)
            out.push_back({"not-disconnected",
                           "targets " + pair_name(groups[0].front(), groups[1].front()) + " split at vertex " +
                               std::to_string(c) + " while still connected"});
    }
    return out;
}

void write_tree(const ExplorationTree& t, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    nlohmann::json side;
    side["domain"] = t.domain->hash();
    side["ensemble"] = t.ensemble_hash;
    side["root_square"] = t.root;
    for (auto& [tg, b] : t.branches) {
        f << tg << ":";
        for (std::size_t k = 0; k < b.path.size(); ++k) f << (k ? "," : " ") << b.path[k];
        f << "\n";
        side["branches"][std::to_string(tg)] = {{"loops", b.loops}, {"squares", b.squares}};
    }
    std::ofstream j(path + ".json");
    j << side.dump(1) << "\n";
}

}  // namespace fkforge::tree
