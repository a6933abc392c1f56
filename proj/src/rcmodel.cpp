#include "fkforge/rcmodel.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <boost/pending/disjoint_sets.hpp>
#include <sstream>

namespace fkforge::rcmodel {

using lattice::SquareId;
using lattice::SquareKind;

void LoopEnsemble::canonicalize() {
    for (auto& l : loops) {
        auto it = std::min_element(l.begin(), l.end());
        std::rotate(l.begin(), it, l.end());
    }
    std::sort(loops.begin(), loops.end());
}

std::uint64_t LoopEnsemble::hash() const {
    std::uint64_t h = fnv1a(nullptr, 0);
    for (auto& l : loops) {
        h = fnv1a(l.data(), l.size() * sizeof(EdgeId), h);
        int sep = -1;
        h = fnv1a(&sep, sizeof sep, h);
    }
    return h;
}

LoopState::LoopState(const WiredDomain& d, const BondConfig& c) : d_(&d), closed_(d.num_squares(), 0) {
    if (int(c.size()) != d.num_bonds()) throw ConfigError("bond configuration size does not match the domain");
    for (int b = 0; b < d.num_bonds(); ++b) closed_[d.bond_squares()[b]] = !c[b];
}

int LoopState::flip_delta(int b) const {
    int q = d_->bond_squares()[b];
    CornerId c1 = -1, c2 = -1;
    for (int k = 0; k < 4; ++k)
        if (d_->incoming(4 * q + k)) (c1 < 0 ? c1 : c2) = 4 * q + k;
    CornerId x1 = next(c1), x2 = next(c2);
    // walk both arcs leaving the square; whichever closes first decides
    while (true) {
        x1 = next(x1);
        if (x1 == c2) return +1;
        if (x1 == c1) return -1;
        x2 = next(x2);
        if (x2 == c1) return +1;
        if (x2 == c2) return -1;
    }
}

void LoopState::flip(int b) {
    auto& v = closed_[d_->bond_squares()[b]];
    v = !v;
}

int LoopState::count_loops() const {
    std::vector<char> seen(d_->num_corners(), 0);
    int n = 0;
    for (CornerId c = 0; c < d_->num_corners(); ++c) {
        if (seen[c] || !d_->corner_interior(c)) continue;
        ++n;
        for (CornerId x = c; !seen[x]; x = next(x)) seen[x] = 1;
    }
    return n;
}

LoopEnsemble loop_representation(DomainPtr d, const BondConfig& c) {
    LoopState st(*d, c);
    LoopEnsemble e;
    e.domain = d;
    std::vector<char> seen(d->num_corners(), 0);
    for (CornerId c0 = 0; c0 < d->num_corners(); ++c0) {
        if (seen[c0] || !d->corner_interior(c0)) continue;
        std::vector<EdgeId> loop;
        for (CornerId x = c0; !seen[x];) {
            seen[x] = 1;
            CornerId y = st.next(x);
            loop.push_back(d->incoming(x) ? d->side_edge(x, y) : d->medial_edge(x));
            x = y;
        }
        e.loops.push_back(std::move(loop));
    }
    e.canonicalize();
    return e;
}

int count_loops(const LoopEnsemble& e) { return int(e.loops.size()); }

BondConfig config_from_loops(const LoopEnsemble& e) {
    const auto& d = *e.domain;
    BondConfig c(d.num_bonds(), 0);
    for (auto& l : e.loops)
        for (EdgeId x : l) {
            auto kind = d.edge_kind(x);
            if (kind == lattice::EdgeKind::Medial) continue;
            int b = d.square(WiredDomain::corner_square(WiredDomain::edge_tail(x))).bond;
            if (b >= 0) c[b] = kind == lattice::EdgeKind::SideWhite;
        }
    return c;
}

void for_each_config(const WiredDomain& d, const std::function<void(const BondConfig&, int)>& fn) {
    int n = d.num_bonds();
    if (n > kEnumerationGuard) throw TooLarge("enumeration limited to " + std::to_string(kEnumerationGuard) + " bonds");
    BondConfig c(n, 0);
    LoopState st(d, c);
    int loops = st.count_loops();
    fn(c, loops);
    for (std::uint64_t g = 1; g < (std::uint64_t(1) << n); ++g) {
        int b = __builtin_ctzll(g);
        loops += st.flip_delta(b);
        st.flip(b);
        c[b] ^= 1;
        fn(c, loops);
    }
}

std::vector<std::pair<BondConfig, double>> enumerate_measure(const WiredDomain& d) {
    std::vector<std::pair<BondConfig, double>> out;
    std::vector<int> counts;
    int nmin = 1 << 30;
    for_each_config(d, [&](const BondConfig& c, int loops) {
        out.push_back({c, 0});
        counts.push_back(loops);
        nmin = std::min(nmin, loops);
    });
    double z = 0;
    for (std::size_t i = 0; i < out.size(); ++i) z += out[i].second = std::pow(kSqrt2, counts[i] - nmin);
    for (auto& p : out) p.second /= z;
    return out;
}

std::map<int, double> loop_count_distribution(const WiredDomain& d) {
    std::map<int, double> w;
    for_each_config(d, [&](const BondConfig&, int loops) { w[loops] += 1; });
    int nmin = w.begin()->first;
    double z = 0;
    for (auto& [n, m] : w) z += m *= std::pow(kSqrt2, n - nmin);
    for (auto& [n, m] : w) m /= z;
    return w;
}

MetropolisChain::MetropolisChain(const WiredDomain& d, std::uint64_t seed, std::uint64_t stream)
    : d_(&d), state_(d, BondConfig(d.num_bonds(), 0)), rng_(seed, stream) {
    loops_ = state_.count_loops();
}

void MetropolisChain::sweep() {
    int n = d_->num_bonds();
    if (n == 0) return;
    static const double down_ratio = 1.0 / kSqrt2;
    for (int k = 0; k < n; ++k) {
        int b = int(rng_.below(n));
        int dn = state_.flip_delta(b);
        double u = rng_.uniform();
        double acc = dn > 0 ? 1.0 : down_ratio;
        ++stats_.proposals;
        if (std::find(stats_.acceptance_values.begin(), stats_.acceptance_values.end(), acc) ==
            stats_.acceptance_values.end())
            stats_.acceptance_values.push_back(acc);
        (dn > 0 ? stats_.up : stats_.down)++;
        if (u < acc) {
            (dn > 0 ? stats_.up_accepted : stats_.down_accepted)++;
            state_.flip(b);
            loops_ += dn;
        }
    }
}

BondConfig MetropolisChain::config() const {
    BondConfig c(d_->num_bonds());
    for (int b = 0; b < d_->num_bonds(); ++b) c[b] = state_.open(b);
    return c;
}

BondConfig sample_mc(const WiredDomain& d, long sweeps, std::uint64_t seed) {
    if (sweeps < 1) throw ConfigError("sweeps must be at least 1");
    MetropolisChain ch(d, seed);
    for (long s = 0; s < sweeps; ++s) ch.sweep();
    return ch.config();
}

SwendsenWangChain::SwendsenWangChain(const WiredDomain& d, std::uint64_t seed, std::uint64_t stream)
    : d_(&d), rng_(seed, stream) {
    const auto& faces = d.black_faces();
    std::map<lattice::P2, int> index;
    for (int i = 0; i < int(faces.size()); ++i) index[faces[i]] = i;
    wired_.assign(faces.size(), 0);
    for (SquareId q = 0; q < d.num_squares(); ++q) {
        const auto& sq = d.square(q);
        if (sq.kind == SquareKind::Ghost) continue;
        std::array<int, 2> e{-1, -1};
        int k = 0;
        for (auto v : lattice::kQuadVec) {
            auto it = index.find(sq.center + v);
            if (it != index.end() && k < 2) e[k++] = it->second;
        }
        if (sq.kind == SquareKind::Interior) continue;
        for (int i : e)
            if (i >= 0) wired_[i] = 1;
    }
    ends_.resize(d.num_bonds());
    for (int b = 0; b < d.num_bonds(); ++b) {
        const auto& sq = d.square(d.bond_squares()[b]);
        int k = 0;
        for (auto v : lattice::kQuadVec)
            if (lattice::is_black_face(sq.center + v)) ends_[b][k++] = index.at(sq.center + v);
    }
    spin_.assign(faces.size(), 1);
    bonds_.assign(d.num_bonds(), 0);
}

void SwendsenWangChain::sweep() {
    static const double p = kSqrt2 / (1 + kSqrt2);
    int nb = d_->num_bonds();
    for (int b = 0; b < nb; ++b) {
        double u = rng_.uniform();
        bonds_[b] = spin_[ends_[b][0]] == spin_[ends_[b][1]] && u < p;
    }
    std::size_t n = spin_.size();
    std::vector<std::size_t> rank(n), parent(n);
    boost::disjoint_sets<std::size_t*, std::size_t*> ds(rank.data(), parent.data());
    for (std::size_t i = 0; i < n; ++i) ds.make_set(i);
    for (int b = 0; b < nb; ++b)
        if (bonds_[b]) ds.union_set(ends_[b][0], ends_[b][1]);
    // the cluster spin is drawn at its lowest-index face, so the draw order is fixed
    std::vector<std::int8_t> root_spin(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (wired_[i]) root_spin[ds.find_set(i)] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = ds.find_set(i);
        if (!root_spin[r]) root_spin[r] = rng_.uniform() < 0.5 ? 1 : -1;
        spin_[i] = root_spin[r];
    }
}

BondConfig sample_sw(const WiredDomain& d, long sweeps, std::uint64_t seed, std::uint64_t stream) {
    if (sweeps < 1) throw ConfigError("sweeps must be at least 1");
    SwendsenWangChain ch(d, seed, stream);
    for (long s = 0; s < sweeps; ++s) ch.sweep();
    return ch.config();
}

std::vector<Violation> validate_dcnil(const LoopEnsemble& e) {
    std::vector<Violation> out;
    const auto& d = *e.domain;
    std::vector<int> owner(d.num_corners(), -1);
    std::vector<char> covered(2 * d.num_corners(), 0);
    for (std::size_t li = 0; li < e.loops.size(); ++li) {
        const auto& l = e.loops[li];
        if (l.empty()) {
            out.push_back({"not-simple", "loop " + std::to_string(li) + " is empty"});
            continue;
        }
        for (std::size_t k = 0; k < l.size(); ++k) {
            EdgeId x = l[k], y = l[(k + 1) % l.size()];
            if (!d.edge_exists(x) || !d.corner_interior(WiredDomain::edge_tail(x)) ||
                !d.corner_interior(d.edge_head(x))) {
                out.push_back({"edge-outside-domain", "edge " + std::to_string(x)});
                continue;
            }
            if (d.edge_head(x) != WiredDomain::edge_tail(y))
                out.push_back({"not-simple", "loop " + std::to_string(li) + " breaks after edge " + std::to_string(x)});
            covered[x] = 1;
            CornerId t = WiredDomain::edge_tail(x);
            if (owner[t] == int(li))
                out.push_back({"not-simple", "loop " + std::to_string(li) + " revisits vertex " + std::to_string(t)});
            else if (owner[t] >= 0)
                out.push_back({"not-vertex-disjoint", "vertex " + std::to_string(t) + " on loops " +
                                                          std::to_string(owner[t]) + " and " + std::to_string(li)});
            owner[t] = int(li);
        }
    }
    for (EdgeId x : d.interior_medial_edges())
        if (!covered[x]) {
            out.push_back({"edge-not-covered", "edge " + std::to_string(x)});
            break;
        }
    return out;
}

void write_loops(const LoopEnsemble& e, std::uint64_t seed, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "# domain=" << e.domain->hash() << " seed=" << seed << " loops=" << e.loops.size() << "\n";
    for (auto& l : e.loops) {
        for (std::size_t k = 0; k < l.size(); ++k) f << (k ? "," : "") << l[k];
        f << "\n";
    }
}

LoopEnsemble read_loops(DomainPtr d, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    LoopEnsemble e;
    e.domain = d;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto p = line.find("domain=");
            if (p != std::string::npos && std::stoull(line.substr(p + 7)) != d->hash())
                throw ConfigError("loop file belongs to a different domain");
            continue;
        }
        std::vector<EdgeId> l;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) l.push_back(std::stoi(tok));
        e.loops.push_back(std::move(l));
    }
    e.canonicalize();
    return e;
}

void write_config(const WiredDomain& d, const BondConfig& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "# domain=" << d.hash() << "\nbits=";
    for (auto b : c) f << int(b);
    f << "\n# bond order: index x2 y2 (doubled coordinates of the edge midpoint)\n";
    for (int b = 0; b < d.num_bonds(); ++b) {
        auto p = d.square(d.bond_squares()[b]).center;
        f << "# " << b << " " << p.x << " " << p.y << "\n";
    }
}

BondConfig read_config(const WiredDomain& d, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("bits=", 0) != 0) continue;
        BondConfig c;
        for (char ch : line.substr(5)) {
            if (ch != '0' && ch != '1') throw ConfigError("config: bad bit");
            c.push_back(ch == '1');
        }
        if (int(c.size()) != d.num_bonds()) throw ConfigError("config: wrong number of bonds");
        return c;
    }
    throw ConfigError("config: no bits= line");
}

}  // namespace fkforge::rcmodel
