#include "fkforge/lattice.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fkforge::lattice {

namespace {

std::string fmt(P2 p) { return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")"; }

int angle8_of(P2 v) {
    // v is axis-aligned or diagonal
    static const P2 dirs[8] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
    auto sgn = [](int a) { return (a > 0) - (a < 0); };
    P2 s{sgn(v.x), sgn(v.y)};
    for (int k = 0; k < 8; ++k)
        if (dirs[k] == s) return k;
    return 0;
}

}  // namespace

WiredDomain::WiredDomain(std::vector<P2> black_faces, MeshGeometry geom)
    : black_(std::move(black_faces)), geom_(geom) {
    std::sort(black_.begin(), black_.end());
    black_.erase(std::unique(black_.begin(), black_.end()), black_.end());
    for (auto& f : black_)
        if (f.x % 2 || f.y % 2 || !is_black_face(f)) throw ConfigError("not a black face: " + fmt(f));
    hash_ = fnv1a(black_.data(), black_.size() * sizeof(P2));
    build();
}

bool WiredDomain::in_black(P2 f) const { return black_index_.count(key(f)) > 0; }
bool WiredDomain::in_white(P2 f) const { return white_index_.count(key(f)) > 0; }

SquareId WiredDomain::square_at(P2 c) const {
    auto it = square_index_.find(key(c));
    return it == square_index_.end() ? -1 : it->second;
}

bool WiredDomain::incoming(CornerId c) const {
    bool a = squares_[corner_square(c)].type_a;
    Dir d = corner_dir(c);
    return a ? (d == N || d == S) : (d == E || d == W);
}

CornerId WiredDomain::next_in_square(CornerId c, bool closed) const {
    // the side towards d+1 lies in quadrant d, towards d-1 in quadrant d-1
    SquareId q = corner_square(c);
    int d = corner_dir(c);
    P2 quad = squares_[q].center + kQuadVec[d];
    bool black = is_black_face(quad);
    // open primal bond: sides in white quadrants; closed: in black quadrants
    int to = (black == closed) ? (d + 1) % 4 : (d + 3) % 4;
    return 4 * q + to;
}

CornerId WiredDomain::edge_head(EdgeId e) const {
    CornerId t = edge_tail(e);
    if (!incoming(t)) return medial_[t];
    int d = corner_dir(t);
    return 4 * corner_square(t) + ((e & 1) ? (d + 3) % 4 : (d + 1) % 4);
}

bool WiredDomain::edge_exists(EdgeId e) const {
    if (e < 0 || e >= 2 * num_corners()) return false;
    CornerId t = edge_tail(e);
    if (incoming(t)) return true;
    return (e & 1) == 0 && medial_[t] >= 0;
}

EdgeKind WiredDomain::edge_kind(EdgeId e) const {
    CornerId t = edge_tail(e);
    if (!incoming(t)) return EdgeKind::Medial;
    int d = corner_dir(t);
    int quad = (e & 1) ? (d + 3) % 4 : d;
    return is_black_face(squares_[corner_square(t)].center + kQuadVec[quad]) ? EdgeKind::SideBlack
                                                                              : EdgeKind::SideWhite;
}

EdgeId WiredDomain::side_edge(CornerId from, CornerId to) const {
    if (corner_square(from) != corner_square(to) || !incoming(from) || incoming(to)) return -1;
    int d = corner_dir(from), d2 = corner_dir(to);
    if (d2 == (d + 1) % 4) return 2 * from;
    if (d2 == (d + 3) % 4) return 2 * from + 1;
    return -1;
}

int WiredDomain::edge_angle8(EdgeId e) const {
    CornerId t = edge_tail(e);
    if (!incoming(t)) return angle8_of(kDirVec[corner_dir(t)]);
    CornerId h = edge_head(e);
    return angle8_of(kDirVec[corner_dir(h)] - kDirVec[corner_dir(t)]);
}

P2 WiredDomain::edge_midpoint2(EdgeId e) const {
    CornerId t = edge_tail(e);
    return squares_[corner_square(t)].center + kDirVec[corner_dir(t)];
}

bool WiredDomain::is_interior_medial(EdgeId e) const {
    return std::binary_search(targets_.begin(), targets_.end(), e);
}

cplx WiredDomain::point_pos(double x2, double y2) const {
    return {geom_.origin[0] + geom_.mesh * x2 / 2, geom_.origin[1] + geom_.mesh * y2 / 2};
}

std::array<double, 2> WiredDomain::corner_xy(CornerId c) const {
    P2 ctr = squares_[corner_square(c)].center;
    P2 dv = kDirVec[corner_dir(c)];
    // small squares have half-diagonal 1/4 in face units
    cplx p = point_pos(ctr.x + 0.5 * dv.x, ctr.y + 0.5 * dv.y);
    return {p.real(), p.imag()};
}

std::array<CornerId, 8> WiredDomain::face_corners(P2 face) const {
    std::array<CornerId, 8> out;
    out.fill(-1);
    for (int q = 0; q < 4; ++q) {
        P2 s = kQuadVec[q];
        SquareId sq = square_at(face + s);
        if (sq < 0) continue;
        Dir dx = s.x > 0 ? W : E;
        Dir dy = s.y > 0 ? S : N;
        out[2 * q] = 4 * sq + dx;
        out[2 * q + 1] = 4 * sq + dy;
    }
    return out;
}

void WiredDomain::build() {
    for (std::size_t i = 0; i < black_.size(); ++i) black_index_[key(black_[i])] = int(i);

    // inside white faces: all four black neighbours present
    std::set<P2> white_cand;
    for (auto f : black_)
        for (auto v : kDirVec) white_cand.insert(f + P2{2 * v.x, 2 * v.y});
    for (auto w : white_cand) {
        bool all = true;
        for (auto v : kDirVec) all = all && in_black(w + P2{2 * v.x, 2 * v.y});
        if (all) {
            white_index_[key(w)] = int(white_in_.size());
            white_in_.push_back(w);
        }
    }

    std::set<P2> centers;
    for (auto f : black_)
        for (auto q : kQuadVec) centers.insert(f + q);
    for (auto c : centers) {
        Square s;
        s.center = c;
        s.type_a = is_type_a(c);
        int black_in = 0, white_in = 0;
        for (auto q : kQuadVec) {
            P2 f = c + q;
            if (is_black_face(f))
                black_in += in_black(f);
            else
                white_in += in_white(f);
        }
        if (black_in < 2)
            s.kind = SquareKind::Ghost;
        else
            s.kind = white_in == 2 ? SquareKind::Interior
                                   : (white_in == 1 ? SquareKind::Boundary : SquareKind::Bridge);
        square_index_[key(c)] = int(squares_.size());
        squares_.push_back(s);
    }
    for (SquareId q = 0; q < num_squares(); ++q)
        if (squares_[q].kind == SquareKind::Interior) {
            squares_[q].bond = int(bond_squares_.size());
            bond_squares_.push_back(q);
        }

    medial_.assign(num_corners(), -1);
    for (CornerId c = 0; c < num_corners(); ++c) {
        P2 v = kDirVec[corner_dir(c)];
        SquareId nb = square_at(squares_[corner_square(c)].center + P2{2 * v.x, 2 * v.y});
        if (nb >= 0) medial_[c] = 4 * nb + (corner_dir(c) + 2) % 4;
    }

    trace_boundary();

    interior_.assign(num_corners(), 0);
    for (CornerId c = 0; c < num_corners(); ++c)
        interior_[c] = squares_[corner_square(c)].kind != SquareKind::Ghost && !on_boundary_[c];

    for (CornerId c = 0; c < num_corners(); ++c) {
        if (incoming(c) || medial_[c] < 0) continue;
        P2 ctr = squares_[corner_square(c)].center;
        int d = corner_dir(c);
        if (face_inside(ctr + kQuadVec[d]) && face_inside(ctr + kQuadVec[(d + 3) % 4]))
            targets_.push_back(2 * c);
    }
    std::sort(targets_.begin(), targets_.end());

    // simple connectivity of the primal subgraph (one component, no holes)
    if (black_.empty()) return;
    {
        std::vector<char> seen(black_.size(), 0);
        std::deque<int> queue{0};
        seen[0] = 1;
        while (!queue.empty()) {
            P2 f = black_[queue.front()];
            queue.pop_front();
            for (auto q : kQuadVec) {
                auto it = black_index_.find(key(f + P2{2 * q.x, 2 * q.y}));
                if (it != black_index_.end() && !seen[it->second]) {
                    seen[it->second] = 1;
                    queue.push_back(it->second);
                }
            }
        }
        for (std::size_t i = 0; i < black_.size(); ++i)
            if (!seen[i]) {
                violations_.push_back({"boundary-not-a-path", "black face " + fmt(black_[i]) + " not connected"});
                break;
            }
    }
    {
        int x0 = black_.front().x, x1 = x0, y0 = black_.front().y, y1 = y0;
        for (auto f : black_) {
            x0 = std::min(x0, f.x), x1 = std::max(x1, f.x);
            y0 = std::min(y0, f.y), y1 = std::max(y1, f.y);
        }
        x0 -= 4, y0 -= 4, x1 += 4, y1 += 4;
        int nx = (x1 - x0) / 2 + 1, ny = (y1 - y0) / 2 + 1;
        auto idx = [&](P2 f) { return ((f.x - x0) / 2) * ny + (f.y - y0) / 2; };
        std::vector<char> seen(std::size_t(nx) * ny, 0);
        std::deque<P2> queue{{x0, y0}};
        seen[idx({x0, y0})] = 1;
        while (!queue.empty()) {
            P2 f = queue.front();
            queue.pop_front();
            auto visit = [&](P2 g) {
                if (g.x < x0 || g.x > x1 || g.y < y0 || g.y > y1) return;
                if (seen[idx(g)] || face_inside(g)) return;
                seen[idx(g)] = 1;
                queue.push_back(g);
            };
            for (auto v : kDirVec) visit(f + P2{2 * v.x, 2 * v.y});
            for (auto q : kQuadVec) {
                SquareId s = square_at(f + q);
                if (s >= 0 && squares_[s].kind != SquareKind::Ghost) continue;
                visit(f + P2{2 * q.x, 2 * q.y});
            }
        }
        for (int x = x0; x <= x1; x += 2)
            for (int y = y0; y <= y1; y += 2) {
                P2 f{x, y};
                if (!face_inside(f) && !seen[idx(f)]) {
                    violations_.push_back({"not-simply-connected", "enclosed face " + fmt(f)});
                    return;
                }
            }
    }
}

void WiredDomain::trace_boundary() {
    on_boundary_.assign(num_corners(), 0);
    auto inside_square = [&](SquareId s) { return squares_[s].kind != SquareKind::Ghost; };
    std::vector<EdgeId> edges;
    for (CornerId c = 0; c < num_corners(); ++c) {
        SquareId q = corner_square(c);
        P2 ctr = squares_[q].center;
        int d = corner_dir(c);
        if (incoming(c)) {
            for (int k = 0; k < 2; ++k) {
                int quad = k ? (d + 3) % 4 : d;
                P2 f = ctr + kQuadVec[quad];
                // black octagon on the left, white on the right
                bool left = is_black_face(f) ? in_black(f) : inside_square(q);
                bool right = is_black_face(f) ? inside_square(q) : in_white(f);
                if (left && !right) edges.push_back(2 * c + k);
            }
        } else if (medial_[c] >= 0) {
            bool left = face_inside(ctr + kQuadVec[(d + 3) % 4]);
            bool right = face_inside(ctr + kQuadVec[d]);
            if (left && !right) edges.push_back(2 * c);
        }
    }
    std::sort(edges.begin(), edges.end());
    if (edges.empty()) return;

    std::unordered_map<CornerId, EdgeId> out;
    for (auto e : edges) {
        CornerId t = edge_tail(e);
        if (out.count(t)) {
            violations_.push_back({"boundary-not-a-path", "vertex " + std::to_string(t) + " left twice"});
            return;
        }
        out[t] = e;
    }
    std::vector<char> seen_head(num_corners(), 0);
    for (auto e : edges) {
        CornerId h = edge_head(e);
        if (seen_head[h]) {
            violations_.push_back({"boundary-not-a-path", "vertex " + std::to_string(h) + " entered twice"});
            return;
        }
        seen_head[h] = 1;
    }
    EdgeId e = edges.front();
    std::vector<EdgeId> cycle;
    do {
        cycle.push_back(e);
        auto it = out.find(edge_head(e));
        if (it == out.end()) {
            violations_.push_back({"boundary-not-a-path", "boundary edge " + std::to_string(e) + " dangles"});
            return;
        }
        e = it->second;
    } while (e != edges.front() && cycle.size() <= edges.size());
    if (cycle.size() != edges.size()) {
        violations_.push_back(
            {"boundary-not-a-path", "boundary splits into several cycles at edge " + std::to_string(edges.front())});
        return;
    }
    boundary_ = cycle;
    for (auto b : boundary_) {
        on_boundary_[edge_tail(b)] = 1;
        on_boundary_[edge_head(b)] = 1;
    }
}

std::vector<Violation> validate_admissible(const WiredDomain& d) {
    if (d.black_faces().empty()) return {{"non-empty", "no black faces"}};
    auto v = d.structural_violations();
    if (v.empty() && d.boundary().empty()) v.push_back({"boundary-not-a-path", "no boundary"});
    return v;
}

DomainPtr build_rect_domain(int n_cols, int n_rows, double mesh) {
    if (n_cols < 1 || n_rows < 1) throw ConfigError("rect domain needs positive sizes");
    if (!(mesh > 0)) throw ConfigError("mesh must be positive");
    std::vector<P2> faces;
    for (int c = 0; c < n_cols; ++c)
        for (int r = 0; r < n_rows; ++r) faces.push_back(grid_to_face(c, r));
    MeshGeometry g;
    g.mesh = mesh;
    return std::make_shared<WiredDomain>(std::move(faces), g);
}

DomainPtr parse_domain_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    MeshGeometry g;
    bool have_mesh = false;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("mesh=", 0) == 0) {
            try {
                g.mesh = std::stod(line.substr(5));
            } catch (...) {
                throw ConfigError("domain: bad mesh line '" + line + "'");
            }
            if (!(g.mesh > 0)) throw ConfigError("domain: mesh must be positive");
            have_mesh = true;
            continue;
        }
        rows.push_back(line);
    }
    if (!have_mesh) throw ConfigError("domain: missing mesh= header");
    std::vector<P2> faces;
    int nr = int(rows.size());
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < int(rows[r].size()); ++c) {
            char ch = rows[r][c];
            if (ch == 'B')
                faces.push_back(grid_to_face(c, nr - 1 - r));
            else if (ch != '.' && ch != ' ')
                throw ConfigError(std::string("domain: unexpected character '") + ch + "'");
        }
    return std::make_shared<WiredDomain>(std::move(faces), g);
}

DomainPtr load_domain(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open domain file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_domain_text(ss.str());
}

std::string WiredDomain::to_text() const {
    std::ostringstream os;
    os << "mesh=" << geom_.mesh << "\n";
    if (black_.empty()) return os.str();
    int c0 = 1 << 30, c1 = -c0, r0 = c0, r1 = -c0;
    for (auto f : black_) {
        int i = f.x / 2, j = f.y / 2;
        int c = (i + j) / 2, r = (j - i) / 2;
        c0 = std::min(c0, c), c1 = std::max(c1, c), r0 = std::min(r0, r), r1 = std::max(r1, r);
    }
    for (int r = r1; r >= r0; --r) {
        for (int c = c0; c <= c1; ++c) os << (in_black(grid_to_face(c, r)) ? 'B' : '.');
        os << "\n";
    }
    return os.str();
}

std::string WiredDomain::to_json() const {
    nlohmann::json j;
    j["mesh"] = geom_.mesh;
    j["hash"] = hash_;
    for (CornerId c = 0; c < num_corners(); ++c) {
        auto p = corner_xy(c);
        j["vertices"].push_back({{"id", c}, {"x", p[0]}, {"y", p[1]}, {"interior", bool(interior_[c])}});
    }
    for (EdgeId e = 0; e < 2 * num_corners(); ++e) {
        if (!edge_exists(e)) continue;
        const char* kind = edge_kind(e) == EdgeKind::Medial
                               ? "medial"
                               : (edge_kind(e) == EdgeKind::SideBlack ? "side-black" : "side-white");
        j["edges"].push_back({{"id", e}, {"tail", edge_tail(e)}, {"head", edge_head(e)}, {"kind", kind}});
    }
    j["boundary"] = boundary_;
    return j.dump(1);
}

DobrushinDomain mark_dobrushin(DomainPtr d, SquareId root) {
    if (root < 0 || root >= d->num_squares()) throw InvalidRoot("root square out of range");
    const Square& sq = d->square(root);
    if (sq.kind == SquareKind::Bridge) throw BottleneckRoot("root square shares two edges with the boundary");
    if (sq.kind != SquareKind::Boundary) throw InvalidRoot("root square is not adjacent to the boundary");
    DobrushinDomain dd;
    dd.base = d;
    dd.root = root;
    // the outer white quadrant holds the boundary side s = (c_in -> c_out)
    for (int k = 0; k < 4; ++k) {
        CornerId c = 4 * root + k;
        if (!d->incoming(c)) continue;
        for (int j = 0; j < 2; ++j) {
            EdgeId e = 2 * c + j;
            if (std::find(d->boundary().begin(), d->boundary().end(), e) == d->boundary().end()) continue;
            dd.boundary_side = e;
            CornerId c_in = c, c_out = d->edge_head(e);
            CornerId in2 = 4 * root + (WiredDomain::corner_dir(c_in) + 2) % 4;
            CornerId out2 = 4 * root + (WiredDomain::corner_dir(c_out) + 2) % 4;
            dd.e_i = d->side_edge(c_in, out2);
            dd.e_o = d->side_edge(in2, c_out);
            dd.cut = d->side_edge(in2, out2);
        }
    }
    if (dd.e_i < 0) throw InvalidRoot("root square has no boundary side");
    return dd;
}

DobrushinDomain mark_dobrushin(DomainPtr d, SquareId root, EdgeId f) {
    auto dd = mark_dobrushin(d, root);
    if (!d->edge_exists(f) || d->edge_kind(f) != EdgeKind::Medial) throw NotInterior("f is not a medial edge");
    if (d->edge_angle8(f) != 0) throw NotInterior("f must be horizontal and point east");
    if (!d->is_interior_medial(f)) throw NotInterior("f touches the boundary");
    SquareId s1 = WiredDomain::corner_square(WiredDomain::edge_tail(f));
    SquareId s2 = WiredDomain::corner_square(d->edge_head(f));
    if (d->square(s1).kind != SquareKind::Interior || d->square(s2).kind != SquareKind::Interior)
        throw NotInterior("f is adjacent to the boundary");
    dd.f = f;
    P2 m = d->edge_midpoint2(f);
    dd.w = d->point_pos(m.x, m.y);
    return dd;
}

SquareId default_root(const WiredDomain& d) {
    SquareId best = -1;
    for (SquareId q = 0; q < d.num_squares(); ++q) {
        if (d.square(q).kind != SquareKind::Boundary) continue;
        P2 c = d.square(q).center;
        if (best < 0) {
            best = q;
            continue;
        }
        P2 b = d.square(best).center;
        if (c.y < b.y || (c.y == b.y && c.x < b.x)) best = q;
    }
    if (best < 0) throw InvalidRoot("domain has no boundary square");
    return best;
}

EdgeId nearest_east_edge(const WiredDomain& d, cplx z) {
    EdgeId best = -1;
    double bd = 1e300;
    for (EdgeId e : d.interior_medial_edges()) {
        if (d.edge_angle8(e) != 0) continue;
        SquareId s1 = WiredDomain::corner_square(WiredDomain::edge_tail(e));
        SquareId s2 = WiredDomain::corner_square(d.edge_head(e));
        if (d.square(s1).kind != SquareKind::Interior || d.square(s2).kind != SquareKind::Interior) continue;
        P2 m = d.edge_midpoint2(e);
        double dist = std::abs(d.point_pos(m.x, m.y) - z);
        if (dist < bd - 1e-12) bd = dist, best = e;
    }
    if (best < 0) throw NotInterior("domain has no interior east-pointing edge");
    return best;
}

EdgeId default_f(const WiredDomain& d) {
    cplx c = 0;
    for (auto f : d.black_faces()) c += d.point_pos(f.x, f.y);
    c /= double(d.black_faces().size());
    return nearest_east_edge(d, c);
}

}  // namespace fkforge::lattice
