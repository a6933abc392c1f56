#include "fkforge/dca.hpp"

#include <cmath>
#include <deque>
#include <fstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace fkforge::dca {

using lattice::WiredDomain;

namespace {
const cplx kLambda = std::polar(1.0, -kPi / 4);
constexpr P2 kDiag[4] = {{1, 1}, {1, -1}, {-1, -1}, {-1, 1}};
constexpr P2 kDiag2[4] = {{2, 2}, {2, -2}, {-2, -2}, {-2, 2}};

bool even(int v) { return (v & 1) == 0; }
cplx unit_of(P2 d) { return cplx(d.x, d.y) / std::abs(cplx(d.x, d.y)); }
double proj(cplx v, cplx dir) { return (std::conj(dir) * v).real(); }
}  // namespace

bool on_lattice(Lattice l, P2 p) {
    switch (l) {
    case Lattice::Gamma: return even(p.x) && even(p.y);
    case Lattice::Black: return even(p.x) && even(p.y) && even(p.x / 2 + p.y / 2);
    case Lattice::White: return even(p.x) && even(p.y) && !even(p.x / 2 + p.y / 2);
    case Lattice::GammaStar: return !even(p.x) && !even(p.y);
    case Lattice::Diamond: return !even(p.x) && even(p.y);
    }
    return false;
}

cplx VertexField::at(P2 p) const {
    auto it = values.find(p);
    if (it == values.end()) throw ConfigError("field has no value at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
    return it->second;
}

VertexField laplacian1(const VertexField& f, bool normalized) {
    if (f.lattice != Lattice::Black && f.lattice != Lattice::White)
        throw ConfigError("laplacian1 acts on the black or white sublattice");
    VertexField out{f.lattice, f.mesh, {}};
    double s = normalized ? 1.0 / (2 * f.mesh * f.mesh) : 1.0;
    for (auto& [p, v] : f.values) {
        cplx acc = 0;
        bool ok = true;
        for (P2 d : kDiag2) {
            auto it = f.values.find(p + d);
            if (it == f.values.end()) {
                ok = false;
                break;
            }
            acc += it->second - v;
        }
        if (ok) out.values[p] = s * acc;
    }
    return out;
}

namespace {
VertexField diag_derivative(const VertexField& f, bool conj_dir, bool normalized) {
    Lattice target;
    if (f.lattice == Lattice::GammaStar)
        target = Lattice::Gamma;
    else if (f.lattice == Lattice::Gamma || f.lattice == Lattice::Black || f.lattice == Lattice::White)
        target = Lattice::GammaStar;
    else
        throw ConfigError("derivative needs a field on Gamma or its dual");
    VertexField out{target, f.mesh, {}};
    double s = normalized ? 1.0 / (kSqrt2 * f.mesh) : 1.0;
    std::map<P2, int> hits;
    for (auto& [p, v] : f.values)
        for (P2 d : kDiag) hits[p + d]++;
    for (auto& [z, n] : hits) {
        if (n != 4 || !on_lattice(target, z)) continue;
        cplx acc = 0;
        for (P2 d : kDiag) {
            cplx u = unit_of(d);
            acc += (conj_dir ? std::conj(u) : u) * f.values.at(z + d);
        }
        out.values[z] = 0.5 * s * acc;
    }
    return out;
}
}  // namespace

VertexField dbar1(const VertexField& f, bool normalized) { return diag_derivative(f, false, normalized); }
VertexField d1(const VertexField& f, bool normalized) { return diag_derivative(f, true, normalized); }

GreenResult greens_function(int radius, double mesh) {
    if (radius < 8) throw ConfigError("green's function radius must be at least 8");
    // Black point (m, n) in the rotated basis sits at doubled (2(m+n), 2(m-n))
    const int R = radius, W = 2 * R + 1;
    auto idx = [&](int m, int n) { return (m + R) * W + (n + R); };
    auto dbl = [](int m, int n) { return P2{2 * (m + n), 2 * (m - n)}; };
    auto boundary_value = [&](int m, int n) {
        double r = std::sqrt(double(m) * m + double(n) * n);  // |z| / (sqrt2 delta)
        return std::log(r) / (2 * kPi);
    };
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(W * W);
    const int dm[4] = {1, -1, 0, 0}, dn[4] = {0, 0, 1, -1};
    for (int m = -R; m <= R; ++m)
        for (int n = -R; n <= R; ++n) {
            int i = idx(m, n);
            if (std::abs(m) == R || std::abs(n) == R) {
                trip.emplace_back(i, i, 1.0);
                rhs[i] = boundary_value(m, n);
                continue;
            }
            // -Delta_1 G = -delta
            trip.emplace_back(i, i, 4.0);
            for (int k = 0; k < 4; ++k) {
                int mm = m + dm[k], nn = n + dn[k];
                if (std::abs(mm) == R || std::abs(nn) == R)
                    rhs[i] += boundary_value(mm, nn);
                else
                    trip.emplace_back(i, idx(mm, nn), -1.0);
            }
            if (m == 0 && n == 0) rhs[i] -= 1.0;
        }
    Eigen::SparseMatrix<double> A(W * W, W * W);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw SolveFailure("green's function factorization failed");
    Eigen::VectorXd g = solver.solve(rhs);
    if (solver.info() != Eigen::Success) throw SolveFailure("green's function solve failed");
    GreenResult out;
    out.C = -g[idx(0, 0)];
    out.G = {Lattice::Black, mesh, {}};
    for (int m = -R; m <= R; ++m)
        for (int n = -R; n <= R; ++n) out.G.values[dbl(m, n)] = g[idx(m, n)] + out.C;
    auto lap = laplacian1(out.G);
    for (auto& [p, v] : lap.values) out.residual = std::max(out.residual, std::abs(v - (p == P2{0, 0} ? 1.0 : 0.0)));
    return out;
}

double log_slope(const VertexField& G, double rmin, double rmax) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (auto& [p, v] : G.values) {
        double r = std::abs(G.pos(p));
        if (r < rmin || r > rmax) continue;
        double x = std::log(r), y = v.real();
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++n;
    }
    if (n < 3) throw InsufficientData("too few points on the annulus");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double asymptotic_defect(const GreenResult& g, double rmin, double rmax) {
    double worst = 0;
    for (auto& [p, v] : g.G.values) {
        double r = std::abs(g.G.pos(p));
        if (r < rmin || r > rmax) continue;
        double model = std::log(r / (kSqrt2 * g.G.mesh)) / (2 * kPi) + g.C;
        worst = std::max(worst, std::abs(v.real() - model) * r * r / (g.G.mesh * g.G.mesh));
    }
    return worst;
}

CauchyKernel cauchy_kernel(int radius, double mesh) {
    auto g = greens_function(radius, mesh);
    CauchyKernel k;
    k.C = g.C;
    k.edges = {Lattice::GammaStar, mesh, {}};
    k.vertices = {Lattice::Diamond, mesh, {}};
    // a GammaStar point has two Black neighbours on one diagonal
    for (auto& [p, v] : g.G.values)
        for (P2 d : {P2{1, 1}, P2{1, -1}}) {
            P2 z = p + d, b1 = p + d + d;
            auto it = g.G.values.find(b1);
            if (it == g.G.values.end()) continue;
            // C = conj(u1) (G(b1) - G(b2)), u1 the direction towards b1
            k.edges.values[z] = std::conj(unit_of(d)) * (it->second - v);
        }
    for (auto& [z, v] : k.edges.values) {
        P2 up{z.x, z.y + 1};
        auto it = k.edges.values.find({z.x, z.y + 2});
        if (it != k.edges.values.end()) k.vertices.values[up] = v + it->second;
    }
    auto C = [&](P2 p) { return k.edges.at(p); };
    cplx lb = std::conj(kLambda);
    k.dbar_at_z0 =
        (0.5 * (lb * (C({1, 1}) - C({-1, -1})) - kLambda * (C({-1, 1}) - C({1, -1})))).real();
    return k;
}

cplx far_field_coefficient(const CauchyKernel& k, double rmin, double rmax) {
    cplx acc = 0;
    int n = 0;
    for (auto& [p, v] : k.vertices.values) {
        cplx z = k.vertices.pos(p);
        double r = std::abs(z);
        if (r < rmin || r > rmax) continue;
        acc += v * z / k.vertices.mesh;
        ++n;
    }
    if (!n) throw InsufficientData("no vertices on the annulus");
    return acc / double(n);
}

namespace {
// line of a Diamond edge by its midpoint
cplx diamond_line(P2 mid) {
    if (on_lattice(Lattice::Black, mid)) return 1.0;
    if (on_lattice(Lattice::White, mid)) return cplx(0, 1);
    // vertical edge: lambda R if its black neighbours lie on the NE-SW diagonal
    return on_lattice(Lattice::Black, mid + P2{1, 1}) ? kLambda : std::conj(kLambda);
}
}  // namespace

std::map<P2, double> sholo_residuals(const VertexField& vert) {
    if (vert.lattice != Lattice::GammaStar) throw ConfigError("vertical edge values live on GammaStar");
    std::map<P2, cplx> V;
    for (auto& [z, v] : vert.values) {
        auto it = vert.values.find({z.x, z.y + 2});
        if (it != vert.values.end()) V[{z.x, z.y + 1}] = v + it->second;
    }
    std::map<P2, double> out;
    for (auto& [p, v] : V) {
        // horizontal edge to the east, vertical edge to the north
        for (P2 d : {P2{2, 0}, P2{0, 2}}) {
            auto it = V.find(p + d);
            if (it == V.end()) continue;
            P2 mid{p.x + d.x / 2, p.y + d.y / 2};
            cplx l = diamond_line(mid);
            out[mid] = std::abs(proj(v, l) - proj(it->second, l));
        }
    }
    return out;
}

double line_deviation(const VertexField& vert) {
    double worst = 0;
    for (auto& [z, v] : vert.values) {
        if (std::abs(v) < 1e-300) continue;
        cplx l = diamond_line(z);
        worst = std::max(worst, std::abs((std::conj(l) * v).imag()) / std::abs(v));
    }
    return worst;
}

EdgeField::EdgeField(DomainPtr d) : domain(std::move(d)) {
    if (domain) {
        values.assign(2 * domain->num_corners(), 0);
        defined.assign(2 * domain->num_corners(), 0);
    }
}

cplx EdgeField::line(EdgeId e) const {
    int a = domain->edge_angle8(e) - ref_angle8;
    return std::polar(1.0, -kPi / 8 * a);
}

namespace {
// the medial edges at square q meeting its N and S corners
std::array<EdgeId, 2> vertical_edges(const WiredDomain& d, SquareId q) {
    std::array<EdgeId, 2> out{-1, -1};
    for (int k : {0, 2}) {
        CornerId c = 4 * q + k;
        if (d.incoming(c)) {
            CornerId m = d.medial_neighbor(c);
            out[k / 2] = m >= 0 ? d.medial_edge(m) : -1;
        } else {
            out[k / 2] = d.medial_edge(c);
        }
    }
    return out;
}
}  // namespace

std::optional<cplx> vertex_value(const EdgeField& F, SquareId q) {
    const auto& d = *F.domain;
    if (d.square(q).kind != lattice::SquareKind::Interior) return std::nullopt;
    cplx v = 0;
    for (EdgeId e : vertical_edges(d, q)) {
        if (e < 0 || !F.defined[e]) return std::nullopt;
        v += F.values[e];
    }
    return v;
}

std::map<EdgeId, double> sholo_residuals(const EdgeField& F) {
    const auto& d = *F.domain;
    std::map<EdgeId, double> out;
    for (CornerId c = 0; c < d.num_corners(); ++c) {
        if (d.incoming(c) || !F.defined[2 * c]) continue;
        EdgeId e = d.medial_edge(c);
        CornerId h = d.edge_head(e);
        if (h < 0) continue;
        auto v1 = vertex_value(F, WiredDomain::corner_square(c));
        auto v2 = vertex_value(F, WiredDomain::corner_square(h));
        if (!v1 || !v2) continue;
        cplx l = F.line(e);
        double p1 = proj(*v1, l), p2 = proj(*v2, l), pe = proj(F.values[e], l);
        double r = std::abs(p1 - p2);
        if (e != F.split) r = std::max({r, std::abs(p1 - pe), std::abs(p2 - pe)});
        out[e] = r;
    }
    return out;
}

cplx dbar_at_edge(const EdgeField& F, EdgeId f) {
    const auto& d = *F.domain;
    if (d.edge_angle8(f) != 0) throw NotInterior("dbar_at_edge expects an east-pointing edge");
    SquareId west = WiredDomain::corner_square(WiredDomain::edge_tail(f));
    SquareId east = WiredDomain::corner_square(d.edge_head(f));
    auto ve = vertical_edges(d, east), vw = vertical_edges(d, west);
    for (EdgeId e : {ve[0], ve[1], vw[0], vw[1]})
        if (e < 0 || !F.defined[e]) throw NotInterior("f lacks vertical neighbours");
    cplx lb = std::conj(kLambda);
    // ve[0]/vw[0] are the northern edges, ve[1]/vw[1] the southern
    return 0.5 * (lb * (F[ve[0]] - F[vw[1]]) - kLambda * (F[vw[0]] - F[ve[1]]));
}

FaceField integrate_H(const EdgeField& F, const DobrushinDomain& dd, double tol) {
    const auto& d = *F.domain;
    FaceField H;
    H.domain = F.domain;
    // adjacency: (face, neighbour face, H(face) - H(neighbour))
    std::map<P2, std::vector<std::pair<P2, double>>> adj;
    auto link = [&](P2 black, P2 white, double jump) {
        adj[black].push_back({white, jump});
        adj[white].push_back({black, -jump});
    };
    auto faces_of = [&](EdgeId e) {
        P2 m = d.edge_midpoint2(e);
        P2 a, b;
        if (even(m.x)) a = {m.x, m.y - 1}, b = {m.x, m.y + 1};
        else a = {m.x - 1, m.y}, b = {m.x + 1, m.y};
        return lattice::is_black_face(a) ? std::pair{a, b} : std::pair{b, a};
    };
    for (CornerId c = 0; c < d.num_corners(); ++c) {
        if (d.incoming(c) || !F.defined[2 * c]) continue;
        EdgeId e = d.medial_edge(c);
        if (e == F.split) continue;
        auto [b, w] = faces_of(e);
        link(b, w, std::norm(F.values[e]));
    }
    // the root: the outer white face meets the black faces across the two outer corners
    CornerId c_in = WiredDomain::edge_tail(dd.e_i), c_out = d.edge_head(dd.e_o);
    SquareId q = dd.root;
    P2 qc = d.square(q).center;
    int din = WiredDomain::corner_dir(c_in), dout = WiredDomain::corner_dir(c_out);
    int quad_free = (dout == (din + 1) % 4) ? din : dout;
    P2 w_free = qc + lattice::kQuadVec[quad_free];
    // the black face sharing the medial direction of c_out with the free face is wired
    auto across = [&](int dir) {
        for (int k = 0; k < 4; ++k) {
            P2 f = qc + lattice::kQuadVec[k];
            if (f != w_free && (k == dir || (k + 1) % 4 == dir)) return f;
        }
        return w_free;
    };
    link(across(din), w_free, std::norm(F.values[dd.e_i]));
    link(across(dout), w_free, std::norm(F.values[dd.e_o]));

    // BFS from a wired boundary face
    P2 start = across(dout);
    H.values[start] = 0;
    std::deque<P2> qu{start};
    while (!qu.empty()) {
        P2 x = qu.front();
        qu.pop_front();
        for (auto& [y, jump] : adj[x]) {
            double hy = H.values[x] - jump;
            auto it = H.values.find(y);
            if (it == H.values.end()) {
                H.values[y] = hy;
                qu.push_back(y);
            } else {
                H.max_cycle_residual = std::max(H.max_cycle_residual, std::abs(it->second - hy));
            }
        }
    }
    if (H.max_cycle_residual > tol)
        throw NotClosed("H increments do not close: residual " + std::to_string(H.max_cycle_residual));
    // counter-clockwise from a to b the boundary passes the free side
    H.zeta = H.values[w_free];
    H.xi = H.values[start];
    for (auto& [p, v] : H.values) {
        if (d.face_inside(p) || p == w_free) continue;
        H.boundary_spread = std::max(H.boundary_spread, std::abs(v - (lattice::is_black_face(p) ? H.xi : H.zeta)));
    }
    if (F.split >= 0) {
        auto [b, w] = faces_of(F.split);
        P2 lo = b.y < w.y ? b : w, hi = b.y < w.y ? w : b;
        if (H.values.count(lo)) H.eta_below = H.values[lo];
        if (H.values.count(hi)) H.eta_above = H.values[hi];
    }
    return H;
}

void write_csv(const VertexField& f, const std::string& path) {
    std::ofstream o(path);
    if (!o) throw ConfigError("cannot write " + path);
    o << "x2,y2,re,im\n";
    o.precision(17);
    for (auto& [p, v] : f.values) o << p.x << "," << p.y << "," << v.real() << "," << v.imag() << "\n";
}

void write_csv(const EdgeField& f, const std::string& path, const EdgeField* se) {
    std::ofstream o(path);
    if (!o) throw ConfigError("cannot write " + path);
    o << "edge,re,im,stderr_re,stderr_im\n";
    o.precision(17);
    for (std::size_t e = 0; e < f.values.size(); ++e) {
        if (!f.defined[e]) continue;
        cplx s = se ? se->values[e] : cplx(0, 0);
        o << e << "," << f.values[e].real() << "," << f.values[e].imag() << "," << s.real() << "," << s.imag() << "\n";
    }
}

}  // namespace fkforge::dca
