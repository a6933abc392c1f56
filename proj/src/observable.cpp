#include "fkforge/observable.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace fkforge::observable {

using lattice::CornerId;
using lattice::SquareId;
using lattice::WiredDomain;
using rcmodel::BondConfig;
using rcmodel::LoopState;

namespace {

int turn8(const WiredDomain& d, EdgeId a, EdgeId b) {
    int t = ((d.edge_angle8(b) - d.edge_angle8(a)) % 8 + 8) % 8;
    return t > 4 ? t - 8 : t;
}

// the loop through corner start, as the edges leaving each of its corners
std::vector<EdgeId> trace(const LoopState& st, CornerId start) {
    const auto& d = st.domain();
    std::vector<EdgeId> out;
    CornerId x = start;
    do {
        CornerId y = st.next(x);
        out.push_back(d.incoming(x) ? d.side_edge(x, y) : d.medial_edge(x));
        x = y;
    } while (x != start);
    return out;
}

// Adds weight * sign * exp(-i W / 2) for every edge of the path g, where W is the
// winding of the reversed path from its last edge; turns[j] is the turn g[j] -> g[j+1].
void deposit(EdgeField& out, const std::vector<EdgeId>& g, const std::vector<int>& turns, double weight,
             double sign, cplx* first_value) {
    int T = 0;
    for (int j = int(g.size()) - 1; j >= 0; --j) {
        if (j < int(g.size()) - 1) T += turns[j];
        cplx val = sign * weight * std::polar(1.0, kPi / 8 * T);
        if (j == 0 && first_value) {
            *first_value += val;
        } else {
            out.values[g[j]] += val;
            out.defined[g[j]] = 1;
        }
    }
}

struct Accumulator {
    const DobrushinDomain& dd;
    const WiredDomain& d;
    EdgeField F, Ft, F_alt;
    CornerId in2, out2;

    explicit Accumulator(const DobrushinDomain& dd_)
        : dd(dd_), d(*dd_.base), F(dd_.base), Ft(dd_.base), F_alt(dd_.base) {
        if (dd.f < 0) throw ConfigError("observables need a marked edge f");
        in2 = WiredDomain::edge_tail(dd.cut);
        out2 = d.edge_head(dd.cut);
        F.split = F_alt.split = dd.f;
        Ft.ref_angle8 = d.edge_angle8(dd.e_o);
        for (CornerId c = 0; c < d.num_corners(); ++c) {
            if (!d.corner_interior(c) || d.incoming(c)) continue;
            CornerId h = d.medial_neighbor(c);
            if (h >= 0 && d.corner_interior(h)) F.defined[2 * c] = Ft.defined[2 * c] = F_alt.defined[2 * c] = 1;
        }
        for (auto* fld : {&F, &Ft, &F_alt}) fld->defined[dd.e_i] = fld->defined[dd.e_o] = 1;
    }

    void add(const LoopState& st, double w) {
        // F: the loop through f cut open at f, with the root closed by the external arc
        {
            CornerId q = d.edge_head(dd.f);
            auto loop = trace(st, q);  // starts with the edge leaving q, ends with f
            std::vector<EdgeId> g{dd.f};
            g.insert(g.end(), loop.begin(), loop.end());  // f_i, x1 .. xk, f_o
            std::vector<EdgeId> path;
            std::vector<int> turns;
            int arc_turn = 0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (g[j] == dd.cut) {
                    EdgeId prev = g[j - 1], next = g[j + 1];
                    arc_turn = turn8(d, prev, dd.cut) + turn8(d, dd.cut, next) - turn8(d, prev, dd.e_o) -
                               turn8(d, dd.e_i, next);
                    path.push_back(dd.e_o);
                    path.push_back(dd.e_i);
                } else {
                    path.push_back(g[j]);
                }
            }
            for (std::size_t j = 0; j + 1 < path.size(); ++j)
                turns.push_back(path[j] == dd.e_o && path[j + 1] == dd.e_i ? arc_turn
                                                                             : turn8(d, path[j], path[j + 1]));
            deposit(F, path, turns, w, -1.0, &F.split_value);
            for (std::size_t j = 0; j + 1 < path.size(); ++j)
                if (path[j] == dd.e_o && path[j + 1] == dd.e_i) turns[j] += 16;
            deposit(F_alt, path, turns, w, -1.0, &F_alt.split_value);
        }
        // F~: the root loop cut open, from e_i to e_o
        {
            auto loop = trace(st, out2);  // starts at out2, ends with the cut
            std::vector<EdgeId> path{dd.e_i};
            path.insert(path.end(), loop.begin(), loop.end() - 1);
            path.push_back(dd.e_o);
            std::vector<int> turns;
            for (std::size_t j = 0; j + 1 < path.size(); ++j) turns.push_back(turn8(d, path[j], path[j + 1]));
            deposit(Ft, path, turns, w, 1.0, nullptr);
        }
    }

    void scale(double s) {
        for (auto* fld : {&F, &Ft, &F_alt}) {
            for (auto& v : fld->values) v *= s;
            fld->split_value *= s;
        }
    }
};

}  // namespace

Observables observables_exact(const DobrushinDomain& dd) {
    const auto& d = *dd.base;
    Accumulator acc(dd);
    int nmin = 1 << 30;
    std::vector<int> counts;
    rcmodel::for_each_config(d, [&](const BondConfig&, int loops) {
        counts.push_back(loops);
        nmin = std::min(nmin, loops);
    });
    double Z = 0;
    std::size_t k = 0;
    rcmodel::for_each_config(d, [&](const BondConfig& c, int) {
        double w = std::pow(kSqrt2, counts[k++] - nmin);
        Z += w;
        LoopState st(d, c);
        acc.add(st, w);
    });
    acc.scale(1.0 / Z);
    return {acc.F, acc.Ft, acc.F_alt};
}

McObservables observable_mc(const DobrushinDomain& dd, int chains, long sweeps, std::uint64_t seed) {
    if (sweeps < 1 || chains < 1) throw NoSamples("observable_mc needs at least one sweep and one chain");
    const auto& d = *dd.base;
    long burn = sweeps / 10;
    long kept = sweeps - burn;
    if (kept < 1) throw NoSamples("no sweeps left after burn-in");
    std::vector<Accumulator> per_chain;
    for (int c = 0; c < chains; ++c) {
        Accumulator acc(dd);
        rcmodel::MetropolisChain ch(d, seed, std::uint64_t(c));
        for (long s = 0; s < burn; ++s) ch.sweep();
        BondConfig cfg;
        for (long s = 0; s < kept; ++s) {
            ch.sweep();
            LoopState st(d, ch.config());
            acc.add(st, 1.0);
        }
        acc.scale(1.0 / double(kept));
        per_chain.push_back(std::move(acc));
    }
    McObservables out{EdgeField(dd.base), EdgeField(dd.base), EdgeField(dd.base), EdgeField(dd.base), 0};
    out.samples = long(chains) * kept;
    auto combine = [&](auto member, EdgeField& mean, EdgeField& se) {
        const EdgeField& first = per_chain[0].*member;
        mean.defined = se.defined = first.defined;
        mean.split = first.split;
        mean.ref_angle8 = se.ref_angle8 = first.ref_angle8;
        for (std::size_t e = 0; e < mean.values.size(); ++e) {
            double sr = 0, si = 0, qr = 0, qi = 0;
            for (auto& a : per_chain) {
                cplx v = (a.*member).values[e];
                sr += v.real(), si += v.imag(), qr += v.real() * v.real(), qi += v.imag() * v.imag();
            }
            double n = chains;
            mean.values[e] = {sr / n, si / n};
            if (chains > 1) {
                double vr = std::max(0.0, (qr - sr * sr / n) / (n - 1)), vi = std::max(0.0, (qi - si * si / n) / (n - 1));
                se.values[e] = {std::sqrt(vr / n), std::sqrt(vi / n)};
            }
        }
        for (auto& a : per_chain) mean.split_value += (a.*member).split_value / double(chains);
    };
    combine(&Accumulator::F, out.F, out.F_se);
    combine(&Accumulator::Ft, out.Ft, out.Ft_se);
    return out;
}

Identities identities(const DobrushinDomain& dd, const Observables& o) {
    const auto& d = *dd.base;
    Identities id;
    id.eps = o.F[dd.e_o] / o.Ft[dd.e_o];
    id.eps_i = -o.F[dd.e_i] / o.Ft[dd.e_i];
    id.eps_phase_real = std::abs((id.eps * std::polar(1.0, kPi / 8 * d.edge_angle8(dd.e_o))).imag());
    id.beta = std::norm(o.Ft[dd.f]);
    id.beta_o = std::norm(o.F[dd.e_o]);
    id.beta_i = std::norm(o.F[dd.e_i]);
    id.dbar_f = dca::dbar_at_edge(o.F, dd.f);
    return id;
}

Coefficients coefficients(double upsilon, double phi) {
    double gap = phi - upsilon;
    if (!(gap >= 0 && gap <= 2 * kPi)) throw BadArc("need upsilon <= phi <= upsilon + 2 pi");
    Coefficients c;
    c.alpha = 2 * std::cos(gap / 2);
    double cc = std::cos((upsilon + phi + kPi) / 4);
    c.beta = 2 * std::sin(gap / 2) * cc * cc;
    if (c.beta < 0) c.beta = 0;  // rounding at the degenerate ends
    return c;
}

namespace {

using Poly = std::vector<cplx>;  // highest degree first

cplx peval(const Poly& p, cplx z) {
    cplx acc = 0;
    for (cplx c : p) acc = acc * z + c;
    return acc;
}

Poly pderiv(const Poly& p) {
    Poly out;
    int n = int(p.size()) - 1;
    for (int k = 0; k < n; ++k) out.push_back(p[k] * double(n - k));
    return out;
}

std::vector<cplx> roots(const Poly& p) {
    int n = int(p.size()) - 1;
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(n, n);
    for (int k = 0; k < n; ++k) C(0, k) = -p[k + 1] / p[0];
    for (int k = 1; k < n; ++k) C(k, k - 1) = 1;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
    std::vector<cplx> out;
    for (int k = 0; k < n; ++k) out.push_back(es.eigenvalues()[k]);
    return out;
}

// polish a double root: Newton on the derivative
cplx polish_double(const Poly& p, cplx z) {
    Poly d1 = pderiv(p), d2 = pderiv(d1);
    for (int it = 0; it < 3; ++it) {
        cplx den = peval(d2, z);
        if (std::abs(den) < 1e-300) break;
        z -= peval(d1, z) / den;
    }
    return z;
}

bool on_arc(cplx z, double from, double len) {
    double t = std::fmod(std::arg(z) - from, 2 * kPi);
    if (t < 0) t += 2 * kPi;
    return t > 0 && t < len;
}

// pair four roots into the two closest pairs
std::array<cplx, 2> pair_up(const std::vector<cplx>& r) {
    static const int P[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < 3; ++k) {
        double s = std::abs(r[P[k][0]] - r[P[k][1]]) + std::abs(r[P[k][2]] - r[P[k][3]]);
        if (s < bd) bd = s, best = k;
    }
    return {0.5 * (r[P[best][0]] + r[P[best][1]]), 0.5 * (r[P[best][2]] + r[P[best][3]])};
}

}  // namespace

QReport verify_Q(double upsilon, double phi, double alpha, double beta, double tol) {
    double gap = phi - upsilon;
    if (!(gap >= 0 && gap <= 2 * kPi)) throw BadArc("need upsilon <= phi <= upsilon + 2 pi");
    cplx u = std::polar(1.0, upsilon), v = std::polar(1.0, phi), I(0, 1);
    QReport rep;
    auto measure = [&](const Poly& p, cplx z) {
        Poly dp = pderiv(p);
        return std::max({std::abs(peval(p, z)), std::abs(peval(dp, z)), std::abs(std::abs(z) - 1)});
    };
    if (std::abs(u - v) < 1e-12) {
        // Q = Qhat (z - u)^2 with Qhat = -z^2 + i alpha z + 1
        Poly qh{-1.0, I * alpha, 1.0};
        auto r = roots(qh);
        cplx n = polish_double(qh, 0.5 * (r[0] + r[1]));
        rep.n = rep.m = n;
        rep.max_residual = std::max(measure(qh, n), beta);
        rep.m_on_uv = rep.n_on_vu = true;
    } else {
        Poly q{-1.0, I * alpha + u + v, 1.0 - I * alpha * (u + v) - u * v + beta * (u - v), -u - v + I * alpha * u * v,
               u * v};
        auto pr = pair_up(roots(q));
        cplx a = polish_double(q, pr[0]), b = polish_double(q, pr[1]);
        if (on_arc(b, upsilon, gap)) std::swap(a, b);
        rep.m = a;
        rep.n = b;
        rep.m_on_uv = on_arc(a, upsilon, gap);
        rep.n_on_vu = on_arc(b, phi, 2 * kPi - gap);
        rep.max_residual = std::max(measure(q, a), measure(q, b));
    }
    if (!(rep.max_residual < tol) || !rep.m_on_uv || !rep.n_on_vu)
        throw VerificationFailed("Q lacks two double roots on the circle (residual " + std::to_string(rep.max_residual) + ")");
    return rep;
}

ContinuumObservable ContinuumObservable::make(double upsilon, double phi) {
    ContinuumObservable o;
    auto c = coefficients(upsilon, phi);
    o.upsilon = upsilon;
    o.phi = phi;
    o.u = std::polar(1.0, upsilon);
    o.v = std::polar(1.0, phi);
    o.alpha = c.alpha;
    o.beta = c.beta;
    auto rep = verify_Q(upsilon, phi, c.alpha, c.beta);
    o.m = rep.m;
    o.n = rep.n;
    o.degenerate = std::abs(o.u - o.v) < 1e-12;
    cplx I(0, 1);
    cplx lead = o.degenerate ? -I * o.n : I * o.m * o.n / std::polar(1.0, 0.5 * (upsilon + phi));
    o.sign = lead.real() >= 0 ? 1.0 : -1.0;
    return o;
}

ContinuumValues continuum_F_H(cplx z, const ContinuumObservable& o) {
    if (std::abs(z) < 1e-300 || std::abs(z - o.u) < 1e-14 || std::abs(z - o.v) < 1e-14)
        throw Singular("continuum observable is singular at 0, u and v");
    cplx I(0, 1);
    ContinuumValues out;
    cplx su = std::sqrt(1.0 - z / o.u), sv = std::sqrt(1.0 - z / o.v);
    cplx suv = std::polar(1.0, 0.5 * (o.upsilon + o.phi));
    if (o.degenerate) {
        out.F = o.sign * I * (z - o.n) / z;
        out.Ft = 0;
    } else {
        out.F = o.sign * I * (z - o.m) * (z - o.n) / (z * suv * su * sv);
        out.Ft = std::sqrt(o.u - o.v) / (suv * su * sv) / std::sqrt(kPi);
    }
    // arg((z-u)/(z-v)) continued through the disk
    double arg_ratio = (o.upsilon - o.phi) + std::arg(su * su) - std::arg(sv * sv);
    out.H = (-1.0 / z - z).imag() + o.alpha * std::log(std::abs(z)) - o.beta * arg_ratio;
    return out;
}

double continuum_H_boundary(double t, const ContinuumObservable& o) {
    cplx z = std::polar(1.0, t);
    double arg_ratio = (o.upsilon - o.phi) + std::arg(1.0 - z / o.u) - std::arg(1.0 - z / o.v);
    return -o.beta * arg_ratio;
}

RatioDeviation compare_discrete_continuum(const DobrushinDomain& d, const EdgeField& F,
                                          const loewner::Uniformizer& phi, double rmin, double rmax) {
    const auto& dom = *d.base;
    double upsilon = std::arg(phi.clamped(dom.corner_pos(d.a())));
    double gap = std::arg(phi.clamped(dom.corner_pos(d.b()))) - upsilon;
    gap -= 2 * kPi * std::floor(gap / (2 * kPi));
    auto obs = ContinuumObservable::make(upsilon, upsilon + gap);

    double h = 1e-5 * dom.geometry().mesh;
    std::vector<double> r;
    for (SquareId q = 0; q < dom.num_squares(); ++q) {
        auto v = dca::vertex_value(F, q);
        if (!v) continue;
        auto c = dom.square(q).center;
        cplx z = dom.point_pos(c.x, c.y);
        cplx g = phi(z);
        if (std::abs(g) < rmin || std::abs(g) > rmax) continue;
        cplx dphi = (phi(z + h) - phi(z - h)) / (2 * h);
        double cont = std::abs(continuum_F_H(g, obs).F) * std::sqrt(std::abs(dphi));
        if (cont > 0) r.push_back(std::abs(*v) / cont);
    }
    RatioDeviation out;
    out.points = int(r.size());
    if (r.size() < 2) return out;
    long pairs = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (i == j) continue;
            double dev = std::abs(r[i] / r[j] - 1);
            out.max_rel = std::max(out.max_rel, dev);
            out.mean_rel += dev;
            ++pairs;
        }
    out.mean_rel /= pairs;
    return out;
}

}  // namespace fkforge::observable
