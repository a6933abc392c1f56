// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "fkforge/harness.hpp"
#include "fkforge/observable.hpp"

using namespace fkforge;
using namespace fkforge::lattice;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

DobrushinDomain dobrushin(int c, int r) {
    auto d = build_rect_domain(c, r, 1.0 / std::max(c, r));
    return mark_dobrushin(d, default_root(*d), default_f(*d));
}

// 1. loops <-> tree bijection, exhaustive
Outcome bijection() {
    Outcome o;
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {5, 3}, {4, 4}}) {
        auto d = build_rect_domain(c, r, 1.0 / c);
        auto root = default_root(*d);
        long n = 0, bad = 0;
        rcmodel::for_each_config(*d, [&](const rcmodel::BondConfig& cfg, int) {
            auto e = rcmodel::loop_representation(d, cfg);
            e.canonicalize();
            auto t = tree::build_tree(e, root);
            auto back = tree::recover_loops(t);
            back.canonicalize();
            bad += !(back == e) || !tree::check_spanning(t).empty() || !tree::check_target_independence(t).empty();
            ++n;
        });
        o.check(bad == 0 && d->num_bonds() <= 12,
                std::to_string(c) + "x" + std::to_string(r) + ": " + std::to_string(n) + " configs");
    }
    return o;
}

double tv(const std::map<int, double>& a, const std::map<int, double>& b) {
    std::set<int> keys;
    for (auto& [k, v] : a) keys.insert(k);
    for (auto& [k, v] : b) keys.insert(k);
    double s = 0;
    for (int k : keys) s += std::abs((a.count(k) ? a.at(k) : 0) - (b.count(k) ? b.at(k) : 0));
    return s / 2;
}

// 2. Metropolis loop measure
Outcome loop_measure() {
    Outcome o;
    auto d = build_rect_domain(4, 3, 0.25);
    auto exact = rcmodel::loop_count_distribution(*d);
    rcmodel::MetropolisChain ch(*d, 1);
    std::map<int, double> mc;
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
        ch.sweep();
        mc[ch.loops()] += 1.0 / n;
    }
    double dist = tv(mc, exact);
    o.check(d->num_bonds() <= 10 && dist < 0.02, fmt("TV %.4f", dist));
    auto vals = ch.stats().acceptance_values;
    std::sort(vals.begin(), vals.end());
    o.check(vals.size() == 2 && vals[0] == 1 / kSqrt2 && vals[1] == 1.0, "acceptance {1/sqrt2, 1}");
    return o;
}

// 3. discrete holomorphicity and identities
Outcome holomorphicity() {
    Outcome o;
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {5, 3}, {4, 4}}) {
        auto dd = dobrushin(c, r);
        auto obs = observable::observables_exact(dd);
        auto id = observable::identities(dd, obs);
        double rt = 0, rf = 0;
        for (auto& [e, v] : dca::sholo_residuals(obs.Ft)) rt = std::max(rt, v);
        for (auto& [e, v] : dca::sholo_residuals(obs.F))
            if (e != dd.f) rf = std::max(rf, v);
        double worst = std::max({rt, rf, std::abs(id.dbar_f - kSqrt2), std::abs(std::norm(id.eps) - id.beta),
                                 id.eps_phase_real, std::abs(id.eps - id.eps_i), std::abs(id.beta_o - id.beta)});
        o.check(worst < 1e-12, std::to_string(c) + "x" + std::to_string(r) + fmt(" worst %.1e", worst) +
                                   fmt(" beta %.6f", id.beta));
    }
    return o;
}

// 4. H integration
Outcome h_integration() {
    Outcome o;
    for (auto [c, r] : std::vector<std::pair<int, int>>{{3, 3}, {4, 3}, {4, 4}}) {
        auto dd = dobrushin(c, r);
        auto obs = observable::observables_exact(dd);
        auto H = dca::integrate_H(obs.F, dd);
        double gap = H.xi - H.zeta;
        o.check(H.max_cycle_residual < 1e-10 && H.boundary_spread < 1e-10 && gap > 0 && gap < 1,
                std::to_string(c) + "x" + std::to_string(r) + fmt(" cycle %.1e", H.max_cycle_residual) +
                    fmt(" xi-zeta %.6f", gap));
    }
    return o;
}

// 5. operators, Green's function, Cauchy kernel
Outcome operators() {
    Outcome o;
    Philox rng(5);
    dca::VertexField f{dca::Lattice::Gamma, 1.0, {}};
    for (int x = -40; x <= 40; x += 2)
        for (int y = -40; y <= 40; y += 2) f.values[{x, y}] = cplx(rng.normal(), rng.normal());
    auto dd = dca::dbar1(dca::d1(f));
    dca::VertexField black{dca::Lattice::Black, 1.0, {}};
    for (auto& [p, v] : f.values)
        if (dca::on_lattice(dca::Lattice::Black, p)) black.values[p] = v;
    double err = 0;
    for (auto& [p, v] : dca::laplacian1(black).values)
        if (dd.has(p)) err = std::max(err, std::abs(dd.at(p) - 0.25 * v));
    o.check(err < 1e-12, fmt("dbar d - Delta/4 %.1e", err));

    auto g = dca::greens_function(64);
    double nb = 0;
    for (P2 p : {P2{2, 2}, P2{2, -2}, P2{-2, 2}, P2{-2, -2}}) nb = std::max(nb, std::abs(g.G.at(p).real() - 0.25));
    double slope = dca::log_slope(g.G, 64 * kSqrt2 / 4, 64 * kSqrt2 / 2) * 2 * kPi;
    o.check(g.residual < 1e-10, fmt("Green residual %.1e", g.residual));
    o.check(nb < 1e-10, "neighbours 1/4");
    o.check(std::abs(slope - 1) < 0.02, fmt("slope * 2pi %.4f", slope));

    auto k = dca::cauchy_kernel(64);
    o.check(std::abs(k.dbar_at_z0 - 0.25) < 1e-10, fmt("dbar C(z0) %.6f (want 0.25)", k.dbar_at_z0));
    double far = dca::far_field_coefficient(k, 8, 16).real() / (kSqrt2 / (2 * kPi));
    o.check(std::abs(far - 1) < 0.05, fmt("far field / (sqrt2/2pi) %.4f", far));
    return o;
}

// 6. coefficients
Outcome coefficients() {
    Outcome o;
    Philox rng(6);
    double worst = 0;
    int off_arc = 0;
    for (int i = 0; i < 1000; ++i) {
        double ups = 2 * kPi * (rng.uniform() - 0.5);
        double phi = ups + 2 * kPi * (0.001 + 0.998 * rng.uniform());
        auto c = observable::coefficients(ups, phi);
        try {
            auto q = observable::verify_Q(ups, phi, c.alpha, c.beta);
            worst = std::max({worst, q.max_residual, std::abs(std::abs(q.m) - 1), std::abs(std::abs(q.n) - 1)});
            off_arc += !(q.m_on_uv && q.n_on_vu);
        } catch (const VerificationFailed&) {
            ++off_arc;
        }
    }
    o.check(worst < 1e-8 && off_arc == 0, fmt("1000 arcs, worst residual %.1e", worst));
    auto lo = observable::coefficients(0.4, 0.4), hi = observable::coefficients(0.4, 0.4 + 2 * kPi);
    auto nlo = observable::verify_Q(0.4, 0.4, lo.alpha, lo.beta).n;
    auto nhi = observable::verify_Q(0.4, 0.4 + 2 * kPi, hi.alpha, hi.beta).n;
    o.check(std::abs(lo.alpha - 2) < 1e-12 && std::abs(hi.alpha + 2) < 1e-12 && lo.beta < 1e-12 && hi.beta < 1e-12 &&
                std::abs(nlo - cplx(0, 1)) < 1e-8 && std::abs(nhi - cplx(0, -1)) < 1e-8,
            "degenerate limits");
    double jump = 0;
    for (int i = 0; i < 100; ++i) {
        double ups = kPi * (rng.uniform() - 0.5), phi = ups + 0.3 + 5.5 * rng.uniform();
        auto c = observable::ContinuumObservable::make(ups, phi);
        double m = 0.5 * (ups + phi);
        double d = observable::continuum_H_boundary(m, c) - observable::continuum_H_boundary(m + kPi, c);
        jump = std::max(jump, std::abs(d - c.beta * kPi));
    }
    o.check(jump < 1e-9, fmt("arc jump - beta pi %.1e", jump));
    return o;
}

sle::EnsembleReport main_ensemble;

// 7. martingales
Outcome martingales() {
    Outcome o;
    sle::KrParams p;  // (16/3, -2/3), dt 1e-4, T 1
    main_ensemble = sle::simulate_ensemble(p, 100000, {1.0}, 7);
    auto& r = main_ensemble;
    double zm = (r.M[0].mean - r.M0) / r.M[0].se, zn = (r.N[0].mean - r.N0) / r.N[0].se;
    o.check(std::abs(zm) < 3, fmt("M z %.2f", zm));
    o.check(std::abs(zn) < 3, fmt("N z %.2f", zn));
    o.check(r.qv.max_rel_error() < 0.1, fmt("QV rate error %.4f", r.qv.max_rel_error()));
    sle::KrParams w = p;
    w.kappa = 6;
    w.rho = 0;
    auto c = sle::simulate_ensemble(w, 20000, {1.0}, 7);
    double zc = (c.M[0].mean - c.M0) / c.M[0].se;
    o.check(std::abs(zc) > 3, fmt("control (6, 0) M z %.1f", zc));
    return o;
}

// 8. Bessel statistics
Outcome bessel() {
    Outcome o;
    auto& f = main_ensemble.bessel;
    o.check(f.b >= 0.30 && f.b <= 0.37, fmt("b %.4f", f.b));
    o.check(f.sigma2 >= 1.27 && f.sigma2 <= 1.40, fmt("sigma2 %.4f", f.sigma2));
    sle::KrParams p;
    std::vector<double> frac;
    for (double dt : {1e-4, 5e-5}) {
        p.dt = dt;
        frac.push_back(sle::simulate_ensemble(p, 20000, {1.0}, 8).reflect_fraction);
    }
    o.check(frac[1] < frac[0], fmt("reflection %.2e", frac[0]) + fmt(" -> %.2e", frac[1]));
    return o;
}

// 9. Loewner round trip and metrics
Outcome loewner_checks() {
    Outcome o;
    const double dt = 1e-3;
    std::vector<double> t;
    for (int k = 0; k <= 1000; ++k) t.push_back(k * dt);
    double err = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto U = sle::simulate_radial_sle(16.0 / 3, 1.0, dt, 9, s);
        auto ex = loewner::extract_driving_full(loewner::trace_from_driving(U).z, {.strict_simple = false});
        if (ex.driving.size() != U.size()) {
            err = 1e9;
            break;
        }
        for (std::size_t k = 0; k < U.size(); ++k) err = std::max(err, std::abs(ex.driving.U[k] - U.U[k]));
    }
    o.check(err < 0.05, fmt("round trip %.1e", err));
    auto slit = loewner::trace_from_driving(loewner::DrivingPath::from_arguments(t, std::vector<double>(t.size(), 0)));
    double se = 0;
    for (std::size_t k = 0; k < slit.size(); ++k) se = std::max(se, std::abs(slit.z[k] - loewner::slit_tip(1.0, slit.t[k])));
    o.check(se < 1e-4, fmt("slit %.1e", se));
    Philox rng(10);
    auto curve = [&] {
        loewner::CapCurve c;
        cplx p = 1;
        for (int k = 0; k <= 20; ++k) {
            c.t.push_back(0.05 * k);
            c.z.push_back(p);
            p += cplx(rng.uniform() - 0.5, rng.uniform() - 0.5) * 0.1;
        }
        return c;
    };
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        auto a = curve(), b = curve(), c = curve();
        bad += loewner::metric_curve(a, b) != loewner::metric_curve(b, a);
        bad += loewner::metric_curve(a, c) > loewner::metric_curve(a, b) + loewner::metric_curve(b, c) + 1e-12;
        std::vector<loewner::CapCurve> A{a}, B{b, c}, C{c};
        bad += loewner::metric_tree(A, B) != loewner::metric_tree(B, A);
        bad += loewner::metric_tree(A, C) > loewner::metric_tree(A, B) + loewner::metric_tree(B, C) + 1e-12;
        bad += loewner::metric_loop(a.z, b.z) != loewner::metric_loop(b.z, a.z);
        bad += loewner::metric_loop(a.z, c.z) > loewner::metric_loop(a.z, b.z) + loewner::metric_loop(b.z, c.z) + 1e-12;
    }
    o.check(bad == 0, "metrics on 100 triples");
    return o;
}

// 10. FK branch driving against SLE
Outcome end_to_end() {
    Outcome o;
    auto r = harness::fk_vs_sle({});
    std::string k;
    for (auto& m : r.meshes)
        k += "L=" + std::to_string(m.L) + fmt(" kappa %.3f", m.kappa.value) + fmt(" [%.3f,", m.kappa.lo) +
             fmt(" %.3f] ", m.kappa.hi);
    o.check(r.ci_hits_range, k + "CI meets [4.3, 6.4]");
    o.check(r.monotone, "moves toward 16/3 as the mesh halves");
    o.check(r.self_calibrated, fmt("synthetic %.3f", r.synthetic.value) + fmt(" [%.3f,", r.synthetic.lo) +
                                   fmt(" %.3f]", r.synthetic.hi));
    return o;
}

// 11. crossings, tortuosity and finite subtrees
Outcome crossings() {
    Outcome o;
    auto s = harness::crossing_study({});
    std::string p;
    for (std::size_t k = 0; k < s.radii.size(); ++k) p += fmt(" %.3f", s.probability[k]);
    o.check(s.nonincreasing, "P(>= 6 crossings) by r:" + p);
    o.check(s.tortuosity_monotone, "M_r monotone on " + std::to_string(s.tortuosity.size()) + " branches");

    const int L = 16;
    auto d = build_rect_domain(L, L, 1.0 / L);
    auto f = default_f(*d);
    auto m = d->edge_midpoint2(f);
    auto phi = loewner::Uniformizer::for_domain(*d, d->point_pos(m.x, m.y));
    auto sk = tree::build_skeleton(rcmodel::loop_representation(d, rcmodel::sample_sw(*d, 200, 11)), default_root(*d));
    for (auto& r : harness::subtree_distances(sk, {0.5, 0.25}, phi))
        o.check(r.d_tree < r.eta, fmt("eta %.2f:", r.eta) + fmt(" d_tree %.3f", r.d_tree) +
                                      fmt(" max component %.3f", r.max_component));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"loops-tree bijection", bijection},
        {"loop measure", loop_measure},
        {"discrete holomorphicity", holomorphicity},
        {"H integration", h_integration},
        {"operators", operators},
        {"coefficients", coefficients},
        {"SLE martingales", martingales},
        {"Bessel statistics", bessel},
        {"Loewner round trip", loewner_checks},
        {"FK branch vs SLE", end_to_end},
        {"crossings and subtrees", crossings},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu (%s): %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
