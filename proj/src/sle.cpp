#include "fkforge/sle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

namespace fkforge::sle {

namespace {
constexpr double kReflect = 1 - 1e-6;  // occupation statistic

void record(SlePath& out, const KrStepper& s) {
    out.driving.t.push_back(s.t);
    out.driving.upsilon.push_back(s.upsilon);
    out.driving.phi.push_back(s.phi);
    out.driving.U.push_back(std::polar(1.0, s.upsilon));
    out.driving.V.push_back(std::polar(1.0, s.phi));
    out.X.push_back(s.X);
    out.Z.push_back(s.Z);
    out.M.push_back(s.M());
    out.N.push_back(s.N());
    out.sign.push_back(s.sign);
}
}  // namespace

double KrParams::sigma() const { return std::sqrt(kappa) / 2; }
double KrParams::b() const { return (rho + 2) / 4; }

void KrParams::validate() const {
    if (!(kappa >= 0) || !std::isfinite(kappa)) throw BadParams("kappa must be nonnegative");
    if (!(dt > 0) || !(T >= 0)) throw BadParams("need dt > 0 and T >= 0");
    if (!std::isfinite(rho)) throw BadParams("rho must be finite");
    if (!(edge_band > 0 && edge_band < 1)) throw BadParams("edge_band must lie in (0, 1)");
    double gap = phi0 - upsilon0;
    if (gap < -1e-12 || gap > 2 * kPi + 1e-12) throw BadParams("need 0 <= phi0 - upsilon0 <= 2 pi");
}

KrStepper::KrStepper(const KrParams& p, std::uint64_t seed, std::uint64_t stream)
    : p_(p), rng_(seed, stream), cap_(1 / std::sqrt(p.dt)), edge_(1 - p.edge_band) {
    p_.validate();
    X = std::clamp((p.phi0 - p.upsilon0) / 2, 0.0, kPi);
    Z = std::cos(X);
    phi = p.phi0;
    upsilon = p.phi0 - 2 * X;
    at_edge_ = std::abs(Z) >= edge_;
    X_prev = X, Z_prev = Z;
}

double KrStepper::N() const {
    return sign * std::exp(t / 2) * std::sqrt(std::max(0.0, std::sin(X))) * std::cos((upsilon + phi + kPi) / 4);
}

void KrStepper::step() {
    const double s = p_.sigma(), drift = p_.b() + s * s / 2, dt = p_.dt;
    Z_prev = Z, X_prev = X;
    double dB = std::sqrt(dt) * rng_.normal();
    Z += s * std::sqrt(std::max(0.0, 1 - Z * Z)) * dB - drift * Z * dt;
    Z = std::clamp(Z, -1.0, 1.0);
    double c = std::cos(X_prev) / std::sin(X_prev);
    if (!(std::abs(c) <= cap_)) {
        c = std::cos(X_prev) >= 0 ? cap_ : -cap_;
        ++capped;
    }
    phi += c * dt;
    X = std::acos(Z);
    upsilon = phi - 2 * X;
    t += dt;
    ++steps;
    dZ = Z - Z_prev, dX = X - X_prev;
    if (std::abs(Z) > kReflect) ++reflecting;
    bool edge = std::abs(Z) >= edge_;
    if (at_edge_ && !edge) sign = rng_.uniform() < 0.5 ? 1 : -1;
    at_edge_ = edge;
}

DrivingPath simulate_radial_sle(double kappa, double T, double dt, std::uint64_t seed, std::uint64_t stream) {
    if (!(kappa >= 0) || !(dt > 0) || !(T >= 0)) throw BadParams("need kappa >= 0, dt > 0, T >= 0");
    Philox rng(seed, stream);
    long n = std::lround(T / dt);
    std::vector<double> t{0}, a{0};
    double sk = std::sqrt(kappa * dt);
    for (long k = 1; k <= n; ++k) {
        double z = rng.normal();
        t.push_back(k * dt);
        a.push_back(a.back() + sk * z);
    }
    return DrivingPath::from_arguments(std::move(t), std::move(a));
}

SlePath simulate_sle_kr(const KrParams& p, std::uint64_t seed, std::uint64_t stream, int record_every) {
    if (record_every < 1) throw BadParams("record_every must be positive");
    KrStepper st(p, seed, stream);
    SlePath out;
    record(out, st);
    long n = std::lround(p.T / p.dt);
    for (long k = 1; k <= n; ++k) {
        st.step();
        if (k % record_every == 0 || k == n) record(out, st);
    }
    out.steps = st.steps, out.capped = st.capped, out.reflecting = st.reflecting;
    return out;
}

MeanSe martingale_stats(const std::vector<SlePath>& paths, Martingale which) {
    if (paths.empty()) throw InsufficientData("no paths");
    long double s = 0, s2 = 0;
    for (auto& p : paths) {
        double v = which == Martingale::M ? p.M.back() : p.N.back();
        s += v, s2 += v * v;
    }
    double n = double(paths.size());
    MeanSe r;
    r.n = long(paths.size());
    r.mean = double(s / n);
    r.se = n > 1 ? std::sqrt(std::max(0.0, double(s2 / n - (s / n) * (s / n))) / (n - 1)) : 0;
    return r;
}

void BesselAccumulator::add(double X, double dX, double dt) {
    if (X < lo_ || X > kPi - lo_) return;
    double x = std::cos(X) / std::sin(X) * dt;
    ++n_;
    sxx_ += x * x, sxy_ += x * dX, syy_ += dX * dX, sdt_ += dt, sy_ += dX;
}

void BesselAccumulator::merge(const BesselAccumulator& o) {
    n_ += o.n_;
    sxx_ += o.sxx_, sxy_ += o.sxy_, syy_ += o.syy_, sdt_ += o.sdt_, sy_ += o.sy_;
}

BesselFit BesselAccumulator::fit() const {
    if (n_ < 10 || sxx_ <= 0) throw InsufficientData("too few increments away from reflection");
    BesselFit f;
    f.used = n_;
    f.b = sxy_ / sxx_;
    double ssr = syy_ - 2 * f.b * sxy_ + f.b * f.b * sxx_;
    f.sigma2 = ssr / sdt_;
    // residual variance per step is sigma^2 dt with dt constant
    f.b_se = std::sqrt(f.sigma2 * (sdt_ / n_) / sxx_);
    f.r2 = syy_ > 0 ? 1 - ssr / syy_ : 0;
    return f;
}

BesselFit bessel_stats(const std::vector<SlePath>& paths, double lo) {
    BesselAccumulator acc(lo);
    for (auto& p : paths)
        for (std::size_t k = 1; k < p.X.size(); ++k)
            acc.add(p.X[k - 1], p.X[k] - p.X[k - 1], p.driving.t[k] - p.driving.t[k - 1]);
    return acc.fit();
}

double QvBins::max_rel_error(long min_count) const {
    double e = 0;
    for (std::size_t i = 0; i < rate.size(); ++i)
        if (count[i] >= min_count && predicted[i] > 0) e = std::max(e, std::abs(rate[i] / predicted[i] - 1));
    return e;
}

EnsembleReport simulate_ensemble(const KrParams& p, long paths, const std::vector<double>& checkpoints,
                                 std::uint64_t seed, int qv_bins) {
    p.validate();
    if (paths < 2) throw InsufficientData("need at least two paths");
    long n = std::lround(p.T / p.dt);
    std::vector<long> at;
    for (double c : checkpoints) {
        long k = std::lround(c / p.dt);
        if (k < 0 || k > n) throw BadParams("checkpoint outside [0, T]");
        at.push_back(k);
    }
    std::size_t nc = at.size();
    std::vector<long double> sm(nc), sm2(nc), sn(nc), sn2(nc);
    std::vector<long double> qv(qv_bins), qp(qv_bins);
    std::vector<long> qc(qv_bins);
    BesselAccumulator bessel;
    long refl = 0, capped = 0, steps = 0;
    EnsembleReport r;
    for (long path = 0; path < paths; ++path) {
        KrStepper st(p, seed, std::uint64_t(path));
        if (path == 0) r.M0 = st.M(), r.N0 = st.N();
        std::size_t next = 0;
        auto take = [&](long k) {
            while (next < nc && at[next] == k) {
                double m = st.M(), v = st.N();
                sm[next] += m, sm2[next] += m * m, sn[next] += v, sn2[next] += v * v;
                ++next;
            }
        };
        take(0);
        for (long k = 1; k <= n; ++k) {
            st.step();
            bessel.add(st.X_prev, st.dX, p.dt);
            int b = std::min(qv_bins - 1, int((st.Z_prev + 1) / 2 * qv_bins));
            qv[b] += st.dZ * st.dZ;
            qp[b] += p.sigma() * p.sigma() * (1 - st.Z_prev * st.Z_prev) * p.dt;
            ++qc[b];
            take(k);
        }
        refl += st.reflecting, capped += st.capped, steps += st.steps;
    }
    double np = double(paths);
    r.paths = paths;
    r.checkpoints = checkpoints;
    for (std::size_t i = 0; i < nc; ++i) {
        auto ms = [&](long double s, long double s2) {
            MeanSe m;
            m.n = paths;
            m.mean = double(s / np);
            m.se = std::sqrt(std::max(0.0, double(s2 / np - (s / np) * (s / np))) / (np - 1));
            return m;
        };
        r.M.push_back(ms(sm[i], sm2[i]));
        r.N.push_back(ms(sn[i], sn2[i]));
    }
    for (int b = 0; b < qv_bins; ++b) {
        r.qv.center.push_back(-1 + (b + 0.5) * 2.0 / qv_bins);
        r.qv.count.push_back(qc[b]);
        r.qv.rate.push_back(qc[b] ? double(qv[b] / (qc[b] * p.dt)) : 0);
        r.qv.predicted.push_back(qc[b] ? double(qp[b] / (qc[b] * p.dt)) : 0);
    }
    try {
        r.bessel = bessel.fit();
    } catch (const InsufficientData&) {
    }
    r.reflect_fraction = steps ? double(refl) / steps : 0;
    r.capped_fraction = steps ? double(capped) / steps : 0;
    return r;
}

// ---------------------------------------------------------------- branching

namespace {

cplx mobius_to_zero(cplx z, cplx a) { return (z - a) / (1.0 - std::conj(a) * z); }

struct Process {
    int rep;
    std::vector<int> members;  // other targets carried in this frame
    std::vector<cplx> img;
    KrParams params;
    double t0;
    SlePath path;  // lineage prefix, then this process in lineage time
};

}  // namespace

BranchingTree branching_sle(const std::vector<cplx>& targets, double kappa, double T, double dt, std::uint64_t seed,
                            const BranchingOptions& opt) {
    if (targets.empty()) throw BadParams("no targets");
    if (!(kappa > 4 && kappa < 8)) throw BadParams("branching needs 4 < kappa < 8");
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!(std::abs(targets[i]) < 1)) throw BadParams("targets must lie in the open disk");
        for (std::size_t j = 0; j < i; ++j)
            if (targets[i] == targets[j]) throw BadParams("targets must be distinct");
    }
    BranchingTree tree;
    tree.targets = targets;
    tree.paths.resize(targets.size());

    const double near = std::max(opt.swallow, opt.reach * std::sqrt(dt));
    std::deque<Process> queue;
    {
        Process root;
        root.rep = 0;
        cplx a = targets[0];
        double u = std::arg(mobius_to_zero(1.0, a));
        root.params = {kappa, kappa - 6, u, u, T, dt};
        for (std::size_t j = 1; j < targets.size(); ++j) {
            root.members.push_back(int(j));
            root.img.push_back(mobius_to_zero(targets[j], a));
        }
        root.t0 = 0;
        queue.push_back(std::move(root));
    }

    while (!queue.empty()) {
        Process P = std::move(queue.front());
        queue.pop_front();
        KrStepper st(P.params, seed, std::uint64_t(P.rep));
        auto rec = [&](const KrStepper& s) {
            record(P.path, s);
            P.path.driving.t.back() += P.t0;
        };
        rec(st);
        long n = std::lround((T - P.t0) / dt);
        for (long k = 1; k <= n; ++k) {
            st.step();
            cplx U = std::polar(1.0, st.upsilon);
            std::vector<int> gone;
            for (std::size_t m = 0; m < P.members.size(); ++m) {
                P.img[m] = loewner::slit_map(P.img[m], U, dt);
                if (1 - std::abs(P.img[m]) < opt.seal && std::abs(P.img[m] - U) < near) gone.push_back(int(m));
            }
            if (k % opt.record_every == 0 || k == n || !gone.empty()) rec(st);
            if (gone.empty()) continue;

            double tau = P.t0 + st.t;
            // targets cut off together on the same side of the tip share a pocket
            std::map<int, std::vector<int>> pockets;
            for (int m : gone) pockets[std::imag(P.img[m] / U) >= 0 ? 1 : -1].push_back(m);
            std::vector<char> removed(P.members.size(), 0);
            for (auto& [side, ms] : pockets) {
                (void)side;
                Process C;
                std::vector<std::pair<int, cplx>> group;
                for (int m : ms) group.push_back({P.members[m], P.img[m]}), removed[m] = 1;
                std::sort(group.begin(), group.end(),
                          [](auto& x, auto& y) { return x.first < y.first; });
                C.rep = group.front().first;
                cplx a = group.front().second;
                if (std::abs(a) >= 1) a *= (1 - 1e-12) / std::abs(a);
                double u = std::arg(mobius_to_zero(U, a));
                double v = std::arg(mobius_to_zero(std::polar(1.0, st.phi), a));
                double gap = std::fmod(v - u + 4 * kPi, 2 * kPi);
                C.params = {kappa, kappa - 6, u, u + gap, T, dt};
                for (std::size_t g = 1; g < group.size(); ++g) {
                    C.members.push_back(group[g].first);
                    C.img.push_back(mobius_to_zero(group[g].second, a));
                }
                C.t0 = tau;
                C.path = P.path;
                // pairs split here: this pocket against the rest of P and the other pockets
                std::vector<int> others{P.rep};
                for (std::size_t m = 0; m < P.members.size(); ++m)
                    if (std::find(ms.begin(), ms.end(), int(m)) == ms.end()) others.push_back(P.members[m]);
                for (auto& [i, w] : group)
                    for (int j : others) {
                        auto key = std::minmax(i, j);
                        if (!tree.branch_time.count(key)) tree.branch_time[key] = tau;
                    }
                queue.push_back(std::move(C));
            }
            std::vector<int> keep_m;
            std::vector<cplx> keep_i;
            for (std::size_t m = 0; m < P.members.size(); ++m)
                if (!removed[m]) keep_m.push_back(P.members[m]), keep_i.push_back(P.img[m]);
            P.members = std::move(keep_m);
            P.img = std::move(keep_i);
        }
        P.path.steps = st.steps, P.path.capped = st.capped, P.path.reflecting = st.reflecting;
        tree.paths[P.rep] = std::move(P.path);
    }
    return tree;
}

std::vector<std::string> check_ultrametric(const BranchingTree& t) {
    std::vector<std::string> out;
    int n = int(t.targets.size());
    auto bt = [&](int i, int j) {
        auto it = t.branch_time.find(std::minmax(i, j));
        return it == t.branch_time.end() ? std::numeric_limits<double>::infinity() : it->second;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                std::array<double, 3> s{bt(i, j), bt(i, k), bt(j, k)};
                std::sort(s.begin(), s.end());
                if (s[0] != s[1])
                    out.push_back("targets " + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k));
            }
    return out;
}

void write_path_csv(const SlePath& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f.precision(17);
    f << "t,upsilon,phi,X,Z,M,N,sign\n";
    for (std::size_t k = 0; k < p.X.size(); ++k)
        f << p.driving.t[k] << ',' << p.driving.upsilon[k] << ',' << p.driving.phi[k] << ',' << p.X[k] << ','
          << p.Z[k] << ',' << p.M[k] << ',' << p.N[k] << ',' << p.sign[k] << '\n';
}

}  // namespace fkforge::sle
