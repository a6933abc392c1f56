#include "fkforge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/push_relabel_max_flow.hpp>

namespace fkforge {

int worker_count() {
    const char* s = std::getenv("FKFORGE_WORKERS");
    if (!s) return 1;
    char* end = nullptr;
    long n = std::strtol(s, &end, 10);
    if (end == s || n < 1) return 1;
    return int(std::min(n, 256L));
}

}  // namespace fkforge

namespace fkforge::harness {

namespace fs = std::filesystem;
using lattice::CornerId;
using lattice::EdgeId;
using lattice::WiredDomain;
using loewner::CapCurve;
using loewner::DrivingPath;

void parallel_for(int n, const std::function<void(int)>& fn) {
    int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError("config field '" + path + "': " + what);
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

double get_positive(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    double v = j.get<double>();
    if (!(v > 0)) bad(path, "must be positive");
    return v;
}

long get_count(const json& j, const std::string& path) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) bad(path, "expected an integer");
    long v = j.get<long>();
    if (v <= 0) bad(path, "must be positive");
    return v;
}

template <class Fn>
void field(const json& j, const std::string& parent, const char* key, Fn&& fn) {
    if (j.contains(key)) fn(j.at(key), join(parent, key));
}

std::string hex(std::uint64_t h) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) bad("", "top level must be an object");
    ExperimentConfig c;
    static const std::set<std::string> known{"domain", "meshes", "chains", "sweeps", "samples", "seed", "targets",
                                             "annuli", "eta", "sle", "output", "stages"};
    for (auto& [k, v] : j.items())
        if (!known.count(k)) bad(k, "unknown field");

    if (!j.contains("seed")) bad("seed", "missing (no default seed)");
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) bad("seed", "expected an integer");
    if (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0) bad("seed", "must be nonnegative");
    c.seed = j.at("seed").get<std::uint64_t>();

    field(j, "", "domain", [&](const json& d, const std::string& p) {
        if (!d.is_object()) bad(p, "expected an object");
        field(d, p, "cols", [&](const json& v, const std::string& q) { c.domain.cols = int(get_count(v, q)); });
        field(d, p, "rows", [&](const json& v, const std::string& q) { c.domain.rows = int(get_count(v, q)); });
        field(d, p, "file", [&](const json& v, const std::string& q) {
            if (!v.is_string()) bad(q, "expected a string");
            c.domain.file = v.get<std::string>();
        });
    });
    field(j, "", "meshes", [&](const json& v, const std::string& p) {
        if (!v.is_array()) bad(p, "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i)
            c.meshes.push_back(int(get_count(v[i], p + "[" + std::to_string(i) + "]")));
    });
    field(j, "", "chains", [&](const json& v, const std::string& p) { c.chains = int(get_count(v, p)); });
    field(j, "", "sweeps", [&](const json& v, const std::string& p) { c.sweeps = get_count(v, p); });
    field(j, "", "samples", [&](const json& v, const std::string& p) { c.samples = get_count(v, p); });
    field(j, "", "targets", [&](const json& v, const std::string& p) {
        if (!v.is_array()) bad(p, "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto q = p + "[" + std::to_string(i) + "]";
            if (!v[i].is_number_integer() || v[i].get<long>() < 0) bad(q, "expected an edge id");
            c.targets.push_back(v[i].get<int>());
        }
    });
    field(j, "", "annuli", [&](const json& v, const std::string& p) {
        if (!v.is_array()) bad(p, "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto q = p + "[" + std::to_string(i) + "]";
            const json& a = v[i];
            if (!a.is_object()) bad(q, "expected an object");
            Annulus an;
            for (const char* k : {"x", "y", "r", "R"})
                if (!a.contains(k)) bad(join(q, k), "missing");
            for (const char* k : {"x", "y"})
                if (!a.at(k).is_number()) bad(join(q, k), "expected a number");
            an.z0 = {a.at("x").get<double>(), a.at("y").get<double>()};
            an.r = get_positive(a.at("r"), join(q, "r"));
            an.R = get_positive(a.at("R"), join(q, "R"));
            if (!(an.r < an.R)) bad(join(q, "R"), "must exceed r");
            c.annuli.push_back(an);
        }
    });
    field(j, "", "eta", [&](const json& v, const std::string& p) {
        if (!v.is_array()) bad(p, "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i)
            c.eta.push_back(get_positive(v[i], p + "[" + std::to_string(i) + "]"));
    });
    field(j, "", "sle", [&](const json& s, const std::string& p) {
        if (!s.is_object()) bad(p, "expected an object");
        field(s, p, "kappa", [&](const json& v, const std::string& q) { c.sle.kappa = get_positive(v, q); });
        field(s, p, "rho", [&](const json& v, const std::string& q) {
            if (!v.is_number()) bad(q, "expected a number");
            c.sle.rho = v.get<double>();
        });
        field(s, p, "dt", [&](const json& v, const std::string& q) { c.sle.dt = get_positive(v, q); });
        field(s, p, "T", [&](const json& v, const std::string& q) { c.sle.T = get_positive(v, q); });
        field(s, p, "paths", [&](const json& v, const std::string& q) { c.sle.paths = get_count(v, q); });
    });
    field(j, "", "output", [&](const json& v, const std::string& p) {
        if (!v.is_string() || v.get<std::string>().empty()) bad(p, "expected a directory name");
        c.output = v.get<std::string>();
    });
    field(j, "", "stages", [&](const json& v, const std::string& p) {
        if (!v.is_array()) bad(p, "expected an array");
        static const std::set<std::string> stages{"sample", "tree", "crossings", "subtree", "sle", "fk_vs_sle"};
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto q = p + "[" + std::to_string(i) + "]";
            if (!v[i].is_string() || !stages.count(v[i].get<std::string>())) bad(q, "unknown stage");
            c.stages.push_back(v[i].get<std::string>());
        }
    });
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    j["domain"] = {{"cols", domain.cols}, {"rows", domain.rows}};
    if (!domain.file.empty()) j["domain"]["file"] = domain.file;
    j["meshes"] = meshes;
    j["chains"] = chains;
    j["sweeps"] = sweeps;
    j["samples"] = samples;
    j["seed"] = seed;
    j["targets"] = targets;
    j["annuli"] = json::array();
    for (auto& a : annuli) j["annuli"].push_back({{"x", a.z0.real()}, {"y", a.z0.imag()}, {"r", a.r}, {"R", a.R}});
    j["eta"] = eta;
    j["sle"] = {{"kappa", sle.kappa}, {"rho", sle.rho}, {"dt", sle.dt}, {"T", sle.T}, {"paths", sle.paths}};
    j["output"] = output;
    j["stages"] = stages;
    return j;
}

std::uint64_t ExperimentConfig::hash() const {
    auto j = to_json();
    j.erase("output");
    auto s = j.dump();
    return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------- crossings

tree::TreeSkeleton skeleton_of(const tree::ExplorationTree& t) {
    tree::TreeSkeleton s;
    s.domain = t.domain;
    s.root = t.root;
    s.e_i = t.e_i;
    s.parent.assign(t.domain->num_corners(), -1);
    for (auto& [target, b] : t.branches) {
        s.targets.push_back(target);
        for (EdgeId x : b.path) s.parent[t.domain->edge_head(x)] = x;
    }
    return s;
}

int count_disjoint_crossings(const tree::TreeSkeleton& t, const Annulus& a) {
    if (!(a.r < a.R)) throw BadParams("annulus needs r < R");
    using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
    using Graph = boost::adjacency_list<
        boost::vecS, boost::vecS, boost::directedS, boost::no_property,
        boost::property<boost::edge_capacity_t, long,
                        boost::property<boost::edge_residual_capacity_t, long,
                                        boost::property<boost::edge_reverse_t, Traits::edge_descriptor>>>>;
    const auto& d = *t.domain;
    int nc = d.num_corners();
    // corner c splits into 2c -> 2c + 1, so each corner carries one path
    Graph g(2 * nc + 2);
    int source = 2 * nc, sink = 2 * nc + 1;
    auto cap = boost::get(boost::edge_capacity, g);
    auto rev = boost::get(boost::edge_reverse, g);
    auto link = [&](int u, int v, long c) {
        auto e = boost::add_edge(u, v, g).first;
        auto r = boost::add_edge(v, u, g).first;
        cap[e] = c;
        cap[r] = 0;
        rev[e] = r;
        rev[r] = e;
    };
    std::vector<char> in_tree(nc, 0);
    for (CornerId c = 0; c < nc; ++c)
        if (t.parent[c] >= 0) in_tree[c] = in_tree[WiredDomain::edge_tail(t.parent[c])] = 1;
    bool any_in = false, any_out = false;
    for (CornerId c = 0; c < nc; ++c) {
        if (!in_tree[c]) continue;
        link(2 * c, 2 * c + 1, 1);
        double dist = std::abs(d.corner_pos(c) - a.z0);
        if (dist <= a.r) link(source, 2 * c, 1), any_in = true;
        if (dist >= a.R) link(2 * c + 1, sink, 1), any_out = true;
        if (t.parent[c] >= 0) {
            CornerId p = WiredDomain::edge_tail(t.parent[c]);
            link(2 * p + 1, 2 * c, 1);
            link(2 * c + 1, 2 * p, 1);
        }
    }
    if (!any_in || !any_out) return 0;
    return int(boost::push_relabel_max_flow(g, source, sink));
}

int count_disjoint_crossings(const tree::ExplorationTree& t, const Annulus& a) {
    return count_disjoint_crossings(skeleton_of(t), a);
}

// ---------------------------------------------------------------- tortuosity

int tortuosity(const std::vector<cplx>& c, double r) {
    if (!(r > 0)) throw BadParams("tortuosity needs r > 0");
    if (c.size() < 2) return 1;
    int pieces = 1;
    std::vector<cplx> piece{c[0]};
    cplx s = c[0];
    std::size_t k = 0;
    while (k + 1 < c.size()) {
        cplx q = c[k + 1];
        double far = 0;
        for (cplx v : piece) far = std::max(far, std::abs(v - q));
        if (far <= r) {
            piece.push_back(q);
            s = q;
            ++k;
            continue;
        }
        // largest lambda keeping s + lambda (q - s) within r of every point of the piece
        cplx dir = q - s;
        double lambda = 1, a2 = std::norm(dir);
        for (cplx v : piece) {
            cplx o = s - v;
            double b = 2 * (std::conj(o) * dir).real(), cc = std::min(0.0, std::norm(o) - r * r);
            double root = (-b + std::sqrt(std::max(0.0, b * b - 4 * a2 * cc))) / (2 * a2);
            lambda = std::min(lambda, std::max(0.0, root));
        }
        s = s + lambda * dir;
        piece.assign(1, s);
        ++pieces;
    }
    return pieces;
}

int tortuosity_vertex_cuts(const std::vector<cplx>& c, double r) {
    if (!(r > 0)) throw BadParams("tortuosity needs r > 0");
    int n = int(c.size());
    if (n < 2) return 1;
    const int inf = std::numeric_limits<int>::max() / 2;
    std::vector<int> best(n, inf);  // pieces covering c[0..i] ending with a cut at i
    best[0] = 0;
    for (int i = 0; i < n - 1; ++i) {
        if (best[i] >= inf) continue;
        double diam = 0;
        for (int j = i + 1; j < n; ++j) {
            for (int m = i; m < j; ++m) diam = std::max(diam, std::abs(c[m] - c[j]));
            if (diam > r) break;
            best[j] = std::min(best[j], best[i] + 1);
        }
    }
    return best[n - 1];
}

// ---------------------------------------------------------------- Hoelder

std::vector<HolderNorm> holder_estimate(const CapCurve& c, const std::vector<double>& exponents, int levels) {
    if (c.size() == 0) throw BadParams("empty curve");
    std::vector<HolderNorm> out;
    for (double a : exponents) out.push_back({a, 0});
    double t0 = c.t.front(), span = c.t.back() - t0;
    if (!(span > 0)) return out;
    for (int j = 1; j <= levels; ++j) {
        long n = 1L << j;
        double h = span / n;
        cplx prev = c.at(t0);
        for (long k = 1; k <= n; ++k) {
            cplx cur = c.at(t0 + k * h);
            double dz = std::abs(cur - prev);
            for (auto& o : out) o.norm = std::max(o.norm, dz / std::pow(h, o.exponent));
            prev = cur;
        }
    }
    return out;
}

// ---------------------------------------------------------------- statistics

double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1;
    double sum = 0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1 : -1) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InsufficientData("KS test needs two nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double D = 0, na = double(a.size()), nb = double(b.size());
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        D = std::max(D, std::abs(i / na - j / nb));
    }
    double ne = na * nb / (na + nb), sq = std::sqrt(ne);
    return {D, kolmogorov_q((sq + 0.12 + 0.11 / sq) * D)};
}

namespace {

// index of the last grid time <= s
std::size_t grid_at(const DrivingPath& p, double s) {
    auto it = std::upper_bound(p.t.begin(), p.t.end(), s);
    return it == p.t.begin() ? 0 : std::size_t(it - p.t.begin()) - 1;
}

double gap_at(const DrivingPath& p, std::size_t k) { return 0.5 * (p.phi[k] - p.upsilon[k]); }

// ratio estimator sum(num) / sum(den) with leave-one-out jackknife
Estimate jackknife_ratio(const std::vector<double>& num, const std::vector<double>& den,
                         const std::function<double(double)>& map) {
    Estimate e;
    long n = long(num.size());
    e.used = n;
    if (n < 2) throw InsufficientData("need at least two usable paths");
    double N = std::accumulate(num.begin(), num.end(), 0.0), Dn = std::accumulate(den.begin(), den.end(), 0.0);
    e.value = map(N / Dn);
    std::vector<double> jk(n);
    double mean = 0;
    for (long i = 0; i < n; ++i) mean += (jk[i] = map((N - num[i]) / (Dn - den[i]))) / n;
    double v = 0;
    for (double x : jk) v += (x - mean) * (x - mean);
    e.se = std::sqrt(v * (n - 1) / n);
    e.lo = e.value - 1.96 * e.se;
    e.hi = e.value + 1.96 * e.se;
    return e;
}

}  // namespace

Estimate kappa_qv(const std::vector<DrivingPath>& paths, const QvOptions& opt) {
    if (!(opt.lag > 0) || !(opt.horizon >= opt.lag)) throw BadParams("need 0 < lag <= horizon");
    int steps = int(std::floor(opt.horizon / opt.lag + 1e-9));
    std::vector<double> qv, time;
    for (auto& p : paths) {
        if (p.size() == 0 || p.t.back() < steps * opt.lag) continue;
        double q = 0, u0 = p.upsilon[grid_at(p, 0)];
        for (int k = 1; k <= steps; ++k) {
            double u = p.upsilon[grid_at(p, k * opt.lag)];
            q += (u - u0) * (u - u0);
            u0 = u;
        }
        qv.push_back(q);
        time.push_back(steps * opt.lag);
    }
    return jackknife_ratio(qv, time, [](double x) { return x; });
}

Estimate kappa_drift(const std::vector<DrivingPath>& paths, const QvOptions& opt) {
    int steps = int(std::floor(opt.horizon / opt.lag + 1e-9));
    std::vector<double> sxy, sxx;
    for (auto& p : paths) {
        if (p.size() == 0 || p.t.back() < steps * opt.lag || !p.has_V()) continue;
        double a = 0, b = 0, x0 = gap_at(p, grid_at(p, 0));
        for (int k = 1; k <= steps; ++k) {
            double x = gap_at(p, grid_at(p, k * opt.lag));
            if (x0 > 0.3 && x0 < kPi - 0.3) {
                double c = std::cos(x0) / std::sin(x0) * opt.lag;
                a += c * (x - x0);
                b += c * c;
            }
            x0 = x;
        }
        if (b > 0) sxy.push_back(a), sxx.push_back(b);
    }
    return jackknife_ratio(sxy, sxx, [](double bhat) { return 4 * bhat + 4; });
}

std::vector<DriftCheck> martingale_drift(const std::vector<DrivingPath>& paths, const std::vector<double>& cps) {
    std::vector<DriftCheck> out;
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
        DriftCheck c;
        c.t0 = cps[i];
        c.t1 = cps[i + 1];
        double s = 0, s2 = 0;
        long n = 0;
        for (auto& p : paths) {
            if (p.size() == 0 || p.t.back() < c.t1) continue;
            auto M = [&](double t) { return std::exp(t) * std::cos(gap_at(p, grid_at(p, t))); };
            double inc = M(c.t1) - M(c.t0);
            s += inc, s2 += inc * inc, ++n;
        }
        if (n >= 2) {
            c.increment.n = n;
            c.increment.mean = s / n;
            c.increment.se = std::sqrt(std::max(0.0, s2 / n - c.increment.mean * c.increment.mean) / (n - 1));
            c.within_3se = std::abs(c.increment.mean) < 3 * c.increment.se;
        }
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------- FK against SLE

namespace {

struct MarkedDomain {
    lattice::DomainPtr d;
    lattice::SquareId root;
    EdgeId f;
    cplx w, b;
    loewner::Uniformizer phi;
};

MarkedDomain marked_square(int L) {
    MarkedDomain m;
    m.d = lattice::build_rect_domain(L, L, 1.0 / L);
    m.root = lattice::default_root(*m.d);
    m.f = lattice::default_f(*m.d);
    auto dd = lattice::mark_dobrushin(m.d, m.root);
    auto mid = m.d->edge_midpoint2(m.f);
    m.w = m.d->point_pos(mid.x, mid.y);
    m.b = m.d->corner_pos(dd.b());
    m.phi = loewner::Uniformizer::for_domain(*m.d, m.w);
    return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<FkSample> fk_branch_driving(const FkMeshOptions& opt) {
    if (opt.L < 2 || opt.samples < 1) throw BadParams("need L >= 2 and a positive sample count");
    auto m = marked_square(opt.L);
    std::vector<FkSample> out(opt.samples);
    parallel_for(int(opt.samples), [&](int i) {
        auto cfg = rcmodel::sample_sw(*m.d, opt.burn_in, opt.seed, std::uint64_t(i));
        auto e = rcmodel::loop_representation(m.d, cfg);
        auto sk = tree::build_skeleton(e, m.root, {m.f});
        auto t0 = std::chrono::steady_clock::now();
        loewner::ZipperOptions zo;
        zo.max_time = opt.max_time;
        auto z = loewner::capacity_parametrize(tree::branch_curve(sk, m.f), m.phi, zo, m.b);
        out[i].zip_seconds = seconds_since(t0);
        out[i].gap0 = z.driving.phi.front() - z.driving.upsilon.front();
        out[i].driving = std::move(z.driving);
    });
    return out;
}

std::vector<DrivingPath> synthetic_sle_driving(double kappa, double rho, double gap0, long traces, double dt,
                                               double horizon, std::uint64_t seed) {
    if (!(gap0 > 0 && gap0 < 2 * kPi)) throw BadParams("synthetic traces need a gap in (0, 2 pi)");
    std::vector<DrivingPath> out(traces);
    parallel_for(int(traces), [&](int i) {
        sle::KrParams p;
        p.kappa = kappa;
        p.rho = rho;
        p.upsilon0 = 0;
        p.phi0 = gap0;
        p.T = horizon + 0.1;
        p.dt = dt;
        auto path = sle::simulate_sle_kr(p, seed, std::uint64_t(i));
        auto trace = loewner::trace_from_driving(path.driving, 1);
        loewner::ZipperOptions zo;
        zo.max_time = p.T;
        zo.strict_simple = false;
        out[i] = loewner::extract_driving_full(trace.z, zo, std::polar(1.0, gap0)).driving;
    });
    return out;
}

json FkVsSleReport::to_json() const {
    auto est = [](const Estimate& e) {
        return json{{"value", e.value}, {"se", e.se}, {"lo", e.lo}, {"hi", e.hi}, {"used", e.used}};
    };
    json j;
    j["kappa_target"] = kappa_target;
    j["meshes"] = json::array();
    for (auto& m : meshes) {
        json jm{{"L", m.L},
                {"samples", m.samples},
                {"kappa_qv", est(m.kappa)},
                {"kappa_drift", est(m.kappa_drift)},
                {"mean_gap0", m.mean_gap0},
                {"gap_ks", {{"D", m.gap_ks.D}, {"p", m.gap_ks.p}}}};
        jm["martingale_M"] = json::array();
        for (auto& c : m.drift)
            jm["martingale_M"].push_back({{"t0", c.t0},
                                          {"t1", c.t1},
                                          {"mean", c.increment.mean},
                                          {"se", c.increment.se},
                                          {"n", c.increment.n},
                                          {"within_3se", c.within_3se}});
        j["meshes"].push_back(jm);
    }
    j["synthetic"] = est(synthetic);
    j["ci_hits_range"] = ci_hits_range;
    j["monotone"] = monotone;
    j["self_calibrated"] = self_calibrated;
    return j;
}

FkVsSleReport fk_vs_sle(const FkVsSleOptions& opt) {
    if (opt.meshes.empty()) throw BadParams("no meshes");
    FkVsSleReport rep;
    auto meshes = opt.meshes;
    std::sort(meshes.begin(), meshes.end());
    std::vector<double> cps;
    for (int k = 1; k <= 5; ++k) cps.push_back(opt.qv.horizon * k / 5);

    for (std::size_t level = 0; level < meshes.size(); ++level) {
        auto t0 = std::chrono::steady_clock::now();
        FkMeshOptions mo;
        mo.L = meshes[level];
        mo.samples = opt.samples;
        mo.burn_in = opt.burn_in;
        mo.max_time = opt.qv.horizon + 0.1;
        mo.seed = opt.seed + 1000 * level;
        auto samples = fk_branch_driving(mo);
        std::vector<DrivingPath> paths;
        MeshReport r;
        r.L = mo.L;
        r.samples = mo.samples;
        for (auto& s : samples) {
            r.mean_gap0 += s.gap0 / samples.size();
            paths.push_back(s.driving);
        }
        r.kappa = kappa_qv(paths, opt.qv);
        r.kappa_drift = kappa_drift(paths, opt.qv);
        r.drift = martingale_drift(paths, cps);

        // X at the horizon against SLE(16/3, -2/3) started from the mean gap
        std::vector<double> fk_x, sle_x;
        for (auto& p : paths)
            if (p.t.back() >= opt.qv.horizon) fk_x.push_back(gap_at(p, grid_at(p, opt.qv.horizon)));
        std::vector<double> sim(opt.sle_paths);
        parallel_for(int(opt.sle_paths), [&](int i) {
            sle::KrParams p;
            p.phi0 = std::clamp(r.mean_gap0, 0.0, 2 * kPi);
            p.T = opt.qv.horizon;
            p.dt = 1e-4;
            auto path = sle::simulate_sle_kr(p, opt.seed + 7 + level, std::uint64_t(i), 1 << 20);
            sim[i] = path.X.back();
        });
        if (!fk_x.empty()) r.gap_ks = ks_two_sample(fk_x, sim);
        r.seconds = seconds_since(t0);
        rep.meshes.push_back(r);
    }

    double gap = std::clamp(rep.meshes.back().mean_gap0, 1e-3, 2 * kPi - 1e-3);
    auto synth = synthetic_sle_driving(16.0 / 3.0, -2.0 / 3.0, gap, opt.synthetic, opt.synthetic_dt,
                                       opt.qv.horizon, opt.seed + 99);
    rep.synthetic = kappa_qv(synth, opt.qv);

    auto& fine = rep.meshes.back().kappa;
    rep.ci_hits_range = fine.hi >= 4.3 && fine.lo <= 6.4;
    rep.monotone = rep.meshes.size() >= 2;
    for (std::size_t i = 1; i < rep.meshes.size(); ++i)
        if (!(std::abs(rep.meshes[i].kappa.value - rep.kappa_target) <
              std::abs(rep.meshes[i - 1].kappa.value - rep.kappa_target)))
            rep.monotone = false;
    rep.self_calibrated = rep.synthetic.lo <= 16.0 / 3.0 && 16.0 / 3.0 <= rep.synthetic.hi;
    return rep;
}

// ---------------------------------------------------------------- crossing study

CrossingStudy crossing_study(const CrossingStudyOptions& opt) {
    auto m = marked_square(opt.L);
    CrossingStudy out;
    out.radii = opt.radii;
    std::vector<std::vector<int>> counts(opt.trees, std::vector<int>(opt.radii.size()));
    out.tortuosity.assign(opt.trees, std::vector<int>(opt.radii.size()));
    parallel_for(int(opt.trees), [&](int i) {
        auto cfg = rcmodel::sample_sw(*m.d, opt.burn_in, opt.seed, std::uint64_t(i));
        auto e = rcmodel::loop_representation(m.d, cfg);
        auto sk = tree::build_skeleton(e, m.root);
        auto curve = tree::branch_curve(sk, m.f);
        for (std::size_t k = 0; k < opt.radii.size(); ++k) {
            counts[i][k] = count_disjoint_crossings(sk, {m.w, opt.radii[k], opt.ratio * opt.radii[k]});
            out.tortuosity[i][k] = tortuosity(curve, opt.radii[k]);
        }
    });
    for (std::size_t k = 0; k < opt.radii.size(); ++k) {
        double hit = 0, mean = 0;
        for (auto& c : counts) hit += c[k] >= opt.min_crossings, mean += c[k];
        out.probability.push_back(hit / opt.trees);
        out.mean_count.push_back(mean / opt.trees);
    }
    // radii are visited from large to small
    std::vector<std::size_t> order(opt.radii.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return opt.radii[a] > opt.radii[b]; });
    out.nonincreasing = true;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (out.probability[order[i]] > out.probability[order[i - 1]]) out.nonincreasing = false;
    out.tortuosity_monotone = true;
    for (auto& row : out.tortuosity)
        for (std::size_t i = 1; i < order.size(); ++i)
            if (row[order[i]] < row[order[i - 1]]) out.tortuosity_monotone = false;
    return out;
}

// ---------------------------------------------------------------- runner

std::vector<SubtreeDistance> subtree_distances(const tree::TreeSkeleton& sk, const std::vector<double>& etas,
                                               const loewner::Uniformizer& phi) {
    std::map<EdgeId, CapCurve> curves;
    for (EdgeId x : sk.targets) curves[x] = loewner::capacity_parametrize(tree::branch_curve(sk, x), phi).curve;
    std::vector<CapCurve> full;
    for (auto& [x, c] : curves) full.push_back(c);
    std::vector<SubtreeDistance> out;
    for (double eta : etas) {
        auto sub = tree::finite_subtree(sk, eta, phi);
        std::vector<CapCurve> part;
        for (EdgeId x : sub.targets) part.push_back(curves.at(x));
        out.push_back({eta, sub.grid_points, sub.targets.size(), sub.refinements, sub.max_component,
                       loewner::metric_tree(part, full)});
    }
    return out;
}

std::string version() { return "0.1.0"; }

std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a(s.data(), s.size());
}

namespace {

lattice::DomainPtr config_domain(const ExperimentConfig& c) {
    if (!c.domain.file.empty()) return lattice::load_domain(c.domain.file);
    return lattice::build_rect_domain(c.domain.cols, c.domain.rows, 1.0 / std::max(c.domain.cols, c.domain.rows));
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    out << std::setprecision(17) << j.dump(2) << "\n";
}

}  // namespace

Manifest run_experiment(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output);
    std::vector<std::string> outputs;
    auto out_path = [&](const std::string& name) {
        outputs.push_back(name);
        return (fs::path(cfg.output) / name).string();
    };

    lattice::DomainPtr d;
    lattice::SquareId root = -1;
    std::vector<rcmodel::BondConfig> configs;
    auto need_domain = [&] {
        if (d) return;
        d = config_domain(cfg);
        root = lattice::default_root(*d);
    };
    auto need_samples = [&] {
        need_domain();
        if (!configs.empty()) return;
        configs.resize(cfg.samples);
        parallel_for(int(cfg.samples), [&](int i) {
            configs[i] = rcmodel::sample_sw(*d, cfg.sweeps, cfg.seed, std::uint64_t(i));
        });
    };

    for (auto& stage : cfg.stages) {
        if (stage == "sample") {
            need_samples();
            for (long i = 0; i < cfg.samples; ++i)
                rcmodel::write_config(*d, configs[i], out_path("sample_" + std::to_string(i) + ".txt"));
        } else if (stage == "tree") {
            need_samples();
            for (long i = 0; i < cfg.samples; ++i) {
                auto t = tree::build_tree(rcmodel::loop_representation(d, configs[i]), root);
                tree::write_tree(t, out_path("tree_" + std::to_string(i) + ".json"));
            }
        } else if (stage == "crossings") {
            need_samples();
            std::ofstream cross(out_path("crossings.csv"));
            cross << "sample,annulus,x,y,r,R,count\n";
            std::ofstream tort(out_path("tortuosity.csv"));
            tort << "sample,r,M_r\n";
            EdgeId f = lattice::default_f(*d);
            for (long i = 0; i < cfg.samples; ++i) {
                auto sk = tree::build_skeleton(rcmodel::loop_representation(d, configs[i]), root);
                for (std::size_t k = 0; k < cfg.annuli.size(); ++k) {
                    auto& a = cfg.annuli[k];
                    cross << i << ',' << k << ',' << a.z0.real() << ',' << a.z0.imag() << ',' << a.r << ',' << a.R
                          << ',' << count_disjoint_crossings(sk, a) << '\n';
                }
                auto curve = tree::branch_curve(sk, f);
                for (auto& a : cfg.annuli) tort << i << ',' << a.r << ',' << tortuosity(curve, a.r) << '\n';
            }
        } else if (stage == "subtree") {
            need_samples();
            auto dd = lattice::mark_dobrushin(d, root);
            EdgeId f = lattice::default_f(*d);
            auto mid = d->edge_midpoint2(f);
            auto phi = loewner::Uniformizer::for_domain(*d, d->point_pos(mid.x, mid.y));
            auto sk = tree::build_skeleton(rcmodel::loop_representation(d, configs[0]), root);
            std::ofstream s(out_path("subtree.csv"));
            s << std::setprecision(12) << "eta,grid_points,targets,refinements,max_component,d_tree\n";
            for (auto& r : subtree_distances(sk, cfg.eta, phi))
                s << r.eta << ',' << r.grid_points << ',' << r.targets << ',' << r.refinements << ','
                  << r.max_component << ',' << r.d_tree << '\n';
        } else if (stage == "sle") {
            sle::KrParams p;
            p.kappa = cfg.sle.kappa;
            p.rho = cfg.sle.rho;
            p.dt = cfg.sle.dt;
            p.T = cfg.sle.T;
            std::vector<double> cps;
            for (int k = 1; k <= 4; ++k) cps.push_back(p.T * k / 4);
            auto r = sle::simulate_ensemble(p, cfg.sle.paths, cps, cfg.seed);
            json j{{"M0", r.M0}, {"N0", r.N0}, {"paths", r.paths}, {"reflect_fraction", r.reflect_fraction},
                   {"capped_fraction", r.capped_fraction}};
            j["bessel"] = {{"b", r.bessel.b}, {"sigma2", r.bessel.sigma2}, {"b_se", r.bessel.b_se}};
            j["checkpoints"] = json::array();
            for (std::size_t k = 0; k < cps.size(); ++k)
                j["checkpoints"].push_back({{"t", cps[k]},
                                            {"M", r.M[k].mean},
                                            {"M_se", r.M[k].se},
                                            {"N", r.N[k].mean},
                                            {"N_se", r.N[k].se}});
            j["qv_max_rel_error"] = r.qv.max_rel_error();
            write_json(j, out_path("sle.json"));
        } else if (stage == "fk_vs_sle") {
            FkVsSleOptions o;
            if (!cfg.meshes.empty()) o.meshes = cfg.meshes;
            o.samples = cfg.samples;
            o.burn_in = cfg.sweeps;
            o.synthetic = cfg.samples;
            o.sle_paths = cfg.sle.paths;
            o.seed = cfg.seed;
            write_json(fk_vs_sle(o).to_json(), out_path("fk_vs_sle.json"));
        }
    }

    Manifest m;
    m.data["version"] = version();
    m.data["seed"] = cfg.seed;
    m.data["config"] = cfg.to_json();
    m.data["config_hash"] = hex(cfg.hash());
    m.data["stages"] = cfg.stages;
    m.data["outputs"] = json::object();
    for (auto& name : outputs) m.data["outputs"][name] = hex(file_hash((fs::path(cfg.output) / name).string()));
    m.data["conventions"] = {{"sampler", "Swendsen-Wang, independent chain per sample, stream = sample index"},
                             {"capacity", "spans adding no capacity are dropped"}};
    m.path = (fs::path(cfg.output) / "manifest.json").string();
    write_json(m.data, m.path);
    return m;
}

}  // namespace fkforge::harness
