#include "fkforge/loewner.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/numeric/odeint.hpp>

namespace fkforge::loewner {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgLine = bg::model::linestring<BgPoint>;

namespace {

std::vector<double> unwrap(const std::vector<cplx>& u) {
    std::vector<double> a(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        double x = std::arg(u[k]);
        if (k) x = a[k - 1] + std::remainder(x - a[k - 1], 2 * kPi);
        a[k] = x;
    }
    return a;
}

cplx koebe_h(cplx z) { return z / ((1.0 + z) * (1.0 + z)); }

// inverse of h on the disk: the root of w z^2 + (2w - 1) z + w = 0 inside
cplx koebe_h_inv(cplx w) {
    if (std::abs(w) < 1e-300) return 0;
    cplx s = std::sqrt(1.0 - 4.0 * w);
    cplx n1 = 1.0 - 2.0 * w + s, n2 = 1.0 - 2.0 * w - s;
    return 2.0 * w / (std::abs(n1) >= std::abs(n2) ? n1 : n2);
}

BgLine to_line(const std::vector<cplx>& c) {
    BgLine l;
    for (auto z : c) bg::append(l, BgPoint(z.real(), z.imag()));
    return l;
}

bool segments_meet(cplx p, cplx p2, cplx q, cplx q2) {
    auto cr = [](cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); };
    cplx r = p2 - p, s = q2 - q;
    double scale = std::max(std::abs(r), std::abs(s));
    double tol = 1e-12 * scale * scale;
    double den = cr(r, s);
    if (std::abs(den) <= tol) {
        if (std::abs(cr(q - p, r)) > tol * 4 || std::norm(r) == 0) return false;
        double t0 = std::real((q - p) / r), t1 = std::real((q2 - p) / r);
        return std::max(t0, t1) >= -1e-12 && std::min(t0, t1) <= 1 + 1e-12;
    }
    double t = cr(q - p, s) / den, u = cr(q - p, r) / den;
    return t >= -1e-12 && t <= 1 + 1e-12 && u >= -1e-12 && u <= 1 + 1e-12;
}

double frechet(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    return bg::discrete_frechet_distance(to_line(a), to_line(b));
}

// closed polyline starting at vertex s, in the given orientation
std::vector<cplx> rotate_loop(const std::vector<cplx>& l, std::size_t s, bool reverse) {
    std::size_t n = l.size();
    std::vector<cplx> out(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out[k] = reverse ? l[(s + n - k % n) % n] : l[(s + k) % n];
    return out;
}

template <class T, class D>
double hausdorff(const std::vector<T>& a, const std::vector<T>& b, D dist) {
    if (a.empty() && b.empty()) return 0;
    if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> m(a.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m[i][j] = dist(a[i], b[j]);
    double h = 0;
    for (std::size_t i = 0; i < a.size(); ++i) h = std::max(h, *std::min_element(m[i].begin(), m[i].end()));
    for (std::size_t j = 0; j < b.size(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < a.size(); ++i) best = std::min(best, m[i][j]);
        h = std::max(h, best);
    }
    return h;
}

}  // namespace

bool polyline_is_simple(const std::vector<cplx>& c) {
    std::size_t n = c.size();
    if (n < 3) return n < 2 || c[0] != c[1];
    double h = 0;
    for (std::size_t k = 1; k < n; ++k) h += std::abs(c[k] - c[k - 1]);
    h = std::max(h / double(n - 1), 1e-300);
    // segments bucketed by the grid cells their bounding boxes cover
    std::map<std::pair<long, long>, std::vector<std::size_t>> cells;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        long x0 = long(std::floor(std::min(c[k].real(), c[k + 1].real()) / h));
        long x1 = long(std::floor(std::max(c[k].real(), c[k + 1].real()) / h));
        long y0 = long(std::floor(std::min(c[k].imag(), c[k + 1].imag()) / h));
        long y1 = long(std::floor(std::max(c[k].imag(), c[k + 1].imag()) / h));
        if ((x1 - x0 + 1) * (y1 - y0 + 1) > 4096) return !bg::intersects(to_line(c));
        for (long x = x0; x <= x1; ++x)
            for (long y = y0; y <= y1; ++y) {
                auto& bucket = cells[{x, y}];
                for (std::size_t j : bucket) {
                    if (j + 1 == k) continue;  // shared vertex with the previous segment
                    if (segments_meet(c[j], c[j + 1], c[k], c[k + 1])) return false;
                }
                bucket.push_back(k);
            }
    }
    return true;
}

// ---------------------------------------------------------------- paths

void DrivingPath::validate() const {
    if (U.size() != t.size() || (has_V() && V.size() != t.size()))
        throw BadParams("driving path columns differ in length");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1])) throw NoCapacityParam("driving times are not strictly increasing");
    for (auto u : U)
        if (std::abs(std::abs(u) - 1) > 1e-9) throw BadParams("driving value off the unit circle");
}

DrivingPath DrivingPath::from_arguments(std::vector<double> t, std::vector<double> upsilon, std::vector<double> phi) {
    DrivingPath p;
    p.t = std::move(t);
    p.upsilon = std::move(upsilon);
    p.phi = std::move(phi);
    for (double a : p.upsilon) p.U.push_back(std::polar(1.0, a));
    for (double a : p.phi) p.V.push_back(std::polar(1.0, a));
    return p;
}

cplx CapCurve::at(double s) const {
    if (t.empty()) throw NoCapacityParam("empty curve");
    if (s <= t.front()) return z.front();
    if (s >= t.back()) return z.back();
    auto k = std::size_t(std::upper_bound(t.begin(), t.end(), s) - t.begin());
    double a = (s - t[k - 1]) / (t[k] - t[k - 1]);
    return z[k - 1] + a * (z[k] - z[k - 1]);
}

void CapCurve::validate() const {
    if (t.empty() || t.size() != z.size()) throw NoCapacityParam("curve without capacity grid");
    for (std::size_t k = 1; k < t.size(); ++k)
        if (!(t[k] > t[k - 1])) throw NoCapacityParam("capacity not strictly increasing");
}

// ---------------------------------------------------------------- slit maps

cplx slit_map(cplx z, cplx u, double dt) { return u * koebe_h_inv(std::exp(dt) * koebe_h(z / u)); }
cplx slit_inverse(cplx w, cplx u, double dt) { return u * koebe_h_inv(std::exp(-dt) * koebe_h(w / u)); }
cplx slit_tip(cplx u, double dt) { return u * koebe_h_inv(std::exp(-dt) / 4.0); }
cplx slit_map_boundary(cplx v, cplx u, double dt) {
    // h(e^{i theta}) = 1 / (4 cos^2(theta / 2)) is real on the circle
    double th = std::arg(v / u);
    double half = std::acos(std::exp(-dt / 2) * std::cos(th / 2));
    return u * std::polar(1.0, th < 0 ? -2 * half : 2 * half);
}

double slit_capacity(double r) { return std::log((1 + r) * (1 + r) / (4 * r)); }

// ---------------------------------------------------------------- flows

FlowResult flow_forward(const DrivingPath& U, cplx z, double T, double eps_swallow, double tol) {
    using State = std::array<double, 2>;
    namespace odeint = boost::numeric::odeint;
    if (U.size() == 0) throw BadParams("empty driving path");
    FlowResult res;
    res.g = z;
    if (std::abs(z) == 0) return res;
    auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
    State x{z.real(), z.imag()};
    double t = U.t.front();
    std::size_t k = 1;
    double h = 1e-4;
    while (t < T) {
        cplx u = k < U.size() ? U.U[k] : U.U.back();
        double t_end = k < U.size() ? std::min(U.t[k], T) : T;
        auto rhs = [u](const State& s, State& ds, double) {
            cplx g(s[0], s[1]);
            cplx v = -g * (g + u) / (g - u);
            ds = {v.real(), v.imag()};
        };
        while (t < t_end) {
            h = std::min(h, t_end - t);
            if (h < 1e-15) throw StepFailure("adaptive step underflow in the Loewner flow");
            if (stepper.try_step(rhs, x, t, h) == odeint::success) {
                ++res.steps;
                cplx g(x[0], x[1]);
                if (std::abs(g - u) < eps_swallow) {
                    res.g = g;
                    res.swallowed = true;
                    res.t_swallow = t;
                    return res;
                }
            }
        }
        ++k;
    }
    res.g = {x[0], x[1]};
    return res;
}

CapCurve trace_from_driving(const DrivingPath& U, int resolution) {
    U.validate();
    if (resolution < 1) throw BadParams("resolution must be positive");
    auto arg = U.upsilon.size() == U.size() ? U.upsilon : unwrap(U.U);
    std::vector<std::pair<cplx, double>> maps;
    CapCurve c;
    c.t.push_back(U.t.front());
    c.z.push_back(U.U.front());
    for (std::size_t k = 1; k < U.size(); ++k) {
        double dt = (U.t[k] - U.t[k - 1]) / resolution;
        for (int j = 1; j <= resolution; ++j)
            maps.push_back({std::polar(1.0, arg[k - 1] + (arg[k] - arg[k - 1]) * j / resolution), dt});
        cplx z = slit_tip(maps.back().first, maps.back().second);
        for (auto it = maps.rbegin() + 1; it != maps.rend(); ++it) z = slit_inverse(z, it->first, it->second);
        c.t.push_back(U.t[k]);
        c.z.push_back(z);
    }
    return c;
}

ZipperResult extract_driving_full(const std::vector<cplx>& curve, const ZipperOptions& opt,
                                  std::optional<cplx> force) {
    if (curve.size() < 2) throw BadParams("curve needs at least two points");
    if (!(opt.cap > 0)) throw BadParams("capacity cap must be positive");
    if (opt.strict_simple) {
        if (!polyline_is_simple(curve)) throw NonSimple("curve intersects itself");
    } else {
        auto sorted = curve;
        std::sort(sorted.begin(), sorted.end(),
                  [](cplx a, cplx b) { return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag()); });
        for (std::size_t k = 1; k < sorted.size(); ++k)
            if (std::abs(sorted[k] - sorted[k - 1]) < 1e-12) throw NonSimple("curve repeats a point");
    }

    ZipperResult res;
    std::vector<cplx> pts(curve.begin(), curve.end());
    pts[0] /= std::abs(pts[0]);
    std::vector<cplx> img = pts;
    std::vector<int> depth(pts.size(), 0);
    std::vector<std::pair<cplx, double>> hist;
    double t = 0;
    res.driving.t.push_back(0);
    res.driving.U.push_back(pts[0]);
    res.curve.t.push_back(0);
    res.curve.z.push_back(pts[0]);
    cplx v = 0;
    if (force) {
        if (std::abs(std::abs(*force) - 1) > 1e-9) throw BadParams("force point must lie on the circle");
        v = *force;
        if (std::abs(v - pts[0]) < 1e-12) throw BadParams("force point coincides with the start");
        res.driving.V.push_back(v);
    }
    cplx prev = pts[0];
    int prev_depth = 0;

    for (std::size_t i = 1; i < pts.size(); ++i) {
        cplx p = img[i];
        double r = std::abs(p);
        // near the circle the capacity gain (1 - r)^2 / 4 is lost to rounding
        if (r >= 1 - opt.boundary_tol || !(t + slit_capacity(r) > t)) {
            ++res.dropped;
            prev = pts[i], prev_depth = depth[i];
            continue;
        }
        if (r < 1e-14) {
            res.truncated = true;
            break;
        }
        double dt = slit_capacity(r);
        int dep = std::max(depth[i], prev_depth) + 1;
        if (dt > opt.cap * (1 + 1e-9) && dep <= opt.max_subdivisions) {
            cplx m = 0.5 * (prev + pts[i]);
            cplx mi = m;
            for (auto& [u, s] : hist) mi = slit_map(mi, u, s);
            pts.insert(pts.begin() + i, m);
            img.insert(img.begin() + i, mi);
            depth.insert(depth.begin() + i, dep);
            depth[i + 1] = dep;
            ++res.inserted;
            --i;
            continue;
        }
        cplx u = p / r;
        for (std::size_t j = i + 1; j < img.size(); ++j) img[j] = slit_map(img[j], u, dt);
        hist.push_back({u, dt});
        t += dt;
        res.driving.t.push_back(t);
        res.driving.U.push_back(u);
        if (force) {
            v = slit_map_boundary(v, u, dt);
            res.driving.V.push_back(v);
        }
        res.curve.t.push_back(t);
        res.curve.z.push_back(pts[i]);
        prev = pts[i], prev_depth = depth[i];
        if (t >= opt.max_time) {
            res.truncated = i + 1 < pts.size();
            break;
        }
    }
    res.driving.upsilon = unwrap(res.driving.U);
    if (force) {
        res.driving.phi.resize(res.driving.size());
        for (std::size_t k = 0; k < res.driving.size(); ++k) {
            double gap = std::arg(res.driving.V[k] / res.driving.U[k]);
            res.driving.phi[k] = res.driving.upsilon[k] + (gap < 0 ? gap + 2 * kPi : gap);
        }
    }
    return res;
}

cplx hyperbolic_geodesic(const DrivingPath& U, double t, double eps) {
    if (!(eps > 0 && eps < 1)) throw BadParams("eps must lie in (0, 1)");
    auto k = std::size_t(std::upper_bound(U.t.begin(), U.t.end(), t) - U.t.begin());
    if (k == 0) throw BadParams("time before the start of the driving path");
    --k;
    cplx z = (1 - eps) * U.U[k];
    for (std::size_t j = k; j >= 1; --j) z = slit_inverse(z, U.U[j], U.t[j] - U.t[j - 1]);
    return z;
}

// ---------------------------------------------------------------- metrics

double metric_curve(const CapCurve& a, const CapCurve& b) {
    a.validate();
    b.validate();
    double d = 0;
    for (double s : a.t) d = std::max(d, std::abs(a.at(s) - b.at(s)));
    for (double s : b.t) d = std::max(d, std::abs(a.at(s) - b.at(s)));
    return d;
}

double metric_tree(const std::vector<CapCurve>& a, const std::vector<CapCurve>& b) {
    return hausdorff(a, b, [](const CapCurve& x, const CapCurve& y) { return metric_curve(x, y); });
}

double metric_loop(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.empty() || b.empty()) throw BadParams("empty loop");
    // shifts of one loop against the start of the other, for both roles
    auto sweep = [](const std::vector<cplx>& fixed, const std::vector<cplx>& moving) {
        auto base = rotate_loop(fixed, 0, false);
        double budget = 4e7 / double(fixed.size() * moving.size());
        std::size_t stride = std::max<std::size_t>(1, std::size_t(double(moving.size()) / std::max(budget / 2, 1.0)));
        double best = std::numeric_limits<double>::infinity();
        for (bool rev : {false, true})
            for (std::size_t s = 0; s < moving.size(); s += stride)
                best = std::min(best, frechet(base, rotate_loop(moving, s, rev)));
        return best;
    };
    return std::min(sweep(a, b), sweep(b, a));
}

double metric_ensemble(const std::vector<std::vector<cplx>>& a, const std::vector<std::vector<cplx>>& b) {
    return hausdorff(a, b, [](const std::vector<cplx>& x, const std::vector<cplx>& y) { return metric_loop(x, y); });
}

// ---------------------------------------------------------------- files

void write_driving_csv(const DrivingPath& U, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f.precision(17);
    f << (U.has_V() ? "t,re_U,im_U,re_V,im_V\n" : "t,re_U,im_U\n");
    for (std::size_t k = 0; k < U.size(); ++k) {
        f << U.t[k] << ',' << U.U[k].real() << ',' << U.U[k].imag();
        if (U.has_V()) f << ',' << U.V[k].real() << ',' << U.V[k].imag();
        f << '\n';
    }
}

namespace {
std::vector<std::vector<double>> read_rows(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}
}  // namespace

DrivingPath read_driving_csv(const std::string& path) {
    DrivingPath U;
    for (auto& r : read_rows(path)) {
        if (r.size() != 3 && r.size() != 5) throw ConfigError(path + ": expected 3 or 5 columns");
        U.t.push_back(r[0]);
        U.U.push_back({r[1], r[2]});
        if (r.size() == 5) U.V.push_back({r[3], r[4]});
    }
    U.upsilon = unwrap(U.U);
    if (U.has_V()) {
        U.phi = unwrap(U.V);
        for (std::size_t k = 0; k < U.size(); ++k) {
            double gap = U.phi[k] - U.upsilon[k];
            U.phi[k] -= 2 * kPi * std::floor(gap / (2 * kPi));
        }
    }
    U.validate();
    return U;
}

void write_curve_csv(const CapCurve& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f.precision(17);
    f << "t,re,im\n";
    for (std::size_t k = 0; k < c.size(); ++k) f << c.t[k] << ',' << c.z[k].real() << ',' << c.z[k].imag() << '\n';
}

CapCurve read_curve_csv(const std::string& path) {
    CapCurve c;
    for (auto& r : read_rows(path)) {
        if (r.size() != 3) throw ConfigError(path + ": expected 3 columns");
        c.t.push_back(r[0]);
        c.z.push_back({r[1], r[2]});
    }
    c.validate();
    return c;
}

}  // namespace fkforge::loewner
