#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "fkforge/loewner.hpp"

namespace fkforge::loewner {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, false>;  // counter-clockwise

namespace {

double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

// drop vertices on a straight run
std::vector<cplx> simplify(const std::vector<cplx>& p) {
    std::vector<cplx> out;
    std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        cplx a = p[(i + n - 1) % n], b = p[i], c = p[(i + 1) % n];
        if (std::abs(cross(b - a, c - b)) > 1e-12 * std::abs(b - a) * std::abs(c - b)) out.push_back(b);
    }
    return out;
}

double signed_area(const std::vector<cplx>& p) {
    double a = 0;
    for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
    return a / 2;
}

}  // namespace

Uniformizer::Uniformizer(std::vector<cplx> polygon, cplx w, int degree, int poles_per_corner) : w_(w) {
    if (polygon.size() < 3) throw ConfigError("uniformizer needs a polygon");
    if (signed_area(polygon) < 0) std::reverse(polygon.begin(), polygon.end());
    polygon_ = simplify(polygon);
    if (!contains(w)) throw ConfigError("uniformizer centre lies outside the polygon");
    std::size_t nv = polygon_.size();
    scale_ = 0;
    for (auto p : polygon_) scale_ = std::max(scale_, std::abs(p - w));

    // collocation points, clustered towards every corner
    std::vector<cplx> pts;
    const int per_edge = std::max(24, 2 * degree / int(std::max<std::size_t>(nv / 4, 1)));
    for (std::size_t i = 0; i < nv; ++i) {
        cplx a = polygon_[i], b = polygon_[(i + 1) % nv];
        for (int k = 0; k < per_edge; ++k) {
            double s = double(k) / per_edge;
            s = 0.5 - 0.5 * std::cos(kPi * s);  // Chebyshev spacing
            pts.push_back(a + s * (b - a));
        }
        for (int k = 1; k <= 8; ++k) {
            double s = std::exp(-1.5 * k);
            pts.push_back(a + s * (b - a));
            pts.push_back(b + s * (a - b));
        }
    }

    // lightning poles on the exterior bisector of each reentrant corner
    for (std::size_t i = 0; i < nv; ++i) {
        cplx a = polygon_[(i + nv - 1) % nv], b = polygon_[i], c = polygon_[(i + 1) % nv];
        if (cross(b - a, c - b) >= 0) continue;  // convex
        cplx u1 = (b - a) / std::abs(b - a), u2 = (c - b) / std::abs(c - b);
        cplx out = u1 - u2;
        out /= std::abs(out);
        double L = std::min(std::abs(b - a), std::abs(c - b));
        for (int j = 1; j <= poles_per_corner; ++j) {
            double r = L * std::exp(-4.0 * (std::sqrt(double(poles_per_corner)) - std::sqrt(double(j))));
            poles_.push_back(b + r * out);
        }
    }

    // Vandermonde with Arnoldi on the collocation points
    std::size_t m = pts.size();
    std::vector<std::vector<cplx>> Q(degree + 1, std::vector<cplx>(m, 1.0));
    hess_.assign(degree + 1, std::vector<cplx>(degree + 1, 0.0));
    for (int k = 1; k <= degree; ++k) {
        std::vector<cplx> q(m);
        for (std::size_t i = 0; i < m; ++i) q[i] = (pts[i] - w) / scale_ * Q[k - 1][i];
        for (int j = 0; j < k; ++j) {
            cplx h = 0;
            for (std::size_t i = 0; i < m; ++i) h += std::conj(Q[j][i]) * q[i];
            h /= double(m);
            hess_[j][k - 1] = h;
            for (std::size_t i = 0; i < m; ++i) q[i] -= h * Q[j][i];
        }
        double nrm = 0;
        for (auto v : q) nrm += std::norm(v);
        nrm = std::sqrt(nrm / double(m));
        hess_[k][k - 1] = nrm;
        for (std::size_t i = 0; i < m; ++i) Q[k][i] = q[i] / nrm;
    }

    // real least squares for Re G = -log|z - w|
    std::size_t nb = degree + 1 + poles_.size();
    Eigen::MatrixXd A(m, 2 * nb - 1);
    Eigen::VectorXd rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto b = basis(pts[i]);
        A(i, 0) = b[0].real();
        for (std::size_t k = 1; k < nb; ++k) {
            A(i, 2 * k - 1) = b[k].real();
            A(i, 2 * k) = -b[k].imag();
        }
        rhs(i) = -std::log(std::abs(pts[i] - w));
    }
    Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);
    if (!x.allFinite()) throw SolveFailure("uniformizer least squares failed");
    coef_.assign(nb, 0.0);
    coef_[0] = x(0);
    for (std::size_t k = 1; k < nb; ++k) coef_[k] = {x(2 * k - 1), x(2 * k)};
    coef_[0] -= cplx(0, log_ratio(w).imag());

    boundary_error_ = 0;
    for (std::size_t i = 0; i < nv; ++i) {
        cplx a = polygon_[i], b = polygon_[(i + 1) % nv];
        for (int k = 0; k < 97; ++k) {
            cplx z = a + (k + 0.5) / 97.0 * (b - a);
            boundary_error_ = std::max(boundary_error_, std::abs(std::abs((*this)(z)) - 1.0));
        }
    }

    // Newton starting points on an interior grid
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (auto p : polygon_) {
        xmin = std::min(xmin, p.real()), xmax = std::max(xmax, p.real());
        ymin = std::min(ymin, p.imag()), ymax = std::max(ymax, p.imag());
    }
    const int G = 48;
    for (int i = 0; i <= G; ++i)
        for (int j = 0; j <= G; ++j) {
            cplx z(xmin + (xmax - xmin) * i / G, ymin + (ymax - ymin) * j / G);
            if (contains(z)) seeds_.push_back({z, (*this)(z)});
        }
    seeds_.push_back({w, 0.0});
}

Uniformizer Uniformizer::for_domain(const lattice::WiredDomain& d, cplx w, int degree) {
    std::vector<cplx> poly;
    for (auto e : d.boundary()) {
        if (d.edge_kind(e) != lattice::EdgeKind::Medial) continue;
        auto m = d.edge_midpoint2(e);
        poly.push_back(d.point_pos(m.x, m.y));
    }
    return Uniformizer(poly, w, degree);
}

std::vector<cplx> Uniformizer::basis(cplx z) const {
    int degree = int(hess_.size()) - 1;
    std::vector<cplx> b(degree + 1 + poles_.size());
    b[0] = 1.0;
    cplx zeta = (z - w_) / scale_;
    for (int k = 1; k <= degree; ++k) {
        cplx q = zeta * b[k - 1];
        for (int j = 0; j < k; ++j) q -= hess_[j][k - 1] * b[j];
        b[k] = q / hess_[k][k - 1];
    }
    for (std::size_t j = 0; j < poles_.size(); ++j) {
        // scaled so that every column is O(1) on the boundary
        double r = std::abs(poles_[j] - polygon_.front());
        for (auto p : polygon_) r = std::min(r, std::abs(poles_[j] - p));
        b[degree + 1 + j] = r / (z - poles_[j]);
    }
    return b;
}

cplx Uniformizer::log_ratio(cplx z) const {
    auto b = basis(z);
    cplx s = 0;
    for (std::size_t k = 0; k < b.size(); ++k) s += coef_[k] * b[k];
    return s;
}

cplx Uniformizer::operator()(cplx z) const { return (z - w_) * std::exp(log_ratio(z)); }

cplx Uniformizer::clamped(cplx z) const {
    cplx u = (*this)(z);
    double r = std::abs(u);
    return r > 1 ? u / r : u;
}

bool Uniformizer::contains(cplx z) const {
    BgPolygon poly;
    for (auto p : polygon_) bg::append(poly.outer(), BgPoint(p.real(), p.imag()));
    bg::append(poly.outer(), BgPoint(polygon_.front().real(), polygon_.front().imag()));
    return bg::within(BgPoint(z.real(), z.imag()), poly);
}

cplx Uniformizer::inverse(cplx u) const {
    if (std::abs(u) > 1 + 1e-9) throw SolveFailure("inverse of a point outside the disk");
    auto best = std::min_element(seeds_.begin(), seeds_.end(), [&](auto& a, auto& b) {
        return std::abs(a.second - u) < std::abs(b.second - u);
    });
    cplx z = best->first;
    double h = 1e-7 * scale_;
    for (int it = 0; it < 100; ++it) {
        cplx r = (*this)(z)-u;
        if (std::abs(r) < 1e-13) return z;
        cplx dphi = ((*this)(z + h) - (*this)(z - h)) / (2 * h);
        cplx step = r / dphi;
        double lam = 1;
        for (int k = 0; k < 30; ++k, lam /= 2)
            if (std::abs((*this)(z - lam * step) - u) < std::abs(r)) break;
        z -= lam * step;
    }
    if (std::abs((*this)(z)-u) < 1e-9) return z;
    throw SolveFailure("inverse uniformizer did not converge");
}

ZipperResult capacity_parametrize(const std::vector<cplx>& curve, const Uniformizer& phi,
                                  const ZipperOptions& opt, std::optional<cplx> force) {
    // simplicity is a property of the curve in the domain; clamping to the circle
    // may make boundary runs touch
    if (opt.strict_simple && curve.size() > 1) {
        if (!polyline_is_simple(curve)) throw NonSimple("curve intersects itself");
    }
    std::vector<cplx> img;
    img.reserve(curve.size());
    for (auto z : curve) img.push_back(phi.clamped(z));
    auto o = opt;
    o.strict_simple = false;
    if (force) {
        cplx v = phi.clamped(*force);
        force = v / std::abs(v);
    }
    return extract_driving_full(img, o, force);
}

}  // namespace fkforge::loewner
