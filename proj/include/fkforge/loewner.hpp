#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fkforge/common.hpp"
#include "fkforge/lattice.hpp"

// Radial Loewner chains in the unit disk, normalized by g_t(z) = e^t z + O(z^2),
//   d/dt g_t(z) = -g_t(z) (g_t(z) + U_t) / (g_t(z) - U_t),
// together with a numerical uniformizer of lattice domains and the curve metrics.
namespace fkforge::loewner {

struct DrivingPath {
    std::vector<double> t;
    std::vector<cplx> U;
    std::vector<cplx> V;  // second marked point, empty when absent
    // continuous arguments; Phi - Upsilon stays in [0, 2 pi]
    std::vector<double> upsilon, phi;

    std::size_t size() const { return t.size(); }
    bool has_V() const { return !V.empty(); }
    void validate() const;  // throws NoCapacityParam / BadParams

    static DrivingPath from_arguments(std::vector<double> t, std::vector<double> upsilon,
                                      std::vector<double> phi = {});
};

struct CapCurve {
    std::vector<double> t;
    std::vector<cplx> z;

    std::size_t size() const { return t.size(); }
    // point at capacity s: linear in between, constant after the end
    cplx at(double s) const;
    void validate() const;
};

// --- elementary maps ---

// map of the disk minus the radial slit from u of capacity dt onto the disk
cplx slit_map(cplx z, cplx u, double dt);
cplx slit_inverse(cplx w, cplx u, double dt);
cplx slit_tip(cplx u, double dt);
// slit_map on the circle away from the slit, with the side of u preserved
cplx slit_map_boundary(cplx v, cplx u, double dt);
// capacity of the radial slit from the boundary to a point at radius r
double slit_capacity(double r);

// --- flows ---

struct FlowResult {
    cplx g;
    bool swallowed = false;
    double t_swallow = 0;
    int steps = 0;
};

// Integrates the Loewner equation up to time T with an adaptive Dormand-Prince
// stepper. U is piecewise constant: U_k drives (t_{k-1}, t_k].
FlowResult flow_forward(const DrivingPath& U, cplx z, double T, double eps_swallow = 1e-6,
                        double tol = 1e-11);

// gamma(t_k) by composing the inverse slit maps; `resolution` substeps per grid
// step, with the argument of U interpolated linearly in between
CapCurve trace_from_driving(const DrivingPath& U, int resolution = 1);

struct ZipperOptions {
    double cap = 1e-3;          // largest capacity of one elementary slit
    double max_time = 12.0;     // stop once this capacity is reached
    double boundary_tol = 1e-12;  // images this close to the circle add no capacity
    int max_subdivisions = 40;
    // reject any crossing of the polyline; otherwise only repeated points count
    bool strict_simple = true;
};

struct ZipperResult {
    DrivingPath driving;
    CapCurve curve;        // input points (and inserted midpoints) at their capacities
    int dropped = 0;       // points that added no capacity
    int inserted = 0;      // midpoints inserted to honour the cap
    bool truncated = false;
};

// Radial zipper. The curve starts on the circle (the first point is projected
// onto it) and runs inside the closed disk; throws NonSimple on self-crossings
// (on repeated points only when strict_simple is off). A boundary point `force`
// is carried along as the second marked point V.
ZipperResult extract_driving_full(const std::vector<cplx>& curve, const ZipperOptions& opt = {},
                                  std::optional<cplx> force = std::nullopt);
inline DrivingPath extract_driving(const std::vector<cplx>& curve, const ZipperOptions& opt = {}) {
    return extract_driving_full(curve, opt).driving;
}

// no two non-adjacent segments meet and adjacent ones only share their vertex
bool polyline_is_simple(const std::vector<cplx>& c);

// f_t((1 - eps) U_t), t rounded down to the grid
cplx hyperbolic_geodesic(const DrivingPath& U, double t, double eps);

// --- metrics ---

// sup norm of the difference over the union of both capacity grids
double metric_curve(const CapCurve& a, const CapCurve& b);
// Hausdorff distance between branch sets with metric_curve as ground metric
double metric_tree(const std::vector<CapCurve>& a, const std::vector<CapCurve>& b);
// discrete Frechet over cyclic shifts and both orientations; an upper bound
double metric_loop(const std::vector<cplx>& a, const std::vector<cplx>& b);
double metric_ensemble(const std::vector<std::vector<cplx>>& a, const std::vector<std::vector<cplx>>& b);

// --- uniformizer ---

// Conformal map of a polygonal domain onto the disk with w -> 0 and phi'(w) > 0.
// Re log(phi(z)/(z - w)) is fitted on the boundary by least squares in a basis of
// polynomials (Arnoldi orthogonalized) and poles clustered at reentrant corners.
class Uniformizer {
public:
    Uniformizer() = default;
    Uniformizer(std::vector<cplx> polygon, cplx w, int degree = 48, int poles_per_corner = 12);
    // polygon through the midpoints of the boundary medial edges
    static Uniformizer for_domain(const lattice::WiredDomain& d, cplx w, int degree = 48);

    cplx operator()(cplx z) const;
    // phi, pushed radially into the closed disk
    cplx clamped(cplx z) const;
    cplx inverse(cplx u) const;  // throws SolveFailure
    cplx w() const { return w_; }
    double boundary_error() const { return boundary_error_; }
    const std::vector<cplx>& polygon() const { return polygon_; }
    bool contains(cplx z) const;  // point in polygon

private:
    cplx log_ratio(cplx z) const;  // G(z) = log(phi(z) / (z - w))
    std::vector<cplx> basis(cplx z) const;

    std::vector<cplx> polygon_;
    cplx w_ = 0;
    double scale_ = 1;
    std::vector<std::vector<cplx>> hess_;  // Arnoldi recurrence
    std::vector<cplx> poles_;
    std::vector<cplx> coef_;
    double boundary_error_ = 0;
    std::vector<std::pair<cplx, cplx>> seeds_;  // (z, phi(z)) for Newton starts
};

// curve in the domain -> its image with the capacity parametrization
ZipperResult capacity_parametrize(const std::vector<cplx>& curve, const Uniformizer& phi,
                                  const ZipperOptions& opt = {}, std::optional<cplx> force = std::nullopt);

void write_driving_csv(const DrivingPath& U, const std::string& path);
DrivingPath read_driving_csv(const std::string& path);
void write_curve_csv(const CapCurve& c, const std::string& path);
CapCurve read_curve_csv(const std::string& path);

}  // namespace fkforge::loewner
