#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fkforge/lattice.hpp"

// Discrete complex analysis on square lattices and on the medial lattice of a domain.
//
// Lattice fields use doubled coordinates with mesh delta:
//   Gamma       points (2a, 2b), the square lattice delta Z^2
//   Black/White the sublattices of Gamma with a+b even / odd
//   GammaStar   points (odd, odd), the dual of Gamma
//   Diamond     points (odd, even); its horizontal edges have midpoints on Gamma,
//               its vertical edges midpoints on GammaStar
namespace fkforge::dca {

using lattice::CornerId;
using lattice::DobrushinDomain;
using lattice::DomainPtr;
using lattice::EdgeId;
using lattice::P2;
using lattice::SquareId;

enum class Lattice { Black, White, Gamma, GammaStar, Diamond };

struct VertexField {
    Lattice lattice = Lattice::Gamma;
    double mesh = 1.0;
    std::map<P2, cplx> values;

    cplx pos(P2 p) const { return {0.5 * mesh * p.x, 0.5 * mesh * p.y}; }
    bool has(P2 p) const { return values.count(p) != 0; }
    cplx at(P2 p) const;
};

bool on_lattice(Lattice l, P2 p);

// Values on the directed medial edges of a domain. Edge e carries a value on the
// line exp(-i (theta(e) - theta_ref) / 2) R; f, when split, carries F(f_o) in
// `values` and F(f_i) in `split_value`.
struct EdgeField {
    DomainPtr domain;
    std::vector<cplx> values;
    std::vector<char> defined;
    int ref_angle8 = 0;
    EdgeId split = -1;
    cplx split_value = 0;

    explicit EdgeField(DomainPtr d = nullptr);
    cplx operator[](EdgeId e) const { return values[e]; }
    cplx line(EdgeId e) const;  // unit direction of the line of e
};

// Values on the faces (black and white octagons) keyed by doubled face coordinates.
struct FaceField {
    DomainPtr domain;
    std::map<P2, double> values;
    double zeta = 0, xi = 0;            // values on the arcs ab (free) and ba (wired)
    std::optional<double> eta_below;    // faces on either side of a split f
    std::optional<double> eta_above;
    double max_cycle_residual = 0;
    double boundary_spread = 0;         // largest deviation from the arc constants
};

// unnormalized Laplacian on Black or White, normalized = Delta_1 / (2 delta^2)
VertexField laplacian1(const VertexField& f, bool normalized = false);
// Gamma <-> GammaStar; normalized versions divide by sqrt(2) delta
VertexField dbar1(const VertexField& f, bool normalized = false);
VertexField d1(const VertexField& f, bool normalized = false);

struct GreenResult {
    VertexField G;        // on Black, z0 at the origin
    double C = 0;         // fitted additive constant
    double residual = 0;  // max |Delta_1 G - delta_{z0}| over interior points
};

// radius in Black lattice steps (the box |m|, |n| <= radius in the rotated basis)
GreenResult greens_function(int radius, double mesh = 1.0);
// least-squares slope of G against log|z - z0| over rmin <= |z| <= rmax
double log_slope(const VertexField& G, double rmin, double rmax);
// max |G - (log(|z|/(sqrt2 delta))/(2 pi) + C)| * |z|^2 / delta^2 on the annulus
double asymptotic_defect(const GreenResult& g, double rmin, double rmax);

struct CauchyKernel {
    VertexField edges;     // on GammaStar (vertical Diamond edges)
    VertexField vertices;  // on Diamond, sum of the two vertical edges
    double dbar_at_z0 = 0;
    double C = 0;
};

CauchyKernel cauchy_kernel(int radius, double mesh = 1.0);
// mean of C(z) (z - z0) / delta over vertices with rmin <= |z| <= rmax
cplx far_field_coefficient(const CauchyKernel& k, double rmin, double rmax);
// Diamond residuals for a field given on vertical edges; key is the edge midpoint
std::map<P2, double> sholo_residuals(const VertexField& vertical_edges);
// largest deviation from the lines lambda R, conj(lambda) R on vertical edges
double line_deviation(const VertexField& vertical_edges);

// vertex value of a medial square: sum over its two vertical edges
std::optional<cplx> vertex_value(const EdgeField& F, SquareId q);
// residual per medial edge whose endpoints both carry vertex values
std::map<EdgeId, double> sholo_residuals(const EdgeField& F);
// the paper-style dbar at the horizontal edge f from the four vertical edges at its ends
cplx dbar_at_edge(const EdgeField& F, EdgeId f);

// H(B) - H(W) = |F(e)|^2 across every medial edge; f is treated as a slit
FaceField integrate_H(const EdgeField& F, const DobrushinDomain& d, double tol = 1e-10);

void write_csv(const VertexField& f, const std::string& path);
void write_csv(const EdgeField& f, const std::string& path, const EdgeField* stderr_field = nullptr);

}  // namespace fkforge::dca
