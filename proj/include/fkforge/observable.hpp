#pragma once

#include <array>
#include <vector>

#include "fkforge/dca.hpp"
#include "fkforge/loewner.hpp"
#include "fkforge/rcmodel.hpp"

// The observables F and F~ of a Dobrushin domain, their continuum counterparts
// in the unit disk and the coefficients alpha, beta.
namespace fkforge::observable {

using dca::EdgeField;
using lattice::DobrushinDomain;
using lattice::EdgeId;

struct Observables {
    EdgeField F, Ft;  // F with winding measured from f_o, F~ from e_o
    // F~ with the opposite +-4 pi convention on the external arc
    EdgeField F_alt;
};

// exact expectations by enumeration of all bond configurations
Observables observables_exact(const DobrushinDomain& d);
inline EdgeField observable_F_exact(const DobrushinDomain& d) { return observables_exact(d).F; }
inline EdgeField observable_Ftilde_exact(const DobrushinDomain& d) { return observables_exact(d).Ft; }

struct McObservables {
    EdgeField F, Ft;
    EdgeField F_se, Ft_se;  // componentwise standard errors (re, im)
    long samples = 0;
};

// independent Metropolis chains; standard errors from the spread of chain means
McObservables observable_mc(const DobrushinDomain& d, int chains, long sweeps, std::uint64_t seed);

// the bookkeeping constants of the domain
struct Identities {
    cplx eps;             // F(e_o) / F~(e_o)
    cplx eps_i;           // -F(e_i) / F~(e_i)
    double eps_phase_real;  // |Im(eps exp(i theta(e_o)/2))|
    double beta;          // |F~(f)|^2
    double beta_o, beta_i;  // |F(e_o)|^2, |F(e_i)|^2
    cplx dbar_f;          // dbar_1 F at f
};
Identities identities(const DobrushinDomain& d, const Observables& o);

// --- continuum ---

struct Coefficients {
    double alpha = 0, beta = 0;
};
Coefficients coefficients(double upsilon, double phi);

struct QReport {
    cplx m, n;  // double roots on the arcs uv and vu
    double max_residual = 0;  // max of |Q(m)|, |Q'(m)|, ||m|-1| and the same for n
    bool m_on_uv = false, n_on_vu = false;
};
// throws VerificationFailed when the quartic lacks two double roots on the circle
QReport verify_Q(double upsilon, double phi, double alpha, double beta, double tol = 1e-8);

struct ContinuumObservable {
    cplx u, v;
    double upsilon = 0, phi = 0;
    double alpha = 0, beta = 0;
    cplx m, n;
    double sign = 1;  // chosen so that z F(z) -> 1 at 0
    bool degenerate = false;

    static ContinuumObservable make(double upsilon, double phi);
};

struct ContinuumValues {
    cplx F, Ft;
    double H;
};
ContinuumValues continuum_F_H(cplx z, const ContinuumObservable& o);
// boundary value of H at exp(i t), away from u and v
double continuum_H_boundary(double t, const ContinuumObservable& o);

// --- discrete against continuum ---

struct RatioDeviation {
    double max_rel = 0;   // over all pairs (z, z') of |r(z) / r(z') - 1|
    double mean_rel = 0;  // over all pairs
    int points = 0;
};
// r(z) = |F(z)| / (|F_D(phi(z))| |phi'(z)|^(1/2)) at the medial squares whose image
// lies in the annulus rmin <= |phi(z)| <= rmax; the normalization of F cancels in r(z) / r(z')
RatioDeviation compare_discrete_continuum(const DobrushinDomain& d, const EdgeField& F,
                                          const loewner::Uniformizer& phi, double rmin = 0.2,
                                          double rmax = 0.8);

}  // namespace fkforge::observable
