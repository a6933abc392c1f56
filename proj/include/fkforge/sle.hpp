#pragma once

#include <map>
#include <string>
#include <vector>

#include "fkforge/loewner.hpp"

// Radial SLE(kappa) and SLE(kappa, rho) simulation, the martingales M and N,
// radial Bessel statistics and branching SLE(kappa, kappa - 6).
//
// The gap X = (Phi - Upsilon) / 2 is simulated through Z = cos X:
//   dZ = sigma sqrt(1 - Z^2) dB - (b + sigma^2 / 2) Z dt,
//   sigma = sqrt(kappa) / 2, b = (rho + 2) / 4,
// then dPhi = cot X dt and Upsilon = Phi - 2X.
namespace fkforge::sle {

using loewner::DrivingPath;

struct SlePath {
    DrivingPath driving;  // U = exp(i Upsilon), V = exp(i Phi)
    std::vector<double> X, Z, M, N;
    std::vector<int> sign;  // sign of N, fixed on each excursion
    long steps = 0;
    long capped = 0;      // steps where |cot X| hit the cap
    long reflecting = 0;  // steps with |Z| > 1 - 1e-6
};

struct KrParams {
    double kappa = 16.0 / 3.0;
    double rho = -2.0 / 3.0;
    double upsilon0 = 0, phi0 = 0;
    double T = 1, dt = 1e-4;
    // an excursion of Phi - Upsilon ends when |Z| enters [1 - edge_band, 1]
    double edge_band = 1e-9;

    double sigma() const;
    double b() const;
    void validate() const;  // BadParams
};

// One path of the Z scheme, advanced step by step.
class KrStepper {
public:
    KrStepper(const KrParams& p, std::uint64_t seed, std::uint64_t stream = 0);
    void step();

    double t = 0, Z = 1, X = 0, phi = 0, upsilon = 0;
    int sign = 1;
    long steps = 0, capped = 0, reflecting = 0;

    double M() const { return std::exp(t) * Z; }
    double N() const;
    // last increments, for statistics
    double dZ = 0, dX = 0, X_prev = 0, Z_prev = 0;

private:
    KrParams p_;
    Philox rng_;
    bool at_edge_ = true;  // inside the excursion guard band around Z = +-1
    double cap_, edge_;
};

DrivingPath simulate_radial_sle(double kappa, double T, double dt, std::uint64_t seed, std::uint64_t stream = 0);
// stores every `record_every`-th step
SlePath simulate_sle_kr(const KrParams& p, std::uint64_t seed, std::uint64_t stream = 0, int record_every = 1);

struct MeanSe {
    double mean = 0, se = 0;
    long n = 0;
};
enum class Martingale { M, N };
// mean and standard error of M or N at the end of each path
MeanSe martingale_stats(const std::vector<SlePath>& paths, Martingale which);

struct BesselFit {
    double b = 0, sigma2 = 0;
    double b_se = 0;
    double r2 = 0;  // of the drift regression
    long used = 0;
};
// regression of dX on cot(X) dt and of (dX - b cot X dt)^2 on dt over X in [lo, pi - lo]
class BesselAccumulator {
public:
    explicit BesselAccumulator(double lo = 0.3) : lo_(lo) {}
    void add(double X, double dX, double dt);
    void merge(const BesselAccumulator& o);
    BesselFit fit() const;

private:
    double lo_;
    long n_ = 0;
    double sxx_ = 0, sxy_ = 0, syy_ = 0, sdt_ = 0, sy_ = 0;
};
BesselFit bessel_stats(const std::vector<SlePath>& paths, double lo = 0.3);

// quadratic variation rate of Z binned in Z, against sigma^2 (1 - Z^2)
struct QvBins {
    std::vector<double> center, rate, predicted;
    std::vector<long> count;
    double max_rel_error(long min_count = 1000) const;
};

// Streaming ensemble run: everything the acceptance checks need without storing paths.
struct EnsembleReport {
    std::vector<double> checkpoints;
    std::vector<MeanSe> M, N;  // per checkpoint
    double M0 = 0, N0 = 0;
    BesselFit bessel;
    QvBins qv;
    double reflect_fraction = 0;  // steps with |Z| > 1 - 1e-6
    double capped_fraction = 0;
    long paths = 0;
};
EnsembleReport simulate_ensemble(const KrParams& p, long paths, const std::vector<double>& checkpoints,
                                 std::uint64_t seed, int qv_bins = 20);

// --- branching ---

struct BranchingTree {
    std::vector<cplx> targets;
    std::vector<SlePath> paths;  // per target, in the frame of the process that carried it
    // lineage time at which the pair (i, j), i < j, was disconnected; absent if never
    std::map<std::pair<int, int>, double> branch_time;
};

// A target is cut off when its image is sealed against the circle next to the
// tip: 1 - |g_t(z)| < seal and |g_t(z) - U_t| < max(swallow, reach sqrt(dt)).
// With piecewise constant driving the image stops about 2 sqrt(dt) from U_t.
struct BranchingOptions {
    double swallow = 1e-3;
    double reach = 4;
    double seal = 1e-9;
    int record_every = 1;
};

BranchingTree branching_sle(const std::vector<cplx>& targets, double kappa, double T, double dt, std::uint64_t seed,
                            const BranchingOptions& opt = {});
// empty when the three-point condition holds for every triple
std::vector<std::string> check_ultrametric(const BranchingTree& t);

void write_path_csv(const SlePath& p, const std::string& path);

}  // namespace fkforge::sle
