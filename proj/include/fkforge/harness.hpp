#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fkforge/loewner.hpp"
#include "fkforge/sle.hpp"
#include "fkforge/tree.hpp"

// Estimators on sampled trees and branches, the FK branch against SLE
// comparison and the experiment runner behind the CLI.
namespace fkforge::harness {

using nlohmann::json;

// Runs fn(0), ..., fn(n - 1) on worker_count() threads. Work items must write
// only to their own slots; results then do not depend on the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

// --- config ---

struct Annulus {
    cplx z0;
    double r = 0, R = 0;
};

struct DomainSpec {
    int cols = 8, rows = 8;
    std::string file;  // text domain, overrides cols/rows when set
};

struct SleSettings {
    double kappa = 16.0 / 3.0, rho = -2.0 / 3.0;
    double dt = 1e-4, T = 1;
    long paths = 1000;
};

struct ExperimentConfig {
    DomainSpec domain;
    std::vector<int> meshes;      // side lengths of the square domains in the mesh study
    int chains = 1;
    long sweeps = 200;            // burn-in sweeps per sample
    long samples = 20;
    std::uint64_t seed = 0;
    std::vector<int> targets;     // target edge ids, empty for the domain default
    std::vector<Annulus> annuli;
    std::vector<double> eta;
    SleSettings sle;
    std::string output = "out";
    std::vector<std::string> stages;

    static ExperimentConfig from_json(const json& j);  // ConfigError with the field path
    static ExperimentConfig load(const std::string& path);
    json to_json() const;
    std::uint64_t hash() const;  // the output directory is left out
};

// --- crossings, tortuosity, Hoelder ---

// Largest number of vertex-disjoint tree paths joining the closed disk
// B(z0, r) to the complement of the open disk B(z0, R), by max flow.
int count_disjoint_crossings(const tree::TreeSkeleton& t, const Annulus& a);
int count_disjoint_crossings(const tree::ExplorationTree& t, const Annulus& a);
tree::TreeSkeleton skeleton_of(const tree::ExplorationTree& t);

// least number of consecutive pieces of diameter <= r covering the polyline
int tortuosity(const std::vector<cplx>& curve, double r);
// dynamic programming over cuts at the vertices only; an upper bound, for tests
int tortuosity_vertex_cuts(const std::vector<cplx>& curve, double r);

struct HolderNorm {
    double exponent = 0, norm = 0;
};
// sup |g(s) - g(t)| / |s - t|^a over neighbouring dyadic points of the capacity
// interval, down to 2^-levels of its length
std::vector<HolderNorm> holder_estimate(const loewner::CapCurve& c,
                                        const std::vector<double>& exponents = {0.1, 0.2, 0.3, 0.4, 0.5},
                                        int levels = 10);

// --- statistics ---

// asymptotic two-sample Kolmogorov-Smirnov test
struct KsResult {
    double D = 0, p = 1;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
double kolmogorov_q(double lambda);  // P(K > lambda)

struct Estimate {
    double value = 0, se = 0;
    double lo = 0, hi = 0;  // value -+ 1.96 se
    long used = 0;
};

// kappa from the quadratic variation of the driving argument Upsilon, sampled
// every `lag` of capacity over [0, horizon]; jackknife over paths. Paths that
// do not reach the horizon are left out.
struct QvOptions {
    double lag = 0.02;
    double horizon = 0.5;
};
Estimate kappa_qv(const std::vector<loewner::DrivingPath>& paths, const QvOptions& opt = {});
// kappa = 4 b + 4 from the drift of X = (Phi - Upsilon) / 2 (b = (rho + 2) / 4 with rho = kappa - 6)
Estimate kappa_drift(const std::vector<loewner::DrivingPath>& paths, const QvOptions& opt = {});

struct DriftCheck {
    double t0 = 0, t1 = 0;
    sle::MeanSe increment;  // of M = e^t cos X between t0 and t1
    bool within_3se = false;
};
std::vector<DriftCheck> martingale_drift(const std::vector<loewner::DrivingPath>& paths,
                                         const std::vector<double>& checkpoints);

// --- FK branches against SLE ---

struct FkSample {
    loewner::DrivingPath driving;
    double gap0 = 0;
    double zip_seconds = 0;
};

struct FkMeshOptions {
    int L = 32;
    long samples = 200;
    long burn_in = 200;     // Swendsen-Wang sweeps per sample, from a fresh chain
    double max_time = 0.6;  // zipper horizon
    std::uint64_t seed = 1;
};
// FK branch from the root to the central edge f of an L x L domain, in the disk
// by the uniformizer with w -> 0, zipped with the boundary point b as force point
std::vector<FkSample> fk_branch_driving(const FkMeshOptions& opt);

// synthetic SLE(kappa, rho) traces pushed through the same zipper
std::vector<loewner::DrivingPath> synthetic_sle_driving(double kappa, double rho, double gap0, long traces,
                                                        double dt, double horizon, std::uint64_t seed);

struct MeshReport {
    int L = 0;
    long samples = 0;
    Estimate kappa, kappa_drift;
    std::vector<DriftCheck> drift;
    double mean_gap0 = 0;
    KsResult gap_ks;  // X at the horizon against SLE(16/3, -2/3) from the same mean gap
    double seconds = 0;
};

struct FkVsSleReport {
    std::vector<MeshReport> meshes;
    Estimate synthetic;
    double kappa_target = 16.0 / 3.0;
    bool ci_hits_range = false;    // some CI point of the finest mesh in [4.3, 6.4]
    bool monotone = false;         // |kappa - 16/3| shrinks with every halving
    bool self_calibrated = false;  // synthetic CI contains the simulated kappa
    json to_json() const;
};

struct FkVsSleOptions {
    std::vector<int> meshes{32, 64};
    long samples = 200;
    long burn_in = 200;
    long synthetic = 200;
    double synthetic_dt = 2e-4;
    QvOptions qv;
    long sle_paths = 2000;  // for the gap KS comparison
    std::uint64_t seed = 1;
};
FkVsSleReport fk_vs_sle(const FkVsSleOptions& opt);

// --- crossings on sampled trees ---

struct CrossingStudyOptions {
    int L = 64;
    long trees = 200;
    long burn_in = 200;
    // inner radii around the centre of the domain (which is about 2 across); the
    // outer circle stays within half the inradius
    std::vector<double> radii{0.08, 0.04, 0.02, 0.01};
    double ratio = 4;
    int min_crossings = 6;
    std::uint64_t seed = 2;
};
struct CrossingStudy {
    std::vector<double> radii;
    std::vector<double> probability;  // P(count >= min_crossings) per radius
    std::vector<double> mean_count;
    bool nonincreasing = false;  // P as r shrinks
    // M_r of the branch to the central edge at the same radii, per tree
    std::vector<std::vector<int>> tortuosity;
    bool tortuosity_monotone = false;  // M_r nonincreasing in r on every branch
};
CrossingStudy crossing_study(const CrossingStudyOptions& opt);

// --- finite subtrees against the full tree ---

struct SubtreeDistance {
    double eta = 0;
    int grid_points = 0;
    std::size_t targets = 0;
    int refinements = 0;
    double max_component = 0;
    double d_tree = 0;  // metric_tree of the capacity-parametrized subtree against all branches
};
std::vector<SubtreeDistance> subtree_distances(const tree::TreeSkeleton& sk, const std::vector<double>& etas,
                                               const loewner::Uniformizer& phi);

// --- runner ---

struct Manifest {
    json data;
    std::string path;
};
// stages: sample, tree, crossings, subtree, fk_vs_sle, sle; writes CSV/JSON into
// config.output and a manifest.json with seeds, version, config hash and output hashes
Manifest run_experiment(const ExperimentConfig& cfg);

std::string version();
std::uint64_t file_hash(const std::string& path);

}  // namespace fkforge::harness
