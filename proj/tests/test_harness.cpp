#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fkforge/harness.hpp"

using namespace fkforge;
using namespace fkforge::harness;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& j) {
    try {
        ExperimentConfig::from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("fkforge_" + name);
    fs::remove_all(p);
    return p;
}

json small_config(const std::string& out) {
    return {{"seed", 3},
            {"domain", {{"cols", 8}, {"rows", 8}}},
            {"samples", 3},
            {"sweeps", 20},
            {"annuli", {{{"x", 0.0}, {"y", 1.0}, {"r", 0.1}, {"R", 0.4}}}},
            {"eta", {0.5}},
            {"sle", {{"dt", 1e-3}, {"T", 0.2}, {"paths", 200}}},
            {"output", out},
            {"stages", {"sample", "tree", "crossings", "subtree", "sle"}}};
}

tree::TreeSkeleton sampled_skeleton(int L, std::uint64_t stream) {
    auto d = lattice::build_rect_domain(L, L, 1.0 / L);
    auto e = rcmodel::loop_representation(d, rcmodel::sample_sw(*d, 50, 1, stream));
    return tree::build_skeleton(e, lattice::default_root(*d));
}

int run_cli(const std::string& args) {
    int status = std::system((std::string(FORGE_BIN) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ErrorsNameTheField) {
    EXPECT_NE(config_error({{"seed", 1}, {"sle", {{"dt", -1}}}}).find("sle.dt"), std::string::npos);
    EXPECT_NE(config_error({{"seed", 1}, {"annuli", {{{"x", 0}, {"y", 0}, {"r", 2}, {"R", 1}}}}}).find("annuli[0].R"),
              std::string::npos);
    EXPECT_NE(config_error({{"seed", 1}, {"stages", {"bogus"}}}).find("stages[0]"), std::string::npos);
    EXPECT_NE(config_error({{"seed", 1}, {"colour", 1}}).find("colour"), std::string::npos);
    EXPECT_NE(config_error({{"samples", 3}}).find("seed"), std::string::npos);
    EXPECT_EQ(config_error({{"seed", 1}}), "");
}

TEST(Config, JsonRoundTrip) {
    auto c = ExperimentConfig::from_json(small_config("x"));
    auto back = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    EXPECT_EQ(back.annuli.size(), 1u);
    EXPECT_EQ(back.sle.paths, 200);
}

TEST(Runner, EmptyStagesWriteOnlyTheManifest) {
    auto out = scratch("empty");
    auto m = run_experiment(ExperimentConfig::from_json({{"seed", 1}, {"output", out.string()}}));
    EXPECT_TRUE(m.data["outputs"].empty());
    EXPECT_EQ(std::distance(fs::directory_iterator(out), fs::directory_iterator{}), 1);
    fs::remove_all(out);
}

TEST(Runner, RerunsAndWorkerCountsGiveIdenticalOutputs) {
    auto a = scratch("run_a"), b = scratch("run_b");
    setenv("FKFORGE_WORKERS", "1", 1);
    auto ma = run_experiment(ExperimentConfig::from_json(small_config(a.string())));
    setenv("FKFORGE_WORKERS", "4", 1);
    auto mb = run_experiment(ExperimentConfig::from_json(small_config(b.string())));
    unsetenv("FKFORGE_WORKERS");
    EXPECT_EQ(ma.data["outputs"], mb.data["outputs"]);
    EXPECT_EQ(ma.data["config_hash"], mb.data["config_hash"]);
    EXPECT_TRUE(ma.data["outputs"].contains("subtree.csv"));
    EXPECT_TRUE(ma.data["outputs"].contains("sle.json"));
    EXPECT_EQ(ma.data["version"], version());
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Cli, ExitCodes) {
    auto dir = scratch("cli");
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream((dir / name).string()) << text;
        return (dir / name).string();
    };
    auto good = write("good.json", R"({"seed": 1, "domain": {"cols": 4, "rows": 4}, "samples": 4, "sweeps": 10,
                                       "output": ")" + (dir / "out").string() + R"("})");
    auto bad = write("bad.json", R"({"seed": 1, "sle": {"dt": 0}})");
    auto noseed = write("noseed.json", R"({"samples": 1})");
    auto broken = write("broken.json", "{ seed: ");
    EXPECT_EQ(run_cli("verify --config " + good), 0);
    EXPECT_EQ(run_cli("verify --config " + bad), 2);
    EXPECT_EQ(run_cli("verify --config " + noseed), 2);
    EXPECT_EQ(run_cli("verify --config " + noseed + " --seed 4"), 0);
    EXPECT_EQ(run_cli("sample --config " + broken), 2);
    EXPECT_EQ(run_cli("sample --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("sample"), 2);
    EXPECT_EQ(run_cli("observable --upsilon -1 --phi 2 --z 0.1 0.2"), 0);
    EXPECT_EQ(run_cli("observable --upsilon 2 --phi -1 --z 0.1 0.2"), 1);
    fs::remove_all(dir);
}

TEST(Crossings, TrivialAnnuliAndNesting) {
    auto sk = sampled_skeleton(16, 1);
    // no tree corner near a point outside the domain
    EXPECT_EQ(count_disjoint_crossings(sk, {{5, 5}, 0.1, 0.2}), 0);
    // the outer circle encloses the whole domain
    EXPECT_EQ(count_disjoint_crossings(sk, {{0, 1}, 0.1, 5}), 0);
    EXPECT_THROW(count_disjoint_crossings(sk, {{0, 1}, 0.3, 0.2}), BadParams);
    for (cplx z0 : {cplx(0, 1), cplx(0.3, 0.8), cplx(-0.4, 1.2)}) {
        int prev = 1 << 30;
        for (double R : {0.2, 0.3, 0.45, 0.6}) {
            int c = count_disjoint_crossings(sk, {z0, 0.1, R});
            EXPECT_LE(c, prev);
            prev = c;
        }
        EXPECT_LE(count_disjoint_crossings(sk, {z0, 0.05, 0.3}), count_disjoint_crossings(sk, {z0, 0.1, 0.3}));
    }
}

TEST(Crossings, SkeletonAndFullTreeAgree) {
    auto d = lattice::build_rect_domain(10, 10, 0.1);
    auto e = rcmodel::loop_representation(d, rcmodel::sample_sw(*d, 30, 2));
    auto t = tree::build_tree(e, lattice::default_root(*d));
    auto sk = tree::build_skeleton(e, lattice::default_root(*d));
    for (double r : {0.05, 0.1, 0.2}) {
        Annulus a{{0, 1}, r, 4 * r};
        EXPECT_EQ(count_disjoint_crossings(t, a), count_disjoint_crossings(sk, a));
    }
}

TEST(Tortuosity, StraightLinesAndLargeRadii) {
    std::vector<cplx> line;
    for (int k = 0; k <= 100; ++k) line.push_back(cplx(0.03 * k, 0));
    EXPECT_EQ(tortuosity(line, 0.5), 6);   // length 3
    EXPECT_EQ(tortuosity(line, 0.7), 5);
    EXPECT_EQ(tortuosity(line, 3.0), 1);
    EXPECT_EQ(tortuosity(line, 10), 1);
    EXPECT_THROW(tortuosity(line, 0), BadParams);
}

TEST(Tortuosity, BoundedByVertexCuts) {
    // cuts restricted to the vertices of a fine resampling give an upper bound,
    // and the bound at r loses at most 2h against the continuous cuts
    Philox rng(4);
    std::vector<cplx> walk{0};
    for (int k = 0; k < 60; ++k) walk.push_back(walk.back() + std::polar(0.1, 2 * kPi * rng.uniform()));
    const double h = 0.005;
    std::vector<cplx> fine{walk[0]};
    for (std::size_t k = 1; k < walk.size(); ++k) {
        int n = int(std::ceil(std::abs(walk[k] - walk[k - 1]) / h));
        for (int j = 1; j <= n; ++j) fine.push_back(walk[k - 1] + (walk[k] - walk[k - 1]) * (double(j) / n));
    }
    for (double r : {0.15, 0.3, 0.6, 1.2}) {
        int m = tortuosity(walk, r), dp = tortuosity_vertex_cuts(fine, r);
        EXPECT_LE(m, dp) << r;
        EXPECT_LE(tortuosity_vertex_cuts(fine, r), tortuosity(walk, r - 2 * h)) << r;
    }
    // monotone in r
    int prev = 1 << 30;
    for (double r : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        int m = tortuosity(walk, r);
        EXPECT_LE(m, prev);
        prev = m;
    }
}

TEST(Holder, ConstantAndLinearCurves) {
    loewner::CapCurve flat{{0, 0.5, 1}, {1, 1, 1}};
    for (auto& h : holder_estimate(flat)) EXPECT_EQ(h.norm, 0);
    loewner::CapCurve seg{{0, 1}, {0, 1}};
    for (auto& h : holder_estimate(seg)) EXPECT_NEAR(h.norm, std::pow(0.5, 1 - h.exponent), 1e-12);
}

TEST(Statistics, KolmogorovSmirnov) {
    EXPECT_DOUBLE_EQ(kolmogorov_q(0.1), 1);
    EXPECT_NEAR(kolmogorov_q(1.36), 0.049, 1e-3);
    Philox rng(1);
    std::vector<double> a, b, c;
    for (int i = 0; i < 2000; ++i) a.push_back(rng.normal()), b.push_back(rng.normal()), c.push_back(rng.normal() + 0.3);
    EXPECT_GT(ks_two_sample(a, b).p, 0.01);
    EXPECT_LT(ks_two_sample(a, c).p, 1e-6);
    EXPECT_DOUBLE_EQ(ks_two_sample({1, 2, 3}, {1, 2, 3}).D, 0);
    EXPECT_THROW(ks_two_sample({}, {1}), InsufficientData);
}

TEST(Statistics, QuadraticVariationOfBrownianDriving) {
    // Upsilon = sqrt(kappa) B, so the estimator should give back kappa
    const double kappa = 16.0 / 3, dt = 1e-3;
    std::vector<loewner::DrivingPath> paths;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Philox rng(12, s);
        std::vector<double> t{0}, ups{0}, phi{kPi};
        for (int k = 1; k <= 600; ++k) {
            t.push_back(k * dt);
            ups.push_back(ups.back() + std::sqrt(kappa * dt) * rng.normal());
            phi.push_back(ups.back() + kPi);
        }
        paths.push_back(loewner::DrivingPath::from_arguments(t, ups, phi));
    }
    auto est = kappa_qv(paths);
    EXPECT_EQ(est.used, 200);
    EXPECT_LE(est.lo, kappa);
    EXPECT_GE(est.hi, kappa);
    EXPECT_LT(est.se, 0.2);
}

TEST(Statistics, SyntheticTracesThroughTheZipper) {
    auto paths = synthetic_sle_driving(16.0 / 3, -2.0 / 3, 1.0, 40, 5e-4, 0.6, 5);
    ASSERT_EQ(paths.size(), 40u);
    auto est = kappa_qv(paths);
    EXPECT_GT(est.used, 30);
    EXPECT_NEAR(est.value, 16.0 / 3, 4 * est.se);
    for (auto& p : paths) EXPECT_TRUE(p.has_V());
}

TEST(Parallel, EverySlotOnce) {
    setenv("FKFORGE_WORKERS", "3", 1);
    std::vector<int> hits(100, 0);
    parallel_for(100, [&](int i) { hits[i] += 1; });
    unsetenv("FKFORGE_WORKERS");
    for (int h : hits) EXPECT_EQ(h, 1);
}
