#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fkforge/harness.hpp"
#include "fkforge/observable.hpp"

using namespace fkforge;
using harness::ExperimentConfig;
using harness::json;

namespace {

constexpr int kOk = 0, kConfigError = 2, kVerificationFailure = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool config_required = true) {
    auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
    if (config_required) opt->required();
    app->add_option("--seed", c.seed, "seed, overrides the config");
}

ExperimentConfig load(const Common& c, std::vector<std::string> stages = {}) {
    json j = json::object();
    if (!c.config.empty()) {
        std::ifstream in(c.config);
        if (!in) throw ConfigError("cannot read config file " + c.config);
        try {
            in >> j;
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + c.config + " is not valid JSON: " + e.what());
        }
    }
    if (c.seed) j["seed"] = *c.seed;
    if (!stages.empty()) j["stages"] = stages;
    return ExperimentConfig::from_json(j);
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

lattice::DomainPtr domain_of(const ExperimentConfig& c) {
    if (!c.domain.file.empty()) return lattice::load_domain(c.domain.file);
    return lattice::build_rect_domain(c.domain.cols, c.domain.rows, 1.0 / std::max(c.domain.cols, c.domain.rows));
}

// bijection and spanning checks on sampled trees, identities on enumerable domains
json verify(const ExperimentConfig& cfg, bool& ok) {
    auto d = domain_of(cfg);
    auto root = lattice::default_root(*d);
    json out;
    long mismatches = 0, violations = 0;
    for (long i = 0; i < cfg.samples; ++i) {
        auto e = rcmodel::loop_representation(d, rcmodel::sample_sw(*d, cfg.sweeps, cfg.seed, std::uint64_t(i)));
        auto t = tree::build_tree(e, root);
        auto back = tree::recover_loops(t);
        e.canonicalize();
        back.canonicalize();
        mismatches += !(back == e);
        violations += long(tree::check_spanning(t).size() + tree::check_target_independence(t).size());
    }
    out["samples"] = cfg.samples;
    out["loop_mismatches"] = mismatches;
    out["tree_violations"] = violations;
    ok = mismatches == 0 && violations == 0;
    if (d->num_bonds() <= 16) {
        auto dd = lattice::mark_dobrushin(d, root, lattice::default_f(*d));
        auto o = observable::observables_exact(dd);
        auto id = observable::identities(dd, o);
        double res = 0;
        for (auto& [e, r] : dca::sholo_residuals(o.Ft)) res = std::max(res, r);
        out["sholo_residual_Ftilde"] = res;
        out["eps_norm2_minus_beta"] = std::abs(std::norm(id.eps) - id.beta);
        ok = ok && res < 1e-12 && std::abs(std::norm(id.eps) - id.beta) < 1e-12;
    }
    out["ok"] = ok;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: FK-Ising exploration trees, Loewner chains and SLE(kappa, kappa - 6)"};
    app.require_subcommand(1);

    Common sample_c, tree_c, obs_c, loew_c, sle_c, verify_c, exp_c;
    auto* sample = app.add_subcommand("sample", "Swendsen-Wang samples of the configured domain");
    add_common(sample, sample_c);
    auto* tree_cmd = app.add_subcommand("tree", "exploration trees of sampled configurations");
    add_common(tree_cmd, tree_c);

    auto* obs = app.add_subcommand("observable", "exact observables, or the continuum observable at a point");
    add_common(obs, obs_c, false);
    std::optional<double> upsilon, phi;
    std::vector<double> z;
    obs->add_option("--upsilon", upsilon, "continuum: argument of u");
    obs->add_option("--phi", phi, "continuum: argument of v");
    obs->add_option("--z", z, "continuum: point x y")->expected(2);

    auto* loew = app.add_subcommand("loewner", "trace a driving CSV or zip a curve CSV");
    add_common(loew, loew_c, false);
    std::string trace_in, extract_in, out_path;
    int resolution = 1;
    loew->add_option("--trace", trace_in, "driving CSV to trace");
    loew->add_option("--extract", extract_in, "curve CSV to zip");
    loew->add_option("--resolution", resolution, "substeps per grid step when tracing");
    loew->add_option("--output", out_path, "output CSV")->required();

    auto* sle_cmd = app.add_subcommand("sle", "SLE(kappa, rho) ensemble statistics");
    add_common(sle_cmd, sle_c);
    auto* ver = app.add_subcommand("verify", "bijection, spanning and identity checks; exit 3 on failure");
    add_common(ver, verify_c);
    auto* exp = app.add_subcommand("experiment", "run the stages of a config and write a manifest");
    add_common(exp, exp_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*sample) {
            print(harness::run_experiment(load(sample_c, {"sample"})).data);
        } else if (*tree_cmd) {
            print(harness::run_experiment(load(tree_c, {"tree"})).data);
        } else if (*obs) {
            if (upsilon || phi || !z.empty()) {
                if (!upsilon || !phi || z.size() != 2) throw ConfigError("--upsilon, --phi and --z go together");
                auto o = observable::ContinuumObservable::make(*upsilon, *phi);
                auto v = observable::continuum_F_H({z[0], z[1]}, o);
                print({{"alpha", o.alpha},
                       {"beta", o.beta},
                       {"F", {v.F.real(), v.F.imag()}},
                       {"Ftilde", {v.Ft.real(), v.Ft.imag()}},
                       {"H", v.H}});
            } else {
                auto cfg = load(obs_c);
                auto d = domain_of(cfg);
                auto dd = lattice::mark_dobrushin(d, lattice::default_root(*d), lattice::default_f(*d));
                auto o = observable::observables_exact(dd);
                std::filesystem::create_directories(cfg.output);
                dca::write_csv(o.F, cfg.output + "/F.csv");
                dca::write_csv(o.Ft, cfg.output + "/Ftilde.csv");
                auto id = observable::identities(dd, o);
                print({{"eps", {id.eps.real(), id.eps.imag()}}, {"beta", id.beta}, {"output", cfg.output}});
            }
        } else if (*loew) {
            if (trace_in.empty() == extract_in.empty()) throw ConfigError("give exactly one of --trace, --extract");
            if (!trace_in.empty()) {
                loewner::write_curve_csv(loewner::trace_from_driving(loewner::read_driving_csv(trace_in), resolution),
                                         out_path);
            } else {
                auto c = loewner::read_curve_csv(extract_in);
                loewner::write_driving_csv(loewner::extract_driving(c.z), out_path);
            }
            print({{"output", out_path}});
        } else if (*sle_cmd) {
            print(harness::run_experiment(load(sle_c, {"sle"})).data);
        } else if (*ver) {
            bool ok = false;
            print(verify(load(verify_c), ok));
            return ok ? kOk : kVerificationFailure;
        } else if (*exp) {
            print(harness::run_experiment(load(exp_c)).data);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return kConfigError;
    } catch (const VerificationFailed& e) {
        std::cerr << "verification failed: " << e.what() << std::endl;
        return kVerificationFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return kOk;
}
