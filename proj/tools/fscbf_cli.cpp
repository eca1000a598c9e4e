// fscbf: simulate, sweep, gridsweep and volcheck front end.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fscbf/experiments.hpp"

namespace {

template <typename F>
int guarded(F&& f)
{
    try {
        return f();
    } catch (const fscbf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return fscbf::kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return fscbf::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fscbf::kExitInvariant;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Feasible-space CBF safety filters: simulations, sweeps and volume checks"};
    app.require_subcommand(1);

    std::string config, spec, out, fixtures;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;

    auto* sim = app.add_subcommand("simulate", "run one scenario and write its trace");
    sim->add_option("--config", config, "scenario file (YAML or JSON)")->required();
    sim->add_option("--out", out, "output directory")->required();
    sim->add_option("--seed", seed, "override the configured seed");

    auto* sweep = app.add_subcommand("sweep", "seeded Monte Carlo sweep over initial state and gains");
    sweep->add_option("--spec", spec, "sweep file")->required();
    sweep->add_option("--out", out, "output directory")->required();
    sweep->add_option("--jobs", jobs, "worker threads (default: FSCBF_JOBS or all cores)");
    sweep->add_option("--seed", seed, "override the base seed");

    auto* grid = app.add_subcommand("gridsweep", "feasible-volume heatmaps over the Dubins state space");
    grid->add_option("--spec", spec, "grid sweep file")->required();
    grid->add_option("--out", out, "output directory")->required();
    grid->add_option("--jobs", jobs, "worker threads (default: FSCBF_JOBS or all cores)");

    auto* vol = app.add_subcommand("volcheck", "cross-check the volume estimators on fixture polytopes");
    vol->add_option("--fixtures", fixtures, "directory of polytope fixtures")->required();
    vol->add_option("--seed", seed, "Monte Carlo seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fscbf::kExitConfig;
    }

    if (*sim) return guarded([&] { return fscbf::cmd_simulate(config, out, {seed}); });
    if (*sweep) return guarded([&] { return fscbf::cmd_sweep(spec, out, {jobs, seed}); });
    if (*grid) return guarded([&] { return fscbf::cmd_gridsweep(spec, out, jobs); });
    fscbf::VolcheckOptions opts;
    if (seed) opts.seed = *seed;
    return guarded([&] { return fscbf::cmd_volcheck(fixtures, opts); });
}
