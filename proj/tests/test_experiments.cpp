#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "fscbf/experiments.hpp"

using namespace fscbf;

namespace {

const fs::path kConfigs = fs::path(FSCBF_SOURCE_DIR) / "configs";

SweepSpec short_sweep(const char* file, int samples)
{
    SweepSpec spec = load_sweep(kConfigs / file);
    spec.samples = samples;
    return spec;
}

} // namespace

TEST(PedestrianCrossing, CbfQpStopsBeforeHorizonAndFsCbfQpOutlastsIt)
{
    ScenarioConfig cfg = load_scenario(kConfigs / "pedestrian_crossing.yaml");
    ASSERT_DOUBLE_EQ(cfg.gains.k_v, 2.5);
    cfg.controller = ControllerKind::CbfQp;
    const SimResult cbf = run_simulation(cfg);
    ASSERT_TRUE(cbf.summary.first_infeasible_time.has_value());
    EXPECT_LT(*cbf.summary.first_infeasible_time, cfg.horizon);

    cfg.controller = ControllerKind::FsCbfQp;
    const SimResult fs = run_simulation(cfg);
    EXPECT_GT(fs.summary.time_to_infeasibility(), *cbf.summary.first_infeasible_time);
    EXPECT_TRUE(trace_violations(cfg, fs).empty());
    EXPECT_TRUE(trace_violations(cfg, cbf).empty());
}

TEST(Sweep, WideRangesFavorFsCbfQp)
{
    SweepSpec spec = short_sweep("sweep_crossing_wide.yaml", 16);
    spec.alpha_V = {1.0};
    const SweepReport rep = run_sweep(spec, 1);
    ASSERT_EQ(rep.variants.size(), 2u);
    EXPECT_EQ(rep.variants[0].failed_runs, 0);
    EXPECT_EQ(rep.variants[1].failed_runs, 0);
    EXPECT_GT(rep.variants[1].mean_time, rep.variants[0].mean_time);
}

TEST(Sweep, ZeroWidthRangesGiveIdenticalRuns)
{
    SweepSpec spec = short_sweep("sweep_crossing_kv_low.yaml", 3);
    spec.p_x = {1.0, 1.0};
    spec.p_y = {1.0, 1.0};
    spec.v = {1.3, 1.3};
    spec.k_x = {1.0, 1.0};
    spec.k_v = {2.5, 2.5};
    spec.alpha_V = {1.0};
    const SweepReport rep = run_sweep(spec, 2);
    ASSERT_EQ(rep.runs.size(), 3u);
    for (const auto& run : rep.runs) {
        ASSERT_EQ(run.outcomes.size(), 2u);
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_EQ(run.outcomes[k].time, rep.runs[0].outcomes[k].time);
            EXPECT_EQ(run.outcomes[k].min_h, rep.runs[0].outcomes[k].min_h);
            EXPECT_EQ(run.outcomes[k].interior_steps, rep.runs[0].outcomes[k].interior_steps);
        }
    }
}

TEST(Sweep, AlphaListGivesOneColumnPerValueAndTimesStayInHorizon)
{
    const SweepSpec spec = short_sweep("sweep_crossing_kv_high.yaml", 2);
    ASSERT_EQ(spec.alpha_V, (std::vector<double>{0.8, 1.0, 2.0}));
    const SweepReport rep = run_sweep(spec, 1);
    const json j = sweep_report_json(spec, rep);
    ASSERT_EQ(j.at("variants").size(), 4u);
    EXPECT_EQ(j.at("variants")[0].at("name"), "cbf_qp");
    for (std::size_t k = 1; k < 4; ++k) EXPECT_EQ(j.at("variants")[k].at("controller"), "fs_cbf_qp");
    for (const auto& run : rep.runs) {
        for (const auto& o : run.outcomes) {
            EXPECT_GE(o.time, 0.0);
            EXPECT_LE(o.time, rep.horizon);
        }
    }
}

TEST(GridSweep, FreeCellsSpanTheIntervalAndObstacleCellsAreZero)
{
    GridSweepSpec spec;
    spec.obstacles = {{{3.0, 3.0}, 1.0, Eigen::Vector2d::Zero()}};
    const DynamicsModel model = dubins_model(spec.speed);
    const auto specs = grid_barriers(spec, model, spec.chains[0].chain);
    Vector far(3), inside(3);
    far << 0.2, 0.2, spec.theta;
    inside << 3.1, 2.9, spec.theta;
    const GridCell a = grid_cell(spec, model, specs, far, 1);
    EXPECT_TRUE(a.compatible);
    for (const double v : a.volume) EXPECT_NEAR(v, 1.0, 1e-9);
    const GridCell b = grid_cell(spec, model, specs, inside, 1);
    EXPECT_TRUE(b.inside_obstacle);
    for (const double v : b.volume) EXPECT_EQ(v, 0.0);
}

TEST(GridSweep, ShippedSpecKeepsMonotonicityAndRange)
{
    const GridSweepSpec spec = load_gridsweep(kConfigs / "gridsweep_dubins.yaml");
    ASSERT_EQ(spec.nx, 60);
    ASSERT_EQ(spec.ny, 60);
    EXPECT_NEAR(spec.theta, std::numbers::pi / 4.0, 1e-15);
    const GridCheck chk = check_gridsweep(spec, run_gridsweep(spec, 1));
    EXPECT_EQ(chk.range_violations, 0);
    for (const auto& m : chk.monotonicity) {
        EXPECT_GT(m.compared, 0);
        EXPECT_EQ(m.violations, 0) << m.variant << "/" << m.method;
    }
}

TEST(Volcheck, UnitBoxReportsAnalyticValues)
{
    const auto fixtures = load_fixtures(fs::path(FSCBF_SOURCE_DIR) / "fixtures" / "volume");
    const auto it = std::find_if(fixtures.begin(), fixtures.end(), [](const auto& f) { return f.name == "unit_box"; });
    ASSERT_NE(it, fixtures.end());
    VolcheckOptions opts;
    opts.timing_calls = 3;
    const FixtureReport r = check_fixture(*it, opts);
    EXPECT_TRUE(r.violations.empty());
    EXPECT_NEAR(r.mc, 4.0, 3.0 * r.mc_sigma + 1e-12);
    EXPECT_LT(r.smoothed, 4.0);
    EXPECT_GT(r.smoothed, 4.0 - 4.0 * opts.smoothing_width);
    EXPECT_NEAR(r.chebyshev_radius, 1.0, 1e-9);
    EXPECT_NEAR(r.ellipsoid_det, 1.0, 1e-6);
}

TEST(Volcheck, EveryShippedFixturePasses)
{
    VolcheckOptions opts;
    opts.timing_calls = 3;
    for (const auto& f : load_fixtures(fs::path(FSCBF_SOURCE_DIR) / "fixtures" / "volume")) {
        const FixtureReport r = check_fixture(f, opts);
        EXPECT_TRUE(r.violations.empty()) << f.name << ": " << (r.violations.empty() ? "" : r.violations.front());
    }
}
