#ifndef FSCBF_EXPERIMENTS_HPP
#define FSCBF_EXPERIMENTS_HPP

// Batch drivers behind the command-line tool: single simulations with full
// tracing, seeded Monte Carlo sweeps, Dubins grid sweeps of the feasible
// volume, and a cross-check of the volume estimators on fixture polytopes.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscbf/config.hpp"
#include "fscbf/scenario.hpp"
#include "fscbf/volume.hpp"

namespace fscbf {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitInvariant = 1, kExitConfig = 2 };

constexpr double kSafetyTolerance = 1e-3;
constexpr double kMappedToBoundary = 1e-6;
constexpr double kMappedToInterior = 1e-3;

inline std::string fmt_num(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vector_json(const Vector& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
    return a;
}

inline void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Steps where u_ref lies outside the feasible set, CBF-QP would project it
/// onto the boundary and FS-CBF-QP keeps a strictly interior input.
inline int interior_mapping_steps(const std::vector<SimTraceRow>& trace)
{
    int n = 0;
    for (const auto& r : trace) {
        if (r.status != DecisionStatus::Ok || r.u_ref_feasible) continue;
        if (r.shadow_margin <= kMappedToBoundary && r.boundary_margin > kMappedToInterior) ++n;
    }
    return n;
}

inline std::vector<std::string> barrier_labels(const ScenarioConfig& cfg)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) out.push_back("obstacle" + std::to_string(i));
    for (std::size_t i = 0; i < cfg.humans.size(); ++i) out.push_back("human" + std::to_string(i));
    return out;
}

inline std::string trace_csv(const ScenarioConfig& cfg, const DynamicsModel& model, const SimResult& r)
{
    std::ostringstream os;
    os << "step,t";
    for (const auto& s : model.state_labels) os << ',' << s;
    for (const auto& s : model.control_labels) os << ",u_" << s;
    for (const auto& s : model.control_labels) os << ",uref_" << s;
    os << ",delta,V";
    const auto labels = barrier_labels(cfg);
    for (const auto& s : labels) os << ",h_" << s;
    if (cfg.grid) os << ",h_grid_min";
    os << ",status,boundary_margin,fs_row_dropped,uref_feasible,rows";
    if (cfg.shadow_cbf_qp) os << ",shadow_margin";
    os << '\n';
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const auto& row = r.trace[k];
        os << k << ',' << fmt_num(row.t);
        for (Eigen::Index i = 0; i < row.x.size(); ++i) os << ',' << fmt_num(row.x(i));
        for (Eigen::Index i = 0; i < row.u.size(); ++i) os << ',' << fmt_num(row.u(i));
        for (Eigen::Index i = 0; i < row.u_ref.size(); ++i) os << ',' << fmt_num(row.u_ref(i));
        os << ',' << fmt_num(row.delta) << ',' << fmt_num(row.V);
        for (const double h : row.h) os << ',' << fmt_num(h);
        if (cfg.grid) os << ',' << fmt_num(row.h_grid_min);
        os << ',' << (row.status == DecisionStatus::Ok ? "ok" : "infeasible") << ',' << fmt_num(row.boundary_margin)
           << ',' << (row.fs_row_dropped ? 1 : 0) << ',' << (row.u_ref_feasible ? 1 : 0) << ',' << row.rows;
        if (cfg.shadow_cbf_qp) os << ',' << fmt_num(row.shadow_margin);
        os << '\n';
    }
    return os.str();
}

inline json summary_json(const ScenarioConfig& cfg, const SimResult& r, bool with_runtime)
{
    json j;
    j["controller"] = std::string(to_string(cfg.controller));
    j["seed"] = cfg.seed;
    j["reached_goal"] = r.summary.reached_goal;
    j["first_infeasible_time"] =
        r.summary.first_infeasible_time ? json(*r.summary.first_infeasible_time) : json(nullptr);
    j["min_h"] = finite_or_null(r.summary.min_h);
    j["steps"] = r.summary.steps;
    j["horizon"] = r.summary.horizon;
    if (cfg.shadow_cbf_qp) j["interior_mapping_steps"] = interior_mapping_steps(r.trace);
    if (with_runtime) j["runtime"] = r.summary.runtime_s;
    return j;
}

inline json snapshots_json(const SimResult& r)
{
    json arr = json::array();
    for (const auto& s : r.snapshots) {
        json j = to_json(s.polytope);
        j["step"] = s.step;
        j["t"] = s.t;
        j["u"] = vector_json(s.u);
        j["u_ref"] = vector_json(s.u_ref);
        arr.push_back(std::move(j));
    }
    return arr;
}

/// Safety bookkeeping and trace completeness; empty when the trace is clean.
inline std::vector<std::string> trace_violations(const ScenarioConfig& cfg, const SimResult& r)
{
    std::vector<std::string> out;
    for (const auto& row : r.trace) {
        if (row.status != DecisionStatus::Ok) continue;
        for (const double h : row.h) {
            if (!(h >= -kSafetyTolerance)) {
                out.push_back("barrier below -1e-3 at t=" + fmt_num(row.t) + " (h=" + fmt_num(h) + ")");
                break;
            }
        }
        if (!std::isnan(row.h_grid_min) && row.h_grid_min < -kSafetyTolerance) {
            out.push_back("grid barrier below -1e-3 at t=" + fmt_num(row.t));
        }
        const bool volume_expected = cfg.controller == ControllerKind::FsCbfQp || cfg.trace_volume;
        if (volume_expected && !std::isfinite(row.V)) out.push_back("non-finite V at t=" + fmt_num(row.t));
    }
    return out;
}

struct SimulateOptions {
    std::optional<std::uint64_t> seed;
};

/// Writes trace.csv, summary.json and snapshots.json into `out_dir`.
inline int cmd_simulate(const fs::path& config_path, const fs::path& out_dir, const SimulateOptions& opts = {},
                        std::ostream& log = std::cout)
{
    ScenarioConfig cfg = load_scenario(config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    const DynamicsModel model = scenario_model(cfg);
    const SimResult r = run_simulation(cfg);
    fs::create_directories(out_dir);
    write_text(out_dir / "trace.csv", trace_csv(cfg, model, r));
    write_text(out_dir / "summary.json", summary_json(cfg, r, true).dump(2) + "\n");
    write_text(out_dir / "snapshots.json", snapshots_json(r).dump() + "\n");
    log << "controller " << to_string(cfg.controller) << ": " << r.summary.steps << " steps, "
        << (r.summary.first_infeasible_time ? "infeasible at t=" + fmt_num(*r.summary.first_infeasible_time)
                                            : std::string("feasible to horizon"))
        << (r.summary.reached_goal ? ", goal reached" : "") << ", min h " << fmt_num(r.summary.min_h) << '\n';
    const auto violations = trace_violations(cfg, r);
    for (const auto& v : violations) std::cerr << "invariant violated: " << v << '\n';
    return violations.empty() ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// Sweeps

inline int worker_count(std::optional<int> requested)
{
    if (requested && *requested > 0) return *requested;
    if (const char* env = std::getenv("FSCBF_JOBS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `task(i)` for i in [0, n) on `jobs` threads. Tasks write to their own
/// slots, so the aggregate does not depend on scheduling.
template <typename Task>
void parallel_for(std::size_t n, int jobs, Task&& task)
{
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) task(i);
    };
    const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n));
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
}

struct SweepSample {
    std::uint64_t seed = 0;
    double p_x = 0.0, p_y = 0.0, v = 0.0, k_x = 0.0, k_v = 0.0;
};

struct VariantOutcome {
    double time = 0.0;
    bool infeasible = false;
    bool reached_goal = false;
    double min_h = std::numeric_limits<double>::infinity();
    int interior_steps = 0;
    std::string error;
};

struct SweepRun {
    int index = 0;
    SweepSample sample;
    std::vector<VariantOutcome> outcomes; // one per variant
};

struct VariantSummary {
    SweepVariant variant;
    double mean_time = 0.0;
    int infeasible_runs = 0;
    int failed_runs = 0;
    int goal_runs = 0;
    double min_h = std::numeric_limits<double>::infinity();
    int interior_steps = 0;
};

struct SweepReport {
    std::vector<VariantSummary> variants;
    std::vector<SweepRun> runs;
    double horizon = 0.0;
    json echo;
};

inline SweepSample draw_sample(const SweepSpec& spec, int index)
{
    SweepSample s;
    s.seed = mix_seed(mix_seed(spec.seed) + static_cast<std::uint64_t>(index));
    std::mt19937_64 rng(s.seed);
    s.p_x = spec.p_x.sample(rng);
    s.p_y = spec.p_y.sample(rng);
    s.v = spec.v.sample(rng);
    s.k_x = spec.k_x.sample(rng);
    s.k_v = spec.k_v.sample(rng);
    return s;
}

inline ScenarioConfig sample_scenario(const SweepSpec& spec, const SweepSample& s, const SweepVariant& variant)
{
    ScenarioConfig cfg = spec.scenario;
    cfg.seed = s.seed;
    cfg.initial_state(0) = s.p_x;
    cfg.initial_state(1) = s.p_y;
    cfg.initial_state(2) = s.v;
    if (spec.face_goal) cfg.initial_state(3) = std::atan2(cfg.goal.y() - s.p_y, cfg.goal.x() - s.p_x);
    cfg.gains.k_x = s.k_x;
    cfg.gains.k_v = s.k_v;
    cfg.controller = variant.controller;
    cfg.snapshot_stride = 0;
    if (variant.controller == ControllerKind::FsCbfQp) {
        cfg.fs.alpha_V = variant.alpha_V;
        cfg.shadow_cbf_qp = true;
    } else {
        cfg.trace_volume = false;
        cfg.shadow_cbf_qp = false;
    }
    return cfg;
}

inline VariantOutcome run_variant(const ScenarioConfig& cfg)
{
    VariantOutcome o;
    try {
        const SimResult r = run_simulation(cfg);
        o.time = std::clamp(r.summary.time_to_infeasibility(), 0.0, cfg.horizon);
        o.infeasible = r.summary.first_infeasible_time.has_value();
        o.reached_goal = r.summary.reached_goal;
        o.min_h = r.summary.min_h;
        o.interior_steps = interior_mapping_steps(r.trace);
    } catch (const std::exception& e) {
        o.error = e.what();
        o.time = std::numeric_limits<double>::quiet_NaN();
    }
    return o;
}

inline SweepReport run_sweep(const SweepSpec& spec, int jobs)
{
    SweepReport rep;
    rep.horizon = spec.scenario.horizon;
    const auto variants = spec.variants();
    rep.runs.resize(static_cast<std::size_t>(spec.samples));
    parallel_for(rep.runs.size(), jobs, [&](std::size_t i) {
        SweepRun& run = rep.runs[i];
        run.index = static_cast<int>(i);
        run.sample = draw_sample(spec, run.index);
        for (const auto& v : variants) run.outcomes.push_back(run_variant(sample_scenario(spec, run.sample, v)));
    });
    for (std::size_t k = 0; k < variants.size(); ++k) {
        VariantSummary s;
        s.variant = variants[k];
        int ok = 0;
        for (const auto& run : rep.runs) {
            const auto& o = run.outcomes[k];
            if (!o.error.empty()) {
                ++s.failed_runs;
                continue;
            }
            ++ok;
            s.mean_time += o.time;
            s.infeasible_runs += o.infeasible ? 1 : 0;
            s.goal_runs += o.reached_goal ? 1 : 0;
            s.min_h = std::min(s.min_h, o.min_h);
            s.interior_steps += o.interior_steps;
        }
        s.mean_time = ok > 0 ? s.mean_time / ok : std::numeric_limits<double>::quiet_NaN();
        rep.variants.push_back(s);
    }
    return rep;
}

inline json sweep_report_json(const SweepSpec& spec, const SweepReport& rep)
{
    json j;
    j["config"] = {{"samples", spec.samples},
                   {"seed", spec.seed},
                   {"face_goal", spec.face_goal},
                   {"ranges",
                    {{"p_x", {spec.p_x.lower, spec.p_x.upper}},
                     {"p_y", {spec.p_y.lower, spec.p_y.upper}},
                     {"v", {spec.v.lower, spec.v.upper}},
                     {"k_x", {spec.k_x.lower, spec.k_x.upper}},
                     {"k_v", {spec.k_v.lower, spec.k_v.upper}}}},
                   {"scenario", spec.scenario_echo}};
    j["horizon"] = rep.horizon;
    json variants = json::array();
    for (const auto& v : rep.variants) {
        json e = {{"name", v.variant.name()},
                  {"controller", std::string(to_string(v.variant.controller))},
                  {"mean_time", finite_or_null(v.mean_time)},
                  {"infeasible_runs", v.infeasible_runs},
                  {"failed_runs", v.failed_runs},
                  {"goal_runs", v.goal_runs},
                  {"min_h", finite_or_null(v.min_h)}};
        if (v.variant.controller == ControllerKind::FsCbfQp) {
            e["alpha_V"] = v.variant.alpha_V;
            e["interior_mapping_steps"] = v.interior_steps;
        }
        variants.push_back(std::move(e));
    }
    j["variants"] = variants;
    json runs = json::array();
    for (const auto& run : rep.runs) {
        json r = {{"index", run.index},
                  {"seed", run.sample.seed},
                  {"p_x", run.sample.p_x},
                  {"p_y", run.sample.p_y},
                  {"v", run.sample.v},
                  {"k_x", run.sample.k_x},
                  {"k_v", run.sample.k_v}};
        json outcomes = json::object();
        for (std::size_t k = 0; k < run.outcomes.size(); ++k) {
            const auto& o = run.outcomes[k];
            json e = {{"time", finite_or_null(o.time)},
                      {"infeasible", o.infeasible},
                      {"reached_goal", o.reached_goal},
                      {"min_h", finite_or_null(o.min_h)}};
            if (rep.variants[k].variant.controller == ControllerKind::FsCbfQp) e["interior_mapping_steps"] = o.interior_steps;
            if (!o.error.empty()) e["error"] = o.error;
            outcomes[rep.variants[k].variant.name()] = std::move(e);
        }
        r["outcomes"] = std::move(outcomes);
        runs.push_back(std::move(r));
    }
    j["runs"] = runs;
    return j;
}

inline std::string sweep_runs_csv(const SweepReport& rep)
{
    std::ostringstream os;
    os << "index,seed,p_x,p_y,v,k_x,k_v";
    for (const auto& v : rep.variants) os << ",T_" << v.variant.name();
    os << '\n';
    for (const auto& run : rep.runs) {
        os << run.index << ',' << run.sample.seed << ',' << fmt_num(run.sample.p_x) << ',' << fmt_num(run.sample.p_y)
           << ',' << fmt_num(run.sample.v) << ',' << fmt_num(run.sample.k_x) << ',' << fmt_num(run.sample.k_v);
        for (const auto& o : run.outcomes) os << ',' << fmt_num(o.time);
        os << '\n';
    }
    return os.str();
}

struct SweepOptions {
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
};

/// Writes report.json and runs.csv; neither contains wall-clock data.
inline int cmd_sweep(const fs::path& spec_path, const fs::path& out_dir, const SweepOptions& opts = {},
                     std::ostream& log = std::cout)
{
    SweepSpec spec = load_sweep(spec_path);
    if (opts.seed) spec.seed = *opts.seed;
    const auto start = std::chrono::steady_clock::now();
    const SweepReport rep = run_sweep(spec, worker_count(opts.jobs));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fs::create_directories(out_dir);
    write_text(out_dir / "report.json", sweep_report_json(spec, rep).dump(2) + "\n");
    write_text(out_dir / "runs.csv", sweep_runs_csv(rep));
    bool times_ok = true;
    for (const auto& v : rep.variants) {
        log << v.variant.name() << ": mean T = " << fmt_num(v.mean_time) << " s, infeasible " << v.infeasible_runs
            << '/' << spec.samples << ", failed " << v.failed_runs << ", min h " << fmt_num(v.min_h) << '\n';
        if (v.min_h < -kSafetyTolerance) log << "  warning: barrier value below -1e-3 in some run\n";
    }
    for (const auto& run : rep.runs)
        for (const auto& o : run.outcomes)
            if (o.error.empty() && !(o.time >= 0.0 && o.time <= rep.horizon)) times_ok = false;
    log << spec.samples << " samples in " << fmt_num(elapsed) << " s\n";
    if (!times_ok) std::cerr << "invariant violated: reported time outside [0, horizon]\n";
    return times_ok ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// Grid sweep over the Dubins state space at a fixed heading.

struct GridCell {
    bool inside_obstacle = false;
    bool compatible = false; // all psi^1 >= 0
    std::vector<double> volume; // one per method
    std::vector<double> mc_std;  // Monte Carlo standard error, when MC is among the methods
};

struct GridSweepResult {
    // [chain][iy * nx + ix]
    std::vector<std::vector<GridCell>> cells;
};

inline std::vector<BarrierSpec> grid_barriers(const GridSweepSpec& spec, const DynamicsModel& model,
                                              const ClassKChain& chain)
{
    std::vector<BarrierSpec> out;
    for (std::size_t i = 0; i < spec.obstacles.size(); ++i) {
        out.push_back(circle_barrier(model, spec.obstacles[i].center, spec.obstacles[i].radius, 2, chain,
                                     Eigen::Vector2d::Zero(), 0.0, "obstacle" + std::to_string(i)));
    }
    return out;
}

inline double grid_coord(std::pair<double, double> r, int n, int i)
{
    return r.first + (r.second - r.first) * static_cast<double>(i) / static_cast<double>(n - 1);
}

/// Volume of the feasible input set at one cell. Proxies are converted to
/// volumes (unit-ball constant times r^m or det B) so every method shares units.
inline GridCell grid_cell(const GridSweepSpec& spec, const DynamicsModel& model,
                          const std::vector<BarrierSpec>& specs, const Vector& x, std::uint64_t cell_seed)
{
    GridCell c;
    c.volume.assign(spec.methods.size(), 0.0);
    c.mc_std.assign(spec.methods.size(), 0.0);
    std::vector<HocbfRow> rows;
    const HPolytope p = assemble_polytope(specs, spec.bounds, model, 0.0, x, &rows);
    c.compatible = true;
    for (const auto& r : rows) {
        if (r.psi[0] < 0.0) c.inside_obstacle = true;
        if (r.psi[1] < 0.0) c.compatible = false;
    }
    if (c.inside_obstacle) {
        c.compatible = false;
        return c;
    }
    const double kappa = unit_ball_volume(p.dim());
    for (std::size_t k = 0; k < spec.methods.size(); ++k) {
        switch (spec.methods[k]) {
        case VolumeMethod::MonteCarlo:
        case VolumeMethod::SmoothedMC: {
            McConfig mc{spec.mc_samples, cell_seed, 0.0};
            VolumeResult v;
            if (spec.methods[k] == VolumeMethod::MonteCarlo) {
                v = mc_volume(p, spec.bounds, mc);
            } else {
                mc.smoothing_width = 1e-2;
                v = smoothed_mc_volume(p, spec.bounds, mc);
            }
            c.volume[k] = v.value;
            c.mc_std[k] = v.std_error;
            break;
        }
        case VolumeMethod::Chebyshev: {
            const VolumeResult v = chebyshev_proxy(p);
            c.volume[k] = v.degenerate ? 0.0 : kappa * std::pow(v.value, static_cast<double>(p.dim()));
            break;
        }
        case VolumeMethod::Ellipsoid: {
            const VolumeResult v = ellipsoid_proxy(p);
            c.volume[k] = v.degenerate ? 0.0
                          : v.method == VolumeMethod::Chebyshev
                              ? kappa * std::pow(v.value, static_cast<double>(p.dim()))
                              : kappa * v.value;
            break;
        }
        }
    }
    return c;
}

inline GridSweepResult run_gridsweep(const GridSweepSpec& spec, int jobs = 1)
{
    const DynamicsModel model = dubins_model(spec.speed);
    GridSweepResult out;
    const std::size_t n = static_cast<std::size_t>(spec.nx) * static_cast<std::size_t>(spec.ny);
    for (const auto& chain : spec.chains) {
        const auto specs = grid_barriers(spec, model, chain.chain);
        std::vector<GridCell> cells(n);
        parallel_for(n, jobs, [&](std::size_t idx) {
            const int ix = static_cast<int>(idx % static_cast<std::size_t>(spec.nx));
            const int iy = static_cast<int>(idx / static_cast<std::size_t>(spec.nx));
            Vector x(3);
            x << grid_coord(spec.x_range, spec.nx, ix), grid_coord(spec.y_range, spec.ny, iy), spec.theta;
            // Seeds depend on the cell only, so chain variants share samples.
            cells[idx] = grid_cell(spec, model, specs, x, mix_seed(spec.seed + idx));
        });
        out.cells.push_back(std::move(cells));
    }
    return out;
}

struct GridCheck {
    int range_violations = 0;  // MC outside [0, interval length]
    int proxy_violations = 0;  // proxy above MC + 3 sigma
    int proxy_compared = 0;
    struct Monotonicity {
        std::string variant;
        std::string method;
        int compared = 0;
        int violations = 0;
        double worst_deficit = 0.0;
    };
    std::vector<Monotonicity> monotonicity;
};

/// Cellwise invariants. Each chain variant is compared against the first one
/// at cells where every psi^1 of the first chain is non-negative.
inline GridCheck check_gridsweep(const GridSweepSpec& spec, const GridSweepResult& res)
{
    GridCheck chk;
    const double length = spec.bounds.volume();
    const double k = static_cast<double>(spec.mc_samples);
    const auto mc_it = std::find(spec.methods.begin(), spec.methods.end(), VolumeMethod::MonteCarlo);
    const std::ptrdiff_t mc = mc_it == spec.methods.end() ? -1 : mc_it - spec.methods.begin();
    for (const auto& cells : res.cells) {
        for (const auto& c : cells) {
            if (mc < 0) break;
            const double v = c.volume[static_cast<std::size_t>(mc)];
            if (v < 0.0 || v > length + 1e-12) ++chk.range_violations;
            for (std::size_t m = 0; m < spec.methods.size(); ++m) {
                if (spec.methods[m] != VolumeMethod::Chebyshev && spec.methods[m] != VolumeMethod::Ellipsoid) continue;
                // Band evaluated at the proxy's own fraction: were the proxy the
                // true volume, MC would fall below it by more than 3 sigma rarely.
                const double p0 = std::clamp(c.volume[m] / length, 0.0, 1.0);
                const double sigma = length * std::sqrt(p0 * (1.0 - p0) / k);
                ++chk.proxy_compared;
                if (c.volume[m] > v + 3.0 * sigma + 1e-9) ++chk.proxy_violations;
            }
        }
    }
    for (std::size_t variant = 1; variant < res.cells.size(); ++variant) {
        for (std::size_t m = 0; m < spec.methods.size(); ++m) {
            GridCheck::Monotonicity mono{spec.chains[variant].name, std::string(to_string(spec.methods[m]))};
            const double tol = spec.methods[m] == VolumeMethod::MonteCarlo ? 0.0 : 1e-9;
            for (std::size_t idx = 0; idx < res.cells[0].size(); ++idx) {
                const GridCell& base = res.cells[0][idx];
                if (!base.compatible) continue;
                ++mono.compared;
                const double deficit = base.volume[m] - res.cells[variant][idx].volume[m];
                if (deficit > tol) {
                    ++mono.violations;
                    mono.worst_deficit = std::max(mono.worst_deficit, deficit);
                }
            }
            chk.monotonicity.push_back(mono);
        }
    }
    return chk;
}

inline std::string grid_matrix_csv(const GridSweepSpec& spec, const std::vector<GridCell>& cells,
                                   const std::function<double(const GridCell&)>& value)
{
    std::ostringstream os;
    for (int iy = 0; iy < spec.ny; ++iy) {
        for (int ix = 0; ix < spec.nx; ++ix) {
            if (ix > 0) os << ',';
            os << fmt_num(value(cells[static_cast<std::size_t>(iy) * spec.nx + ix]));
        }
        os << '\n';
    }
    return os.str();
}

/// One heatmap CSV per chain variant and method (row iy = 0 is the lowest y),
/// clipped-to-[0, 1] copies, compatibility masks and check.json.
inline int cmd_gridsweep(const fs::path& spec_path, const fs::path& out_dir, std::optional<int> jobs = {},
                         std::ostream& log = std::cout)
{
    const GridSweepSpec spec = load_gridsweep(spec_path);
    const GridSweepResult res = run_gridsweep(spec, worker_count(jobs));
    fs::create_directories(out_dir);
    for (std::size_t c = 0; c < spec.chains.size(); ++c) {
        const std::string prefix = spec.chains[c].name + "_";
        for (std::size_t m = 0; m < spec.methods.size(); ++m) {
            const std::string stem = prefix + std::string(to_string(spec.methods[m]));
            write_text(out_dir / (stem + ".csv"),
                       grid_matrix_csv(spec, res.cells[c], [m](const GridCell& g) { return g.volume[m]; }));
            write_text(out_dir / (stem + "_clipped.csv"), grid_matrix_csv(spec, res.cells[c], [m](const GridCell& g) {
                           return std::clamp(g.volume[m], 0.0, 1.0);
                       }));
        }
        write_text(out_dir / (prefix + "compatible.csv"),
                   grid_matrix_csv(spec, res.cells[c], [](const GridCell& g) { return g.compatible ? 1.0 : 0.0; }));
    }
    const GridCheck chk = check_gridsweep(spec, res);
    json j;
    j["cells"] = {spec.nx, spec.ny};
    j["x"] = {spec.x_range.first, spec.x_range.second};
    j["y"] = {spec.y_range.first, spec.y_range.second};
    j["theta"] = spec.theta;
    j["mc_samples"] = spec.mc_samples;
    j["range_violations"] = chk.range_violations;
    j["proxy_violations"] = chk.proxy_violations;
    j["proxy_compared"] = chk.proxy_compared;
    json mono = json::array();
    for (const auto& m : chk.monotonicity) {
        mono.push_back({{"variant", m.variant},
                        {"reference", spec.chains.front().name},
                        {"method", m.method},
                        {"compared_cells", m.compared},
                        {"violations", m.violations},
                        {"worst_deficit", m.worst_deficit}});
        log << "monotonicity " << m.variant << " vs " << spec.chains.front().name << " (" << m.method
            << "): " << m.violations << " violations over " << m.compared << " cells\n";
    }
    j["monotonicity"] = mono;
    write_text(out_dir / "check.json", j.dump(2) + "\n");
    // A per-cell 3 sigma band over thousands of cells flags a few cells by
    // chance, so proxy-above-MC counts are reported but do not fail the run.
    log << "range violations " << chk.range_violations << ", proxy above MC + 3 sigma " << chk.proxy_violations
        << " of " << chk.proxy_compared << " (statistical, not enforced)\n";
    bool ok = chk.range_violations == 0;
    for (const auto& m : chk.monotonicity) ok = ok && m.violations == 0;
    return ok ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------
// Volume-estimator cross-check on fixture polytopes.

struct VolumeFixture {
    std::string name;
    HPolytope polytope;
    Box box;
    std::optional<double> volume;
    std::optional<double> chebyshev_radius;
    std::optional<double> ellipsoid_det;
};

inline VolumeFixture fixture_from_json(const json& j, const std::string& fallback_name)
{
    detail::check_keys(j, {"name", "A", "b", "cols", "tags", "box", "expected"}, fallback_name);
    VolumeFixture f;
    f.name = j.value("name", fallback_name);
    try {
        f.polytope = polytope_from_json(j);
    } catch (const std::exception& e) {
        throw ConfigError(fallback_name + ": " + e.what());
    }
    const Eigen::Index m = f.polytope.dim();
    if (j.contains("box")) {
        const auto& b = j.at("box");
        f.box = Box{detail::vector_of(b.at("lower"), f.name + ".box.lower", m),
                    detail::vector_of(b.at("upper"), f.name + ".box.upper", m)};
    } else {
        try {
            f.box = f.polytope.input_box();
        } catch (const std::exception&) {
            throw ConfigError(f.name + ": needs a sampling box or input-bound rows");
        }
    }
    if (j.contains("expected")) {
        const auto& e = j.at("expected");
        detail::check_keys(e, {"volume", "chebyshev_radius", "ellipsoid_det"}, f.name + ".expected");
        if (e.contains("volume")) f.volume = detail::number(e.at("volume"), f.name + ".expected.volume");
        if (e.contains("chebyshev_radius"))
            f.chebyshev_radius = detail::number(e.at("chebyshev_radius"), f.name + ".expected.chebyshev_radius");
        if (e.contains("ellipsoid_det"))
            f.ellipsoid_det = detail::number(e.at("ellipsoid_det"), f.name + ".expected.ellipsoid_det");
    }
    return f;
}

inline std::vector<VolumeFixture> load_fixtures(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw ConfigError("fixture directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (ext == ".json" || ext == ".yaml" || ext == ".yml") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no fixtures in " + dir.string());
    std::vector<VolumeFixture> out;
    for (const auto& f : files) out.push_back(fixture_from_json(load_document(f), f.stem().string()));
    return out;
}

struct GradientStats {
    int compared = 0;
    int excluded = 0; // active-set change between the +/- evaluations
    double max_rel_error = 0.0;
};

/// Relative error |g - fd| / max(1, |fd|) over every entry of (A, b).
inline GradientStats gradient_agreement(const HPolytope& p, VolumeMethod method, double step = 1e-6)
{
    GradientStats s;
    const VolumeResult v = volume_proxy(p, method);
    if (v.degenerate || v.method != method) return s;
    const FdGradient fd = proxy_gradient_fd(p, method, step);
    if (fd.active_set_changed) {
        s.excluded = 1;
        return s;
    }
    s.compared = 1;
    const double scale = std::max(1.0, std::max(fd.grad_A.cwiseAbs().maxCoeff(), fd.grad_b.cwiseAbs().maxCoeff()));
    s.max_rel_error = std::max((v.grad_A - fd.grad_A).cwiseAbs().maxCoeff(),
                               (v.grad_b - fd.grad_b).cwiseAbs().maxCoeff()) / scale;
    return s;
}

template <typename F>
double median_seconds(int calls, F&& f)
{
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(calls));
    for (int i = 0; i < calls; ++i) {
        const auto a = std::chrono::steady_clock::now();
        f();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
}

struct FixtureReport {
    std::string name;
    double mc = 0.0, mc_sigma = 0.0, smoothed = 0.0, ball_volume = 0.0, ellipsoid_volume = 0.0;
    double chebyshev_radius = 0.0, ellipsoid_det = 0.0;
    GradientStats grad_cheb, grad_ell;
    double t_mc = 0.0, t_smoothed = 0.0, t_cheb = 0.0, t_ell = 0.0;
    std::vector<std::string> violations;
};

struct VolcheckOptions {
    int mc_samples = 100000;
    double smoothing_width = 1e-2;
    int timing_calls = 100;
    std::uint64_t seed = 0;
    double gradient_tol = 1e-3;
};

inline FixtureReport check_fixture(const VolumeFixture& f, const VolcheckOptions& opts)
{
    FixtureReport r;
    r.name = f.name;
    const HPolytope& p = f.polytope;
    const double kappa = unit_ball_volume(p.dim());
    const McConfig mc{opts.mc_samples, opts.seed, 0.0};
    McConfig smc = mc;
    smc.smoothing_width = opts.smoothing_width;
    const VolumeResult vmc = mc_volume(p, f.box, mc);
    const VolumeResult vsm = smoothed_mc_volume(p, f.box, smc);
    const VolumeResult vch = chebyshev_proxy(p);
    const VolumeResult vel = ellipsoid_proxy(p);
    r.mc = vmc.value;
    r.mc_sigma = vmc.std_error;
    r.smoothed = vsm.value;
    r.chebyshev_radius = vch.degenerate ? 0.0 : vch.value;
    r.ball_volume = kappa * std::pow(r.chebyshev_radius, static_cast<double>(p.dim()));
    r.ellipsoid_det = vel.method == VolumeMethod::Ellipsoid ? vel.value : 0.0;
    r.ellipsoid_volume = vel.method == VolumeMethod::Ellipsoid ? kappa * vel.value : r.ball_volume;

    auto fail = [&r](const std::string& what) { r.violations.push_back(what); };
    if (r.smoothed > r.mc) fail("smoothed MC exceeds MC");
    if (r.ball_volume > r.ellipsoid_volume * (1.0 + 1e-9) + 1e-12) fail("ball volume exceeds ellipsoid volume");
    if (r.ellipsoid_volume > r.mc + 3.0 * r.mc_sigma + 1e-12) fail("ellipsoid volume exceeds MC + 3 sigma");
    if (f.volume) {
        const double frac = std::clamp(*f.volume / f.box.volume(), 0.0, 1.0);
        const double sigma = f.box.volume() * std::sqrt(frac * (1.0 - frac) / opts.mc_samples);
        if (std::abs(r.mc - *f.volume) > 3.0 * sigma + 1e-12) fail("MC outside 3 sigma of the expected volume");
    }
    if (f.chebyshev_radius && std::abs(r.chebyshev_radius - *f.chebyshev_radius) > 1e-6) {
        fail("Chebyshev radius differs from expected");
    }
    if (f.ellipsoid_det && std::abs(r.ellipsoid_det - *f.ellipsoid_det) > 1e-6 * std::max(1.0, *f.ellipsoid_det)) {
        fail("ellipsoid det B differs from expected");
    }
    r.grad_cheb = gradient_agreement(p, VolumeMethod::Chebyshev);
    r.grad_ell = gradient_agreement(p, VolumeMethod::Ellipsoid);
    if (r.grad_cheb.max_rel_error > opts.gradient_tol) fail("Chebyshev gradient disagrees with finite differences");
    if (r.grad_ell.max_rel_error > opts.gradient_tol) fail("ellipsoid gradient disagrees with finite differences");

    const int calls = opts.timing_calls;
    r.t_mc = median_seconds(calls, [&] { (void)mc_volume(p, f.box, mc); });
    r.t_smoothed = median_seconds(calls, [&] { (void)smoothed_mc_volume(p, f.box, smc); });
    r.t_cheb = median_seconds(calls, [&] { (void)chebyshev_proxy(p); });
    r.t_ell = median_seconds(calls, [&] { (void)ellipsoid_proxy(p); });
    return r;
}

inline int cmd_volcheck(const fs::path& dir, const VolcheckOptions& opts = {}, std::ostream& log = std::cout)
{
    const auto fixtures = load_fixtures(dir);
    bool ok = true;
    for (const auto& f : fixtures) {
        const FixtureReport r = check_fixture(f, opts);
        log << r.name << '\n'
            << "  mc          " << fmt_num(r.mc) << " (sigma " << fmt_num(r.mc_sigma) << ")\n"
            << "  smoothed_mc " << fmt_num(r.smoothed) << '\n'
            << "  chebyshev   r = " << fmt_num(r.chebyshev_radius) << ", ball volume " << fmt_num(r.ball_volume) << '\n'
            << "  ellipsoid   det B = " << fmt_num(r.ellipsoid_det) << ", volume " << fmt_num(r.ellipsoid_volume)
            << '\n'
            << "  chain       ball <= ellipsoid <= mc + 3 sigma, smoothed <= mc: "
            << (r.violations.empty() ? "ok" : "see below") << '\n'
            << "  gradients   chebyshev max rel err " << fmt_num(r.grad_cheb.max_rel_error)
            << (r.grad_cheb.excluded ? " (excluded: active-set change)" : "") << ", ellipsoid "
            << fmt_num(r.grad_ell.max_rel_error) << (r.grad_ell.excluded ? " (excluded: active-set change)" : "")
            << '\n'
            << "  median ms   mc " << fmt_num(1e3 * r.t_mc) << ", smoothed " << fmt_num(1e3 * r.t_smoothed)
            << ", chebyshev " << fmt_num(1e3 * r.t_cheb) << ", ellipsoid " << fmt_num(1e3 * r.t_ell) << '\n';
        for (const auto& v : r.violations) {
            log << "  VIOLATION   " << v << '\n';
            ok = false;
        }
    }
    return ok ? kExitOk : kExitInvariant;
}

} // namespace fscbf

#endif // FSCBF_EXPERIMENTS_HPP
