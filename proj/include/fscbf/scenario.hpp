#ifndef FSCBF_SCENARIO_HPP
#define FSCBF_SCENARIO_HPP

// Closed-loop simulation: reference controller -> safety filter -> Euler step
// of the robot, with pedestrians advanced by the social force model.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fscbf/barrier.hpp"
#include "fscbf/controller.hpp"
#include "fscbf/dynamics.hpp"
#include "fscbf/grid.hpp"
#include "fscbf/humans.hpp"
#include "fscbf/reference.hpp"

namespace fscbf {

enum class ControllerKind { CbfQp, FsCbfQp };

inline std::string_view to_string(ControllerKind k) { return k == ControllerKind::CbfQp ? "cbf_qp" : "fs_cbf_qp"; }

struct CircleObstacle {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double radius = 0.5; // d_min of the barrier
    Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

struct GridSource {
    OccupancyGrid grid;
    GridRayOptions rays;
};

struct ScenarioConfig {
    std::string model = "unicycle";
    double dubins_speed = 1.0;
    Vector initial_state;
    Eigen::Vector2d goal = Eigen::Vector2d::Zero();
    double goal_tolerance = 0.1;
    ControllerGains gains;
    std::vector<CircleObstacle> obstacles;
    std::optional<GridSource> grid;
    std::vector<HumanAgent> humans;
    bool robot_is_social_agent = true;
    double robot_radius = 0.3;
    double human_safety_radius = 0.6;
    ClassKChain obstacle_chain{2.0, 6.0};
    ClassKChain human_chain{2.0, 6.0};
    std::optional<Box> input_bounds; // model default when absent
    double dt = 0.01;
    double horizon = 7.0;
    ControllerKind controller = ControllerKind::FsCbfQp;
    FsCbfParams fs;
    std::uint64_t seed = 0;
    bool trace_volume = true;   // evaluate the proxy on CBF-QP runs too
    bool shadow_cbf_qp = false; // also solve CBF-QP at every FS-CBF-QP state
    int snapshot_stride = 0;    // 0 disables polytope snapshots

    bool valid() const { return dt > 0.0 && horizon >= dt; }
};

struct SimState {
    double t = 0.0;
    int step = 0;
    Vector x;
    std::vector<HumanAgent> humans;
    ControllerSession session;
};

struct SimTraceRow {
    double t = 0.0;
    Vector x;
    Vector u_ref;
    Vector u;
    double delta = 0.0;
    double V = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> h;  // obstacles then humans
    double h_grid_min = std::numeric_limits<double>::quiet_NaN();
    DecisionStatus status = DecisionStatus::Ok;
    double boundary_margin = std::numeric_limits<double>::infinity();
    bool fs_row_dropped = false;
    bool u_ref_feasible = true;
    double shadow_margin = std::numeric_limits<double>::quiet_NaN();
    int rows = 0;
};

struct PolytopeSnapshot {
    int step = 0;
    double t = 0.0;
    HPolytope polytope;
    Vector u;
    Vector u_ref;
};

struct SimSummary {
    bool reached_goal = false;
    std::optional<double> first_infeasible_time;
    double min_h = std::numeric_limits<double>::infinity();
    double runtime_s = 0.0;
    int steps = 0;
    double horizon = 0.0;

    double time_to_infeasibility() const { return first_infeasible_time.value_or(horizon); }
};

struct SimResult {
    std::vector<SimTraceRow> trace;
    std::vector<PolytopeSnapshot> snapshots;
    SimSummary summary;
};

inline DynamicsModel scenario_model(const ScenarioConfig& cfg) { return model_from_name(cfg.model, cfg.dubins_speed); }

inline Box scenario_bounds(const ScenarioConfig& cfg, const DynamicsModel& model)
{
    return cfg.input_bounds.value_or(model.default_bounds);
}

inline int barrier_degree(const DynamicsModel& model) { return model.name == "single_integrator" ? 1 : 2; }

inline ClassKChain chain_for_degree(const ClassKChain& chain, int degree)
{
    std::vector<double> g(chain.gains.begin(),
                          chain.gains.begin() + std::min<std::ptrdiff_t>(degree, std::ssize(chain.gains)));
    return ClassKChain(std::move(g));
}

/// Barriers at the current state: obstacles, humans, then grid rays.
inline std::vector<BarrierSpec> scenario_barriers(const ScenarioConfig& cfg, const DynamicsModel& model,
                                                  const SimState& state, std::size_t* n_fixed = nullptr)
{
    const int degree = barrier_degree(model);
    std::vector<BarrierSpec> specs;
    for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
        const auto& o = cfg.obstacles[i];
        specs.push_back(circle_barrier(model, o.center, o.radius, degree, chain_for_degree(cfg.obstacle_chain, degree),
                                       o.velocity, 0.0, "obstacle" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < state.humans.size(); ++i) {
        const auto& hmn = state.humans[i];
        specs.push_back(circle_barrier(model, hmn.position, cfg.human_safety_radius, degree,
                                       chain_for_degree(cfg.human_chain, degree), hmn.velocity, state.t,
                                       "human" + std::to_string(i)));
    }
    if (n_fixed != nullptr) *n_fixed = specs.size();
    if (cfg.grid) {
        auto rays = grid_ray_barriers(cfg.grid->grid, model, state.x, cfg.grid->rays);
        for (auto& r : rays) specs.push_back(std::move(r));
    }
    return specs;
}

inline Vector scenario_reference(const ScenarioConfig& cfg, const DynamicsModel& model, const Box& bounds,
                                 const Vector& x)
{
    if (model.name == "unicycle") return unicycle_reference(x, cfg.goal, cfg.gains, bounds);
    if (model.name == "dubins") return dubins_reference(x, cfg.goal, cfg.gains, bounds);
    return single_integrator_reference(x, cfg.goal, cfg.gains, bounds);
}

inline SimState initial_sim_state(const ScenarioConfig& cfg)
{
    SimState s;
    s.x = cfg.initial_state;
    s.humans = cfg.humans;
    return s;
}

/// One closed-loop step. On an infeasible QP the state is left unchanged and
/// the returned row carries status Infeasible.
inline SimTraceRow run_step(const ScenarioConfig& cfg, const DynamicsModel& model, SimState& state,
                            std::optional<PolytopeSnapshot>* snapshot = nullptr)
{
    const Box bounds = scenario_bounds(cfg, model);
    std::size_t n_fixed = 0;
    const auto specs = scenario_barriers(cfg, model, state, &n_fixed);

    SimTraceRow row;
    row.t = state.t;
    row.x = state.x;
    row.u_ref = scenario_reference(cfg, model, bounds, state.x);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const double h = specs[i].eval(state.t, state.x).h;
        if (i < n_fixed) row.h.push_back(h);
        else row.h_grid_min = std::isnan(row.h_grid_min) ? h : std::min(row.h_grid_min, h);
    }

    ControlDecision decision;
    if (cfg.controller == ControllerKind::FsCbfQp) {
        decision = fs_cbf_qp_control(row.u_ref, specs, bounds, model, cfg.fs, state.t, state.x, &state.session);
        if (cfg.shadow_cbf_qp) {
            const ControlDecision shadow = cbf_qp_control(row.u_ref, decision.polytope);
            if (shadow.status == DecisionStatus::Ok) row.shadow_margin = shadow.boundary_margin;
        }
    } else {
        const HPolytope p = assemble_polytope(specs, bounds, model, state.t, state.x);
        decision = cbf_qp_control(row.u_ref, p);
        if (cfg.trace_volume) {
            const EllipsoidResult* warm = state.session.ellipsoid_warm ? &*state.session.ellipsoid_warm : nullptr;
            VolumeResult v = volume_proxy(p, cfg.fs.volume_method, warm);
            if (v.value < cfg.fs.epsilon_floor) {
                v.value = 0.0;
                v.degenerate = true;
            }
            decision.volume = v;
        }
    }
    row.u_ref_feasible = decision.polytope.contains(row.u_ref, 1e-9);
    row.rows = static_cast<int>(decision.polytope.rows());
    row.status = decision.status;
    row.fs_row_dropped = decision.fs_row_dropped;
    if (decision.volume) row.V = decision.volume->value;
    if (snapshot != nullptr) {
        snapshot->emplace(PolytopeSnapshot{state.step, state.t, decision.polytope, decision.u, row.u_ref});
    }
    if (decision.status != DecisionStatus::Ok) {
        row.u = Vector::Zero(model.control_dim);
        return row;
    }
    row.u = decision.u;
    row.delta = decision.delta;
    row.boundary_margin = decision.boundary_margin;

    const Eigen::Vector2d robot_pos = model.position(state.x);
    std::optional<SocialObstacle> robot;
    if (cfg.robot_is_social_agent) robot = SocialObstacle{robot_pos, cfg.robot_radius};
    if (!state.humans.empty()) state.humans = social_force_step(state.humans, robot, cfg.dt);
    state.x = step_euler(model, state.x, decision.u, cfg.dt);
    state.t += cfg.dt;
    ++state.step;
    return row;
}

/// Runs until the horizon or the first infeasible step.
inline SimResult run_simulation(const ScenarioConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    const DynamicsModel model = scenario_model(cfg);
    if (cfg.initial_state.size() != model.state_dim) {
        throw std::invalid_argument("initial_state has the wrong dimension for model " + model.name);
    }
    SimResult result;
    result.summary.horizon = cfg.horizon;
    SimState state = initial_sim_state(cfg);
    const int n_steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
    for (int k = 0; k < n_steps; ++k) {
        std::optional<PolytopeSnapshot> snap;
        const bool want_snap = cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0;
        SimTraceRow row = run_step(cfg, model, state, want_snap ? &snap : nullptr);
        if (snap) result.snapshots.push_back(std::move(*snap));
        if ((model.position(row.x) - cfg.goal).norm() <= cfg.goal_tolerance) result.summary.reached_goal = true;
        const bool ok = row.status == DecisionStatus::Ok;
        if (ok) {
            for (const double h : row.h) result.summary.min_h = std::min(result.summary.min_h, h);
            if (!std::isnan(row.h_grid_min)) result.summary.min_h = std::min(result.summary.min_h, row.h_grid_min);
        }
        result.trace.push_back(std::move(row));
        if (!ok) {
            result.summary.first_infeasible_time = state.t;
            break;
        }
    }
    if (result.summary.reached_goal == false && (model.position(state.x) - cfg.goal).norm() <= cfg.goal_tolerance) {
        result.summary.reached_goal = true;
    }
    result.summary.steps = static_cast<int>(result.trace.size());
    result.summary.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace fscbf

#endif // FSCBF_SCENARIO_HPP
