#ifndef FSCBF_CONFIG_HPP
#define FSCBF_CONFIG_HPP

// Scenario, sweep and grid-sweep configuration files. YAML and JSON are both
// accepted; YAML documents are converted to JSON and share one reader.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "fscbf/scenario.hpp"

namespace fscbf {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline json yaml_scalar(const YAML::Node& n)
{
    const std::string& s = n.Scalar();
    if (n.Tag() == "!") return s; // quoted
    if (s == "true" || s == "True" || s == "yes") return true;
    if (s == "false" || s == "False" || s == "no") return false;
    if (s == "null" || s == "~" || s.empty()) return nullptr;
    std::size_t pos = 0;
    try {
        const long long i = std::stoll(s, &pos);
        if (pos == s.size()) return i;
    } catch (const std::exception&) {
    }
    try {
        const double d = std::stod(s, &pos);
        if (pos == s.size()) return d;
    } catch (const std::exception&) {
    }
    return s;
}

inline json yaml_to_json(const YAML::Node& n)
{
    switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Scalar:
        return yaml_scalar(n);
    case YAML::NodeType::Sequence: {
        json arr = json::array();
        for (const auto& item : n) arr.push_back(yaml_to_json(item));
        return arr;
    }
    case YAML::NodeType::Map: {
        json obj = json::object();
        for (const auto& kv : n) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        return obj;
    }
    }
    return nullptr;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + ": expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline double number(const json& j, const std::string& where)
{
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": not finite");
    return v;
}

inline double number_or(const json& j, const char* key, double fallback, const std::string& where)
{
    return j.contains(key) ? number(j.at(key), where + "." + key) : fallback;
}

inline bool flag_or(const json& j, const char* key, bool fallback, const std::string& where)
{
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true/false");
    return j.at(key).get<bool>();
}

inline std::vector<double> numbers(const json& j, const std::string& where)
{
    if (!j.is_array()) throw ConfigError(where + ": expected a list");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j.at(i), where + "[" + std::to_string(i) + "]"));
    return out;
}

inline Vector vector_of(const json& j, const std::string& where, Eigen::Index expected = -1)
{
    const auto v = numbers(j, where);
    if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected) {
        throw ConfigError(where + ": expected " + std::to_string(expected) + " entries");
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::Vector2d point(const json& j, const std::string& where) { return vector_of(j, where, 2); }

inline std::pair<double, double> range(const json& j, const std::string& where)
{
    const auto v = numbers(j, where);
    if (v.size() != 2) throw ConfigError(where + ": expected [lower, upper]");
    if (v[0] > v[1]) throw ConfigError(where + ": lower bound exceeds upper bound");
    return {v[0], v[1]};
}

inline ClassKChain chain_of(const json& j, const std::string& where)
{
    ClassKChain c(numbers(j, where));
    if (!c.valid()) throw ConfigError(where + ": chain gains must be positive");
    return c;
}

inline std::uint64_t seed_of(const json& j, const std::string& where)
{
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(where + ": expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline int positive_int(const json& j, const std::string& where)
{
    if (!j.is_number_integer() || j.get<long long>() < 1) throw ConfigError(where + ": expected a positive integer");
    return j.get<int>();
}

inline ControllerKind controller_of(const json& j, const std::string& where)
{
    const std::string s = j.is_string() ? j.get<std::string>() : "";
    if (s == "cbf_qp") return ControllerKind::CbfQp;
    if (s == "fs_cbf_qp") return ControllerKind::FsCbfQp;
    throw ConfigError(where + ": expected cbf_qp or fs_cbf_qp");
}

inline VolumeMethod method_of(const json& j, const std::string& where)
{
    try {
        return volume_method_from_string(j.get<std::string>());
    } catch (const std::exception&) {
        throw ConfigError(where + ": unknown volume method");
    }
}

} // namespace detail

/// Parses a file as YAML or JSON (by extension; JSON for .json).
inline json load_document(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        if (path.extension() == ".json") return json::parse(ss.str());
        return detail::yaml_to_json(YAML::Load(ss.str()));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline FsCbfParams fs_params_from_json(const json& j, const std::string& where = "fs")
{
    detail::check_keys(j, {"alpha_V", "M", "epsilon_floor", "volume_method", "time_fd_step", "state_fd_step"}, where);
    FsCbfParams p;
    p.alpha_V = detail::number_or(j, "alpha_V", p.alpha_V, where);
    p.M = detail::number_or(j, "M", p.M, where);
    p.epsilon_floor = detail::number_or(j, "epsilon_floor", p.epsilon_floor, where);
    p.time_fd_step = detail::number_or(j, "time_fd_step", p.time_fd_step, where);
    p.state_fd_step = detail::number_or(j, "state_fd_step", p.state_fd_step, where);
    if (j.contains("volume_method")) p.volume_method = detail::method_of(j.at("volume_method"), where + ".volume_method");
    if (!p.valid()) throw ConfigError(where + ": invalid parameters (volume_method must be chebyshev or ellipsoid)");
    return p;
}

inline HumanAgent human_from_json(const json& j, const std::string& where)
{
    detail::check_keys(j, {"position", "velocity", "goal", "desired_speed", "sfm"}, where);
    HumanAgent h;
    h.position = detail::point(j.at("position"), where + ".position");
    if (j.contains("velocity")) h.velocity = detail::point(j.at("velocity"), where + ".velocity");
    h.goal = detail::point(j.at("goal"), where + ".goal");
    h.desired_speed = detail::number_or(j, "desired_speed", h.desired_speed, where);
    if (j.contains("sfm")) {
        const auto& s = j.at("sfm");
        detail::check_keys(s, {"tau", "strength", "range", "radius"}, where + ".sfm");
        h.sfm.tau = detail::number_or(s, "tau", h.sfm.tau, where + ".sfm");
        h.sfm.strength = detail::number_or(s, "strength", h.sfm.strength, where + ".sfm");
        h.sfm.range = detail::number_or(s, "range", h.sfm.range, where + ".sfm");
        h.sfm.radius = detail::number_or(s, "radius", h.sfm.radius, where + ".sfm");
    }
    if (!h.valid()) throw ConfigError(where + ": desired_speed, tau and range must be positive");
    return h;
}

inline GridRayOptions rays_from_json(const json& j, const std::string& where)
{
    detail::check_keys(j, {"n_dirs", "d_min", "max_range", "chain"}, where);
    GridRayOptions r;
    if (j.contains("n_dirs")) r.n_dirs = detail::positive_int(j.at("n_dirs"), where + ".n_dirs");
    r.d_min = detail::number_or(j, "d_min", r.d_min, where);
    r.max_range = detail::number_or(j, "max_range", r.max_range, where);
    if (j.contains("chain")) r.chain = detail::chain_of(j.at("chain"), where + ".chain");
    return r;
}

/// `base_dir` resolves relative map paths.
inline GridSource grid_from_config(const json& j, const std::filesystem::path& base_dir, const std::string& where)
{
    detail::check_keys(j, {"pgm", "json", "resolution", "origin", "threshold", "cells", "rays"}, where);
    GridSource src;
    const double res = detail::number_or(j, "resolution", 0.05, where);
    const Eigen::Vector2d origin = j.contains("origin") ? detail::point(j.at("origin"), where + ".origin")
                                                        : Eigen::Vector2d::Zero();
    try {
        if (j.contains("pgm")) {
            const int threshold = static_cast<int>(detail::number_or(j, "threshold", 128, where));
            src.grid = load_pgm((base_dir / j.at("pgm").get<std::string>()).string(), res, origin, threshold);
        } else if (j.contains("json")) {
            json g = load_document(base_dir / j.at("json").get<std::string>());
            src.grid = grid_from_json(g);
        } else if (j.contains("cells")) {
            json g = {{"resolution", res}, {"origin", {origin.x(), origin.y()}}, {"cells", j.at("cells")}};
            src.grid = grid_from_json(g);
        } else {
            throw ConfigError(where + ": need one of pgm, json or cells");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (j.contains("rays")) src.rays = rays_from_json(j.at("rays"), where + ".rays");
    return src;
}

inline ScenarioConfig scenario_from_json(const json& j, const std::filesystem::path& base_dir = ".")
{
    using namespace detail;
    const std::string w = "scenario";
    check_keys(j,
               {"model", "dubins_speed", "initial_state", "goal", "goal_tolerance", "gains", "obstacles", "grid",
                "humans", "robot_is_social_agent", "robot_radius", "human_safety_radius", "obstacle_chain",
                "human_chain", "input_bounds", "dt", "horizon", "controller", "fs", "seed", "trace_volume",
                "shadow_cbf_qp", "snapshot_stride"},
               w);
    ScenarioConfig c;
    if (j.contains("model")) c.model = j.at("model").get<std::string>();
    c.dubins_speed = number_or(j, "dubins_speed", c.dubins_speed, w);
    DynamicsModel model;
    try {
        model = scenario_model(c);
    } catch (const std::exception& e) {
        throw ConfigError(w + ".model: " + e.what());
    }
    if (!j.contains("initial_state")) throw ConfigError(w + ": initial_state is required");
    c.initial_state = vector_of(j.at("initial_state"), w + ".initial_state", model.state_dim);
    if (j.contains("goal")) c.goal = point(j.at("goal"), w + ".goal");
    c.goal_tolerance = number_or(j, "goal_tolerance", c.goal_tolerance, w);
    if (j.contains("gains")) {
        const auto& g = j.at("gains");
        check_keys(g, {"k_omega", "k_x", "k_v"}, w + ".gains");
        c.gains.k_omega = number_or(g, "k_omega", c.gains.k_omega, w + ".gains");
        c.gains.k_x = number_or(g, "k_x", c.gains.k_x, w + ".gains");
        c.gains.k_v = number_or(g, "k_v", c.gains.k_v, w + ".gains");
        if (!c.gains.valid()) throw ConfigError(w + ".gains: gains must be positive");
    }
    if (j.contains("obstacles")) {
        for (std::size_t i = 0; i < j.at("obstacles").size(); ++i) {
            const auto& o = j.at("obstacles").at(i);
            const std::string wo = w + ".obstacles[" + std::to_string(i) + "]";
            check_keys(o, {"center", "radius", "velocity"}, wo);
            CircleObstacle ob;
            ob.center = point(o.at("center"), wo + ".center");
            ob.radius = number_or(o, "radius", ob.radius, wo);
            if (o.contains("velocity")) ob.velocity = point(o.at("velocity"), wo + ".velocity");
            if (!(ob.radius > 0.0)) throw ConfigError(wo + ": radius must be positive");
            c.obstacles.push_back(ob);
        }
    }
    if (j.contains("grid")) c.grid = grid_from_config(j.at("grid"), base_dir, w + ".grid");
    if (j.contains("humans")) {
        for (std::size_t i = 0; i < j.at("humans").size(); ++i) {
            c.humans.push_back(human_from_json(j.at("humans").at(i), w + ".humans[" + std::to_string(i) + "]"));
        }
    }
    c.robot_is_social_agent = flag_or(j, "robot_is_social_agent", c.robot_is_social_agent, w);
    c.robot_radius = number_or(j, "robot_radius", c.robot_radius, w);
    c.human_safety_radius = number_or(j, "human_safety_radius", c.human_safety_radius, w);
    if (j.contains("obstacle_chain")) c.obstacle_chain = chain_of(j.at("obstacle_chain"), w + ".obstacle_chain");
    if (j.contains("human_chain")) c.human_chain = chain_of(j.at("human_chain"), w + ".human_chain");
    const int degree = barrier_degree(model);
    if (c.obstacle_chain.size() < static_cast<std::size_t>(degree) ||
        c.human_chain.size() < static_cast<std::size_t>(degree)) {
        throw ConfigError(w + ": chains need one gain per barrier derivative order");
    }
    if (j.contains("input_bounds")) {
        const auto& b = j.at("input_bounds");
        check_keys(b, {"lower", "upper"}, w + ".input_bounds");
        Box box{vector_of(b.at("lower"), w + ".input_bounds.lower", model.control_dim),
                vector_of(b.at("upper"), w + ".input_bounds.upper", model.control_dim)};
        if (!((box.upper - box.lower).array() > 0.0).all()) {
            throw ConfigError(w + ".input_bounds: lower must be below upper");
        }
        c.input_bounds = box;
    }
    c.dt = number_or(j, "dt", c.dt, w);
    c.horizon = number_or(j, "horizon", c.horizon, w);
    if (j.contains("controller")) c.controller = controller_of(j.at("controller"), w + ".controller");
    if (j.contains("fs")) c.fs = fs_params_from_json(j.at("fs"), w + ".fs");
    if (j.contains("seed")) c.seed = seed_of(j.at("seed"), w + ".seed");
    c.trace_volume = flag_or(j, "trace_volume", c.trace_volume, w);
    c.shadow_cbf_qp = flag_or(j, "shadow_cbf_qp", c.shadow_cbf_qp, w);
    if (j.contains("snapshot_stride")) {
        if (!j.at("snapshot_stride").is_number_integer() || j.at("snapshot_stride").get<int>() < 0) {
            throw ConfigError(w + ".snapshot_stride: expected a non-negative integer");
        }
        c.snapshot_stride = j.at("snapshot_stride").get<int>();
    }
    if (!c.valid()) throw ConfigError(w + ": dt must be positive and horizon >= dt");
    return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    return scenario_from_json(load_document(path), path.parent_path());
}

struct UniformRange {
    double lower = 0.0;
    double upper = 0.0;

    double sample(std::mt19937_64& rng) const { return uniform_in(rng, lower, upper); }
};

struct SweepVariant {
    ControllerKind controller = ControllerKind::CbfQp;
    double alpha_V = 0.0; // FS-CBF-QP only

    std::string name() const
    {
        if (controller == ControllerKind::CbfQp) return "cbf_qp";
        std::ostringstream os;
        os << "fs_cbf_qp@" << alpha_V;
        return os.str();
    }
};

struct SweepSpec {
    ScenarioConfig scenario;
    json scenario_echo;
    int samples = 1;
    std::uint64_t seed = 0;
    UniformRange p_x, p_y, v, k_x, k_v;
    bool face_goal = true; // initial heading points at the goal
    std::vector<ControllerKind> controllers{ControllerKind::CbfQp, ControllerKind::FsCbfQp};
    std::vector<double> alpha_V{1.0};

    std::vector<SweepVariant> variants() const
    {
        std::vector<SweepVariant> out;
        for (const auto c : controllers) {
            if (c == ControllerKind::CbfQp) out.push_back({c, 0.0});
            else
                for (const double a : alpha_V) out.push_back({c, a});
        }
        return out;
    }
};

inline SweepSpec sweep_from_json(const json& j, const std::filesystem::path& base_dir = ".")
{
    using namespace detail;
    const std::string w = "sweep";
    check_keys(j, {"scenario", "scenario_file", "samples", "seed", "ranges", "face_goal", "controllers", "alpha_V"}, w);
    SweepSpec s;
    if (j.contains("scenario") == j.contains("scenario_file")) {
        throw ConfigError(w + ": give exactly one of scenario or scenario_file");
    }
    s.scenario_echo = j.contains("scenario") ? j.at("scenario")
                                             : load_document(base_dir / j.at("scenario_file").get<std::string>());
    const auto scenario_dir =
        j.contains("scenario_file") ? (base_dir / j.at("scenario_file").get<std::string>()).parent_path() : base_dir;
    s.scenario = scenario_from_json(s.scenario_echo, scenario_dir);
    if (s.scenario.model != "unicycle") throw ConfigError(w + ": sweeps perturb the unicycle state (p_x, p_y, v)");
    if (j.contains("samples")) s.samples = positive_int(j.at("samples"), w + ".samples");
    if (j.contains("seed")) s.seed = seed_of(j.at("seed"), w + ".seed");
    const Vector& x0 = s.scenario.initial_state;
    s.p_x = {x0(0), x0(0)};
    s.p_y = {x0(1), x0(1)};
    s.v = {x0(2), x0(2)};
    s.k_x = {s.scenario.gains.k_x, s.scenario.gains.k_x};
    s.k_v = {s.scenario.gains.k_v, s.scenario.gains.k_v};
    if (j.contains("ranges")) {
        const auto& r = j.at("ranges");
        check_keys(r, {"p_x", "p_y", "v", "k_x", "k_p", "k_v"}, w + ".ranges");
        auto read = [&](const char* key, UniformRange& dst) {
            if (!r.contains(key)) return;
            const auto [lo, hi] = range(r.at(key), w + ".ranges." + key);
            dst = {lo, hi};
        };
        read("p_x", s.p_x);
        read("p_y", s.p_y);
        read("v", s.v);
        read("k_x", s.k_x);
        read("k_p", s.k_x);
        read("k_v", s.k_v);
        if (!(s.k_x.lower > 0.0 && s.k_v.lower > 0.0)) throw ConfigError(w + ".ranges: gains must be positive");
    }
    s.face_goal = flag_or(j, "face_goal", s.face_goal, w);
    if (j.contains("controllers")) {
        s.controllers.clear();
        for (std::size_t i = 0; i < j.at("controllers").size(); ++i) {
            s.controllers.push_back(controller_of(j.at("controllers").at(i), w + ".controllers"));
        }
        if (s.controllers.empty()) throw ConfigError(w + ".controllers: empty");
    }
    if (j.contains("alpha_V")) {
        s.alpha_V = numbers(j.at("alpha_V"), w + ".alpha_V");
        if (s.alpha_V.empty()) throw ConfigError(w + ".alpha_V: empty");
        for (const double a : s.alpha_V)
            if (!(a > 0.0)) throw ConfigError(w + ".alpha_V: values must be positive");
    }
    return s;
}

inline SweepSpec load_sweep(const std::filesystem::path& path)
{
    return sweep_from_json(load_document(path), path.parent_path());
}

struct ChainVariant {
    std::string name;
    ClassKChain chain;
};

struct GridSweepSpec {
    std::pair<double, double> x_range{0.0, 6.0};
    std::pair<double, double> y_range{0.0, 6.0};
    int nx = 60;
    int ny = 60;
    double theta = std::numbers::pi / 4.0;
    double speed = 1.0;
    std::vector<CircleObstacle> obstacles;
    Box bounds{Vector::Constant(1, -0.5), Vector::Constant(1, 0.5)};
    std::vector<VolumeMethod> methods{VolumeMethod::MonteCarlo, VolumeMethod::Chebyshev, VolumeMethod::Ellipsoid};
    // The first entry is the reference for the monotonicity comparison.
    std::vector<ChainVariant> chains{{"base", ClassKChain{1.0, 2.0}}, {"x2", ClassKChain{2.0, 4.0}}};
    int mc_samples = 100;
    std::uint64_t seed = 0;
};

inline GridSweepSpec gridsweep_from_json(const json& j)
{
    using namespace detail;
    const std::string w = "gridsweep";
    check_keys(j,
               {"x_range", "y_range", "cells", "theta_deg", "speed", "obstacles", "input_bounds", "methods", "chains",
                "mc_samples", "seed"},
               w);
    GridSweepSpec s;
    if (j.contains("x_range")) s.x_range = range(j.at("x_range"), w + ".x_range");
    if (j.contains("y_range")) s.y_range = range(j.at("y_range"), w + ".y_range");
    if (j.contains("cells")) {
        const auto& c = j.at("cells");
        if (!c.is_array() || c.size() != 2) throw ConfigError(w + ".cells: expected [nx, ny]");
        s.nx = positive_int(c.at(0), w + ".cells");
        s.ny = positive_int(c.at(1), w + ".cells");
    }
    if (s.nx < 2 || s.ny < 2) throw ConfigError(w + ".cells: need at least 2 cells per axis");
    if (j.contains("theta_deg")) s.theta = number(j.at("theta_deg"), w + ".theta_deg") * std::numbers::pi / 180.0;
    s.speed = number_or(j, "speed", s.speed, w);
    if (!(s.speed > 0.0)) throw ConfigError(w + ".speed: must be positive");
    if (j.contains("obstacles")) {
        for (std::size_t i = 0; i < j.at("obstacles").size(); ++i) {
            const auto& o = j.at("obstacles").at(i);
            const std::string wo = w + ".obstacles[" + std::to_string(i) + "]";
            check_keys(o, {"center", "radius"}, wo);
            CircleObstacle ob;
            ob.center = point(o.at("center"), wo + ".center");
            ob.radius = number(o.at("radius"), wo + ".radius");
            if (!(ob.radius > 0.0)) throw ConfigError(wo + ": radius must be positive");
            s.obstacles.push_back(ob);
        }
    }
    if (j.contains("input_bounds")) {
        const auto [lo, hi] = range(j.at("input_bounds"), w + ".input_bounds");
        if (!(hi > lo)) throw ConfigError(w + ".input_bounds: empty interval");
        s.bounds = Box{Vector::Constant(1, lo), Vector::Constant(1, hi)};
    }
    if (j.contains("methods")) {
        s.methods.clear();
        for (const auto& m : j.at("methods")) s.methods.push_back(method_of(m, w + ".methods"));
        if (s.methods.empty()) throw ConfigError(w + ".methods: empty");
    }
    if (j.contains("chains")) {
        const auto& c = j.at("chains");
        if (!c.is_array() || c.empty()) throw ConfigError(w + ".chains: expected a non-empty list");
        s.chains.clear();
        for (std::size_t i = 0; i < c.size(); ++i) {
            const std::string wc = w + ".chains[" + std::to_string(i) + "]";
            check_keys(c.at(i), {"name", "gains"}, wc);
            ChainVariant v{c.at(i).value("name", "chain" + std::to_string(i)), chain_of(c.at(i).at("gains"), wc)};
            if (v.chain.size() != 2) throw ConfigError(wc + ": need two gains");
            s.chains.push_back(std::move(v));
        }
    }
    if (j.contains("mc_samples")) s.mc_samples = positive_int(j.at("mc_samples"), w + ".mc_samples");
    if (j.contains("seed")) s.seed = seed_of(j.at("seed"), w + ".seed");
    return s;
}

inline GridSweepSpec load_gridsweep(const std::filesystem::path& path) { return gridsweep_from_json(load_document(path)); }

} // namespace fscbf

#endif // FSCBF_CONFIG_HPP
