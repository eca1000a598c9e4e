#ifndef FSCBF_DYNAMICS_HPP
#define FSCBF_DYNAMICS_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fscbf/polytope.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

/// Control-affine plant  x' = f(x) + g(x) u.
struct DynamicsModel {
    std::string name;
    Eigen::Index state_dim = 0;
    Eigen::Index control_dim = 0;
    std::function<Vector(const Vector&)> f;
    std::function<Matrix(const Vector&)> g;
    std::function<Matrix(const Vector&)> jac_f; // optional; finite differences otherwise
    std::vector<std::string> state_labels;
    std::vector<std::string> control_labels;
    std::vector<Eigen::Index> angle_indices;
    Eigen::Index px_index = 0;
    Eigen::Index py_index = 1;
    Box default_bounds;

    Vector drift(const Vector& x) const { return f(x); }
    Matrix input_matrix(const Vector& x) const { return g(x); }

    Matrix drift_jacobian(const Vector& x) const
    {
        if (jac_f) return jac_f(x);
        constexpr double h = 1e-6;
        Matrix J(state_dim, state_dim);
        Vector xp = x;
        for (Eigen::Index k = 0; k < state_dim; ++k) {
            xp(k) = x(k) + h;
            const Vector fp = f(xp);
            xp(k) = x(k) - h;
            const Vector fm = f(xp);
            xp(k) = x(k);
            J.col(k) = (fp - fm) / (2.0 * h);
        }
        return J;
    }

    Eigen::Vector2d position(const Vector& x) const { return {x(px_index), x(py_index)}; }
};

inline DynamicsModel single_integrator_model()
{
    DynamicsModel m;
    m.name = "single_integrator";
    m.state_dim = 2;
    m.control_dim = 2;
    m.f = [](const Vector&) { return Vector::Zero(2); };
    m.g = [](const Vector&) { return Matrix::Identity(2, 2); };
    m.jac_f = [](const Vector&) { return Matrix::Zero(2, 2); };
    m.state_labels = {"px", "py"};
    m.control_labels = {"vx", "vy"};
    m.default_bounds = Box::symmetric(Vector::Ones(2));
    return m;
}

/// Dubins car with fixed forward speed; state (px, py, theta), input turn rate.
inline DynamicsModel dubins_model(double speed = 1.0)
{
    if (!(speed > 0.0)) throw std::invalid_argument("dubins_model: speed must be positive");
    DynamicsModel m;
    m.name = "dubins";
    m.state_dim = 3;
    m.control_dim = 1;
    m.f = [speed](const Vector& x) {
        Vector out(3);
        out << speed * std::cos(x(2)), speed * std::sin(x(2)), 0.0;
        return out;
    };
    m.g = [](const Vector&) {
        Matrix out = Matrix::Zero(3, 1);
        out(2, 0) = 1.0;
        return out;
    };
    m.jac_f = [speed](const Vector& x) {
        Matrix J = Matrix::Zero(3, 3);
        J(0, 2) = -speed * std::sin(x(2));
        J(1, 2) = speed * std::cos(x(2));
        return J;
    };
    m.state_labels = {"px", "py", "theta"};
    m.control_labels = {"omega"};
    m.angle_indices = {2};
    m.default_bounds = Box::symmetric(Vector::Constant(1, 0.5));
    return m;
}

/// Dynamic unicycle; state (px, py, v, psi), input (a, omega).
inline DynamicsModel unicycle_model()
{
    DynamicsModel m;
    m.name = "unicycle";
    m.state_dim = 4;
    m.control_dim = 2;
    m.f = [](const Vector& x) {
        Vector out(4);
        out << x(2) * std::cos(x(3)), x(2) * std::sin(x(3)), 0.0, 0.0;
        return out;
    };
    m.g = [](const Vector&) {
        Matrix out = Matrix::Zero(4, 2);
        out(2, 0) = 1.0;
        out(3, 1) = 1.0;
        return out;
    };
    m.jac_f = [](const Vector& x) {
        Matrix J = Matrix::Zero(4, 4);
        J(0, 2) = std::cos(x(3));
        J(0, 3) = -x(2) * std::sin(x(3));
        J(1, 2) = std::sin(x(3));
        J(1, 3) = x(2) * std::cos(x(3));
        return J;
    };
    m.state_labels = {"px", "py", "v", "psi"};
    m.control_labels = {"a", "omega"};
    m.angle_indices = {3};
    Vector hw(2);
    hw << 2.0, 2.0;
    m.default_bounds = Box::symmetric(hw);
    return m;
}

/// Point mass on a line (p, v) driven by acceleration; used for HOCBF checks.
inline DynamicsModel double_integrator_1d_model()
{
    DynamicsModel m;
    m.name = "double_integrator_1d";
    m.state_dim = 2;
    m.control_dim = 1;
    m.f = [](const Vector& x) {
        Vector out(2);
        out << x(1), 0.0;
        return out;
    };
    m.g = [](const Vector&) {
        Matrix out = Matrix::Zero(2, 1);
        out(1, 0) = 1.0;
        return out;
    };
    m.jac_f = [](const Vector&) {
        Matrix J = Matrix::Zero(2, 2);
        J(0, 1) = 1.0;
        return J;
    };
    m.state_labels = {"p", "v"};
    m.control_labels = {"a"};
    m.px_index = 0;
    m.py_index = 0;
    m.default_bounds = Box::symmetric(Vector::Ones(1));
    return m;
}

inline DynamicsModel model_from_name(const std::string& name, double dubins_speed = 1.0)
{
    if (name == "single_integrator") return single_integrator_model();
    if (name == "dubins") return dubins_model(dubins_speed);
    if (name == "unicycle") return unicycle_model();
    if (name == "double_integrator_1d") return double_integrator_1d_model();
    throw std::invalid_argument("unknown dynamics model '" + name + "'");
}

/// One explicit Euler step; angle coordinates are wrapped to (-pi, pi].
inline Vector step_euler(const DynamicsModel& model, const Vector& x, const Vector& u, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("step_euler: dt must be positive");
    Vector next = x + dt * (model.f(x) + model.g(x) * u);
    for (const auto k : model.angle_indices) next(k) = wrap_angle(next(k));
    return next;
}

} // namespace fscbf

#endif // FSCBF_DYNAMICS_HPP
