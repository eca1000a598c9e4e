#ifndef FSCBF_REFERENCE_HPP
#define FSCBF_REFERENCE_HPP

// Nominal (reference) controllers that drive each plant toward a goal point.

#include <cmath>
#include <stdexcept>

#include "fscbf/polytope.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

struct ControllerGains {
    double k_omega = 2.0;
    double k_x = 1.0;
    double k_v = 1.5;

    bool valid() const { return k_omega > 0.0 && k_x > 0.0 && k_v > 0.0; }
};

constexpr double kAtGoalTolerance = 1e-9;

/// Goal tracker for the dynamic unicycle (px, py, v, psi):
///   psi_e = wrap(psi - atan2(gy - py, gx - px))
///   omega = -k_omega psi_e
///   v_ref = k_x |p - g| cos(psi_e),  a = -k_v (v - v_ref)
/// saturated to the input bounds. Returns zero at the goal.
inline Vector unicycle_reference(const Vector& x, const Eigen::Vector2d& goal, const ControllerGains& gains,
                                 const Box& bounds)
{
    Vector u = Vector::Zero(2);
    const Eigen::Vector2d p(x(0), x(1));
    const Eigen::Vector2d to_goal = goal - p;
    const double dist = to_goal.norm();
    if (dist <= kAtGoalTolerance) return u;
    const double psi_ref = std::atan2(to_goal.y(), to_goal.x());
    const double psi_e = wrap_angle(x(3) - psi_ref);
    const double v_ref = gains.k_x * dist * std::cos(psi_e);
    u(0) = -gains.k_v * (x(2) - v_ref);
    u(1) = -gains.k_omega * psi_e;
    return bounds.clamp(u);
}

/// Heading tracker for the fixed-speed Dubins car (px, py, theta).
inline Vector dubins_reference(const Vector& x, const Eigen::Vector2d& goal, const ControllerGains& gains,
                               const Box& bounds)
{
    Vector u = Vector::Zero(1);
    const Eigen::Vector2d to_goal = goal - Eigen::Vector2d(x(0), x(1));
    if (to_goal.norm() <= kAtGoalTolerance) return u;
    u(0) = -gains.k_omega * wrap_angle(x(2) - std::atan2(to_goal.y(), to_goal.x()));
    return bounds.clamp(u);
}

/// Proportional velocity command for the single integrator.
inline Vector single_integrator_reference(const Vector& x, const Eigen::Vector2d& goal,
                                          const ControllerGains& gains, const Box& bounds)
{
    Vector u = gains.k_x * (goal - Eigen::Vector2d(x(0), x(1)));
    return bounds.clamp(u);
}

} // namespace fscbf

#endif // FSCBF_REFERENCE_HPP
