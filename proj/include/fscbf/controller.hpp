#ifndef FSCBF_CONTROLLER_HPP
#define FSCBF_CONTROLLER_HPP

// Feasible-space assembly and the two safety filters:
//
//   CBF-QP:     min |u - u_ref|^2            s.t. HOCBF rows, input bounds
//   FS-CBF-QP:  min |u - u_ref|^2 + M delta^2 s.t. HOCBF rows, input bounds,
//               dV/dx (f + g u) + dV/dt + alpha_V V >= delta
//
// where V is a differentiable proxy of the volume of the feasible control
// polytope.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fscbf/barrier.hpp"
#include "fscbf/dynamics.hpp"
#include "fscbf/polytope.hpp"
#include "fscbf/qp.hpp"
#include "fscbf/volume.hpp"

namespace fscbf {

struct FsCbfParams {
    double alpha_V = 1.0;
    double M = 1e3;
    double epsilon_floor = 1e-3;
    VolumeMethod volume_method = VolumeMethod::Chebyshev;
    double time_fd_step = 1e-3;
    double state_fd_step = 1e-5;

    bool valid() const
    {
        return alpha_V > 0.0 && M >= 1.0 && epsilon_floor > 0.0 && time_fd_step > 0.0 && state_fd_step > 0.0 &&
               (volume_method == VolumeMethod::Chebyshev || volume_method == VolumeMethod::Ellipsoid);
    }
};

enum class DecisionStatus { Ok, Infeasible };

struct ControlDecision {
    Vector u;
    double delta = 0.0;
    DecisionStatus status = DecisionStatus::Infeasible;
    std::optional<VolumeResult> volume;
    std::vector<int> active_rows;
    double boundary_margin = std::numeric_limits<double>::infinity();
    bool fs_row_dropped = false;
    HPolytope polytope;
};

/// Carries solver warm starts across control steps; single owner.
struct ControllerSession {
    std::optional<EllipsoidResult> ellipsoid_warm;
};

/// Minimum normalized CBF-row slack (b_i - a_i u) / |a_i|; +inf with no CBF rows.
inline double boundary_margin(const HPolytope& p, const Vector& u)
{
    double margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if (!p.tags()[i].is_cbf()) continue;
        const double norm = p.A().row(i).norm();
        if (norm <= 1e-12) continue;
        margin = std::min(margin, (p.b()(i) - p.A().row(i).dot(u)) / norm);
    }
    return margin;
}

/// One tagged row per barrier (spec order) followed by the 2m bound rows.
inline HPolytope assemble_polytope(const std::vector<BarrierSpec>& specs, const Box& bounds,
                                   const DynamicsModel& model, double t, const Vector& x,
                                   std::vector<HocbfRow>* rows_out = nullptr)
{
    HPolytope p(model.control_dim);
    if (rows_out != nullptr) rows_out->clear();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        HocbfRow row = hocbf_row(specs[i], model, t, x);
        p.add_row(row.a, row.b, RowTag::cbf(static_cast<int>(i)));
        if (rows_out != nullptr) rows_out->push_back(std::move(row));
    }
    p.add_bounds(bounds);
    return p;
}

/// Euclidean projection of u_ref onto the polytope.
inline ControlDecision cbf_qp_control(const Vector& u_ref, const HPolytope& p)
{
    ControlDecision out;
    out.polytope = p;
    const Eigen::Index m = p.dim();
    out.u = Vector::Zero(m);
    if (p.flagged_empty()) return out;
    QpProblem qp{Matrix::Identity(m, m), -u_ref, p.A(), p.b()};
    const QpSolution sol = solve_qp(qp);
    if (sol.status != QpStatus::Optimal) return out;
    out.status = DecisionStatus::Ok;
    out.u = sol.x_opt;
    out.active_rows = sol.active_set;
    out.boundary_margin = boundary_margin(p, out.u);
    return out;
}

/// Proxy volume of the feasible set at (t, x); values below the floor are
/// clamped to zero and flagged degenerate.
inline VolumeResult volume_of_state(const std::vector<BarrierSpec>& specs, const Box& bounds,
                                    const DynamicsModel& model, const FsCbfParams& params, double t,
                                    const Vector& x, const EllipsoidResult* warm = nullptr)
{
    const HPolytope p = assemble_polytope(specs, bounds, model, t, x);
    VolumeResult v = volume_proxy(p, params.volume_method, warm);
    if (v.value < params.epsilon_floor) {
        v.value = 0.0;
        v.degenerate = true;
    }
    return v;
}

struct VolumeGradients {
    double V = 0.0;
    Vector grad_x;
    double dV_dt = 0.0;
    bool degenerate = false;
    VolumeResult volume;
    HPolytope polytope;
};

/// V(t, x) with dV/dx and dV/dt obtained by chaining the proxy's (A, b)
/// gradients with finite differences of the assembly map: central in x,
/// forward in t.
inline VolumeGradients volume_state_time_gradients(const std::vector<BarrierSpec>& specs, const Box& bounds,
                                                   const DynamicsModel& model, const FsCbfParams& params,
                                                   double t, const Vector& x,
                                                   const EllipsoidResult* warm = nullptr)
{
    VolumeGradients out;
    out.polytope = assemble_polytope(specs, bounds, model, t, x);
    out.volume = volume_proxy(out.polytope, params.volume_method, warm);
    out.grad_x = Vector::Zero(model.state_dim);
    if (out.volume.degenerate || out.volume.value < params.epsilon_floor) {
        out.degenerate = true;
        out.volume.degenerate = true;
        return out;
    }
    out.V = out.volume.value;
    const Matrix& gA = out.volume.grad_A;
    const Vector& gb = out.volume.grad_b;
    auto directional = [&](const HPolytope& hi, const HPolytope& lo, double span) {
        return ((hi.A() - lo.A()).cwiseProduct(gA).sum() + (hi.b() - lo.b()).dot(gb)) / span;
    };
    const double h = params.state_fd_step;
    Vector xp = x;
    for (Eigen::Index k = 0; k < model.state_dim; ++k) {
        xp(k) = x(k) + h;
        const HPolytope plus = assemble_polytope(specs, bounds, model, t, xp);
        xp(k) = x(k) - h;
        const HPolytope minus = assemble_polytope(specs, bounds, model, t, xp);
        xp(k) = x(k);
        out.grad_x(k) = directional(plus, minus, 2.0 * h);
    }
    const HPolytope later = assemble_polytope(specs, bounds, model, t + params.time_fd_step, x);
    out.dV_dt = directional(later, out.polytope, params.time_fd_step);
    return out;
}

/// FS-CBF-QP over (u, delta). The FS row is dropped when the proxy volume is
/// below the floor, which reduces the step to CBF-QP behaviour.
inline ControlDecision fs_cbf_qp_control(const Vector& u_ref, const std::vector<BarrierSpec>& specs,
                                         const Box& bounds, const DynamicsModel& model,
                                         const FsCbfParams& params, double t, const Vector& x,
                                         ControllerSession* session = nullptr)
{
    const EllipsoidResult* warm =
        session != nullptr && session->ellipsoid_warm ? &*session->ellipsoid_warm : nullptr;
    VolumeGradients vg = volume_state_time_gradients(specs, bounds, model, params, t, x, warm);
    const HPolytope& p = vg.polytope;
    const Eigen::Index m = model.control_dim;

    ControlDecision out;
    out.polytope = p;
    out.u = Vector::Zero(m);
    out.volume = vg.volume;
    if (session != nullptr) {
        if (vg.volume.method == VolumeMethod::Ellipsoid && !vg.volume.degenerate) {
            EllipsoidResult w;
            w.B = vg.volume.shape;
            w.d = vg.volume.center;
            session->ellipsoid_warm = std::move(w);
        } else {
            session->ellipsoid_warm.reset();
        }
    }
    if (p.flagged_empty()) return out;

    const bool with_fs_row = !vg.degenerate;
    out.fs_row_dropped = !with_fs_row;
    const Eigen::Index rows = p.rows() + (with_fs_row ? 1 : 0);
    QpProblem qp;
    qp.Q = Matrix::Identity(m + 1, m + 1);
    qp.Q(m, m) = params.M;
    qp.q = Vector::Zero(m + 1);
    qp.q.head(m) = -u_ref;
    qp.A_in = Matrix::Zero(rows, m + 1);
    qp.b_in = Vector::Zero(rows);
    qp.A_in.topLeftCorner(p.rows(), m) = p.A();
    qp.b_in.head(p.rows()) = p.b();
    if (with_fs_row) {
        const Vector fx = model.f(x);
        const Matrix gx = model.g(x);
        const Eigen::Index r = p.rows();
        qp.A_in.row(r).head(m) = -(vg.grad_x.transpose() * gx);
        qp.A_in(r, m) = 1.0;
        qp.b_in(r) = vg.grad_x.dot(fx) + vg.dV_dt + params.alpha_V * vg.V;
    }
    const QpSolution sol = solve_qp(qp);
    if (sol.status != QpStatus::Optimal) return out;
    out.status = DecisionStatus::Ok;
    out.u = sol.x_opt.head(m);
    out.delta = with_fs_row ? sol.x_opt(m) : 0.0;
    for (const int i : sol.active_set)
        if (i < p.rows()) out.active_rows.push_back(i);
    out.boundary_margin = boundary_margin(p, out.u);
    return out;
}

} // namespace fscbf

#endif // FSCBF_CONTROLLER_HPP
