#ifndef FSCBF_BARRIER_HPP
#define FSCBF_BARRIER_HPP

// Barrier functions h(t, x) >= 0 of relative degree 1 or 2 and the affine
// control constraint they induce through the HOCBF chain
//
//   psi^0 = h,  psi^k = d/dt psi^{k-1} + alpha^k psi^{k-1},
//   d/dt psi^{r-1}(t, x, u) + alpha^r psi^{r-1}(t, x) >= 0.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fscbf/dynamics.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

/// Linear class-K gains alpha^1 ... alpha^r.
struct ClassKChain {
    std::vector<double> gains;

    ClassKChain() = default;
    ClassKChain(std::initializer_list<double> g) : gains(g) {}
    explicit ClassKChain(std::vector<double> g) : gains(std::move(g)) {}

    std::size_t size() const { return gains.size(); }
    bool valid() const
    {
        for (const double g : gains)
            if (!(g > 0.0)) return false;
        return !gains.empty();
    }
    ClassKChain scaled(double factor) const
    {
        ClassKChain out = *this;
        for (double& g : out.gains) g *= factor;
        return out;
    }
};

/// Value and derivatives of h at (t, x). The second-order fields are only
/// read for relative degree 2.
struct BarrierEval {
    double h = 0.0;
    Vector grad;    // dh/dx
    double dt = 0.0; // dh/dt
    Matrix hess;    // d2h/dx2
    Vector grad_dt; // d2h/dxdt
    double dtt = 0.0;
};

struct BarrierSpec {
    int relative_degree = 1;
    std::function<BarrierEval(double, const Vector&)> eval;
    ClassKChain chain;
    std::string label;
};

struct HocbfRow {
    Eigen::RowVectorXd a;
    double b = 0.0;
    std::vector<double> psi; // psi^0 .. psi^{r-1}
};

/// Halfspace a u <= b equivalent to the HOCBF condition at (t, x).
inline HocbfRow hocbf_row(const BarrierSpec& spec, const DynamicsModel& model, double t, const Vector& x)
{
    if (spec.relative_degree != 1 && spec.relative_degree != 2) {
        throw std::invalid_argument("hocbf_row: relative degree must be 1 or 2");
    }
    if (spec.chain.size() != static_cast<std::size_t>(spec.relative_degree) || !spec.chain.valid()) {
        throw std::invalid_argument("hocbf_row: class-K chain must have one positive gain per degree");
    }
    const BarrierEval e = spec.eval(t, x);
    const Vector fx = model.f(x);
    const Matrix gx = model.g(x);
    HocbfRow row;
    row.psi.push_back(e.h);

    if (spec.relative_degree == 1) {
        const double alpha = spec.chain.gains[0];
        row.a = -(e.grad.transpose() * gx);
        row.b = e.grad.dot(fx) + e.dt + alpha * e.h;
        return row;
    }

    // Relative degree 2: grad h . g vanishes, so psi^1 does not depend on u.
    const double a1 = spec.chain.gains[0];
    const double a2 = spec.chain.gains[1];
    const double psi1 = e.grad.dot(fx) + e.dt + a1 * e.h;
    const Vector grad_psi1 = e.hess * fx + model.drift_jacobian(x).transpose() * e.grad + e.grad_dt + a1 * e.grad;
    const double psi1_t = e.grad_dt.dot(fx) + e.dtt + a1 * e.dt;
    row.psi.push_back(psi1);
    row.a = -(grad_psi1.transpose() * gx);
    row.b = grad_psi1.dot(fx) + psi1_t + a2 * psi1;
    return row;
}

/// Barrier h = |p(x) - c(t)|^2 - r_min^2 around a disk whose center moves
/// with constant velocity: c(t) = center + velocity (t - t0).
inline BarrierSpec circle_barrier(const DynamicsModel& model, const Eigen::Vector2d& center, double radius_min,
                                  int relative_degree, ClassKChain chain,
                                  const Eigen::Vector2d& velocity = Eigen::Vector2d::Zero(), double t0 = 0.0,
                                  std::string label = "circle")
{
    if (!(radius_min > 0.0)) throw std::invalid_argument("circle_barrier: radius_min must be positive");
    const Eigen::Index n = model.state_dim;
    const Eigen::Index ix = model.px_index;
    const Eigen::Index iy = model.py_index;
    const bool planar = ix != iy;
    BarrierSpec spec;
    spec.relative_degree = relative_degree;
    spec.chain = std::move(chain);
    spec.label = std::move(label);
    spec.eval = [=](double t, const Vector& x) {
        const Eigen::Vector2d c = center + velocity * (t - t0);
        Eigen::Vector2d diff(x(ix) - c.x(), planar ? x(iy) - c.y() : 0.0);
        Eigen::Vector2d vel = velocity;
        if (!planar) vel.y() = 0.0;
        BarrierEval e;
        e.h = diff.squaredNorm() - radius_min * radius_min;
        e.grad = Vector::Zero(n);
        e.hess = Matrix::Zero(n, n);
        e.grad_dt = Vector::Zero(n);
        e.grad(ix) += 2.0 * diff.x();
        e.hess(ix, ix) += 2.0;
        e.grad_dt(ix) += -2.0 * vel.x();
        if (planar) {
            e.grad(iy) += 2.0 * diff.y();
            e.hess(iy, iy) += 2.0;
            e.grad_dt(iy) += -2.0 * vel.y();
        }
        e.dt = -2.0 * diff.dot(vel);
        e.dtt = 2.0 * vel.squaredNorm();
        return e;
    };
    return spec;
}

} // namespace fscbf

#endif // FSCBF_BARRIER_HPP
