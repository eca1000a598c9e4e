#ifndef FSCBF_VOLUME_HPP
#define FSCBF_VOLUME_HPP

// Volume and volume proxies of H-polytopes, with gradients of the proxies
// with respect to the hyperplane data (A, b).

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fscbf/chebyshev.hpp"
#include "fscbf/ellipsoid.hpp"
#include "fscbf/polytope.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

enum class VolumeMethod { MonteCarlo, SmoothedMC, Chebyshev, Ellipsoid };

inline std::string_view to_string(VolumeMethod m)
{
    switch (m) {
    case VolumeMethod::MonteCarlo: return "mc";
    case VolumeMethod::SmoothedMC: return "smoothed_mc";
    case VolumeMethod::Chebyshev: return "chebyshev";
    case VolumeMethod::Ellipsoid: return "ellipsoid";
    }
    return "?";
}

inline VolumeMethod volume_method_from_string(std::string_view s)
{
    if (s == "mc") return VolumeMethod::MonteCarlo;
    if (s == "smoothed_mc") return VolumeMethod::SmoothedMC;
    if (s == "chebyshev") return VolumeMethod::Chebyshev;
    if (s == "ellipsoid") return VolumeMethod::Ellipsoid;
    throw std::invalid_argument("unknown volume method '" + std::string(s) + "'");
}

constexpr double kDegenerateRadius = 1e-9;

struct VolumeResult {
    double value = 0.0;
    Matrix grad_A; // empty for Monte Carlo methods
    Vector grad_b;
    VolumeMethod method = VolumeMethod::Chebyshev;
    bool degenerate = false;

    // Diagnostics.
    bool fell_back = false;      // ellipsoid request answered by the Chebyshev proxy
    bool not_converged = false;
    double std_error = 0.0;      // Monte Carlo only
    std::vector<int> active_rows;
    Vector center;
    Matrix shape;                // ellipsoid B, or r*I for the ball
    double surrogate_gap = 0.0;

    bool has_gradient() const { return grad_b.size() > 0; }
};

struct McConfig {
    int samples = 100;
    std::uint64_t seed = 0;
    double smoothing_width = 0.0;
};

/// Volume of the unit ball in R^m.
inline double unit_ball_volume(Eigen::Index m)
{
    const double half = 0.5 * static_cast<double>(m);
    return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

/// Cubic smoothstep supported on [0, width]; never exceeds the unit step.
inline double smooth_step(double y, double width)
{
    if (y <= 0.0) return 0.0;
    if (y >= width) return 1.0;
    const double s = y / width;
    return s * s * (3.0 - 2.0 * s);
}

namespace detail {

template <typename Weight>
VolumeResult mc_accumulate(const HPolytope& p, const Box& box, const McConfig& cfg, Weight weight)
{
    if (cfg.samples < 1) throw std::invalid_argument("Monte Carlo volume needs at least one sample");
    if (box.dim() != p.dim()) throw std::invalid_argument("Monte Carlo box dimension mismatch");
    std::vector<Eigen::Index> cbf;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        if (p.tags()[i].is_cbf()) cbf.push_back(i);

    std::mt19937_64 rng(cfg.seed);
    const Vector width = box.upper - box.lower;
    Vector u(p.dim());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int k = 0; k < cfg.samples; ++k) {
        for (Eigen::Index j = 0; j < p.dim(); ++j) u(j) = box.lower(j) + width(j) * unit_uniform(rng);
        double w = 1.0;
        for (const auto i : cbf) {
            w *= weight(p.b()(i) - p.A().row(i).dot(u));
            if (w == 0.0) break;
        }
        sum += w;
        sum_sq += w * w;
    }
    const double K = static_cast<double>(cfg.samples);
    const double vol = box.volume();
    VolumeResult out;
    out.value = vol * sum / K;
    const double mean = sum / K;
    const double var = std::max(0.0, sum_sq / K - mean * mean);
    out.std_error = vol * std::sqrt(var / K);
    out.degenerate = out.value == 0.0;
    return out;
}

} // namespace detail

/// vol(box) * (fraction of uniform box samples satisfying every CBF row).
inline VolumeResult mc_volume(const HPolytope& p, const Box& box, const McConfig& cfg)
{
    auto out = detail::mc_accumulate(p, box, cfg, [](double slack) { return slack >= 0.0 ? 1.0 : 0.0; });
    out.method = VolumeMethod::MonteCarlo;
    return out;
}

/// Smoothed-indicator estimate; with the same seed and sample count it is
/// never larger than mc_volume.
inline VolumeResult smoothed_mc_volume(const HPolytope& p, const Box& box, const McConfig& cfg)
{
    if (!(cfg.smoothing_width > 0.0)) throw std::invalid_argument("smoothed_mc_volume needs smoothing_width > 0");
    const double width = cfg.smoothing_width;
    auto out = detail::mc_accumulate(p, box, cfg, [width](double slack) { return smooth_step(slack, width); });
    out.method = VolumeMethod::SmoothedMC;
    return out;
}

/// Chebyshev radius with dual-based gradients:
///   dr/db_i = lambda_i,  dr/da_i = -lambda_i (c + r a_i / |a_i|).
inline VolumeResult chebyshev_proxy(const HPolytope& p)
{
    VolumeResult out;
    out.method = VolumeMethod::Chebyshev;
    out.grad_A = Matrix::Zero(p.rows(), p.dim());
    out.grad_b = Vector::Zero(p.rows());
    out.center = Vector::Zero(p.dim());
    out.shape = Matrix::Zero(p.dim(), p.dim());
    if (p.flagged_empty() || p.rows() == 0) {
        if (p.rows() == 0) throw std::invalid_argument("chebyshev_proxy: unbounded polytope (no rows)");
        out.degenerate = true;
        return out;
    }
    const ChebyshevResult ball = solve_chebyshev(p.A(), p.b());
    if (ball.status == ChebyshevStatus::Unbounded) {
        throw std::invalid_argument("chebyshev_proxy: unbounded polytope; input bounds missing");
    }
    if (ball.status != ChebyshevStatus::Optimal || ball.radius <= kDegenerateRadius) {
        out.degenerate = true;
        if (ball.center.size() == p.dim()) out.center = ball.center;
        return out;
    }
    out.value = ball.radius;
    out.center = ball.center;
    out.shape = ball.radius * Matrix::Identity(p.dim(), p.dim());
    out.grad_b = ball.duals;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double lam = ball.duals(i);
        if (lam == 0.0) continue;
        const double norm = p.A().row(i).norm();
        out.grad_A.row(i) = -lam * (ball.center.transpose() + ball.radius * p.A().row(i) / norm);
        if (lam > 1e-7) out.active_rows.push_back(static_cast<int>(i));
    }
    return out;
}

/// det(B) of the maximum-volume inscribed ellipsoid, with envelope-theorem
/// gradients from the optimal multipliers:
///   d log det B / d b_i = lambda_i,
///   d log det B / d a_i = -lambda_i (B B a_i / |B a_i| + d).
/// Degenerate or unconverged solves fall back to chebyshev_proxy.
inline VolumeResult ellipsoid_proxy(const HPolytope& p, const EllipsoidResult* warm_start = nullptr)
{
    if (p.rows() == 0) throw std::invalid_argument("ellipsoid_proxy: unbounded polytope (no rows)");
    if (p.flagged_empty()) {
        auto out = chebyshev_proxy(p);
        out.fell_back = true;
        return out;
    }
    const EllipsoidResult ell = solve_max_ellipsoid(p.A(), p.b(), warm_start);
    if (ell.status == EllipsoidStatus::Unbounded) {
        throw std::invalid_argument("ellipsoid_proxy: unbounded polytope; input bounds missing");
    }
    if (ell.status != EllipsoidStatus::Optimal) {
        auto out = chebyshev_proxy(p);
        out.fell_back = true;
        if (ell.status == EllipsoidStatus::NotConverged) {
            out.not_converged = true;
            out.degenerate = true;
        }
        return out;
    }
    VolumeResult out;
    out.method = VolumeMethod::Ellipsoid;
    out.value = std::exp(ell.log_det_B);
    out.center = ell.d;
    out.shape = ell.B;
    out.surrogate_gap = ell.surrogate_gap;
    out.grad_b = out.value * ell.duals;
    out.grad_A = Matrix::Zero(p.rows(), p.dim());
    const Matrix B2 = ell.B * ell.B;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double lam = ell.duals(i);
        if (lam == 0.0) continue;
        const Vector a = p.A().row(i).transpose();
        const double norm = (ell.B * a).norm();
        out.grad_A.row(i) = -out.value * lam * (B2 * a / norm + ell.d).transpose();
        if (lam > 1e-7) out.active_rows.push_back(static_cast<int>(i));
    }
    return out;
}

inline VolumeResult volume_proxy(const HPolytope& p, VolumeMethod method, const EllipsoidResult* warm = nullptr)
{
    switch (method) {
    case VolumeMethod::Chebyshev: return chebyshev_proxy(p);
    case VolumeMethod::Ellipsoid: return ellipsoid_proxy(p, warm);
    default: throw std::invalid_argument("volume_proxy: only Chebyshev and Ellipsoid proxies have gradients");
    }
}

struct FdGradient {
    Matrix grad_A;
    Vector grad_b;
    // Entries whose +step and -step evaluations produced different active sets.
    Matrix changed_A;
    Vector changed_b;
    bool active_set_changed = false;
};

using PolytopeBuilder = std::function<HPolytope(const Matrix& dA, const Vector& db)>;

/// Central finite differences of a proxy with respect to every entry of A and
/// b, where `builder(dA, db)` returns the polytope perturbed by (dA, db).
inline FdGradient proxy_gradient_fd(const PolytopeBuilder& builder, Eigen::Index rows, Eigen::Index dim,
                                    VolumeMethod method, double step = 1e-5)
{
    if (!(step > 0.0)) throw std::invalid_argument("proxy_gradient_fd: step must be positive");
    FdGradient out;
    out.grad_A = Matrix::Zero(rows, dim);
    out.grad_b = Vector::Zero(rows);
    out.changed_A = Matrix::Zero(rows, dim);
    out.changed_b = Vector::Zero(rows);
    auto central = [&](const Matrix& dA, const Vector& db, bool& changed) {
        const VolumeResult plus = volume_proxy(builder(dA, db), method);
        const VolumeResult minus = volume_proxy(builder(-dA, -db), method);
        changed = plus.active_rows != minus.active_rows || plus.method != minus.method;
        return (plus.value - minus.value) / (2.0 * step);
    };
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            Matrix dA = Matrix::Zero(rows, dim);
            dA(i, j) = step;
            bool changed = false;
            out.grad_A(i, j) = central(dA, Vector::Zero(rows), changed);
            out.changed_A(i, j) = changed ? 1.0 : 0.0;
            out.active_set_changed |= changed;
        }
        Vector db = Vector::Zero(rows);
        db(i) = step;
        bool changed = false;
        out.grad_b(i) = central(Matrix::Zero(rows, dim), db, changed);
        out.changed_b(i) = changed ? 1.0 : 0.0;
        out.active_set_changed |= changed;
    }
    return out;
}

/// Finite-difference gradient of a proxy at a fixed polytope.
inline FdGradient proxy_gradient_fd(const HPolytope& p, VolumeMethod method, double step = 1e-5)
{
    PolytopeBuilder builder = [&p](const Matrix& dA, const Vector& db) {
        return HPolytope(p.A() + dA, p.b() + db, p.tags());
    };
    return proxy_gradient_fd(builder, p.rows(), p.dim(), method, step);
}

} // namespace fscbf

#endif // FSCBF_VOLUME_HPP
