#ifndef FSCBF_CHEBYSHEV_HPP
#define FSCBF_CHEBYSHEV_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fscbf/qp.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

enum class ChebyshevStatus { Optimal, Empty, Unbounded, SolverFailure };

struct ChebyshevResult {
    ChebyshevStatus status = ChebyshevStatus::SolverFailure;
    Vector center;
    double radius = 0.0; // negative when the polytope has no interior
    Vector duals;        // one per input row; zero for dropped rows
};

struct ChebyshevOptions {
    double regularization = 1e-8; // mu in mu/2 (|c|^2 + r^2)
    double unbounded_radius = 1e6;
    double zero_row_tol = 1e-14;
};

/// Largest ball {c + r v : |v| <= 1} inside {u : A u <= b}.
///
/// Solved as the LP  max r  s.t.  a_i c + |a_i| r <= b_i  with a tiny
/// quadratic regularization so that the center is unique. Zero rows with
/// b_i >= 0 are vacuous and dropped; a zero row with b_i < 0 makes the set
/// empty and is reported immediately with radius -inf.
inline ChebyshevResult solve_chebyshev(const Matrix& A, const Vector& b, const ChebyshevOptions& opts = {})
{
    if (A.rows() == 0 || A.rows() != b.size() || A.cols() == 0) {
        throw std::invalid_argument("solve_chebyshev: need at least one row and consistent sizes");
    }
    const Eigen::Index m = A.cols();
    ChebyshevResult out;
    out.duals = Vector::Zero(A.rows());

    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        if (A.row(i).norm() <= opts.zero_row_tol) {
            if (b(i) < 0.0) {
                out.status = ChebyshevStatus::Empty;
                out.center = Vector::Zero(m);
                out.radius = -std::numeric_limits<double>::infinity();
                return out;
            }
            continue;
        }
        kept.push_back(i);
    }
    if (kept.empty()) {
        out.status = ChebyshevStatus::Unbounded;
        out.center = Vector::Zero(m);
        out.radius = std::numeric_limits<double>::infinity();
        return out;
    }

    // Decision vector (c, r); objective scaled by 1/mu so that Q = I.
    QpProblem qp;
    qp.Q = Matrix::Identity(m + 1, m + 1);
    qp.q = Vector::Zero(m + 1);
    qp.q(m) = -1.0 / opts.regularization;
    qp.A_in.resize(static_cast<Eigen::Index>(kept.size()), m + 1);
    qp.b_in.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto i = kept[k];
        const auto row = static_cast<Eigen::Index>(k);
        qp.A_in.row(row).head(m) = A.row(i);
        qp.A_in(row, m) = A.row(i).norm();
        qp.b_in(row) = b(i);
    }
    const QpSolution sol = solve_qp(qp);
    if (sol.status != QpStatus::Optimal) {
        out.status = ChebyshevStatus::SolverFailure;
        out.center = Vector::Zero(m);
        return out;
    }
    out.center = sol.x_opt.head(m);
    out.radius = sol.x_opt(m);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.duals(kept[k]) = sol.duals(static_cast<Eigen::Index>(k)) * opts.regularization;
    }

    // A vertex optimum is recomputed from its active system, which removes
    // the O(mu) bias and the rounding left by the 1/mu objective scaling.
    // Rows within a small residual of the regularized optimum are tried first
    // (this catches degenerate vertices with more than m + 1 tight rows), then
    // the solver's own active set. Degenerate vertices get the minimum-norm
    // multipliers.
    const double scale = 1.0 + qp.b_in.cwiseAbs().maxCoeff();
    auto polish = [&](const std::vector<Eigen::Index>& act) {
        const auto n_act = static_cast<Eigen::Index>(act.size());
        if (n_act < m + 1) return false;
        Matrix M(n_act, m + 1);
        Vector rhs(n_act);
        for (Eigen::Index k = 0; k < n_act; ++k) {
            M.row(k) = qp.A_in.row(act[static_cast<std::size_t>(k)]);
            rhs(k) = qp.b_in(act[static_cast<std::size_t>(k)]);
        }
        const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(M);
        if (cod.rank() != m + 1) return false;
        const Vector z = cod.solve(rhs);
        if ((M * z - rhs).cwiseAbs().maxCoeff() > 1e-11 * scale) return false;
        if (((qp.A_in * z - qp.b_in).array() > 1e-11 * scale).any()) return false;
        const Vector lam = Eigen::CompleteOrthogonalDecomposition<Matrix>(M.transpose()).solve(Vector::Unit(m + 1, m));
        if ((M.transpose() * lam - Vector::Unit(m + 1, m)).cwiseAbs().maxCoeff() > 1e-10) return false;
        if ((lam.array() < -1e-12).any()) return false;
        out.center = z.head(m);
        out.radius = z(m);
        out.duals.setZero();
        for (Eigen::Index k = 0; k < n_act; ++k) {
            out.duals(kept[static_cast<std::size_t>(act[static_cast<std::size_t>(k)])]) = std::max(lam(k), 0.0);
        }
        return true;
    };
    std::vector<Eigen::Index> tight;
    const Vector slack = qp.b_in - qp.A_in * sol.x_opt;
    for (Eigen::Index k = 0; k < slack.size(); ++k) {
        if (slack(k) <= 1e-6 * scale) tight.push_back(k);
    }
    if (!polish(tight)) polish(std::vector<Eigen::Index>(sol.active_set.begin(), sol.active_set.end()));
    if (out.radius > opts.unbounded_radius) {
        out.status = ChebyshevStatus::Unbounded;
    } else if (out.radius <= 0.0) {
        out.status = ChebyshevStatus::Empty;
    } else {
        out.status = ChebyshevStatus::Optimal;
    }
    return out;
}

} // namespace fscbf

#endif // FSCBF_CHEBYSHEV_HPP
