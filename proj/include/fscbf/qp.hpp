#ifndef FSCBF_QP_HPP
#define FSCBF_QP_HPP

// Dense strictly convex QP solver:
//
//   minimize   1/2 x'Qx + q'x
//   subject to A_in x <= b_in
//
// Dual active-set method of Goldfarb and Idnani. The problems this project
// solves are tiny (a handful of variables, a few dozen rows), so the
// projected step direction is recomputed from a fresh QR factorization of the
// active constraints each iteration instead of maintaining Givens updates.
// After the active set settles, the equality-constrained KKT system on that
// set is re-solved in the original scaling ("polish"), which recovers full
// precision for badly scaled objectives such as the LP-as-QP regularization
// used by the Chebyshev-center solver.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fscbf/types.hpp"

namespace fscbf {

struct QpProblem {
    Matrix Q;
    Vector q;
    Matrix A_in;
    Vector b_in;
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpSolution {
    QpStatus status = QpStatus::Infeasible;
    Vector x_opt;
    Vector duals;             // one per row of A_in, >= 0
    std::vector<int> active_set; // rows with dual > activity tolerance
    int iterations = 0;
};

struct QpOptions {
    int max_iterations = 200;
    double feasibility_tol = 1e-10; // relative to 1 + |b_i|
    double activity_tol = 1e-7;
};

namespace detail {

// Direction data for adding constraint `normal` (in the n_i'x >= c_i form)
// to the active set described by `active_normals` (columns).
struct StepDirection {
    Vector z; // primal direction
    Vector r; // change of active multipliers per unit step
    bool dependent = false;
};

inline StepDirection gi_direction(const Eigen::LLT<Matrix>& chol, const Matrix& active_normals,
                                  const Vector& normal)
{
    const Eigen::Index n = normal.size();
    const Eigen::Index k = active_normals.cols();
    StepDirection out;
    Vector d = chol.matrixL().solve(normal);
    if (k == 0) {
        out.z = chol.matrixU().solve(d);
        out.r.resize(0);
    } else {
        Matrix M = chol.matrixL().solve(active_normals);
        Eigen::HouseholderQR<Matrix> qr(M);
        Matrix Qfull = qr.householderQ();
        Matrix Q1 = Qfull.leftCols(k);
        Matrix R = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        Vector q1d = Q1.transpose() * d;
        Vector proj = d - Q1 * q1d;
        out.z = chol.matrixU().solve(proj);
        out.r = R.triangularView<Eigen::Upper>().solve(q1d);
    }
    const double scale = std::max(1.0, d.norm());
    out.dependent = out.z.norm() <= 1e-12 * scale * std::max<double>(1.0, static_cast<double>(n));
    if (out.dependent) out.z.setZero(n);
    return out;
}

} // namespace detail

/// Solves the QP. Q must be symmetric positive definite; PSD problems should
/// be regularized by the caller.
inline QpSolution solve_qp(const QpProblem& problem, const QpOptions& opts = {})
{
    const Eigen::Index n = problem.Q.rows();
    const Eigen::Index rows = problem.A_in.rows();
    if (problem.Q.cols() != n || problem.q.size() != n ||
        (rows > 0 && problem.A_in.cols() != n) || problem.b_in.size() != rows) {
        throw std::invalid_argument("solve_qp: inconsistent problem dimensions");
    }

    Eigen::LLT<Matrix> chol(problem.Q);
    if (chol.info() != Eigen::Success) {
        throw std::invalid_argument("solve_qp: Q is not positive definite");
    }

    QpSolution sol;
    sol.duals = Vector::Zero(rows);

    Vector x = -chol.solve(problem.q);
    std::vector<int> active;
    std::vector<double> mult;

    // Constraint i in GI form: n_i'x >= c_i with n_i = -a_i, c_i = -b_i.
    auto slack = [&](int i) { return problem.b_in(i) - problem.A_in.row(i).dot(x); };
    auto tol_of = [&](int i) { return opts.feasibility_tol * (1.0 + std::abs(problem.b_in(i))); };
    auto normals_of = [&](const std::vector<int>& set) {
        Matrix N(n, static_cast<Eigen::Index>(set.size()));
        for (std::size_t j = 0; j < set.size(); ++j) N.col(j) = -problem.A_in.row(set[j]).transpose();
        return N;
    };

    int iter = 0;
    for (;;) {
        // Pick the most violated inactive constraint (lowest index on ties).
        int p = -1;
        double worst = 0.0;
        for (int i = 0; i < rows; ++i) {
            if (std::find(active.begin(), active.end(), i) != active.end()) continue;
            const double s = slack(i);
            if (s < -tol_of(i) && s < worst) {
                worst = s;
                p = i;
            }
        }
        if (p < 0) {
            sol.status = QpStatus::Optimal;
            break;
        }

        double mult_p = 0.0;
        bool added = false;
        while (!added) {
            if (++iter > opts.max_iterations) {
                sol.status = QpStatus::MaxIterations;
                sol.iterations = iter - 1;
                sol.x_opt = x;
                return sol;
            }
            const Vector np = -problem.A_in.row(p).transpose();
            const Matrix N = normals_of(active);
            const auto dir = detail::gi_direction(chol, N, np);

            // Dual step length: largest step keeping active multipliers >= 0.
            double t1 = std::numeric_limits<double>::infinity();
            int drop = -1;
            for (Eigen::Index j = 0; j < dir.r.size(); ++j) {
                if (dir.r(j) > 0.0) {
                    const double ratio = mult[j] / dir.r(j);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = static_cast<int>(j);
                    }
                }
            }
            // Primal step length: distance to the boundary of constraint p.
            double t2 = std::numeric_limits<double>::infinity();
            if (!dir.dependent) {
                const double zn = dir.z.dot(np);
                if (zn > 0.0) t2 = -slack(p) / zn;
                if (t2 < 0.0) t2 = 0.0;
            }

            const double t = std::min(t1, t2);
            if (!std::isfinite(t)) {
                sol.status = QpStatus::Infeasible;
                sol.iterations = iter;
                sol.x_opt = x;
                return sol;
            }

            if (std::isfinite(t2)) x += t * dir.z;
            for (Eigen::Index j = 0; j < dir.r.size(); ++j) mult[j] -= t * dir.r(j);
            mult_p += t;

            if (t2 <= t1) {
                active.push_back(p);
                mult.push_back(mult_p);
                added = true;
            } else {
                active.erase(active.begin() + drop);
                mult.erase(mult.begin() + drop);
            }
        }
    }
    sol.iterations = iter;

    // Polish: re-solve the KKT system restricted to the active set.
    if (!active.empty()) {
        const auto k = static_cast<Eigen::Index>(active.size());
        Matrix K = Matrix::Zero(n + k, n + k);
        Vector rhs(n + k);
        K.topLeftCorner(n, n) = problem.Q;
        rhs.head(n) = -problem.q;
        for (Eigen::Index j = 0; j < k; ++j) {
            K.block(0, n + j, n, 1) = problem.A_in.row(active[j]).transpose();
            K.block(n + j, 0, 1, n) = problem.A_in.row(active[j]);
            rhs(n + j) = problem.b_in(active[j]);
        }
        Eigen::FullPivLU<Matrix> lu(K);
        if (lu.isInvertible()) {
            const Vector y = lu.solve(rhs);
            const Vector xp = y.head(n);
            const Vector lp = y.tail(k);
            bool ok = lp.minCoeff() >= -1e-9 && xp.allFinite();
            for (int i = 0; ok && i < rows; ++i) {
                if (problem.b_in(i) - problem.A_in.row(i).dot(xp) < -10.0 * tol_of(i)) ok = false;
            }
            if (ok) {
                x = xp;
                for (Eigen::Index j = 0; j < k; ++j) mult[j] = std::max(0.0, lp(j));
            }
        }
    }

    sol.x_opt = x;
    for (std::size_t j = 0; j < active.size(); ++j) {
        sol.duals(active[j]) = std::max(0.0, mult[j]);
    }
    for (int i = 0; i < rows; ++i) {
        if (sol.duals(i) > opts.activity_tol) sol.active_set.push_back(i);
    }
    return sol;
}

} // namespace fscbf

#endif // FSCBF_QP_HPP
