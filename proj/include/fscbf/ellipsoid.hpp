#ifndef FSCBF_ELLIPSOID_HPP
#define FSCBF_ELLIPSOID_HPP

// Maximum-volume ellipsoid {B z + d : |z| <= 1} inscribed in {u : A u <= b}:
//
//   minimize    -log det B
//   subject to  |B a_i| + a_i d <= b_i
//
// Solved with a primal-dual interior-point method over the free entries of
// the symmetric matrix B and the center d. The problem sizes here are a few
// variables and at most a few dozen rows, so every Newton system is formed
// and factored densely.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fscbf/chebyshev.hpp"
#include "fscbf/types.hpp"

namespace fscbf {

enum class EllipsoidStatus { Optimal, DegeneratePolytope, Unbounded, NotConverged };

struct EllipsoidResult {
    EllipsoidStatus status = EllipsoidStatus::NotConverged;
    Matrix B;
    Vector d;
    double log_det_B = -std::numeric_limits<double>::infinity();
    Vector duals; // one per input row (zero for dropped vacuous rows)
    double surrogate_gap = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

struct EllipsoidOptions {
    int max_iterations = 100;
    double gap_tol = 1e-13;
    double residual_tol = 1e-10;
    double degenerate_radius = 1e-9;
};

namespace detail {

// Symmetric basis: one matrix per lower-triangular entry (i >= j).
inline std::vector<Matrix> symmetric_basis(Eigen::Index m)
{
    std::vector<Matrix> basis;
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = j; i < m; ++i) {
            Matrix E = Matrix::Zero(m, m);
            E(i, j) = 1.0;
            E(j, i) = 1.0;
            basis.push_back(std::move(E));
        }
    }
    return basis;
}

inline Vector pack_symmetric(const Matrix& B)
{
    const Eigen::Index m = B.rows();
    Vector beta(m * (m + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j; i < m; ++i) beta(k++) = B(i, j);
    return beta;
}

inline Matrix unpack_symmetric(const Vector& beta, Eigen::Index m)
{
    Matrix B(m, m);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j; i < m; ++i) {
            B(i, j) = beta(k);
            B(j, i) = beta(k);
            ++k;
        }
    return B;
}

class EllipsoidProgram {
public:
    EllipsoidProgram(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b))
    {
        m_ = A_.cols();
        p_ = m_ * (m_ + 1) / 2;
        basis_ = symmetric_basis(m_);
        rowmaps_.reserve(static_cast<std::size_t>(A_.rows()));
        for (Eigen::Index i = 0; i < A_.rows(); ++i) {
            Matrix Mi(m_, p_);
            for (Eigen::Index k = 0; k < p_; ++k) Mi.col(k) = basis_[k] * A_.row(i).transpose();
            rowmaps_.push_back(std::move(Mi));
        }
    }

    Eigen::Index dim() const { return p_ + m_; }
    Eigen::Index rows() const { return A_.rows(); }
    Eigen::Index space_dim() const { return m_; }

    Matrix shape(const Vector& y) const { return unpack_symmetric(y.head(p_), m_); }

    // Constraint values g_i(y) = |B a_i| + a_i d - b_i; nullopt if B is not PD.
    std::optional<Vector> constraints(const Vector& y) const
    {
        Eigen::LLT<Matrix> llt(shape(y));
        if (llt.info() != Eigen::Success) return std::nullopt;
        Vector g(rows());
        const Vector beta = y.head(p_);
        const Vector d = y.tail(m_);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            g(i) = (rowmaps_[i] * beta).norm() + A_.row(i).dot(d) - b_(i);
        }
        return g;
    }

    struct Derivatives {
        Vector grad_f;
        Matrix hess_f;
        Matrix jac_g;                // rows x dim
        std::vector<Matrix> hess_g;  // p x p blocks (the d-part is zero)
    };

    Derivatives derivatives(const Vector& y) const
    {
        Derivatives out;
        const Matrix B = shape(y);
        const Matrix Binv = B.inverse();
        const Eigen::Index n = dim();
        out.grad_f = Vector::Zero(n);
        out.hess_f = Matrix::Zero(n, n);
        std::vector<Matrix> P(static_cast<std::size_t>(p_));
        for (Eigen::Index k = 0; k < p_; ++k) {
            P[k] = Binv * basis_[k];
            out.grad_f(k) = -P[k].trace();
        }
        for (Eigen::Index k = 0; k < p_; ++k)
            for (Eigen::Index l = 0; l <= k; ++l) {
                const double v = (P[k].cwiseProduct(P[l].transpose())).sum();
                out.hess_f(k, l) = v;
                out.hess_f(l, k) = v;
            }

        const Vector beta = y.head(p_);
        out.jac_g = Matrix::Zero(rows(), n);
        out.hess_g.resize(static_cast<std::size_t>(rows()));
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const Vector Ba = rowmaps_[i] * beta;
            const double norm = Ba.norm();
            const Vector u = Ba / norm;
            out.jac_g.row(i).head(p_) = (rowmaps_[i].transpose() * u).transpose();
            out.jac_g.row(i).tail(m_) = A_.row(i);
            const Matrix proj = Matrix::Identity(m_, m_) - u * u.transpose();
            out.hess_g[i] = rowmaps_[i].transpose() * proj * rowmaps_[i] / norm;
        }
        return out;
    }

private:
    Matrix A_;
    Vector b_;
    Eigen::Index m_ = 0;
    Eigen::Index p_ = 0;
    std::vector<Matrix> basis_;
    std::vector<Matrix> rowmaps_;
};

} // namespace detail

/// Solves the maximum-volume inscribed ellipsoid program. `warm_start`, when
/// given, is used as the initial iterate if it is strictly inside (after a
/// small shrink); otherwise the Chebyshev ball seeds the method.
inline EllipsoidResult solve_max_ellipsoid(const Matrix& A, const Vector& b,
                                           const EllipsoidResult* warm_start = nullptr,
                                           const EllipsoidOptions& opts = {})
{
    if (A.rows() == 0 || A.rows() != b.size() || A.cols() == 0) {
        throw std::invalid_argument("solve_max_ellipsoid: need at least one row and consistent sizes");
    }
    const Eigen::Index m = A.cols();
    EllipsoidResult out;
    out.duals = Vector::Zero(A.rows());
    out.B = Matrix::Zero(m, m);
    out.d = Vector::Zero(m);

    const ChebyshevResult ball = solve_chebyshev(A, b);
    if (ball.status == ChebyshevStatus::Unbounded) {
        out.status = EllipsoidStatus::Unbounded;
        return out;
    }
    if (ball.status != ChebyshevStatus::Optimal || ball.radius <= opts.degenerate_radius) {
        out.status = EllipsoidStatus::DegeneratePolytope;
        if (ball.center.size() == m) out.d = ball.center;
        return out;
    }

    // Normalized, non-vacuous rows.
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (A.row(i).norm() > 1e-14) kept.push_back(i);
    const auto L = static_cast<Eigen::Index>(kept.size());
    Matrix An(L, m);
    Vector bn(L);
    Vector norms(L);
    for (Eigen::Index k = 0; k < L; ++k) {
        norms(k) = A.row(kept[k]).norm();
        An.row(k) = A.row(kept[k]) / norms(k);
        bn(k) = b(kept[k]) / norms(k);
    }
    const detail::EllipsoidProgram prog(An, bn);
    const Eigen::Index n = prog.dim();

    Vector y(n);
    std::optional<Vector> g;
    if (warm_start != nullptr && warm_start->B.rows() == m && warm_start->d.size() == m) {
        y.head(n - m) = detail::pack_symmetric(0.95 * warm_start->B);
        y.tail(m) = warm_start->d;
        g = prog.constraints(y);
        if (g && g->maxCoeff() >= -1e-9) g.reset();
    }
    if (!g) {
        y.head(n - m) = detail::pack_symmetric(0.5 * ball.radius * Matrix::Identity(m, m));
        y.tail(m) = ball.center;
        g = prog.constraints(y);
    }
    if (!g || g->maxCoeff() >= 0.0) {
        out.status = EllipsoidStatus::NotConverged;
        return out;
    }

    Vector lambda = (-g->array()).inverse().matrix() / static_cast<double>(L);
    constexpr double mu = 10.0;
    constexpr double alpha = 0.01;
    constexpr double beta_ls = 0.5;

    auto residual = [&](const Vector& gg, const Vector& lam, double t,
                        const detail::EllipsoidProgram::Derivatives& der) {
        Vector r(n + L);
        r.head(n) = der.grad_f + der.jac_g.transpose() * lam;
        r.tail(L) = -(lam.array() * gg.array()).matrix() - Vector::Constant(L, 1.0 / t);
        return r;
    };

    int iter = 0;
    bool converged = false;
    double eta = -g->dot(lambda);
    while (iter < opts.max_iterations) {
        ++iter;
        const double t = mu * static_cast<double>(L) / eta;
        const auto der = prog.derivatives(y);
        const Vector r = residual(*g, lambda, t, der);

        Matrix H = der.hess_f;
        for (Eigen::Index i = 0; i < L; ++i) H.topLeftCorner(n - m, n - m) += lambda(i) * der.hess_g[i];
        Matrix Hred = H;
        Vector rhs = -r.head(n);
        for (Eigen::Index i = 0; i < L; ++i) {
            const Vector gi = der.jac_g.row(i).transpose();
            Hred -= (lambda(i) / (*g)(i)) * gi * gi.transpose();
            rhs -= gi * (r(n + i) / (*g)(i));
        }
        const Vector dy = Hred.ldlt().solve(rhs);
        Vector dl(L);
        for (Eigen::Index i = 0; i < L; ++i) {
            dl(i) = (r(n + i) - lambda(i) * der.jac_g.row(i).dot(dy)) / (*g)(i);
        }

        double s = 1.0;
        for (Eigen::Index i = 0; i < L; ++i)
            if (dl(i) < 0.0) s = std::min(s, -lambda(i) / dl(i));
        s *= 0.99;

        std::optional<Vector> gnew;
        for (int k = 0; k < 60; ++k) {
            gnew = prog.constraints(y + s * dy);
            if (gnew && gnew->maxCoeff() < 0.0) break;
            gnew.reset();
            s *= beta_ls;
        }
        if (!gnew) break;
        const double rnorm = r.norm();
        for (int k = 0; k < 60; ++k) {
            const Vector ytry = y + s * dy;
            const Vector ltry = lambda + s * dl;
            const auto dtry = prog.derivatives(ytry);
            if (residual(*gnew, ltry, t, dtry).norm() <= (1.0 - alpha * s) * rnorm) break;
            s *= beta_ls;
            auto gtry = prog.constraints(y + s * dy);
            if (!gtry) break;
            gnew = gtry;
        }
        y += s * dy;
        lambda += s * dl;
        g = gnew;
        eta = -g->dot(lambda);

        const auto dnew = prog.derivatives(y);
        const double rdual = (dnew.grad_f + dnew.jac_g.transpose() * lambda).norm();
        if (rdual <= opts.residual_tol && eta <= opts.gap_tol) {
            converged = true;
            break;
        }
    }

    out.iterations = iter;
    out.surrogate_gap = eta;
    out.B = prog.shape(y);
    out.d = y.tail(m);
    {
        Eigen::LLT<Matrix> llt(out.B);
        out.log_det_B = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    for (Eigen::Index k = 0; k < L; ++k) out.duals(kept[k]) = lambda(k) / norms(k);
    out.status = converged ? EllipsoidStatus::Optimal : EllipsoidStatus::NotConverged;
    return out;
}

} // namespace fscbf

#endif // FSCBF_ELLIPSOID_HPP
