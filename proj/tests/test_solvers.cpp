#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fscbf/chebyshev.hpp"
#include "fscbf/ellipsoid.hpp"
#include "fscbf/qp.hpp"
#include "test_support.hpp"

using namespace fscbf;
using fscbf::testing::box_rows;
using fscbf::testing::random_bounded_polytope;

namespace {

// Accelerated projected gradient on the dual of
//   min 1/2 x'Qx + q'x  s.t.  A x <= b,
// whose only constraint is lambda >= 0. Independent of the active-set solver.
double dual_gradient_objective(const QpProblem& p, int max_iterations = 2000000)
{
    const Eigen::LLT<Matrix> chol(p.Q);
    if (p.A_in.rows() == 0) {
        const Vector x = -chol.solve(p.q);
        return 0.5 * x.dot(p.Q * x) + p.q.dot(x);
    }
    const Matrix Qi_At = chol.solve(p.A_in.transpose());
    const Matrix H = p.A_in * Qi_At;
    const double L = std::max(H.operatorNorm(), 1e-12);
    const Vector Qi_q = chol.solve(p.q);
    const Vector c = p.A_in * Qi_q + p.b_in;
    Vector lam = Vector::Zero(p.A_in.rows());
    Vector y = lam;
    double t = 1.0;
    for (int k = 0; k < max_iterations; ++k) {
        const Vector grad = H * y + c; // gradient of the negated dual
        const Vector next = (y - grad / L).cwiseMax(0.0);
        // Adaptive restart keeps the momentum from stalling on ill-conditioned duals.
        if ((y - next).dot(next - lam) > 0.0) t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - lam);
        lam = next;
        t = t_next;
        if (k % 100 == 0 && lam.cwiseMin(H * lam + c).cwiseAbs().maxCoeff() < 1e-13 * (1.0 + c.cwiseAbs().maxCoeff())) {
            break;
        }
    }
    const Vector x = -(Qi_q + Qi_At * lam);
    return 0.5 * x.dot(p.Q * x) + p.q.dot(x);
}

QpProblem random_feasible_qp(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> dim(1, 6), rows(0, 20);
    std::normal_distribution<double> n01;
    const int n = dim(rng), m = rows(rng);
    Matrix M(n, n);
    for (auto& v : M.reshaped()) v = n01(rng);
    QpProblem p;
    p.Q = M.transpose() * M + 0.2 * Matrix::Identity(n, n);
    p.q = Vector::NullaryExpr(n, [&] { return 3.0 * n01(rng); });
    p.A_in = Matrix::NullaryExpr(m, n, [&] { return n01(rng); });
    const Vector x0 = Vector::NullaryExpr(n, [&] { return n01(rng); });
    p.b_in = p.A_in * x0 + Vector::NullaryExpr(m, [&] { return uniform_in(rng, 0.0, 1.0); });
    return p;
}

} // namespace

TEST(Qp, ProjectionOntoHalfspace)
{
    QpProblem p{Matrix::Identity(2, 2), Vector::Zero(2), Matrix(1, 2), Vector::Constant(1, -1.0)};
    p.A_in << 1.0, 0.0;
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    EXPECT_NEAR(s.x_opt(0), -1.0, 1e-12);
    EXPECT_NEAR(s.x_opt(1), 0.0, 1e-12);
    EXPECT_NEAR(s.duals(0), 1.0, 1e-12);
    EXPECT_EQ(s.active_set, std::vector<int>{0});
}

TEST(Qp, UnconstrainedMinimum)
{
    const QpSolution s = solve_qp({Matrix::Identity(2, 2), Vector::Zero(2), Matrix(0, 2), Vector(0)});
    ASSERT_EQ(s.status, QpStatus::Optimal);
    EXPECT_EQ(s.x_opt, Vector::Zero(2));
}

TEST(Qp, ContradictoryHalfspacesAreInfeasible)
{
    Matrix A(2, 2);
    A << 1, 0, -1, 0;
    Vector b(2);
    b << 0, -1;
    EXPECT_EQ(solve_qp({Matrix::Identity(2, 2), Vector::Zero(2), A, b}).status, QpStatus::Infeasible);
}

TEST(Qp, RejectsBadInput)
{
    EXPECT_THROW(solve_qp({Matrix::Identity(2, 2), Vector::Zero(3), Matrix(0, 2), Vector(0)}), std::invalid_argument);
    Matrix Q = Matrix::Identity(2, 2);
    Q(1, 1) = -1.0;
    EXPECT_THROW(solve_qp({Q, Vector::Zero(2), Matrix(0, 2), Vector(0)}), std::invalid_argument);
}

TEST(Qp, KktAndObjectiveAgainstDualGradientOracle)
{
    std::mt19937_64 rng(20240501);
    for (int trial = 0; trial < 500; ++trial) {
        const QpProblem p = random_feasible_qp(rng);
        const QpSolution s = solve_qp(p);
        ASSERT_EQ(s.status, QpStatus::Optimal) << "trial " << trial;
        const Vector& x = s.x_opt;
        const Vector stat = p.Q * x + p.q + p.A_in.transpose() * s.duals;
        EXPECT_LE(stat.norm(), 1e-6) << "trial " << trial;
        if (p.A_in.rows() > 0) {
            EXPECT_LE((p.A_in * x - p.b_in).maxCoeff(), 1e-8) << "trial " << trial;
            EXPECT_GE(s.duals.minCoeff(), 0.0);
            const Vector comp = s.duals.cwiseProduct(p.b_in - p.A_in * x);
            EXPECT_LE(comp.cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
        }
        const double f = 0.5 * x.dot(p.Q * x) + p.q.dot(x);
        const double oracle = dual_gradient_objective(p);
        EXPECT_NEAR(f, oracle, 1e-6 * std::max(1.0, std::abs(oracle))) << "trial " << trial;
    }
}

TEST(Qp, DeterministicOutput)
{
    std::mt19937_64 rng(5);
    const QpProblem p = random_feasible_qp(rng);
    const QpSolution a = solve_qp(p), b = solve_qp(p);
    EXPECT_EQ(a.x_opt, b.x_opt);
    EXPECT_EQ(a.duals, b.duals);
    EXPECT_EQ(a.active_set, b.active_set);
}

TEST(Chebyshev, UnitBox)
{
    const auto [A, b] = box_rows(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const ChebyshevResult r = solve_chebyshev(A, b);
    ASSERT_EQ(r.status, ChebyshevStatus::Optimal);
    EXPECT_NEAR(r.radius, 1.0, 1e-9);
    EXPECT_NEAR(r.center.norm(), 0.0, 1e-9);
}

TEST(Chebyshev, RightTriangleIncircle)
{
    Matrix A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    const Vector b = (Vector(3) << 0, 0, 1).finished();
    const ChebyshevResult r = solve_chebyshev(A, b);
    ASSERT_EQ(r.status, ChebyshevStatus::Optimal);
    // Incircle of a right triangle: (leg + leg - hypotenuse) / 2.
    const double expected = (1.0 + 1.0 - std::sqrt(2.0)) / 2.0;
    EXPECT_NEAR(r.radius, expected, 1e-12);
    EXPECT_NEAR(r.center(0), expected, 1e-12);
    EXPECT_NEAR(r.center(1), expected, 1e-12);
}

TEST(Chebyshev, DisjointHalfspaceGivesNegativeRadius)
{
    auto [A, b] = box_rows(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    A.conservativeResize(5, 2);
    b.conservativeResize(5);
    A.row(4) << -1.0, 0.0;
    b(4) = -2.0;
    const ChebyshevResult r = solve_chebyshev(A, b);
    EXPECT_EQ(r.status, ChebyshevStatus::Empty);
    EXPECT_LT(r.radius, 0.0);
}

TEST(Chebyshev, ZeroRowsAndUnbounded)
{
    Matrix A = Matrix::Zero(1, 2);
    EXPECT_EQ(solve_chebyshev(A, Vector::Constant(1, 1.0)).status, ChebyshevStatus::Unbounded);
    EXPECT_EQ(solve_chebyshev(A, Vector::Constant(1, -1.0)).status, ChebyshevStatus::Empty);
    Matrix half(1, 2);
    half << 1.0, 0.0;
    EXPECT_EQ(solve_chebyshev(half, Vector::Constant(1, 0.0)).status, ChebyshevStatus::Unbounded);
}

TEST(Chebyshev, BallBoundaryInsidePolytope)
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = random_bounded_polytope(rng, 2 + trial % 2, 8);
        const ChebyshevResult r = solve_chebyshev(P.first, P.second);
        ASSERT_EQ(r.status, ChebyshevStatus::Optimal);
        for (Eigen::Index i = 0; i < P.first.rows(); ++i) {
            EXPECT_LE(P.first.row(i).dot(r.center) + P.first.row(i).norm() * r.radius, P.second(i) + 1e-8);
        }
        std::normal_distribution<double> n01;
        for (int k = 0; k < 200; ++k) {
            Vector dir = Vector::NullaryExpr(r.center.size(), [&] { return n01(rng); });
            const Vector u = r.center + r.radius * dir.normalized();
            EXPECT_LE((P.first * u - P.second).maxCoeff(), 1e-6);
        }
    }
}

TEST(Chebyshev, Deterministic)
{
    std::mt19937_64 rng(3);
    const auto P = random_bounded_polytope(rng, 3, 9);
    const auto a = solve_chebyshev(P.first, P.second), b = solve_chebyshev(P.first, P.second);
    EXPECT_EQ(a.center, b.center);
    EXPECT_EQ(a.radius, b.radius);
    EXPECT_EQ(a.duals, b.duals);
}

TEST(Ellipsoid, UnitBoxGivesUnitDisk)
{
    const auto [A, b] = box_rows(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const EllipsoidResult e = solve_max_ellipsoid(A, b);
    ASSERT_EQ(e.status, EllipsoidStatus::Optimal);
    EXPECT_LE((e.B - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(e.d.norm(), 1e-6);
    EXPECT_NEAR(e.log_det_B, 0.0, 1e-6);
}

TEST(Ellipsoid, ScaledBox)
{
    const auto [A, b] = box_rows((Vector(2) << -2, -1).finished(), (Vector(2) << 2, 1).finished());
    const EllipsoidResult e = solve_max_ellipsoid(A, b);
    ASSERT_EQ(e.status, EllipsoidStatus::Optimal);
    Matrix expected = Matrix::Zero(2, 2);
    expected.diagonal() << 2.0, 1.0;
    EXPECT_LE((e.B - expected).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(e.d.norm(), 1e-6);
}

TEST(Ellipsoid, SteinerInellipseOfRightTriangle)
{
    Matrix A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    const Vector b = (Vector(3) << 0, 0, 1).finished();
    const EllipsoidResult e = solve_max_ellipsoid(A, b);
    ASSERT_EQ(e.status, EllipsoidStatus::Optimal);
    EXPECT_NEAR(e.d(0), 1.0 / 3.0, 1e-6);
    EXPECT_NEAR(e.d(1), 1.0 / 3.0, 1e-6);
    const double area = std::numbers::pi * std::exp(e.log_det_B);
    EXPECT_NEAR(area, std::numbers::pi / (3.0 * std::sqrt(3.0)) * 0.5, 1e-6);
    const double brute = fscbf::testing::brute_force_max_ellipse_det(A, b);
    EXPECT_NEAR(std::exp(e.log_det_B), brute, 1e-3 * brute);
}

TEST(Ellipsoid, ContainmentAndPositiveDefinite)
{
    std::mt19937_64 rng(91);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const auto P = random_bounded_polytope(rng, 2 + trial % 2, 10);
        const EllipsoidResult e = solve_max_ellipsoid(P.first, P.second);
        ASSERT_EQ(e.status, EllipsoidStatus::Optimal) << "trial " << trial;
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(e.B);
        EXPECT_GT(eig.eigenvalues().minCoeff(), 1e-10);
        for (Eigen::Index i = 0; i < P.first.rows(); ++i) {
            const Vector a = P.first.row(i).transpose();
            EXPECT_LE((e.B * a).norm() + a.dot(e.d), P.second(i) + 1e-6);
        }
        for (int k = 0; k < 200; ++k) {
            Vector z = Vector::NullaryExpr(e.d.size(), [&] { return n01(rng); });
            const Vector u = e.B * z.normalized() + e.d;
            EXPECT_LE((P.first * u - P.second).maxCoeff(), 1e-6);
        }
        // The Chebyshev ball is itself an inscribed ellipsoid.
        const ChebyshevResult c = solve_chebyshev(P.first, P.second);
        EXPECT_GE(e.log_det_B, static_cast<double>(e.d.size()) * std::log(c.radius) - 1e-6);
    }
}

TEST(Ellipsoid, WarmStartReachesSameOptimum)
{
    std::mt19937_64 rng(17);
    const auto P = random_bounded_polytope(rng, 2, 10);
    const EllipsoidResult cold = solve_max_ellipsoid(P.first, P.second);
    ASSERT_EQ(cold.status, EllipsoidStatus::Optimal);
    const Vector b2 = P.second + Vector::Constant(P.second.size(), 0.01);
    const EllipsoidResult warm = solve_max_ellipsoid(P.first, b2, &cold);
    const EllipsoidResult fresh = solve_max_ellipsoid(P.first, b2);
    ASSERT_EQ(warm.status, EllipsoidStatus::Optimal);
    EXPECT_NEAR(warm.log_det_B, fresh.log_det_B, 1e-8);
}

TEST(Ellipsoid, DegenerateAndUnbounded)
{
    Matrix A(4, 2);
    A << 1, 0, -1, 0, 0, 1, 0, -1;
    const Vector slab = (Vector(4) << 0, 0, 1, 1).finished();
    EXPECT_EQ(solve_max_ellipsoid(A, slab).status, EllipsoidStatus::DegeneratePolytope);
    Matrix half(1, 2);
    half << 1, 0;
    EXPECT_EQ(solve_max_ellipsoid(half, Vector::Constant(1, 1.0)).status, EllipsoidStatus::Unbounded);
}

TEST(Ellipsoid, Deterministic)
{
    std::mt19937_64 rng(8);
    const auto P = random_bounded_polytope(rng, 3, 10);
    const auto a = solve_max_ellipsoid(P.first, P.second), b = solve_max_ellipsoid(P.first, P.second);
    EXPECT_EQ(a.B, b.B);
    EXPECT_EQ(a.d, b.d);
    EXPECT_EQ(a.duals, b.duals);
}
