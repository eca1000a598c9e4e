#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fscbf/volume.hpp"
#include "test_support.hpp"

using namespace fscbf;
using fscbf::testing::random_tagged_polytope;

namespace {

const Box kUnitBox = Box::symmetric(Vector::Constant(2, 1.0));

HPolytope with_cbf_rows(const Matrix& A, const Vector& b, const Box& box)
{
    HPolytope p(A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) p.add_row(A.row(i), b(i), RowTag::cbf(static_cast<int>(i)));
    p.add_bounds(box);
    return p;
}

HPolytope half_box()
{
    Matrix A(1, 2);
    A << 1.0, 0.0;
    return with_cbf_rows(A, Vector::Zero(1), kUnitBox);
}

HPolytope triangle_in_unit_box()
{
    Matrix A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    return with_cbf_rows(A, (Vector(3) << 0, 0, 1).finished(), kUnitBox);
}

// 3 sigma of vol * Bernoulli(p) / K.
double binomial_band(double vol, double p, int K) { return 3.0 * vol * std::sqrt(p * (1.0 - p) / K); }

} // namespace

TEST(MonteCarlo, NoCbfRowsGivesBoxVolume)
{
    const auto v = mc_volume(HPolytope::from_box(kUnitBox), kUnitBox, {17, 4});
    EXPECT_EQ(v.value, 4.0);
    EXPECT_FALSE(v.has_gradient());
}

TEST(MonteCarlo, HalfBoxWithinBinomialBand)
{
    const auto v = mc_volume(half_box(), kUnitBox, {10000, 1});
    EXPECT_NEAR(v.value, 2.0, binomial_band(4.0, 0.5, 10000));
}

TEST(MonteCarlo, TriangleWithinBinomialBand)
{
    const auto v = mc_volume(triangle_in_unit_box(), kUnitBox, {10000, 2});
    EXPECT_NEAR(v.value, 0.5, binomial_band(4.0, 0.125, 10000));
}

TEST(MonteCarlo, MeanOverSeedsIsUnbiased)
{
    const int K = 2000, seeds = 50;
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const double v = mc_volume(half_box(), kUnitBox, {K, static_cast<std::uint64_t>(s)}).value;
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / seeds;
    const double sample_sd = std::sqrt((sum_sq - seeds * mean * mean) / (seeds - 1));
    EXPECT_NEAR(mean, 2.0, 3.0 * sample_sd / std::sqrt(double(seeds)));
}

TEST(MonteCarlo, DeterministicPerSeed)
{
    const auto p = triangle_in_unit_box();
    EXPECT_EQ(mc_volume(p, kUnitBox, {999, 7}).value, mc_volume(p, kUnitBox, {999, 7}).value);
    EXPECT_THROW(mc_volume(p, kUnitBox, {0, 7}), std::invalid_argument);
}

TEST(SmoothedMonteCarlo, HalfBoxMatchesExactIntegral)
{
    // Exact integral: 2 - width/2 * (box height 2).
    const int K = 100000;
    const auto v = smoothed_mc_volume(half_box(), kUnitBox, {K, 3, 0.1});
    EXPECT_NEAR(v.value, 1.9, 3.0 * 4.0 * std::sqrt(0.25 / K));
}

TEST(SmoothedMonteCarlo, NoRowsGivesBoxVolume)
{
    EXPECT_EQ(smoothed_mc_volume(HPolytope::from_box(kUnitBox), kUnitBox, {10, 0, 0.1}).value, 4.0);
    EXPECT_THROW(smoothed_mc_volume(half_box(), kUnitBox, {10, 0, 0.0}), std::invalid_argument);
}

TEST(SmoothedMonteCarlo, NeverExceedsPlainOnSharedSeed)
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = random_tagged_polytope(rng, 2 + trial % 2, 3 + trial % 6);
        const Box box = p.input_box();
        for (const double width : {1e-4, 1e-2, 0.3, 2.0}) {
            const McConfig cfg{2000, static_cast<std::uint64_t>(trial), width};
            EXPECT_LE(smoothed_mc_volume(p, box, cfg).value, mc_volume(p, box, cfg).value);
        }
    }
}

TEST(SmoothedMonteCarlo, VanishingWidthMatchesPlain)
{
    const auto p = triangle_in_unit_box();
    const McConfig cfg{5000, 9, 1e-14};
    EXPECT_EQ(smoothed_mc_volume(p, kUnitBox, cfg).value, mc_volume(p, kUnitBox, cfg).value);
}

TEST(SmoothStep, BelowUnitStep)
{
    for (double y = -1.0; y <= 1.0; y += 1e-3) {
        const double s = smooth_step(y, 0.25);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, y >= 0.0 ? 1.0 : 0.0);
    }
    EXPECT_DOUBLE_EQ(smooth_step(0.125, 0.25), 0.5);
}

TEST(ChebyshevProxy, UnitBoxDualsSumToOne)
{
    const auto v = chebyshev_proxy(HPolytope::from_box(kUnitBox));
    EXPECT_NEAR(v.value, 1.0, 1e-9);
    EXPECT_NEAR(v.grad_b.sum(), 1.0, 1e-9);
    EXPECT_GE(v.grad_b.minCoeff(), 0.0);
    // Growing every offset by s grows the radius by exactly s.
    const double s = 1e-4;
    const HPolytope grown(HPolytope::from_box(kUnitBox).A(), HPolytope::from_box(kUnitBox).b().array() + s,
                          HPolytope::from_box(kUnitBox).tags());
    EXPECT_NEAR((chebyshev_proxy(grown).value - v.value) / s, v.grad_b.sum(), 1e-6);
}

TEST(ChebyshevProxy, InactiveRowHasZeroGradient)
{
    HPolytope p(2);
    Eigen::RowVectorXd a(2);
    a << 1.0, 0.0;
    p.add_row(a, 5.0, RowTag::cbf(0));
    p.add_bounds(kUnitBox);
    const auto v = chebyshev_proxy(p);
    EXPECT_EQ(v.grad_b(0), 0.0);
    EXPECT_EQ(v.grad_A.row(0).norm(), 0.0);
    const auto fd = proxy_gradient_fd(p, VolumeMethod::Chebyshev);
    EXPECT_LE(std::abs(fd.grad_b(0)), 1e-8);
    EXPECT_LE(fd.grad_A.row(0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ChebyshevProxy, EmptyIsDegenerateZero)
{
    HPolytope p(2);
    Eigen::RowVectorXd a(2);
    a << -1.0, 0.0;
    p.add_row(a, -2.0, RowTag::cbf(0));
    p.add_bounds(kUnitBox);
    const auto v = chebyshev_proxy(p);
    EXPECT_EQ(v.value, 0.0);
    EXPECT_TRUE(v.degenerate);
    EXPECT_TRUE(is_empty(p));
}

TEST(ChebyshevProxy, DualGradientMatchesFdOnTriangle)
{
    const auto p = triangle_in_unit_box();
    const auto v = chebyshev_proxy(p);
    const auto fd = proxy_gradient_fd(p, VolumeMethod::Chebyshev);
    ASSERT_FALSE(fd.active_set_changed);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        EXPECT_NEAR(v.grad_b(i), fd.grad_b(i), 1e-4 * std::max(1.0, std::abs(fd.grad_b(i))));
    }
}

TEST(IsEmpty, Examples)
{
    EXPECT_FALSE(is_empty(HPolytope::from_box(kUnitBox)));
    HPolytope slab = HPolytope::from_box(kUnitBox);
    Eigen::RowVectorXd a(2);
    a << 1.0, 0.0;
    slab.add_row(a, 0.0, RowTag::cbf(0));
    slab.add_row(-a, 0.0, RowTag::cbf(1));
    EXPECT_TRUE(is_empty(slab));
    HPolytope zero = HPolytope::from_box(kUnitBox);
    zero.add_row(Eigen::RowVectorXd::Zero(2), -1.0, RowTag::cbf(0));
    EXPECT_TRUE(zero.flagged_empty());
    EXPECT_TRUE(is_empty(zero));
}

TEST(EllipsoidProxy, BoxValues)
{
    EXPECT_NEAR(ellipsoid_proxy(HPolytope::from_box(kUnitBox)).value, 1.0, 1e-6);
    const Box wide{(Vector(2) << -2, -1).finished(), (Vector(2) << 2, 1).finished()};
    EXPECT_NEAR(ellipsoid_proxy(HPolytope::from_box(wide)).value, 2.0, 1e-6);
}

TEST(EllipsoidProxy, TriangleMatchesBruteForce)
{
    Matrix A(3, 2);
    A << -1, 0, 0, -1, 1, 1;
    const Vector b = (Vector(3) << 0, 0, 1).finished();
    const auto v = ellipsoid_proxy(triangle_in_unit_box());
    const double brute = fscbf::testing::brute_force_max_ellipse_det(A, b);
    EXPECT_NEAR(v.value, brute, 1e-3 * brute);
}

TEST(EllipsoidProxy, SymmetricBoxHasEqualOffsetGradients)
{
    const HPolytope p = HPolytope::from_box(kUnitBox);
    const auto v = ellipsoid_proxy(p);
    const auto fd = proxy_gradient_fd(p, VolumeMethod::Ellipsoid);
    for (Eigen::Index i = 1; i < 4; ++i) {
        EXPECT_NEAR(v.grad_b(i), v.grad_b(0), 1e-8);
        EXPECT_NEAR(fd.grad_b(i), fd.grad_b(0), 1e-6);
    }
    EXPECT_NEAR(v.grad_b(0), fd.grad_b(0), 1e-4);
}

TEST(EllipsoidProxy, FallsBackOnDegenerateSlab)
{
    HPolytope slab = HPolytope::from_box(kUnitBox);
    Eigen::RowVectorXd a(2);
    a << 1.0, 0.0;
    slab.add_row(a, 0.0, RowTag::cbf(0));
    slab.add_row(-a, 0.0, RowTag::cbf(1));
    const auto v = ellipsoid_proxy(slab);
    EXPECT_TRUE(v.fell_back);
    EXPECT_TRUE(v.degenerate);
    EXPECT_EQ(v.value, 0.0);
}

TEST(ProxyGradients, AgreeWithCentralDifferences)
{
    std::mt19937_64 rng(2024);
    int checked = 0, excluded = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index m = 2 + trial % 2;
        const auto p = random_tagged_polytope(rng, m, 2 + trial % 5);
        for (const auto method : {VolumeMethod::Chebyshev, VolumeMethod::Ellipsoid}) {
            const auto v = volume_proxy(p, method);
            if (v.degenerate || v.fell_back) continue;
            const auto fd = proxy_gradient_fd(p, method, 1e-6);
            ++checked;
            if (fd.active_set_changed) {
                ++excluded;
                continue;
            }
            const double scale = std::max({1.0, fd.grad_A.cwiseAbs().maxCoeff(), fd.grad_b.cwiseAbs().maxCoeff()});
            EXPECT_LE((v.grad_A - fd.grad_A).cwiseAbs().maxCoeff(), 1e-3 * scale) << "trial " << trial;
            EXPECT_LE((v.grad_b - fd.grad_b).cwiseAbs().maxCoeff(), 1e-3 * scale) << "trial " << trial;
        }
    }
    EXPECT_GT(checked, 150);
    EXPECT_LT(excluded, checked / 20);
}

TEST(ProxyValues, MonotoneInOffsets)
{
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = random_tagged_polytope(rng, 2 + trial % 2, 4);
        const Box box = p.input_box();
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            if (!p.tags()[i].is_cbf()) continue;
            Vector b = p.b();
            b(i) += 0.05;
            const HPolytope q(p.A(), b, p.tags());
            EXPECT_GE(chebyshev_proxy(q).value, chebyshev_proxy(p).value - 1e-12);
            EXPECT_GE(ellipsoid_proxy(q).value, ellipsoid_proxy(p).value * (1.0 - 1e-9));
            EXPECT_GE(mc_volume(q, box, {500, 1}).value, mc_volume(p, box, {500, 1}).value);
        }
    }
}

TEST(ProxyValues, UnderapproximationChain)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index m = 2 + trial % 2;
        const auto p = random_tagged_polytope(rng, m, 5);
        const double kappa = unit_ball_volume(m);
        const double ball = kappa * std::pow(chebyshev_proxy(p).value, double(m));
        const double ell = kappa * ellipsoid_proxy(p).value;
        const auto mc = mc_volume(p, p.input_box(), {100000, static_cast<std::uint64_t>(trial)});
        EXPECT_LE(ball, ell * (1.0 + 1e-9));
        EXPECT_LE(ell, mc.value + 3.0 * mc.std_error);
    }
}

TEST(UnitBall, Volumes)
{
    EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-14);
    EXPECT_NEAR(unit_ball_volume(2), std::numbers::pi, 1e-14);
    EXPECT_NEAR(unit_ball_volume(3), 4.0 * std::numbers::pi / 3.0, 1e-13);
}
