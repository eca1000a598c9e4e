#ifndef FSCBF_TYPES_HPP
#define FSCBF_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace fscbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a <= 0.0) a += two_pi;
    return a - std::numbers::pi;
}

/// splitmix64; used to derive independent per-run seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from a 64-bit engine draw; portable across
/// standard libraries, unlike std::uniform_real_distribution.
template <typename Engine>
inline double unit_uniform(Engine& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Engine>
inline double uniform_in(Engine& rng, double lo, double hi)
{
    return lo + (hi - lo) * unit_uniform(rng);
}

} // namespace fscbf

#endif // FSCBF_TYPES_HPP
