#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "btf/operator.hpp"

namespace btf {

/// A reproducible random stream identified by (seed, stream id).
///
/// The engine is a 64-bit Mersenne Twister seeded through std::seed_seq
/// from all four 32-bit halves of the pair, so one (seed, stream) always
/// yields the same bit sequence. All variates below are built directly on
/// engine output rather than on std:: distributions, whose algorithms are
/// implementation-defined.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Uniform integer on [0, bound).
    std::uint64_t uniform_index(std::uint64_t bound);
    /// Standard normal (Marsaglia polar method).
    double normal();

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Inverse-Gaussian draw with the given mean and shape.
///
/// Uses the transformation with multiple roots: for v = N(0,1)^2 the smaller
/// root of the quadratic is accepted with probability mean / (mean + root),
/// otherwise mean^2 / root is returned. The smaller root is computed as
/// mean / (1 + t + sqrt(t^2 + 2t)), t = mean * v / (2 shape), which avoids
/// the cancellation in the textbook form. Candidates that underflow to zero
/// or overflow are redrawn, so the result is always strictly positive.
double draw_inverse_gaussian(RngStream& rng, double mean, double shape);

/// Gamma draw with shape-rate parametrization (mean shape / rate).
/// Marsaglia-Tsang squeeze; shapes below one use the u^(1/shape) boost.
double draw_gamma(RngStream& rng, double shape, double rate);

/// Inverse-gamma draw: 1 / Gamma(shape, rate = scale). Mean scale / (shape - 1).
double draw_inverse_gamma(RngStream& rng, double shape, double scale);

/// Draw from N(Q^{-1} rhs, scale2 Q^{-1}) for a banded SPD precision Q.
///
/// With Q = R^T R, the mean solves R^T R m = rhs and the fluctuation is
/// R^{-1} z for z ~ N(0, I), whose covariance is R^{-1} R^{-T} = Q^{-1}.
/// Cost is O(n (k+1)^2) for the factorization plus O(n (k+1)) per solve.
/// Throws NumericalError if Q is not positive definite.
std::vector<double> draw_gaussian_banded(RngStream& rng, std::span<const double> rhs,
                                         const BandedSPD& precision, double scale2);

/// As above, reusing an existing factorization of the precision.
std::vector<double> draw_gaussian_banded(RngStream& rng, std::span<const double> rhs,
                                         const BandedCholesky& precision, double scale2);

/// Posterior mean Q^{-1} rhs for a factored precision.
std::vector<double> gaussian_mean(std::span<const double> rhs, const BandedCholesky& precision);

/// Adds sqrt(scale2) R^{-1} z to mean, z freshly drawn.
void add_gaussian_fluctuation(RngStream& rng, std::span<double> mean,
                              const BandedCholesky& precision, double scale2);

}  // namespace btf
