#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "btf/operator.hpp"
#include "btf/rng.hpp"

namespace btf {

enum class PriorFamily { dexp, gdp };

std::string to_string(PriorFamily family);
/// Parses "dexp" or "gdp"; throws std::invalid_argument otherwise.
PriorFamily parse_prior_family(const std::string& name);

/// Shrinkage prior: Gamma(alpha, rho) on lambda^2 (dexp) or on lambda (gdp).
struct PriorSpec {
    PriorFamily family = PriorFamily::gdp;
    double alpha = 1.0;
    double rho = 0.01;

    void validate() const;
};

/// One Gibbs iterate. lambda is stored for both prior families.
struct ChainState {
    std::vector<double> f;
    std::vector<double> omega;
    double sigma2 = 1.0;
    double lambda = 1.0;
};

struct GuardConfig {
    /// Redraw f whenever some |(D f)_j| falls below this value.
    double threshold = 1e-10;
    /// After this many redraws the offending entries are clamped instead.
    std::size_t max_attempts = 100;
};

struct SamplerConfig {
    std::size_t iterations = 3000;
    std::size_t burnin = 1000;
    /// The f block is redrawn only on sweeps with index divisible by f_every.
    std::size_t f_every = 1;
    GuardConfig guard;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    void validate() const;
};

struct InverseGaussianParams {
    double mean;
    double shape;
};
struct GammaParams {
    double shape;
    double rate;
};
struct InverseGammaParams {
    double shape;
    double scale;
};

/// Parameters of [1/omega_j | .]: mean lambda sigma / |(Df)_j|, shape lambda^2.
InverseGaussianParams omega_conditional(double lambda, double sigma, double abs_df);

/// Parameters of [sigma^2 | .]: shape n, scale (|y - f|^2 + sum (Df)_j^2 / omega_j) / 2.
InverseGammaParams sigma2_conditional(std::span<const double> y, std::span<const double> f,
                                      std::span<const double> df,
                                      std::span<const double> omega);

/// Gamma full conditional of lambda^2 (dexp) or lambda (gdp).
struct LambdaConditional {
    GammaParams gamma;
    bool on_square;  ///< true when the gamma law is on lambda^2
};

/// dexp: Gamma(m + alpha, sum omega_j / 2 + rho) on lambda^2.
/// gdp:  Gamma(m + alpha, |Df|_1 / sigma + rho) on lambda.
LambdaConditional lambda_conditional(const PriorSpec& prior, std::span<const double> omega,
                                     std::span<const double> df, double sigma);

struct FStep {
    std::vector<double> f;
    std::vector<double> df;  ///< D f for the returned f
    std::size_t redraws = 0;
    bool exhausted = false;  ///< guard gave up; small entries must be clamped downstream
};

/// Draws f ~ N((I + D^T W D)^{-1} y, sigma^2 (I + D^T W D)^{-1}), W = diag(1/omega),
/// redrawing the whole vector while any |(Df)_j| < guard.threshold.
FStep step_f(const ChainState& state, std::span<const double> y, const DifferenceOperator& d,
             const GuardConfig& guard, RngStream& rng);

/// Draws omega_j = 1 / IG(lambda sigma / |(Df)_j|, lambda^2) independently.
/// Entries with |(Df)_j| below threshold are clamped to threshold.
std::vector<double> step_omega(const ChainState& state, std::span<const double> df,
                               double threshold, RngStream& rng);

double step_lambda(const ChainState& state, std::span<const double> df, const PriorSpec& prior,
                   RngStream& rng);

double step_sigma2(const ChainState& state, std::span<const double> y,
                   std::span<const double> df, RngStream& rng);

/// Initial state: f = y, sigma^2 = sample variance of y, and omega_j = c^2,
/// lambda = 1/c where c = d.unit_scale(). On a unit-spaced grid c = 1, so the
/// start is omega = 1, lambda = 1; other grids start at the same point
/// expressed in their own units.
ChainState initial_state(std::span<const double> y, const DifferenceOperator& d);

struct ChainDiagnostics {
    std::size_t sweeps = 0;
    std::size_t f_updates = 0;
    /// f updates that needed at least one guard redraw.
    std::size_t guard_triggered = 0;
    std::size_t guard_redraws = 0;
    std::size_t guard_exhausted = 0;
    std::size_t clamped_entries = 0;
    /// Smallest |(Df)_j| ever passed to an omega update (after clamping).
    double min_abs_df_to_omega = 0.0;

    double guard_fraction() const {
        return f_updates == 0 ? 0.0
                              : static_cast<double>(guard_triggered) /
                                    static_cast<double>(f_updates);
    }
};

struct ChainDraws {
    std::vector<std::size_t> iteration;  ///< zero-based sweep index of each retained state
    std::vector<ChainState> states;
    ChainDiagnostics diagnostics;
};

/// Runs the sampler. Each sweep updates f (when due), then omega, lambda, sigma^2;
/// states from sweeps burnin .. iterations - 1 are retained.
/// Numerical failures are rethrown as NumericalError naming the sweep.
ChainDraws run_chain(std::span<const double> y, const InputGrid& grid, std::size_t k,
                     const PriorSpec& prior, const SamplerConfig& config);

ChainDraws run_chain(std::span<const double> y, const DifferenceOperator& d,
                     const PriorSpec& prior, const SamplerConfig& config);

/// Pointwise posterior summary with equal-tailed intervals.
///
/// Interval endpoints are the (1 - level)/2 and (1 + level)/2 empirical
/// quantiles using linear interpolation between order statistics
/// (h = (N - 1) p on the zero-based sorted draws).
struct PosteriorSummary {
    double level = 0.95;
    std::size_t draws = 0;
    std::vector<double> f_mean;
    std::vector<double> f_lower;
    std::vector<double> f_upper;
    double sigma2_mean = 0.0;
    double sigma2_lower = 0.0;
    double sigma2_upper = 0.0;
    double lambda_mean = 0.0;
    double lambda_lower = 0.0;
    double lambda_upper = 0.0;
};

/// Throws std::length_error with fewer than two draws.
PosteriorSummary summarize(const ChainDraws& draws, double level = 0.95);

}  // namespace btf
