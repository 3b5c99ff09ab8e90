#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "btf/operator.hpp"

namespace btf {

struct MMConfig {
    double lambda = 1.0;
    /// Perturbation keeping the reweighting finite where (Df)_i = 0, in
    /// unit-grid units: the value applied to |(Df)_i| is epsilon * D.unit_scale(),
    /// so fits do not depend on the units of x.
    double epsilon = 1e-4;
    /// Stop once the sup-norm change between iterates falls below tau.
    double tau = 1e-5;
    std::size_t max_iter = 500;
    /// Keep F_eps after every iteration in FitResult::objective_trace.
    bool record_trace = false;

    /// lambda = 0 is accepted and means no penalty.
    void validate() const;
};

struct FitResult {
    std::vector<double> f_hat;
    std::size_t iterations = 0;
    double objective = 0.0;  ///< F_eps(f_hat)
    bool converged = false;
    /// Stopped because the next iterate would have raised F_eps (rounding in
    /// the solve); f_hat is the last iterate that did not.
    bool stalled = false;
    /// F_eps(f^[0]), F_eps(f^[1]), ... when requested.
    std::vector<double> objective_trace;
};

/// F_eps(f) = |y - f|^2 + lambda * sum_i ( |(Df)_i| - e log(1 + |(Df)_i| / e) ),
/// e = epsilon * d.unit_scale(). Each MM iteration cannot increase F_eps.
double perturbed_objective(std::span<const double> y, std::span<const double> f,
                           const DifferenceOperator& d, double lambda, double epsilon);

/// Exact trend-filtering objective |y - f|^2 + lambda |Df|_1.
double trend_filter_objective(std::span<const double> y, std::span<const double> f,
                              const DifferenceOperator& d, double lambda);

/// Majorization-minimization approximation of
///   argmin_f |y - f|^2 + lambda |D f|_1.
/// Starting from f = y, each iteration solves the banded system
///   (I + lambda D^T W D) f_new = y,   W = diag(1 / (2 (|(D f)_i| + e))),
/// until |f_new - f|_inf < tau or max_iter is reached.
/// Throws NumericalError if the system cannot be factored.
FitResult mm_fit(std::span<const double> y, const DifferenceOperator& d, const MMConfig& config);
FitResult mm_fit(std::span<const double> y, const InputGrid& grid, std::size_t k,
                 const MMConfig& config);

/// Smallest lambda at which the exact trend-filtering solution is a polynomial
/// of degree <= k: 2 |(D D^T)^{-1} D y|_inf.
double lambda_max(std::span<const double> y, const DifferenceOperator& d);

/// count log-spaced values from lambda_max * ratio up to lambda_max.
std::vector<double> default_lambda_grid(std::span<const double> y, const DifferenceOperator& d,
                                        std::size_t count = 30, double ratio = 1e-5);

struct CVResult {
    double lambda = 0.0;            ///< selected value
    std::size_t selected_index = 0;
    std::vector<double> lambdas;    ///< the grid, as given
    std::vector<double> cv_error;   ///< mean squared held-out error per lambda
};

/// K-fold cross-validation over lambda.
///
/// Point i goes to fold i mod K. Each held-out point is predicted by linear
/// interpolation of the training fit between its neighbouring training inputs
/// (the nearest training value beyond either end). The error is pooled over
/// all held-out points; ties go to the larger lambda.
/// Throws std::length_error when K < 2, K > n/2, or a training set is too short.
CVResult kfold_cv(std::span<const double> y, const InputGrid& grid, std::size_t k,
                  std::size_t folds, std::span<const double> lambda_grid,
                  const MMConfig& config_template);

struct BootstrapResult {
    std::vector<double> f_hat;
    std::vector<double> lower;
    std::vector<double> upper;
    /// Per-replicate mean squared residual |y* - f*|^2 / n, a bootstrap law for sigma^2.
    std::vector<double> sigma2_draws;
    double sigma2_lower = 0.0;
    double sigma2_upper = 0.0;
    std::size_t replicates = 0;  ///< successful refits
    std::size_t dropped = 0;
};

/// Residual bootstrap at a fixed lambda.
///
/// Fits once, centres the residuals, and refits B pseudo-datasets
/// f_hat + (resampled residuals). Replicate b draws from RngStream(seed, b), so
/// the result does not depend on the thread count. Replicates whose refit
/// throws are dropped; more than 5% dropped is an error (NumericalError).
BootstrapResult bootstrap_intervals(std::span<const double> y, const InputGrid& grid,
                                    std::size_t k, const MMConfig& config, std::size_t replicates,
                                    double level, std::uint64_t seed, std::size_t threads = 1);

}  // namespace btf
