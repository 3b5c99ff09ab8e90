#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "btf/gibbs.hpp"
#include "btf/mmtf.hpp"
#include "btf/operator.hpp"
#include "btf/rng.hpp"

namespace btf {

enum class FunctionKind { dhm, piecewise_linear, piecewise_cubic, custom };

/// A regression function used by the simulation harness.
///
/// - dhm: exp(-7.5 x) cos(10 pi x) on [0, 1].
/// - piecewise_linear: on the index domain [1, 100], zero at x = 1, knots at
///   20, 45, 80 and slopes (0.1, -0.12, 0.08, -0.05). Slopes are a default,
///   configurable through `knots` and `slopes`.
/// - piecewise_cubic: on [1, 100] with t = (x - 1) / 99,
///   200 t - 1200 t^2 + 1600 t^3 - 2100 (t - 1/3)_+^3 + 700 (t - 2/3)_+^3,
///   a C^2 cubic spline with two interior knots (a documented default).
/// - custom: linear interpolation through a user table.
struct TestFunction {
    FunctionKind kind = FunctionKind::dhm;
    double start = 0.0;            ///< piecewise_linear: value at the left end
    std::vector<double> knots;     ///< piecewise_linear knots (interior)
    std::vector<double> slopes;    ///< piecewise_linear: knots.size() + 1 slopes
    std::vector<double> table_x;   ///< custom: strictly increasing
    std::vector<double> table_y;

    static TestFunction dhm();
    static TestFunction piecewise_linear();
    static TestFunction piecewise_cubic();
    static TestFunction custom(std::vector<double> xs, std::vector<double> ys);

    double domain_lo() const;
    double domain_hi() const;
    std::string name() const;
};

/// Parses dhm | piecewise_linear | piecewise_cubic.
TestFunction parse_test_function(const std::string& name);

/// Throws std::domain_error outside the function's domain.
double eval_function(const TestFunction& fn, double x);

struct SimulatedData {
    InputGrid x;
    std::vector<double> y;
    std::vector<double> truth;
};

/// n regularly spaced inputs over the function's domain, y = f(x) + N(0, sigma^2).
SimulatedData simulate_dataset(const TestFunction& fn, std::size_t n, double sigma, RngStream& rng);

/// (1/n) sum (f_hat - f_true)^2.
double mse(std::span<const double> f_hat, std::span<const double> f_true);

struct Coverage {
    double pointwise = 0.0;     ///< fraction of i with lower_i <= truth_i <= upper_i
    bool simultaneous = false;  ///< true when every point is covered
};

/// Closed intervals. Throws std::domain_error when some lower_i > upper_i.
Coverage coverage(std::span<const double> lower, std::span<const double> upper,
                  std::span<const double> truth);

enum class Method { btf_dexp, btf_gdp, mm_tf_cv };
std::string to_string(Method method);
Method parse_method(const std::string& name);

struct Hyperparameters {
    double alpha = 1.0;
    double rho = 0.01;
};

/// The hyperparameter grids explored for each prior in the original study.
std::vector<Hyperparameters> study_hyperparameter_grid(PriorFamily family);

/// The three noise levels studied for a function (dhm: 0.025, 0.05, 0.075;
/// piecewise families: 0.75, 1, 1.25). Custom tables default to dhm's levels.
std::vector<double> default_sigmas(const TestFunction& fn);

struct BenchConfig {
    TestFunction function = TestFunction::dhm();
    std::size_t n = 100;
    std::vector<double> sigmas{0.025, 0.05, 0.075};
    std::size_t replications = 100;
    std::vector<Method> methods{Method::btf_dexp, Method::btf_gdp, Method::mm_tf_cv};
    /// Applied to every Bayesian method; ignored by mm_tf_cv.
    std::vector<Hyperparameters> hyperparameters{{1.0, 0.01}};
    double level = 0.95;
    std::uint64_t seed = 1;
    std::size_t order = 3;

    // Bayesian fits
    std::size_t burnin = 1000;
    std::size_t retained = 2000;
    std::size_t f_every = 1;
    GuardConfig guard;

    // Frequentist fits
    std::size_t folds = 10;
    std::size_t lambda_count = 30;
    double lambda_ratio = 1e-5;
    std::size_t bootstrap = 200;
    MMConfig mm;

    std::size_t threads = 1;

    void validate() const;
};

/// One fit of one method to one simulated dataset.
struct ReplicationRecord {
    Method method = Method::btf_gdp;
    double sigma = 0.0;
    Hyperparameters hyper;
    std::size_t replication = 0;
    bool failed = false;
    double mse = 0.0;
    double function_coverage = 0.0;
    bool simultaneous_coverage = false;
    bool variance_covered = false;
    double guard_fraction = 0.0;      ///< Bayesian only
    std::size_t guard_triggered = 0;  ///< Bayesian only
    std::size_t f_updates = 0;        ///< Bayesian only
    double min_abs_df_to_omega = 0.0; ///< Bayesian only
    double lambda = 0.0;              ///< posterior mean (Bayesian) or CV choice
    double seconds = 0.0;
};

/// Aggregate over replications for one (method, sigma, hyperparameters) cell.
struct CellSummary {
    Method method = Method::btf_gdp;
    double sigma = 0.0;
    Hyperparameters hyper;
    std::size_t replications = 0;  ///< successful fits
    std::size_t failures = 0;
    double mse_mean = 0.0;
    double mse_sd = 0.0;
    double function_coverage_mean = 0.0;
    double function_coverage_se = 0.0;
    double simultaneous_coverage_mean = 0.0;
    double simultaneous_coverage_se = 0.0;
    double variance_coverage_mean = 0.0;
    double variance_coverage_se = 0.0;
    /// Fraction of f updates over all replications that needed a guard redraw.
    double guard_fraction = 0.0;
    double min_abs_df_to_omega = 0.0;
    double wall_seconds = 0.0;

    bool bayesian() const { return method != Method::mm_tf_cv; }
};

struct BenchReport {
    std::vector<CellSummary> cells;
    std::vector<ReplicationRecord> records;  ///< in (sigma, replication, cell) order
};

/// Runs every method on R simulated datasets per noise level. Datasets are
/// shared across methods within a replication. Replications run concurrently;
/// all randomness derives from config.seed, so the report (wall times aside)
/// is identical for any thread count. Throws std::runtime_error when more
/// than 2% of a cell's fits fail.
BenchReport run_benchmark(const BenchConfig& config);

}  // namespace btf
