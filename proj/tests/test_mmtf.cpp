#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "btf/bench.hpp"
#include "btf/mmtf.hpp"
#include "btf/rng.hpp"
#include "btf/stats.hpp"
#include "oracles.hpp"

using namespace btf;

namespace {

/// mm_fit with the objective trace checked for descent.
FitResult traced_fit(std::span<const double> y, const InputGrid& grid, std::size_t k, MMConfig cfg) {
    cfg.record_trace = true;
    FitResult fit = mm_fit(y, grid, k, cfg);
    CHECK(oracle::max_increase(fit.objective_trace) <= 1e-8);
    return fit;
}

double mean_abs_diff(std::span<const double> a, const oracle::Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b(static_cast<Eigen::Index>(i)));
    return s / static_cast<double>(a.size());
}

SimulatedData piecewise_linear_data(std::size_t n, double sigma, std::uint64_t stream) {
    RngStream rng(77, stream);
    return simulate_dataset(TestFunction::piecewise_linear(), n, sigma, rng);
}

double l1(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

}  // namespace

TEST_CASE("no penalty returns the data") {
    const auto data = piecewise_linear_data(30, 0.3, 0);
    MMConfig cfg;
    cfg.lambda = 0.0;
    const auto fit = traced_fit(data.y, data.x, 2, cfg);
    CHECK(fit.f_hat == data.y);
    CHECK(fit.iterations == 1);
    CHECK(fit.converged);
}

TEST_CASE("huge penalty with k = 0 gives the mean") {
    RngStream rng(1, 0);
    std::vector<double> y(20);
    for (auto& v : y) v = rng.normal();
    MMConfig cfg;
    cfg.lambda = 1e8;
    const auto fit = traced_fit(y, InputGrid::regular(20, 1, 20), 0, cfg);
    const double mean = stats::mean(y);
    for (double v : fit.f_hat) CHECK(std::abs(v - mean) < 1e-3);
}

TEST_CASE("agreement with the exact solver, lambda from CV") {
    const auto data = piecewise_linear_data(50, 0.3, 1);
    const auto d = build_difference_operator(data.x, 1);
    MMConfig cfg;
    const auto cv = kfold_cv(data.y, data.x, 1, 5, default_lambda_grid(data.y, d), cfg);
    cfg.lambda = cv.lambda;
    const auto fit = traced_fit(data.y, data.x, 1, cfg);
    const auto exact = oracle::exact_trend_filter(oracle::to_eigen(data.y),
                                                  oracle::difference_matrix(data.x.values(), 1), cfg.lambda);
    REQUIRE(exact.gap < 1e-10);
    const double mad = mean_abs_diff(fit.f_hat, exact.f);
    MESSAGE("lambda " << cfg.lambda << ", mean absolute difference " << mad);
    CHECK(mad <= 1e-2);
}

TEST_CASE("agreement with the exact solver on random instances") {
    RngStream rng(2, 0);
    for (int inst = 0; inst < 12; ++inst) {
        const std::size_t n = 15 + rng.uniform_index(36);
        const std::size_t k = inst % 2;
        std::vector<double> x(n);
        x[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) x[i] = x[i - 1] + 0.2 + rng.uniform();
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(x[i] / 3.0) + 0.3 * rng.normal();
        const InputGrid grid(x);
        MMConfig cfg;
        cfg.lambda = lambda_max(y, build_difference_operator(grid, k)) * std::pow(10.0, -3.0 * rng.uniform());
        const auto fit = traced_fit(y, grid, k, cfg);
        const auto exact = oracle::exact_trend_filter(oracle::to_eigen(y), oracle::difference_matrix(x, k), cfg.lambda);
        REQUIRE(exact.gap < 1e-10);
        CHECK(mean_abs_diff(fit.f_hat, exact.f) <= 1e-2);
        // MM solves a perturbed problem, so it should be close to optimal in the exact objective too
        const double f_exact = trend_filter_objective(y, oracle::to_std(exact.f), build_difference_operator(grid, k), cfg.lambda);
        const double f_mm = trend_filter_objective(y, fit.f_hat, build_difference_operator(grid, k), cfg.lambda);
        CHECK(f_mm >= f_exact - 1e-8 * std::max(1.0, f_exact));
    }
}

TEST_CASE("descent across orders, grids and perturbations") {
    RngStream rng(3, 0);
    for (std::size_t k = 0; k <= 3; ++k) {
        for (double eps : {1e-2, 1e-4, 1e-6}) {
            for (const InputGrid& grid : {InputGrid::regular(60, 1, 60), InputGrid::regular(60, 0, 1)}) {
                std::vector<double> y(60);
                for (std::size_t i = 0; i < 60; ++i) {
                    const double t = static_cast<double>(i) / 59.0;
                    y[i] = std::exp(-7.5 * t) * std::cos(31.4159 * t) + 0.05 * rng.normal();
                }
                const auto d = build_difference_operator(grid, k);
                for (double frac : {1e-4, 1e-2, 0.3}) {
                    MMConfig cfg;
                    cfg.epsilon = eps;
                    cfg.lambda = frac * lambda_max(y, d);
                    traced_fit(y, grid, k, cfg);
                }
            }
        }
    }
}

TEST_CASE("an ill-conditioned fit stops instead of climbing") {
    // k = 3 on an uneven grid with a tiny perturbation: the solves lose enough
    // precision that an unguarded step raises F_eps.
    RngStream rng(5, 0);
    const auto data = simulate_dataset(TestFunction::piecewise_cubic(), 100, 1.0, rng);
    std::vector<double> x(100);
    x[0] = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + 0.1 + rng.uniform();
    const InputGrid grid(x);
    MMConfig cfg;
    cfg.epsilon = 1e-6;
    cfg.lambda = 0.1 * lambda_max(data.y, build_difference_operator(grid, 3));
    const auto fit = traced_fit(data.y, grid, 3, cfg);
    CHECK(fit.stalled);
    CHECK_FALSE(fit.converged);
    CHECK(fit.objective == fit.objective_trace.back());
    CHECK(fit.objective_trace.size() == fit.iterations + 1);
}

TEST_CASE("more penalty means a smaller total variation") {
    const auto data = piecewise_linear_data(60, 0.5, 2);
    for (std::size_t k = 0; k <= 2; ++k) {
        const auto d = build_difference_operator(data.x, k);
        const auto ladder = default_lambda_grid(data.y, d, 15, 1e-4);
        double previous = INFINITY;
        for (double lam : ladder) {
            MMConfig cfg;
            cfg.lambda = lam;
            const double tv = l1(d.apply(traced_fit(data.y, data.x, k, cfg).f_hat));
            CHECK(tv <= previous + 1e-6);
            previous = tv;
        }
    }
}

TEST_CASE("lambda_max is where the exact solution becomes a polynomial") {
    const auto data = piecewise_linear_data(30, 0.3, 3);
    for (std::size_t k = 0; k <= 1; ++k) {
        const auto d = build_difference_operator(data.x, k);
        const oracle::Matrix dense = oracle::difference_matrix(data.x.values(), k);
        const double top = lambda_max(data.y, d);
        const auto above = oracle::exact_trend_filter(oracle::to_eigen(data.y), dense, 1.001 * top);
        CHECK((dense * above.f).lpNorm<1>() < 1e-4);
        const auto below = oracle::exact_trend_filter(oracle::to_eigen(data.y), dense, 0.9 * top);
        CHECK((dense * below.f).lpNorm<1>() > 1e-3);
    }
    const auto grid = default_lambda_grid(data.y, build_difference_operator(data.x, 1), 30, 1e-5);
    CHECK(grid.size() == 30);
    CHECK(grid.back() == doctest::Approx(lambda_max(data.y, build_difference_operator(data.x, 1))));
    CHECK(grid.front() == doctest::Approx(grid.back() * 1e-5));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("cross-validation") {
    const auto data = piecewise_linear_data(50, 0.3, 4);
    const MMConfig cfg;
    SUBCASE("single lambda") {
        const std::vector<double> one{0.7};
        const auto cv = kfold_cv(data.y, data.x, 1, 5, one, cfg);
        CHECK(cv.lambda == 0.7);
        CHECK(cv.cv_error.size() == 1);
    }
    SUBCASE("pure noise gives a finite minimizer") {
        RngStream rng(5, 0);
        std::vector<double> y(40);
        for (auto& v : y) v = rng.normal();
        const InputGrid grid = InputGrid::regular(40, 1, 40);
        const auto lambdas = default_lambda_grid(y, build_difference_operator(grid, 2));
        const auto cv = kfold_cv(y, grid, 2, 10, lambdas, cfg);
        for (double e : cv.cv_error) CHECK(std::isfinite(e));
        CHECK(std::isfinite(cv.lambda));
        CHECK(cv.lambda == lambdas[cv.selected_index]);
    }
    SUBCASE("deterministic") {
        const auto lambdas = default_lambda_grid(data.y, build_difference_operator(data.x, 1));
        const auto a = kfold_cv(data.y, data.x, 1, 10, lambdas, cfg);
        const auto b = kfold_cv(data.y, data.x, 1, 10, lambdas, cfg);
        CHECK(a.cv_error == b.cv_error);
        CHECK(a.lambda == b.lambda);
    }
    SUBCASE("ties go to the larger lambda") {
        // zero data: every lambda predicts perfectly, with no rounding
        const std::vector<double> y(20, 0.0);
        const std::vector<double> lambdas{0.1, 1.0, 10.0};
        const auto cv = kfold_cv(y, InputGrid::regular(20, 1, 20), 1, 5, lambdas, cfg);
        CHECK(cv.lambda == 10.0);
    }
    SUBCASE("fold count limits") {
        const std::vector<double> one{1.0};
        CHECK_THROWS_AS(kfold_cv(data.y, data.x, 1, 1, one, cfg), std::length_error);
        CHECK_THROWS_AS(kfold_cv(data.y, data.x, 1, 26, one, cfg), std::length_error);
        CHECK_THROWS_AS(kfold_cv(data.y, data.x, 1, 5, std::vector<double>{}, cfg), std::length_error);
    }
}

TEST_CASE("the CV choice beats the smallest lambda") {
    int wins = 0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto data = piecewise_linear_data(50, 0.3, 100 + r);
        const auto lambdas = default_lambda_grid(data.y, build_difference_operator(data.x, 1));
        MMConfig cfg;
        const auto cv = kfold_cv(data.y, data.x, 1, 5, lambdas, cfg);
        cfg.lambda = cv.lambda;
        const double chosen = mse(mm_fit(data.y, data.x, 1, cfg).f_hat, data.truth);
        cfg.lambda = lambdas.front();
        const double smallest = mse(mm_fit(data.y, data.x, 1, cfg).f_hat, data.truth);
        wins += chosen < smallest;
    }
    MESSAGE("CV beat the smallest lambda in " << wins << " of 50");
    CHECK(wins >= 40);
}

TEST_CASE("bootstrap intervals") {
    MMConfig cfg;
    cfg.lambda = 5.0;
    SUBCASE("an exactly fitted line has zero-width intervals") {
        const InputGrid grid = InputGrid::regular(25, 1, 25);
        std::vector<double> y(25);
        for (std::size_t i = 0; i < 25; ++i) y[i] = 1.0 + 0.5 * grid[i];
        const auto boot = bootstrap_intervals(y, grid, 1, cfg, 100, 0.9, 3);
        for (std::size_t i = 0; i < 25; ++i) {
            CHECK(boot.upper[i] - boot.lower[i] < 1e-9);
            CHECK(std::abs(boot.f_hat[i] - y[i]) < 1e-9);
        }
    }
    SUBCASE("intervals widen with the noise") {
        double narrow = 0.0, wide = 0.0;
        for (std::uint64_t r = 0; r < 5; ++r) {
            for (double sigma : {0.3, 0.6}) {
                const auto data = piecewise_linear_data(50, sigma, 200 + r);
                const auto boot = bootstrap_intervals(data.y, data.x, 1, cfg, 200, 0.95, r);
                double w = 0.0;
                for (std::size_t i = 0; i < 50; ++i) w += boot.upper[i] - boot.lower[i];
                (sigma < 0.5 ? narrow : wide) += w;
            }
        }
        CHECK(wide > narrow);
    }
    SUBCASE("thread count does not change the result") {
        const auto data = piecewise_linear_data(40, 0.3, 6);
        const auto a = bootstrap_intervals(data.y, data.x, 1, cfg, 150, 0.95, 9, 1);
        const auto b = bootstrap_intervals(data.y, data.x, 1, cfg, 150, 0.95, 9, 4);
        CHECK(a.lower == b.lower);
        CHECK(a.upper == b.upper);
        CHECK(a.sigma2_draws == b.sigma2_draws);
        CHECK(a.dropped == 0);
        CHECK(a.replicates == 150);
    }
    SUBCASE("argument checks") {
        const auto data = piecewise_linear_data(40, 0.3, 7);
        CHECK_THROWS_AS(bootstrap_intervals(data.y, data.x, 1, cfg, 99, 0.95, 1), std::domain_error);
        CHECK_THROWS_AS(bootstrap_intervals(data.y, data.x, 1, cfg, 100, 1.0, 1), std::domain_error);
    }
}

TEST_CASE("bootstrap coverage on the piecewise-linear setup") {
    double total = 0.0;
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
        const auto data = piecewise_linear_data(50, 0.3, 300 + r);
        const auto lambdas = default_lambda_grid(data.y, build_difference_operator(data.x, 1));
        MMConfig cfg;
        cfg.lambda = kfold_cv(data.y, data.x, 1, 5, lambdas, cfg).lambda;
        const auto boot = bootstrap_intervals(data.y, data.x, 1, cfg, 500, 0.95, 1000 + r);
        total += coverage(boot.lower, boot.upper, data.truth).pointwise;
    }
    MESSAGE("average pointwise coverage " << total / reps);
    CHECK(total / reps >= 0.8);
}

TEST_CASE("configuration checks") {
    MMConfig cfg;
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg = MMConfig{};
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg = MMConfig{};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    cfg = MMConfig{};
    cfg.max_iter = 0;
    CHECK_THROWS_AS(cfg.validate(), std::domain_error);
    const std::vector<double> y{1, 2, 3};
    CHECK_THROWS_AS(mm_fit(y, InputGrid::regular(4, 0, 1), 1, MMConfig{}), std::length_error);
}
