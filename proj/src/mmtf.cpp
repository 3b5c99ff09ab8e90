#include "btf/mmtf.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "btf/parallel.hpp"
#include "btf/rng.hpp"
#include "btf/stats.hpp"

namespace btf {

void MMConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::domain_error("mm: lambda must be >= 0");
    if (!(epsilon > 0.0)) throw std::domain_error("mm: epsilon must be positive");
    if (!(tau > 0.0)) throw std::domain_error("mm: tau must be positive");
    if (max_iter == 0) throw std::domain_error("mm: max_iter must be at least 1");
}

double perturbed_objective(std::span<const double> y, std::span<const double> f,
                           const DifferenceOperator& d, double lambda, double epsilon) {
    double rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - f[i]) * (y[i] - f[i]);
    const double eps = epsilon * d.unit_scale();
    double pen = 0.0;
    for (double v : d.apply(f)) {
        const double a = std::abs(v);
        pen += a - eps * std::log1p(a / eps);
    }
    return rss + lambda * pen;
}

double trend_filter_objective(std::span<const double> y, std::span<const double> f,
                              const DifferenceOperator& d, double lambda) {
    double rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - f[i]) * (y[i] - f[i]);
    double l1 = 0.0;
    for (double v : d.apply(f)) l1 += std::abs(v);
    return rss + lambda * l1;
}

FitResult mm_fit(std::span<const double> y, const DifferenceOperator& d, const MMConfig& config) {
    config.validate();
    if (y.size() != d.cols()) throw std::length_error("mm_fit: y does not match the operator");

    FitResult out;
    std::vector<double> f(y.begin(), y.end());
    double current = perturbed_objective(y, f, d, config.lambda, config.epsilon);
    if (config.record_trace) out.objective_trace.push_back(current);
    const double eps = config.epsilon * d.unit_scale();
    std::vector<double> w(d.rows());
    for (std::size_t it = 1; it <= config.max_iter; ++it) {
        const std::vector<double> df = d.apply(f);
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] = config.lambda / (2.0 * (std::abs(df[i]) + eps));
        }
        std::vector<double> next;
        if (config.lambda > 0.0) {
            BandedSPD system = d.weighted_gram(w);
            system.add_to_diagonal(1.0);
            next = BandedCholesky(system).solve(y);
        } else {
            next.assign(y.begin(), y.end());
        }
        /// Exact MM steps never raise F_eps, so a rise is solve rounding on a
        /// badly conditioned system and no further progress is possible.
        const double value = perturbed_objective(y, next, d, config.lambda, config.epsilon);
        if (value > current) {
            out.stalled = true;
            break;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) change = std::max(change, std::abs(next[i] - f[i]));
        f = std::move(next);
        current = value;
        out.iterations = it;
        if (config.record_trace) out.objective_trace.push_back(current);
        if (change < config.tau) {
            out.converged = true;
            break;
        }
    }
    out.objective = current;
    out.f_hat = std::move(f);
    return out;
}

FitResult mm_fit(std::span<const double> y, const InputGrid& grid, std::size_t k,
                 const MMConfig& config) {
    if (grid.size() != y.size()) throw std::length_error("mm_fit: grid and y differ in length");
    return mm_fit(y, build_difference_operator(grid, k), config);
}

double lambda_max(std::span<const double> y, const DifferenceOperator& d) {
    const std::vector<double> u = BandedCholesky(d.outer_gram()).solve(d.apply(y));
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return 2.0 * m;
}

std::vector<double> default_lambda_grid(std::span<const double> y, const DifferenceOperator& d,
                                        std::size_t count, double ratio) {
    if (count == 0) throw std::length_error("lambda grid: count must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::domain_error("lambda grid: ratio must be in (0, 1)");
    double top = lambda_max(y, d);
    if (!(top > 0.0)) top = 1.0;  // y already a polynomial of degree <= k
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = top;
        return grid;
    }
    const double lo = std::log(top * ratio);
    const double hi = std::log(top);
    for (std::size_t i = 0; i < count; ++i) {
        grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return grid;
}

namespace {

/// Linear interpolation of (xs, fs) at x0, constant beyond either end.
double interpolate(std::span<const double> xs, std::span<const double> fs, double x0) {
    const auto it = std::lower_bound(xs.begin(), xs.end(), x0);
    if (it == xs.begin()) return fs.front();
    if (it == xs.end()) return fs.back();
    const auto hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double t = (x0 - xs[lo]) / (xs[hi] - xs[lo]);
    return fs[lo] + t * (fs[hi] - fs[lo]);
}

}  // namespace

CVResult kfold_cv(std::span<const double> y, const InputGrid& grid, std::size_t k,
                  std::size_t folds, std::span<const double> lambda_grid,
                  const MMConfig& config_template) {
    const std::size_t n = y.size();
    if (grid.size() != n) throw std::length_error("kfold_cv: grid and y differ in length");
    if (lambda_grid.empty()) throw std::length_error("kfold_cv: empty lambda grid");
    if (folds < 2 || 2 * folds > n) {
        throw std::length_error("kfold_cv: need 2 <= folds <= n/2, got " + std::to_string(folds) +
                                " folds for n = " + std::to_string(n));
    }
    for (double l : lambda_grid) {
        if (!(l > 0.0)) throw std::domain_error("kfold_cv: lambda grid values must be positive");
    }

    std::vector<double> sse(lambda_grid.size(), 0.0);
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<double> train_x, train_y, test_x, test_y;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % folds == fold) {
                test_x.push_back(grid[i]);
                test_y.push_back(y[i]);
            } else {
                train_x.push_back(grid[i]);
                train_y.push_back(y[i]);
            }
        }
        if (train_x.size() < k + 2) {
            throw std::length_error("kfold_cv: fold " + std::to_string(fold) +
                                    " leaves too few training points for order " +
                                    std::to_string(k));
        }
        const DifferenceOperator d = build_difference_operator(InputGrid(train_x), k);
        for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
            MMConfig cfg = config_template;
            cfg.lambda = lambda_grid[l];
            cfg.record_trace = false;
            const FitResult fit = mm_fit(train_y, d, cfg);
            for (std::size_t t = 0; t < test_x.size(); ++t) {
                const double e = test_y[t] - interpolate(train_x, fit.f_hat, test_x[t]);
                sse[l] += e * e;
            }
        }
    }

    CVResult out;
    out.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
    out.cv_error.resize(sse.size());
    for (std::size_t l = 0; l < sse.size(); ++l) out.cv_error[l] = sse[l] / static_cast<double>(n);
    std::size_t best = 0;
    for (std::size_t l = 1; l < sse.size(); ++l) {
        const double e = out.cv_error[l];
        const double b = out.cv_error[best];
        if (e < b || (e == b && out.lambdas[l] > out.lambdas[best])) best = l;
    }
    out.selected_index = best;
    out.lambda = out.lambdas[best];
    return out;
}

BootstrapResult bootstrap_intervals(std::span<const double> y, const InputGrid& grid,
                                    std::size_t k, const MMConfig& config, std::size_t replicates,
                                    double level, std::uint64_t seed, std::size_t threads) {
    if (replicates < 100) throw std::domain_error("bootstrap: need at least 100 replicates");
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("bootstrap: level must be in (0, 1)");
    const std::size_t n = y.size();
    if (grid.size() != n) throw std::length_error("bootstrap: grid and y differ in length");

    const DifferenceOperator d = build_difference_operator(grid, k);
    MMConfig cfg = config;
    cfg.record_trace = false;
    BootstrapResult out;
    out.f_hat = mm_fit(y, d, cfg).f_hat;

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - out.f_hat[i];
    const double centre = stats::mean(resid);
    for (double& r : resid) r -= centre;

    struct Replicate {
        std::vector<double> f;
        double sigma2;
    };
    std::vector<std::optional<Replicate>> reps(replicates);
    parallel_for(replicates, threads, [&](std::size_t b) {
        RngStream rng(seed, b);
        std::vector<double> ystar(n);
        for (std::size_t i = 0; i < n; ++i) ystar[i] = out.f_hat[i] + resid[rng.uniform_index(n)];
        try {
            FitResult fit = mm_fit(ystar, d, cfg);
            double rss = 0.0;
            for (std::size_t i = 0; i < n; ++i) rss += (ystar[i] - fit.f_hat[i]) * (ystar[i] - fit.f_hat[i]);
            reps[b] = Replicate{std::move(fit.f_hat), rss / static_cast<double>(n)};
        } catch (const NumericalError&) {
            // dropped below
        }
    });

    std::vector<const Replicate*> ok;
    for (const auto& r : reps) {
        if (r) ok.push_back(&*r);
    }
    out.replicates = ok.size();
    out.dropped = replicates - ok.size();
    if (20 * out.dropped > replicates) {
        throw NumericalError("bootstrap: " + std::to_string(out.dropped) + " of " +
                             std::to_string(replicates) + " refits failed");
    }

    const double p_lo = 0.5 * (1.0 - level);
    const double p_hi = 1.0 - p_lo;
    out.lower.resize(n);
    out.upper.resize(n);
    std::vector<double> column(ok.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < ok.size(); ++b) column[b] = ok[b]->f[i];
        std::sort(column.begin(), column.end());
        out.lower[i] = stats::quantile_sorted(column, p_lo);
        out.upper[i] = stats::quantile_sorted(column, p_hi);
    }
    out.sigma2_draws.resize(ok.size());
    for (std::size_t b = 0; b < ok.size(); ++b) out.sigma2_draws[b] = ok[b]->sigma2;
    std::vector<double> s2 = out.sigma2_draws;
    std::sort(s2.begin(), s2.end());
    out.sigma2_lower = stats::quantile_sorted(s2, p_lo);
    out.sigma2_upper = stats::quantile_sorted(s2, p_hi);
    return out;
}

}  // namespace btf
