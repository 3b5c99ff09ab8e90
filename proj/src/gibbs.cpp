#include "btf/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "btf/stats.hpp"

namespace btf {

std::string to_string(PriorFamily family) {
    return family == PriorFamily::dexp ? "dexp" : "gdp";
}

PriorFamily parse_prior_family(const std::string& name) {
    if (name == "dexp") return PriorFamily::dexp;
    if (name == "gdp") return PriorFamily::gdp;
    throw std::invalid_argument("unknown prior family '" + name + "' (expected dexp or gdp)");
}

void PriorSpec::validate() const {
    if (!(alpha > 0.0) || !(rho > 0.0)) {
        throw std::domain_error("prior hyperparameters alpha and rho must be positive");
    }
}

void SamplerConfig::validate() const {
    if (iterations < burnin) {
        throw std::invalid_argument("sampler: iterations must be at least burnin");
    }
    if (f_every == 0) throw std::invalid_argument("sampler: f_every must be at least 1");
    if (!(guard.threshold > 0.0)) throw std::domain_error("sampler: guard threshold must be positive");
}

InverseGaussianParams omega_conditional(double lambda, double sigma, double abs_df) {
    return {lambda * sigma / abs_df, lambda * lambda};
}

InverseGammaParams sigma2_conditional(std::span<const double> y, std::span<const double> f,
                                      std::span<const double> df,
                                      std::span<const double> omega) {
    double rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - f[i]) * (y[i] - f[i]);
    double penalty = 0.0;
    for (std::size_t j = 0; j < df.size(); ++j) penalty += df[j] * df[j] / omega[j];
    return {static_cast<double>(y.size()), 0.5 * rss + 0.5 * penalty};
}

LambdaConditional lambda_conditional(const PriorSpec& prior, std::span<const double> omega,
                                     std::span<const double> df, double sigma) {
    const double shape = static_cast<double>(df.size()) + prior.alpha;
    if (prior.family == PriorFamily::dexp) {
        double s = 0.0;
        for (double w : omega) s += w;
        return {{shape, 0.5 * s + prior.rho}, true};
    }
    double l1 = 0.0;
    for (double v : df) l1 += std::abs(v);
    return {{shape, l1 / sigma + prior.rho}, false};
}

namespace {

bool below_threshold(std::span<const double> df, double threshold) {
    return std::any_of(df.begin(), df.end(), [&](double v) { return std::abs(v) < threshold; });
}

}  // namespace

FStep step_f(const ChainState& state, std::span<const double> y, const DifferenceOperator& d,
             const GuardConfig& guard, RngStream& rng) {
    std::vector<double> w(state.omega.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = 1.0 / state.omega[j];
    BandedSPD precision = d.weighted_gram(w);
    precision.add_to_diagonal(1.0);
    const BandedCholesky chol(precision);
    const std::vector<double> mean = gaussian_mean(y, chol);

    FStep out;
    for (;;) {
        out.f = mean;
        add_gaussian_fluctuation(rng, out.f, chol, state.sigma2);
        out.df = d.apply(out.f);
        if (!below_threshold(out.df, guard.threshold)) break;
        if (out.redraws == guard.max_attempts) {
            out.exhausted = true;
            break;
        }
        ++out.redraws;
    }
    return out;
}

std::vector<double> step_omega(const ChainState& state, std::span<const double> df,
                               double threshold, RngStream& rng) {
    const double sigma = std::sqrt(state.sigma2);
    std::vector<double> omega(df.size());
    for (std::size_t j = 0; j < df.size(); ++j) {
        const double a = std::max(std::abs(df[j]), threshold);
        const auto p = omega_conditional(state.lambda, sigma, a);
        omega[j] = 1.0 / draw_inverse_gaussian(rng, p.mean, p.shape);
    }
    return omega;
}

double step_lambda(const ChainState& state, std::span<const double> df, const PriorSpec& prior,
                   RngStream& rng) {
    const auto c = lambda_conditional(prior, state.omega, df, std::sqrt(state.sigma2));
    const double g = draw_gamma(rng, c.gamma.shape, c.gamma.rate);
    return c.on_square ? std::sqrt(g) : g;
}

double step_sigma2(const ChainState& state, std::span<const double> y,
                   std::span<const double> df, RngStream& rng) {
    const auto p = sigma2_conditional(y, state.f, df, state.omega);
    if (!(p.scale > 0.0)) {
        throw NumericalError("sigma^2 full conditional has zero scale (f fits y exactly)");
    }
    return draw_inverse_gamma(rng, p.shape, p.scale);
}

ChainState initial_state(std::span<const double> y, const DifferenceOperator& d) {
    const double c = d.unit_scale();
    ChainState s;
    s.f.assign(y.begin(), y.end());
    s.omega.assign(d.rows(), c * c);
    s.sigma2 = stats::variance(y);
    if (!(s.sigma2 > 0.0)) throw std::domain_error("response has zero sample variance");
    s.lambda = 1.0 / c;
    return s;
}

ChainDraws run_chain(std::span<const double> y, const InputGrid& grid, std::size_t k,
                     const PriorSpec& prior, const SamplerConfig& config) {
    if (grid.size() != y.size()) throw std::length_error("run_chain: grid and y differ in length");
    return run_chain(y, build_difference_operator(grid, k), prior, config);
}

ChainDraws run_chain(std::span<const double> y, const DifferenceOperator& d,
                     const PriorSpec& prior, const SamplerConfig& config) {
    prior.validate();
    config.validate();
    if (y.size() != d.cols()) throw std::length_error("run_chain: y does not match the operator");

    RngStream rng(config.seed, config.stream);
    ChainState state = initial_state(y, d);
    std::vector<double> df = d.apply(state.f);

    ChainDraws out;
    out.states.reserve(config.iterations - config.burnin);
    out.iteration.reserve(config.iterations - config.burnin);
    auto& diag = out.diagnostics;
    diag.min_abs_df_to_omega = std::numeric_limits<double>::infinity();
    const double threshold = config.guard.threshold;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        try {
            if (it % config.f_every == 0) {
                FStep fs = step_f(state, y, d, config.guard, rng);
                ++diag.f_updates;
                if (fs.redraws > 0) ++diag.guard_triggered;
                diag.guard_redraws += fs.redraws;
                if (fs.exhausted) ++diag.guard_exhausted;
                state.f = std::move(fs.f);
                df = std::move(fs.df);
            }
            for (double v : df) {
                const double a = std::abs(v);
                if (a < threshold) ++diag.clamped_entries;
                diag.min_abs_df_to_omega = std::min(diag.min_abs_df_to_omega, std::max(a, threshold));
            }
            state.omega = step_omega(state, df, threshold, rng);
            state.lambda = step_lambda(state, df, prior, rng);
            state.sigma2 = step_sigma2(state, y, df, rng);
        } catch (const NumericalError& e) {
            throw NumericalError("sweep " + std::to_string(it) + ": " + e.what());
        }
        ++diag.sweeps;
        if (it >= config.burnin) {
            out.iteration.push_back(it);
            out.states.push_back(state);
        }
    }
    return out;
}

PosteriorSummary summarize(const ChainDraws& draws, double level) {
    const std::size_t count = draws.states.size();
    if (count < 2) throw std::length_error("summarize: need at least two retained draws");
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("summarize: level must be in (0, 1)");
    const double p_lo = 0.5 * (1.0 - level);
    const double p_hi = 1.0 - p_lo;
    const std::size_t n = draws.states.front().f.size();

    PosteriorSummary s;
    s.level = level;
    s.draws = count;
    s.f_mean.resize(n);
    s.f_lower.resize(n);
    s.f_upper.resize(n);
    std::vector<double> column(count);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < count; ++t) column[t] = draws.states[t].f[i];
        s.f_mean[i] = stats::mean(column);
        std::sort(column.begin(), column.end());
        s.f_lower[i] = stats::quantile_sorted(column, p_lo);
        s.f_upper[i] = stats::quantile_sorted(column, p_hi);
    }
    for (std::size_t t = 0; t < count; ++t) column[t] = draws.states[t].sigma2;
    s.sigma2_mean = stats::mean(column);
    std::sort(column.begin(), column.end());
    s.sigma2_lower = stats::quantile_sorted(column, p_lo);
    s.sigma2_upper = stats::quantile_sorted(column, p_hi);
    for (std::size_t t = 0; t < count; ++t) column[t] = draws.states[t].lambda;
    s.lambda_mean = stats::mean(column);
    std::sort(column.begin(), column.end());
    s.lambda_lower = stats::quantile_sorted(column, p_lo);
    s.lambda_upper = stats::quantile_sorted(column, p_hi);
    return s;
}

}  // namespace btf
