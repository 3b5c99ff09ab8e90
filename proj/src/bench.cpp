#include "btf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "btf/parallel.hpp"
#include "btf/stats.hpp"

namespace btf {

TestFunction TestFunction::dhm() { return {}; }

TestFunction TestFunction::piecewise_linear() {
    TestFunction fn;
    fn.kind = FunctionKind::piecewise_linear;
    fn.start = 0.0;
    fn.knots = {20.0, 45.0, 80.0};
    fn.slopes = {0.1, -0.12, 0.08, -0.05};
    return fn;
}

TestFunction TestFunction::piecewise_cubic() {
    TestFunction fn;
    fn.kind = FunctionKind::piecewise_cubic;
    return fn;
}

TestFunction TestFunction::custom(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::length_error("custom function: need at least two (x, y) pairs of equal length");
    }
    (void)InputGrid(xs);  // validates ordering
    TestFunction fn;
    fn.kind = FunctionKind::custom;
    fn.table_x = std::move(xs);
    fn.table_y = std::move(ys);
    return fn;
}

double TestFunction::domain_lo() const {
    switch (kind) {
        case FunctionKind::dhm: return 0.0;
        case FunctionKind::custom: return table_x.front();
        default: return 1.0;
    }
}

double TestFunction::domain_hi() const {
    switch (kind) {
        case FunctionKind::dhm: return 1.0;
        case FunctionKind::custom: return table_x.back();
        default: return 100.0;
    }
}

std::string TestFunction::name() const {
    switch (kind) {
        case FunctionKind::dhm: return "dhm";
        case FunctionKind::piecewise_linear: return "piecewise_linear";
        case FunctionKind::piecewise_cubic: return "piecewise_cubic";
        case FunctionKind::custom: return "custom";
    }
    return "unknown";
}

TestFunction parse_test_function(const std::string& name) {
    if (name == "dhm") return TestFunction::dhm();
    if (name == "piecewise_linear") return TestFunction::piecewise_linear();
    if (name == "piecewise_cubic") return TestFunction::piecewise_cubic();
    throw std::invalid_argument("unknown test function '" + name + "'");
}

double eval_function(const TestFunction& fn, double x) {
    if (!(x >= fn.domain_lo() && x <= fn.domain_hi())) {
        throw std::domain_error(fn.name() + ": x = " + std::to_string(x) + " outside [" +
                                std::to_string(fn.domain_lo()) + ", " +
                                std::to_string(fn.domain_hi()) + "]");
    }
    switch (fn.kind) {
        case FunctionKind::dhm:
            return std::exp(-7.5 * x) * std::cos(10.0 * std::numbers::pi * x);
        case FunctionKind::piecewise_linear: {
            if (fn.slopes.size() != fn.knots.size() + 1) {
                throw std::length_error("piecewise_linear: need one more slope than knots");
            }
            double value = fn.start;
            double left = fn.domain_lo();
            for (std::size_t s = 0; s < fn.slopes.size(); ++s) {
                const double right = s < fn.knots.size() ? fn.knots[s] : fn.domain_hi();
                value += fn.slopes[s] * (std::min(x, right) - left);
                if (x <= right) break;
                left = right;
            }
            return value;
        }
        case FunctionKind::piecewise_cubic: {
            const double t = (x - 1.0) / 99.0;
            const double a = std::max(t - 1.0 / 3.0, 0.0);
            const double b = std::max(t - 2.0 / 3.0, 0.0);
            return 200.0 * t - 1200.0 * t * t + 1600.0 * t * t * t - 2100.0 * a * a * a +
                   700.0 * b * b * b;
        }
        case FunctionKind::custom: {
            const auto it = std::lower_bound(fn.table_x.begin(), fn.table_x.end(), x);
            const auto hi = static_cast<std::size_t>(it - fn.table_x.begin());
            if (fn.table_x[hi] == x) return fn.table_y[hi];
            const std::size_t lo = hi - 1;
            const double t = (x - fn.table_x[lo]) / (fn.table_x[hi] - fn.table_x[lo]);
            return fn.table_y[lo] + t * (fn.table_y[hi] - fn.table_y[lo]);
        }
    }
    throw std::logic_error("unhandled function kind");
}

SimulatedData simulate_dataset(const TestFunction& fn, std::size_t n, double sigma,
                               RngStream& rng) {
    if (n < 4) throw std::length_error("simulate_dataset: need n >= 4");
    if (!(sigma >= 0.0)) throw std::domain_error("simulate_dataset: sigma must be >= 0");
    SimulatedData d;
    d.x = InputGrid::regular(n, fn.domain_lo(), fn.domain_hi());
    d.truth.resize(n);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.truth[i] = eval_function(fn, d.x[i]);
        d.y[i] = d.truth[i] + sigma * rng.normal();
    }
    return d;
}

double mse(std::span<const double> f_hat, std::span<const double> f_true) {
    if (f_hat.size() != f_true.size() || f_hat.empty()) {
        throw std::length_error("mse: vectors must be nonempty and of equal length");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < f_hat.size(); ++i) s += (f_hat[i] - f_true[i]) * (f_hat[i] - f_true[i]);
    return s / static_cast<double>(f_hat.size());
}

Coverage coverage(std::span<const double> lower, std::span<const double> upper,
                  std::span<const double> truth) {
    if (lower.size() != upper.size() || lower.size() != truth.size() || truth.empty()) {
        throw std::length_error("coverage: vectors must be nonempty and of equal length");
    }
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (lower[i] > upper[i]) {
            throw std::domain_error("coverage: lower > upper at index " + std::to_string(i));
        }
        if (lower[i] <= truth[i] && truth[i] <= upper[i]) ++inside;
    }
    return {static_cast<double>(inside) / static_cast<double>(truth.size()), inside == truth.size()};
}

std::string to_string(Method method) {
    switch (method) {
        case Method::btf_dexp: return "btf-dexp";
        case Method::btf_gdp: return "btf-gdp";
        case Method::mm_tf_cv: return "mm-tf-cv";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "btf-dexp") return Method::btf_dexp;
    if (name == "btf-gdp") return Method::btf_gdp;
    if (name == "mm-tf-cv") return Method::mm_tf_cv;
    throw std::invalid_argument("unknown method '" + name + "' (btf-dexp, btf-gdp, mm-tf-cv)");
}

std::vector<Hyperparameters> study_hyperparameter_grid(PriorFamily family) {
    const std::vector<double> alphas{0.1, 0.5, 1.0, 1.5, 2.0};
    const std::vector<double> rhos = family == PriorFamily::dexp
                                         ? std::vector<double>{1e-4, 1e-3, 1e-2, 0.1, 1.0}
                                         : std::vector<double>{1e-3, 1e-2, 0.1, 1.0};
    std::vector<Hyperparameters> grid;
    for (double a : alphas) {
        for (double r : rhos) grid.push_back({a, r});
    }
    return grid;
}

std::vector<double> default_sigmas(const TestFunction& fn) {
    if (fn.kind == FunctionKind::piecewise_linear || fn.kind == FunctionKind::piecewise_cubic) {
        return {0.75, 1.0, 1.25};
    }
    return {0.025, 0.05, 0.075};
}

void BenchConfig::validate() const {
    if (replications == 0) throw std::invalid_argument("bench: replications must be >= 1");
    if (sigmas.empty()) throw std::invalid_argument("bench: no noise levels");
    for (double s : sigmas) {
        if (!(s >= 0.0)) throw std::domain_error("bench: noise levels must be >= 0");
    }
    if (methods.empty()) throw std::invalid_argument("bench: no methods");
    if (hyperparameters.empty()) throw std::invalid_argument("bench: empty hyperparameter grid");
    for (const auto& h : hyperparameters) PriorSpec{PriorFamily::gdp, h.alpha, h.rho}.validate();
    if (retained < 2) throw std::invalid_argument("bench: need at least two retained sweeps");
    if (f_every == 0) throw std::invalid_argument("bench: f_every must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("bench: level must be in (0, 1)");
    if (n < order + 2 || n < 4) throw std::length_error("bench: n too small for the order");
}

namespace {

struct Cell {
    Method method;
    Hyperparameters hyper;
};

std::vector<Cell> enumerate_cells(const BenchConfig& config) {
    std::vector<Cell> cells;
    for (Method m : config.methods) {
        if (m == Method::mm_tf_cv) {
            cells.push_back({m, {0.0, 0.0}});
        } else {
            for (const auto& h : config.hyperparameters) cells.push_back({m, h});
        }
    }
    return cells;
}

// Stream ids: 2 bits purpose, 10 bits cell, 12 bits sigma index, 40 bits replication.
std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t cell, std::uint64_t sigma_index,
                        std::uint64_t replication) {
    return (purpose << 62) | (cell << 52) | (sigma_index << 40) | replication;
}

constexpr std::uint64_t kDataPurpose = 0;
constexpr std::uint64_t kChainPurpose = 1;
constexpr std::uint64_t kBootstrapPurpose = 2;

ReplicationRecord fit_bayesian(const BenchConfig& config, const Cell& cell,
                               const SimulatedData& data, const DifferenceOperator& d,
                               double sigma, std::uint64_t stream) {
    ReplicationRecord rec;
    PriorSpec prior{cell.method == Method::btf_dexp ? PriorFamily::dexp : PriorFamily::gdp,
                    cell.hyper.alpha, cell.hyper.rho};
    SamplerConfig sc;
    sc.burnin = config.burnin;
    sc.iterations = config.burnin + config.retained;
    sc.f_every = config.f_every;
    sc.guard = config.guard;
    sc.seed = config.seed;
    sc.stream = stream;
    const ChainDraws draws = run_chain(data.y, d, prior, sc);
    const PosteriorSummary s = summarize(draws, config.level);
    rec.mse = mse(s.f_mean, data.truth);
    const Coverage cov = coverage(s.f_lower, s.f_upper, data.truth);
    rec.function_coverage = cov.pointwise;
    rec.simultaneous_coverage = cov.simultaneous;
    const double s2 = sigma * sigma;
    rec.variance_covered = s.sigma2_lower <= s2 && s2 <= s.sigma2_upper;
    rec.guard_fraction = draws.diagnostics.guard_fraction();
    rec.guard_triggered = draws.diagnostics.guard_triggered;
    rec.f_updates = draws.diagnostics.f_updates;
    rec.min_abs_df_to_omega = draws.diagnostics.min_abs_df_to_omega;
    rec.lambda = s.lambda_mean;
    return rec;
}

ReplicationRecord fit_frequentist(const BenchConfig& config, const SimulatedData& data,
                                  const DifferenceOperator& d, double sigma, std::uint64_t stream) {
    ReplicationRecord rec;
    const std::vector<double> lambdas =
        default_lambda_grid(data.y, d, config.lambda_count, config.lambda_ratio);
    const CVResult cv = kfold_cv(data.y, data.x, config.order, config.folds, lambdas, config.mm);
    MMConfig mm = config.mm;
    mm.lambda = cv.lambda;
    // The bootstrap takes a 64-bit seed and numbers its replicates 0..B-1.
    const std::uint64_t boot_seed = config.seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    const BootstrapResult boot = bootstrap_intervals(data.y, data.x, config.order, mm,
                                                     config.bootstrap, config.level, boot_seed, 1);
    rec.mse = mse(boot.f_hat, data.truth);
    const Coverage cov = coverage(boot.lower, boot.upper, data.truth);
    rec.function_coverage = cov.pointwise;
    rec.simultaneous_coverage = cov.simultaneous;
    const double s2 = sigma * sigma;
    rec.variance_covered = boot.sigma2_lower <= s2 && s2 <= boot.sigma2_upper;
    rec.lambda = cv.lambda;
    return rec;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config) {
    config.validate();
    const std::vector<Cell> cells = enumerate_cells(config);
    const std::size_t reps = config.replications;
    const std::size_t jobs = config.sigmas.size() * reps;

    std::vector<std::vector<ReplicationRecord>> per_job(jobs);
    parallel_for(jobs, config.threads, [&](std::size_t job) {
        const std::size_t si = job / reps;
        const std::size_t r = job % reps;
        const double sigma = config.sigmas[si];
        RngStream data_rng(config.seed, stream_id(kDataPurpose, 0, si, r));
        const SimulatedData data = simulate_dataset(config.function, config.n, sigma, data_rng);
        const DifferenceOperator d = build_difference_operator(data.x, config.order);

        auto& out = per_job[job];
        out.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const Cell& cell = cells[c];
            const auto t0 = std::chrono::steady_clock::now();
            ReplicationRecord rec;
            try {
                if (cell.method == Method::mm_tf_cv) {
                    rec = fit_frequentist(config, data, d, sigma,
                                          stream_id(kBootstrapPurpose, c, si, r));
                } else {
                    rec = fit_bayesian(config, cell, data, d, sigma,
                                       stream_id(kChainPurpose, c, si, r));
                }
            } catch (const std::exception& e) {
                rec = ReplicationRecord{};
                rec.failed = true;
                std::cerr << "bench: " << to_string(cell.method) << " sigma=" << sigma
                          << " replication " << r << " failed: " << e.what() << '\n';
            }
            rec.method = cell.method;
            rec.sigma = sigma;
            rec.hyper = cell.hyper;
            rec.replication = r;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.push_back(rec);
        }
    });

    BenchReport report;
    for (auto& job : per_job) {
        for (auto& rec : job) report.records.push_back(std::move(rec));
    }

    for (std::size_t si = 0; si < config.sigmas.size(); ++si) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            CellSummary cs;
            cs.method = cells[c].method;
            cs.hyper = cells[c].hyper;
            cs.sigma = config.sigmas[si];
            std::vector<double> m, fc, sc, vc;
            std::size_t triggered = 0, updates = 0;
            double min_df = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < reps; ++r) {
                const ReplicationRecord& rec = report.records[(si * reps + r) * cells.size() + c];
                cs.wall_seconds += rec.seconds;
                if (rec.failed) {
                    ++cs.failures;
                    continue;
                }
                m.push_back(rec.mse);
                fc.push_back(rec.function_coverage);
                sc.push_back(rec.simultaneous_coverage ? 1.0 : 0.0);
                vc.push_back(rec.variance_covered ? 1.0 : 0.0);
                triggered += rec.guard_triggered;
                updates += rec.f_updates;
                if (cs.bayesian()) min_df = std::min(min_df, rec.min_abs_df_to_omega);
            }
            if (50 * cs.failures > reps) {
                throw std::runtime_error("bench: " + to_string(cs.method) + " at sigma " +
                                         std::to_string(cs.sigma) + " failed in " +
                                         std::to_string(cs.failures) + " of " +
                                         std::to_string(reps) + " replications");
            }
            cs.replications = m.size();
            if (!m.empty()) {
                const double root = std::sqrt(static_cast<double>(m.size()));
                cs.mse_mean = stats::mean(m);
                cs.mse_sd = stats::sd(m);
                cs.function_coverage_mean = stats::mean(fc);
                cs.function_coverage_se = stats::sd(fc) / root;
                cs.simultaneous_coverage_mean = stats::mean(sc);
                cs.simultaneous_coverage_se = stats::sd(sc) / root;
                cs.variance_coverage_mean = stats::mean(vc);
                cs.variance_coverage_se = stats::sd(vc) / root;
            }
            cs.guard_fraction = updates == 0 ? 0.0 : static_cast<double>(triggered) / static_cast<double>(updates);
            cs.min_abs_df_to_omega = cs.bayesian() ? min_df : 0.0;
            report.cells.push_back(cs);
        }
    }
    return report;
}

}  // namespace btf
