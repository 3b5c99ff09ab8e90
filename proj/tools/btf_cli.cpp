#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btf/bench.hpp"
#include "btf/gibbs.hpp"
#include "btf/io.hpp"
#include "btf/mmtf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string input;
    std::string output_dir = ".";
    std::string x_column;
    std::string y_column = "y";
    std::size_t order = 3;
    std::string prior = "gdp";
    double alpha = 1.0;
    double rho = 0.01;
    std::size_t iters = 3000;
    std::size_t burnin = 1000;
    std::size_t f_every = 1;
    bool write_draws = false;
    double lambda = 1.0;
    std::vector<double> lambda_grid;
    std::size_t lambda_count = 30;
    std::size_t folds = 10;
    std::size_t bootstrap = 0;
    double level = 0.95;
    std::uint64_t seed = 1;
    double epsilon = 1e-4;
    double tau = 1e-5;
    std::size_t max_iter = 500;
    std::size_t threads = 1;

    // bench
    std::string function = "dhm";
    std::size_t n = 100;
    std::vector<double> sigmas;
    std::size_t replications = 100;
    std::vector<std::string> methods{"btf-dexp", "btf-gdp", "mm-tf-cv"};
    bool study_grid = false;
    std::size_t retained = 2000;
};

btf::io::Dataset load(const Options& o) {
    if (o.input.empty()) throw std::invalid_argument("--input is required");
    std::optional<std::string> xcol;
    if (!o.x_column.empty()) {
        xcol = o.x_column;
    } else if (btf::io::read_csv(o.input).find("x")) {
        xcol = "x";
    }
    return btf::io::ingest_csv(o.input, xcol, o.y_column);
}

btf::MMConfig mm_config(const Options& o) {
    btf::MMConfig mm;
    mm.lambda = o.lambda;
    mm.epsilon = o.epsilon;
    mm.tau = o.tau;
    mm.max_iter = o.max_iter;
    mm.validate();
    return mm;
}

json common_json(const Options& o) {
    return {{"input", o.input},      {"x_column", o.x_column}, {"y_column", o.y_column},
            {"order", o.order},      {"seed", o.seed},         {"epsilon", o.epsilon},
            {"tau", o.tau},          {"max_iter", o.max_iter}, {"threads", o.threads},
            {"level", o.level}};
}

fs::path out_dir(const Options& o) {
    fs::path dir(o.output_dir);
    fs::create_directories(dir);
    return dir;
}

void cmd_fit(const Options& o) {
    btf::PriorSpec prior{btf::parse_prior_family(o.prior), o.alpha, o.rho};
    prior.validate();
    btf::SamplerConfig sc;
    sc.iterations = o.iters;
    sc.burnin = o.burnin;
    sc.f_every = o.f_every;
    sc.seed = o.seed;
    sc.validate();
    if (o.iters - o.burnin < 2) throw std::invalid_argument("fit: need at least two retained sweeps");

    const auto data = load(o);
    const btf::InputGrid grid(data.x);
    const auto draws = btf::run_chain(data.y, grid, o.order, prior, sc);
    const auto s = btf::summarize(draws, o.level);

    const fs::path dir = out_dir(o);
    btf::io::write_summary_csv(dir / "summary.csv", data.x, s);
    btf::io::write_scalars_csv(dir / "scalars.csv",
                               {{"sigma2_mean", s.sigma2_mean},
                                {"sigma2_lower", s.sigma2_lower},
                                {"sigma2_upper", s.sigma2_upper},
                                {"lambda_mean", s.lambda_mean},
                                {"lambda_lower", s.lambda_lower},
                                {"lambda_upper", s.lambda_upper},
                                {"guard_fraction", draws.diagnostics.guard_fraction()}});
    if (o.write_draws) btf::io::write_draws_csv(dir / "draws.csv", draws);

    json cfg = common_json(o);
    cfg.update({{"prior", o.prior}, {"alpha", o.alpha}, {"rho", o.rho}, {"iters", o.iters},
                {"burnin", o.burnin}, {"f_every", o.f_every}, {"draws", o.write_draws}});
    btf::io::write_manifest(dir / "manifest.json", "fit", cfg,
                            {{"draws", s.draws},
                             {"guard_triggered", draws.diagnostics.guard_triggered},
                             {"f_updates", draws.diagnostics.f_updates}});
}

void write_bootstrap(const Options& o, const btf::io::Dataset& data, const btf::MMConfig& mm,
                     const fs::path& dir, json& results) {
    if (o.bootstrap == 0) return;
    const auto boot = btf::bootstrap_intervals(data.y, btf::InputGrid(data.x), o.order, mm,
                                               o.bootstrap, o.level, o.seed, o.threads);
    btf::io::write_bootstrap_csv(dir / "bootstrap.csv", data.x, boot);
    results["bootstrap_replicates"] = boot.replicates;
    results["bootstrap_dropped"] = boot.dropped;
    results["sigma2_lower"] = boot.sigma2_lower;
    results["sigma2_upper"] = boot.sigma2_upper;
}

void cmd_mm(const Options& o) {
    const btf::MMConfig mm = mm_config(o);
    const auto data = load(o);
    const auto fit = btf::mm_fit(data.y, btf::InputGrid(data.x), o.order, mm);
    const fs::path dir = out_dir(o);
    btf::io::write_fit_csv(dir / "fit.csv", data.x, data.y, fit.f_hat);
    json results{{"iterations", fit.iterations},
                 {"converged", fit.converged},
                 {"stalled", fit.stalled},
                 {"objective", fit.objective}};
    write_bootstrap(o, data, mm, dir, results);
    json cfg = common_json(o);
    cfg.update({{"lambda", o.lambda}, {"bootstrap", o.bootstrap}});
    btf::io::write_manifest(dir / "manifest.json", "mm", cfg, results);
}

void cmd_cv(const Options& o) {
    btf::MMConfig mm = mm_config(o);
    const auto data = load(o);
    const btf::InputGrid grid(data.x);
    std::vector<double> lambdas = o.lambda_grid;
    if (lambdas.empty()) {
        lambdas = btf::default_lambda_grid(data.y, btf::build_difference_operator(grid, o.order),
                                           o.lambda_count);
    }
    const auto cv = btf::kfold_cv(data.y, grid, o.order, o.folds, lambdas, mm);
    mm.lambda = cv.lambda;
    const auto fit = btf::mm_fit(data.y, grid, o.order, mm);

    const fs::path dir = out_dir(o);
    btf::io::write_cv_csv(dir / "cv.csv", cv);
    btf::io::write_fit_csv(dir / "fit.csv", data.x, data.y, fit.f_hat);
    json results{{"selected_lambda", cv.lambda}, {"selected_index", cv.selected_index}};
    write_bootstrap(o, data, mm, dir, results);
    json cfg = common_json(o);
    cfg.update({{"lambda_grid", lambdas}, {"folds", o.folds}, {"bootstrap", o.bootstrap}});
    btf::io::write_manifest(dir / "manifest.json", "cv", cfg, results);
}

void cmd_bench(const Options& o) {
    btf::BenchConfig bc;
    bc.function = btf::parse_test_function(o.function);
    bc.n = o.n;
    bc.sigmas = o.sigmas.empty() ? btf::default_sigmas(bc.function) : o.sigmas;
    bc.replications = o.replications;
    bc.methods.clear();
    for (const auto& m : o.methods) bc.methods.push_back(btf::parse_method(m));
    bc.level = o.level;
    bc.seed = o.seed;
    bc.order = o.order;
    bc.burnin = o.burnin;
    bc.retained = o.retained;
    bc.f_every = o.f_every;
    bc.folds = o.folds;
    bc.lambda_count = o.lambda_count;
    bc.bootstrap = o.bootstrap == 0 ? 200 : o.bootstrap;
    bc.mm = mm_config(o);
    bc.threads = o.threads;
    if (o.study_grid) {
        // One grid per family; each Bayesian method gets its own.
        std::vector<btf::Method> bayes;
        for (auto m : bc.methods) {
            if (m != btf::Method::mm_tf_cv) bayes.push_back(m);
        }
        if (bayes.size() > 1) {
            throw std::invalid_argument("bench: --study-grid takes a single Bayesian method");
        }
        if (!bayes.empty()) {
            bc.hyperparameters = btf::study_hyperparameter_grid(
                bayes.front() == btf::Method::btf_dexp ? btf::PriorFamily::dexp
                                                       : btf::PriorFamily::gdp);
        }
    } else {
        bc.hyperparameters = {{o.alpha, o.rho}};
    }
    bc.validate();

    const auto report = btf::run_benchmark(bc);
    const fs::path dir = out_dir(o);
    btf::io::write_bench_csv(dir / "report.csv", report);
    btf::io::write_replications_csv(dir / "replications.csv", report);
    const std::string table = btf::io::format_bench_table(report);
    std::cout << table;

    json hyper = json::array();
    for (const auto& h : bc.hyperparameters) hyper.push_back({{"alpha", h.alpha}, {"rho", h.rho}});
    json cfg = common_json(o);
    cfg.update({{"function", o.function}, {"n", bc.n}, {"sigmas", bc.sigmas},
                {"replications", bc.replications}, {"methods", o.methods},
                {"hyperparameters", hyper}, {"burnin", bc.burnin}, {"retained", bc.retained},
                {"f_every", bc.f_every}, {"folds", bc.folds}, {"lambda_count", bc.lambda_count},
                {"bootstrap", bc.bootstrap}});
    double wall = 0.0;
    for (const auto& c : report.cells) wall += c.wall_seconds;
    btf::io::write_manifest(dir / "manifest.json", "bench", cfg, {{"fit_seconds", wall}});
}

void add_common(CLI::App* app, Options& o) {
    app->add_option("--output-dir", o.output_dir, "Directory for output files")->capture_default_str();
    app->add_option("--order", o.order, "Polynomial order k")->capture_default_str();
    app->add_option("--level", o.level, "Interval level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    app->add_option("--threads", o.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_input(CLI::App* app, Options& o) {
    app->add_option("--input", o.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    app->add_option("--x-column", o.x_column, "Input column (default: 'x' if present, else 1..n)");
    app->add_option("--y-column", o.y_column, "Response column")->capture_default_str();
}

void add_mm(CLI::App* app, Options& o) {
    app->add_option("--epsilon", o.epsilon, "MM perturbation, in unit-grid units")->capture_default_str();
    app->add_option("--tau", o.tau, "MM stopping tolerance")->capture_default_str();
    app->add_option("--max-iter", o.max_iter, "MM iteration cap")->capture_default_str();
}

void add_prior(CLI::App* app, Options& o) {
    app->add_option("--prior", o.prior, "Shrinkage prior")->capture_default_str()->check(CLI::IsMember({"dexp", "gdp"}));
    app->add_option("--alpha", o.alpha, "Gamma shape hyperparameter")->capture_default_str();
    app->add_option("--rho", o.rho, "Gamma rate hyperparameter")->capture_default_str();
    app->add_option("--burnin", o.burnin, "Discarded sweeps")->capture_default_str();
    app->add_option("--f-every", o.f_every, "Redraw f every m-th sweep")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian and MM trend filtering"};
    app.require_subcommand(1);
    Options o;

    auto* fit = app.add_subcommand("fit", "Gibbs sampler for Bayesian trend filtering");
    add_input(fit, o);
    add_common(fit, o);
    add_prior(fit, o);
    fit->add_option("--iters", o.iters, "Total sweeps, burn-in included")->capture_default_str();
    fit->add_flag("--draws", o.write_draws, "Also write every retained draw to draws.csv");

    auto* mm = app.add_subcommand("mm", "MM trend-filtering fit at a fixed lambda");
    add_input(mm, o);
    add_common(mm, o);
    add_mm(mm, o);
    mm->add_option("--lambda", o.lambda, "Penalty weight")->capture_default_str();
    mm->add_option("--bootstrap", o.bootstrap, "Residual-bootstrap replicates (0 = none, else >= 100)");

    auto* cv = app.add_subcommand("cv", "Choose lambda by K-fold cross-validation, then fit");
    add_input(cv, o);
    add_common(cv, o);
    add_mm(cv, o);
    cv->add_option("--lambda-grid", o.lambda_grid, "Comma-separated lambda values")->delimiter(',');
    cv->add_option("--lambda-count", o.lambda_count, "Size of the default log-spaced grid")->capture_default_str();
    cv->add_option("--folds", o.folds, "Number of folds")->capture_default_str()->check(CLI::IsMember({5, 10}));
    cv->add_option("--bootstrap", o.bootstrap, "Residual-bootstrap replicates (0 = none, else >= 100)");

    auto* bench = app.add_subcommand("bench", "Simulation study");
    add_common(bench, o);
    add_prior(bench, o);
    add_mm(bench, o);
    bench->add_option("--function", o.function, "Test function")->capture_default_str()
        ->check(CLI::IsMember({"dhm", "piecewise_linear", "piecewise_cubic"}));
    bench->add_option("--n", o.n, "Points per dataset")->capture_default_str();
    bench->add_option("--sigmas", o.sigmas, "Noise levels (default depends on the function)")->delimiter(',');
    bench->add_option("--replications", o.replications, "Datasets per noise level")->capture_default_str();
    bench->add_option("--methods", o.methods, "btf-dexp, btf-gdp, mm-tf-cv")->delimiter(',')
        ->check(CLI::IsMember({"btf-dexp", "btf-gdp", "mm-tf-cv"}));
    bench->add_flag("--study-grid", o.study_grid, "Sweep the full hyperparameter grid of the prior");
    bench->add_option("--retained", o.retained, "Retained sweeps per chain")->capture_default_str();
    bench->add_option("--folds", o.folds, "CV folds for mm-tf-cv")->capture_default_str()->check(CLI::IsMember({5, 10}));
    bench->add_option("--lambda-count", o.lambda_count, "CV lambda grid size")->capture_default_str();
    bench->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates for mm-tf-cv (default 200)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (o.bootstrap != 0 && o.bootstrap < 100) {
            throw std::invalid_argument("--bootstrap must be 0 or at least 100");
        }
        if (*fit) cmd_fit(o);
        if (*mm) cmd_mm(o);
        if (*cv) cmd_cv(o);
        if (*bench) cmd_bench(o);
    } catch (const std::exception& e) {
        std::cerr << "btf: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
