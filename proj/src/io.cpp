#include "btf/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace btf::io {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw InputError(where + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

std::optional<std::size_t> CsvTable::find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        auto fields = split_line(line, where);
        for (auto& f : fields) f = trim(std::move(f));
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw InputError(where + ": expected " + std::to_string(table.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line.push_back(lineno);
    }
    if (!have_header) throw InputError(path.string() + ": empty file (a header row is required)");
    return table;
}

std::optional<double> parse_double(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return {buf, ptr};
}

Dataset ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& x_column,
                   const std::string& y_column) {
    const CsvTable table = read_csv(path);
    const auto yc = table.find(y_column);
    if (!yc) throw InputError(path.string() + ": no column named '" + y_column + "'");
    std::optional<std::size_t> xc;
    if (x_column) {
        xc = table.find(*x_column);
        if (!xc) throw InputError(path.string() + ": no column named '" + *x_column + "'");
    }
    if (table.rows.empty()) throw InputError(path.string() + ": no data rows");

    const std::size_t n = table.rows.size();
    std::vector<double> x(n), y(n);
    auto value = [&](std::size_t r, std::size_t c) {
        const std::string& field = table.rows[r][c];
        const std::string where = path.string() + ":" + std::to_string(table.line[r]);
        if (field.empty() || field == "NA" || field == "NaN" || field == "nan") {
            throw InputError(where + ": missing value in column '" + table.header[c] + "'");
        }
        const auto v = parse_double(field);
        if (!v) {
            throw InputError(where + ": cannot parse '" + field + "' in column '" +
                             table.header[c] + "' as a finite number");
        }
        return *v;
    };
    for (std::size_t r = 0; r < n; ++r) {
        y[r] = value(r, *yc);
        x[r] = xc ? value(r, *xc) : static_cast<double>(r + 1);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    Dataset out;
    out.x.reserve(n);
    out.y.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && x[order[i]] == x[order[i - 1]]) {
            throw InputError(path.string() + ": duplicate x = " + format_double(x[order[i]]) +
                             " on lines " + std::to_string(table.line[order[i - 1]]) + " and " +
                             std::to_string(table.line[order[i]]));
        }
        out.x.push_back(x[order[i]]);
        out.y.push_back(y[order[i]]);
    }
    return out;
}

void write_summary_csv(const std::filesystem::path& path, std::span<const double> x,
                       const PosteriorSummary& s) {
    auto out = open_output(path);
    out << "x,f_mean,f_lower,f_upper\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << format_double(x[i]) << ',' << format_double(s.f_mean[i]) << ','
            << format_double(s.f_lower[i]) << ',' << format_double(s.f_upper[i]) << '\n';
    }
}

void write_scalars_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& scalars) {
    auto out = open_output(path);
    out << "name,value\n";
    for (const auto& [name, v] : scalars) out << name << ',' << format_double(v) << '\n';
}

void write_draws_csv(const std::filesystem::path& path, const ChainDraws& draws) {
    auto out = open_output(path);
    out << "iteration,parameter,index,value\n";
    for (std::size_t s = 0; s < draws.states.size(); ++s) {
        const std::string it = std::to_string(draws.iteration[s]);
        const ChainState& st = draws.states[s];
        for (std::size_t i = 0; i < st.f.size(); ++i) {
            out << it << ",f," << i << ',' << format_double(st.f[i]) << '\n';
        }
        for (std::size_t i = 0; i < st.omega.size(); ++i) {
            out << it << ",omega," << i << ',' << format_double(st.omega[i]) << '\n';
        }
        out << it << ",sigma2,0," << format_double(st.sigma2) << '\n';
        out << it << ",lambda,0," << format_double(st.lambda) << '\n';
    }
}

void write_fit_csv(const std::filesystem::path& path, std::span<const double> x,
                   std::span<const double> y, std::span<const double> f_hat) {
    auto out = open_output(path);
    out << "x,y,f_hat\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << format_double(x[i]) << ',' << format_double(y[i]) << ',' << format_double(f_hat[i])
            << '\n';
    }
}

void write_cv_csv(const std::filesystem::path& path, const CVResult& cv) {
    auto out = open_output(path);
    out << "lambda,cv_error,selected\n";
    for (std::size_t l = 0; l < cv.lambdas.size(); ++l) {
        out << format_double(cv.lambdas[l]) << ',' << format_double(cv.cv_error[l]) << ','
            << (l == cv.selected_index ? 1 : 0) << '\n';
    }
}

void write_bootstrap_csv(const std::filesystem::path& path, std::span<const double> x,
                         const BootstrapResult& boot) {
    auto out = open_output(path);
    out << "x,f_hat,lower,upper\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << format_double(x[i]) << ',' << format_double(boot.f_hat[i]) << ','
            << format_double(boot.lower[i]) << ',' << format_double(boot.upper[i]) << '\n';
    }
}

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report) {
    auto out = open_output(path);
    out << "method,sigma,alpha,rho,replications,failures,mse_mean,mse_sd,"
           "function_coverage,function_coverage_se,simultaneous_coverage,"
           "simultaneous_coverage_se,variance_coverage,variance_coverage_se,"
           "guard_fraction,min_abs_df_to_omega\n";
    for (const CellSummary& c : report.cells) {
        out << to_string(c.method) << ',' << format_double(c.sigma) << ','
            << format_double(c.hyper.alpha) << ',' << format_double(c.hyper.rho) << ','
            << c.replications << ',' << c.failures << ',' << format_double(c.mse_mean) << ','
            << format_double(c.mse_sd) << ',' << format_double(c.function_coverage_mean) << ','
            << format_double(c.function_coverage_se) << ','
            << format_double(c.simultaneous_coverage_mean) << ','
            << format_double(c.simultaneous_coverage_se) << ','
            << format_double(c.variance_coverage_mean) << ','
            << format_double(c.variance_coverage_se) << ',' << format_double(c.guard_fraction)
            << ',' << format_double(c.min_abs_df_to_omega) << '\n';
    }
}

void write_replications_csv(const std::filesystem::path& path, const BenchReport& report) {
    auto out = open_output(path);
    out << "method,sigma,alpha,rho,replication,failed,mse,function_coverage,"
           "simultaneous_coverage,variance_covered,guard_fraction,lambda\n";
    for (const ReplicationRecord& r : report.records) {
        out << to_string(r.method) << ',' << format_double(r.sigma) << ','
            << format_double(r.hyper.alpha) << ',' << format_double(r.hyper.rho) << ','
            << r.replication << ',' << (r.failed ? 1 : 0) << ',' << format_double(r.mse) << ','
            << format_double(r.function_coverage) << ',' << (r.simultaneous_coverage ? 1 : 0)
            << ',' << (r.variance_covered ? 1 : 0) << ',' << format_double(r.guard_fraction)
            << ',' << format_double(r.lambda) << '\n';
    }
}

std::string format_bench_table(const BenchReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "method" << std::right << std::setw(8) << "sigma"
       << std::setw(7) << "alpha" << std::setw(8) << "rho" << std::setw(6) << "R"
       << std::setw(12) << "mse_mean" << std::setw(12) << "mse_sd" << std::setw(9) << "f_cov"
       << std::setw(9) << "f_simul" << std::setw(9) << "s2_cov" << std::setw(9) << "guard"
       << std::setw(10) << "seconds" << '\n';
    for (const CellSummary& c : report.cells) {
        os << std::left << std::setw(10) << to_string(c.method) << std::right
           << std::setw(8) << std::setprecision(4) << c.sigma;
        if (c.bayesian()) {
            os << std::setw(7) << c.hyper.alpha << std::setw(8) << c.hyper.rho;
        } else {
            os << std::setw(7) << "-" << std::setw(8) << "-";
        }
        os << std::setw(6) << c.replications << std::scientific << std::setprecision(3)
           << std::setw(12) << c.mse_mean << std::setw(12) << c.mse_sd << std::fixed
           << std::setprecision(3) << std::setw(9) << c.function_coverage_mean << std::setw(9)
           << c.simultaneous_coverage_mean << std::setw(9) << c.variance_coverage_mean
           << std::setw(9) << c.guard_fraction << std::setprecision(1) << std::setw(10)
           << c.wall_seconds << std::defaultfloat << '\n';
    }
    return os.str();
}

void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const nlohmann::json& config, const nlohmann::json& results) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);

    nlohmann::json m;
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    if (!results.is_null()) m["results"] = results;
    m["timestamp"] = stamp;
    auto out = open_output(path);
    out << m.dump(2) << '\n';
}

}  // namespace btf::io
