#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btf/bench.hpp"
#include "btf/gibbs.hpp"
#include "btf/mmtf.hpp"
#include "btf/operator.hpp"

namespace btf::io {

inline constexpr const char* kVersion = "btf 0.1.0";

/// Thrown for malformed input files; the message names the file and line.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A comma-separated table with a required header row. Fields may be
/// double-quoted; blank lines are skipped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line;  ///< one-based file line of each row

    std::optional<std::size_t> find(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Locale-independent; rejects trailing characters and non-finite values.
std::optional<double> parse_double(std::string_view text);

/// Shortest round-trip representation, '.' decimal separator.
std::string format_double(double v);

struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
};

/// Reads y (and x when x_column is given; otherwise x = 1..n), sorts rows by x.
/// Errors name the offending line for missing or unparsable values and for
/// duplicated x.
Dataset ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& x_column,
                   const std::string& y_column);

/// x,f_mean,f_lower,f_upper
void write_summary_csv(const std::filesystem::path& path, std::span<const double> x,
                       const PosteriorSummary& summary);

/// name,value
void write_scalars_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& scalars);

/// iteration,parameter,index,value with parameter in {f, omega, sigma2, lambda}
void write_draws_csv(const std::filesystem::path& path, const ChainDraws& draws);

/// x,y,f_hat
void write_fit_csv(const std::filesystem::path& path, std::span<const double> x,
                   std::span<const double> y, std::span<const double> f_hat);

/// lambda,cv_error,selected
void write_cv_csv(const std::filesystem::path& path, const CVResult& cv);

/// x,f_hat,lower,upper
void write_bootstrap_csv(const std::filesystem::path& path, std::span<const double> x,
                         const BootstrapResult& boot);

/// One row per method x sigma x hyperparameter cell. Wall time is left out so
/// the file is reproducible.
void write_bench_csv(const std::filesystem::path& path, const BenchReport& report);

/// One row per fit, for box plots of the MSE distribution.
void write_replications_csv(const std::filesystem::path& path, const BenchReport& report);

/// Aligned, human-readable version of the cell table.
std::string format_bench_table(const BenchReport& report);

/// Writes manifest.json: version, command, config and a timestamp.
void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const nlohmann::json& config, const nlohmann::json& results = {});

}  // namespace btf::io
