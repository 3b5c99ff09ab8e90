#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "btf/bench.hpp"
#include "btf/io.hpp"

namespace fs = std::filesystem;
using namespace btf;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("btf_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path file(const std::string& name, const std::string& content) const {
        std::ofstream(path / name, std::ios::binary) << content;
        return path / name;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(BTF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// DHM at sigma = 0.05 on 100 points, plus the truth.
fs::path write_dhm(const TempDir& dir, std::vector<double>& truth) {
    RngStream rng(2024, 0);
    const auto d = simulate_dataset(TestFunction::dhm(), 100, 0.05, rng);
    truth = d.truth;
    std::string csv = "x,y\n";
    for (std::size_t i = 0; i < d.y.size(); ++i) {
        csv += io::format_double(d.x[i]) + "," + io::format_double(d.y[i]) + "\n";
    }
    return dir.file("dhm.csv", csv);
}

}  // namespace

TEST_CASE("ingest a two-column file") {
    TempDir dir;
    const auto data = io::ingest_csv(dir.file("a.csv", "x,y\n1,2\n2,3\n"), "x", "y");
    CHECK(data.x == std::vector<double>{1, 2});
    CHECK(data.y == std::vector<double>{2, 3});
}

TEST_CASE("ingest a y-only file") {
    TempDir dir;
    const auto data = io::ingest_csv(dir.file("a.csv", "y\n5\n4\n3\n2\n1\n"), std::nullopt, "y");
    CHECK(data.x == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(data.y == std::vector<double>{5, 4, 3, 2, 1});
}

TEST_CASE("ingest sorts rows and tolerates quoting, CRLF and blank lines") {
    TempDir dir;
    const auto data = io::ingest_csv(
        dir.file("a.csv", "\"label\",x,y\r\n\"b, second\",2,20\r\n\r\na,1,10\r\nc,3.5e0,-1E-2\r\n"), "x", "y");
    CHECK(data.x == std::vector<double>{1, 2, 3.5});
    CHECK(data.y == std::vector<double>{10, 20, -0.01});
}

TEST_CASE("ingest errors carry line numbers") {
    TempDir dir;
    auto message = [&](const std::string& content, std::optional<std::string> x = "x") {
        try {
            io::ingest_csv(dir.file("bad.csv", content), x, "y");
        } catch (const io::InputError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    const auto dup = message("x,y\n1,1\n3,2\n2,3\n3,4\n");
    CHECK(dup.find("duplicate x = 3") != std::string::npos);
    CHECK(dup.find("lines 3 and 5") != std::string::npos);
    CHECK(message("x,y\n1,1\n2,\n").find(":3: missing value") != std::string::npos);
    CHECK(message("x,y\n1,1\n2,NA\n").find(":3: missing value") != std::string::npos);
    CHECK(message("x,y\n1,1\n2,abc\n").find(":3: cannot parse 'abc'") != std::string::npos);
    CHECK(message("x,y\n1,1\n2,1,5\n").find(":3: expected 2 fields") != std::string::npos);
    CHECK(message("x,z\n1,1\n").find("no column named 'y'") != std::string::npos);
    CHECK(message("x,y\n").find("no data rows") != std::string::npos);
    CHECK(message("").find("header row is required") != std::string::npos);
    CHECK(message("x,y\n1,inf\n").find("cannot parse") != std::string::npos);
    CHECK_THROWS_AS(io::read_csv(dir.path / "missing.csv"), io::InputError);
}

TEST_CASE("number formatting round trips") {
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, 123456789.125}) {
        CHECK(io::parse_double(io::format_double(v)) == v);
    }
    CHECK(io::format_double(0.5) == "0.5");
    CHECK(io::parse_double("+2.5") == 2.5);
    CHECK_FALSE(io::parse_double("1,5").has_value());
    CHECK_FALSE(io::parse_double("").has_value());
    CHECK_FALSE(io::parse_double("nan").has_value());
}

TEST_CASE("fit command") {
    TempDir dir;
    std::vector<double> truth;
    const auto input = write_dhm(dir, truth);
    const auto a = dir.path / "a", b = dir.path / "b";
    REQUIRE(run("fit --input " + input.string() + " --output-dir " + a.string() + " --seed 3 --draws") == 0);
    REQUIRE(run("fit --input " + input.string() + " --output-dir " + b.string() + " --seed 3 --draws") == 0);

    SUBCASE("byte-identical outputs for a fixed seed") {
        for (const char* name : {"summary.csv", "scalars.csv", "draws.csv"}) {
            CHECK(slurp(a / name) == slurp(b / name));
        }
        const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
        CHECK(manifest["version"] == io::kVersion);
        CHECK(manifest["config"]["seed"] == 3);
        CHECK(manifest["config"]["order"] == 3);
        CHECK(manifest["config"]["prior"] == "gdp");
        CHECK(manifest.contains("timestamp"));
    }
    SUBCASE("intervals cover the truth") {
        const auto table = io::read_csv(a / "summary.csv");
        CHECK(table.header == std::vector<std::string>{"x", "f_mean", "f_lower", "f_upper"});
        std::size_t covered = 0;
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const double lo = *io::parse_double(table.rows[i][2]);
            const double hi = *io::parse_double(table.rows[i][3]);
            covered += lo <= truth[i] && truth[i] <= hi;
        }
        CHECK(covered >= 80);
    }
    SUBCASE("outputs ingest through their own schemas") {
        const auto s = io::ingest_csv(a / "summary.csv", "x", "f_mean");
        CHECK(s.x.size() == 100);
        const auto draws = io::read_csv(a / "draws.csv");
        CHECK(draws.header == std::vector<std::string>{"iteration", "parameter", "index", "value"});
        // per retained sweep: 100 f, 96 omega, sigma2, lambda
        CHECK(draws.rows.size() == 2000 * (100 + 96 + 2));
        const auto scalars = io::read_csv(a / "scalars.csv");
        CHECK(scalars.rows.front()[0] == "sigma2_mean");
    }
}

TEST_CASE("fit rejects burn-in at or past the iteration count before sampling") {
    TempDir dir;
    std::vector<double> truth;
    const auto input = write_dhm(dir, truth);
    const auto out = dir.path / "out";
    CHECK(run("fit --input " + input.string() + " --output-dir " + out.string() + " --iters 100 --burnin 100") != 0);
    CHECK(run("fit --input " + input.string() + " --output-dir " + out.string() + " --iters 100 --burnin 200") != 0);
    CHECK_FALSE(fs::exists(out / "summary.csv"));
}

TEST_CASE("mm command with no penalty returns y") {
    TempDir dir;
    std::vector<double> truth;
    const auto input = write_dhm(dir, truth);
    const auto out = dir.path / "mm";
    REQUIRE(run("mm --input " + input.string() + " --output-dir " + out.string() + " --lambda 0 --bootstrap 100") == 0);
    const auto in = io::ingest_csv(input, "x", "y");
    const auto fit = io::ingest_csv(out / "fit.csv", "x", "f_hat");
    CHECK(fit.y == in.y);
    const auto boot = io::ingest_csv(out / "bootstrap.csv", "x", "upper");
    CHECK(boot.x == in.x);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["results"]["bootstrap_replicates"] == 100);
}

TEST_CASE("cv command records the selected lambda") {
    TempDir dir;
    std::vector<double> truth;
    const auto input = write_dhm(dir, truth);
    const auto one = dir.path / "one";
    REQUIRE(run("cv --input " + input.string() + " --output-dir " + one.string() + " --lambda-grid 0.25 --folds 5") == 0);
    auto manifest = nlohmann::json::parse(slurp(one / "manifest.json"));
    CHECK(manifest["results"]["selected_lambda"] == 0.25);

    const auto full = dir.path / "full";
    REQUIRE(run("cv --input " + input.string() + " --output-dir " + full.string() + " --folds 10") == 0);
    const auto curve = io::ingest_csv(full / "cv.csv", "lambda", "cv_error");
    CHECK(curve.x.size() == 30);
    manifest = nlohmann::json::parse(slurp(full / "manifest.json"));
    const double selected = manifest["results"]["selected_lambda"];
    const auto table = io::read_csv(full / "cv.csv");
    std::size_t flagged = 0;
    for (const auto& row : table.rows) {
        if (row[2] == "1") {
            ++flagged;
            CHECK(*io::parse_double(row[0]) == selected);
        }
    }
    CHECK(flagged == 1);
    CHECK(run("cv --input " + input.string() + " --output-dir " + full.string() + " --folds 7") != 0);
}

TEST_CASE("bench command smoke run") {
    TempDir dir;
    const auto out = dir.path / "bench";
    REQUIRE(run("bench --replications 2 --burnin 100 --retained 200 --bootstrap 100 --lambda-count 10 --output-dir " +
                out.string()) == 0);
    const auto report = io::read_csv(out / "report.csv");
    CHECK(report.rows.size() == 9);
    CHECK(report.header.front() == "method");
    const auto mse_col = report.find("mse_mean");
    REQUIRE(mse_col);
    for (const auto& row : report.rows) CHECK(io::parse_double(row[*mse_col]).has_value());
    const auto reps = io::read_csv(out / "replications.csv");
    CHECK(reps.rows.size() == 18);
    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["command"] == "bench");
    CHECK(manifest["config"]["replications"] == 2);

    // the report itself carries no timing, so it reproduces byte for byte
    const auto again = dir.path / "again";
    REQUIRE(run("bench --replications 2 --burnin 100 --retained 200 --bootstrap 100 --lambda-count 10 --output-dir " +
                again.string()) == 0);
    CHECK(slurp(out / "report.csv") == slurp(again / "report.csv"));
    CHECK(slurp(out / "replications.csv") == slurp(again / "replications.csv"));
}

TEST_CASE("usage errors exit nonzero") {
    CHECK(run("") != 0);
    CHECK(run("fit") != 0);
    CHECK(run("fit --input /nonexistent.csv") != 0);
    CHECK(run("bench --methods tf") != 0);
}
