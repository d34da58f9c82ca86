#include <doctest.h>

#include "oracles.hpp"
#include "qengine/cli.hpp"
#include "qengine/errors.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace qengine;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("qengine_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string write_config(const TempDir& dir, const std::string& text) {
    const fs::path p = dir.path / "config.json";
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::string& config, const fs::path& out_dir, bool sweep = false) {
    cli::CommandOptions opt;
    opt.config_path = config;
    opt.out_dir = out_dir.string();
    opt.quiet = true;
    std::ostringstream out, err;
    const int code = sweep ? cli::sweep_command(opt, out, err) : cli::run_command(opt, out, err);
    return {code, out.str(), err.str()};
}

bool empty_dir(const fs::path& p) { return !fs::exists(p) || fs::is_empty(p); }

}  // namespace

TEST_CASE("config parsing") {
    const std::string ok = R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"]})";
    const cli::RunConfig c = cli::parse_config(ok);
    CHECK(c.preset == "below_threshold");
    CHECK(c.wants("stationary"));
    CHECK_FALSE(c.wants("timeseries"));
    CHECK(c.out_dir == ".");

    const cli::RunConfig inline_params = cli::parse_config(
        R"({"schema_version": 1, "scenario": {"preset": "loaded_laser", "params": {"delta": 0.008}},
            "dim": 300, "t_final": 2.5, "seed": 42, "outputs": ["timeseries"]})");
    CHECK(inline_params.overrides.at("delta") == 0.008);
    CHECK(inline_params.overrides.at("dim") == 300.0);
    CHECK(inline_params.overrides.at("t_final") == 2.5);
    CHECK(inline_params.seed == 42);

    const cli::RunConfig sweep = cli::parse_config(
        R"({"schema_version": 1, "scenario": "saturated_pump", "outputs": ["sweep"],
            "sweep": {"parameter": "A", "start": 0.5, "stop": 2.0, "count": 4, "scale": "log"}})");
    REQUIRE(sweep.sweep);
    CHECK(sweep.sweep->values.size() == 4);
    CHECK(sweep.sweep->values.front() == doctest::Approx(0.5));
    CHECK(sweep.sweep->values.back() == doctest::Approx(2.0));
    CHECK(sweep.sweep->values[1] == doctest::Approx(0.5 * std::pow(4.0, 1.0 / 3.0)));

    const std::vector<std::string> bad = {
        "not json",
        R"({"scenario": "below_threshold", "outputs": ["stationary"]})",
        R"({"schema_version": 2, "scenario": "below_threshold", "outputs": ["stationary"]})",
        R"({"schema_version": 1, "outputs": ["stationary"]})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": []})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["plot"]})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary", "stationary"]})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "colour": 1})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "dim": 1})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "dt": 0})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "t_final": -1})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "seed": -3})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["sweep"]})",
        R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["husimi"], "husimi": {"state": "peak"}})",
    };
    for (const std::string& text : bad) {
        CAPTURE(text);
        CHECK_THROWS_AS(cli::parse_config(text), ConfigError);
    }
}

TEST_CASE("number formatting") {
    CHECK(cli::format_number(0.5) == "0.5");
    CHECK(cli::format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(cli::format_number(123456789012345.0) == "1.23456789012e+14");
}

TEST_CASE("run: stationary thermal distribution") {
    TempDir dir;
    const std::string cfg = write_config(
        dir, R"({"schema_version": 1, "scenario": "below_threshold", "outputs": ["stationary"], "dim": 60})");
    const fs::path out = dir.path / "out";
    const Result r = run(cfg, out);
    REQUIRE(r.code == 0);
    const auto rows = read_csv(out / "stationary.csv");
    REQUIRE(rows.size() == 61);
    CHECK(rows[0] == std::vector<std::string>{"n", "p_n"});
    const Eigen::VectorXd ref = oracle::geometric_pmf(0.5, 60);
    for (int n = 0; n < 60; ++n) CHECK(std::abs(std::stod(rows[n + 1][1]) - ref(n)) < 1e-8);
    const auto report = read_csv(out / "stationary_report.csv");
    REQUIRE(report.size() == 2);
    CHECK(std::stod(report[1][3]) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("run: transient energy column") {
    TempDir dir;
    const std::string cfg = write_config(
        dir, R"({"schema_version": 1, "scenario": "above_threshold_transient", "outputs": ["timeseries"], "dim": 80})");
    const Result r = run(cfg, dir.path / "out");
    REQUIRE(r.code == 0);
    const auto rows = read_csv(dir.path / "out" / "timeseries.csv");
    REQUIRE(rows.size() > 3);
    CHECK(rows[0].size() == 13);
    CHECK(rows[0][0] == "t");
    CHECK(rows[0][12] == "leakage");

    const Scenario s = preset("above_threshold_transient", {{"dim", 80}});
    const double e0 = expectation(s.initial_state, s.hamiltonian).real();
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (std::stod(rows[k][12]) >= 1e-8) break;
        const double ref = analytic_energy(*s.engine, e0, std::stod(rows[k][0]));
        CHECK(std::abs(std::stod(rows[k][1]) - ref) / ref < 1e-4);
    }
}

TEST_CASE("run: failures leave no files") {
    TempDir dir;
    const fs::path out = dir.path / "out";

    SUBCASE("malformed config") {
        const Result r = run(write_config(dir, R"({"schema_version": 1, "scenario": )"), out);
        CHECK(r.code == 1);
        CHECK(r.err.rfind("qengine: error:", 0) == 0);
    }
    SUBCASE("missing file") {
        CHECK(run((dir.path / "nope.json").string(), out).code == 1);
    }
    SUBCASE("unknown preset") {
        CHECK(run(write_config(dir, R"({"schema_version": 1, "scenario": "nope", "outputs": ["stationary"]})"), out)
                  .code == 1);
    }
    SUBCASE("no stationary state") {
        const Result r = run(write_config(dir, R"({"schema_version": 1, "scenario": "above_threshold_transient",
                                                    "dim": 40, "outputs": ["stationary"]})"),
                             out);
        CHECK(r.code == 3);
    }
    SUBCASE("numerical error") {
        const Result r = run(write_config(dir, R"({"schema_version": 1,
            "scenario": {"preset": "above_threshold_transient", "params": {"allow_beyond_horizon": 1}},
            "dim": 40, "t_final": 20, "outputs": ["timeseries"]})"),
                             out);
        CHECK(r.code == 2);
    }
    CHECK(empty_dir(out));
}

TEST_CASE("run: deterministic output") {
    TempDir dir;
    const std::string cfg = write_config(dir, R"({"schema_version": 1, "scenario": "below_threshold",
        "outputs": ["timeseries", "stationary", "husimi"], "gillespie_samples": 2000, "seed": 5,
        "t_final": 2, "husimi": {"resolution": 16}})");
    REQUIRE(run(cfg, dir.path / "a").code == 0);
    REQUIRE(run(cfg, dir.path / "b").code == 0);
    for (const char* f : {"timeseries.csv", "stationary.csv", "stationary_report.csv", "husimi.csv", "husimi.json"}) {
        CAPTURE(f);
        const std::string a = slurp(dir.path / "a" / f);
        CHECK_FALSE(a.empty());
        CHECK(a == slurp(dir.path / "b" / f));
    }
    const auto rows = read_csv(dir.path / "a" / "stationary.csv");
    CHECK(rows[0] == std::vector<std::string>{"n", "p_n", "p_gillespie"});
    // A different seed changes the sampled column only. Run r uses seed + r,
    // so the override is far from 5 to avoid sharing paths.
    cli::CommandOptions opt{cfg, (dir.path / "c").string(), 1000000, true};
    std::ostringstream o, e;
    REQUIRE(cli::run_command(opt, o, e) == 0);
    CHECK(slurp(dir.path / "c" / "stationary.csv") != slurp(dir.path / "a" / "stationary.csv"));
    CHECK(slurp(dir.path / "c" / "timeseries.csv") == slurp(dir.path / "a" / "timeseries.csv"));
    const auto husimi = read_csv(dir.path / "a" / "husimi.csv");
    CHECK(husimi.size() == 16);
    CHECK(husimi[0].size() == 16);
}

TEST_CASE("sweep: single point equals the stationary report") {
    TempDir dir;
    const std::string cfg = write_config(dir, R"({"schema_version": 1, "scenario": "saturated_pump",
        "outputs": ["stationary", "sweep"], "sweep": {"parameter": "A", "values": [2.0]}})");
    REQUIRE(run(cfg, dir.path / "out").code == 0);
    const auto report = read_csv(dir.path / "out" / "stationary_report.csv");
    const auto sweep = read_csv(dir.path / "out" / "sweep.csv");
    REQUIRE(report.size() == 2);
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0] == report[0]);
    CHECK(sweep[1][1] == "A");
    CHECK(sweep[1][2] == "2");
    for (std::size_t c = 3; c < report[1].size(); ++c) CHECK(sweep[1][c] == report[1][c]);
}

TEST_CASE("sweep: threshold crossing of the saturated laser") {
    TempDir dir;
    const std::string cfg = write_config(dir, R"({"schema_version": 1, "scenario": "saturated_pump",
        "outputs": ["sweep"], "sweep": {"parameter": "A", "values": [0.5, 0.9, 1.1, 2.0]}})");
    const fs::path out = dir.path / "out";
    REQUIRE(run(cfg, out, true).code == 0);
    const auto rows = read_csv(out / "sweep.csv");
    REQUIRE(rows.size() == 5);
    std::vector<double> nbar;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::stoi(rows[k][0]) == static_cast<int>(k - 1));
        nbar.push_back(std::stod(rows[k][3]));
    }
    CHECK(nbar[0] < 1.5);
    CHECK(nbar[3] > 10.0 * nbar[0]);
    for (std::size_t k = 1; k < nbar.size(); ++k) CHECK(nbar[k] > nbar[k - 1]);
    // Bunched light below threshold.
    CHECK(std::stod(rows[1][4]) > 1.0);
}

TEST_CASE("sweep: loaded-laser power times delta is flat") {
    TempDir dir;
    const std::string cfg = write_config(dir, R"({"schema_version": 1, "scenario": "loaded_laser",
        "outputs": ["sweep"], "sweep": {"parameter": "delta", "values": [0.01, 0.0085, 0.007]}})");
    REQUIRE(run(cfg, dir.path / "out", true).code == 0);
    const auto rows = read_csv(dir.path / "out" / "sweep.csv");
    REQUIRE(rows.size() == 4);
    std::vector<double> pd;
    for (std::size_t k = 1; k < rows.size(); ++k) pd.push_back(std::stod(rows[k][5]) * std::stod(rows[k][2]));
    const double mean = (pd[0] + pd[1] + pd[2]) / 3.0;
    for (double v : pd) CHECK(std::abs(v - mean) / mean < 0.10);
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(std::stod(rows[k][8]) >= -1e-7);
}

TEST_CASE("husimi needs a Fock scenario") {
    TempDir dir;
    const std::string cfg =
        write_config(dir, R"({"schema_version": 1, "scenario": "two_bath_qubit", "outputs": ["husimi"]})");
    CHECK(run(cfg, dir.path / "out").code == 1);
    CHECK(empty_dir(dir.path / "out"));
}
