// cli.hpp: config-driven runner behind the qengine command-line tool
//
// A run computes every requested output in memory and writes the files only
// after all of them succeeded, so a failing run leaves the output directory
// untouched. The config schema is described in docs/config.md.

#pragma once

#include "qengine/scenarios.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qengine::cli {

inline constexpr int kSchemaVersion = 1;

enum class ExitCode : int {
    Success = 0,
    ConfigError = 1,
    NumericalError = 2,
    NoStationaryState = 3,
};

struct HusimiConfig {
    GridRange re{-6.0, 6.0};
    GridRange im{-6.0, 6.0};
    int resolution = 64;
    std::string state = "final";  // "initial", "final" or "stationary"
};

struct SweepConfig {
    std::string parameter;
    std::vector<double> values;
    bool evolve = false;  // also run the preset trajectory at each point
};

struct RunConfig {
    std::string preset;
    Overrides overrides;  // preset parameters plus dim, t_final, dt, sample_every
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;  // subset of timeseries, stationary, husimi, sweep
    std::string out_dir = ".";
    int gillespie_samples = 0;  // stationary output: sampled histogram column when > 0
    HusimiConfig husimi;
    std::optional<SweepConfig> sweep;

    bool wants(const std::string& output) const;
};

// Parses and validates a config document; throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

struct OutputFile {
    std::string name;
    std::string content;
};

// Columns shared by sweep rows and the stationary report.
inline constexpr const char* kSummaryHeader = "index,parameter,value,nbar,fano,P,J,dS_res,second_law_lhs_min";
inline constexpr const char* kTimeseriesHeader =
    "t,E,N,S,j,J,jA,jB,P,dS_res,first_law_residual,second_law_lhs,leakage";

std::string format_number(double v);
std::string timeseries_csv(const std::vector<ThermoReport>& reports);

// Computes the outputs of `run` (timeseries, stationary, husimi and, when
// listed, sweep) without touching the file system.
std::vector<OutputFile> execute_run(const RunConfig& config);
std::vector<OutputFile> execute_sweep(const RunConfig& config);

// Writes the files into `dir`, creating it if needed.
void write_outputs(const std::string& dir, const std::vector<OutputFile>& files);

struct CommandOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

// Full command: load, execute, write. Errors are reported as one line on `err`.
int run_command(const CommandOptions& options, std::ostream& out, std::ostream& err);
int sweep_command(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace qengine::cli
