#include "qengine/cli.hpp"

#include "qengine/errors.hpp"
#include "qengine/log.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace qengine::cli {
namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {"schema_version", "scenario", "dim",        "t_final",
                                             "dt",             "sample_every", "seed",   "outputs",
                                             "out_dir",        "gillespie_samples", "husimi", "sweep"};
const std::set<std::string> kOutputs = {"timeseries", "stationary", "husimi", "sweep"};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
    }
}

double number(const json& v, const std::string& what) {
    if (!v.is_number()) fail(what + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(what + " must be finite");
    return x;
}

long long integer(const json& v, const std::string& what) {
    if (!v.is_number_integer()) fail(what + " must be an integer");
    return v.get<long long>();
}

GridRange range(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 2) fail(what + " must be a two-element array [min, max]");
    const GridRange r{number(v[0], what), number(v[1], what)};
    if (!(r.max > r.min)) fail(what + " must satisfy min < max");
    return r;
}

HusimiConfig parse_husimi(const json& h) {
    if (!h.is_object()) fail("husimi must be an object");
    reject_unknown(h, {"re", "im", "resolution", "state"}, "husimi");
    HusimiConfig c;
    if (h.contains("re")) c.re = range(h["re"], "husimi.re");
    if (h.contains("im")) c.im = range(h["im"], "husimi.im");
    if (h.contains("resolution")) {
        const long long r = integer(h["resolution"], "husimi.resolution");
        if (r < 2 || r > 4096) fail("husimi.resolution must be in [2, 4096]");
        c.resolution = static_cast<int>(r);
    }
    if (h.contains("state")) {
        if (!h["state"].is_string()) fail("husimi.state must be a string");
        c.state = h["state"].get<std::string>();
        if (c.state != "initial" && c.state != "final" && c.state != "stationary")
            fail("husimi.state must be one of initial, final, stationary");
    }
    return c;
}

SweepConfig parse_sweep(const json& s, const std::string& preset_name) {
    if (!s.is_object()) fail("sweep must be an object");
    reject_unknown(s, {"parameter", "values", "start", "stop", "count", "scale", "evolve"}, "sweep");
    SweepConfig c;
    if (!s.contains("parameter") || !s["parameter"].is_string()) fail("sweep.parameter must be a string");
    c.parameter = s["parameter"].get<std::string>();
    const auto names = preset_parameter_names(preset_name);
    if (std::find(names.begin(), names.end(), c.parameter) == names.end())
        fail("sweep.parameter '" + c.parameter + "' is not a parameter of preset " + preset_name);
    const bool has_values = s.contains("values");
    const bool has_range = s.contains("start") || s.contains("stop") || s.contains("count");
    if (has_values == has_range) fail("sweep needs either values or start/stop/count");
    if (has_values) {
        if (!s["values"].is_array() || s["values"].empty()) fail("sweep.values must be a non-empty array");
        for (const auto& v : s["values"]) c.values.push_back(number(v, "sweep.values entry"));
    } else {
        if (!s.contains("start") || !s.contains("stop") || !s.contains("count"))
            fail("sweep range needs start, stop and count");
        const double start = number(s["start"], "sweep.start");
        const double stop = number(s["stop"], "sweep.stop");
        const long long count = integer(s["count"], "sweep.count");
        if (count < 1 || count > 100000) fail("sweep.count must be in [1, 100000]");
        std::string scale = "linear";
        if (s.contains("scale")) {
            if (!s["scale"].is_string()) fail("sweep.scale must be a string");
            scale = s["scale"].get<std::string>();
        }
        if (scale != "linear" && scale != "log") fail("sweep.scale must be linear or log");
        if (scale == "log" && !(start > 0.0 && stop > 0.0)) fail("log sweep needs positive start and stop");
        for (long long i = 0; i < count; ++i) {
            const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            c.values.push_back(scale == "linear" ? start + f * (stop - start)
                                                 : std::exp(std::log(start) + f * (std::log(stop) - std::log(start))));
        }
    }
    if (s.contains("evolve")) {
        if (!s["evolve"].is_boolean()) fail("sweep.evolve must be a boolean");
        c.evolve = s["evolve"].get<bool>();
    }
    return c;
}

// ---------------------------------------------------------------------------
// Computation

struct Summary {
    double nbar;
    double fano;
    double power;
    double heat;
    double residual;
    double lhs_min;
};

std::vector<ThermoReport> reports_for(const Scenario& s, const Trajectory& traj) {
    if (s.bath) return thermo_report(traj, *s.bath, s.load, *s.pot);
    return davies_report(traj, s.generator);
}

// Stationary values of the report fields: a constant trajectory has zero time derivatives.
ThermoReport stationary_report(const Scenario& s, const DensityMatrix& st) {
    Trajectory flat;
    for (int i = 0; i < 3; ++i) {
        flat.times.push_back(static_cast<double>(i));
        flat.states.push_back(st);
        flat.leakage.push_back(s.bath ? top_occupancy(st) : 0.0);
    }
    return reports_for(s, flat).front();
}

Summary summarize(const Scenario& s, const DensityMatrix& st, const std::optional<Trajectory>& traj) {
    const Eigen::VectorXd p = st.populations();
    double mean = 0.0, second = 0.0;
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        mean += static_cast<double>(n) * p(n);
        second += static_cast<double>(n * n) * p(n);
    }
    const double var = second - mean * mean;
    const ThermoReport r = stationary_report(s, st);
    double lhs_min = r.second_law_lhs;
    if (traj)
        for (const auto& tr : reports_for(s, *traj)) lhs_min = std::min(lhs_min, tr.second_law_lhs);
    return {mean, mean == 0.0 ? std::nan("") : var / mean, r.load_power, r.heat_current, r.residual_production,
            lhs_min};
}

std::string summary_row(std::size_t index, const std::string& parameter, double value, const Summary& m) {
    std::ostringstream os;
    os << index << ',' << parameter << ',' << format_number(value) << ',' << format_number(m.nbar) << ','
       << format_number(m.fano) << ',' << format_number(m.power) << ',' << format_number(m.heat) << ','
       << format_number(m.residual) << ',' << format_number(m.lhs_min) << '\n';
    return os.str();
}

Trajectory run_trajectory(const Scenario& s) {
    return evolve(s.generator, s.initial_state, s.t_final, s.dt, s.sample_every);
}

std::string stationary_csv(const Scenario& s, const DensityMatrix& st, const RunConfig& config) {
    const Eigen::VectorXd p = st.populations();
    std::vector<double> sampled;
    const bool with_samples = config.gillespie_samples > 0 && s.birth_death.has_value();
    if (with_samples) {
        double mean = 0.0;
        for (Eigen::Index n = 0; n < p.size(); ++n) mean += static_cast<double>(n) * p(n);
        const int n0 = static_cast<int>(std::lround(mean));
        const auto ends = gillespie_endpoints(*s.birth_death, n0, s.t_final, config.seed, config.gillespie_samples);
        sampled.assign(static_cast<std::size_t>(p.size()), 0.0);
        for (int n : ends)
            if (n < p.size()) sampled[static_cast<std::size_t>(n)] += 1.0 / config.gillespie_samples;
    }
    std::ostringstream os;
    os << (with_samples ? "n,p_n,p_gillespie\n" : "n,p_n\n");
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        os << n << ',' << format_number(p(n));
        if (with_samples) os << ',' << format_number(sampled[static_cast<std::size_t>(n)]);
        os << '\n';
    }
    return os.str();
}

std::vector<OutputFile> husimi_files(const Scenario& s, const RunConfig& config, const std::optional<Trajectory>& traj) {
    if (!s.bath) throw ConfigError("husimi output needs a single-mode (Fock space) scenario");
    const HusimiConfig& h = config.husimi;
    std::optional<DensityMatrix> state;
    double time = 0.0;
    if (h.state == "initial") {
        state = s.initial_state;
    } else if (h.state == "final") {
        state = traj->states.back();
        time = traj->times.back();
    } else {
        state = stationary_state(s.generator, s.dim);
        time = std::numeric_limits<double>::infinity();
    }
    const Eigen::MatrixXd q = husimi_grid(*state, h.re, h.im, h.resolution);
    std::ostringstream csv;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < q.cols(); ++j) csv << (j ? "," : "") << format_number(q(i, j));
        csv << '\n';
    }
    json meta = {
        {"schema_version", kSchemaVersion},
        {"scenario", s.name},
        {"state", h.state},
        {"re", {h.re.min, h.re.max}},
        {"im", {h.im.min, h.im.max}},
        {"resolution", h.resolution},
        {"rows", "Im(alpha), ascending from im[0] to im[1]"},
        {"columns", "Re(alpha), ascending from re[0] to re[1]"},
        {"value", "Q(alpha) = <alpha|rho|alpha>/pi"},
    };
    if (std::isfinite(time)) meta["time"] = time;
    return {{"husimi.csv", csv.str()}, {"husimi.json", meta.dump(2) + "\n"}};
}

}  // namespace

bool RunConfig::wants(const std::string& output) const {
    return std::find(outputs.begin(), outputs.end(), output) != outputs.end();
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("config must be a JSON object");
    reject_unknown(j, kTopLevelKeys, "config");
    if (!j.contains("schema_version")) fail("config needs schema_version");
    if (integer(j["schema_version"], "schema_version") != kSchemaVersion)
        fail("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");

    RunConfig c;
    if (!j.contains("scenario")) fail("config needs a scenario");
    const json& sc = j["scenario"];
    if (sc.is_string()) {
        c.preset = sc.get<std::string>();
    } else if (sc.is_object()) {
        reject_unknown(sc, {"preset", "params"}, "scenario");
        if (!sc.contains("preset") || !sc["preset"].is_string()) fail("scenario.preset must be a string");
        c.preset = sc["preset"].get<std::string>();
        if (sc.contains("params")) {
            if (!sc["params"].is_object()) fail("scenario.params must be an object");
            for (const auto& [key, value] : sc["params"].items())
                c.overrides[key] = number(value, "scenario.params." + key);
        }
    } else {
        fail("scenario must be a preset name or an object");
    }
    std::vector<std::string> known;
    try {
        known = preset_parameter_names(c.preset);
    } catch (const UnknownPreset& e) {
        fail(e.what());
    }
    for (const auto& [key, value] : c.overrides) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            fail("unknown parameter '" + key + "' for preset " + c.preset);
    }

    if (j.contains("dim")) {
        const long long d = integer(j["dim"], "dim");
        if (d < 2 || d > 4096) fail("dim must be in [2, 4096]");
        c.overrides["dim"] = static_cast<double>(d);
    }
    for (const char* key : {"t_final", "dt"}) {
        if (!j.contains(key)) continue;
        const double v = number(j[key], key);
        if (!(v > 0.0)) fail(std::string(key) + " must be > 0");
        c.overrides[key] = v;
    }
    if (j.contains("sample_every")) {
        const long long e = integer(j["sample_every"], "sample_every");
        if (e < 1) fail("sample_every must be >= 1");
        c.overrides["sample_every"] = static_cast<double>(e);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) fail("seed must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (!j.contains("outputs") || !j["outputs"].is_array() || j["outputs"].empty())
        fail("outputs must be a non-empty array");
    for (const auto& o : j["outputs"]) {
        if (!o.is_string() || !kOutputs.count(o.get<std::string>()))
            fail("outputs entries must be timeseries, stationary, husimi or sweep");
        if (c.wants(o.get<std::string>())) fail("duplicate output '" + o.get<std::string>() + "'");
        c.outputs.push_back(o.get<std::string>());
    }
    if (j.contains("out_dir")) {
        if (!j["out_dir"].is_string() || j["out_dir"].get<std::string>().empty())
            fail("out_dir must be a non-empty string");
        c.out_dir = j["out_dir"].get<std::string>();
    }
    if (j.contains("gillespie_samples")) {
        const long long g = integer(j["gillespie_samples"], "gillespie_samples");
        if (g < 0 || g > 100000000) fail("gillespie_samples must be in [0, 1e8]");
        c.gillespie_samples = static_cast<int>(g);
    }
    if (j.contains("husimi")) c.husimi = parse_husimi(j["husimi"]);
    if (j.contains("sweep")) c.sweep = parse_sweep(j["sweep"], c.preset);
    if (c.wants("sweep") && !c.sweep) fail("sweep output requested without a sweep section");
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string timeseries_csv(const std::vector<ThermoReport>& reports) {
    std::string out = std::string(kTimeseriesHeader) + "\n";
    for (const auto& r : reports) {
        const double fields[] = {r.time,        r.energy,        r.photon_number,     r.entropy,
                                 r.photon_flux, r.heat_current,  r.j_a,               r.j_b,
                                 r.load_power,  r.residual_production, r.first_law_residual, r.second_law_lhs,
                                 r.leakage};
        bool first = true;
        for (double f : fields) {
            if (!first) out += ',';
            out += format_number(f);
            first = false;
        }
        out += '\n';
    }
    return out;
}

std::vector<OutputFile> execute_sweep(const RunConfig& config) {
    if (!config.sweep) throw ConfigError("sweep requested without a sweep section");
    const SweepConfig& sw = *config.sweep;
    std::string csv = std::string(kSummaryHeader) + "\n";
    // Grid points are independent; they run in grid order here so rows come out in order.
    for (std::size_t i = 0; i < sw.values.size(); ++i) {
        Overrides ov = config.overrides;
        ov[sw.parameter] = sw.values[i];
        const Scenario s = preset(config.preset, ov);
        const DensityMatrix st = stationary_state(s.generator, s.dim);
        std::optional<Trajectory> traj;
        if (sw.evolve) traj = run_trajectory(s);
        csv += summary_row(i, sw.parameter, sw.values[i], summarize(s, st, traj));
    }
    return {{"sweep.csv", csv}};
}

std::vector<OutputFile> execute_run(const RunConfig& config) {
    const Scenario s = preset(config.preset, config.overrides);
    std::vector<OutputFile> files;
    std::optional<Trajectory> traj;
    const bool need_traj = config.wants("timeseries") || (config.wants("husimi") && config.husimi.state == "final");
    if (need_traj) traj = run_trajectory(s);

    if (config.wants("timeseries")) files.push_back({"timeseries.csv", timeseries_csv(reports_for(s, *traj))});
    if (config.wants("stationary")) {
        const DensityMatrix st = stationary_state(s.generator, s.dim);
        files.push_back({"stationary.csv", stationary_csv(s, st, config)});
        files.push_back({"stationary_report.csv", std::string(kSummaryHeader) + "\n" +
                                                      summary_row(0, "none", 0.0, summarize(s, st, std::nullopt))});
    }
    if (config.wants("husimi")) {
        auto h = husimi_files(s, config, traj);
        files.insert(files.end(), h.begin(), h.end());
    }
    if (config.wants("sweep")) {
        auto sw = execute_sweep(config);
        files.insert(files.end(), sw.begin(), sw.end());
    }
    return files;
}

void write_outputs(const std::string& dir, const std::vector<OutputFile>& files) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    // Stage everything first so that a failed write leaves no finished-looking files behind.
    std::vector<std::pair<fs::path, fs::path>> staged;
    const auto cleanup = [&] {
        for (const auto& [tmp, final_path] : staged) fs::remove(tmp, ec);
    };
    for (const auto& f : files) {
        const fs::path final_path = fs::path(dir) / f.name;
        const fs::path tmp = fs::path(dir) / ("." + f.name + ".partial");
        staged.emplace_back(tmp, final_path);
        std::ofstream out(tmp, std::ios::binary);
        out << f.content;
        out.close();
        if (!out) {
            cleanup();
            throw ConfigError("cannot write " + final_path.string());
        }
    }
    for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
}

namespace {

int report_error(std::ostream& err, ExitCode code, const std::string& what) {
    err << "qengine: error: " << what << '\n';
    return static_cast<int>(code);
}

int guarded(const CommandOptions& options, std::ostream& out, std::ostream& err, bool sweep_only) {
    if (options.quiet) log::set_sink({});
    try {
        RunConfig config = load_config(options.config_path);
        if (options.seed) config.seed = *options.seed;
        if (options.out_dir) config.out_dir = *options.out_dir;
        const std::vector<OutputFile> files = sweep_only ? execute_sweep(config) : execute_run(config);
        write_outputs(config.out_dir, files);
        if (!options.quiet)
            for (const auto& f : files) out << "wrote " << (std::filesystem::path(config.out_dir) / f.name).string() << '\n';
        return static_cast<int>(ExitCode::Success);
    } catch (const ConfigError& e) {
        return report_error(err, ExitCode::ConfigError, e.what());
    } catch (const UnknownPreset& e) {
        return report_error(err, ExitCode::ConfigError, e.what());
    } catch (const DomainError& e) {
        return report_error(err, ExitCode::ConfigError, e.what());
    } catch (const NoStationaryState& e) {
        return report_error(err, ExitCode::NoStationaryState, std::string("no stationary state: ") + e.what());
    } catch (const Error& e) {
        return report_error(err, ExitCode::NumericalError, e.what());
    } catch (const std::exception& e) {
        return report_error(err, ExitCode::NumericalError, e.what());
    }
}

}  // namespace

int run_command(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(options, out, err, false);
}

int sweep_command(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(options, out, err, true);
}

}  // namespace qengine::cli
