// Python bindings. States cross the boundary as complex NumPy matrices and are
// validated as density matrices on the way in.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qengine/birthdeath.hpp"
#include "qengine/cli.hpp"
#include "qengine/errors.hpp"
#include "qengine/fock.hpp"
#include "qengine/lindblad.hpp"
#include "qengine/log.hpp"
#include "qengine/scenarios.hpp"
#include "qengine/thermo.hpp"

#include <sstream>

namespace py = pybind11;
using namespace qengine;

namespace {

DensityMatrix as_state(const Matrix& m) { return DensityMatrix(Operator(m)); }

std::vector<Matrix> state_list(const std::vector<DensityMatrix>& states) {
    std::vector<Matrix> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(s.matrix());
    return out;
}

py::dict trajectory_dict(const Trajectory& t) {
    py::dict d;
    d["times"] = t.times;
    d["states"] = state_list(t.states);
    d["leakage"] = t.leakage;
    d["warnings"] = t.warnings;
    return d;
}

py::dict report_dict(const ThermoReport& r) {
    py::dict d;
    d["t"] = r.time;
    d["E"] = r.energy;
    d["N"] = r.photon_number;
    d["S"] = r.entropy;
    d["j"] = r.photon_flux;
    d["J"] = r.heat_current;
    d["jA"] = r.j_a;
    d["jB"] = r.j_b;
    d["P"] = r.load_power;
    d["dS_res"] = r.residual_production;
    d["first_law_residual"] = r.first_law_residual;
    d["second_law_lhs"] = r.second_law_lhs;
    d["leakage"] = r.leakage;
    return d;
}

Trajectory as_trajectory(const std::vector<double>& times, const std::vector<Matrix>& states) {
    if (times.size() != states.size()) throw DimensionMismatch("times and states differ in length");
    Trajectory t;
    t.times = times;
    for (const auto& m : states) {
        t.states.push_back(as_state(m));
        t.leakage.push_back(top_occupancy(t.states.back()));
    }
    return t;
}

}  // namespace

PYBIND11_MODULE(_qengine, m) {
    m.doc() = "Open-system laser engines on a truncated Fock space";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", error.ptr());
    py::register_exception<VariantMismatch>(m, "VariantMismatch", error.ptr());
    py::register_exception<TruncationError>(m, "TruncationError", error.ptr());
    py::register_exception<StabilityError>(m, "StabilityError", error.ptr());
    py::register_exception<NoStationaryState>(m, "NoStationaryState", error.ptr());
    py::register_exception<DegenerateKernel>(m, "DegenerateKernel", error.ptr());
    py::register_exception<DegenerateSpectrum>(m, "DegenerateSpectrum", error.ptr());
    py::register_exception<BoundaryLeak>(m, "BoundaryLeak", error.ptr());
    py::register_exception<CutoffTooSmall>(m, "CutoffTooSmall", error.ptr());
    py::register_exception<InsufficientSamples>(m, "InsufficientSamples", error.ptr());
    py::register_exception<UnknownPreset>(m, "UnknownPreset", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

    m.def("set_quiet", [](bool quiet) {
        if (quiet) log::set_sink({});
        else log::set_sink([](log::Level level, std::string_view msg) {
            if (level == log::Level::Warning) py::print("qengine warning:", std::string(msg));
        });
    }, py::arg("quiet") = true, "Silence (or restore) diagnostic warnings.");

    // fock
    m.def("annihilation", [](int dim) { return annihilation_matrix(FockSpace(dim)).matrix(); }, py::arg("dim"));
    m.def("creation", [](int dim) { return creation_matrix(FockSpace(dim)).matrix(); }, py::arg("dim"));
    m.def("number", [](int dim) { return number_operator(FockSpace(dim)).matrix(); }, py::arg("dim"));
    m.def("fock_state", [](int n, int dim) { return fock_state(n, FockSpace(dim)).matrix(); }, py::arg("n"),
          py::arg("dim"));
    m.def("coherent_state", [](Complex alpha, int dim) { return coherent_state(alpha, FockSpace(dim)).matrix(); },
          py::arg("alpha"), py::arg("dim"));
    m.def("thermal_state", [](double beta_omega, int dim) { return thermal_state(beta_omega, FockSpace(dim)).matrix(); },
          py::arg("beta_omega"), py::arg("dim"));
    m.def("expectation", [](const Matrix& rho, const Matrix& a) { return expectation(as_state(rho), Operator(a)); },
          py::arg("rho"), py::arg("a"));
    m.def("phase_average", [](const Matrix& rho) { return phase_average(as_state(rho)).matrix(); }, py::arg("rho"));
    m.def("husimi_grid",
          [](const Matrix& rho, std::pair<double, double> re, std::pair<double, double> im, int resolution) {
              return husimi_grid(as_state(rho), {re.first, re.second}, {im.first, im.second}, resolution);
          },
          py::arg("rho"), py::arg("re"), py::arg("im"), py::arg("resolution"),
          "Q function; rows run over Im(alpha), columns over Re(alpha).");

    // lindblad
    py::class_<GeneratorSpec>(m, "GeneratorSpec")
        .def_property_readonly("kind", [](const GeneratorSpec& g) { return std::string(g.kind()); })
        .def_property_readonly("fixed_dim", &GeneratorSpec::fixed_dim)
        .def("__repr__", [](const GeneratorSpec& g) { return "<GeneratorSpec " + std::string(g.kind()) + ">"; });

    m.def("linear_laser", &GeneratorSpec::linear_laser, py::arg("omega"), py::arg("gamma_up"), py::arg("gamma_down"));
    m.def("loaded_laser", &GeneratorSpec::loaded_laser, py::arg("omega"), py::arg("gamma_up"), py::arg("gamma_down"),
          py::arg("delta"));
    m.def("nonlinear_laser", &GeneratorSpec::nonlinear_laser, py::arg("omega"), py::arg("g_up"), py::arg("g_down"),
          "g_up and g_down are callables of the photon number n.");
    m.def("general_gkls",
          [](const Matrix& h, const std::vector<Matrix>& jumps) {
              std::vector<Operator> ops;
              for (const auto& j : jumps) ops.emplace_back(j);
              return GeneratorSpec::general(Operator(h), std::move(ops));
          },
          py::arg("hamiltonian"), py::arg("jumps"));
    m.def("davies_generator",
          [](const Matrix& h, const std::vector<std::tuple<int, Matrix, std::function<double(double)>>>& couplings,
             const std::vector<double>& betas) {
              std::vector<DaviesCoupling> cs;
              for (const auto& [bath, op, rate] : couplings) cs.push_back({bath, Operator(op), rate});
              return davies_generator(Operator(h), cs, betas);
          },
          py::arg("hamiltonian"), py::arg("couplings"), py::arg("bath_betas"),
          "couplings: list of (bath index, coupling operator, rate function of the Bohr frequency).");
    m.def("davies_bath_component", &davies_bath_component, py::arg("gen"), py::arg("bath"));
    m.def("gibbs_state", [](const Matrix& h, double beta) { return gibbs_state(Operator(h), beta).matrix(); },
          py::arg("hamiltonian"), py::arg("beta"));

    m.def("generator_apply", [](const GeneratorSpec& g, const Matrix& x) { return generator_apply(g, Operator(x)).matrix(); },
          py::arg("gen"), py::arg("x"));
    m.def("adjoint_apply", [](const GeneratorSpec& g, const Matrix& a) { return adjoint_apply(g, Operator(a)).matrix(); },
          py::arg("gen"), py::arg("a"));
    m.def("dissipator_apply",
          [](const Matrix& v, const Matrix& rho) { return dissipator_apply(Operator(v), Operator(rho)).matrix(); },
          py::arg("v"), py::arg("rho"));
    m.def("superoperator_matrix", &superoperator_matrix, py::arg("gen"), py::arg("dim"));
    m.def("ladder_rates",
          [](const GeneratorSpec& g, int dim) {
              const LadderRates r = ladder_rates(g, dim);
              return std::make_pair(r.up, r.down);
          },
          py::arg("gen"), py::arg("dim"));
    m.def("evolve",
          [](const GeneratorSpec& g, const Matrix& rho0, double t_final, double dt, int sample_every,
             double leakage_limit) {
              EvolveOptions opt;
              opt.leakage_limit = leakage_limit;
              Trajectory t;
              {
                  py::gil_scoped_release release;
                  t = evolve(g, as_state(rho0), t_final, dt, sample_every, opt);
              }
              return trajectory_dict(t);
          },
          py::arg("gen"), py::arg("rho0"), py::arg("t_final"), py::arg("dt"), py::arg("sample_every") = 1,
          py::arg("leakage_limit") = 1e-6,
          "Fixed-step RK4. Returns a dict with times, states, leakage and warnings.");
    m.def("stationary_state",
          [](const GeneratorSpec& g, int dim) { return stationary_state(g, dim).matrix(); }, py::arg("gen"),
          py::arg("dim") = 0);

    // birthdeath
    py::class_<BirthDeathModel>(m, "BirthDeathModel")
        .def_static("linear", &BirthDeathModel::linear, py::arg("gamma_up"), py::arg("gamma_down"))
        .def_static("saturated_pump", &BirthDeathModel::saturated_pump, py::arg("A"), py::arg("B"), py::arg("C"))
        .def_static("saturated_damp", &BirthDeathModel::saturated_damp, py::arg("A"), py::arg("B"), py::arg("C"))
        .def_static("loaded", &BirthDeathModel::loaded, py::arg("gamma_up"), py::arg("gamma_down"), py::arg("delta"))
        .def_static("custom", &BirthDeathModel::custom, py::arg("up"), py::arg("down"))
        .def_property_readonly("kind", [](const BirthDeathModel& b) { return std::string(b.kind()); })
        .def("rates",
             [](const BirthDeathModel& b, int n) {
                 const RatePair r = rates(b, n);
                 return std::make_pair(r.up, r.down);
             },
             py::arg("n"))
        .def("__repr__", [](const BirthDeathModel& b) { return "<BirthDeathModel " + std::string(b.kind()) + ">"; });

    m.def("matching_birth_death", &matching_birth_death, py::arg("gen"));
    m.def("stationary_distribution",
          [](const BirthDeathModel& b, int cutoff) { return stationary_distribution(b, cutoff).probabilities(); },
          py::arg("model"), py::arg("cutoff"));
    m.def("auto_cutoff", &auto_cutoff, py::arg("model"));
    m.def("poisson_distribution", [](double mean, int cutoff) { return poisson_distribution(mean, cutoff).probabilities(); },
          py::arg("mean"), py::arg("cutoff"));
    m.def("total_variation", &total_variation, py::arg("p"), py::arg("q"));
    m.def("evolve_distribution",
          [](const BirthDeathModel& b, const Eigen::VectorXd& p0, double t_final, double dt, int sample_every,
             double boundary_flux_limit) {
              DistributionSeries s;
              {
                  py::gil_scoped_release release;
                  s = evolve_distribution(b, PhotonDistribution(p0), t_final, dt, {sample_every, boundary_flux_limit});
              }
              std::vector<Eigen::VectorXd> ps;
              for (const auto& p : s.distributions) ps.push_back(p.probabilities());
              py::dict d;
              d["times"] = s.times;
              d["distributions"] = ps;
              d["max_boundary_flux"] = s.max_boundary_flux;
              return d;
          },
          py::arg("model"), py::arg("p0"), py::arg("t_final"), py::arg("dt"), py::arg("sample_every") = 1,
          py::arg("boundary_flux_limit") = 1e-10);
    m.def("gillespie_sample",
          [](const BirthDeathModel& b, int n0, double t_final, std::uint64_t seed) {
              const JumpTrajectory t = gillespie_sample(b, n0, t_final, seed);
              return std::make_pair(t.times, t.counts);
          },
          py::arg("model"), py::arg("n0"), py::arg("t_final"), py::arg("seed"),
          "Returns (jump times, photon number after each jump).");
    m.def("gillespie_endpoints", &gillespie_endpoints, py::arg("model"), py::arg("n0"), py::arg("t_final"),
          py::arg("seed"), py::arg("runs"), py::call_guard<py::gil_scoped_release>());
    m.def("moments",
          [](const Eigen::VectorXd& p) {
              const Moments mo = moments(PhotonDistribution(p));
              return py::make_tuple(mo.mean, mo.variance, mo.fano);
          },
          py::arg("p"), "(mean, variance, fano)");

    // thermo
    py::class_<ChemicalPotentials>(m, "ChemicalPotentials")
        .def(py::init([](double beta, double mu_a, double mu_b, double omega) {
                 ChemicalPotentials p{beta, mu_a, mu_b, omega};
                 validate(p);
                 return p;
             }),
             py::arg("beta"), py::arg("mu_a"), py::arg("mu_b"), py::arg("omega"))
        .def_readonly("beta", &ChemicalPotentials::beta)
        .def_readonly("mu_a", &ChemicalPotentials::mu_a)
        .def_readonly("mu_b", &ChemicalPotentials::mu_b)
        .def_readonly("omega", &ChemicalPotentials::omega)
        .def_property_readonly("delta_g", &ChemicalPotentials::delta_g);

    m.def("von_neumann_entropy", [](const Matrix& rho) { return von_neumann_entropy(as_state(rho)); }, py::arg("rho"));
    m.def("relative_entropy",
          [](const Matrix& a, const Matrix& b) { return relative_entropy(as_state(a), as_state(b)); }, py::arg("rho1"),
          py::arg("rho2"));
    m.def("log_reference_chemical",
          [](const ChemicalPotentials& p, int dim) { return log_reference_chemical(p, FockSpace(dim)).matrix(); },
          py::arg("pot"), py::arg("dim"));
    m.def("spohn_production",
          [](const GeneratorSpec& g, const Matrix& rho, const Matrix& log_sigma) {
              return spohn_production(g, as_state(rho), Operator(log_sigma));
          },
          py::arg("gen"), py::arg("rho"), py::arg("log_sigma"));
    m.def("heat_current_additive",
          [](const Matrix& rho, const GeneratorSpec& g, const Matrix& h) {
              return heat_current_additive(as_state(rho), g, Operator(h));
          },
          py::arg("rho"), py::arg("gen_k"), py::arg("hamiltonian"));
    m.def("photon_flux", [](const Matrix& rho, const GeneratorSpec& g) { return photon_flux(as_state(rho), g); },
          py::arg("rho"), py::arg("gen_bath"));
    m.def("heat_current_chemical", &heat_current_chemical, py::arg("j"), py::arg("pot"));
    m.def("load_power",
          [](const Matrix& rho, double omega, double delta) { return load_power(as_state(rho), omega, delta); },
          py::arg("rho"), py::arg("omega"), py::arg("delta"));
    m.def("load_power_distribution",
          [](const Eigen::VectorXd& p, double omega, double delta) {
              return load_power(PhotonDistribution(p), omega, delta);
          },
          py::arg("p"), py::arg("omega"), py::arg("delta"));
    m.def("residual_entropy_production",
          [](const Matrix& rho, const GeneratorSpec& load) { return residual_entropy_production(as_state(rho), load); },
          py::arg("rho"), py::arg("gen_load"));
    m.def("residual_entropy_production_distribution",
          [](const Eigen::VectorXd& p, double delta) { return residual_entropy_production(PhotonDistribution(p), delta); },
          py::arg("p"), py::arg("delta"));
    m.def("passive_state",
          [](const Matrix& rho, const Matrix& h) { return passive_state(as_state(rho), Operator(h)).matrix(); },
          py::arg("rho"), py::arg("hamiltonian"));
    m.def("ergotropy", [](const Matrix& rho, const Matrix& h) { return ergotropy(as_state(rho), Operator(h)); },
          py::arg("rho"), py::arg("hamiltonian"));
    m.def("semiclassical_work", [](const Matrix& rho, double omega) { return semiclassical_work(as_state(rho), omega); },
          py::arg("rho"), py::arg("omega"));
    m.def("thermo_report",
          [](const std::vector<double>& times, const std::vector<Matrix>& states, const GeneratorSpec& bath,
             const std::optional<GeneratorSpec>& load, const ChemicalPotentials& pot) {
              py::list out;
              for (const auto& r : thermo_report(as_trajectory(times, states), bath, load, pot))
                  out.append(report_dict(r));
              return out;
          },
          py::arg("times"), py::arg("states"), py::arg("gen_bath"), py::arg("gen_load"), py::arg("pot"),
          "First- and second-law report per sample (list of dicts keyed like the timeseries CSV).");

    // scenarios
    py::class_<Scenario>(m, "Scenario")
        .def_readonly("name", &Scenario::name)
        .def_readonly("generator", &Scenario::generator)
        .def_readonly("bath", &Scenario::bath)
        .def_readonly("load", &Scenario::load)
        .def_readonly("birth_death", &Scenario::birth_death)
        .def_readonly("pot", &Scenario::pot)
        .def_readonly("dim", &Scenario::dim)
        .def_readonly("t_final", &Scenario::t_final)
        .def_readonly("dt", &Scenario::dt)
        .def_readonly("sample_every", &Scenario::sample_every)
        .def_readonly("horizon", &Scenario::horizon)
        .def_readonly("parameters", &Scenario::parameters)
        .def_property_readonly("hamiltonian", [](const Scenario& s) { return s.hamiltonian.matrix(); })
        .def_property_readonly("initial_state", [](const Scenario& s) { return s.initial_state.matrix(); })
        .def("__repr__", [](const Scenario& s) { return "<Scenario " + s.name + " dim=" + std::to_string(s.dim) + ">"; });

    m.def("preset_names", &preset_names);
    m.def("preset_parameter_names", &preset_parameter_names, py::arg("name"));
    m.def("preset", &preset, py::arg("name"), py::arg("overrides") = Overrides{});
    m.def("analytic_energy",
          [](const ChemicalPotentials& pot, double gamma_down, double e0, double t) {
              return analytic_energy(chemical_engine(pot, gamma_down), e0, t);
          },
          py::arg("pot"), py::arg("gamma_down"), py::arg("e0"), py::arg("t"));
    m.def("chemical_engine",
          [](const ChemicalPotentials& pot, double gamma_down) {
              const ChemicalEngineParams e = chemical_engine(pot, gamma_down);
              py::dict d;
              d["gamma_down"] = e.gamma_down;
              d["gamma_up"] = e.gamma_up;
              d["delta_g"] = e.delta_g;
              d["amplifying"] = e.amplifying;
              return d;
          },
          py::arg("pot"), py::arg("gamma_down"));

    // cli
    m.def("run_config",
          [](const std::string& path, std::optional<std::string> out_dir, bool sweep_only) {
              cli::CommandOptions opt;
              opt.config_path = path;
              opt.out_dir = std::move(out_dir);
              opt.quiet = true;
              std::ostringstream out, err;
              const int code = sweep_only ? cli::sweep_command(opt, out, err) : cli::run_command(opt, out, err);
              return py::make_tuple(code, err.str());
          },
          py::arg("config_path"), py::arg("out_dir") = py::none(), py::arg("sweep_only") = false,
          "Runs a config file like the command-line tool; returns (exit code, error text).");
}
