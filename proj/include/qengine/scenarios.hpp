// scenarios.hpp: chemical-engine parameterization and named model presets
//
// All preset numbers are choices of this library; the underlying models do
// not come with reference values. Every preset can be adjusted through a map
// of named overrides (see preset_parameter_names).

#pragma once

#include "qengine/birthdeath.hpp"
#include "qengine/lindblad.hpp"
#include "qengine/thermo.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qengine {

struct ChemicalEngineParams {
    ChemicalPotentials pot;
    double gamma_down;
    double gamma_up;  // gamma_down exp(-beta dG)
    double delta_g;
    bool amplifying;  // dG < 0
};

ChemicalEngineParams chemical_engine(const ChemicalPotentials& pot, double gamma_down);

// Mean energy of the linear laser started with energy e0:
//   E(t) = e^{kt} e0 + (e^{kt} - 1) omega gamma_up / k,  k = gamma_up - gamma_down,
// with the limit e0 + omega gamma_up t at k = 0.
double analytic_energy(const ChemicalEngineParams& params, double e0, double t);

struct Scenario {
    std::string name;
    GeneratorSpec generator;                  // full dynamics
    std::optional<GeneratorSpec> bath;        // laser presets: bath part
    std::optional<GeneratorSpec> load;        // loaded laser: load dissipator
    std::optional<BirthDeathModel> birth_death;
    std::optional<ChemicalPotentials> pot;
    std::optional<ChemicalEngineParams> engine;  // linear-bath presets
    Operator hamiltonian;
    int dim;
    double t_final;
    double dt;
    int sample_every;
    // Transient presets: latest time at which the truncation is trusted.
    std::optional<double> horizon;
    DensityMatrix initial_state;
    std::map<std::string, double> parameters;  // effective values, including derived ones
};

using Overrides = std::map<std::string, double>;

const std::vector<std::string>& preset_names();
// Keys accepted by preset(name, overrides) for this preset. All presets also
// take dim, t_final, dt and sample_every; the transient preset takes
// allow_beyond_horizon (nonzero to run past the horizon).
std::vector<std::string> preset_parameter_names(const std::string& name);

// Throws UnknownPreset for an unknown name, DomainError for an unknown key or
// an invalid value.
Scenario preset(const std::string& name, const Overrides& overrides = {});

// ln of the stationary state of the full generator, used as the Spohn
// reference: birth-death log weights for laser presets, the numerical
// stationary state otherwise.
Operator stationary_log_reference(const Scenario& s);

// Expected photon number and a dimension that holds it: n + 8 sqrt(n) + 1,
// enlarged until the stationary tail of `model` is below 1e-12.
int dimension_for(const BirthDeathModel& model);

// Time at which the top-level occupancy of a Fock ladder of size `dim`, started
// from p0 (size dim), first reaches `limit` under `model`; returns t_max when it
// does not within t_max.
double truncation_horizon(const BirthDeathModel& model, const PhotonDistribution& p0, double limit, double t_max,
                          double dt);

}  // namespace qengine
