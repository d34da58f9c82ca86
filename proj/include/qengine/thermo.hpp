// thermo.hpp: entropies, entropy production, currents, power and work
//
// Conventions: the system Hamiltonian of the laser models is omega a^dag a;
// heat and particle currents are positive when flowing into the system.
// Logarithms of states come from Hermitian eigendecompositions. A state with
// eigenvalues too close to zero for ln rho is replaced by
// (1 - eps) rho + eps I/D with eps = 1e-12 before any entropy-production
// formula is evaluated (logged at debug level).

#pragma once

#include "qengine/birthdeath.hpp"
#include "qengine/lindblad.hpp"

#include <optional>
#include <vector>

namespace qengine {

struct ChemicalPotentials {
    double beta;
    double mu_a;
    double mu_b;
    double omega;

    // Gibbs free energy released per photon: omega + mu_B - mu_A.
    double delta_g() const noexcept { return omega + mu_b - mu_a; }
};

// Throws DomainError unless beta > 0 and omega > 0.
void validate(const ChemicalPotentials& pot);

struct ThermoReport {
    double time = 0.0;
    double energy = 0.0;         // E = omega <N>
    double photon_number = 0.0;  // <N>
    double entropy = 0.0;        // S
    double photon_flux = 0.0;    // j
    double heat_current = 0.0;   // J
    double j_a = 0.0;            // -j
    double j_b = 0.0;            // +j
    double load_power = 0.0;     // P
    double residual_production = 0.0;
    double first_law_residual = 0.0;
    double second_law_lhs = 0.0;
    double leakage = 0.0;
};

double von_neumann_entropy(const DensityMatrix& rho);

// S(rho1 | rho2); +infinity when rho1 has weight > 1e-10 on the numerical
// kernel (eigenvalues < 1e-12) of rho2.
double relative_entropy(const DensityMatrix& rho1, const DensityMatrix& rho2);

// ln of the unnormalized chemical reference exp(-beta dG a^dag a): the
// diagonal operator -beta dG n.
Operator log_reference_chemical(const ChemicalPotentials& pot, FockSpace space);

// ln rho with the eps-mixing policy applied when rho is (numerically) rank deficient.
Matrix regularized_log(const DensityMatrix& rho);

// -Tr(L rho (ln rho - ln sigma)); nonnegative whenever sigma is a stationary
// state of gen (normalization of sigma is irrelevant).
double spohn_production(const GeneratorSpec& gen, const DensityMatrix& rho, const Operator& log_sigma);

// J_k = Tr(rho L_k^*(H)).
double heat_current_additive(const DensityMatrix& rho, const GeneratorSpec& gen_k, const Operator& hamiltonian);

// j = Tr(rho L_bath^*(a^dag a)). Throws VariantMismatch for non-laser generators.
double photon_flux(const DensityMatrix& rho, const GeneratorSpec& gen_bath);

// J = dG j.
double heat_current_chemical(double j, const ChemicalPotentials& pot);

// P = omega delta <(a^dag a)^2>.
double load_power(const DensityMatrix& rho, double omega, double delta);
double load_power(const PhotonDistribution& p, double omega, double delta);

// -Tr(rho L_load^*(ln rho)).
double residual_entropy_production(const DensityMatrix& rho, const GeneratorSpec& gen_load);
// Population form for a diagonal state under delta D[a sqrt(a^dag a)]:
// delta sum_k (k^2 p_k - (k+1)^2 p_{k+1}) ln p_k.
double residual_entropy_production(const PhotonDistribution& p, double delta);

// Eigenvalues of rho in decreasing order placed on the energy eigenstates in
// increasing order. Ties are broken by the index order of the decomposition.
DensityMatrix passive_state(const DensityMatrix& rho, const Operator& hamiltonian);
double ergotropy(const DensityMatrix& rho, const Operator& hamiltonian);
// omega |Tr(rho a)|^2.
double semiclassical_work(const DensityMatrix& rho, double omega);

// Derivative of sampled values: centered differences inside, one-sided at the
// ends. Throws InsufficientSamples for fewer than 3 points.
std::vector<double> sampled_derivative(const std::vector<double>& times, const std::vector<double>& values);

// Reports along a laser trajectory. `gen_load` is the load dissipator
// (nullopt for a laser without load).
//
// first law:  dE/dt - (J - mu_A j_A - mu_B j_B - P)
// second law: dS/dt - beta J - dS_res, where dS_res = -Tr(rho L_load^*(ln rho)).
// For a bath that is not in chemical detailed balance (nonlinear rates) the
// term -beta J is replaced by Tr(rho L_bath^*(ln sigma_bath)) with sigma_bath
// the bath's own stationary weights, which keeps the inequality exact.
std::vector<ThermoReport> first_law_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                           const std::optional<GeneratorSpec>& gen_load,
                                           const ChemicalPotentials& pot);
std::vector<ThermoReport> second_law_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                            const std::optional<GeneratorSpec>& gen_load,
                                            const ChemicalPotentials& pot);
// Both laws in one pass.
std::vector<ThermoReport> thermo_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                        const std::optional<GeneratorSpec>& gen_load, const ChemicalPotentials& pot);

// Reports along a Davies trajectory with a static Hamiltonian: J is the sum of
// the bath currents, first law dE/dt - sum_k J_k, second law dS/dt - sum_k beta_k J_k.
// Photon and molecular fields are zero.
std::vector<ThermoReport> davies_report(const Trajectory& traj, const GeneratorSpec& gen);

}  // namespace qengine
