// lindblad.hpp: GKLS generators (Schrödinger and Heisenberg pictures), RK4
// evolution, and stationary states.
//
// Single-mode laser variants are applied in a ladder form: every jump operator
// shifts the photon number by one, so L(rho)_{mn} only couples rho_{mn},
// rho_{m+1,n+1} and rho_{m-1,n-1}. The same generators can be expanded into
// dense jump-operator form with to_dense(); both routes must agree.

#pragma once

#include "qengine/fock.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qengine {

// Function of the photon number n, evaluated on n = 0..dim-1.
using LevelFunction = std::function<double(int)>;

struct GeneralGKLS {
    Operator hamiltonian;
    std::vector<Operator> jumps;
};

// -i omega [a^dag a, .] + gamma_down D[a] + gamma_up D[a^dag]
struct LinearLaser {
    double omega;
    double gamma_up;
    double gamma_down;
};

// -i omega [a^dag a, .] + D[a g_down(a^dag a)] + D[a^dag g_up(a^dag a)]
struct NonlinearLaser {
    double omega;
    LevelFunction g_up;
    LevelFunction g_down;
};

// Linear bath plus the load dissipator delta D[a sqrt(a^dag a)].
struct LoadedLaser {
    double omega;
    double gamma_up;
    double gamma_down;
    double delta;
};

// One secular jump of a Davies generator: sqrt(rate) * op, with op an
// eigenoperator of [H, .] at the given Bohr frequency.
struct DaviesJump {
    int bath;
    double bohr_frequency;  // energy removed from the system by the jump
    double rate;
    Operator op;
};

struct DaviesNLevel {
    Operator hamiltonian;
    std::vector<DaviesJump> jumps;
    std::vector<double> bath_betas;
};

class GeneratorSpec {
public:
    using Variant = std::variant<GeneralGKLS, LinearLaser, NonlinearLaser, LoadedLaser, DaviesNLevel>;

    // Factories validate the variant invariants and throw DomainError /
    // DimensionMismatch on violation.
    static GeneratorSpec general(Operator hamiltonian, std::vector<Operator> jumps);
    static GeneratorSpec linear_laser(double omega, double gamma_up, double gamma_down);
    static GeneratorSpec nonlinear_laser(double omega, LevelFunction g_up, LevelFunction g_down);
    static GeneratorSpec loaded_laser(double omega, double gamma_up, double gamma_down, double delta);
    // Checks Hermiticity of H, nonnegative rates and the KMS pairing
    // rate(-w) = exp(-beta w) rate(w) for every jump with w > 0.
    static GeneratorSpec davies(DaviesNLevel davies);

    const Variant& variant() const noexcept { return v_; }
    std::string_view kind() const noexcept;

    // True for the three single-mode laser variants.
    bool is_fock_laser() const noexcept;
    // Required dimension, or 0 when the variant adapts to any Fock dimension.
    int fixed_dim() const noexcept;

private:
    explicit GeneratorSpec(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

// D[V] rho = V rho V^dag - 1/2 {V^dag V, rho}.
Operator dissipator_apply(const Operator& v, const Operator& rho);

Operator generator_apply(const GeneratorSpec& gen, const DensityMatrix& rho);
Operator generator_apply(const GeneratorSpec& gen, const Operator& x);
// Heisenberg picture L*(A).
Operator adjoint_apply(const GeneratorSpec& gen, const Operator& a);

// Equivalent GeneralGKLS on a space of the given dimension.
GeneratorSpec to_dense(const GeneratorSpec& gen, int dim);

// Birth and death rates Gamma_up[n] = (n+1)|g_up(n)|^2, Gamma_down[n] = n|g_down(n)|^2
// summed over channels; Gamma_up at the top level is zero (truncated a^dag).
struct LadderRates {
    Eigen::VectorXd up;
    Eigen::VectorXd down;
};
LadderRates ladder_rates(const GeneratorSpec& gen, int dim);

// Rough spectral radius of the generator; used for the RK4 step check.
double generator_norm_estimate(const GeneratorSpec& gen, int dim);

// Column-major vectorization: vec(L rho) = superoperator * vec(rho).
Matrix superoperator_matrix(const GeneratorSpec& gen, int dim);

struct EvolveOptions {
    // TruncationError when the top Fock level occupancy exceeds this.
    double leakage_limit = 1e-6;
    // StabilityError when the trace moves by more than this in one step.
    double trace_drift_limit = 1e-6;
    // Full density-matrix validation of each sample at this tolerance.
    bool validate_samples = true;
    double sample_tolerance = 1e-8;
};

struct SampleCorrection {
    double hermiticity;  // max |rho - rho^dag| removed
    double trace;        // |Tr rho - 1| removed
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    std::vector<double> leakage;
    std::vector<SampleCorrection> corrections;
    std::vector<std::string> warnings;
};

// Classic fixed-step RK4 on d rho/dt = L rho. The step is shrunk so that an
// integer number of steps lands on t_final. Every `sample_every` steps (and at
// the final step) the state is re-Hermitized and trace-renormalized.
Trajectory evolve(const GeneratorSpec& gen, const DensityMatrix& rho0, double t_final, double dt, int sample_every,
                  const EvolveOptions& options = {});

struct StationaryOptions {
    double singular_value_threshold = 1e-6;
    double residual_limit = 1e-8;
    // Laser variants are phase covariant: the generator preserves each
    // coherence order m - n. With this set the kernel is computed on the
    // diagonal block and the other blocks are checked for kernel vectors;
    // otherwise the full dim^2 x dim^2 superoperator is decomposed.
    bool use_phase_blocks = true;
};

// Null space of the vectorized generator via SVD. `dim` is required for the
// laser variants and ignored for variants that fix their own dimension.
DensityMatrix stationary_state(const GeneratorSpec& gen, int dim = 0, const StationaryOptions& options = {});

// Secular (Davies) generator for a static Hamiltonian. Each coupling operator
// is split into eigenoperators of [H, .]; the downward jump at Bohr frequency
// w > 0 gets rate(w), the upward one exp(-beta_k w) rate(w).
struct DaviesCoupling {
    int bath;
    Operator op;
    std::function<double(double)> rate;  // gamma(w) for w >= 0
};

GeneratorSpec davies_generator(const Operator& hamiltonian, const std::vector<DaviesCoupling>& couplings,
                               const std::vector<double>& bath_betas);

// Dissipative part belonging to one bath of a Davies generator.
GeneratorSpec davies_bath_component(const GeneratorSpec& gen, int bath);

// Gibbs state exp(-beta H)/Z.
DensityMatrix gibbs_state(const Operator& hamiltonian, double beta);

}  // namespace qengine
