#include "qengine/thermo.hpp"

#include "qengine/errors.hpp"
#include "qengine/linalg.hpp"
#include "qengine/log.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace qengine {
namespace {

constexpr double kMixing = 1e-12;
constexpr double kRankFloor = 1e-12;
constexpr double kEntropyCutoff = 1e-14;
constexpr double kSupportWeight = 1e-10;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_same_dim(int a, int b, const char* what) {
    if (a != b) {
        std::ostringstream os;
        os << what << ": dimensions " << a << " and " << b << " differ";
        throw DimensionMismatch(os.str());
    }
}

double entropy_from_values(const Eigen::VectorXd& values) {
    double s = 0.0;
    for (double lambda : values) {
        const double l = std::clamp(lambda, 0.0, 1.0);
        if (l >= kEntropyCutoff) s -= l * std::log(l);
    }
    return s;
}

// State and its logarithm after the rank-deficiency policy.
struct LoggedState {
    Matrix rho;
    Matrix log;
    Eigen::VectorXd raw_values;  // spectrum of the unmodified state
};

LoggedState logged_state(const DensityMatrix& state) {
    HermitianSpectrum spec = hermitian_spectrum(state.matrix());
    LoggedState out{state.matrix(), Matrix(), spec.values};
    const double min_value = spec.values.minCoeff();
    const bool deficient = spec.diagonal_input ? !(min_value > 0.0) : min_value < kRankFloor;
    if (deficient) {
        const int d = state.dim();
        for (Eigen::Index k = 0; k < spec.values.size(); ++k)
            spec.values(k) = (1.0 - kMixing) * std::max(spec.values(k), 0.0) + kMixing / d;
        out.rho = (1.0 - kMixing) * state.matrix();
        out.rho.diagonal().array() += kMixing / d;
        std::ostringstream os;
        os << "rank-deficient state (min eigenvalue " << min_value << ") mixed with " << kMixing
           << " of the maximally mixed state";
        log::debug(os.str());
    }
    out.log = apply_spectral(spec, [](double x) { return std::log(x); });
    return out;
}

double laser_omega(const GeneratorSpec& gen) {
    return std::visit(overloaded{
                          [](const LinearLaser& l) { return l.omega; },
                          [](const NonlinearLaser& l) { return l.omega; },
                          [](const LoadedLaser& l) { return l.omega; },
                          [](const auto&) -> double {
                              throw VariantMismatch("expected a single-mode laser generator");
                          },
                      },
                      gen.variant());
}

double load_delta(const GeneratorSpec& gen_load) {
    const auto* l = std::get_if<LoadedLaser>(&gen_load.variant());
    if (l == nullptr || l->gamma_up != 0.0 || l->gamma_down != 0.0)
        throw VariantMismatch("load generator must be a pure load dissipator (LoadedLaser with zero bath rates)");
    return l->delta;
}

double number_moment(const Matrix& rho, int power) {
    double m = 0.0;
    for (Eigen::Index n = 0; n < rho.rows(); ++n) m += std::pow(static_cast<double>(n), power) * rho(n, n).real();
    return m;
}

}  // namespace

void validate(const ChemicalPotentials& pot) {
    if (!(pot.beta > 0.0) || !std::isfinite(pot.beta)) throw DomainError("beta must be > 0");
    if (!(pot.omega > 0.0) || !std::isfinite(pot.omega)) throw DomainError("omega must be > 0");
    if (!std::isfinite(pot.mu_a) || !std::isfinite(pot.mu_b)) throw DomainError("chemical potentials must be finite");
}

// ---------------------------------------------------------------------------
// Entropies

double von_neumann_entropy(const DensityMatrix& rho) {
    return entropy_from_values(hermitian_spectrum(rho.matrix()).values);
}

double relative_entropy(const DensityMatrix& rho1, const DensityMatrix& rho2) {
    require_same_dim(rho1.dim(), rho2.dim(), "relative_entropy");
    const double s1 = von_neumann_entropy(rho1);
    const HermitianSpectrum spec2 = hermitian_spectrum(rho2.matrix());
    double cross = 0.0;
    for (Eigen::Index k = 0; k < spec2.values.size(); ++k) {
        const auto v = spec2.vectors.col(k);
        const double weight = (v.adjoint() * rho1.matrix() * v).value().real();
        const double mu = spec2.values(k);
        if (mu < kRankFloor) {
            if (weight > kSupportWeight) return std::numeric_limits<double>::infinity();
            continue;
        }
        cross += weight * std::log(mu);
    }
    return -s1 - cross;
}

Operator log_reference_chemical(const ChemicalPotentials& pot, FockSpace space) {
    validate(pot);
    const double slope = -pot.beta * pot.delta_g();
    Matrix m = Matrix::Zero(space.dim(), space.dim());
    for (int n = 0; n < space.dim(); ++n) m(n, n) = slope * n;
    return Operator(std::move(m));
}

Matrix regularized_log(const DensityMatrix& rho) { return logged_state(rho).log; }

double spohn_production(const GeneratorSpec& gen, const DensityMatrix& rho, const Operator& log_sigma) {
    require_same_dim(rho.dim(), log_sigma.dim(), "spohn_production");
    const LoggedState s = logged_state(rho);
    const Matrix l_rho = generator_apply(gen, Operator(s.rho)).matrix();
    return -trace_product(l_rho, s.log - log_sigma.matrix()).real();
}

// ---------------------------------------------------------------------------
// Currents and power

double heat_current_additive(const DensityMatrix& rho, const GeneratorSpec& gen_k, const Operator& hamiltonian) {
    require_same_dim(rho.dim(), hamiltonian.dim(), "heat_current_additive");
    return trace_product(rho.matrix(), adjoint_apply(gen_k, hamiltonian).matrix()).real();
}

double photon_flux(const DensityMatrix& rho, const GeneratorSpec& gen_bath) {
    if (!gen_bath.is_fock_laser()) throw VariantMismatch("photon_flux requires a single-mode laser generator");
    const Operator ln = adjoint_apply(gen_bath, number_operator(rho.space()));
    return trace_product(rho.matrix(), ln.matrix()).real();
}

double heat_current_chemical(double j, const ChemicalPotentials& pot) { return pot.delta_g() * j; }

double load_power(const DensityMatrix& rho, double omega, double delta) {
    if (!(delta >= 0.0)) throw DomainError("load_power: delta must be >= 0");
    return omega * delta * number_moment(rho.matrix(), 2);
}

double load_power(const PhotonDistribution& p, double omega, double delta) {
    if (!(delta >= 0.0)) throw DomainError("load_power: delta must be >= 0");
    const Eigen::VectorXd& q = p.probabilities();
    double m2 = 0.0;
    for (Eigen::Index n = 0; n < q.size(); ++n) m2 += static_cast<double>(n) * static_cast<double>(n) * q(n);
    return omega * delta * m2;
}

double residual_entropy_production(const DensityMatrix& rho, const GeneratorSpec& gen_load) {
    const LoggedState s = logged_state(rho);
    const Matrix l_rho = generator_apply(gen_load, Operator(s.rho)).matrix();
    return -trace_product(l_rho, s.log).real();
}

double residual_entropy_production(const PhotonDistribution& p, double delta) {
    if (!(delta >= 0.0)) throw DomainError("residual_entropy_production: delta must be >= 0");
    if (delta == 0.0) return 0.0;
    const Eigen::VectorXd& q = p.probabilities();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
        const double kk = static_cast<double>(k);
        const double here = kk * kk * q(k);
        const double next = k + 1 < q.size() ? (kk + 1.0) * (kk + 1.0) * q(k + 1) : 0.0;
        const double diff = here - next;
        if (diff == 0.0) continue;
        if (q(k) <= 0.0) return std::numeric_limits<double>::infinity();
        sum += diff * std::log(q(k));
    }
    return delta * sum;
}

// ---------------------------------------------------------------------------
// Work

namespace {

std::vector<Eigen::Index> descending_order(const Eigen::VectorXd& values) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
    return idx;
}

}  // namespace

DensityMatrix passive_state(const DensityMatrix& rho, const Operator& hamiltonian) {
    require_same_dim(rho.dim(), hamiltonian.dim(), "passive_state");
    if (!hamiltonian.is_hermitian(1e-10)) throw DomainError("passive_state: H must be Hermitian");
    const HermitianSpectrum energies = hermitian_spectrum(hamiltonian.matrix());
    const HermitianSpectrum pops = hermitian_spectrum(rho.matrix());
    const auto order = descending_order(pops.values);
    Matrix out = Matrix::Zero(rho.dim(), rho.dim());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto e = energies.vectors.col(static_cast<Eigen::Index>(k));
        out.noalias() += std::max(pops.values(order[k]), 0.0) * (e * e.adjoint());
    }
    out /= out.trace().real();
    return DensityMatrix(Operator(std::move(out)));
}

double ergotropy(const DensityMatrix& rho, const Operator& hamiltonian) {
    require_same_dim(rho.dim(), hamiltonian.dim(), "ergotropy");
    if (!hamiltonian.is_hermitian(1e-10)) throw DomainError("ergotropy: H must be Hermitian");
    const HermitianSpectrum energies = hermitian_spectrum(hamiltonian.matrix());
    const HermitianSpectrum pops = hermitian_spectrum(rho.matrix());
    const auto order = descending_order(pops.values);
    double passive = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k)
        passive += pops.values(order[k]) * energies.values(static_cast<Eigen::Index>(k));
    return trace_product(rho.matrix(), hamiltonian.matrix()).real() - passive;
}

double semiclassical_work(const DensityMatrix& rho, double omega) {
    const Complex a = expectation(rho, annihilation_matrix(rho.space()));
    return omega * std::norm(a);
}

// ---------------------------------------------------------------------------
// Reports

std::vector<double> sampled_derivative(const std::vector<double>& t, const std::vector<double>& f) {
    if (t.size() != f.size()) throw DimensionMismatch("sampled_derivative: times and values differ in length");
    const std::size_t n = t.size();
    if (n < 3) throw InsufficientSamples("derivatives need at least 3 samples, got " + std::to_string(n));
    std::vector<double> d(n);
    d[0] = (f[1] - f[0]) / (t[1] - t[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (t[i + 1] - t[i - 1]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (t[n - 1] - t[n - 2]);
    return d;
}

namespace {

std::vector<ThermoReport> laser_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                       const std::optional<GeneratorSpec>& gen_load, const ChemicalPotentials& pot,
                                       bool second_law) {
    validate(pot);
    if (traj.states.size() < 3)
        throw InsufficientSamples("reports need at least 3 samples, got " + std::to_string(traj.states.size()));
    const double omega = laser_omega(gen_bath);
    if (std::abs(omega - pot.omega) > 1e-12 * std::max(1.0, std::abs(omega)))
        throw DomainError("bath generator frequency differs from the chemical-potential omega");
    const double delta = gen_load ? load_delta(*gen_load) : 0.0;

    const FockSpace space = traj.states.front().space();
    const int dim = space.dim();
    const Matrix flux_obs = adjoint_apply(gen_bath, number_operator(space)).matrix();

    // Bath term of the second law: -beta J for a chemical bath in detailed
    // balance, Tr(rho L^*(ln sigma)) otherwise.
    std::optional<Matrix> bath_log_obs;
    if (second_law) {
        const auto* lin = std::get_if<LinearLaser>(&gen_bath.variant());
        if (lin == nullptr) {
            const Eigen::VectorXd logw = log_stationary_weights(matching_birth_death(gen_bath), dim - 1);
            if (!logw.allFinite()) throw DomainError("bath stationary weights vanish on part of the Fock space");
            const Operator ln_sigma(Matrix(logw.cast<Complex>().asDiagonal()));
            bath_log_obs = adjoint_apply(gen_bath, ln_sigma).matrix();
        } else {
            const double ratio = lin->gamma_down > 0.0 ? lin->gamma_up / lin->gamma_down : 0.0;
            const double expected = std::exp(-pot.beta * pot.delta_g());
            if (lin->gamma_down <= 0.0 || std::abs(ratio - expected) > 1e-9 * expected)
                log::warn("bath rates are not in detailed balance with the chemical potentials; "
                          "-beta J is not a Spohn bound for this bath");
        }
    }

    const std::size_t n = traj.states.size();
    std::vector<ThermoReport> out(n);
    std::vector<double> energy(n), entropy(n), bath_term(n);
    for (std::size_t i = 0; i < n; ++i) {
        const DensityMatrix& rho = traj.states[i];
        require_same_dim(rho.dim(), dim, "report");
        ThermoReport& r = out[i];
        r.time = traj.times[i];
        r.photon_number = number_moment(rho.matrix(), 1);
        r.energy = omega * r.photon_number;
        r.photon_flux = trace_product(rho.matrix(), flux_obs).real();
        r.heat_current = heat_current_chemical(r.photon_flux, pot);
        r.j_a = -r.photon_flux;
        r.j_b = r.photon_flux;
        r.load_power = omega * delta * number_moment(rho.matrix(), 2);
        r.leakage = i < traj.leakage.size() ? traj.leakage[i] : top_occupancy(rho);
        energy[i] = r.energy;
        if (second_law) {
            const LoggedState s = logged_state(rho);
            r.entropy = entropy_from_values(s.raw_values);
            if (gen_load) {
                const Matrix l_rho = generator_apply(*gen_load, Operator(s.rho)).matrix();
                r.residual_production = -trace_product(l_rho, s.log).real();
            }
            bath_term[i] = bath_log_obs ? trace_product(rho.matrix(), *bath_log_obs).real()
                                        : -pot.beta * r.heat_current;
        } else {
            r.entropy = std::numeric_limits<double>::quiet_NaN();
            r.residual_production = std::numeric_limits<double>::quiet_NaN();
            r.second_law_lhs = std::numeric_limits<double>::quiet_NaN();
        }
        entropy[i] = r.entropy;
    }

    const std::vector<double> de = sampled_derivative(traj.times, energy);
    for (std::size_t i = 0; i < n; ++i) {
        ThermoReport& r = out[i];
        r.first_law_residual = de[i] - (r.heat_current - pot.mu_a * r.j_a - pot.mu_b * r.j_b - r.load_power);
    }
    if (second_law) {
        const std::vector<double> ds = sampled_derivative(traj.times, entropy);
        for (std::size_t i = 0; i < n; ++i) out[i].second_law_lhs = ds[i] + bath_term[i] - out[i].residual_production;
    }
    return out;
}

}  // namespace

std::vector<ThermoReport> first_law_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                           const std::optional<GeneratorSpec>& gen_load,
                                           const ChemicalPotentials& pot) {
    return laser_report(traj, gen_bath, gen_load, pot, false);
}

std::vector<ThermoReport> second_law_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                            const std::optional<GeneratorSpec>& gen_load,
                                            const ChemicalPotentials& pot) {
    return laser_report(traj, gen_bath, gen_load, pot, true);
}

std::vector<ThermoReport> thermo_report(const Trajectory& traj, const GeneratorSpec& gen_bath,
                                        const std::optional<GeneratorSpec>& gen_load, const ChemicalPotentials& pot) {
    return laser_report(traj, gen_bath, gen_load, pot, true);
}

std::vector<ThermoReport> davies_report(const Trajectory& traj, const GeneratorSpec& gen) {
    const auto* d = std::get_if<DaviesNLevel>(&gen.variant());
    if (d == nullptr) throw VariantMismatch("davies_report requires a Davies generator");
    if (traj.states.size() < 3)
        throw InsufficientSamples("reports need at least 3 samples, got " + std::to_string(traj.states.size()));
    const Matrix& h = d->hamiltonian.matrix();
    std::vector<Matrix> current_obs;
    for (std::size_t k = 0; k < d->bath_betas.size(); ++k)
        current_obs.push_back(
            adjoint_apply(davies_bath_component(gen, static_cast<int>(k)), d->hamiltonian).matrix());

    const std::size_t n = traj.states.size();
    std::vector<ThermoReport> out(n);
    std::vector<double> energy(n), entropy(n), entropy_flow(n);
    for (std::size_t i = 0; i < n; ++i) {
        const DensityMatrix& rho = traj.states[i];
        require_same_dim(rho.dim(), d->hamiltonian.dim(), "davies_report");
        ThermoReport& r = out[i];
        r.time = traj.times[i];
        r.energy = trace_product(rho.matrix(), h).real();
        r.entropy = von_neumann_entropy(rho);
        double flow = 0.0;
        for (std::size_t k = 0; k < current_obs.size(); ++k) {
            const double jk = trace_product(rho.matrix(), current_obs[k]).real();
            r.heat_current += jk;
            flow += d->bath_betas[k] * jk;
        }
        r.leakage = i < traj.leakage.size() ? traj.leakage[i] : 0.0;
        energy[i] = r.energy;
        entropy[i] = r.entropy;
        entropy_flow[i] = flow;
    }
    const std::vector<double> de = sampled_derivative(traj.times, energy);
    const std::vector<double> ds = sampled_derivative(traj.times, entropy);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].first_law_residual = de[i] - out[i].heat_current;
        out[i].second_law_lhs = ds[i] - entropy_flow[i];
    }
    return out;
}

}  // namespace qengine
