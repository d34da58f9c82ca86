#include "qengine/scenarios.hpp"

#include "qengine/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace qengine {

ChemicalEngineParams chemical_engine(const ChemicalPotentials& pot, double gamma_down) {
    validate(pot);
    if (!(gamma_down > 0.0) || !std::isfinite(gamma_down)) throw DomainError("gamma_down must be > 0");
    const double dg = pot.delta_g();
    return {pot, gamma_down, gamma_down * std::exp(-pot.beta * dg), dg, dg < 0.0};
}

double analytic_energy(const ChemicalEngineParams& params, double e0, double t) {
    const double k = params.gamma_up - params.gamma_down;
    const double omega = params.pot.omega;
    if (k == 0.0) return e0 + omega * params.gamma_up * t;
    return std::exp(k * t) * e0 + std::expm1(k * t) * omega * params.gamma_up / k;
}

namespace {

constexpr double kTailTarget = 1e-12;
constexpr double kHorizonLeakage = 1e-8;

const std::vector<std::string> kCommonKeys = {"dim", "t_final", "dt", "sample_every"};

// Records every key read so that unknown overrides can be rejected.
class ParamReader {
public:
    ParamReader(std::string preset, const Overrides& overrides) : preset_(std::move(preset)), overrides_(overrides) {}

    double get(const std::string& key, double fallback) {
        const auto it = overrides_.find(key);
        const double v = it == overrides_.end() ? fallback : it->second;
        if (!std::isfinite(v)) throw DomainError(preset_ + ": parameter '" + key + "' must be finite");
        effective_[key] = v;
        return v;
    }

    std::optional<double> find(const std::string& key) {
        known_.insert(key);
        const auto it = overrides_.find(key);
        if (it == overrides_.end()) return std::nullopt;
        if (!std::isfinite(it->second)) throw DomainError(preset_ + ": parameter '" + key + "' must be finite");
        effective_[key] = it->second;
        return it->second;
    }

    int get_int(const std::string& key, int fallback) {
        const auto v = find(key);
        if (!v) {
            effective_[key] = fallback;
            return fallback;
        }
        if (*v != std::floor(*v) || std::abs(*v) > 1e9)
            throw DomainError(preset_ + ": parameter '" + key + "' must be an integer");
        return static_cast<int>(*v);
    }

    void finish() const {
        for (const auto& [key, value] : overrides_) {
            (void)value;
            if (!effective_.count(key) && !known_.count(key))
                throw DomainError("unknown parameter '" + key + "' for preset " + preset_);
        }
    }

    std::map<std::string, double>& effective() { return effective_; }

private:
    std::string preset_;
    const Overrides& overrides_;
    std::map<std::string, double> effective_;
    std::set<std::string> known_;
};

double positive(double v, const char* name) {
    if (!(v > 0.0)) throw DomainError(std::string(name) + " must be > 0");
    return v;
}

// Largest value of the form {1, 2, 5} x 10^k not above x.
double nice_floor(double x) {
    const double decade = std::pow(10.0, std::floor(std::log10(x)));
    for (double m : {5.0, 2.0, 1.0})
        if (m * decade <= x * (1.0 + 1e-12)) return m * decade;
    return decade;
}

int coherent_dimension(double alpha) {
    const double n = alpha * alpha;
    int d = std::max(2, static_cast<int>(std::ceil(n + 8.0 * std::sqrt(n))) + 1);
    while (coherent_tail_mass(Complex(alpha, 0.0), d) > kTailTarget) ++d;
    return d;
}

// Fills dim-dependent timing defaults: dt from the generator norm, and enough
// sampling for at least 200 samples when the step count allows it.
void set_timing(Scenario& s, ParamReader& r, double default_t_final) {
    s.t_final = positive(r.get("t_final", default_t_final), "t_final");
    const double auto_dt = std::min(0.01, nice_floor(0.9 / generator_norm_estimate(s.generator, s.dim)));
    s.dt = positive(r.get("dt", auto_dt), "dt");
    const double steps = std::ceil(s.t_final / s.dt - 1e-9);
    const int auto_every = std::max(1, static_cast<int>(steps / 400.0));
    s.sample_every = r.get_int("sample_every", auto_every);
    if (s.sample_every < 1) throw DomainError("sample_every must be >= 1");
}

int resolve_dim_override(ParamReader& r, int auto_dim) {
    const int d = r.get_int("dim", auto_dim);
    if (d < 2) throw DomainError("dim must be >= 2");
    return d;
}

ChemicalPotentials read_pot(ParamReader& r, double omega, double beta, double mu_a, double mu_b) {
    ChemicalPotentials pot{r.get("beta", beta), r.get("mu_a", mu_a), r.get("mu_b", mu_b), r.get("omega", omega)};
    validate(pot);
    return pot;
}

void add_engine_parameters(Scenario& s, const ChemicalEngineParams& e) {
    s.parameters["gamma_up"] = e.gamma_up;
    s.parameters["delta_g"] = e.delta_g;
}

Scenario make_below_threshold(ParamReader& r) {
    const ChemicalPotentials pot = read_pot(r, 1.0, std::log(2.0), 0.0, 0.0);
    const ChemicalEngineParams e = chemical_engine(pot, r.get("gamma_down", 1.0));
    if (e.delta_g <= 0.0) throw DomainError("below_threshold needs omega + mu_B - mu_A > 0");
    const double alpha = r.get("alpha", 1.5);
    const BirthDeathModel model = BirthDeathModel::linear(e.gamma_up, e.gamma_down);
    const int dim = resolve_dim_override(r, std::max(dimension_for(model), coherent_dimension(alpha)));
    const FockSpace space(dim);
    const GeneratorSpec gen = GeneratorSpec::linear_laser(pot.omega, e.gamma_up, e.gamma_down);
    Scenario s{"below_threshold", gen, gen, std::nullopt, model, pot, e,
               Complex(pot.omega) * number_operator(space), dim, 0.0, 0.0, 1, std::nullopt,
               coherent_state(Complex(alpha, 0.0), space), {}};
    set_timing(s, r, 10.0 / (e.gamma_down - e.gamma_up));
    add_engine_parameters(s, e);
    return s;
}

Scenario make_above_threshold(ParamReader& r) {
    const ChemicalPotentials pot = read_pot(r, 1.0, 1.0, 1.0 + std::log(2.0), 0.0);
    const ChemicalEngineParams e = chemical_engine(pot, r.get("gamma_down", 0.5));
    if (!e.amplifying) throw DomainError("above_threshold_transient needs omega + mu_B - mu_A < 0");
    const double alpha = r.get("alpha", 2.0);
    const int dim = resolve_dim_override(r, 128);
    const FockSpace space(dim);
    const GeneratorSpec gen = GeneratorSpec::linear_laser(pot.omega, e.gamma_up, e.gamma_down);
    const BirthDeathModel model = BirthDeathModel::linear(e.gamma_up, e.gamma_down);
    Scenario s{"above_threshold_transient", gen, gen, std::nullopt, model, pot, e,
               Complex(pot.omega) * number_operator(space), dim, 0.0, 0.0, 1, std::nullopt,
               coherent_state(Complex(alpha, 0.0), space), {}};

    const double auto_dt = std::min(0.01, nice_floor(0.9 / generator_norm_estimate(gen, dim)));
    const double dt = positive(r.get("dt", auto_dt), "dt");
    const PhotonDistribution p0(s.initial_state.populations());
    const double t_max = 50.0 / (e.gamma_up - e.gamma_down);
    const double horizon = truncation_horizon(model, p0, kHorizonLeakage, t_max, dt);
    s.horizon = horizon;
    s.parameters["horizon"] = horizon;

    const double default_t = std::max(dt, std::floor(horizon / dt) * dt);
    set_timing(s, r, default_t);
    const bool allow = r.get("allow_beyond_horizon", 0.0) != 0.0;
    if (s.t_final > horizon && !allow)
        throw DomainError("t_final " + std::to_string(s.t_final) + " exceeds the truncation horizon " +
                          std::to_string(horizon) + " for dim " + std::to_string(dim) +
                          "; set allow_beyond_horizon to run past it");
    add_engine_parameters(s, e);
    return s;
}

Scenario make_saturated(ParamReader& r, bool pump) {
    const double a = positive(r.get("A", 2.0), "A");
    const double b = positive(r.get("B", 1.0), "B");
    const double c = positive(r.get("C", 0.04), "C");
    const double omega = positive(r.get("omega", 1.0), "omega");
    const double beta = positive(r.get("beta", 1.0), "beta");
    const double alpha = r.get("alpha", 2.0);
    // Effective chemical potentials with exp(-beta dG) = A/B.
    const ChemicalPotentials pot{beta, omega + std::log(a / b) / beta, 0.0, omega};

    const BirthDeathModel model =
        pump ? BirthDeathModel::saturated_pump(a, b, c) : BirthDeathModel::saturated_damp(a, b, c);
    const GeneratorSpec gen =
        pump ? GeneratorSpec::nonlinear_laser(
                   omega, [a, c](int n) { return std::sqrt(a / (1.0 + c * (n + 1.0))); },
                   [b](int) { return std::sqrt(b); })
             : GeneratorSpec::nonlinear_laser(
                   omega, [a](int) { return std::sqrt(a); }, [b, c](int n) { return std::sqrt(b * (1.0 + c * n)); });
    const int dim = resolve_dim_override(r, std::max(dimension_for(model), coherent_dimension(alpha)));
    const FockSpace space(dim);
    Scenario s{pump ? "saturated_pump" : "saturated_damp", gen, gen, std::nullopt, model, pot, std::nullopt,
               Complex(omega) * number_operator(space), dim, 0.0, 0.0, 1, std::nullopt,
               coherent_state(Complex(alpha, 0.0), space), {}};
    set_timing(s, r, 10.0);
    s.parameters["delta_g"] = pot.delta_g();
    return s;
}

Scenario make_loaded(ParamReader& r) {
    const ChemicalPotentials pot = read_pot(r, 1.0, 1.0, 1.0 + std::log(2.0), 0.0);
    const ChemicalEngineParams e = chemical_engine(pot, r.get("gamma_down", 1.0));
    const double delta = positive(r.get("delta", 0.01), "delta");
    if (delta / e.gamma_down > 0.01) throw DomainError("loaded_laser needs delta / gamma_down <= 0.01");
    if (e.gamma_up / delta < 100.0) throw DomainError("loaded_laser needs gamma_up / delta >= 100");
    const double initial_mean = positive(r.get("initial_mean", 2.0), "initial_mean");

    const BirthDeathModel model = BirthDeathModel::loaded(e.gamma_up, e.gamma_down, delta);
    const int dim = resolve_dim_override(r, dimension_for(model));
    const FockSpace space(dim);
    const GeneratorSpec gen = GeneratorSpec::loaded_laser(pot.omega, e.gamma_up, e.gamma_down, delta);
    Scenario s{"loaded_laser",
               gen,
               GeneratorSpec::linear_laser(pot.omega, e.gamma_up, e.gamma_down),
               GeneratorSpec::loaded_laser(0.0, 0.0, 0.0, delta),
               model,
               pot,
               e,
               Complex(pot.omega) * number_operator(space),
               dim,
               0.0,
               0.0,
               1,
               std::nullopt,
               thermal_state(std::log1p(1.0 / initial_mean), space),
               {}};
    set_timing(s, r, 12.0);
    add_engine_parameters(s, e);
    s.parameters["nbar_estimate"] = e.gamma_up / delta;
    return s;
}

Scenario make_two_bath_qubit(ParamReader& r) {
    const double omega = positive(r.get("omega", 1.0), "omega");
    const double beta_hot = positive(r.get("beta_hot", 0.5), "beta_hot");
    const double beta_cold = positive(r.get("beta_cold", 2.0), "beta_cold");
    const double gamma_hot = positive(r.get("gamma_hot", 1.0), "gamma_hot");
    const double gamma_cold = positive(r.get("gamma_cold", 0.5), "gamma_cold");
    if (r.get_int("dim", 2) != 2) throw DomainError("two_bath_qubit has dimension 2");

    Matrix h = Matrix::Zero(2, 2);
    h(1, 1) = omega;
    Matrix sx(2, 2);
    sx << 0.0, 1.0, 1.0, 0.0;
    const Operator hamiltonian(h);
    const std::vector<DaviesCoupling> couplings = {
        {0, Operator(sx), [gamma_hot](double) { return gamma_hot; }},
        {1, Operator(sx), [gamma_cold](double) { return gamma_cold; }},
    };
    const GeneratorSpec gen = davies_generator(hamiltonian, couplings, {beta_hot, beta_cold});
    Matrix plus = Matrix::Constant(2, 2, 0.5);
    Scenario s{"two_bath_qubit", gen, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
               hamiltonian, 2, 0.0, 0.0, 1, std::nullopt, DensityMatrix(Operator(plus)), {}};
    set_timing(s, r, 10.0);
    return s;
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"below_threshold", "above_threshold_transient", "saturated_pump",
                                                   "saturated_damp",  "loaded_laser",              "two_bath_qubit"};
    return names;
}

std::vector<std::string> preset_parameter_names(const std::string& name) {
    std::vector<std::string> keys;
    if (name == "below_threshold") keys = {"omega", "beta", "mu_a", "mu_b", "gamma_down", "alpha"};
    else if (name == "above_threshold_transient")
        keys = {"omega", "beta", "mu_a", "mu_b", "gamma_down", "alpha", "allow_beyond_horizon"};
    else if (name == "saturated_pump" || name == "saturated_damp") keys = {"A", "B", "C", "omega", "beta", "alpha"};
    else if (name == "loaded_laser") keys = {"omega", "beta", "mu_a", "mu_b", "gamma_down", "delta", "initial_mean"};
    else if (name == "two_bath_qubit") keys = {"omega", "beta_hot", "beta_cold", "gamma_hot", "gamma_cold"};
    else throw UnknownPreset("unknown preset '" + name + "'");
    keys.insert(keys.end(), kCommonKeys.begin(), kCommonKeys.end());
    return keys;
}

Scenario preset(const std::string& name, const Overrides& overrides) {
    ParamReader r(name, overrides);
    Scenario s = [&] {
        if (name == "below_threshold") return make_below_threshold(r);
        if (name == "above_threshold_transient") return make_above_threshold(r);
        if (name == "saturated_pump") return make_saturated(r, true);
        if (name == "saturated_damp") return make_saturated(r, false);
        if (name == "loaded_laser") return make_loaded(r);
        if (name == "two_bath_qubit") return make_two_bath_qubit(r);
        throw UnknownPreset("unknown preset '" + name + "'");
    }();
    r.finish();
    for (const auto& [k, v] : r.effective()) s.parameters.emplace(k, v);
    s.parameters["dim"] = s.dim;
    s.parameters["t_final"] = s.t_final;
    s.parameters["dt"] = s.dt;
    s.parameters["sample_every"] = s.sample_every;
    return s;
}

Operator stationary_log_reference(const Scenario& s) {
    if (s.birth_death) {
        const Eigen::VectorXd logw = log_stationary_weights(*s.birth_death, s.dim - 1);
        if (!logw.allFinite()) throw DomainError("stationary weights vanish on part of the Fock space");
        return Operator(Matrix(logw.cast<Complex>().asDiagonal()));
    }
    return Operator(regularized_log(stationary_state(s.generator, s.dim)));
}

int dimension_for(const BirthDeathModel& model) {
    const int cutoff = auto_cutoff(model);
    const double mean = moments(stationary_distribution(model, cutoff)).mean;
    int d = static_cast<int>(std::ceil(mean + 8.0 * std::sqrt(mean))) + 1;
    d = std::max(d, 2);
    for (;;) {
        try {
            (void)stationary_distribution(model, d - 1);
            return d;
        } catch (const CutoffTooSmall&) {
            d += std::max(4, d / 16);
        }
    }
}

double truncation_horizon(const BirthDeathModel& model, const PhotonDistribution& p0, double limit, double t_max,
                          double dt) {
    if (!(dt > 0.0) || !(t_max > 0.0)) throw DomainError("truncation_horizon: dt and t_max must be > 0");
    const int top = p0.cutoff();
    if (p0[top] >= limit) return 0.0;
    DistributionEvolveOptions opts;
    opts.boundary_flux_limit = std::numeric_limits<double>::infinity();
    const double chunk = std::max(dt, std::round(1.0 / dt) * dt);
    PhotonDistribution p = p0;
    double t0 = 0.0;
    while (t0 < t_max) {
        const DistributionSeries series = evolve_distribution(model, p, chunk, dt, opts);
        for (std::size_t i = 1; i < series.times.size(); ++i)
            if (series.distributions[i][top] >= limit) return t0 + series.times[i - 1];
        p = series.distributions.back();
        t0 += chunk;
    }
    return t_max;
}

}  // namespace qengine
