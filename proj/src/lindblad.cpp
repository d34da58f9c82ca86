#include "qengine/lindblad.hpp"

#include "band_ladder.hpp"
#include "compiled_generator.hpp"
#include "qengine/errors.hpp"
#include "qengine/linalg.hpp"
#include "qengine/log.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qengine {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kHermitianTol = 1e-10;
constexpr double kKmsRelTol = 1e-9;
constexpr double kBohrCollisionTol = 1e-9;
constexpr double kEntryBound = 1.0 + 1e-6;

void require_nonnegative(double value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw DomainError(std::string(name) + " must be a finite nonnegative number");
}

// Per-channel amplitudes of the laser jump operators on n = 0..dim-1.
// Lowering channel c: V|n> = c_n |n-1>. Raising channel b: V|n> = b_n |n+1>, b_{dim-1} = 0.
struct LadderChannels {
    double omega = 0.0;
    std::vector<Eigen::VectorXd> lowering;
    std::vector<Eigen::VectorXd> raising;
};

LadderChannels ladder_channels(const GeneratorSpec& gen, int dim) {
    LadderChannels ch;
    const auto lowering_from = [dim](const auto& amplitude) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
        for (int n = 1; n < dim; ++n) c(n) = amplitude(n);
        return c;
    };
    const auto raising_from = [dim](const auto& amplitude) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
        for (int n = 0; n + 1 < dim; ++n) b(n) = amplitude(n);
        return b;
    };
    std::visit(overloaded{
                   [&](const LinearLaser& l) {
                       ch.omega = l.omega;
                       ch.lowering.push_back(lowering_from([&](int n) { return std::sqrt(l.gamma_down * n); }));
                       ch.raising.push_back(raising_from([&](int n) { return std::sqrt(l.gamma_up * (n + 1.0)); }));
                   },
                   [&](const NonlinearLaser& l) {
                       ch.omega = l.omega;
                       ch.lowering.push_back(lowering_from([&](int n) { return std::sqrt(1.0 * n) * l.g_down(n); }));
                       ch.raising.push_back(raising_from([&](int n) { return std::sqrt(n + 1.0) * l.g_up(n); }));
                   },
                   [&](const LoadedLaser& l) {
                       ch.omega = l.omega;
                       ch.lowering.push_back(lowering_from([&](int n) { return std::sqrt(l.gamma_down * n); }));
                       ch.lowering.push_back(lowering_from([&](int n) { return std::sqrt(l.delta) * n; }));
                       ch.raising.push_back(raising_from([&](int n) { return std::sqrt(l.gamma_up * (n + 1.0)); }));
                   },
                   [&](const auto&) { throw VariantMismatch("ladder form requires a single-mode laser variant"); },
               },
               gen.variant());
    for (const auto& c : ch.lowering)
        if (!c.allFinite()) throw DomainError("laser rate function produced a non-finite value");
    for (const auto& b : ch.raising)
        if (!b.allFinite()) throw DomainError("laser rate function produced a non-finite value");
    return ch;
}

Matrix lowering_matrix(const Eigen::VectorXd& c) {
    const auto d = c.size();
    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) m(n - 1, n) = c(n);
    return m;
}

Matrix raising_matrix(const Eigen::VectorXd& b) {
    const auto d = b.size();
    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index n = 0; n + 1 < d; ++n) m(n + 1, n) = b(n);
    return m;
}

double row_sum_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

// ---------------------------------------------------------------------------
// GeneratorSpec

GeneratorSpec GeneratorSpec::general(Operator hamiltonian, std::vector<Operator> jumps) {
    if (!hamiltonian.is_hermitian(kHermitianTol)) throw DomainError("GKLS Hamiltonian must be Hermitian");
    for (const auto& v : jumps)
        if (v.dim() != hamiltonian.dim()) throw DimensionMismatch("jump operator dimension differs from Hamiltonian");
    return GeneratorSpec(GeneralGKLS{std::move(hamiltonian), std::move(jumps)});
}

GeneratorSpec GeneratorSpec::linear_laser(double omega, double gamma_up, double gamma_down) {
    if (!std::isfinite(omega)) throw DomainError("omega must be finite");
    require_nonnegative(gamma_up, "gamma_up");
    require_nonnegative(gamma_down, "gamma_down");
    return GeneratorSpec(LinearLaser{omega, gamma_up, gamma_down});
}

GeneratorSpec GeneratorSpec::nonlinear_laser(double omega, LevelFunction g_up, LevelFunction g_down) {
    if (!std::isfinite(omega)) throw DomainError("omega must be finite");
    if (!g_up || !g_down) throw DomainError("nonlinear laser needs both g_up and g_down");
    return GeneratorSpec(NonlinearLaser{omega, std::move(g_up), std::move(g_down)});
}

GeneratorSpec GeneratorSpec::loaded_laser(double omega, double gamma_up, double gamma_down, double delta) {
    if (!std::isfinite(omega)) throw DomainError("omega must be finite");
    require_nonnegative(gamma_up, "gamma_up");
    require_nonnegative(gamma_down, "gamma_down");
    require_nonnegative(delta, "delta");
    return GeneratorSpec(LoadedLaser{omega, gamma_up, gamma_down, delta});
}

GeneratorSpec GeneratorSpec::davies(DaviesNLevel d) {
    const Operator& h = d.hamiltonian;
    if (!h.is_hermitian(kHermitianTol)) throw DomainError("Davies Hamiltonian must be Hermitian");
    for (double beta : d.bath_betas)
        if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("bath inverse temperatures must be positive");
    const double scale = std::max(1.0, h.matrix().cwiseAbs().maxCoeff());
    for (const auto& j : d.jumps) {
        if (j.bath < 0 || j.bath >= static_cast<int>(d.bath_betas.size()))
            throw DomainError("Davies jump refers to an unknown bath");
        require_nonnegative(j.rate, "Davies rate");
        if (j.op.dim() != h.dim()) throw DimensionMismatch("Davies jump dimension differs from Hamiltonian");
        // Eigenoperator condition [H, S(w)] = -w S(w).
        const Matrix comm = h.matrix() * j.op.matrix() - j.op.matrix() * h.matrix() + j.bohr_frequency * j.op.matrix();
        if (comm.cwiseAbs().maxCoeff() > 1e-8 * scale * std::max(1.0, j.op.matrix().cwiseAbs().maxCoeff()))
            throw DomainError("Davies jump is not an eigenoperator of [H, .] at its Bohr frequency");
    }
    // KMS pairing.
    for (const auto& j : d.jumps) {
        if (j.bohr_frequency <= 0.0) continue;
        const double beta = d.bath_betas[static_cast<std::size_t>(j.bath)];
        const double expected = std::exp(-beta * j.bohr_frequency) * j.rate;
        const auto partner = std::find_if(d.jumps.begin(), d.jumps.end(), [&](const DaviesJump& k) {
            return k.bath == j.bath && std::abs(k.bohr_frequency + j.bohr_frequency) <= kBohrCollisionTol &&
                   (k.op.matrix() - j.op.matrix().adjoint()).cwiseAbs().maxCoeff() <= 1e-9;
        });
        const double partner_rate = partner == d.jumps.end() ? 0.0 : partner->rate;
        if (std::abs(partner_rate - expected) > kKmsRelTol * std::max(expected, 1e-300) && expected > 1e-300)
            throw DomainError("Davies rates violate the KMS condition gamma(-w) = exp(-beta w) gamma(w)");
    }
    return GeneratorSpec(std::move(d));
}

std::string_view GeneratorSpec::kind() const noexcept {
    return std::visit(overloaded{
                          [](const GeneralGKLS&) { return std::string_view("GeneralGKLS"); },
                          [](const LinearLaser&) { return std::string_view("LinearLaser"); },
                          [](const NonlinearLaser&) { return std::string_view("NonlinearLaser"); },
                          [](const LoadedLaser&) { return std::string_view("LoadedLaser"); },
                          [](const DaviesNLevel&) { return std::string_view("DaviesNLevel"); },
                      },
                      v_);
}

bool GeneratorSpec::is_fock_laser() const noexcept {
    return std::holds_alternative<LinearLaser>(v_) || std::holds_alternative<NonlinearLaser>(v_) ||
           std::holds_alternative<LoadedLaser>(v_);
}

int GeneratorSpec::fixed_dim() const noexcept {
    if (const auto* g = std::get_if<GeneralGKLS>(&v_)) return g->hamiltonian.dim();
    if (const auto* d = std::get_if<DaviesNLevel>(&v_)) return d->hamiltonian.dim();
    return 0;
}

// ---------------------------------------------------------------------------
// Compiled forms

namespace detail {

int resolve_dim(const GeneratorSpec& gen, int requested) {
    const int fixed = gen.fixed_dim();
    if (fixed == 0) {
        if (requested < 2) throw DomainError("laser generators need an explicit Fock dimension >= 2");
        return requested;
    }
    if (requested != 0 && requested != fixed)
        throw DimensionMismatch(std::string(gen.kind()) + " acts on dimension " + std::to_string(fixed) +
                                ", got " + std::to_string(requested));
    return fixed;
}

CompiledGenerator::CompiledGenerator(const GeneratorSpec& gen, int dim) : dim_(detail::resolve_dim(gen, dim)) {
    const int d = dim_;
    if (gen.is_fock_laser()) {
        const LadderChannels ch = ladder_channels(gen, d);
        LadderForm f;
        f.dim = d;
        f.omega = ch.omega;
        f.decay = Eigen::VectorXd::Zero(d);
        f.lower = Eigen::MatrixXd::Zero(d - 1, d - 1);
        f.raise = Eigen::MatrixXd::Zero(d - 1, d - 1);
        f.up_rates = Eigen::VectorXd::Zero(d);
        f.down_rates = Eigen::VectorXd::Zero(d);
        for (const auto& c : ch.lowering) {
            f.decay += c.cwiseAbs2();
            f.down_rates += c.cwiseAbs2();
            const Eigen::VectorXd tail = c.tail(d - 1);
            f.lower += tail * tail.transpose();
        }
        for (const auto& b : ch.raising) {
            f.decay += b.cwiseAbs2();
            f.up_rates += b.cwiseAbs2();
            const Eigen::VectorXd head = b.head(d - 1);
            f.raise += head * head.transpose();
        }
        f.diag_coef.resize(d, d);
        f.diag_coef_adjoint.resize(d, d);
        for (int n = 0; n < d; ++n) {
            for (int m = 0; m < d; ++m) {
                const double re = -0.5 * (f.decay(m) + f.decay(n));
                const double im = f.omega * (m - n);
                f.diag_coef(m, n) = Complex(re, -im);
                f.diag_coef_adjoint(m, n) = Complex(re, im);
            }
        }
        norm_estimate_ = std::abs(f.omega) * (d - 1) + 2.0 * f.decay.maxCoeff();
        form_ = std::move(f);
        return;
    }
    DenseForm f;
    f.dim = d;
    Matrix h;
    std::visit(overloaded{
                   [&](const GeneralGKLS& g) {
                       h = g.hamiltonian.matrix();
                       for (const auto& v : g.jumps) f.jumps.push_back(v.matrix());
                   },
                   [&](const DaviesNLevel& g) {
                       h = g.hamiltonian.matrix();
                       for (const auto& j : g.jumps)
                           if (j.rate > 0.0) f.jumps.push_back(std::sqrt(j.rate) * j.op.matrix());
                   },
                   [&](const auto&) {},
               },
               gen.variant());
    Matrix k = Matrix::Zero(d, d);
    for (const auto& v : f.jumps) k += v.adjoint() * v;
    f.h_eff = h - Complex(0.0, 0.5) * k;
    norm_estimate_ = 2.0 * row_sum_norm(h) + 2.0 * row_sum_norm(k);
    form_ = std::move(f);
}

Matrix CompiledGenerator::apply(const Matrix& rho) const {
    if (rho.rows() != dim_ || rho.cols() != dim_)
        throw DimensionMismatch("generator of dimension " + std::to_string(dim_) + " applied to " +
                                std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()) + " matrix");
    if (const auto* f = std::get_if<LadderForm>(&form_)) {
        const Eigen::Index s = dim_ - 1;
        Matrix out = f->diag_coef.cwiseProduct(rho);
        out.topLeftCorner(s, s) += rho.bottomRightCorner(s, s).cwiseProduct(f->lower.cast<Complex>());
        out.bottomRightCorner(s, s) += rho.topLeftCorner(s, s).cwiseProduct(f->raise.cast<Complex>());
        return out;
    }
    const auto& f = std::get<DenseForm>(form_);
    const Complex i(0.0, 1.0);
    Matrix out = -i * (f.h_eff * rho - rho * f.h_eff.adjoint());
    for (const auto& v : f.jumps) out.noalias() += v * rho * v.adjoint();
    return out;
}

Matrix CompiledGenerator::adjoint(const Matrix& a) const {
    if (a.rows() != dim_ || a.cols() != dim_)
        throw DimensionMismatch("adjoint generator of dimension " + std::to_string(dim_) + " applied to " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " matrix");
    if (const auto* f = std::get_if<LadderForm>(&form_)) {
        const Eigen::Index s = dim_ - 1;
        Matrix out = f->diag_coef_adjoint.cwiseProduct(a);
        out.bottomRightCorner(s, s) += a.topLeftCorner(s, s).cwiseProduct(f->lower.cast<Complex>());
        out.topLeftCorner(s, s) += a.bottomRightCorner(s, s).cwiseProduct(f->raise.cast<Complex>());
        return out;
    }
    const auto& f = std::get<DenseForm>(form_);
    const Complex i(0.0, 1.0);
    Matrix out = i * (f.h_eff.adjoint() * a - a * f.h_eff);
    for (const auto& v : f.jumps) out.noalias() += v.adjoint() * a * v;
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Application

Operator dissipator_apply(const Operator& v, const Operator& rho) {
    if (v.dim() != rho.dim()) throw DimensionMismatch("dissipator_apply: jump and state dimensions differ");
    const Matrix& V = v.matrix();
    const Matrix& R = rho.matrix();
    const Matrix vdv = V.adjoint() * V;
    return Operator(V * R * V.adjoint() - 0.5 * (vdv * R + R * vdv));
}

Operator generator_apply(const GeneratorSpec& gen, const Operator& x) {
    const detail::CompiledGenerator compiled(gen, gen.fixed_dim() == 0 ? x.dim() : 0);
    return Operator(compiled.apply(x.matrix()));
}

Operator generator_apply(const GeneratorSpec& gen, const DensityMatrix& rho) { return generator_apply(gen, rho.op()); }

Operator adjoint_apply(const GeneratorSpec& gen, const Operator& a) {
    const detail::CompiledGenerator compiled(gen, gen.fixed_dim() == 0 ? a.dim() : 0);
    return Operator(compiled.adjoint(a.matrix()));
}

GeneratorSpec to_dense(const GeneratorSpec& gen, int dim) {
    const int d = detail::resolve_dim(gen, dim);
    if (!gen.is_fock_laser()) {
        if (const auto* g = std::get_if<GeneralGKLS>(&gen.variant())) return GeneratorSpec::general(g->hamiltonian, g->jumps);
        const auto& dv = std::get<DaviesNLevel>(gen.variant());
        std::vector<Operator> jumps;
        for (const auto& j : dv.jumps)
            if (j.rate > 0.0) jumps.push_back(Complex(std::sqrt(j.rate)) * j.op);
        return GeneratorSpec::general(dv.hamiltonian, std::move(jumps));
    }
    const LadderChannels ch = ladder_channels(gen, d);
    std::vector<Operator> jumps;
    for (const auto& c : ch.lowering) jumps.emplace_back(lowering_matrix(c));
    for (const auto& b : ch.raising) jumps.emplace_back(raising_matrix(b));
    return GeneratorSpec::general(Complex(ch.omega) * number_operator(FockSpace(d)), std::move(jumps));
}

LadderRates ladder_rates(const GeneratorSpec& gen, int dim) {
    if (!gen.is_fock_laser()) throw VariantMismatch("ladder_rates requires a single-mode laser variant");
    const detail::CompiledGenerator compiled(gen, dim);
    return {compiled.ladder().up_rates, compiled.ladder().down_rates};
}

double generator_norm_estimate(const GeneratorSpec& gen, int dim) {
    return detail::CompiledGenerator(gen, dim).norm_estimate();
}

Matrix superoperator_matrix(const GeneratorSpec& gen, int dim) {
    const detail::CompiledGenerator compiled(gen, dim);
    const int d = compiled.dim();
    Matrix super(d * d, d * d);
    Matrix basis = Matrix::Zero(d, d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
            basis(i, j) = 1.0;
            const Matrix image = compiled.apply(basis);
            basis(i, j) = 0.0;
            super.col(i + j * d) = image.reshaped();
        }
    }
    return super;
}

// ---------------------------------------------------------------------------
// Evolution

namespace {

struct StepCheck {
    double trace_drift;
    bool finite;
    double max_abs2;
};

// Classic RK4 on the dense matrix ODE.
class DenseStepper {
public:
    DenseStepper(const detail::CompiledGenerator& g, Matrix rho) : g_(g), rho_(std::move(rho)) {}

    StepCheck step(double h) {
        const Complex before = rho_.trace();
        const Matrix k1 = g_.apply(rho_);
        const Matrix k2 = g_.apply(rho_ + (0.5 * h) * k1);
        const Matrix k3 = g_.apply(rho_ + (0.5 * h) * k2);
        const Matrix k4 = g_.apply(rho_ + h * k3);
        rho_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        return {std::abs(rho_.trace() - before), rho_.allFinite(), rho_.cwiseAbs2().maxCoeff()};
    }

    // Re-Hermitizes and renormalizes; returns the state and the correction.
    std::pair<Matrix, SampleCorrection> sample() {
        const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
        rho_ = (0.5 * (rho_ + rho_.adjoint())).eval();
        const double tr = rho_.trace().real();
        rho_ /= tr;
        return {rho_, {herm, std::abs(tr - 1.0)}};
    }

private:
    const detail::CompiledGenerator& g_;
    Matrix rho_;
};

// Classic RK4 on the lower coherence bands of a ladder generator. The upper
// triangle is the conjugate, so samples are Hermitian by construction.
class BandStepper {
public:
    BandStepper(const detail::LadderForm& form, const Matrix& rho)
        : bands_(form), y_(bands_.pack(rho)), ranges_(bands_.active_ranges(y_)) {
        const Eigen::Index n = bands_.size();
        k1_ = Vector::Zero(n);
        k2_ = Vector::Zero(n);
        k3_ = Vector::Zero(n);
        k4_ = Vector::Zero(n);
        tmp_ = Vector::Zero(n);
    }

    StepCheck step(double h) {
        const double before = trace();
        bands_.apply(y_, k1_, ranges_);
        combine(tmp_, y_, 0.5 * h, k1_);
        bands_.apply(tmp_, k2_, ranges_);
        combine(tmp_, y_, 0.5 * h, k2_);
        bands_.apply(tmp_, k3_, ranges_);
        combine(tmp_, y_, h, k3_);
        bands_.apply(tmp_, k4_, ranges_);
        bool finite = true;
        double max_abs2 = 0.0;
        const double c = h / 6.0;
        for (const auto& [b, e] : ranges_) {
            for (Eigen::Index i = b; i < e; ++i) {
                y_(i) += c * (k1_(i) + 2.0 * k2_(i) + 2.0 * k3_(i) + k4_(i));
                const double a2 = y_(i).real() * y_(i).real() + y_(i).imag() * y_(i).imag();
                finite = finite && std::isfinite(a2);
                max_abs2 = std::max(max_abs2, a2);
            }
        }
        return {std::abs(trace() - before), finite, max_abs2};
    }

    std::pair<Matrix, SampleCorrection> sample() {
        double herm = 0.0;
        const Eigen::Index b0 = bands_.band_begin(0);
        for (Eigen::Index i = b0; i < bands_.band_end(0); ++i) herm = std::max(herm, 2.0 * std::abs(y_(i).imag()));
        const double tr = trace();
        for (const auto& [b, e] : ranges_) y_.segment(b, e - b) /= tr;
        return {bands_.unpack(y_), {herm, std::abs(tr - 1.0)}};
    }

private:
    double trace() const {
        const Eigen::Index b0 = bands_.band_begin(0);
        return y_.segment(b0, bands_.band_end(0) - b0).real().sum();
    }

    void combine(Vector& out, const Vector& y, double c, const Vector& k) const {
        for (const auto& [b, e] : ranges_)
            for (Eigen::Index i = b; i < e; ++i) out(i) = y(i) + c * k(i);
    }

    detail::BandLadder bands_;
    Vector y_;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges_;
    Vector k1_, k2_, k3_, k4_, tmp_;
};

template <class Stepper>
void run_rk4(Stepper& stepper, long long steps, double h, int sample_every, const EvolveOptions& options,
             const std::function<void(double, const Matrix&, SampleCorrection)>& record) {
    for (long long step = 1; step <= steps; ++step) {
        const StepCheck check = stepper.step(h);
        if (!check.finite || check.trace_drift > options.trace_drift_limit ||
            check.max_abs2 > kEntryBound * kEntryBound) {
            std::ostringstream os;
            os << "RK4 diverged at step " << step << " (trace drift " << check.trace_drift << ", step " << h << ")";
            throw StabilityError(os.str());
        }
        if (step % sample_every == 0 || step == steps) {
            const auto [rho, corr] = stepper.sample();
            if (corr.hermiticity > 1e-12 || corr.trace > 1e-12) {
                std::ostringstream os;
                os << "sample correction at t=" << step * h << ": hermiticity " << corr.hermiticity << ", trace "
                   << corr.trace;
                log::debug(os.str());
            }
            record(static_cast<double>(step) * h, rho, corr);
        }
    }
}

}  // namespace

Trajectory evolve(const GeneratorSpec& gen, const DensityMatrix& rho0, double t_final, double dt, int sample_every,
                  const EvolveOptions& options) {
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw DomainError("evolve: t_final must be >= 0");
    if (!(dt > 0.0)) throw DomainError("evolve: dt must be > 0");
    if (sample_every < 1) throw DomainError("evolve: sample_every must be >= 1");

    const detail::CompiledGenerator compiled(gen, gen.fixed_dim() == 0 ? rho0.dim() : 0);
    if (compiled.dim() != rho0.dim()) throw DimensionMismatch("evolve: initial state dimension differs from generator");
    const bool monitor_leakage = gen.is_fock_laser();

    const long long steps = t_final == 0.0 ? 0 : static_cast<long long>(std::ceil(t_final / dt - 1e-9));
    const double h = steps == 0 ? 0.0 : t_final / static_cast<double>(steps);

    Trajectory traj;
    const double stiffness = h * compiled.norm_estimate();
    if (stiffness >= 1.0) {
        std::ostringstream os;
        os << "RK4 step " << h << " times generator norm estimate " << compiled.norm_estimate() << " = " << stiffness
           << " >= 1; integration may be inaccurate";
        traj.warnings.push_back(os.str());
        log::warn(os.str());
    }

    const auto record = [&](double t, const Matrix& rho, SampleCorrection corr) {
        auto state = DensityMatrix::unchecked(Operator(rho));
        const double leak = monitor_leakage ? top_occupancy(state) : 0.0;
        if (monitor_leakage && leak > options.leakage_limit) {
            std::ostringstream os;
            os << "top Fock level occupancy " << leak << " exceeds " << options.leakage_limit << " at t=" << t;
            throw TruncationError(os.str());
        }
        if (options.validate_samples) {
            const Tolerances tol{options.sample_tolerance, options.sample_tolerance, options.sample_tolerance};
            if (auto why = density_matrix_violation(rho, tol); !why.empty()) {
                std::ostringstream os;
                os << "sampled state at t=" << t << " is " << why;
                throw StabilityError(os.str());
            }
        }
        traj.times.push_back(t);
        traj.states.push_back(std::move(state));
        traj.leakage.push_back(leak);
        traj.corrections.push_back(corr);
    };

    record(0.0, rho0.matrix(), {0.0, 0.0});
    if (compiled.is_ladder()) {
        BandStepper stepper(compiled.ladder(), rho0.matrix());
        run_rk4(stepper, steps, h, sample_every, options, record);
    } else {
        DenseStepper stepper(compiled, rho0.matrix());
        run_rk4(stepper, steps, h, sample_every, options, record);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Stationary states

namespace {

void check_laser_existence(const GeneratorSpec& gen, int dim) {
    std::visit(overloaded{
                   [](const LinearLaser& l) {
                       if (l.gamma_up >= l.gamma_down)
                           throw NoStationaryState("linear laser at or above threshold (gamma_up >= gamma_down)");
                   },
                   [](const LoadedLaser& l) {
                       if (l.delta == 0.0 && l.gamma_up >= l.gamma_down)
                           throw NoStationaryState("unloaded laser at or above threshold (gamma_up >= gamma_down)");
                   },
                   [&](const NonlinearLaser&) {
                       const LadderRates r = ladder_rates(gen, dim + 1);
                       const double down = r.down(dim);
                       const double up = r.up(dim - 1);
                       if (!(down > 0.0) || up / down >= 1.0)
                           throw NoStationaryState("rate ratio Gamma_up[n-1]/Gamma_down[n] >= 1 at the cutoff");
                   },
                   [](const auto&) {},
               },
               gen.variant());
}

// Smallest singular values in ascending order.
Eigen::VectorXd ascending_singular_values(const Matrix& m) {
    Eigen::BDCSVD<Matrix> svd(m);
    Eigen::VectorXd s = svd.singularValues();
    std::sort(s.begin(), s.end());
    return s;
}

// Johnson's lower bound on the smallest singular value of a diagonally dominant matrix.
double dominance_lower_bound(const Matrix& m) {
    const Eigen::VectorXd abs_diag = m.diagonal().cwiseAbs();
    const Eigen::VectorXd rows = m.cwiseAbs().rowwise().sum() - abs_diag;
    const Eigen::VectorXd cols = m.cwiseAbs().colwise().sum().transpose() - abs_diag;
    return (abs_diag - 0.5 * (rows + cols)).minCoeff();
}

// Coherence-order block k of a ladder generator: entries rho_{m, m+k}.
Matrix coherence_block(const detail::LadderForm& f, int k) {
    const int d = f.dim;
    const int s = d - k;
    Matrix b = Matrix::Zero(s, s);
    for (int m = 0; m < s; ++m) {
        b(m, m) = f.diag_coef(m, m + k);
        if (m + 1 < s) b(m, m + 1) = f.lower(m, m + k);
        if (m >= 1) b(m, m - 1) = f.raise(m - 1, m + k - 1);
    }
    return b;
}

Matrix null_vector_state(const Matrix& x) {
    Matrix rho = x / x.trace();
    rho = (0.5 * (rho + rho.adjoint())).eval();
    rho /= rho.trace().real();
    return rho;
}

Matrix stationary_by_blocks(const detail::CompiledGenerator& compiled, const StationaryOptions& options) {
    const auto& f = compiled.ladder();
    const int d = f.dim;
    const double thr = options.singular_value_threshold;

    const Matrix b0 = coherence_block(f, 0);
    Eigen::BDCSVD<Matrix> svd(b0, Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();  // descending
    if (s(d - 1) > thr)
        throw NoStationaryState("smallest singular value " + std::to_string(s(d - 1)) + " exceeds threshold");
    if (d >= 2 && s(d - 2) <= thr) throw DegenerateKernel("population block has a kernel of dimension > 1");
    for (int k = 1; k < d; ++k) {
        const Matrix bk = coherence_block(f, k);
        if (dominance_lower_bound(bk) > thr) continue;
        if (ascending_singular_values(bk)(0) <= thr)
            throw DegenerateKernel("coherence block " + std::to_string(k) + " has a kernel vector");
    }
    Matrix x = Matrix::Zero(d, d);
    x.diagonal() = svd.matrixV().col(d - 1);
    return null_vector_state(x);
}

Matrix stationary_by_full_svd(const GeneratorSpec& gen, int d, const StationaryOptions& options) {
    const Matrix super = superoperator_matrix(gen, d);
    Eigen::BDCSVD<Matrix> svd(super, Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::Index n = s.size();
    if (s(n - 1) > options.singular_value_threshold)
        throw NoStationaryState("smallest singular value " + std::to_string(s(n - 1)) + " exceeds threshold");
    if (n >= 2 && s(n - 2) <= options.singular_value_threshold)
        throw DegenerateKernel("generator kernel has dimension > 1");
    const Matrix x = svd.matrixV().col(n - 1).reshaped(d, d);
    return null_vector_state(x);
}

}  // namespace

DensityMatrix stationary_state(const GeneratorSpec& gen, int dim, const StationaryOptions& options) {
    const detail::CompiledGenerator compiled(gen, dim);
    const int d = compiled.dim();
    if (gen.is_fock_laser()) check_laser_existence(gen, d);

    const Matrix rho = compiled.is_ladder() && options.use_phase_blocks ? stationary_by_blocks(compiled, options)
                                                                          : stationary_by_full_svd(gen, d, options);
    const double residual = compiled.apply(rho).norm();
    if (residual > options.residual_limit)
        throw NoStationaryState("stationary residual " + std::to_string(residual) + " exceeds limit");
    return DensityMatrix(Operator(rho));
}

// ---------------------------------------------------------------------------
// Davies construction

DensityMatrix gibbs_state(const Operator& hamiltonian, double beta) {
    if (!hamiltonian.is_hermitian(kHermitianTol)) throw DomainError("gibbs_state: Hamiltonian must be Hermitian");
    const HermitianSpectrum spec = hermitian_spectrum(hamiltonian.matrix());
    const double e0 = spec.values.minCoeff();
    Matrix rho = apply_spectral(spec, [&](double e) { return std::exp(-beta * (e - e0)); });
    rho = (0.5 * (rho + rho.adjoint())).eval();
    rho /= rho.trace().real();
    return DensityMatrix(Operator(std::move(rho)));
}

GeneratorSpec davies_generator(const Operator& hamiltonian, const std::vector<DaviesCoupling>& couplings,
                               const std::vector<double>& bath_betas) {
    if (!hamiltonian.is_hermitian(kHermitianTol)) throw DomainError("davies_generator: H must be Hermitian");
    const int d = hamiltonian.dim();
    const HermitianSpectrum spec = hermitian_spectrum(hamiltonian.matrix());
    const Eigen::VectorXd& e = spec.values;
    const Matrix& u = spec.vectors;

    for (int i = 0; i + 1 < d; ++i)
        if (e(i + 1) - e(i) <= kBohrCollisionTol) throw DegenerateSpectrum("Hamiltonian has degenerate energy levels");
    std::vector<double> bohr;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) bohr.push_back(e(j) - e(i));
    std::sort(bohr.begin(), bohr.end());
    for (std::size_t k = 0; k + 1 < bohr.size(); ++k)
        if (bohr[k + 1] - bohr[k] <= kBohrCollisionTol)
            throw DegenerateSpectrum("Bohr frequencies collide; secular decomposition is ambiguous");

    DaviesNLevel out{hamiltonian, {}, bath_betas};
    for (const auto& c : couplings) {
        if (c.bath < 0 || c.bath >= static_cast<int>(bath_betas.size()))
            throw DomainError("coupling refers to an unknown bath");
        if (c.op.dim() != d) throw DimensionMismatch("coupling operator dimension differs from Hamiltonian");
        if (!c.rate) throw DomainError("coupling needs a rate function");
        const double beta = bath_betas[static_cast<std::size_t>(c.bath)];
        const Matrix s_eig = u.adjoint() * c.op.matrix() * u;

        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                if (std::abs(s_eig(i, j)) < 1e-14 && std::abs(s_eig(j, i)) < 1e-14) continue;
                const double w = e(j) - e(i);
                const double gamma = c.rate(w);
                require_nonnegative(gamma, "Davies rate gamma(w)");
                if (gamma == 0.0) continue;
                // Downward S(w) = <i|S|j> |i><j| and its upward partner S(-w) = <j|S|i> |j><i|.
                Matrix down = Matrix::Zero(d, d);
                down(i, j) = s_eig(i, j);
                Matrix up = Matrix::Zero(d, d);
                up(j, i) = s_eig(j, i);
                down = u * down * u.adjoint();
                up = u * up * u.adjoint();
                out.jumps.push_back({c.bath, w, gamma, Operator(std::move(down))});
                out.jumps.push_back({c.bath, -w, std::exp(-beta * w) * gamma, Operator(std::move(up))});
            }
        }
        const double gamma0 = c.rate(0.0);
        require_nonnegative(gamma0, "Davies rate gamma(0)");
        if (gamma0 > 0.0 && s_eig.diagonal().cwiseAbs().maxCoeff() > 1e-14) {
            Matrix diag = Matrix::Zero(d, d);
            diag.diagonal() = s_eig.diagonal();
            out.jumps.push_back({c.bath, 0.0, gamma0, Operator(u * diag * u.adjoint())});
        }
    }
    return GeneratorSpec::davies(std::move(out));
}

GeneratorSpec davies_bath_component(const GeneratorSpec& gen, int bath) {
    const auto* d = std::get_if<DaviesNLevel>(&gen.variant());
    if (d == nullptr) throw VariantMismatch("davies_bath_component requires a Davies generator");
    if (bath < 0 || bath >= static_cast<int>(d->bath_betas.size())) throw DomainError("unknown bath index");
    std::vector<Operator> jumps;
    for (const auto& j : d->jumps)
        if (j.bath == bath && j.rate > 0.0) jumps.push_back(Complex(std::sqrt(j.rate)) * j.op);
    return GeneratorSpec::general(Operator::zero(d->hamiltonian.space()), std::move(jumps));
}

}  // namespace qengine
