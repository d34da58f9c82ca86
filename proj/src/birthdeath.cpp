#include "qengine/birthdeath.hpp"

#include "qengine/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace qengine {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kTailLimit = 1e-12;
constexpr int kMaxCutoff = 1 << 22;

void require_nonnegative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be finite and >= 0");
}

double checked_rate(double v, int n, const char* which) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << which << " rate at n=" << n << " is " << v << "; rates must be finite and >= 0";
        throw DomainError(os.str());
    }
    return v;
}

// Uniform double in [0, 1) from the top 53 bits; fixed across platforms.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

// ---------------------------------------------------------------------------
// Models

BirthDeathModel BirthDeathModel::linear(double gamma_up, double gamma_down) {
    require_nonnegative(gamma_up, "gamma_up");
    require_nonnegative(gamma_down, "gamma_down");
    return BirthDeathModel(Linear{gamma_up, gamma_down});
}

BirthDeathModel BirthDeathModel::saturated_pump(double a, double b, double c) {
    require_nonnegative(a, "A");
    require_nonnegative(b, "B");
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("C must be > 0");
    return BirthDeathModel(SaturatedPump{a, b, c});
}

BirthDeathModel BirthDeathModel::saturated_damp(double a, double b, double c) {
    require_nonnegative(a, "A");
    require_nonnegative(b, "B");
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("C must be > 0");
    return BirthDeathModel(SaturatedDamp{a, b, c});
}

BirthDeathModel BirthDeathModel::loaded(double gamma_up, double gamma_down, double delta) {
    require_nonnegative(gamma_up, "gamma_up");
    require_nonnegative(gamma_down, "gamma_down");
    require_nonnegative(delta, "delta");
    return BirthDeathModel(Loaded{gamma_up, gamma_down, delta});
}

BirthDeathModel BirthDeathModel::custom(LevelFunction up, LevelFunction down) {
    if (!up || !down) throw DomainError("custom birth-death model needs both rate functions");
    if (down(0) != 0.0) throw DomainError("custom birth-death model requires down(0) == 0");
    return BirthDeathModel(Custom{std::move(up), std::move(down)});
}

std::string_view BirthDeathModel::kind() const noexcept {
    return std::visit(overloaded{
                          [](const Linear&) { return std::string_view("Linear"); },
                          [](const SaturatedPump&) { return std::string_view("SaturatedPump"); },
                          [](const SaturatedDamp&) { return std::string_view("SaturatedDamp"); },
                          [](const Loaded&) { return std::string_view("Loaded"); },
                          [](const Custom&) { return std::string_view("Custom"); },
                      },
                      family_);
}

RatePair rates(const BirthDeathModel& model, int n) {
    if (n < 0) throw DomainError("rates: n must be >= 0");
    const double x = n;
    return std::visit(overloaded{
                          [&](const BirthDeathModel::Linear& m) {
                              return RatePair{m.gamma_up * (x + 1.0), m.gamma_down * x};
                          },
                          [&](const BirthDeathModel::SaturatedPump& m) {
                              return RatePair{m.a * (x + 1.0) / (1.0 + m.c * (x + 1.0)), m.b * x};
                          },
                          [&](const BirthDeathModel::SaturatedDamp& m) {
                              return RatePair{m.a * (x + 1.0), m.b * (x + m.c * x * x)};
                          },
                          [&](const BirthDeathModel::Loaded& m) {
                              return RatePair{m.gamma_up * (x + 1.0), m.gamma_down * x + m.delta * x * x};
                          },
                          [&](const BirthDeathModel::Custom& m) {
                              const double up = checked_rate(m.up(n), n, "birth");
                              const double down = n == 0 ? 0.0 : checked_rate(m.down(n), n, "death");
                              return RatePair{up, down};
                          },
                      },
                      model.family());
}

BirthDeathModel matching_birth_death(const GeneratorSpec& gen) {
    return std::visit(overloaded{
                          [](const LinearLaser& l) { return BirthDeathModel::linear(l.gamma_up, l.gamma_down); },
                          [](const LoadedLaser& l) {
                              return BirthDeathModel::loaded(l.gamma_up, l.gamma_down, l.delta);
                          },
                          [](const NonlinearLaser& l) {
                              auto g_up = l.g_up;
                              auto g_down = l.g_down;
                              return BirthDeathModel::custom(
                                  [g_up](int n) { return (n + 1.0) * g_up(n) * g_up(n); },
                                  [g_down](int n) { return n * g_down(n) * g_down(n); });
                          },
                          [](const auto&) -> BirthDeathModel {
                              throw VariantMismatch("matching_birth_death requires a single-mode laser variant");
                          },
                      },
                      gen.variant());
}

// ---------------------------------------------------------------------------
// Distributions

PhotonDistribution::PhotonDistribution(Eigen::VectorXd p) : p_(std::move(p)) {
    if (p_.size() < 1) throw DomainError("photon distribution must have at least one level");
    if (!p_.allFinite()) throw DomainError("photon distribution has non-finite entries");
    if (p_.minCoeff() < -1e-12) throw DomainError("photon distribution has negative entries");
    if (std::abs(p_.sum() - 1.0) > 1e-10) throw DomainError("photon distribution does not sum to 1");
}

PhotonDistribution poisson_distribution(double mean, int cutoff) {
    if (!(mean >= 0.0) || cutoff < 0) throw DomainError("poisson_distribution: need mean >= 0, cutoff >= 0");
    Eigen::VectorXd p(cutoff + 1);
    for (int n = 0; n <= cutoff; ++n)
        p(n) = mean == 0.0 ? (n == 0 ? 1.0 : 0.0) : std::exp(-mean + n * std::log(mean) - std::lgamma(n + 1.0));
    const double mass = p.sum();
    if (std::abs(mass - 1.0) > 1e-10) throw CutoffTooSmall("Poisson tail beyond cutoff exceeds 1e-10");
    return PhotonDistribution(p / mass);
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    const Eigen::Index n = std::max(p.size(), q.size());
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double a = k < p.size() ? p(k) : 0.0;
        const double b = k < q.size() ? q(k) : 0.0;
        sum += std::abs(a - b);
    }
    return 0.5 * sum;
}

Moments moments(const PhotonDistribution& dist) {
    const Eigen::VectorXd& p = dist.probabilities();
    double mean = 0.0;
    double second = 0.0;
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        const double x = static_cast<double>(n);
        mean += x * p(n);
        second += x * x * p(n);
    }
    const double variance = second - mean * mean;
    const double fano = mean == 0.0 ? std::numeric_limits<double>::quiet_NaN() : variance / mean;
    return {mean, variance, fano};
}

// ---------------------------------------------------------------------------
// Master-equation integration

DistributionSeries evolve_distribution(const BirthDeathModel& model, const PhotonDistribution& p0, double t_final,
                                       double dt, const DistributionEvolveOptions& options) {
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw DomainError("evolve_distribution: t_final must be >= 0");
    if (!(dt > 0.0)) throw DomainError("evolve_distribution: dt must be > 0");
    if (options.sample_every < 1) throw DomainError("evolve_distribution: sample_every must be >= 1");

    const int cutoff = p0.cutoff();
    const int size = cutoff + 1;
    Eigen::VectorXd up(size), down(size);
    for (int n = 0; n < size; ++n) {
        const RatePair r = rates(model, n);
        up(n) = n == cutoff ? 0.0 : r.up;  // reflecting top
        down(n) = r.down;
    }
    const auto derivative = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd dp = -(up + down).cwiseProduct(p);
        if (size > 1) {
            dp.head(size - 1) += down.tail(size - 1).cwiseProduct(p.tail(size - 1));
            dp.tail(size - 1) += up.head(size - 1).cwiseProduct(p.head(size - 1));
        }
        return dp;
    };
    const auto boundary_flux = [&](const Eigen::VectorXd& p) {
        return cutoff >= 1 ? rates(model, cutoff - 1).up * p(cutoff - 1) : 0.0;
    };

    const long long steps = t_final == 0.0 ? 0 : static_cast<long long>(std::ceil(t_final / dt - 1e-9));
    const double h = steps == 0 ? 0.0 : t_final / static_cast<double>(steps);

    DistributionSeries series;
    Eigen::VectorXd p = p0.probabilities();
    const auto check_flux = [&](double t) {
        const double flux = boundary_flux(p);
        series.max_boundary_flux = std::max(series.max_boundary_flux, flux);
        if (flux > options.boundary_flux_limit) {
            std::ostringstream os;
            os << "boundary flux " << flux << " into level " << cutoff << " exceeds " << options.boundary_flux_limit
               << " at t=" << t;
            throw BoundaryLeak(os.str());
        }
    };
    check_flux(0.0);
    series.times.push_back(0.0);
    series.distributions.push_back(p0);

    for (long long step = 1; step <= steps; ++step) {
        const Eigen::VectorXd k1 = derivative(p);
        const Eigen::VectorXd k2 = derivative(p + 0.5 * h * k1);
        const Eigen::VectorXd k3 = derivative(p + 0.5 * h * k2);
        const Eigen::VectorXd k4 = derivative(p + h * k3);
        p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!p.allFinite()) throw StabilityError("birth-death integration produced non-finite values");
        check_flux(static_cast<double>(step) * h);
        if (step % options.sample_every == 0 || step == steps) {
            series.times.push_back(static_cast<double>(step) * h);
            try {
                series.distributions.emplace_back(p);
            } catch (const DomainError& e) {
                throw StabilityError(std::string("birth-death integration lost validity: ") + e.what());
            }
        }
    }
    return series;
}

// ---------------------------------------------------------------------------
// Stationary distribution

namespace {

void check_existence(const BirthDeathModel& model) {
    std::visit(overloaded{
                   [](const BirthDeathModel::Linear& m) {
                       if (m.gamma_up >= m.gamma_down)
                           throw NoStationaryState("linear birth-death chain at or above threshold");
                   },
                   [](const BirthDeathModel::SaturatedPump& m) {
                       if (m.b == 0.0 && m.a > 0.0) throw NoStationaryState("saturated pump without damping");
                   },
                   [](const BirthDeathModel::SaturatedDamp& m) {
                       if (m.b == 0.0 && m.a > 0.0) throw NoStationaryState("saturated damping with B = 0");
                   },
                   [](const BirthDeathModel::Loaded& m) {
                       if (m.delta == 0.0 && m.gamma_up >= m.gamma_down)
                           throw NoStationaryState("unloaded chain at or above threshold");
                   },
                   [](const BirthDeathModel::Custom&) {},
               },
               model.family());
}

// Gup[n-1] / Gdown[n]; +inf when the death rate vanishes with a live birth.
double step_ratio(const BirthDeathModel& model, int n) {
    const double up = rates(model, n - 1).up;
    const double down = rates(model, n).down;
    if (up == 0.0) return 0.0;
    if (down == 0.0) return std::numeric_limits<double>::infinity();
    return up / down;
}

}  // namespace

Eigen::VectorXd log_stationary_weights(const BirthDeathModel& model, int cutoff) {
    if (cutoff < 0) throw DomainError("cutoff must be >= 0");
    Eigen::VectorXd logw(cutoff + 1);
    logw(0) = 0.0;
    for (int n = 1; n <= cutoff; ++n) {
        const double up = rates(model, n - 1).up;
        const double down = rates(model, n).down;
        if (up == 0.0 || logw(n - 1) == -std::numeric_limits<double>::infinity()) {
            logw(n) = -std::numeric_limits<double>::infinity();
            continue;
        }
        if (down == 0.0) throw NoStationaryState("death rate vanishes at n=" + std::to_string(n));
        logw(n) = logw(n - 1) + std::log(up) - std::log(down);
    }
    return logw;
}

PhotonDistribution stationary_distribution(const BirthDeathModel& model, int cutoff) {
    check_existence(model);
    if (cutoff < 1) throw CutoffTooSmall("stationary_distribution needs cutoff >= 1");
    const double r_cut = step_ratio(model, cutoff);
    if (std::holds_alternative<BirthDeathModel::Custom>(model.family()) && r_cut >= 1.0)
        throw NoStationaryState("rate ratio at the cutoff is >= 1");

    const Eigen::VectorXd logw = log_stationary_weights(model, cutoff);
    const double top = logw.maxCoeff();
    Eigen::VectorXd p = (logw.array() - top).exp().matrix();
    p /= p.sum();

    const double r_next = step_ratio(model, cutoff + 1);
    if (p(cutoff) > 0.0) {
        if (r_next >= 1.0)
            throw CutoffTooSmall("rate ratio beyond cutoff " + std::to_string(cutoff) + " is still >= 1");
        const double tail = p(cutoff) * r_next / (1.0 - r_next);
        if (tail > kTailLimit) {
            std::ostringstream os;
            os << "estimated mass beyond cutoff " << cutoff << " is " << tail;
            throw CutoffTooSmall(os.str());
        }
    }
    return PhotonDistribution(std::move(p));
}

int auto_cutoff(const BirthDeathModel& model) {
    check_existence(model);
    int mode = 0;
    while (mode < kMaxCutoff && step_ratio(model, mode + 1) >= 1.0) ++mode;
    int cutoff = std::max(50, 10 * mode);
    for (; cutoff <= kMaxCutoff; cutoff *= 2) {
        try {
            (void)stationary_distribution(model, cutoff);
            return cutoff;
        } catch (const CutoffTooSmall&) {
        }
    }
    throw CutoffTooSmall("no cutoff up to " + std::to_string(kMaxCutoff) + " bounds the tail");
}

// ---------------------------------------------------------------------------
// Stochastic sampler

int JumpTrajectory::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return counts.front();
    return counts[static_cast<std::size_t>(std::distance(times.begin(), it) - 1)];
}

namespace {

template <class OnJump>
bool run_gillespie(const BirthDeathModel& model, int n0, double t_final, std::uint64_t seed, OnJump on_jump, int& n) {
    std::mt19937_64 rng(seed);
    n = n0;
    double t = 0.0;
    for (;;) {
        const RatePair r = rates(model, n);
        const double total = r.up + r.down;
        if (total <= 0.0) return true;
        t += -std::log1p(-uniform01(rng)) / total;
        if (t > t_final) return false;
        n += uniform01(rng) * total < r.up ? 1 : -1;
        on_jump(t, n);
    }
}

}  // namespace

JumpTrajectory gillespie_sample(const BirthDeathModel& model, int n0, double t_final, std::uint64_t seed) {
    if (n0 < 0) throw DomainError("gillespie_sample: n0 must be >= 0");
    if (!(t_final >= 0.0)) throw DomainError("gillespie_sample: t_final must be >= 0");
    JumpTrajectory traj;
    traj.t_final = t_final;
    traj.times.push_back(0.0);
    traj.counts.push_back(n0);
    int n = n0;
    traj.absorbed = run_gillespie(
        model, n0, t_final, seed,
        [&](double t, int count) {
            traj.times.push_back(t);
            traj.counts.push_back(count);
        },
        n);
    return traj;
}

std::vector<int> gillespie_endpoints(const BirthDeathModel& model, int n0, double t_final, std::uint64_t seed,
                                     int runs) {
    if (n0 < 0 || runs < 0) throw DomainError("gillespie_endpoints: n0 and runs must be >= 0");
    std::vector<int> out(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        int n = n0;
        run_gillespie(model, n0, t_final, seed + static_cast<std::uint64_t>(r), [](double, int) {}, n);
        out[static_cast<std::size_t>(r)] = n;
    }
    return out;
}

}  // namespace qengine
