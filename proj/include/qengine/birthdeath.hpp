// birthdeath.hpp: classical birth-death dynamics of the photon-number distribution
//
// p_n' = Gdown[n+1] p_{n+1} + Gup[n-1] p_{n-1} - (Gdown[n] + Gup[n]) p_n
//
// The ladder is cut at n = cutoff with a reflecting top (no birth out of the
// last level), which matches the truncated a^dagger of the Lindblad models.

#pragma once

#include "qengine/lindblad.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qengine {

class BirthDeathModel {
public:
    struct Linear {
        double gamma_up;
        double gamma_down;
    };
    struct SaturatedPump {  // Gup = A(n+1)/(1 + C(n+1)), Gdown = B n
        double a;
        double b;
        double c;
    };
    struct SaturatedDamp {  // Gup = A(n+1), Gdown = B(n + C n^2)
        double a;
        double b;
        double c;
    };
    struct Loaded {  // Gup = gamma_up (n+1), Gdown = gamma_down n + delta n^2
        double gamma_up;
        double gamma_down;
        double delta;
    };
    struct Custom {
        LevelFunction up;
        LevelFunction down;
    };
    using Family = std::variant<Linear, SaturatedPump, SaturatedDamp, Loaded, Custom>;

    static BirthDeathModel linear(double gamma_up, double gamma_down);
    static BirthDeathModel saturated_pump(double a, double b, double c);
    static BirthDeathModel saturated_damp(double a, double b, double c);
    static BirthDeathModel loaded(double gamma_up, double gamma_down, double delta);
    // Requires down(0) == 0.
    static BirthDeathModel custom(LevelFunction up, LevelFunction down);

    const Family& family() const noexcept { return family_; }
    std::string_view kind() const noexcept;

private:
    explicit BirthDeathModel(Family f) : family_(std::move(f)) {}
    Family family_;
};

struct RatePair {
    double up;
    double down;
};

RatePair rates(const BirthDeathModel& model, int n);

// Birth-death model whose rates match the diagonal dynamics of a laser generator.
BirthDeathModel matching_birth_death(const GeneratorSpec& gen);

// Probabilities over n = 0..cutoff.
class PhotonDistribution {
public:
    // Throws DomainError unless p_n >= -1e-12 and sum within 1e-10 of 1.
    explicit PhotonDistribution(Eigen::VectorXd p);

    const Eigen::VectorXd& probabilities() const noexcept { return p_; }
    int cutoff() const noexcept { return static_cast<int>(p_.size()) - 1; }
    double operator[](int n) const { return p_(n); }

private:
    Eigen::VectorXd p_;
};

PhotonDistribution poisson_distribution(double mean, int cutoff);

// 1/2 sum |p_n - q_n|; the shorter vector is zero-padded.
double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct DistributionEvolveOptions {
    int sample_every = 1;
    // BoundaryLeak when Gup[cutoff-1] p_{cutoff-1} exceeds this.
    double boundary_flux_limit = 1e-10;
};

struct DistributionSeries {
    std::vector<double> times;
    std::vector<PhotonDistribution> distributions;
    double max_boundary_flux = 0.0;
};

// Fixed-step RK4; the step is shrunk to land on t_final.
DistributionSeries evolve_distribution(const BirthDeathModel& model, const PhotonDistribution& p0, double t_final,
                                       double dt, const DistributionEvolveOptions& options = {});

// Unnormalized log p_n of the product-form stationary state (log p_0 = 0).
// Entries are -inf beyond a level that cannot be reached.
Eigen::VectorXd log_stationary_weights(const BirthDeathModel& model, int cutoff);

// Product-form stationary distribution. Throws NoStationaryState when the
// chain is not positive recurrent and CutoffTooSmall when the geometric bound
// on the mass beyond `cutoff` is above 1e-12.
PhotonDistribution stationary_distribution(const BirthDeathModel& model, int cutoff);

// Starts at max(50, 10 * mode estimate) and doubles until the tail bound holds.
int auto_cutoff(const BirthDeathModel& model);

struct JumpTrajectory {
    std::vector<double> times;  // jump times, times[0] = 0
    std::vector<int> counts;    // photon number after each jump
    double t_final = 0.0;
    bool absorbed = false;

    int at(double t) const;
};

// Event-driven (Gillespie) sample path; deterministic for a fixed seed.
JumpTrajectory gillespie_sample(const BirthDeathModel& model, int n0, double t_final, std::uint64_t seed);

// Photon number at t_final for `runs` independent paths seeded seed + run index.
std::vector<int> gillespie_endpoints(const BirthDeathModel& model, int n0, double t_final, std::uint64_t seed,
                                     int runs);

struct Moments {
    double mean;
    double variance;
    double fano;  // NaN when mean == 0
};

Moments moments(const PhotonDistribution& p);

}  // namespace qengine
