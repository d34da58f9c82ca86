#include <doctest.h>

#include "oracles.hpp"
#include "qengine/birthdeath.hpp"
#include "qengine/errors.hpp"
#include "qengine/lindblad.hpp"
#include "qengine/thermo.hpp"

#include <cmath>
#include <random>

using namespace qengine;

namespace {

Matrix vec(const Matrix& m) { return Eigen::Map<const Matrix>(m.data(), m.size(), 1); }

Matrix unvec(const Matrix& v, int d) { return Eigen::Map<const Matrix>(v.data(), d, d); }

// One generator of each variant on a Fock space (the Davies one is 3-level).
std::vector<GeneratorSpec> sample_generators(int dim) {
    std::mt19937_64 rng(11);
    const Operator h(oracle::random_matrix(dim, rng));
    const Operator herm(0.5 * (h.matrix() + h.matrix().adjoint()));
    std::vector<GeneratorSpec> gens = {
        GeneratorSpec::general(herm, {Operator(oracle::random_matrix(dim, rng)), Operator(oracle::random_matrix(dim, rng))}),
        GeneratorSpec::linear_laser(1.3, 0.4, 0.9),
        GeneratorSpec::nonlinear_laser(
            0.7, [](int n) { return std::sqrt(2.0 / (1.0 + 0.1 * (n + 1))); }, [](int n) { return 1.0 + 0.05 * n; }),
        GeneratorSpec::loaded_laser(1.0, 1.5, 1.0, 0.02),
    };
    return gens;
}

GeneratorSpec three_level_davies(double beta) {
    Matrix h = Matrix::Zero(3, 3);
    h(1, 1) = 1.0;
    h(2, 2) = 2.5;
    Matrix x = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
    return davies_generator(Operator(h), {{0, Operator(x), [](double w) { return 0.3 + 0.1 * w; }}}, {beta});
}

}  // namespace

TEST_CASE("dissipator examples") {
    const FockSpace s(5);
    const Operator a = annihilation_matrix(s);
    CHECK(dissipator_apply(a, fock_state(0, s).op()).matrix().norm() < 1e-15);

    const Matrix d1 = dissipator_apply(a, fock_state(1, s).op()).matrix();
    Matrix expected = Matrix::Zero(5, 5);
    expected(0, 0) = 1.0;
    expected(1, 1) = -1.0;
    CHECK((d1 - expected).norm() < 1e-14);

    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
        const Operator v(oracle::random_matrix(5, rng));
        const Operator rho(oracle::random_density(5, rng));
        const Matrix out = dissipator_apply(v, rho).matrix();
        CHECK(std::abs(out.trace()) < 1e-12 * out.norm());
        CHECK((out - out.adjoint()).norm() < 1e-12 * out.norm());
    }
    CHECK_THROWS_AS(dissipator_apply(a, fock_state(0, FockSpace(4)).op()), DimensionMismatch);
}

TEST_CASE("thermal state is annihilated by the detailed-balance laser") {
    const double bw = 0.8;
    const GeneratorSpec gen = GeneratorSpec::linear_laser(1.0, std::exp(-bw), 1.0);
    const Matrix out = generator_apply(gen, thermal_state(bw, FockSpace(40))).matrix();
    CHECK(out.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant-g nonlinear laser equals the linear laser") {
    const FockSpace s(12);
    const GeneratorSpec lin = GeneratorSpec::linear_laser(1.1, 0.3, 0.8);
    const GeneratorSpec non = GeneratorSpec::nonlinear_laser(
        1.1, [](int) { return std::sqrt(0.3); }, [](int) { return std::sqrt(0.8); });
    std::mt19937_64 rng(5);
    const Operator rho(oracle::random_density(12, rng));
    CHECK((generator_apply(lin, rho).matrix() - generator_apply(non, rho).matrix()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("trace and Hermiticity preservation on every variant") {
    std::mt19937_64 rng(17);
    for (const GeneratorSpec& gen : sample_generators(7)) {
        CAPTURE(gen.kind());
        for (int k = 0; k < 10; ++k) {
            const Operator rho(oracle::random_density(7, rng));
            const Matrix out = generator_apply(gen, rho).matrix();
            CHECK(std::abs(out.trace()) < 1e-12 * std::max(1.0, out.norm()));
            CHECK((out - out.adjoint()).norm() < 1e-12 * std::max(1.0, out.norm()));
        }
    }
    const GeneratorSpec dav = three_level_davies(0.7);
    for (int k = 0; k < 10; ++k) {
        const Matrix out = generator_apply(dav, Operator(oracle::random_density(3, rng))).matrix();
        CHECK(std::abs(out.trace()) < 1e-12);
        CHECK((out - out.adjoint()).norm() < 1e-12);
    }
}

TEST_CASE("adjoint duality and unitality") {
    std::mt19937_64 rng(23);
    for (const GeneratorSpec& gen : sample_generators(6)) {
        CAPTURE(gen.kind());
        CHECK(adjoint_apply(gen, Operator::identity(FockSpace(6))).matrix().norm() < 1e-12);
        for (int k = 0; k < 10; ++k) {
            const Operator rho(oracle::random_density(6, rng));
            const Operator a(oracle::random_matrix(6, rng));
            const Complex lhs = (a.matrix() * generator_apply(gen, rho).matrix()).trace();
            const Complex rhs = (adjoint_apply(gen, a).matrix() * rho.matrix()).trace();
            CHECK(std::abs(lhs - rhs) < 1e-10);
        }
    }
}

TEST_CASE("Heisenberg number operator under the linear laser") {
    const int d = 10;
    const double gu = 0.4, gd = 1.3;
    const FockSpace s(d);
    const Matrix out = adjoint_apply(GeneratorSpec::linear_laser(2.0, gu, gd), number_operator(s)).matrix();
    for (int n = 0; n + 1 < d; ++n) CHECK(out(n, n).real() == doctest::Approx((gu - gd) * n + gu).epsilon(1e-12));
    Matrix off = out;
    off.diagonal().setZero();
    CHECK(off.norm() < 1e-14);
}

TEST_CASE("ladder form, dense form and Kronecker superoperator agree") {
    const int d = 6;
    std::mt19937_64 rng(31);
    for (const GeneratorSpec& gen : sample_generators(d)) {
        CAPTURE(gen.kind());
        const GeneratorSpec dense = to_dense(gen, d);
        const auto& g = std::get<GeneralGKLS>(dense.variant());
        std::vector<Matrix> jumps;
        for (const Operator& v : g.jumps) jumps.push_back(v.matrix());
        const Matrix kron = oracle::kron_superoperator(g.hamiltonian.matrix(), jumps);
        CHECK((superoperator_matrix(gen, d) - kron).cwiseAbs().maxCoeff() < 1e-12);

        const Matrix rho = oracle::random_density(d, rng);
        const Matrix direct = generator_apply(gen, Operator(rho)).matrix();
        CHECK((direct - generator_apply(dense, Operator(rho)).matrix()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((direct - unvec(kron * vec(rho), d)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("ladder rates follow (n+1)|g_up|^2 and n|g_down|^2") {
    const int d = 9;
    const auto gu = [](int n) { return 1.0 / (1.0 + 0.2 * n); };
    const auto gd = [](int n) { return 0.5 + 0.1 * n; };
    const LadderRates r = ladder_rates(GeneratorSpec::nonlinear_laser(1.0, gu, gd), d);
    for (int n = 0; n < d; ++n) {
        CHECK(r.down(n) == doctest::Approx(n * gd(n) * gd(n)));
        if (n + 1 < d) CHECK(r.up(n) == doctest::Approx((n + 1) * gu(n) * gu(n)));
    }
    CHECK(r.up(d - 1) == 0.0);
}

TEST_CASE("generator validation") {
    CHECK_THROWS_AS(GeneratorSpec::linear_laser(1.0, -0.1, 1.0), DomainError);
    CHECK_THROWS_AS(GeneratorSpec::loaded_laser(1.0, 1.0, 1.0, -1.0), DomainError);
    CHECK_THROWS_AS(GeneratorSpec::general(Operator(Matrix::Identity(3, 3)), {Operator(Matrix::Identity(4, 4))}),
                    DimensionMismatch);
    Matrix h = Matrix::Zero(2, 2);
    h(0, 1) = 1.0;
    CHECK_THROWS_AS(GeneratorSpec::general(Operator(h), {}), DomainError);
    CHECK_THROWS_AS(davies_generator(Operator(Matrix(Eigen::Vector3cd(0.0, 1.0, 2.0).asDiagonal())), {}, {1.0}),
                    DegenerateSpectrum);
    CHECK_THROWS_AS(photon_flux(fock_state(0, FockSpace(3)), three_level_davies(1.0)), VariantMismatch);
}

TEST_CASE("evolve: two-level decay") {
    const double gd = 0.7;
    const Trajectory traj = evolve(GeneratorSpec::linear_laser(1.0, 0.0, gd), fock_state(1, FockSpace(4)), 5.0, 0.01, 10);
    REQUIRE(traj.times.size() == 51);
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        CHECK(std::abs(traj.states[k].populations()(1) - std::exp(-gd * traj.times[k])) < 1e-6);
    CHECK(traj.times.back() == doctest::Approx(5.0));
}

TEST_CASE("evolve: zero duration") {
    const DensityMatrix rho0 = coherent_state(Complex(1.0), FockSpace(20));
    const Trajectory traj = evolve(GeneratorSpec::linear_laser(1.0, 0.2, 1.0), rho0, 0.0, 0.01, 1);
    REQUIRE(traj.states.size() == 1);
    CHECK(traj.times[0] == 0.0);
    CHECK((traj.states[0].matrix() - rho0.matrix()).norm() == 0.0);
}

TEST_CASE("evolve: sampling grid and monotone times") {
    const Trajectory traj =
        evolve(GeneratorSpec::linear_laser(1.0, 0.2, 1.0), thermal_state(1.0, FockSpace(20)), 1.0, 0.03, 4);
    // 34 steps of 1/34, samples at 0, 4, ..., 32 and the final step.
    CHECK(traj.times.size() == 10);
    for (std::size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    CHECK(traj.times.back() == doctest::Approx(1.0));
    CHECK(traj.leakage.size() == traj.states.size());
    CHECK(traj.corrections.size() == traj.states.size());
}

TEST_CASE("evolve: step-halving convergence") {
    const GeneratorSpec gen = GeneratorSpec::loaded_laser(1.0, 1.5, 1.0, 0.05);
    const DensityMatrix rho0 = coherent_state(Complex(1.5), FockSpace(40));
    // Coarsest step at half the generator norm, then halved twice.
    const double n = std::ceil(2.0 * generator_norm_estimate(gen, 40));
    const auto final_state = [&](double steps) {
        return evolve(gen, rho0, 1.0, 1.0 / steps, 1 << 20).states.back().matrix();
    };
    const Matrix coarse = final_state(n);
    const Matrix fine = final_state(2.0 * n);
    const Matrix finer = final_state(4.0 * n);
    const double e1 = (coarse - finer).norm();
    const double e2 = (fine - finer).norm();
    CHECK(e2 < 1e-6);
    // Fourth order: halving the step cuts the error by about 16 (15x relative to the finest run).
    CHECK(e1 / e2 > 10.0);
}

TEST_CASE("evolve: positivity of every sample") {
    std::mt19937_64 rng(41);
    for (const GeneratorSpec& gen : sample_generators(8)) {
        CAPTURE(gen.kind());
        EvolveOptions opt;
        opt.leakage_limit = 1.0;
        const DensityMatrix rho0(Operator(oracle::random_density(8, rng)));
        const double dt = 0.5 / generator_norm_estimate(gen, 8);
        const Trajectory traj = evolve(gen, rho0, 2.0, dt, 5, opt);
        for (const DensityMatrix& s : traj.states)
            CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s.matrix()).eigenvalues().minCoeff() >= -1e-7);
    }
}

TEST_CASE("evolve: truncation and stability errors") {
    const GeneratorSpec gen = GeneratorSpec::linear_laser(1.0, 2.0, 0.5);
    CHECK_THROWS_AS(evolve(gen, coherent_state(Complex(2.0), FockSpace(30)), 5.0, 0.005, 10), TruncationError);
    // Far too large a step: RK4 diverges and the trace check fires.
    CHECK_THROWS_AS(evolve(GeneratorSpec::linear_laser(1.0, 0.0, 50.0), fock_state(10, FockSpace(12)), 1.0, 0.5, 1),
                    StabilityError);
    CHECK_THROWS_AS(evolve(gen, fock_state(0, FockSpace(4)), 1.0, 0.0, 1), DomainError);
    CHECK_THROWS_AS(evolve(gen, fock_state(0, FockSpace(4)), 1.0, 0.1, 0), DomainError);
}

TEST_CASE("evolve: dense and ladder paths agree") {
    const GeneratorSpec gen = GeneratorSpec::nonlinear_laser(
        1.0, [](int n) { return std::sqrt(2.0 / (1.0 + 0.1 * (n + 1))); }, [](int) { return 1.0; });
    const int d = 25;
    const DensityMatrix rho0 = coherent_state(Complex(1.2, 0.4), FockSpace(d));
    EvolveOptions opt;
    opt.leakage_limit = 1.0;
    const Matrix ladder = evolve(gen, rho0, 1.0, 0.005, 200, opt).states.back().matrix();
    const Matrix dense = evolve(to_dense(gen, d), rho0, 1.0, 0.005, 200, opt).states.back().matrix();
    CHECK((ladder - dense).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("diagonal evolution matches the birth-death integration") {
    const int d = 60;
    const double dt = 0.002;
    const std::vector<GeneratorSpec> gens = {
        GeneratorSpec::linear_laser(1.0, 0.5, 1.0),
        GeneratorSpec::nonlinear_laser(
            1.0, [](int n) { return std::sqrt(2.0 / (1.0 + 0.1 * (n + 1))); }, [](int) { return 1.0; }),
        GeneratorSpec::loaded_laser(1.0, 2.0, 1.0, 0.05),
    };
    const DensityMatrix rho0 = thermal_state(std::log1p(1.0 / 3.0), FockSpace(d));
    for (const GeneratorSpec& gen : gens) {
        CAPTURE(gen.kind());
        const Trajectory traj = evolve(gen, rho0, 3.0, dt, 25);
        DistributionEvolveOptions o;
        o.sample_every = 25;
        o.boundary_flux_limit = 1.0;
        const DistributionSeries ser =
            evolve_distribution(matching_birth_death(gen), PhotonDistribution(rho0.populations()), 3.0, dt, o);
        REQUIRE(ser.times.size() == traj.times.size());
        double worst = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k)
            worst = std::max(worst, (traj.states[k].populations() - ser.distributions[k].probabilities().head(d))
                                        .cwiseAbs()
                                        .maxCoeff());
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("stationary states") {
    SUBCASE("thermal below threshold") {
        const double bw = std::log(2.0);
        const int d = 60;
        const DensityMatrix rho = stationary_state(GeneratorSpec::linear_laser(1.0, 0.5, 1.0), d);
        const Eigen::VectorXd p = oracle::geometric_pmf(0.5, d) / (1.0 - std::pow(0.5, d));
        CHECK((rho.populations() - p).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((rho.matrix() - thermal_state(bw, FockSpace(d)).matrix()).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("full SVD and phase blocks agree") {
        const GeneratorSpec gen = GeneratorSpec::loaded_laser(1.0, 1.5, 1.0, 0.1);
        StationaryOptions full;
        full.use_phase_blocks = false;
        const Matrix a = stationary_state(gen, 20).matrix();
        const Matrix b = stationary_state(gen, 20, full).matrix();
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("above threshold") {
        CHECK_THROWS_AS(stationary_state(GeneratorSpec::linear_laser(1.0, 2.0, 1.0), 30), NoStationaryState);
        CHECK_THROWS_AS(stationary_state(GeneratorSpec::linear_laser(1.0, 1.0, 1.0), 30), NoStationaryState);
    }
    SUBCASE("degenerate kernel") {
        Matrix h = Matrix::Zero(2, 2);
        h(1, 1) = 1.0;
        CHECK_THROWS_AS(stationary_state(GeneratorSpec::general(Operator(h), {})), DegenerateKernel);
    }
    SUBCASE("Davies single bath relaxes to the Gibbs state") {
        const double beta = 0.9;
        const GeneratorSpec gen = three_level_davies(beta);
        const auto& dav = std::get<DaviesNLevel>(gen.variant());
        const DensityMatrix gibbs = gibbs_state(dav.hamiltonian, beta);
        CHECK((stationary_state(gen).matrix() - gibbs.matrix()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(generator_apply(gen, gibbs).matrix().cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("Davies generator structure") {
    SUBCASE("KMS pairing") {
        const double beta = 1.7;
        const GeneratorSpec gen = three_level_davies(beta);
        const auto& dav = std::get<DaviesNLevel>(gen.variant());
        CHECK(dav.jumps.size() == 6);
        for (const DaviesJump& j : dav.jumps) {
            if (j.bohr_frequency <= 0.0) continue;
            bool found = false;
            for (const DaviesJump& k : dav.jumps)
                if (std::abs(k.bohr_frequency + j.bohr_frequency) < 1e-12) {
                    CHECK(k.rate == doctest::Approx(std::exp(-beta * j.bohr_frequency) * j.rate));
                    found = true;
                }
            CHECK(found);
        }
    }
    SUBCASE("eigenoperators of the commutator") {
        const GeneratorSpec gen = three_level_davies(1.0);
        const auto& dav = std::get<DaviesNLevel>(gen.variant());
        const Matrix& h = dav.hamiltonian.matrix();
        for (const DaviesJump& j : dav.jumps) {
            const Matrix comm = h * j.op.matrix() - j.op.matrix() * h;
            CHECK((comm + j.bohr_frequency * j.op.matrix()).norm() < 1e-12);
        }
    }
    SUBCASE("two baths against the rate equations") {
        const double omega = 1.3, bh = 0.4, bc = 2.2, gh = 0.8, gc = 0.6;
        Matrix h = Matrix::Zero(2, 2);
        h(1, 1) = omega;
        Matrix sx(2, 2);
        sx << 0.0, 1.0, 1.0, 0.0;
        const Operator ham(h);
        const GeneratorSpec gen =
            davies_generator(ham, {{0, Operator(sx), [gh](double) { return gh; }}, {1, Operator(sx), [gc](double) { return gc; }}},
                             {bh, bc});
        const oracle::QubitRates ref =
            oracle::qubit_rate_equations(omega, {gh, gc}, {gh * std::exp(-bh * omega), gc * std::exp(-bc * omega)});
        const DensityMatrix rho = stationary_state(gen);
        CHECK(rho.populations()(1) == doctest::Approx(ref.p1).epsilon(1e-10));
        const double jh = heat_current_additive(rho, davies_bath_component(gen, 0), ham);
        const double jc = heat_current_additive(rho, davies_bath_component(gen, 1), ham);
        CHECK(jh == doctest::Approx(ref.currents[0]).epsilon(1e-9));
        CHECK(std::abs(jh + jc) < 1e-10);
        CHECK(jh > 0.0);
    }
    SUBCASE("all rates zero gives unitary dynamics") {
        Matrix h = Matrix::Zero(3, 3);
        h(1, 1) = 1.0;
        h(2, 2) = 2.5;
        Matrix x = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
        const GeneratorSpec gen = davies_generator(Operator(h), {{0, Operator(x), [](double) { return 0.0; }}}, {1.0});
        std::mt19937_64 rng(2);
        const Matrix rho = oracle::random_density(3, rng);
        const Complex i(0.0, 1.0);
        CHECK((generator_apply(gen, Operator(rho)).matrix() + i * (h * rho - rho * h)).norm() < 1e-14);
        const Trajectory traj = evolve(gen, DensityMatrix(Operator(rho)), 3.0, 0.01, 50);
        const double s0 = von_neumann_entropy(traj.states.front());
        for (const DensityMatrix& s : traj.states) CHECK(von_neumann_entropy(s) == doctest::Approx(s0).epsilon(1e-9));
    }
}
