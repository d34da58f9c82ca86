// fock.hpp: truncated single-mode Fock space: operators, canonical states, phase-space data

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>

namespace qengine {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Validation tolerances for density matrices. The process-wide default can be
// overridden once at startup; every validating call also accepts an explicit set.
struct Tolerances {
    double hermiticity = 1e-10;  // max |rho - rho^dagger|
    double positivity = 1e-10;   // eigenvalues >= -positivity
    double trace = 1e-10;        // |Tr rho - 1|
};

Tolerances default_tolerances();
void set_default_tolerances(const Tolerances& tol);

// Span of |0>, ..., |dim-1>. Also used for plain finite-level systems.
class FockSpace {
public:
    explicit FockSpace(int dim);

    int dim() const noexcept { return dim_; }

    friend bool operator==(FockSpace a, FockSpace b) noexcept { return a.dim_ == b.dim_; }

private:
    int dim_;
};

// Dense complex matrix acting on a FockSpace.
class Operator {
public:
    explicit Operator(Matrix entries);

    static Operator zero(FockSpace space);
    static Operator identity(FockSpace space);

    FockSpace space() const { return FockSpace(static_cast<int>(m_.rows())); }
    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const Matrix& matrix() const noexcept { return m_; }
    Complex operator()(int row, int col) const { return m_(row, col); }

    Operator adjoint() const { return Operator(m_.adjoint()); }
    bool is_hermitian(double tol) const;

    Operator& operator+=(const Operator& other);
    Operator& operator-=(const Operator& other);
    Operator& operator*=(Complex s);

    friend Operator operator+(Operator a, const Operator& b) { return a += b; }
    friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
    friend Operator operator*(Complex s, Operator a) { return a *= s; }
    friend Operator operator*(const Operator& a, const Operator& b);

private:
    Matrix m_;
};

// Hermitian, positive semidefinite, unit-trace operator.
class DensityMatrix {
public:
    // Throws DomainError when an invariant fails under `tol`.
    explicit DensityMatrix(Operator op, const Tolerances& tol = default_tolerances());

    // Skips validation. For callers that have just repaired the state themselves.
    static DensityMatrix unchecked(Operator op);

    const Operator& op() const noexcept { return op_; }
    const Matrix& matrix() const noexcept { return op_.matrix(); }
    FockSpace space() const { return op_.space(); }
    int dim() const noexcept { return op_.dim(); }

    // Diagonal <n|rho|n> as reals.
    Eigen::VectorXd populations() const { return op_.matrix().diagonal().real(); }

private:
    struct NoCheck {};
    DensityMatrix(Operator op, NoCheck) : op_(std::move(op)) {}

    Operator op_;
};

// Checks the density-matrix invariants; returns an empty string when valid,
// otherwise a description of the first violation.
std::string density_matrix_violation(const Matrix& rho, const Tolerances& tol);

Operator annihilation_matrix(FockSpace space);
Operator creation_matrix(FockSpace space);
Operator number_operator(FockSpace space);

DensityMatrix fock_state(int n, FockSpace space);
DensityMatrix diagonal_state(const Eigen::VectorXd& populations);

// Poisson mass e^{-|alpha|^2} |alpha|^{2n}/n! summed over n >= dim.
double coherent_tail_mass(Complex alpha, int dim);

// Renormalized truncated coherent vector. Throws TruncationError when the
// tail mass is above 1e-10.
Vector coherent_vector(Complex alpha, FockSpace space);
DensityMatrix coherent_state(Complex alpha, FockSpace space);

// p_n proportional to exp(-beta_omega n), renormalized over the retained levels.
DensityMatrix thermal_state(double beta_omega, FockSpace space);

// Tr(rho A).
Complex expectation(const DensityMatrix& rho, const Operator& a);
Complex trace_product(const Matrix& rho, const Matrix& a);

// Keeps only the diagonal (photon-number) part.
DensityMatrix phase_average(const DensityMatrix& rho);

// Occupancy of the highest retained level; the leakage monitor used during evolution.
double top_occupancy(const DensityMatrix& rho);

struct GridRange {
    double min;
    double max;
};

// Husimi Q(alpha) = <alpha|rho|alpha>/pi on a resolution x resolution grid, with
// |alpha> the untruncated coherent state (only its first dim components matter).
// Row index runs over Im(alpha), column index over Re(alpha).
Eigen::MatrixXd husimi_grid(const DensityMatrix& rho, GridRange re, GridRange im, int resolution);

}  // namespace qengine
