#include "qengine/fock.hpp"

#include "qengine/errors.hpp"
#include "qengine/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

namespace qengine {
namespace {

constexpr double kCoherentLeakageLimit = 1e-10;

std::mutex& tol_mutex() {
    static std::mutex m;
    return m;
}

Tolerances& tol_storage() {
    static Tolerances tol;
    return tol;
}

void require_same_dim(int a, int b, const char* what) {
    if (a != b) {
        std::ostringstream os;
        os << what << ": dimension " << a << " vs " << b;
        throw DimensionMismatch(os.str());
    }
}

}  // namespace

Tolerances default_tolerances() {
    std::lock_guard lock(tol_mutex());
    return tol_storage();
}

void set_default_tolerances(const Tolerances& tol) {
    std::lock_guard lock(tol_mutex());
    tol_storage() = tol;
}

FockSpace::FockSpace(int dim) : dim_(dim) {
    if (dim < 2) throw DomainError("FockSpace dimension must be >= 2, got " + std::to_string(dim));
}

Operator::Operator(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols())
        throw DimensionMismatch("operator matrix must be square, got " + std::to_string(m_.rows()) + "x" +
                                std::to_string(m_.cols()));
    if (m_.rows() < 2) throw DomainError("operator dimension must be >= 2");
}

Operator Operator::zero(FockSpace space) { return Operator(Matrix::Zero(space.dim(), space.dim())); }

Operator Operator::identity(FockSpace space) { return Operator(Matrix::Identity(space.dim(), space.dim())); }

bool Operator::is_hermitian(double tol) const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tol; }

Operator& Operator::operator+=(const Operator& other) {
    require_same_dim(dim(), other.dim(), "operator sum");
    m_ += other.m_;
    return *this;
}

Operator& Operator::operator-=(const Operator& other) {
    require_same_dim(dim(), other.dim(), "operator difference");
    m_ -= other.m_;
    return *this;
}

Operator& Operator::operator*=(Complex s) {
    m_ *= s;
    return *this;
}

Operator operator*(const Operator& a, const Operator& b) {
    require_same_dim(a.dim(), b.dim(), "operator product");
    return Operator(a.m_ * b.m_);
}

std::string density_matrix_violation(const Matrix& rho, const Tolerances& tol) {
    if (!rho.allFinite()) return "non-finite entries";
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol.hermiticity) return "not Hermitian (deviation " + std::to_string(herm) + ")";
    const Complex tr = rho.trace();
    if (std::abs(tr - 1.0) > tol.trace) return "trace " + std::to_string(tr.real()) + " != 1";
    const Matrix sym = 0.5 * (rho + rho.adjoint());
    const double min_eig = hermitian_spectrum(sym).values.minCoeff();
    if (min_eig < -tol.positivity) return "negative eigenvalue " + std::to_string(min_eig);
    return {};
}

DensityMatrix::DensityMatrix(Operator op, const Tolerances& tol) : op_(std::move(op)) {
    if (auto why = density_matrix_violation(op_.matrix(), tol); !why.empty())
        throw DomainError("invalid density matrix: " + why);
}

DensityMatrix DensityMatrix::unchecked(Operator op) { return DensityMatrix(std::move(op), NoCheck{}); }

Operator annihilation_matrix(FockSpace space) {
    const int d = space.dim();
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return Operator(std::move(a));
}

Operator creation_matrix(FockSpace space) { return annihilation_matrix(space).adjoint(); }

Operator number_operator(FockSpace space) {
    const int d = space.dim();
    Matrix n = Matrix::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
    return Operator(std::move(n));
}

DensityMatrix fock_state(int n, FockSpace space) {
    if (n < 0 || n >= space.dim())
        throw TruncationError("Fock level " + std::to_string(n) + " outside dimension " + std::to_string(space.dim()));
    Matrix rho = Matrix::Zero(space.dim(), space.dim());
    rho(n, n) = 1.0;
    return DensityMatrix::unchecked(Operator(std::move(rho)));
}

DensityMatrix diagonal_state(const Eigen::VectorXd& populations) {
    Matrix rho = Matrix::Zero(populations.size(), populations.size());
    rho.diagonal() = populations.cast<Complex>();
    return DensityMatrix(Operator(std::move(rho)));
}

double coherent_tail_mass(Complex alpha, int dim) {
    const double mean = std::norm(alpha);
    if (mean == 0.0) return 0.0;
    // Sum the Poisson tail directly from n = dim upward, in log space.
    const double log_mean = std::log(mean);
    double tail = 0.0;
    for (int n = dim;; ++n) {
        const double term = std::exp(-mean + n * log_mean - std::lgamma(n + 1.0));
        tail += term;
        if (n > mean && term < 1e-18 * std::max(tail, 1e-300)) break;
        if (n > dim + 100000) break;
    }
    return tail;
}

Vector coherent_vector(Complex alpha, FockSpace space) {
    const int d = space.dim();
    const double leak = coherent_tail_mass(alpha, d);
    if (leak >= kCoherentLeakageLimit) {
        std::ostringstream os;
        os << "coherent state |alpha|=" << std::abs(alpha) << " leaks " << leak << " beyond dimension " << d;
        throw TruncationError(os.str());
    }
    Vector v(d);
    v(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < d; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    v /= v.norm();
    return v;
}

DensityMatrix coherent_state(Complex alpha, FockSpace space) {
    const Vector v = coherent_vector(alpha, space);
    Matrix rho = v * v.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    return DensityMatrix::unchecked(Operator(std::move(rho)));
}

DensityMatrix thermal_state(double beta_omega, FockSpace space) {
    if (!(beta_omega > 0.0)) throw DomainError("thermal_state requires beta*omega > 0");
    const int d = space.dim();
    Eigen::VectorXd p(d);
    for (int n = 0; n < d; ++n) p(n) = std::exp(-beta_omega * n);
    p /= p.sum();
    Matrix rho = Matrix::Zero(d, d);
    rho.diagonal() = p.cast<Complex>();
    return DensityMatrix::unchecked(Operator(std::move(rho)));
}

Complex trace_product(const Matrix& rho, const Matrix& a) {
    require_same_dim(static_cast<int>(rho.rows()), static_cast<int>(a.rows()), "trace product");
    return rho.cwiseProduct(a.transpose()).sum();
}

Complex expectation(const DensityMatrix& rho, const Operator& a) { return trace_product(rho.matrix(), a.matrix()); }

DensityMatrix phase_average(const DensityMatrix& rho) {
    Matrix out = Matrix::Zero(rho.dim(), rho.dim());
    out.diagonal() = rho.matrix().diagonal().real().cast<Complex>();
    return DensityMatrix::unchecked(Operator(std::move(out)));
}

double top_occupancy(const DensityMatrix& rho) { return rho.matrix()(rho.dim() - 1, rho.dim() - 1).real(); }

namespace {

// <n|alpha> for n < dim of the untruncated coherent state, without renormalization.
Vector coherent_projection(Complex alpha, int dim) {
    Vector v(dim);
    const double r = std::abs(alpha);
    const double phase = std::arg(alpha);
    for (int n = 0; n < dim; ++n) {
        if (r == 0.0) {
            v(n) = n == 0 ? 1.0 : 0.0;
            continue;
        }
        const double log_mag = -0.5 * r * r + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
        v(n) = std::polar(std::exp(log_mag), n * phase);
    }
    return v;
}

}  // namespace

Eigen::MatrixXd husimi_grid(const DensityMatrix& rho, GridRange re, GridRange im, int resolution) {
    if (resolution < 1) throw DomainError("husimi_grid resolution must be >= 1");
    const auto axis = [resolution](GridRange r, int k) {
        return resolution == 1 ? r.min : r.min + (r.max - r.min) * k / (resolution - 1);
    };
    Eigen::MatrixXd q(resolution, resolution);
    const Matrix& m = rho.matrix();
    for (int i = 0; i < resolution; ++i) {
        for (int r = 0; r < resolution; ++r) {
            const Vector v = coherent_projection(Complex(axis(re, r), axis(im, i)), rho.dim());
            // Clamped: rounding can push the overlap of near-orthogonal vectors below zero.
            q(i, r) = std::max(0.0, (v.adjoint() * m * v)(0, 0).real()) / std::numbers::pi;
        }
    }
    return q;
}

}  // namespace qengine
