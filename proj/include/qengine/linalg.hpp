// linalg.hpp: Hermitian spectral helpers used for entropies and logarithms

#pragma once

#include "qengine/fock.hpp"

#include <functional>

namespace qengine {

struct HermitianSpectrum {
    Eigen::VectorXd values;  // ascending
    Matrix vectors;          // columns are eigenvectors
    bool diagonal_input = false;
};

// Eigendecomposition of a Hermitian matrix. Exactly diagonal input is read off
// without a solver, so tiny populations keep full relative precision.
HermitianSpectrum hermitian_spectrum(const Matrix& h);

// V f(Lambda) V^dagger.
Matrix apply_spectral(const HermitianSpectrum& spec, const std::function<double(double)>& f);

// True when all off-diagonal entries are exactly zero.
bool is_exactly_diagonal(const Matrix& m);

}  // namespace qengine
