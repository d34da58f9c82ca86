#include "qengine/linalg.hpp"

#include "qengine/errors.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace qengine {

bool is_exactly_diagonal(const Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (r != c && m(r, c) != Complex(0.0, 0.0)) return false;
    return true;
}

HermitianSpectrum hermitian_spectrum(const Matrix& h) {
    const Eigen::Index n = h.rows();
    HermitianSpectrum out;
    if (is_exactly_diagonal(h)) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return h(a, a).real() < h(b, b).real(); });
        out.values.resize(n);
        out.vectors = Matrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            out.values(k) = h(order[k], order[k]).real();
            out.vectors(order[k], k) = 1.0;
        }
        out.diagonal_input = true;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success) throw Error("Hermitian eigensolver did not converge");
    out.values = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
    return out;
}

Matrix apply_spectral(const HermitianSpectrum& spec, const std::function<double(double)>& f) {
    Eigen::VectorXd fv = spec.values.unaryExpr([&](double x) { return f(x); });
    if (spec.diagonal_input) {
        // Permutation matrix: place f values back on the original diagonal.
        const Eigen::Index n = fv.size();
        Matrix out = Matrix::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::Index row;
            spec.vectors.col(k).cwiseAbs().maxCoeff(&row);
            out(row, row) = fv(k);
        }
        return out;
    }
    return spec.vectors * fv.cast<Complex>().asDiagonal() * spec.vectors.adjoint();
}

}  // namespace qengine
