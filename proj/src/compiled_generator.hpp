// compiled_generator.hpp: generator specialized to a fixed dimension (internal)

#pragma once

#include "qengine/lindblad.hpp"

#include <variant>

namespace qengine::detail {

// Laser variants: coefficient arrays for the tri-diagonal coupling of
// rho_{mn} with rho_{m+1,n+1} and rho_{m-1,n-1}.
struct LadderForm {
    int dim = 0;
    double omega = 0.0;
    Eigen::VectorXd decay;        // K_n = sum over channels |c_n|^2 + |b_n|^2 (diagonal of sum V^dag V)
    Eigen::MatrixXd lower;        // lower(i,j) = sum c_{i+1} c_{j+1}; (D-1)x(D-1)
    Eigen::MatrixXd raise;        // raise(i,j) = sum b_i b_j;         (D-1)x(D-1)
    Matrix diag_coef;             // -i omega (m-n) - (K_m + K_n)/2
    Matrix diag_coef_adjoint;     // +i omega (m-n) - (K_m + K_n)/2
    Eigen::VectorXd up_rates;     // Gamma_up[n]
    Eigen::VectorXd down_rates;   // Gamma_down[n]
};

struct DenseForm {
    int dim = 0;
    Matrix h_eff;                 // H - i/2 sum V^dag V
    std::vector<Matrix> jumps;
};

class CompiledGenerator {
public:
    CompiledGenerator(const GeneratorSpec& gen, int dim);

    int dim() const noexcept { return dim_; }
    bool is_ladder() const noexcept { return std::holds_alternative<LadderForm>(form_); }
    const LadderForm& ladder() const { return std::get<LadderForm>(form_); }

    Matrix apply(const Matrix& rho) const;
    Matrix adjoint(const Matrix& a) const;
    double norm_estimate() const noexcept { return norm_estimate_; }

private:
    int dim_;
    std::variant<LadderForm, DenseForm> form_;
    double norm_estimate_ = 0.0;
};

// Resolves the working dimension: variants with a fixed dimension must match
// `requested` when it is nonzero.
int resolve_dim(const GeneratorSpec& gen, int requested);

}  // namespace qengine::detail
