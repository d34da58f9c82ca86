#include "band_ladder.hpp"

namespace qengine::detail {

BandLadder::BandLadder(const LadderForm& f) : dim_(f.dim) {
    const int d = dim_;
    offset_.resize(static_cast<std::size_t>(d));
    Eigen::Index pos = 1;
    for (int k = 0; k < d; ++k) {
        offset_[static_cast<std::size_t>(k)] = pos;
        pos += d - k;
    }
    size_ = pos + 1;
    diag_ = Vector::Zero(size_);
    lower_ = Eigen::VectorXd::Zero(size_);
    raise_ = Eigen::VectorXd::Zero(size_);
    for (int k = 0; k < d; ++k) {
        const Eigen::Index base = band_begin(k);
        const int len = d - k;
        for (int j = 0; j < len; ++j) {
            const int m = j + k;
            diag_(base + j) = f.diag_coef(m, j);
            if (j + 1 < len) lower_(base + j) = f.lower(m, j);
            if (j >= 1) raise_(base + j) = f.raise(m - 1, j - 1);
        }
    }
}

Vector BandLadder::pack(const Matrix& rho) const {
    Vector x = Vector::Zero(size_);
    for (int k = 0; k < dim_; ++k) {
        const Eigen::Index base = band_begin(k);
        for (int j = 0; j < dim_ - k; ++j) x(base + j) = rho(j + k, j);
    }
    return x;
}

Matrix BandLadder::unpack(const Vector& x) const {
    Matrix rho(dim_, dim_);
    for (int j = 0; j < dim_; ++j) rho(j, j) = x(band_begin(0) + j).real();
    for (int k = 1; k < dim_; ++k) {
        const Eigen::Index base = band_begin(k);
        for (int j = 0; j < dim_ - k; ++j) {
            rho(j + k, j) = x(base + j);
            rho(j, j + k) = std::conj(x(base + j));
        }
    }
    return rho;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> BandLadder::active_ranges(const Vector& x) const {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
    for (int k = 0; k < dim_; ++k) {
        const Eigen::Index b = band_begin(k);
        const Eigen::Index e = band_end(k);
        if (x.segment(b, e - b).isZero(0.0)) continue;
        if (!ranges.empty() && ranges.back().second == b)
            ranges.back().second = e;
        else
            ranges.emplace_back(b, e);
    }
    return ranges;
}

void BandLadder::apply(const Vector& x, Vector& out,
                       const std::vector<std::pair<Eigen::Index, Eigen::Index>>& ranges) const {
    const Complex* xp = x.data();
    const Complex* dg = diag_.data();
    const double* lo = lower_.data();
    const double* up = raise_.data();
    Complex* op = out.data();
    for (const auto& [b, e] : ranges)
        for (Eigen::Index i = b; i < e; ++i) op[i] = dg[i] * xp[i] + lo[i] * xp[i + 1] + up[i] * xp[i - 1];
}

}  // namespace qengine::detail
