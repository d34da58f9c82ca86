// band_ladder.hpp: laser generators acting on Hermitian states stored by coherence order (internal)
//
// Band k >= 0 holds rho_{j+k, j} for j = 0..D-1-k; the upper triangle is the
// conjugate. A ladder generator maps each band to itself through a
// tri-diagonal coupling, so bands that start at zero stay at zero and are
// never touched.

#pragma once

#include "compiled_generator.hpp"

#include <utility>
#include <vector>

namespace qengine::detail {

class BandLadder {
public:
    explicit BandLadder(const LadderForm& form);

    int dim() const noexcept { return dim_; }
    // Flat storage with one zero pad element at each end.
    Eigen::Index size() const noexcept { return size_; }
    Eigen::Index band_begin(int k) const { return offset_[static_cast<std::size_t>(k)]; }
    Eigen::Index band_end(int k) const { return offset_[static_cast<std::size_t>(k)] + (dim_ - k); }

    Vector pack(const Matrix& rho) const;
    Matrix unpack(const Vector& x) const;

    // Flat index ranges of the bands of `x` holding a nonzero entry, merged
    // where contiguous.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> active_ranges(const Vector& x) const;

    // out = L x on the given ranges; entries outside them are left untouched.
    void apply(const Vector& x, Vector& out, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& ranges) const;

private:
    int dim_;
    Eigen::Index size_;
    std::vector<Eigen::Index> offset_;
    Vector diag_;
    Eigen::VectorXd lower_;  // coefficient of x[i + 1]
    Eigen::VectorXd raise_;  // coefficient of x[i - 1]
};

}  // namespace qengine::detail
