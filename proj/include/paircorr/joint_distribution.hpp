#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "paircorr/errors.hpp"

namespace paircorr {

// Joint single-pair distribution P_ij: probability that one emitted pair
// lands with its signal photon in mode i and its idler photon in mode j.
// Entries are non-negative and the matrix sums to 1.  Marginals
// P_i = sum_j P_ij and P_j = sum_i P_ij are cached on construction.
template <class Scalar = double>
class JointDistribution {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Index = Eigen::Index;

    enum class Normalize {
        reject,   // require |sum - 1| <= 1e-9
        rescale,  // divide by the sum if |sum - 1| < 1e-6, else reject
    };

    explicit JointDistribution(Matrix p, Normalize policy = Normalize::reject)
        : p_(std::move(p)) {
        if (p_.rows() < 1 || p_.cols() < 1)
            throw model_error("joint distribution: empty matrix");
        if (!p_.allFinite())
            throw model_error("joint distribution: non-finite entry");
        if ((p_.array() < Scalar(0)).any() || (p_.array() > Scalar(1)).any())
            throw model_error("joint distribution: entry outside [0, 1]");

        const Scalar sum = p_.sum();
        const Scalar dev = std::abs(double(sum - Scalar(1)));
        if (policy == Normalize::reject) {
            if (dev > Scalar(1e-9))
                throw model_error("joint distribution not normalized: entries "
                                  "sum to " + std::to_string(double(sum)) +
                                  ", expected 1");
        } else {
            if (dev >= Scalar(1e-6))
                throw model_error("joint distribution not normalized: sum " +
                                  std::to_string(double(sum)) +
                                  " is too far from 1 to rescale");
            if (dev > Scalar(0)) p_ /= sum;
        }

        row_ = p_.rowwise().sum();
        col_ = p_.colwise().sum().transpose();
    }

    Index rows() const { return p_.rows(); }
    Index cols() const { return p_.cols(); }

    const Matrix& p() const { return p_; }
    Scalar p(Index i, Index j) const { return p_(i, j); }

    // Signal-mode marginal P_i (row sums) and idler-mode marginal P_j
    // (column sums).
    const Vector& marginal_i() const { return row_; }
    const Vector& marginal_j() const { return col_; }
    Scalar marginal_i(Index i) const { return row_(i); }
    Scalar marginal_j(Index j) const { return col_(j); }

    // Cell with the largest P_ij (first in row-major order on ties).
    std::pair<Index, Index> argmax() const {
        Index i = 0, j = 0;
        Scalar best = p_(0, 0);
        for (Index r = 0; r < p_.rows(); ++r)
            for (Index c = 0; c < p_.cols(); ++c)
                if (p_(r, c) > best) { best = p_(r, c); i = r; j = c; }
        return {i, j};
    }

private:
    Matrix p_;
    Vector row_, col_;
};

}  // namespace paircorr
