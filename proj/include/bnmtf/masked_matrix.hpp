#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace bnmtf {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense matrix with an observation mask. The observed index set and its
/// row/column slices are cached at construction; every metric and every
/// inference update reads observed cells only, so the values stored at
/// unobserved cells are irrelevant (they are normalised to 0.0).
class MaskedMatrix {
public:
    static MaskedMatrix from_dense(Eigen::MatrixXd values, BoolMatrix mask);

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    std::int64_t n_observed() const { return n_observed_; }
    double observed_fraction() const {
        return static_cast<double>(n_observed_) /
               (static_cast<double>(rows()) * static_cast<double>(cols()));
    }

    const Eigen::MatrixXd& values() const { return values_; }
    const BoolMatrix& mask() const { return mask_; }
    bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j); }

    /// Observed column indices of row i.
    const std::vector<int>& row_omega(Eigen::Index i) const { return row_omega_[i]; }
    /// Observed row indices of column j.
    const std::vector<int>& col_omega(Eigen::Index j) const { return col_omega_[j]; }
    /// All observed (i, j) cells in row-major order.
    const std::vector<std::pair<int, int>>& omega() const { return omega_; }

    /// (1/|omega|) sum of squared errors over observed cells.
    double mse(const Eigen::MatrixXd& prediction) const;

    /// Generalised KL divergence sum(R log(R/P) - R + P) over observed cells.
    /// Observed zeros contribute with the limit convention 0 log 0 = 0;
    /// nonpositive predictions at observed cells are an error.
    double i_divergence(const Eigen::MatrixXd& prediction) const;

    /// Same values, different mask (used by train/test splitting).
    MaskedMatrix with_mask(const BoolMatrix& mask) const;

    /// Overwrites every unobserved cell. Metrics and updates must not change.
    void set_placeholders(double value);

private:
    MaskedMatrix() = default;

    Eigen::MatrixXd values_;
    BoolMatrix mask_;
    std::int64_t n_observed_ = 0;
    std::vector<std::vector<int>> row_omega_;
    std::vector<std::vector<int>> col_omega_;
    std::vector<std::pair<int, int>> omega_;
};

}  // namespace bnmtf
