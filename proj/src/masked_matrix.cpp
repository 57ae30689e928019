#include "bnmtf/masked_matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bnmtf {

MaskedMatrix MaskedMatrix::from_dense(Eigen::MatrixXd values, BoolMatrix mask) {
    if (values.rows() != mask.rows() || values.cols() != mask.cols())
        throw std::invalid_argument("MaskedMatrix: values and mask shapes differ");
    if (values.rows() < 1 || values.cols() < 1)
        throw std::invalid_argument("MaskedMatrix: matrix must be at least 1x1");

    MaskedMatrix m;
    m.values_ = std::move(values);
    m.mask_ = std::move(mask);
    const Eigen::Index rows = m.values_.rows();
    const Eigen::Index cols = m.values_.cols();
    m.row_omega_.resize(rows);
    m.col_omega_.resize(cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (m.mask_(i, j)) {
                m.row_omega_[i].push_back(static_cast<int>(j));
                m.col_omega_[j].push_back(static_cast<int>(i));
                m.omega_.emplace_back(static_cast<int>(i), static_cast<int>(j));
            } else {
                m.values_(i, j) = 0.0;
            }
        }
    }
    m.n_observed_ = static_cast<std::int64_t>(m.omega_.size());
    if (m.n_observed_ == 0)
        throw std::invalid_argument("MaskedMatrix: no observed entries");
    return m;
}

double MaskedMatrix::mse(const Eigen::MatrixXd& prediction) const {
    if (prediction.rows() != rows() || prediction.cols() != cols())
        throw std::invalid_argument("mse: prediction shape mismatch");
    double sum = 0.0;
    for (const auto& [i, j] : omega_) {
        const double d = values_(i, j) - prediction(i, j);
        sum += d * d;
    }
    return sum / static_cast<double>(n_observed_);
}

double MaskedMatrix::i_divergence(const Eigen::MatrixXd& prediction) const {
    if (prediction.rows() != rows() || prediction.cols() != cols())
        throw std::invalid_argument("i_divergence: prediction shape mismatch");
    double sum = 0.0;
    for (const auto& [i, j] : omega_) {
        const double r = values_(i, j);
        const double p = prediction(i, j);
        if (!(p > 0.0))
            throw std::invalid_argument(
                "i_divergence: nonpositive prediction at observed cell (" +
                std::to_string(i) + "," + std::to_string(j) + ")");
        if (r > 0.0) sum += r * std::log(r / p) - r + p;
        else sum += p;  // 0 log 0 = 0
    }
    return sum;
}

MaskedMatrix MaskedMatrix::with_mask(const BoolMatrix& mask) const {
    return from_dense(values_, mask);
}

void MaskedMatrix::set_placeholders(double value) {
    for (Eigen::Index i = 0; i < rows(); ++i)
        for (Eigen::Index j = 0; j < cols(); ++j)
            if (!mask_(i, j)) values_(i, j) = value;
}

}  // namespace bnmtf
