#include <stdexcept>
#include <doctest.h>

#include <cmath>
#include <limits>

#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/random.hpp"

using bnmtf::BoolMatrix;
using bnmtf::MaskedMatrix;

namespace {

MaskedMatrix small_with_hole() {
    Eigen::MatrixXd values(2, 2);
    values << 1, 2, 3, 0;
    BoolMatrix mask(2, 2);
    mask << true, true, true, false;
    return MaskedMatrix::from_dense(values, mask);
}

}  // namespace

TEST_CASE("index sets and counts") {
    auto m = small_with_hole();
    CHECK(m.n_observed() == 3);
    CHECK(m.row_omega(0).size() == 2);
    CHECK(m.row_omega(1).size() == 1);
    CHECK(m.col_omega(1).size() == 1);
    CHECK(m.observed_fraction() == doctest::Approx(0.75));

    BoolMatrix full = BoolMatrix::Constant(2, 2, true);
    auto all = MaskedMatrix::from_dense(Eigen::MatrixXd::Ones(2, 2), full);
    CHECK(all.n_observed() == 4);
    CHECK(all.observed_fraction() == doctest::Approx(1.0));
}

TEST_CASE("drug-panel-sized mask bookkeeping") {
    // 707 x 139 with 79262 observed cells gives the 0.806 observed fraction.
    const int rows = 707, cols = 139, observed = 79262;
    BoolMatrix mask = BoolMatrix::Constant(rows, cols, false);
    int placed = 0;
    for (int i = 0; i < rows && placed < observed; ++i)
        for (int j = 0; j < cols && placed < observed; ++j) {
            mask(i, j) = true;
            ++placed;
        }
    auto m = MaskedMatrix::from_dense(Eigen::MatrixXd::Zero(rows, cols), mask);
    CHECK(m.n_observed() == observed);
    CHECK(m.observed_fraction() == doctest::Approx(0.806).epsilon(1e-3));
}

TEST_CASE("construction errors") {
    BoolMatrix mask = BoolMatrix::Constant(2, 2, false);
    CHECK_THROWS_AS(MaskedMatrix::from_dense(Eigen::MatrixXd::Zero(2, 2), mask),
                    std::invalid_argument);
    BoolMatrix wrong = BoolMatrix::Constant(2, 3, true);
    CHECK_THROWS_AS(MaskedMatrix::from_dense(Eigen::MatrixXd::Zero(2, 2), wrong),
                    std::invalid_argument);
}

TEST_CASE("mse over observed cells") {
    auto m = small_with_hole();
    CHECK(m.mse(m.values()) == doctest::Approx(0.0));

    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 2.0);
    CHECK(m.mse(p) == doctest::Approx(2.0 / 3.0));

    CHECK_THROWS_AS(m.mse(Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("generalised KL divergence") {
    Eigen::MatrixXd r(1, 1);
    r << 1.0;
    auto m = MaskedMatrix::from_dense(r, BoolMatrix::Constant(1, 1, true));
    Eigen::MatrixXd p(1, 1);
    p << 2.0;
    CHECK(m.i_divergence(p) == doctest::Approx(0.30685281944005469).epsilon(1e-12));
    CHECK(m.i_divergence(r) == doctest::Approx(0.0));

    Eigen::MatrixXd bad(1, 1);
    bad << 0.0;
    CHECK_THROWS_AS(m.i_divergence(bad), std::invalid_argument);

    // Observed zeros follow the 0 log 0 = 0 convention.
    Eigen::MatrixXd rz(1, 1);
    rz << 0.0;
    auto mz = MaskedMatrix::from_dense(rz, BoolMatrix::Constant(1, 1, true));
    CHECK(mz.i_divergence(p) == doctest::Approx(2.0));
}

TEST_CASE("divergence is nonnegative, zero only at equality") {
    bnmtf::SeededRng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd r(3, 4), p(3, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) {
                r(i, j) = 0.1 + 5.0 * rng.uniform();
                p(i, j) = 0.1 + 5.0 * rng.uniform();
            }
        auto m = MaskedMatrix::from_dense(r, BoolMatrix::Constant(3, 4, true));
        CHECK(m.i_divergence(p) >= 0.0);
        CHECK(m.i_divergence(r) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("mse symmetric in its arguments at observed cells, divergence not") {
    bnmtf::SeededRng rng(11);
    Eigen::MatrixXd r(3, 3), p(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            r(i, j) = 0.5 + rng.uniform();
            p(i, j) = 0.5 + rng.uniform();
        }
    const BoolMatrix full = BoolMatrix::Constant(3, 3, true);
    auto mr = MaskedMatrix::from_dense(r, full);
    auto mp = MaskedMatrix::from_dense(p, full);
    CHECK(mr.mse(p) == doctest::Approx(mp.mse(r)).epsilon(1e-14));
    CHECK(mr.i_divergence(p) != doctest::Approx(mp.i_divergence(r)).epsilon(1e-10));
}

TEST_CASE("metrics ignore values stored at unobserved cells") {
    auto m = small_with_hole();
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 2, 2.0);
    const double mse_before = m.mse(p);
    const double div_before = m.i_divergence(p);
    m.set_placeholders(std::numeric_limits<double>::quiet_NaN());
    CHECK(m.mse(p) == mse_before);
    CHECK(m.i_divergence(p) == div_before);
}
