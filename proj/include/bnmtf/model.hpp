#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bnmtf/common.hpp"
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/random.hpp"

namespace bnmtf {

/// Prior hyperparameters. Defaults are the weak priors used throughout:
/// lambda = 0.1 and unit Gamma shapes/rates.
struct HyperParams {
    double lambda = 0.1;    // exponential rate on factor entries
    double alpha_tau = 1.0;
    double beta_tau = 1.0;
    double alpha0 = 1.0;    // Gamma hyperprior on the per-factor rates
    double beta0 = 1.0;
    int K = 10;
    int L = 0;              // three-matrix model only
    bool ard = false;

    void validate(Model model) const;
};

/// Point state of the two-matrix model: R ~= U V^T.
struct NmfState {
    Eigen::MatrixXd U;  // I x K, nonnegative
    Eigen::MatrixXd V;  // J x K, nonnegative
    double tau = 1.0;
    Eigen::VectorXd ard_lambda;  // length K when ARD is enabled, else empty

    Eigen::MatrixXd predict() const { return U * V.transpose(); }
    double lambda_for(int k, const HyperParams& h) const {
        return ard_lambda.size() > 0 ? ard_lambda(k) : h.lambda;
    }
};

/// Point state of the three-matrix model: R ~= F S G^T.
struct NmtfState {
    Eigen::MatrixXd F;  // I x K
    Eigen::MatrixXd S;  // K x L
    Eigen::MatrixXd G;  // J x L
    double tau = 1.0;
    Eigen::VectorXd ard_lambda_f;  // length K when ARD is enabled
    Eigen::VectorXd ard_lambda_g;  // length L when ARD is enabled

    Eigen::MatrixXd predict() const { return F * S * G.transpose(); }
    double lambda_f_for(int k, const HyperParams& h) const {
        return ard_lambda_f.size() > 0 ? ard_lambda_f(k) : h.lambda;
    }
    double lambda_g_for(int l, const HyperParams& h) const {
        return ard_lambda_g.size() > 0 ? ard_lambda_g(l) : h.lambda;
    }
};

/// Variational description of one truncated-normal factor matrix: the
/// (mu, precision) parameters of each entry plus cached moments E[X], Var[X]
/// and E[X^2] (always mean^2 + variance).
struct VbFactor {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd prec;
    Eigen::MatrixXd mean;
    Eigen::MatrixXd var;
    Eigen::MatrixXd second;

    void resize(Eigen::Index rows, Eigen::Index cols);
    /// Sets the (mu, prec) parameters of one entry and refreshes its moments.
    void set_entry(Eigen::Index i, Eigen::Index j, const TruncatedNormalParams& p);
    /// Point mass at `value` (zero variance); prec is set huge, moments exact.
    void set_point(const Eigen::MatrixXd& values);
};

struct VbGamma {
    double shape = 1.0;
    double rate = 1.0;
    double mean() const { return shape / rate; }
};

struct VbNmfState {
    VbFactor U, V;
    VbGamma tau_q;
    std::vector<VbGamma> ard_q;  // size K when ARD is enabled

    Eigen::MatrixXd predict() const { return U.mean * V.mean.transpose(); }
    double tau_mean() const { return tau_q.mean(); }
    double lambda_mean_for(int k, const HyperParams& h) const {
        return ard_q.empty() ? h.lambda : ard_q[k].mean();
    }
};

struct VbNmtfState {
    VbFactor F, S, G;
    VbGamma tau_q;
    std::vector<VbGamma> ard_f_q;  // size K when ARD is enabled
    std::vector<VbGamma> ard_g_q;  // size L when ARD is enabled

    Eigen::MatrixXd predict() const { return F.mean * S.mean * G.mean.transpose(); }
    double tau_mean() const { return tau_q.mean(); }
    double lambda_f_mean_for(int k, const HyperParams& h) const {
        return ard_f_q.empty() ? h.lambda : ard_f_q[k].mean();
    }
    double lambda_g_mean_for(int l, const HyperParams& h) const {
        return ard_g_q.empty() ? h.lambda : ard_g_q[l].mean();
    }
};

/// K-means cluster indicators (Lloyd's algorithm with distance-weighted
/// seeding, at most 100 iterations, empty clusters reseeded to the farthest
/// point). Missing entries are imputed by the column means of observed cells.
/// Each returned row has exactly one 1 and no cluster is empty.
Eigen::MatrixXd kmeans_indicators(const Eigen::MatrixXd& points,
                                  const BoolMatrix& mask, int k, SeededRng& rng);

NmfState init_nmf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                  InitStrategy strategy, const MaskedMatrix* data, SeededRng& rng);
/// `indicator_smoothing` is added to k-means cluster indicators; the sampling
/// engines use 0.2, the multiplicative engine passes 0 (raw indicators).
NmtfState init_nmtf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                    InitStrategy strategy, const MaskedMatrix* data, SeededRng& rng,
                    double indicator_smoothing = 0.2);
VbNmfState init_vb_nmf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                       InitStrategy strategy, const MaskedMatrix* data, SeededRng& rng);
VbNmtfState init_vb_nmtf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                         InitStrategy strategy, const MaskedMatrix* data, SeededRng& rng);

}  // namespace bnmtf
