#pragma once

#include <cstdint>

#include "bnmtf/common.hpp"
#include "bnmtf/infer_gibbs_icm.hpp"  // FactorId
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/model.hpp"

namespace bnmtf {

/// Optimal Gamma factor for the noise precision given the current moment
/// caches; applies it to the state (refreshing the cached mean) and returns it.
GammaParams vb_update_tau(VbNmfState& state, const MaskedMatrix& data,
                          const HyperParams& hyper);
GammaParams vb_update_tau(VbNmtfState& state, const MaskedMatrix& data,
                          const HyperParams& hyper);

/// E_q[(R_ij - U_i . V_j)^2]: squared mean residual plus the per-factor
/// variance excess. Always at least the squared point residual.
double expected_residual_sq_nmf(const VbNmfState& state, const MaskedMatrix& data,
                                Eigen::Index i, Eigen::Index j);

/// Three-matrix analogue with the two nonzero covariance corrections.
double expected_residual_sq_nmtf(const VbNmtfState& state, const MaskedMatrix& data,
                                 Eigen::Index i, Eigen::Index j);

/// Optimal truncated-normal factor for one entry given all other factors;
/// applies it (moments refreshed) and returns the parameters. When no
/// observed cell constrains the entry the optimal factor is the prior, which
/// is stored through its exponential-limit truncated-normal encoding.
TruncatedNormalParams vb_update_factor_entry(FactorId which, Eigen::Index row,
                                             Eigen::Index col, VbNmfState& state,
                                             const MaskedMatrix& data,
                                             const HyperParams& hyper);
TruncatedNormalParams vb_update_factor_entry(FactorId which, Eigen::Index row,
                                             Eigen::Index col, VbNmtfState& state,
                                             const MaskedMatrix& data,
                                             const HyperParams& hyper);

GammaParams vb_update_ard(VbNmfState& state, int k, const HyperParams& hyper);
GammaParams vb_update_ard(VbNmtfState& state, FactorId which, int index,
                          const HyperParams& hyper);

/// Evidence lower bound: expected log-likelihood plus expected log-priors
/// plus the entropies of the variational factors.
double elbo(const VbNmfState& state, const MaskedMatrix& data,
            const HyperParams& hyper);
double elbo(const VbNmtfState& state, const MaskedMatrix& data,
            const HyperParams& hyper);

/// TN(mu, prec) whose moments reproduce Exp(rate) through the exponential
/// tail regime; used as the empty-index-set fallback factor.
TruncatedNormalParams exponential_limit_params(double rate);

struct VbNmfResult {
    VbNmfState state;
    TraceRecord trace;
};
struct VbNmtfResult {
    VbNmtfState state;
    TraceRecord trace;
};

/// Coordinate-ascent loop in the fixed order U, V, tau, rates (respectively
/// F, S, G, tau, rates). Deterministic given the seed, which feeds the
/// initialisation only. The sequential schedule never decreases the ELBO;
/// the synchronous schedule carries no such guarantee.
VbNmfResult vb_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                       const RunOptions& opts, std::uint64_t seed,
                       const VbNmfState* initial = nullptr);
VbNmtfResult vb_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed,
                         const VbNmtfState* initial = nullptr);

}  // namespace bnmtf
