#pragma once

#include <cstdint>
#include <vector>

#include "bnmtf/common.hpp"
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/model.hpp"

namespace bnmtf {

enum class FactorId { U, V, F, S, G };

/// Retained post-burn-in draws of a chain and their entrywise means.
/// retained count = floor((iterations - burn_in) / thin).
struct NmfPosterior {
    std::vector<NmfState> draws;
    NmfState summary_mean;
    int burn_in = 0;
    int thin = 1;
};

struct NmtfPosterior {
    std::vector<NmtfState> draws;
    NmtfState summary_mean;
    int burn_in = 0;
    int thin = 1;
};

/// Conditional posterior of the noise precision:
/// shape alpha_tau + |omega|/2, rate beta_tau + (1/2) sum of squared residuals.
GammaParams cond_tau(const NmfState& state, const MaskedMatrix& data,
                     const HyperParams& hyper);
GammaParams cond_tau(const NmtfState& state, const MaskedMatrix& data,
                     const HyperParams& hyper);

/// Conditional posterior of one factor entry given every other parameter.
/// A returned precision of 0 signals that no observed cell constrains the
/// entry (empty index set); callers fall back to the entry's prior.
TruncatedNormalParams cond_factor_entry(FactorId which, Eigen::Index row,
                                        Eigen::Index col, const NmfState& state,
                                        const MaskedMatrix& data,
                                        const HyperParams& hyper);
TruncatedNormalParams cond_factor_entry(FactorId which, Eigen::Index row,
                                        Eigen::Index col, const NmtfState& state,
                                        const MaskedMatrix& data,
                                        const HyperParams& hyper);

/// Conditional posterior of the shared column rate lambda_k (two-matrix
/// model: one rate per factor covering both U and V columns).
GammaParams cond_ard_lambda(const NmfState& state, int k, const HyperParams& hyper);
/// Three-matrix model: `which` selects the F-side (per k) or G-side (per l) rate.
GammaParams cond_ard_lambda(const NmtfState& state, FactorId which, int index,
                            const HyperParams& hyper);

struct GibbsNmfResult {
    NmfPosterior posterior;
    TraceRecord trace;
};
struct GibbsNmtfResult {
    NmtfPosterior posterior;
    TraceRecord trace;
};
struct IcmNmfResult {
    NmfState state;
    TraceRecord trace;
};
struct IcmNmtfResult {
    NmtfState state;
    TraceRecord trace;
};

/// Gibbs chain. Each iteration draws, in fixed order, all factor entries
/// (truncated normals), tau (Gamma) and, with ARD, the column rates (Gamma).
/// Every parameter owns its own random stream keyed by (slot, flat index), so
/// chains are reproducible bit for bit for any thread count and the
/// sequential schedule may still compute the rows of a column in parallel.
/// `initial`, when given, replaces the built-in initialisation.
GibbsNmfResult gibbs_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                             const RunOptions& opts, std::uint64_t seed,
                             const NmfState* initial = nullptr);
GibbsNmtfResult gibbs_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                               const RunOptions& opts, std::uint64_t seed,
                               const NmtfState* initial = nullptr);

/// Mode-ascent variant of the chain: every draw is replaced by the
/// conditional mode (max(0, mu) for truncated normals, (a-1)/b for Gammas),
/// factor entries equal to zero are reset to 0.1 at the end of each
/// iteration, and the returned point is the mean of the retained states.
IcmNmfResult icm_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed,
                         const NmfState* initial = nullptr);
IcmNmtfResult icm_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                           const RunOptions& opts, std::uint64_t seed,
                           const NmtfState* initial = nullptr);

}  // namespace bnmtf
