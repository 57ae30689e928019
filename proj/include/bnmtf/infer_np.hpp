#pragma once

#include <cstdint>

#include "bnmtf/common.hpp"
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/model.hpp"

namespace bnmtf {

/// Entries whose update had an empty or zero denominator (no observed data
/// constrains them) are left unchanged and counted here.
struct NpSweepStats {
    int skipped_entries = 0;
};

/// One full multiplicative-update sweep (all of U, then all of V), each
/// matrix updated simultaneously from its pre-sweep values. Factor entries
/// must start strictly positive; updates keep them at or above 1e-15. On
/// nonnegative data the generalised KL divergence never increases. Noisy
/// data may dip below zero at a few cells; the affected numerators are
/// clamped at the floor so nonnegativity still holds.
NpSweepStats np_sweep_nmf(NmfState& state, const MaskedMatrix& data);

/// Three-matrix analogue; sweep order F, S, G. The toggle overload skips
/// disabled stages (used by cross-engine consistency checks).
NpSweepStats np_sweep_nmtf(NmtfState& state, const MaskedMatrix& data);
NpSweepStats np_sweep_nmtf(NmtfState& state, const MaskedMatrix& data,
                           const UpdateToggles& update);

struct NpNmfResult {
    NmfState state;
    TraceRecord trace;
};
struct NpNmtfResult {
    NmtfState state;
    TraceRecord trace;
};

/// Runs sweeps until the stop rule fires, recording training MSE and wall
/// time per sweep. Initial entries are clamped to at least 1e-15 so that
/// multiplicative updates are never pinned at zero.
NpNmfResult run_np_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                       const RunOptions& opts, std::uint64_t seed);
NpNmtfResult run_np_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed);

/// Shared early-stop predicate: true once the relative change of the metric
/// over `window` iterations drops below `rel_tol`.
bool stop_rule_fires(const StopRule& rule, const std::vector<double>& metric);

}  // namespace bnmtf
