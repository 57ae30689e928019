#pragma once

#include <vector>

namespace bnmtf {

enum class InitStrategy { prior_mean, random_draw, kmeans };
enum class Engine { np, gibbs, icm, vb };
enum class Model { nmf, nmtf };

/// How the entries of one factor matrix are refreshed within a sweep.
///
/// `sequential` walks the columns in order; entries inside a column never
/// read each other, so rows of a column may still be computed in parallel
/// without changing any result. `synchronous` computes the whole matrix from
/// a frozen snapshot of itself, which is cheaper to parallelise across
/// columns but is not the exact coordinate scheme.
enum class Schedule { sequential, synchronous };

struct StopRule {
    int max_iterations = 1000;
    /// Optional early stop: relative change of training MSE over `window`
    /// iterations falls below `rel_tol`. Negative disables.
    double rel_tol = -1.0;
    int window = 10;
};

/// Per-iteration record of a run. Entry 0 is the initial point, so a run of
/// n iterations stores n+1 values per series. `elbo` is filled by the
/// variational engine only (at its configured cadence, NaN elsewhere).
struct TraceRecord {
    std::vector<double> train_mse;
    std::vector<double> seconds;  // cumulative wall time
    std::vector<double> elbo;

    int iterations() const { return static_cast<int>(train_mse.size()) - 1; }
};

/// Enables/disables parameter groups inside a run; used to clamp factors
/// for diagnostics and calibration tests.
struct UpdateToggles {
    bool row_factor = true;  // U or F
    bool col_factor = true;  // V or G
    bool mid_factor = true;  // S
    bool tau = true;
    bool ard = true;
};

struct RunOptions {
    StopRule stop{};
    int burn_in = -1;  // < 0 means max_iterations / 2 (sampling engines)
    int thin = 2;
    InitStrategy init = InitStrategy::random_draw;
    Schedule schedule = Schedule::sequential;
    int threads = 1;
    int elbo_every = 1;  // variational engine; 0 disables the ELBO trace
    UpdateToggles update{};
};

}  // namespace bnmtf
