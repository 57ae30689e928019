#include "bnmtf/infer_np.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace bnmtf {

namespace {

constexpr double kFloor = 1e-15;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void floor_entries(Eigen::MatrixXd& m) {
    m = m.cwiseMax(kFloor);
}

// Multiplicative update of `factor` with per-cell basis values basis(i,j)
// playing the role of the other factor's contribution: for each entry (r, k),
// new = old * sum_{c in omega_r} ratio(r,c) basis(c,k) / sum basis(c,k).
// `omega_rows` is the index-set view matching the rows of `factor`.
int update_factor(Eigen::MatrixXd& factor,
                  const std::vector<std::vector<int>>& omega_rows,
                  const Eigen::MatrixXd& ratios, const Eigen::MatrixXd& basis,
                  bool transpose_ratios) {
    int skipped = 0;
    const Eigen::Index n = factor.rows();
    const Eigen::Index k_dim = factor.cols();
    Eigen::MatrixXd updated = factor;
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& omega = omega_rows[r];
        for (Eigen::Index k = 0; k < k_dim; ++k) {
            double num = 0.0, den = 0.0;
            for (int c : omega) {
                const double ratio = transpose_ratios ? ratios(c, r) : ratios(r, c);
                num += ratio * basis(c, k);
                den += basis(c, k);
            }
            if (den <= 0.0) {
                ++skipped;
                continue;
            }
            updated(r, k) = std::max(kFloor, factor(r, k) * num / den);
        }
    }
    factor = updated;
    return skipped;
}

// R_ij / P_ij on observed cells; zero elsewhere (never read there).
Eigen::MatrixXd observed_ratios(const MaskedMatrix& data, const Eigen::MatrixXd& pred) {
    Eigen::MatrixXd ratios = Eigen::MatrixXd::Zero(data.rows(), data.cols());
    for (const auto& [i, j] : data.omega())
        ratios(i, j) = data.values()(i, j) / pred(i, j);
    return ratios;
}

std::vector<std::vector<int>> all_row_omegas(const MaskedMatrix& data) {
    std::vector<std::vector<int>> v(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) v[i] = data.row_omega(i);
    return v;
}

std::vector<std::vector<int>> all_col_omegas(const MaskedMatrix& data) {
    std::vector<std::vector<int>> v(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) v[j] = data.col_omega(j);
    return v;
}

}  // namespace

NpSweepStats np_sweep_nmf(NmfState& state, const MaskedMatrix& data) {
    if (state.U.rows() != data.rows() || state.V.rows() != data.cols())
        throw std::invalid_argument("np_sweep_nmf: state/data shape mismatch");
    NpSweepStats stats;

    Eigen::MatrixXd ratios = observed_ratios(data, state.predict());
    stats.skipped_entries +=
        update_factor(state.U, all_row_omegas(data), ratios, state.V, false);

    ratios = observed_ratios(data, state.predict());
    stats.skipped_entries +=
        update_factor(state.V, all_col_omegas(data), ratios, state.U, true);
    return stats;
}

NpSweepStats np_sweep_nmtf(NmtfState& state, const MaskedMatrix& data) {
    return np_sweep_nmtf(state, data, UpdateToggles{});
}

NpSweepStats np_sweep_nmtf(NmtfState& state, const MaskedMatrix& data,
                           const UpdateToggles& update) {
    if (state.F.rows() != data.rows() || state.G.rows() != data.cols())
        throw std::invalid_argument("np_sweep_nmtf: state/data shape mismatch");
    NpSweepStats stats;
    const Eigen::Index K = state.S.rows();
    const Eigen::Index L = state.S.cols();

    if (update.row_factor) {
        // F update: basis column k holds (S_k . G_j) for each j.
        const Eigen::MatrixXd ratios = observed_ratios(data, state.predict());
        const Eigen::MatrixXd sg = state.G * state.S.transpose();  // J x K
        stats.skipped_entries +=
            update_factor(state.F, all_row_omegas(data), ratios, sg, false);
    }

    if (update.mid_factor) {
        // S update over the full observed set.
        const Eigen::MatrixXd ratios = observed_ratios(data, state.predict());
        Eigen::MatrixXd s_new = state.S;
        for (Eigen::Index k = 0; k < K; ++k) {
            for (Eigen::Index l = 0; l < L; ++l) {
                double num = 0.0, den = 0.0;
                for (const auto& [i, j] : data.omega()) {
                    const double fg = state.F(i, k) * state.G(j, l);
                    num += ratios(i, j) * fg;
                    den += fg;
                }
                if (den <= 0.0) {
                    ++stats.skipped_entries;
                    continue;
                }
                s_new(k, l) = std::max(kFloor, state.S(k, l) * num / den);
            }
        }
        state.S = s_new;
    }

    if (update.col_factor) {
        // G update: basis column l holds (F_i . S_{.l}) for each i.
        const Eigen::MatrixXd ratios = observed_ratios(data, state.predict());
        const Eigen::MatrixXd fs = state.F * state.S;  // I x L
        stats.skipped_entries +=
            update_factor(state.G, all_col_omegas(data), ratios, fs, true);
    }
    return stats;
}

bool stop_rule_fires(const StopRule& rule, const std::vector<double>& metric) {
    const int n = static_cast<int>(metric.size()) - 1;  // iterations completed
    if (n >= rule.max_iterations) return true;
    if (rule.rel_tol >= 0.0 && n >= rule.window) {
        const double prev = metric[n - rule.window];
        const double cur = metric[n];
        if (std::abs(prev - cur) < rule.rel_tol * std::abs(prev)) return true;
    }
    return false;
}

namespace {

template <typename State, typename SweepFn>
TraceRecord run_np_loop(State& state, const MaskedMatrix& data,
                        const RunOptions& opts, SweepFn sweep) {
    TraceRecord trace;
    const auto start = Clock::now();
    trace.train_mse.push_back(data.mse(state.predict()));
    trace.seconds.push_back(seconds_since(start));
    while (!stop_rule_fires(opts.stop, trace.train_mse)) {
        sweep(state, data);
        trace.train_mse.push_back(data.mse(state.predict()));
        trace.seconds.push_back(seconds_since(start));
    }
    return trace;
}

}  // namespace

NpNmfResult run_np_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                       const RunOptions& opts, std::uint64_t seed) {
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NpNmfResult result;
    result.state = init_nmf(hyper, data.rows(), data.cols(), opts.init, &data, init_rng);
    floor_entries(result.state.U);
    floor_entries(result.state.V);
    result.trace = run_np_loop(result.state, data, opts,
                               [](NmfState& s, const MaskedMatrix& d) { np_sweep_nmf(s, d); });
    return result;
}

NpNmtfResult run_np_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed) {
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NpNmtfResult result;
    result.state = init_nmtf(hyper, data.rows(), data.cols(), opts.init, &data,
                             init_rng, /*indicator_smoothing=*/0.0);
    floor_entries(result.state.F);
    floor_entries(result.state.S);
    floor_entries(result.state.G);
    result.trace = run_np_loop(result.state, data, opts,
                               [](NmtfState& s, const MaskedMatrix& d) { np_sweep_nmtf(s, d); });
    return result;
}

}  // namespace bnmtf
