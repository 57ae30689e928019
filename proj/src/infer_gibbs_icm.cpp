#include "bnmtf/infer_gibbs_icm.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "bnmtf/infer_np.hpp"  // stop_rule_fires
#include "detail/parallel.hpp"

namespace bnmtf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

enum class Mode { gibbs, icm };

struct RetentionPlan {
    int burn_in;
    int thin;
    bool retains(int t) const { return t > burn_in && (t - burn_in) % thin == 0; }
};

RetentionPlan resolve_retention(const RunOptions& opts) {
    const int burn_in =
        opts.burn_in >= 0 ? opts.burn_in : opts.stop.max_iterations / 2;
    if (opts.thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (burn_in >= opts.stop.max_iterations)
        throw std::invalid_argument("burn_in must be below max_iterations");
    return {burn_in, opts.thin};
}

// Draws from / takes the mode of the entry conditional; precision 0 means no
// observed cell constrains the entry, so the conditional is the prior.
double resolve_entry(Mode mode, const TruncatedNormalParams& p, double prior_rate,
                     SeededRng& rng) {
    if (p.tau > 0.0) {
        if (mode == Mode::gibbs) return sample_truncated_normal(p, rng);
        return tn_mode(p);
    }
    if (mode == Mode::gibbs) return sample_exponential(prior_rate, rng);
    return 0.0;  // exponential prior mode; the zero-reset picks it up
}

double resolve_gamma(Mode mode, const GammaParams& p, SeededRng& rng) {
    if (mode == Mode::gibbs) return sample_gamma(p, rng);
    return gamma_mode(p);
}

std::vector<SeededRng> make_streams(std::uint64_t seed, std::uint64_t slot,
                                    long count) {
    std::vector<SeededRng> streams;
    streams.reserve(count);
    for (long i = 0; i < count; ++i)
        streams.emplace_back(seed, make_stream(slot, static_cast<std::uint64_t>(i)));
    return streams;
}

// ---------------------------------------------------------------------------
// Two-matrix chain
// ---------------------------------------------------------------------------

struct NmfChain {
    const MaskedMatrix& data;
    const HyperParams& hyper;
    const RunOptions& opts;
    Mode mode;
    NmfState state;
    Eigen::MatrixXd resid;  // R - U V^T, valid on observed cells only
    std::vector<SeededRng> u_streams, v_streams, ard_streams;
    SeededRng tau_stream;

    NmfChain(const MaskedMatrix& d, const HyperParams& h, const RunOptions& o,
             Mode m, NmfState s, std::uint64_t seed)
        : data(d), hyper(h), opts(o), mode(m), state(std::move(s)),
          resid(Eigen::MatrixXd::Zero(d.rows(), d.cols())),
          tau_stream(seed, make_stream(stream_slot::tau, 0)) {
        if (mode == Mode::gibbs) {
            u_streams = make_streams(seed, stream_slot::row_factor,
                                     d.rows() * hyper.K);
            v_streams = make_streams(seed, stream_slot::col_factor,
                                     d.cols() * hyper.K);
            if (hyper.ard) ard_streams = make_streams(seed, stream_slot::ard_row, hyper.K);
        }
        if (hyper.ard && state.ard_lambda.size() == 0)
            state.ard_lambda =
                Eigen::VectorXd::Constant(hyper.K, hyper.alpha0 / hyper.beta0);
    }

    void recompute_resid() {
        const Eigen::MatrixXd pred = state.predict();
        for (const auto& [i, j] : data.omega())
            resid(i, j) = data.values()(i, j) - pred(i, j);
    }

    double resid_sq_sum() const {
        double s = 0.0;
        for (const auto& [i, j] : data.omega()) s += resid(i, j) * resid(i, j);
        return s;
    }

    // One entry of U (factor == true) or V. Reads the residual slice of its
    // own row/column and the other matrix; writes back the residual delta.
    void update_u_entry(Eigen::Index i, int k) {
        const auto& omega = data.row_omega(i);
        double prec_sum = 0.0, dot = 0.0;
        const double old = state.U(i, k);
        for (int j : omega) {
            const double v = state.V(j, k);
            prec_sum += v * v;
            dot += (resid(i, j) + old * v) * v;
        }
        const double prec = state.tau * prec_sum;
        const double rate = state.lambda_for(k, hyper);
        TruncatedNormalParams p{0.0, 0.0};
        if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
        SeededRng* rng = mode == Mode::gibbs ? &u_streams[i * hyper.K + k] : nullptr;
        const double fresh = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
        const double delta = old - fresh;
        if (delta != 0.0)
            for (int j : omega) resid(i, j) += delta * state.V(j, k);
        state.U(i, k) = fresh;
    }

    void update_v_entry(Eigen::Index j, int k) {
        const auto& omega = data.col_omega(j);
        double prec_sum = 0.0, dot = 0.0;
        const double old = state.V(j, k);
        for (int i : omega) {
            const double u = state.U(i, k);
            prec_sum += u * u;
            dot += (resid(i, j) + old * u) * u;
        }
        const double prec = state.tau * prec_sum;
        const double rate = state.lambda_for(k, hyper);
        TruncatedNormalParams p{0.0, 0.0};
        if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
        SeededRng* rng = mode == Mode::gibbs ? &v_streams[j * hyper.K + k] : nullptr;
        const double fresh = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
        const double delta = old - fresh;
        if (delta != 0.0)
            for (int i : omega) resid(i, j) += delta * state.U(i, k);
        state.V(j, k) = fresh;
    }

    void sweep_factor(bool is_u) {
        recompute_resid();
        const Eigen::Index n = is_u ? data.rows() : data.cols();
        if (opts.schedule == Schedule::sequential) {
            // Entries of a column never read each other, so the row loop of
            // each column is safe to split across threads.
            for (int k = 0; k < hyper.K; ++k)
                detail::parallel_for(n, opts.threads, [&](long r) {
                    if (is_u) update_u_entry(r, k);
                    else update_v_entry(r, k);
                });
        } else {
            // Whole-matrix snapshot: every entry sees the pre-sweep values.
            Eigen::MatrixXd& m = is_u ? state.U : state.V;
            const Eigen::MatrixXd snapshot = m;
            Eigen::MatrixXd fresh(m.rows(), m.cols());
            detail::parallel_for(n * hyper.K, opts.threads, [&](long flat) {
                const Eigen::Index r = flat / hyper.K;
                const int k = static_cast<int>(flat % hyper.K);
                const auto& omega = is_u ? data.row_omega(r) : data.col_omega(r);
                double prec_sum = 0.0, dot = 0.0;
                for (int c : omega) {
                    const double b = is_u ? state.V(c, k) : state.U(c, k);
                    const double rs = is_u ? resid(r, c) : resid(c, r);
                    prec_sum += b * b;
                    dot += (rs + snapshot(r, k) * b) * b;
                }
                const double prec = state.tau * prec_sum;
                const double rate = state.lambda_for(k, hyper);
                TruncatedNormalParams p{0.0, 0.0};
                if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
                auto& streams = is_u ? u_streams : v_streams;
                SeededRng* rng = mode == Mode::gibbs ? &streams[flat] : nullptr;
                fresh(r, k) = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
            });
            m = fresh;
        }
    }

    void iterate() {
        // Mode ascent revives boundary entries right after each matrix sweep
        // so the next sweep compensates for them within the same iteration.
        if (opts.update.row_factor) {
            sweep_factor(true);
            if (mode == Mode::icm)
                state.U = (state.U.array() == 0.0).select(0.1, state.U);
        }
        if (opts.update.col_factor) {
            sweep_factor(false);
            if (mode == Mode::icm)
                state.V = (state.V.array() == 0.0).select(0.1, state.V);
        }
        if (opts.update.tau) {
            recompute_resid();
            const GammaParams p{hyper.alpha_tau + 0.5 * data.n_observed(),
                                hyper.beta_tau + 0.5 * resid_sq_sum()};
            state.tau = resolve_gamma(mode, p, tau_stream);
        }
        if (hyper.ard && opts.update.ard) {
            for (int k = 0; k < hyper.K; ++k) {
                const GammaParams p = cond_ard_lambda(state, k, hyper);
                SeededRng* rng = mode == Mode::gibbs ? &ard_streams[k] : nullptr;
                state.ard_lambda(k) = resolve_gamma(mode, p, rng ? *rng : tau_stream);
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Three-matrix chain
// ---------------------------------------------------------------------------

struct NmtfChain {
    const MaskedMatrix& data;
    const HyperParams& hyper;
    const RunOptions& opts;
    Mode mode;
    NmtfState state;
    Eigen::MatrixXd resid;
    std::vector<SeededRng> f_streams, s_streams, g_streams, ard_f_streams,
        ard_g_streams;
    SeededRng tau_stream;

    NmtfChain(const MaskedMatrix& d, const HyperParams& h, const RunOptions& o,
              Mode m, NmtfState s, std::uint64_t seed)
        : data(d), hyper(h), opts(o), mode(m), state(std::move(s)),
          resid(Eigen::MatrixXd::Zero(d.rows(), d.cols())),
          tau_stream(seed, make_stream(stream_slot::tau, 0)) {
        if (mode == Mode::gibbs) {
            f_streams = make_streams(seed, stream_slot::row_factor, d.rows() * hyper.K);
            g_streams = make_streams(seed, stream_slot::col_factor, d.cols() * hyper.L);
            s_streams = make_streams(seed, stream_slot::mid_factor,
                                     static_cast<long>(hyper.K) * hyper.L);
            if (hyper.ard) {
                ard_f_streams = make_streams(seed, stream_slot::ard_row, hyper.K);
                ard_g_streams = make_streams(seed, stream_slot::ard_col, hyper.L);
            }
        }
        if (hyper.ard && state.ard_lambda_f.size() == 0)
            state.ard_lambda_f =
                Eigen::VectorXd::Constant(hyper.K, hyper.alpha0 / hyper.beta0);
        if (hyper.ard && state.ard_lambda_g.size() == 0)
            state.ard_lambda_g =
                Eigen::VectorXd::Constant(hyper.L, hyper.alpha0 / hyper.beta0);
    }

    void recompute_resid() {
        const Eigen::MatrixXd pred = state.predict();
        for (const auto& [i, j] : data.omega())
            resid(i, j) = data.values()(i, j) - pred(i, j);
    }

    double resid_sq_sum() const {
        double s = 0.0;
        for (const auto& [i, j] : data.omega()) s += resid(i, j) * resid(i, j);
        return s;
    }

    // F entry (i,k); `basis` holds per-column-j values of S_k . G_j.
    void update_f_entry(Eigen::Index i, int k, const Eigen::MatrixXd& basis) {
        const auto& omega = data.row_omega(i);
        double prec_sum = 0.0, dot = 0.0;
        const double old = state.F(i, k);
        for (int j : omega) {
            const double b = basis(j, k);
            prec_sum += b * b;
            dot += (resid(i, j) + old * b) * b;
        }
        const double prec = state.tau * prec_sum;
        const double rate = state.lambda_f_for(k, hyper);
        TruncatedNormalParams p{0.0, 0.0};
        if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
        SeededRng* rng = mode == Mode::gibbs ? &f_streams[i * hyper.K + k] : nullptr;
        const double fresh = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
        const double delta = old - fresh;
        if (delta != 0.0)
            for (int j : omega) resid(i, j) += delta * basis(j, k);
        state.F(i, k) = fresh;
    }

    void update_g_entry(Eigen::Index j, int l, const Eigen::MatrixXd& basis) {
        const auto& omega = data.col_omega(j);
        double prec_sum = 0.0, dot = 0.0;
        const double old = state.G(j, l);
        for (int i : omega) {
            const double b = basis(i, l);
            prec_sum += b * b;
            dot += (resid(i, j) + old * b) * b;
        }
        const double prec = state.tau * prec_sum;
        const double rate = state.lambda_g_for(l, hyper);
        TruncatedNormalParams p{0.0, 0.0};
        if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
        SeededRng* rng = mode == Mode::gibbs ? &g_streams[j * hyper.L + l] : nullptr;
        const double fresh = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
        const double delta = old - fresh;
        if (delta != 0.0)
            for (int i : omega) resid(i, j) += delta * basis(i, l);
        state.G(j, l) = fresh;
    }

    void update_s_entry(int k, int l) {
        double prec_sum = 0.0, dot = 0.0;
        const double old = state.S(k, l);
        for (const auto& [i, j] : data.omega()) {
            const double fg = state.F(i, k) * state.G(j, l);
            prec_sum += fg * fg;
            dot += (resid(i, j) + old * fg) * fg;
        }
        const double prec = state.tau * prec_sum;
        const double rate = hyper.lambda;  // S keeps the fixed rate under ARD
        TruncatedNormalParams p{0.0, 0.0};
        if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
        SeededRng* rng = mode == Mode::gibbs ? &s_streams[k * hyper.L + l] : nullptr;
        const double fresh = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
        const double delta = old - fresh;
        if (delta != 0.0)
            for (const auto& [i, j] : data.omega())
                resid(i, j) += delta * state.F(i, k) * state.G(j, l);
        state.S(k, l) = fresh;
    }

    void sweep_f() {
        recompute_resid();
        const Eigen::MatrixXd basis = state.G * state.S.transpose();  // J x K
        if (opts.schedule == Schedule::sequential) {
            for (int k = 0; k < hyper.K; ++k)
                detail::parallel_for(data.rows(), opts.threads,
                                     [&](long i) { update_f_entry(i, k, basis); });
        } else {
            const Eigen::MatrixXd snapshot = state.F;
            Eigen::MatrixXd fresh(state.F.rows(), state.F.cols());
            detail::parallel_for(data.rows() * hyper.K, opts.threads, [&](long flat) {
                const Eigen::Index i = flat / hyper.K;
                const int k = static_cast<int>(flat % hyper.K);
                const auto& omega = data.row_omega(i);
                double prec_sum = 0.0, dot = 0.0;
                for (int j : omega) {
                    const double b = basis(j, k);
                    prec_sum += b * b;
                    dot += (resid(i, j) + snapshot(i, k) * b) * b;
                }
                const double prec = state.tau * prec_sum;
                const double rate = state.lambda_f_for(k, hyper);
                TruncatedNormalParams p{0.0, 0.0};
                if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
                SeededRng* rng = mode == Mode::gibbs ? &f_streams[flat] : nullptr;
                fresh(i, k) = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
            });
            state.F = fresh;
        }
    }

    void sweep_s() {
        recompute_resid();
        if (opts.schedule == Schedule::sequential) {
            for (int k = 0; k < hyper.K; ++k)
                for (int l = 0; l < hyper.L; ++l) update_s_entry(k, l);
        } else {
            const Eigen::MatrixXd snapshot = state.S;
            Eigen::MatrixXd fresh(hyper.K, hyper.L);
            detail::parallel_for(static_cast<long>(hyper.K) * hyper.L, opts.threads,
                                 [&](long flat) {
                const int k = static_cast<int>(flat / hyper.L);
                const int l = static_cast<int>(flat % hyper.L);
                double prec_sum = 0.0, dot = 0.0;
                for (const auto& [i, j] : data.omega()) {
                    const double fg = state.F(i, k) * state.G(j, l);
                    prec_sum += fg * fg;
                    dot += (resid(i, j) + snapshot(k, l) * fg) * fg;
                }
                const double prec = state.tau * prec_sum;
                TruncatedNormalParams p{0.0, 0.0};
                if (prec > 0.0) p = {(-hyper.lambda + state.tau * dot) / prec, prec};
                SeededRng* rng = mode == Mode::gibbs ? &s_streams[flat] : nullptr;
                fresh(k, l) = resolve_entry(mode, p, hyper.lambda, rng ? *rng : tau_stream);
            });
            state.S = fresh;
        }
    }

    void sweep_g() {
        recompute_resid();
        const Eigen::MatrixXd basis = state.F * state.S;  // I x L
        if (opts.schedule == Schedule::sequential) {
            for (int l = 0; l < hyper.L; ++l)
                detail::parallel_for(data.cols(), opts.threads,
                                     [&](long j) { update_g_entry(j, l, basis); });
        } else {
            const Eigen::MatrixXd snapshot = state.G;
            Eigen::MatrixXd fresh(state.G.rows(), state.G.cols());
            detail::parallel_for(data.cols() * hyper.L, opts.threads, [&](long flat) {
                const Eigen::Index j = flat / hyper.L;
                const int l = static_cast<int>(flat % hyper.L);
                const auto& omega = data.col_omega(j);
                double prec_sum = 0.0, dot = 0.0;
                for (int i : omega) {
                    const double b = basis(i, l);
                    prec_sum += b * b;
                    dot += (resid(i, j) + snapshot(j, l) * b) * b;
                }
                const double prec = state.tau * prec_sum;
                const double rate = state.lambda_g_for(l, hyper);
                TruncatedNormalParams p{0.0, 0.0};
                if (prec > 0.0) p = {(-rate + state.tau * dot) / prec, prec};
                SeededRng* rng = mode == Mode::gibbs ? &g_streams[flat] : nullptr;
                fresh(j, l) = resolve_entry(mode, p, rate, rng ? *rng : tau_stream);
            });
            state.G = fresh;
        }
    }

    void iterate() {
        if (opts.update.row_factor) {
            sweep_f();
            if (mode == Mode::icm)
                state.F = (state.F.array() == 0.0).select(0.1, state.F);
        }
        if (opts.update.mid_factor) {
            sweep_s();
            if (mode == Mode::icm)
                state.S = (state.S.array() == 0.0).select(0.1, state.S);
        }
        if (opts.update.col_factor) {
            sweep_g();
            if (mode == Mode::icm)
                state.G = (state.G.array() == 0.0).select(0.1, state.G);
        }
        if (opts.update.tau) {
            recompute_resid();
            const GammaParams p{hyper.alpha_tau + 0.5 * data.n_observed(),
                                hyper.beta_tau + 0.5 * resid_sq_sum()};
            state.tau = resolve_gamma(mode, p, tau_stream);
        }
        if (hyper.ard && opts.update.ard) {
            for (int k = 0; k < hyper.K; ++k) {
                const GammaParams p = cond_ard_lambda(state, FactorId::F, k, hyper);
                SeededRng* rng = mode == Mode::gibbs ? &ard_f_streams[k] : nullptr;
                state.ard_lambda_f(k) = resolve_gamma(mode, p, rng ? *rng : tau_stream);
            }
            for (int l = 0; l < hyper.L; ++l) {
                const GammaParams p = cond_ard_lambda(state, FactorId::G, l, hyper);
                SeededRng* rng = mode == Mode::gibbs ? &ard_g_streams[l] : nullptr;
                state.ard_lambda_g(l) = resolve_gamma(mode, p, rng ? *rng : tau_stream);
            }
        }
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Public conditionals (direct evaluation, used by tests and diagnostics)
// ---------------------------------------------------------------------------

GammaParams cond_tau(const NmfState& state, const MaskedMatrix& data,
                     const HyperParams& hyper) {
    const Eigen::MatrixXd pred = state.predict();
    double sq = 0.0;
    for (const auto& [i, j] : data.omega()) {
        const double d = data.values()(i, j) - pred(i, j);
        sq += d * d;
    }
    return {hyper.alpha_tau + 0.5 * data.n_observed(), hyper.beta_tau + 0.5 * sq};
}

GammaParams cond_tau(const NmtfState& state, const MaskedMatrix& data,
                     const HyperParams& hyper) {
    const Eigen::MatrixXd pred = state.predict();
    double sq = 0.0;
    for (const auto& [i, j] : data.omega()) {
        const double d = data.values()(i, j) - pred(i, j);
        sq += d * d;
    }
    return {hyper.alpha_tau + 0.5 * data.n_observed(), hyper.beta_tau + 0.5 * sq};
}

TruncatedNormalParams cond_factor_entry(FactorId which, Eigen::Index row,
                                        Eigen::Index col, const NmfState& state,
                                        const MaskedMatrix& data,
                                        const HyperParams& hyper) {
    if (which != FactorId::U && which != FactorId::V)
        throw std::invalid_argument("cond_factor_entry: two-matrix state has factors U and V");
    const bool is_u = which == FactorId::U;
    const int k = static_cast<int>(col);
    const auto& omega = is_u ? data.row_omega(row) : data.col_omega(row);
    const double own = is_u ? state.U(row, k) : state.V(row, k);
    double prec_sum = 0.0, dot = 0.0;
    for (int c : omega) {
        const double b = is_u ? state.V(c, k) : state.U(c, k);
        const double r = is_u ? data.values()(row, c) : data.values()(c, row);
        const double full = is_u ? state.U.row(row).dot(state.V.row(c))
                                 : state.U.row(c).dot(state.V.row(row));
        prec_sum += b * b;
        dot += (r - (full - own * b)) * b;
    }
    const double prec = state.tau * prec_sum;
    if (!(prec > 0.0)) return {0.0, 0.0};
    const double rate = state.lambda_for(k, hyper);
    return {(-rate + state.tau * dot) / prec, prec};
}

TruncatedNormalParams cond_factor_entry(FactorId which, Eigen::Index row,
                                        Eigen::Index col, const NmtfState& state,
                                        const MaskedMatrix& data,
                                        const HyperParams& hyper) {
    const Eigen::MatrixXd pred = state.predict();
    double prec_sum = 0.0, dot = 0.0;
    double rate = hyper.lambda;
    double own = 0.0;
    switch (which) {
        case FactorId::F: {
            const int k = static_cast<int>(col);
            own = state.F(row, k);
            rate = state.lambda_f_for(k, hyper);
            for (int j : data.row_omega(row)) {
                const double b = state.S.row(k).dot(state.G.row(j));
                prec_sum += b * b;
                dot += (data.values()(row, j) - (pred(row, j) - own * b)) * b;
            }
            break;
        }
        case FactorId::S: {
            const int k = static_cast<int>(row);
            const int l = static_cast<int>(col);
            own = state.S(k, l);
            for (const auto& [i, j] : data.omega()) {
                const double b = state.F(i, k) * state.G(j, l);
                prec_sum += b * b;
                dot += (data.values()(i, j) - (pred(i, j) - own * b)) * b;
            }
            break;
        }
        case FactorId::G: {
            const int l = static_cast<int>(col);
            own = state.G(row, l);
            rate = state.lambda_g_for(l, hyper);
            for (int i : data.col_omega(row)) {
                const double b = state.F.row(i).dot(state.S.col(l));
                prec_sum += b * b;
                dot += (data.values()(i, row) - (pred(i, row) - own * b)) * b;
            }
            break;
        }
        default:
            throw std::invalid_argument(
                "cond_factor_entry: three-matrix state has factors F, S and G");
    }
    const double prec = state.tau * prec_sum;
    if (!(prec > 0.0)) return {0.0, 0.0};
    return {(-rate + state.tau * dot) / prec, prec};
}

GammaParams cond_ard_lambda(const NmfState& state, int k, const HyperParams& hyper) {
    if (!hyper.ard) throw std::invalid_argument("cond_ard_lambda: ARD is disabled");
    return {hyper.alpha0 + state.U.rows() + state.V.rows(),
            hyper.beta0 + state.U.col(k).sum() + state.V.col(k).sum()};
}

GammaParams cond_ard_lambda(const NmtfState& state, FactorId which, int index,
                            const HyperParams& hyper) {
    if (!hyper.ard) throw std::invalid_argument("cond_ard_lambda: ARD is disabled");
    if (which == FactorId::F)
        return {hyper.alpha0 + state.F.rows(), hyper.beta0 + state.F.col(index).sum()};
    if (which == FactorId::G)
        return {hyper.alpha0 + state.G.rows(), hyper.beta0 + state.G.col(index).sum()};
    throw std::invalid_argument("cond_ard_lambda: rates exist for F and G only");
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

namespace {

void accumulate(NmfState& acc, const NmfState& s);
void accumulate(NmtfState& acc, const NmtfState& s);

template <typename Chain, typename State>
TraceRecord run_chain(Chain& chain, const RetentionPlan& plan,
                      const RunOptions& opts, const MaskedMatrix& data,
                      std::vector<State>* draws, State* mean_accum, int* n_retained) {
    TraceRecord trace;
    const auto start = Clock::now();
    chain.recompute_resid();
    trace.train_mse.push_back(chain.resid_sq_sum() / data.n_observed());
    trace.seconds.push_back(seconds_since(start));
    for (int t = 1; t <= opts.stop.max_iterations; ++t) {
        chain.iterate();
        chain.recompute_resid();
        trace.train_mse.push_back(chain.resid_sq_sum() / data.n_observed());
        trace.seconds.push_back(seconds_since(start));
        if (plan.retains(t)) {
            if (draws) draws->push_back(chain.state);
            if (mean_accum) accumulate(*mean_accum, chain.state);
            ++*n_retained;
        }
        if (stop_rule_fires(opts.stop, trace.train_mse)) break;
    }
    return trace;
}

void accumulate(NmfState& acc, const NmfState& s) {
    acc.U += s.U;
    acc.V += s.V;
    acc.tau += s.tau;
    if (acc.ard_lambda.size() > 0) acc.ard_lambda += s.ard_lambda;
}

void accumulate(NmtfState& acc, const NmtfState& s) {
    acc.F += s.F;
    acc.S += s.S;
    acc.G += s.G;
    acc.tau += s.tau;
    if (acc.ard_lambda_f.size() > 0) acc.ard_lambda_f += s.ard_lambda_f;
    if (acc.ard_lambda_g.size() > 0) acc.ard_lambda_g += s.ard_lambda_g;
}

NmfState zero_like(const NmfState& s) {
    NmfState z;
    z.U = Eigen::MatrixXd::Zero(s.U.rows(), s.U.cols());
    z.V = Eigen::MatrixXd::Zero(s.V.rows(), s.V.cols());
    z.tau = 0.0;
    if (s.ard_lambda.size() > 0) z.ard_lambda = Eigen::VectorXd::Zero(s.ard_lambda.size());
    return z;
}

NmtfState zero_like(const NmtfState& s) {
    NmtfState z;
    z.F = Eigen::MatrixXd::Zero(s.F.rows(), s.F.cols());
    z.S = Eigen::MatrixXd::Zero(s.S.rows(), s.S.cols());
    z.G = Eigen::MatrixXd::Zero(s.G.rows(), s.G.cols());
    z.tau = 0.0;
    if (s.ard_lambda_f.size() > 0) z.ard_lambda_f = Eigen::VectorXd::Zero(s.ard_lambda_f.size());
    if (s.ard_lambda_g.size() > 0) z.ard_lambda_g = Eigen::VectorXd::Zero(s.ard_lambda_g.size());
    return z;
}

void divide(NmfState& s, double n) {
    s.U /= n;
    s.V /= n;
    s.tau /= n;
    if (s.ard_lambda.size() > 0) s.ard_lambda /= n;
}

void divide(NmtfState& s, double n) {
    s.F /= n;
    s.S /= n;
    s.G /= n;
    s.tau /= n;
    if (s.ard_lambda_f.size() > 0) s.ard_lambda_f /= n;
    if (s.ard_lambda_g.size() > 0) s.ard_lambda_g /= n;
}

void check_nmf_shape(const NmfState& s, const MaskedMatrix& data, const HyperParams& h) {
    if (s.U.rows() != data.rows() || s.V.rows() != data.cols() ||
        s.U.cols() != h.K || s.V.cols() != h.K)
        throw std::invalid_argument("initial state shape mismatch");
}

void check_nmtf_shape(const NmtfState& s, const MaskedMatrix& data, const HyperParams& h) {
    if (s.F.rows() != data.rows() || s.G.rows() != data.cols() ||
        s.F.cols() != h.K || s.S.rows() != h.K || s.S.cols() != h.L ||
        s.G.cols() != h.L)
        throw std::invalid_argument("initial state shape mismatch");
}

}  // namespace

GibbsNmfResult gibbs_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                             const RunOptions& opts, std::uint64_t seed,
                             const NmfState* initial) {
    hyper.validate(Model::nmf);
    const RetentionPlan plan = resolve_retention(opts);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NmfState start = initial ? *initial
                             : init_nmf(hyper, data.rows(), data.cols(), opts.init,
                                        &data, init_rng);
    check_nmf_shape(start, data, hyper);
    NmfChain chain(data, hyper, opts, Mode::gibbs, std::move(start), seed);

    GibbsNmfResult result;
    int n_retained = 0;
    result.trace = run_chain(chain, plan, opts, data, &result.posterior.draws,
                             static_cast<NmfState*>(nullptr), &n_retained);
    if (result.posterior.draws.empty())
        throw std::runtime_error("gibbs_run: no draws retained (check burn_in/thin)");
    NmfState mean = zero_like(result.posterior.draws.front());
    for (const auto& d : result.posterior.draws) accumulate(mean, d);
    divide(mean, static_cast<double>(result.posterior.draws.size()));
    result.posterior.summary_mean = std::move(mean);
    result.posterior.burn_in = plan.burn_in;
    result.posterior.thin = plan.thin;
    return result;
}

GibbsNmtfResult gibbs_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                               const RunOptions& opts, std::uint64_t seed,
                               const NmtfState* initial) {
    hyper.validate(Model::nmtf);
    const RetentionPlan plan = resolve_retention(opts);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NmtfState start = initial ? *initial
                              : init_nmtf(hyper, data.rows(), data.cols(), opts.init,
                                          &data, init_rng);
    check_nmtf_shape(start, data, hyper);
    NmtfChain chain(data, hyper, opts, Mode::gibbs, std::move(start), seed);

    GibbsNmtfResult result;
    int n_retained = 0;
    result.trace = run_chain(chain, plan, opts, data, &result.posterior.draws,
                             static_cast<NmtfState*>(nullptr), &n_retained);
    if (result.posterior.draws.empty())
        throw std::runtime_error("gibbs_run: no draws retained (check burn_in/thin)");
    NmtfState mean = zero_like(result.posterior.draws.front());
    for (const auto& d : result.posterior.draws) accumulate(mean, d);
    divide(mean, static_cast<double>(result.posterior.draws.size()));
    result.posterior.summary_mean = std::move(mean);
    result.posterior.burn_in = plan.burn_in;
    result.posterior.thin = plan.thin;
    return result;
}

IcmNmfResult icm_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed,
                         const NmfState* initial) {
    hyper.validate(Model::nmf);
    const RetentionPlan plan = resolve_retention(opts);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NmfState start = initial ? *initial
                             : init_nmf(hyper, data.rows(), data.cols(), opts.init,
                                        &data, init_rng);
    check_nmf_shape(start, data, hyper);
    NmfChain chain(data, hyper, opts, Mode::icm, std::move(start), seed);

    IcmNmfResult result;
    NmfState accum = zero_like(chain.state);
    int n_retained = 0;
    result.trace = run_chain(chain, plan, opts, data,
                             static_cast<std::vector<NmfState>*>(nullptr), &accum,
                             &n_retained);
    if (n_retained == 0)
        throw std::runtime_error("icm_run: no states retained (check burn_in/thin)");
    divide(accum, static_cast<double>(n_retained));
    result.state = std::move(accum);
    return result;
}

IcmNmtfResult icm_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                           const RunOptions& opts, std::uint64_t seed,
                           const NmtfState* initial) {
    hyper.validate(Model::nmtf);
    const RetentionPlan plan = resolve_retention(opts);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    NmtfState start = initial ? *initial
                              : init_nmtf(hyper, data.rows(), data.cols(), opts.init,
                                          &data, init_rng);
    check_nmtf_shape(start, data, hyper);
    NmtfChain chain(data, hyper, opts, Mode::icm, std::move(start), seed);

    IcmNmtfResult result;
    NmtfState accum = zero_like(chain.state);
    int n_retained = 0;
    result.trace = run_chain(chain, plan, opts, data,
                             static_cast<std::vector<NmtfState>*>(nullptr), &accum,
                             &n_retained);
    if (n_retained == 0)
        throw std::runtime_error("icm_run: no states retained (check burn_in/thin)");
    divide(accum, static_cast<double>(n_retained));
    result.state = std::move(accum);
    return result;
}

}  // namespace bnmtf
