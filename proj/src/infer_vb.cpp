#include "bnmtf/infer_vb.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bnmtf/infer_np.hpp"  // stop_rule_fires
#include "detail/parallel.hpp"

namespace bnmtf {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Entropy of TN(mu, prec): 0.5 log(2 pi / prec) + log Z + (1 + a lambda(a))/2
// with a the standardised truncation point and Z the parent's mass above 0.
double tn_entropy(double mu, double prec) {
    const double a = -mu * std::sqrt(prec);
    return 0.5 * (kLog2Pi - std::log(prec)) + log_normal_sf(a) +
           0.5 * (1.0 + a * normal_hazard(a));
}

double gamma_entropy(const VbGamma& q) {
    return q.shape - std::log(q.rate) + std::lgamma(q.shape) +
           (1.0 - q.shape) * digamma(q.shape);
}

double gamma_elog(const VbGamma& q) { return digamma(q.shape) - std::log(q.rate); }

// Expected log-prior of a Gamma(shape0, rate0) variable under q.
double gamma_prior_term(double shape0, double rate0, const VbGamma& q) {
    return shape0 * std::log(rate0) - std::lgamma(shape0) +
           (shape0 - 1.0) * gamma_elog(q) - rate0 * q.mean();
}

}  // namespace

TruncatedNormalParams exponential_limit_params(double rate) {
    const double prec = 1e-6 * rate * rate;
    return {-1e6 / rate, prec};
}

double expected_residual_sq_nmf(const VbNmfState& state, const MaskedMatrix& data,
                                Eigen::Index i, Eigen::Index j) {
    const int K = static_cast<int>(state.U.mean.cols());
    double point = 0.0, excess = 0.0;
    for (int k = 0; k < K; ++k) {
        const double mu = state.U.mean(i, k);
        const double mv = state.V.mean(j, k);
        point += mu * mv;
        excess += state.U.second(i, k) * state.V.second(j, k) - mu * mu * mv * mv;
    }
    const double mr = data.values()(i, j) - point;
    return mr * mr + excess;
}

double expected_residual_sq_nmtf(const VbNmtfState& state, const MaskedMatrix& data,
                                 Eigen::Index i, Eigen::Index j) {
    const int K = static_cast<int>(state.F.mean.cols());
    const int L = static_cast<int>(state.G.mean.cols());
    double point = 0.0, var_term = 0.0;
    double cov_f = 0.0;  // rows sharing F_ik across l != l'
    double cov_g = 0.0;  // rows sharing G_jl across k != k'
    for (int k = 0; k < K; ++k) {
        double row_sum = 0.0, row_sq = 0.0;
        for (int l = 0; l < L; ++l) {
            const double sg = state.S.mean(k, l) * state.G.mean(j, l);
            const double triple = state.F.mean(i, k) * sg;
            point += triple;
            var_term += state.F.second(i, k) * state.S.second(k, l) *
                            state.G.second(j, l) -
                        triple * triple;
            row_sum += sg;
            row_sq += sg * sg;
        }
        cov_f += state.F.var(i, k) * (row_sum * row_sum - row_sq);
    }
    for (int l = 0; l < L; ++l) {
        double col_sum = 0.0, col_sq = 0.0;
        for (int k = 0; k < K; ++k) {
            const double fs = state.F.mean(i, k) * state.S.mean(k, l);
            col_sum += fs;
            col_sq += fs * fs;
        }
        cov_g += state.G.var(j, l) * (col_sum * col_sum - col_sq);
    }
    const double mr = data.values()(i, j) - point;
    return mr * mr + var_term + cov_f + cov_g;
}

namespace {

double sum_expected_residual_sq(const VbNmfState& state, const MaskedMatrix& data) {
    double sum = 0.0;
    for (const auto& [i, j] : data.omega())
        sum += expected_residual_sq_nmf(state, data, i, j);
    return sum;
}

double sum_expected_residual_sq(const VbNmtfState& state, const MaskedMatrix& data) {
    double sum = 0.0;
    for (const auto& [i, j] : data.omega())
        sum += expected_residual_sq_nmtf(state, data, i, j);
    return sum;
}

}  // namespace

GammaParams vb_update_tau(VbNmfState& state, const MaskedMatrix& data,
                          const HyperParams& hyper) {
    const GammaParams p{hyper.alpha_tau + 0.5 * data.n_observed(),
                        hyper.beta_tau + 0.5 * sum_expected_residual_sq(state, data)};
    state.tau_q = {p.shape, p.rate};
    return p;
}

GammaParams vb_update_tau(VbNmtfState& state, const MaskedMatrix& data,
                          const HyperParams& hyper) {
    const GammaParams p{hyper.alpha_tau + 0.5 * data.n_observed(),
                        hyper.beta_tau + 0.5 * sum_expected_residual_sq(state, data)};
    state.tau_q = {p.shape, p.rate};
    return p;
}

TruncatedNormalParams vb_update_factor_entry(FactorId which, Eigen::Index row,
                                             Eigen::Index col, VbNmfState& state,
                                             const MaskedMatrix& data,
                                             const HyperParams& hyper) {
    if (which != FactorId::U && which != FactorId::V)
        throw std::invalid_argument("vb_update_factor_entry: factors are U and V");
    const bool is_u = which == FactorId::U;
    VbFactor& own = is_u ? state.U : state.V;
    const VbFactor& other = is_u ? state.V : state.U;
    const int k = static_cast<int>(col);
    const auto& omega = is_u ? data.row_omega(row) : data.col_omega(row);
    const double tau = state.tau_mean();
    const double rate = state.lambda_mean_for(k, hyper);

    double prec_sum = 0.0, dot = 0.0;
    for (int c : omega) {
        const double b = other.mean(c, k);
        const double r = is_u ? data.values()(row, c) : data.values()(c, row);
        const double full = is_u ? state.U.mean.row(row).dot(state.V.mean.row(c))
                                 : state.U.mean.row(c).dot(state.V.mean.row(row));
        prec_sum += other.second(c, k);
        dot += (r - (full - own.mean(row, k) * b)) * b;
    }
    const double prec = tau * prec_sum;
    TruncatedNormalParams p;
    if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
    else p = exponential_limit_params(rate);
    own.set_entry(row, k, p);
    return p;
}

TruncatedNormalParams vb_update_factor_entry(FactorId which, Eigen::Index row,
                                             Eigen::Index col, VbNmtfState& state,
                                             const MaskedMatrix& data,
                                             const HyperParams& hyper) {
    const int K = static_cast<int>(state.F.mean.cols());
    const int L = static_cast<int>(state.G.mean.cols());
    const double tau = state.tau_mean();
    const Eigen::MatrixXd pred = state.predict();
    double prec_sum = 0.0, dot = 0.0, rate = hyper.lambda;

    switch (which) {
        case FactorId::F: {
            const int k = static_cast<int>(col);
            rate = state.lambda_f_mean_for(k, hyper);
            const double own = state.F.mean(row, k);
            for (int j : data.row_omega(row)) {
                double sg = 0.0, q = 0.0, corr = 0.0;
                for (int l = 0; l < L; ++l) {
                    const double sm = state.S.mean(k, l);
                    const double gm = state.G.mean(j, l);
                    sg += sm * gm;
                    q += state.S.second(k, l) * state.G.second(j, l) -
                         sm * sm * gm * gm;
                    double wf = 0.0;  // sum_{k' != k} F~ S~ for this l
                    for (int kk = 0; kk < K; ++kk)
                        if (kk != k) wf += state.F.mean(row, kk) * state.S.mean(kk, l);
                    corr += sm * state.G.var(j, l) * wf;
                }
                prec_sum += sg * sg + q;
                dot += (data.values()(row, j) - (pred(row, j) - own * sg)) * sg - corr;
            }
            const double prec = tau * prec_sum;
            TruncatedNormalParams p;
            if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
            else p = exponential_limit_params(rate);
            state.F.set_entry(row, k, p);
            return p;
        }
        case FactorId::S: {
            const int k = static_cast<int>(row);
            const int l = static_cast<int>(col);
            const double own = state.S.mean(k, l);
            for (const auto& [i, j] : data.omega()) {
                const double fm = state.F.mean(i, k);
                const double gm = state.G.mean(j, l);
                prec_sum += state.F.second(i, k) * state.G.second(j, l);
                double wf = 0.0, wg = 0.0;
                for (int kk = 0; kk < K; ++kk)
                    if (kk != k) wf += state.F.mean(i, kk) * state.S.mean(kk, l);
                for (int ll = 0; ll < L; ++ll)
                    if (ll != l) wg += state.S.mean(k, ll) * state.G.mean(j, ll);
                dot += (data.values()(i, j) - (pred(i, j) - own * fm * gm)) * fm * gm -
                       fm * state.G.var(j, l) * wf - state.F.var(i, k) * gm * wg;
            }
            const double prec = tau * prec_sum;
            TruncatedNormalParams p;
            if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
            else p = exponential_limit_params(rate);
            state.S.set_entry(k, l, p);
            return p;
        }
        case FactorId::G: {
            const int l = static_cast<int>(col);
            rate = state.lambda_g_mean_for(l, hyper);
            const double own = state.G.mean(row, l);
            for (int i : data.col_omega(row)) {
                double fs = 0.0, q = 0.0, corr = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double fm = state.F.mean(i, k);
                    const double sm = state.S.mean(k, l);
                    fs += fm * sm;
                    q += state.F.second(i, k) * state.S.second(k, l) -
                         fm * fm * sm * sm;
                    double wg = 0.0;  // sum_{l' != l} S~ G~ for this k
                    for (int ll = 0; ll < L; ++ll)
                        if (ll != l) wg += state.S.mean(k, ll) * state.G.mean(row, ll);
                    corr += state.F.var(i, k) * sm * wg;
                }
                prec_sum += fs * fs + q;
                dot += (data.values()(i, row) - (pred(i, row) - own * fs)) * fs - corr;
            }
            const double prec = tau * prec_sum;
            TruncatedNormalParams p;
            if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
            else p = exponential_limit_params(rate);
            state.G.set_entry(row, l, p);
            return p;
        }
        default:
            throw std::invalid_argument(
                "vb_update_factor_entry: three-matrix factors are F, S and G");
    }
}

GammaParams vb_update_ard(VbNmfState& state, int k, const HyperParams& hyper) {
    if (!hyper.ard || state.ard_q.empty())
        throw std::invalid_argument("vb_update_ard: ARD is disabled");
    const GammaParams p{
        hyper.alpha0 + state.U.mean.rows() + state.V.mean.rows(),
        hyper.beta0 + state.U.mean.col(k).sum() + state.V.mean.col(k).sum()};
    state.ard_q[k] = {p.shape, p.rate};
    return p;
}

GammaParams vb_update_ard(VbNmtfState& state, FactorId which, int index,
                          const HyperParams& hyper) {
    if (!hyper.ard) throw std::invalid_argument("vb_update_ard: ARD is disabled");
    if (which == FactorId::F) {
        if (state.ard_f_q.empty())
            throw std::invalid_argument("vb_update_ard: ARD is disabled");
        const GammaParams p{hyper.alpha0 + state.F.mean.rows(),
                            hyper.beta0 + state.F.mean.col(index).sum()};
        state.ard_f_q[index] = {p.shape, p.rate};
        return p;
    }
    if (which == FactorId::G) {
        if (state.ard_g_q.empty())
            throw std::invalid_argument("vb_update_ard: ARD is disabled");
        const GammaParams p{hyper.alpha0 + state.G.mean.rows(),
                            hyper.beta0 + state.G.mean.col(index).sum()};
        state.ard_g_q[index] = {p.shape, p.rate};
        return p;
    }
    throw std::invalid_argument("vb_update_ard: rates exist for F and G only");
}

namespace {

// Expected log-prior plus entropy of every entry of one TN factor matrix.
// `rate_of(k)` supplies E[lambda] and `elog_of(k)` supplies E[log lambda]
// for the column's prior rate.
template <typename RateFn, typename ElogFn>
double factor_prior_entropy(const VbFactor& f, RateFn rate_of, ElogFn elog_of) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < f.mean.cols(); ++k) {
        const double rate = rate_of(static_cast<int>(k));
        const double elog = elog_of(static_cast<int>(k));
        for (Eigen::Index i = 0; i < f.mean.rows(); ++i) {
            total += elog - rate * f.mean(i, k);
            total += tn_entropy(f.mu(i, k), f.prec(i, k));
        }
    }
    return total;
}

}  // namespace

double elbo(const VbNmfState& state, const MaskedMatrix& data,
            const HyperParams& hyper) {
    const double etau = state.tau_mean();
    const double elogtau = gamma_elog(state.tau_q);
    double L = 0.5 * data.n_observed() * (elogtau - kLog2Pi) -
               0.5 * etau * sum_expected_residual_sq(state, data);

    const auto rate_of = [&](int k) { return state.lambda_mean_for(k, hyper); };
    const auto elog_of = [&](int k) {
        return hyper.ard ? gamma_elog(state.ard_q[k]) : std::log(hyper.lambda);
    };
    L += factor_prior_entropy(state.U, rate_of, elog_of);
    L += factor_prior_entropy(state.V, rate_of, elog_of);

    L += gamma_prior_term(hyper.alpha_tau, hyper.beta_tau, state.tau_q);
    L += gamma_entropy(state.tau_q);
    if (hyper.ard) {
        for (const auto& q : state.ard_q) {
            L += gamma_prior_term(hyper.alpha0, hyper.beta0, q);
            L += gamma_entropy(q);
        }
    }
    return L;
}

double elbo(const VbNmtfState& state, const MaskedMatrix& data,
            const HyperParams& hyper) {
    const double etau = state.tau_mean();
    const double elogtau = gamma_elog(state.tau_q);
    double L = 0.5 * data.n_observed() * (elogtau - kLog2Pi) -
               0.5 * etau * sum_expected_residual_sq(state, data);

    const auto f_rate = [&](int k) { return state.lambda_f_mean_for(k, hyper); };
    const auto f_elog = [&](int k) {
        return hyper.ard ? gamma_elog(state.ard_f_q[k]) : std::log(hyper.lambda);
    };
    const auto g_rate = [&](int l) { return state.lambda_g_mean_for(l, hyper); };
    const auto g_elog = [&](int l) {
        return hyper.ard ? gamma_elog(state.ard_g_q[l]) : std::log(hyper.lambda);
    };
    const auto s_rate = [&](int) { return hyper.lambda; };
    const auto s_elog = [&](int) { return std::log(hyper.lambda); };
    L += factor_prior_entropy(state.F, f_rate, f_elog);
    L += factor_prior_entropy(state.S, s_rate, s_elog);
    L += factor_prior_entropy(state.G, g_rate, g_elog);

    L += gamma_prior_term(hyper.alpha_tau, hyper.beta_tau, state.tau_q);
    L += gamma_entropy(state.tau_q);
    if (hyper.ard) {
        for (const auto& q : state.ard_f_q) {
            L += gamma_prior_term(hyper.alpha0, hyper.beta0, q);
            L += gamma_entropy(q);
        }
        for (const auto& q : state.ard_g_q) {
            L += gamma_prior_term(hyper.alpha0, hyper.beta0, q);
            L += gamma_entropy(q);
        }
    }
    return L;
}

// ---------------------------------------------------------------------------
// Coordinate-ascent runners with incrementally maintained caches
// ---------------------------------------------------------------------------

namespace {

struct VbNmfSweeper {
    const MaskedMatrix& data;
    const HyperParams& hyper;
    const RunOptions& opts;
    VbNmfState state;
    Eigen::MatrixXd mresid;  // R minus the mean prediction, on observed cells

    VbNmfSweeper(const MaskedMatrix& d, const HyperParams& h, const RunOptions& o,
                 VbNmfState s)
        : data(d), hyper(h), opts(o), state(std::move(s)),
          mresid(Eigen::MatrixXd::Zero(d.rows(), d.cols())) {}

    void recompute_mresid() {
        const Eigen::MatrixXd pred = state.predict();
        for (const auto& [i, j] : data.omega())
            mresid(i, j) = data.values()(i, j) - pred(i, j);
    }

    double train_mse() {
        recompute_mresid();
        double s = 0.0;
        for (const auto& [i, j] : data.omega()) s += mresid(i, j) * mresid(i, j);
        return s / data.n_observed();
    }

    void update_entry(bool is_u, Eigen::Index r, int k) {
        VbFactor& own = is_u ? state.U : state.V;
        const VbFactor& other = is_u ? state.V : state.U;
        const auto& omega = is_u ? data.row_omega(r) : data.col_omega(r);
        const double tau = state.tau_mean();
        const double rate = state.lambda_mean_for(k, hyper);
        const double old = own.mean(r, k);
        double prec_sum = 0.0, dot = 0.0;
        for (int c : omega) {
            const double b = other.mean(c, k);
            const double mr = is_u ? mresid(r, c) : mresid(c, r);
            prec_sum += other.second(c, k);
            dot += (mr + old * b) * b;
        }
        const double prec = tau * prec_sum;
        TruncatedNormalParams p;
        if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
        else p = exponential_limit_params(rate);
        own.set_entry(r, k, p);
        const double delta = old - own.mean(r, k);
        if (delta != 0.0) {
            for (int c : omega) {
                if (is_u) mresid(r, c) += delta * other.mean(c, k);
                else mresid(c, r) += delta * other.mean(c, k);
            }
        }
    }

    void sweep_factor(bool is_u) {
        recompute_mresid();
        const Eigen::Index n = is_u ? data.rows() : data.cols();
        if (opts.schedule == Schedule::sequential) {
            for (int k = 0; k < hyper.K; ++k)
                detail::parallel_for(n, opts.threads,
                                     [&](long r) { update_entry(is_u, r, k); });
        } else {
            VbFactor& own = is_u ? state.U : state.V;
            const VbFactor& other = is_u ? state.V : state.U;
            const Eigen::MatrixXd old_mean = own.mean;
            const double tau = state.tau_mean();
            std::vector<TruncatedNormalParams> params(n * hyper.K);
            detail::parallel_for(n * hyper.K, opts.threads, [&](long flat) {
                const Eigen::Index r = flat / hyper.K;
                const int k = static_cast<int>(flat % hyper.K);
                const auto& omega = is_u ? data.row_omega(r) : data.col_omega(r);
                const double rate = state.lambda_mean_for(k, hyper);
                double prec_sum = 0.0, dot = 0.0;
                for (int c : omega) {
                    const double b = other.mean(c, k);
                    const double mr = is_u ? mresid(r, c) : mresid(c, r);
                    prec_sum += other.second(c, k);
                    dot += (mr + old_mean(r, k) * b) * b;
                }
                const double prec = tau * prec_sum;
                if (prec > 0.0) params[flat] = {(-rate + tau * dot) / prec, prec};
                else params[flat] = exponential_limit_params(rate);
            });
            for (long flat = 0; flat < n * hyper.K; ++flat)
                own.set_entry(flat / hyper.K, flat % hyper.K, params[flat]);
        }
    }

    void iterate() {
        if (opts.update.row_factor) sweep_factor(true);
        if (opts.update.col_factor) sweep_factor(false);
        if (opts.update.tau) vb_update_tau(state, data, hyper);
        if (hyper.ard && opts.update.ard)
            for (int k = 0; k < hyper.K; ++k) vb_update_ard(state, k, hyper);
    }
};

struct VbNmtfSweeper {
    const MaskedMatrix& data;
    const HyperParams& hyper;
    const RunOptions& opts;
    VbNmtfState state;
    Eigen::MatrixXd mresid;
    Eigen::MatrixXd sg;  // J x K: sum_l S~(k,l) G~(j,l)
    Eigen::MatrixXd fs;  // I x L: sum_k F~(i,k) S~(k,l)

    VbNmtfSweeper(const MaskedMatrix& d, const HyperParams& h, const RunOptions& o,
                  VbNmtfState s)
        : data(d), hyper(h), opts(o), state(std::move(s)),
          mresid(Eigen::MatrixXd::Zero(d.rows(), d.cols())) {}

    void recompute_mresid() {
        const Eigen::MatrixXd pred = state.predict();
        for (const auto& [i, j] : data.omega())
            mresid(i, j) = data.values()(i, j) - pred(i, j);
    }

    void recompute_products() {
        sg = state.G.mean * state.S.mean.transpose();
        fs = state.F.mean * state.S.mean;
    }

    double train_mse() {
        recompute_mresid();
        double s = 0.0;
        for (const auto& [i, j] : data.omega()) s += mresid(i, j) * mresid(i, j);
        return s / data.n_observed();
    }

    // q(j,k) = sum_l (E[S^2] E[G^2] - S~^2 G~^2), fixed during the F sweep.
    Eigen::MatrixXd f_variance_excess() const {
        const Eigen::MatrixXd sm2 = state.S.mean.array().square();
        const Eigen::MatrixXd gm2 = state.G.mean.array().square();
        return state.G.second * state.S.second.transpose() -
               gm2 * sm2.transpose();  // J x K
    }

    Eigen::MatrixXd g_variance_excess() const {
        const Eigen::MatrixXd fm2 = state.F.mean.array().square();
        const Eigen::MatrixXd sm2 = state.S.mean.array().square();
        return state.F.second * state.S.second - fm2 * sm2;  // I x L
    }

    void update_f_entry(Eigen::Index i, int k, const Eigen::MatrixXd& q) {
        const int L = hyper.L;
        const double tau = state.tau_mean();
        const double rate = state.lambda_f_mean_for(k, hyper);
        const double old = state.F.mean(i, k);
        double prec_sum = 0.0, dot = 0.0;
        for (int j : data.row_omega(i)) {
            const double b = sg(j, k);
            double corr = 0.0;
            for (int l = 0; l < L; ++l)
                corr += state.S.mean(k, l) * state.G.var(j, l) *
                        (fs(i, l) - old * state.S.mean(k, l));
            prec_sum += b * b + q(j, k);
            dot += (mresid(i, j) + old * b) * b - corr;
        }
        const double prec = tau * prec_sum;
        TruncatedNormalParams p;
        if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
        else p = exponential_limit_params(rate);
        state.F.set_entry(i, k, p);
        const double delta = old - state.F.mean(i, k);
        if (delta != 0.0) {
            for (int j : data.row_omega(i)) mresid(i, j) += delta * sg(j, k);
            for (int l = 0; l < L; ++l) fs(i, l) -= delta * state.S.mean(k, l);
        }
    }

    void update_g_entry(Eigen::Index j, int l, const Eigen::MatrixXd& q) {
        const int K = hyper.K;
        const double tau = state.tau_mean();
        const double rate = state.lambda_g_mean_for(l, hyper);
        const double old = state.G.mean(j, l);
        double prec_sum = 0.0, dot = 0.0;
        for (int i : data.col_omega(j)) {
            const double b = fs(i, l);
            double corr = 0.0;
            for (int k = 0; k < K; ++k)
                corr += state.F.var(i, k) * state.S.mean(k, l) *
                        (sg(j, k) - state.S.mean(k, l) * old);
            prec_sum += b * b + q(i, l);
            dot += (mresid(i, j) + old * b) * b - corr;
        }
        const double prec = tau * prec_sum;
        TruncatedNormalParams p;
        if (prec > 0.0) p = {(-rate + tau * dot) / prec, prec};
        else p = exponential_limit_params(rate);
        state.G.set_entry(j, l, p);
        const double delta = old - state.G.mean(j, l);
        if (delta != 0.0) {
            for (int i : data.col_omega(j)) mresid(i, j) += delta * fs(i, l);
            for (int k = 0; k < K; ++k) sg(j, k) -= delta * state.S.mean(k, l);
        }
    }

    void update_s_entry(int k, int l) {
        const double tau = state.tau_mean();
        const double old = state.S.mean(k, l);
        double prec_sum = 0.0, dot = 0.0;
        for (const auto& [i, j] : data.omega()) {
            const double fm = state.F.mean(i, k);
            const double gm = state.G.mean(j, l);
            prec_sum += state.F.second(i, k) * state.G.second(j, l);
            const double wf = fs(i, l) - fm * old;       // sum_{k' != k} F~ S~
            const double wg = sg(j, k) - old * gm;       // sum_{l' != l} S~ G~
            dot += (mresid(i, j) + old * fm * gm) * fm * gm -
                   fm * state.G.var(j, l) * wf - state.F.var(i, k) * gm * wg;
        }
        const double prec = tau * prec_sum;
        TruncatedNormalParams p;
        if (prec > 0.0) p = {(-hyper.lambda + tau * dot) / prec, prec};
        else p = exponential_limit_params(hyper.lambda);
        state.S.set_entry(k, l, p);
        const double delta = old - state.S.mean(k, l);
        if (delta != 0.0) {
            for (const auto& [i, j] : data.omega())
                mresid(i, j) += delta * state.F.mean(i, k) * state.G.mean(j, l);
            for (Eigen::Index i = 0; i < fs.rows(); ++i)
                fs(i, l) -= delta * state.F.mean(i, k);
            for (Eigen::Index j = 0; j < sg.rows(); ++j)
                sg(j, k) -= delta * state.G.mean(j, l);
        }
    }

    void sweep_f() {
        recompute_mresid();
        recompute_products();
        const Eigen::MatrixXd q = f_variance_excess();
        if (opts.schedule == Schedule::sequential) {
            for (int k = 0; k < hyper.K; ++k)
                detail::parallel_for(data.rows(), opts.threads,
                                     [&](long i) { update_f_entry(i, k, q); });
        } else {
            const Eigen::MatrixXd old_mean = state.F.mean;
            const Eigen::MatrixXd old_fs = fs;
            const double tau = state.tau_mean();
            const long n = data.rows() * hyper.K;
            std::vector<TruncatedNormalParams> params(n);
            detail::parallel_for(n, opts.threads, [&](long flat) {
                const Eigen::Index i = flat / hyper.K;
                const int k = static_cast<int>(flat % hyper.K);
                const double rate = state.lambda_f_mean_for(k, hyper);
                double prec_sum = 0.0, dot = 0.0;
                for (int j : data.row_omega(i)) {
                    const double b = sg(j, k);
                    double corr = 0.0;
                    for (int l = 0; l < hyper.L; ++l)
                        corr += state.S.mean(k, l) * state.G.var(j, l) *
                                (old_fs(i, l) - old_mean(i, k) * state.S.mean(k, l));
                    prec_sum += b * b + q(j, k);
                    dot += (mresid(i, j) + old_mean(i, k) * b) * b - corr;
                }
                const double prec = tau * prec_sum;
                if (prec > 0.0) params[flat] = {(-rate + tau * dot) / prec, prec};
                else params[flat] = exponential_limit_params(rate);
            });
            for (long flat = 0; flat < n; ++flat)
                state.F.set_entry(flat / hyper.K, flat % hyper.K, params[flat]);
        }
    }

    void sweep_g() {
        recompute_mresid();
        recompute_products();
        const Eigen::MatrixXd q = g_variance_excess();
        if (opts.schedule == Schedule::sequential) {
            for (int l = 0; l < hyper.L; ++l)
                detail::parallel_for(data.cols(), opts.threads,
                                     [&](long j) { update_g_entry(j, l, q); });
        } else {
            const Eigen::MatrixXd old_mean = state.G.mean;
            const Eigen::MatrixXd old_sg = sg;
            const double tau = state.tau_mean();
            const long n = data.cols() * hyper.L;
            std::vector<TruncatedNormalParams> params(n);
            detail::parallel_for(n, opts.threads, [&](long flat) {
                const Eigen::Index j = flat / hyper.L;
                const int l = static_cast<int>(flat % hyper.L);
                const double rate = state.lambda_g_mean_for(l, hyper);
                double prec_sum = 0.0, dot = 0.0;
                for (int i : data.col_omega(j)) {
                    const double b = fs(i, l);
                    double corr = 0.0;
                    for (int k = 0; k < hyper.K; ++k)
                        corr += state.F.var(i, k) * state.S.mean(k, l) *
                                (old_sg(j, k) - state.S.mean(k, l) * old_mean(j, l));
                    prec_sum += b * b + q(i, l);
                    dot += (mresid(i, j) + old_mean(j, l) * b) * b - corr;
                }
                const double prec = tau * prec_sum;
                if (prec > 0.0) params[flat] = {(-rate + tau * dot) / prec, prec};
                else params[flat] = exponential_limit_params(rate);
            });
            for (long flat = 0; flat < n; ++flat)
                state.G.set_entry(flat / hyper.L, flat % hyper.L, params[flat]);
        }
    }

    void sweep_s() {
        recompute_mresid();
        recompute_products();
        if (opts.schedule == Schedule::sequential) {
            for (int k = 0; k < hyper.K; ++k)
                for (int l = 0; l < hyper.L; ++l) update_s_entry(k, l);
        } else {
            const Eigen::MatrixXd old_mean = state.S.mean;
            const double tau = state.tau_mean();
            const long n = static_cast<long>(hyper.K) * hyper.L;
            std::vector<TruncatedNormalParams> params(n);
            detail::parallel_for(n, opts.threads, [&](long flat) {
                const int k = static_cast<int>(flat / hyper.L);
                const int l = static_cast<int>(flat % hyper.L);
                double prec_sum = 0.0, dot = 0.0;
                for (const auto& [i, j] : data.omega()) {
                    const double fm = state.F.mean(i, k);
                    const double gm = state.G.mean(j, l);
                    prec_sum += state.F.second(i, k) * state.G.second(j, l);
                    const double wf = fs(i, l) - fm * old_mean(k, l);
                    const double wg = sg(j, k) - old_mean(k, l) * gm;
                    dot += (mresid(i, j) + old_mean(k, l) * fm * gm) * fm * gm -
                           fm * state.G.var(j, l) * wf - state.F.var(i, k) * gm * wg;
                }
                const double prec = tau * prec_sum;
                if (prec > 0.0) params[flat] = {(-hyper.lambda + tau * dot) / prec, prec};
                else params[flat] = exponential_limit_params(hyper.lambda);
            });
            for (long flat = 0; flat < n; ++flat)
                state.S.set_entry(flat / hyper.L, flat % hyper.L, params[flat]);
        }
    }

    void iterate() {
        if (opts.update.row_factor) sweep_f();
        if (opts.update.mid_factor) sweep_s();
        if (opts.update.col_factor) sweep_g();
        if (opts.update.tau) vb_update_tau(state, data, hyper);
        if (hyper.ard && opts.update.ard) {
            for (int k = 0; k < hyper.K; ++k)
                vb_update_ard(state, FactorId::F, k, hyper);
            for (int l = 0; l < hyper.L; ++l)
                vb_update_ard(state, FactorId::G, l, hyper);
        }
    }
};

template <typename Sweeper, typename ElboFn>
TraceRecord run_vb_loop(Sweeper& sweeper, const RunOptions& opts,
                        ElboFn compute_elbo) {
    TraceRecord trace;
    const auto start = Clock::now();
    const auto record = [&](int t) {
        trace.train_mse.push_back(sweeper.train_mse());
        trace.seconds.push_back(seconds_since(start));
        if (opts.elbo_every > 0 && t % opts.elbo_every == 0)
            trace.elbo.push_back(compute_elbo());
        else
            trace.elbo.push_back(std::numeric_limits<double>::quiet_NaN());
    };
    record(0);
    for (int t = 1; t <= opts.stop.max_iterations; ++t) {
        sweeper.iterate();
        record(t);
        if (stop_rule_fires(opts.stop, trace.train_mse)) break;
    }
    return trace;
}

}  // namespace

VbNmfResult vb_run_nmf(const MaskedMatrix& data, const HyperParams& hyper,
                       const RunOptions& opts, std::uint64_t seed,
                       const VbNmfState* initial) {
    hyper.validate(Model::nmf);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    VbNmfState start = initial ? *initial
                               : init_vb_nmf(hyper, data.rows(), data.cols(),
                                             opts.init, &data, init_rng);
    if (start.U.mean.rows() != data.rows() || start.V.mean.rows() != data.cols() ||
        start.U.mean.cols() != hyper.K || start.V.mean.cols() != hyper.K)
        throw std::invalid_argument("initial state shape mismatch");
    if (hyper.ard && start.ard_q.empty())
        start.ard_q.assign(hyper.K, VbGamma{hyper.alpha0, hyper.beta0});

    VbNmfSweeper sweeper(data, hyper, opts, std::move(start));
    VbNmfResult result;
    result.trace = run_vb_loop(sweeper, opts,
                               [&]() { return elbo(sweeper.state, data, hyper); });
    result.state = std::move(sweeper.state);
    return result;
}

VbNmtfResult vb_run_nmtf(const MaskedMatrix& data, const HyperParams& hyper,
                         const RunOptions& opts, std::uint64_t seed,
                         const VbNmtfState* initial) {
    hyper.validate(Model::nmtf);
    SeededRng init_rng(seed, make_stream(stream_slot::init, 0));
    VbNmtfState start = initial ? *initial
                                : init_vb_nmtf(hyper, data.rows(), data.cols(),
                                               opts.init, &data, init_rng);
    if (start.F.mean.rows() != data.rows() || start.G.mean.rows() != data.cols() ||
        start.F.mean.cols() != hyper.K || start.S.mean.rows() != hyper.K ||
        start.S.mean.cols() != hyper.L || start.G.mean.cols() != hyper.L)
        throw std::invalid_argument("initial state shape mismatch");
    if (hyper.ard && start.ard_f_q.empty())
        start.ard_f_q.assign(hyper.K, VbGamma{hyper.alpha0, hyper.beta0});
    if (hyper.ard && start.ard_g_q.empty())
        start.ard_g_q.assign(hyper.L, VbGamma{hyper.alpha0, hyper.beta0});

    VbNmtfSweeper sweeper(data, hyper, opts, std::move(start));
    VbNmtfResult result;
    result.trace = run_vb_loop(sweeper, opts,
                               [&]() { return elbo(sweeper.state, data, hyper); });
    result.state = std::move(sweeper.state);
    return result;
}

}  // namespace bnmtf
