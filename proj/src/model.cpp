#include "bnmtf/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bnmtf {

void HyperParams::validate(Model model) const {
    if (!(lambda > 0.0) || !(alpha_tau > 0.0) || !(beta_tau > 0.0) ||
        !(alpha0 > 0.0) || !(beta0 > 0.0))
        throw std::invalid_argument("HyperParams: rates and shapes must be > 0");
    if (K < 1) throw std::invalid_argument("HyperParams: K must be >= 1");
    if (model == Model::nmtf && L < 1)
        throw std::invalid_argument("HyperParams: L must be >= 1 for the three-matrix model");
}

void VbFactor::resize(Eigen::Index rows, Eigen::Index cols) {
    mu.setZero(rows, cols);
    prec.setOnes(rows, cols);
    mean.setZero(rows, cols);
    var.setZero(rows, cols);
    second.setZero(rows, cols);
}

void VbFactor::set_entry(Eigen::Index i, Eigen::Index j,
                         const TruncatedNormalParams& p) {
    mu(i, j) = p.mu;
    prec(i, j) = p.tau;
    const Moments m = tn_moments(p);
    mean(i, j) = m.mean;
    var(i, j) = m.variance;
    second(i, j) = m.mean * m.mean + m.variance;
}

void VbFactor::set_point(const Eigen::MatrixXd& values) {
    mu = values;
    prec = Eigen::MatrixXd::Constant(values.rows(), values.cols(), 1e300);
    mean = values;
    var = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    second = values.array().square();
}

namespace {

// Squared Euclidean distance between point row `p` and center row `c`.
double sq_dist(const Eigen::MatrixXd& points, Eigen::Index p,
               const Eigen::MatrixXd& centers, Eigen::Index c) {
    return (points.row(p) - centers.row(c)).squaredNorm();
}

}  // namespace

Eigen::MatrixXd kmeans_indicators(const Eigen::MatrixXd& points,
                                  const BoolMatrix& mask, int k, SeededRng& rng) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > n) throw std::invalid_argument("kmeans: k exceeds the number of points");
    if (mask.rows() != n || mask.cols() != d)
        throw std::invalid_argument("kmeans: mask shape mismatch");

    // Column-mean imputation of unobserved coordinates.
    Eigen::MatrixXd imputed = points;
    for (Eigen::Index j = 0; j < d; ++j) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (mask(i, j)) { sum += points(i, j); ++count; }
        const double fill = count > 0 ? sum / count : 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!mask(i, j)) imputed(i, j) = fill;
    }

    // Distance-weighted seeding.
    Eigen::MatrixXd centers(k, d);
    centers.row(0) = imputed.row(static_cast<Eigen::Index>(rng.next_below(n)));
    Eigen::VectorXd d2(n);
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int cc = 0; cc < c; ++cc)
                best = std::min(best, sq_dist(imputed, i, centers, cc));
            d2(i) = best;
        }
        const double total = d2.sum();
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            Eigen::Index pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc > target) { pick = i; break; }
            }
            centers.row(c) = imputed.row(pick);
        } else {
            centers.row(c) = imputed.row(static_cast<Eigen::Index>(rng.next_below(n)));
        }
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(imputed, i, centers, 0);
            for (int c = 1; c < k; ++c) {
                const double dist = sq_dist(imputed, i, centers, c);
                if (dist < best_d) { best_d = dist; best = c; }
            }
            if (assign[i] != best) { assign[i] = best; changed = true; }
        }
        // Reseed any empty cluster to the point farthest from its center.
        std::vector<int> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) ++counts[assign[i]];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[assign[i]] <= 1) continue;
                const double dist = sq_dist(imputed, i, centers, assign[i]);
                if (dist > far_d) { far_d = dist; far = i; }
            }
            --counts[assign[far]];
            assign[far] = c;
            ++counts[c];
            changed = true;
        }
        if (!changed && iter > 0) break;
        centers.setZero();
        for (Eigen::Index i = 0; i < n; ++i) centers.row(assign[i]) += imputed.row(i);
        for (int c = 0; c < k; ++c) centers.row(c) /= counts[c];
    }

    Eigen::MatrixXd indicators = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) indicators(i, assign[i]) = 1.0;
    return indicators;
}

namespace {

Eigen::MatrixXd draw_matrix(Eigen::Index rows, Eigen::Index cols, double rate,
                            SeededRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = sample_exponential(rate, rng);
    return m;
}

void require_kmeans_inputs(const MaskedMatrix* data) {
    if (data == nullptr)
        throw std::invalid_argument("init: kmeans initialisation requires data");
}

}  // namespace

NmfState init_nmf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                  InitStrategy strategy, const MaskedMatrix* /*data*/,
                  SeededRng& rng) {
    hyper.validate(Model::nmf);
    NmfState state;
    const double rate = hyper.ard ? hyper.alpha0 / hyper.beta0 : hyper.lambda;
    switch (strategy) {
        case InitStrategy::prior_mean:
            state.U = Eigen::MatrixXd::Constant(I, hyper.K, 1.0 / rate);
            state.V = Eigen::MatrixXd::Constant(J, hyper.K, 1.0 / rate);
            state.tau = hyper.alpha_tau / hyper.beta_tau;
            break;
        case InitStrategy::random_draw:
            state.U = draw_matrix(I, hyper.K, rate, rng);
            state.V = draw_matrix(J, hyper.K, rate, rng);
            state.tau = sample_gamma({hyper.alpha_tau, hyper.beta_tau}, rng);
            break;
        case InitStrategy::kmeans:
            throw std::invalid_argument(
                "init: kmeans initialisation applies to the three-matrix model only");
    }
    if (hyper.ard)
        state.ard_lambda = Eigen::VectorXd::Constant(hyper.K, hyper.alpha0 / hyper.beta0);
    return state;
}

NmtfState init_nmtf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                    InitStrategy strategy, const MaskedMatrix* data,
                    SeededRng& rng, double indicator_smoothing) {
    hyper.validate(Model::nmtf);
    NmtfState state;
    const double rate = hyper.ard ? hyper.alpha0 / hyper.beta0 : hyper.lambda;
    switch (strategy) {
        case InitStrategy::prior_mean:
            state.F = Eigen::MatrixXd::Constant(I, hyper.K, 1.0 / rate);
            state.S = Eigen::MatrixXd::Constant(hyper.K, hyper.L, 1.0 / hyper.lambda);
            state.G = Eigen::MatrixXd::Constant(J, hyper.L, 1.0 / rate);
            state.tau = hyper.alpha_tau / hyper.beta_tau;
            break;
        case InitStrategy::random_draw:
            state.F = draw_matrix(I, hyper.K, rate, rng);
            state.S = draw_matrix(hyper.K, hyper.L, hyper.lambda, rng);
            state.G = draw_matrix(J, hyper.L, rate, rng);
            state.tau = sample_gamma({hyper.alpha_tau, hyper.beta_tau}, rng);
            break;
        case InitStrategy::kmeans: {
            require_kmeans_inputs(data);
            // Cluster rows for F, columns for G; smoothing keeps the sampling
            // engines strictly inside the support.
            const Eigen::MatrixXd f_ind =
                kmeans_indicators(data->values(), data->mask(), hyper.K, rng);
            const Eigen::MatrixXd g_ind = kmeans_indicators(
                data->values().transpose(), data->mask().transpose(), hyper.L, rng);
            state.F = f_ind.array() + indicator_smoothing;
            state.G = g_ind.array() + indicator_smoothing;
            state.S = draw_matrix(hyper.K, hyper.L, hyper.lambda, rng);
            state.tau = sample_gamma({hyper.alpha_tau, hyper.beta_tau}, rng);
            break;
        }
    }
    if (hyper.ard) {
        state.ard_lambda_f = Eigen::VectorXd::Constant(hyper.K, hyper.alpha0 / hyper.beta0);
        state.ard_lambda_g = Eigen::VectorXd::Constant(hyper.L, hyper.alpha0 / hyper.beta0);
    }
    return state;
}

namespace {

VbFactor vb_factor_from_mu(const Eigen::MatrixXd& mu) {
    VbFactor f;
    f.resize(mu.rows(), mu.cols());
    for (Eigen::Index i = 0; i < mu.rows(); ++i)
        for (Eigen::Index j = 0; j < mu.cols(); ++j)
            f.set_entry(i, j, {mu(i, j), 1.0});
    return f;
}

}  // namespace

VbNmfState init_vb_nmf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                       InitStrategy strategy, const MaskedMatrix* /*data*/,
                       SeededRng& rng) {
    hyper.validate(Model::nmf);
    VbNmfState state;
    const double rate = hyper.ard ? hyper.alpha0 / hyper.beta0 : hyper.lambda;
    switch (strategy) {
        case InitStrategy::prior_mean:
            state.U = vb_factor_from_mu(Eigen::MatrixXd::Constant(I, hyper.K, 1.0 / rate));
            state.V = vb_factor_from_mu(Eigen::MatrixXd::Constant(J, hyper.K, 1.0 / rate));
            break;
        case InitStrategy::random_draw:
            state.U = vb_factor_from_mu(draw_matrix(I, hyper.K, rate, rng));
            state.V = vb_factor_from_mu(draw_matrix(J, hyper.K, rate, rng));
            break;
        case InitStrategy::kmeans:
            throw std::invalid_argument(
                "init: kmeans initialisation applies to the three-matrix model only");
    }
    state.tau_q = {hyper.alpha_tau, hyper.beta_tau};
    if (hyper.ard) state.ard_q.assign(hyper.K, VbGamma{hyper.alpha0, hyper.beta0});
    return state;
}

VbNmtfState init_vb_nmtf(const HyperParams& hyper, Eigen::Index I, Eigen::Index J,
                         InitStrategy strategy, const MaskedMatrix* data,
                         SeededRng& rng) {
    hyper.validate(Model::nmtf);
    VbNmtfState state;
    const double rate = hyper.ard ? hyper.alpha0 / hyper.beta0 : hyper.lambda;
    switch (strategy) {
        case InitStrategy::prior_mean:
            state.F = vb_factor_from_mu(Eigen::MatrixXd::Constant(I, hyper.K, 1.0 / rate));
            state.S = vb_factor_from_mu(
                Eigen::MatrixXd::Constant(hyper.K, hyper.L, 1.0 / hyper.lambda));
            state.G = vb_factor_from_mu(Eigen::MatrixXd::Constant(J, hyper.L, 1.0 / rate));
            break;
        case InitStrategy::random_draw:
            state.F = vb_factor_from_mu(draw_matrix(I, hyper.K, rate, rng));
            state.S = vb_factor_from_mu(draw_matrix(hyper.K, hyper.L, hyper.lambda, rng));
            state.G = vb_factor_from_mu(draw_matrix(J, hyper.L, rate, rng));
            break;
        case InitStrategy::kmeans: {
            require_kmeans_inputs(data);
            // The variational mu parameters take the raw cluster indicators.
            const Eigen::MatrixXd f_ind =
                kmeans_indicators(data->values(), data->mask(), hyper.K, rng);
            const Eigen::MatrixXd g_ind = kmeans_indicators(
                data->values().transpose(), data->mask().transpose(), hyper.L, rng);
            state.F = vb_factor_from_mu(f_ind);
            state.G = vb_factor_from_mu(g_ind);
            state.S = vb_factor_from_mu(draw_matrix(hyper.K, hyper.L, hyper.lambda, rng));
            break;
        }
    }
    state.tau_q = {hyper.alpha_tau, hyper.beta_tau};
    if (hyper.ard) {
        state.ard_f_q.assign(hyper.K, VbGamma{hyper.alpha0, hyper.beta0});
        state.ard_g_q.assign(hyper.L, VbGamma{hyper.alpha0, hyper.beta0});
    }
    return state;
}

}  // namespace bnmtf
