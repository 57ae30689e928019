#include "bnmtf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bnmtf/infer_gibbs_icm.hpp"
#include "bnmtf/infer_np.hpp"
#include "bnmtf/infer_vb.hpp"

namespace bnmtf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stable tags for child-seed derivation.
enum : std::uint64_t {
    kTagConvergence = 1,
    kTagNoise = 2,
    kTagSparsity = 3,
    kTagCv = 4,
    kTagModelSelect = 5,
    kTagData = 100,
    kTagSplit = 101,
    kTagFit = 102,
};

std::uint64_t engine_tag(Engine e) { return static_cast<std::uint64_t>(e) + 1; }

Eigen::MatrixXd draw_exponential_matrix(Eigen::Index rows, Eigen::Index cols,
                                        double rate, SeededRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = sample_exponential(rate, rng);
    return m;
}

}  // namespace

Synthetic generate_synthetic(const SyntheticSpec& spec, SeededRng& rng) {
    if (spec.I < 1 || spec.J < 1 || spec.K < 1)
        throw std::invalid_argument("generate_synthetic: invalid dimensions");
    if (!(spec.factor_rate > 0.0) || spec.noise < 0.0)
        throw std::invalid_argument("generate_synthetic: invalid rate or noise");

    Eigen::MatrixXd truth;
    if (spec.L > 0) {
        const Eigen::MatrixXd f = draw_exponential_matrix(spec.I, spec.K, spec.factor_rate, rng);
        const Eigen::MatrixXd s = draw_exponential_matrix(spec.K, spec.L, spec.factor_rate, rng);
        const Eigen::MatrixXd g = draw_exponential_matrix(spec.J, spec.L, spec.factor_rate, rng);
        truth = f * s * g.transpose();
    } else {
        const Eigen::MatrixXd u = draw_exponential_matrix(spec.I, spec.K, spec.factor_rate, rng);
        const Eigen::MatrixXd v = draw_exponential_matrix(spec.J, spec.K, spec.factor_rate, rng);
        truth = u * v.transpose();
    }

    double sigma;
    if (spec.mode == SyntheticSpec::NoiseMode::variance) {
        sigma = std::sqrt(spec.noise);
    } else {
        const double mean = truth.mean();
        const double sd = std::sqrt((truth.array() - mean).square().mean());
        sigma = spec.noise * sd;
    }

    Eigen::MatrixXd values = truth;
    if (sigma > 0.0)
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            for (Eigen::Index j = 0; j < values.cols(); ++j)
                values(i, j) += sigma * rng.normal();

    const BoolMatrix mask = BoolMatrix::Constant(spec.I, spec.J, true);
    return Synthetic{MaskedMatrix::from_dense(std::move(values), mask), std::move(truth),
                     sigma * sigma};
}

std::pair<MaskedMatrix, MaskedMatrix> split_train_test(const MaskedMatrix& data,
                                                       double test_fraction,
                                                       SeededRng& rng) {
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw std::invalid_argument("split_train_test: fraction must be in (0, 1)");
    const auto n = static_cast<std::int64_t>(data.n_observed());
    const auto n_test = static_cast<std::int64_t>(std::llround(test_fraction * n));
    if (n_test < 1 || n_test >= n)
        throw std::invalid_argument("split_train_test: split would be empty");

    std::vector<int> order(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (std::int64_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        for (std::int64_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.next_below(i + 1)]);

        BoolMatrix train_mask = data.mask();
        BoolMatrix test_mask = BoolMatrix::Constant(data.rows(), data.cols(), false);
        for (std::int64_t t = 0; t < n_test; ++t) {
            const auto& [i, j] = data.omega()[order[t]];
            train_mask(i, j) = false;
            test_mask(i, j) = true;
        }
        bool ok = true;
        for (Eigen::Index i = 0; i < data.rows() && ok; ++i)
            if (!train_mask.row(i).any()) ok = false;
        for (Eigen::Index j = 0; j < data.cols() && ok; ++j)
            if (!train_mask.col(j).any()) ok = false;
        if (!ok) continue;
        return {data.with_mask(train_mask), data.with_mask(test_mask)};
    }
    throw std::runtime_error(
        "split_train_test: could not keep every row and column observed");
}

std::vector<BoolMatrix> k_folds(const MaskedMatrix& data, int k, SeededRng& rng) {
    const auto n = static_cast<std::int64_t>(data.n_observed());
    if (k < 1 || k > n)
        throw std::invalid_argument("k_folds: need 1 <= k <= number of observed cells");
    std::vector<int> order(n);
    for (std::int64_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    for (std::int64_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.next_below(i + 1)]);

    std::vector<BoolMatrix> folds;
    folds.reserve(k);
    const std::int64_t base = n / k;
    const std::int64_t extra = n % k;
    std::int64_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const std::int64_t size = base + (f < extra ? 1 : 0);
        BoolMatrix mask = BoolMatrix::Constant(data.rows(), data.cols(), false);
        for (std::int64_t t = 0; t < size; ++t) {
            const auto& [i, j] = data.omega()[order[pos++]];
            mask(i, j) = true;
        }
        folds.push_back(std::move(mask));
    }
    return folds;
}

RunOptions default_engine_options(Engine engine) {
    RunOptions opts;
    switch (engine) {
        case Engine::np:
            opts.stop = {1000, 1e-8, 10};
            break;
        case Engine::gibbs:
        case Engine::icm:
            opts.stop = {1000, -1.0, 10};
            opts.burn_in = 500;
            opts.thin = 2;
            break;
        case Engine::vb:
            opts.stop = {500, -1.0, 10};
            opts.elbo_every = 1;
            break;
    }
    return opts;
}

const char* engine_name(Engine engine) {
    switch (engine) {
        case Engine::np: return "np";
        case Engine::gibbs: return "gibbs";
        case Engine::icm: return "icm";
        case Engine::vb: return "vb";
    }
    return "?";
}

const char* model_name(Model model) {
    return model == Model::nmf ? "nmf" : "nmtf";
}

int active_factor_count(const Eigen::MatrixXd& factor_means) {
    // Switched-off columns cannot shrink all the way to zero: the Gamma
    // hyperprior caps their rate near (alpha0 + rows) / beta0, which parks
    // them roughly an order of magnitude below the active columns. A 20%
    // relative cutoff sits inside that gap.
    const Eigen::VectorXd col_means = factor_means.colwise().mean();
    const double cutoff = 0.2 * col_means.maxCoeff();
    int active = 0;
    for (Eigen::Index k = 0; k < col_means.size(); ++k)
        if (col_means(k) > cutoff) ++active;
    return active;
}

FitOutcome fit_engine(Engine engine, Model model, const MaskedMatrix& train,
                      const HyperParams& hyper, const RunOptions& opts,
                      std::uint64_t seed) {
    FitOutcome out;
    if (model == Model::nmf) {
        switch (engine) {
            case Engine::np: {
                if (hyper.ard)
                    throw std::invalid_argument("the multiplicative engine has no ARD prior");
                auto r = run_np_nmf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = r.trace.train_mse.back();
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmf(train, hyper, opts, seed);
                out.prediction = r.posterior.summary_mean.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard)
                    out.active_factors = active_factor_count(r.posterior.summary_mean.U);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard) out.active_factors = active_factor_count(r.state.U);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard) out.active_factors = active_factor_count(r.state.U.mean);
                break;
            }
        }
    } else {
        switch (engine) {
            case Engine::np: {
                if (hyper.ard)
                    throw std::invalid_argument("the multiplicative engine has no ARD prior");
                auto r = run_np_nmtf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = r.trace.train_mse.back();
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmtf(train, hyper, opts, seed);
                out.prediction = r.posterior.summary_mean.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard)
                    out.active_factors = active_factor_count(r.posterior.summary_mean.F);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmtf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard) out.active_factors = active_factor_count(r.state.F);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmtf(train, hyper, opts, seed);
                out.prediction = r.state.predict();
                out.train_mse = train.mse(out.prediction);
                out.seconds = r.trace.seconds.back();
                out.iterations = r.trace.iterations();
                if (hyper.ard) out.active_factors = active_factor_count(r.state.F.mean);
                break;
            }
        }
    }
    return out;
}

namespace {

const RunOptions& options_for(const ExperimentConfig& config, Engine engine) {
    switch (engine) {
        case Engine::np: return config.np_opts;
        case Engine::gibbs: return config.gibbs_opts;
        case Engine::icm: return config.icm_opts;
        case Engine::vb: return config.vb_opts;
    }
    return config.np_opts;
}

RunOptions resolved_options(const ExperimentConfig& config, Engine engine) {
    RunOptions opts = options_for(config, engine);
    opts.threads = config.threads;
    return opts;
}

HyperParams hyper_for_model(const ExperimentConfig& config) {
    HyperParams h = config.hyper;
    if (config.model == Model::nmf) h.L = 0;
    return h;
}

SyntheticSpec synthetic_for_model(const ExperimentConfig& config) {
    SyntheticSpec s = config.synthetic;
    if (config.model == Model::nmf) s.L = 0;
    return s;
}

TraceRecord run_trace(Engine engine, Model model, const MaskedMatrix& data,
                      const HyperParams& hyper, const RunOptions& opts,
                      std::uint64_t seed) {
    if (model == Model::nmf) {
        switch (engine) {
            case Engine::np: return run_np_nmf(data, hyper, opts, seed).trace;
            case Engine::gibbs: return gibbs_run_nmf(data, hyper, opts, seed).trace;
            case Engine::icm: return icm_run_nmf(data, hyper, opts, seed).trace;
            case Engine::vb: return vb_run_nmf(data, hyper, opts, seed).trace;
        }
    } else {
        switch (engine) {
            case Engine::np: return run_np_nmtf(data, hyper, opts, seed).trace;
            case Engine::gibbs: return gibbs_run_nmtf(data, hyper, opts, seed).trace;
            case Engine::icm: return icm_run_nmtf(data, hyper, opts, seed).trace;
            case Engine::vb: return vb_run_nmtf(data, hyper, opts, seed).trace;
        }
    }
    return {};
}

}  // namespace

ExperimentResult convergence_experiment(const ExperimentConfig& config) {
    ExperimentResult result;
    const HyperParams hyper = hyper_for_model(config);
    for (Engine engine : config.engines) {
        RunOptions opts = resolved_options(config, engine);
        opts.stop.rel_tol = -1.0;  // fixed-length traces so repeats align
        opts.elbo_every = 0;       // trace wall time without the bound computation
        std::vector<double> mse_sum, sec_sum;
        for (int rep = 0; rep < config.repeats; ++rep) {
            const std::uint64_t data_seed =
                derive_seed(config.seed, kTagConvergence, kTagData, rep);
            SeededRng data_rng(data_seed, make_stream(stream_slot::data_gen, 0));
            const Synthetic synth = generate_synthetic(synthetic_for_model(config), data_rng);
            const std::uint64_t fit_seed = derive_seed(
                config.seed, kTagConvergence, engine_tag(engine), rep);
            const TraceRecord trace =
                run_trace(engine, config.model, synth.data, hyper, opts, fit_seed);
            if (mse_sum.empty()) {
                mse_sum.assign(trace.train_mse.size(), 0.0);
                sec_sum.assign(trace.seconds.size(), 0.0);
            }
            for (std::size_t t = 0; t < trace.train_mse.size(); ++t) {
                mse_sum[t] += trace.train_mse[t];
                sec_sum[t] += trace.seconds[t];
            }
        }
        for (std::size_t t = 0; t < mse_sum.size(); ++t) {
            ResultRow row;
            row.engine = engine_name(engine);
            row.model = model_name(config.model);
            row.setting = static_cast<double>(t);
            row.fold = 0;
            row.train_mse = mse_sum[t] / config.repeats;
            row.test_mse = kNaN;
            row.seconds = sec_sum[t] / config.repeats;
            row.iterations = static_cast<int>(mse_sum.size()) - 1;
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

ExperimentResult noise_test(const ExperimentConfig& config) {
    ExperimentResult result;
    const HyperParams hyper = hyper_for_model(config);
    for (std::size_t lv = 0; lv < config.nsr_levels.size(); ++lv) {
        SyntheticSpec spec = synthetic_for_model(config);
        spec.mode = SyntheticSpec::NoiseMode::nsr;
        spec.noise = config.nsr_levels[lv];
        SeededRng data_rng(derive_seed(config.seed, kTagNoise, kTagData, lv),
                           make_stream(stream_slot::data_gen, 0));
        const Synthetic synth = generate_synthetic(spec, data_rng);
        for (int split = 0; split < config.splits_per_level; ++split) {
            SeededRng split_rng(derive_seed(config.seed, kTagNoise, kTagSplit,
                                            lv * 1000 + split),
                                make_stream(stream_slot::data_gen, 1));
            const auto [train, test] = split_train_test(synth.data, 0.1, split_rng);
            for (Engine engine : config.engines) {
                const std::uint64_t fit_seed = derive_seed(
                    config.seed, kTagNoise, engine_tag(engine), lv * 1000 + split);
                const FitOutcome fit = fit_engine(engine, config.model, train, hyper,
                                                  resolved_options(config, engine),
                                                  fit_seed);
                ResultRow row;
                row.engine = engine_name(engine);
                row.model = model_name(config.model);
                row.setting = config.nsr_levels[lv];
                row.fold = split;
                row.train_mse = fit.train_mse;
                row.test_mse = test.mse(fit.prediction);
                row.seconds = fit.seconds;
                row.iterations = fit.iterations;
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

ExperimentResult sparsity_test(const ExperimentConfig& config) {
    ExperimentResult result;
    const HyperParams hyper = hyper_for_model(config);
    SeededRng data_rng(derive_seed(config.seed, kTagSparsity, kTagData, 0),
                       make_stream(stream_slot::data_gen, 0));
    const Synthetic synth = generate_synthetic(synthetic_for_model(config), data_rng);
    for (std::size_t fi = 0; fi < config.sparsity_fractions.size(); ++fi) {
        const double fraction = config.sparsity_fractions[fi];
        for (int split = 0; split < config.splits_per_fraction; ++split) {
            SeededRng split_rng(derive_seed(config.seed, kTagSparsity, kTagSplit,
                                            fi * 1000 + split),
                                make_stream(stream_slot::data_gen, 1));
            const auto [train, test] = split_train_test(synth.data, fraction, split_rng);
            for (Engine engine : config.engines) {
                const std::uint64_t fit_seed = derive_seed(
                    config.seed, kTagSparsity, engine_tag(engine), fi * 1000 + split);
                const FitOutcome fit = fit_engine(engine, config.model, train, hyper,
                                                  resolved_options(config, engine),
                                                  fit_seed);
                ResultRow row;
                row.engine = engine_name(engine);
                row.model = model_name(config.model);
                row.setting = fraction;
                row.fold = split;
                row.train_mse = fit.train_mse;
                row.test_mse = test.mse(fit.prediction);
                row.seconds = fit.seconds;
                row.iterations = fit.iterations;
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

namespace {

MaskedMatrix train_without_fold(const MaskedMatrix& data, const BoolMatrix& test_mask) {
    BoolMatrix train_mask = data.mask();
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            if (test_mask(i, j)) train_mask(i, j) = false;
    return data.with_mask(train_mask);
}

HyperParams with_dimensionality(const HyperParams& base, Model model, int k, int l,
                                bool ard) {
    HyperParams h = base;
    h.K = k;
    h.L = model == Model::nmtf ? l : 0;
    h.ard = ard;
    return h;
}

}  // namespace

ExperimentResult nested_cross_validation(const ExperimentConfig& config,
                                         const std::vector<int>& k_grid) {
    if (k_grid.empty())
        throw std::invalid_argument("nested_cross_validation: empty dimensionality grid");
    ExperimentResult result;
    SeededRng data_rng(derive_seed(config.seed, kTagCv, kTagData, 0),
                       make_stream(stream_slot::data_gen, 0));
    const Synthetic synth = generate_synthetic(synthetic_for_model(config), data_rng);
    SeededRng fold_rng(derive_seed(config.seed, kTagCv, kTagSplit, 0),
                       make_stream(stream_slot::data_gen, 1));
    const std::vector<BoolMatrix> folds = k_folds(synth.data, config.folds, fold_rng);

    const bool run_plain =
        config.ard_mode == ArdMode::off || config.ard_mode == ArdMode::both;
    const bool run_ard =
        config.ard_mode == ArdMode::on || config.ard_mode == ArdMode::both;

    for (Engine engine : config.engines) {
        const RunOptions opts = resolved_options(config, engine);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const MaskedMatrix outer_train = train_without_fold(synth.data, folds[f]);
            const MaskedMatrix outer_test = synth.data.with_mask(folds[f]);

            if (run_plain) {
                int chosen = k_grid.front();
                if (k_grid.size() > 1) {
                    SeededRng inner_rng(
                        derive_seed(config.seed, kTagCv, engine_tag(engine), f),
                        make_stream(stream_slot::data_gen, 2));
                    const std::vector<BoolMatrix> inner =
                        k_folds(outer_train, config.inner_folds, inner_rng);
                    double best = std::numeric_limits<double>::infinity();
                    for (int k : k_grid) {
                        const HyperParams h =
                            with_dimensionality(config.hyper, config.model, k, k, false);
                        double mean_mse = 0.0;
                        for (std::size_t g = 0; g < inner.size(); ++g) {
                            const MaskedMatrix inner_train =
                                train_without_fold(outer_train, inner[g]);
                            const MaskedMatrix inner_test = synth.data.with_mask(inner[g]);
                            const std::uint64_t seed = derive_seed(
                                config.seed, kTagCv,
                                kTagFit + engine_tag(engine) * 8,
                                (f * 100 + g) * 1000 + k);
                            const FitOutcome fit = fit_engine(
                                engine, config.model, inner_train, h, opts, seed);
                            mean_mse += inner_test.mse(fit.prediction);
                        }
                        mean_mse /= static_cast<double>(inner.size());
                        if (mean_mse < best) {
                            best = mean_mse;
                            chosen = k;
                        }
                    }
                }
                const HyperParams h =
                    with_dimensionality(config.hyper, config.model, chosen, chosen, false);
                const std::uint64_t seed =
                    derive_seed(config.seed, kTagCv, engine_tag(engine), f * 17 + 1);
                const FitOutcome fit =
                    fit_engine(engine, config.model, outer_train, h, opts, seed);
                ResultRow row;
                row.engine = engine_name(engine);
                row.model = model_name(config.model);
                row.setting = static_cast<double>(chosen);
                row.fold = static_cast<int>(f);
                row.train_mse = fit.train_mse;
                row.test_mse = outer_test.mse(fit.prediction);
                row.seconds = fit.seconds;
                row.iterations = fit.iterations;
                row.chosen_k = chosen;
                result.rows.push_back(std::move(row));
            }

            if (run_ard && engine != Engine::np) {
                const HyperParams h = with_dimensionality(
                    config.hyper, config.model, config.ard_fixed_k, config.ard_fixed_l, true);
                const std::uint64_t seed =
                    derive_seed(config.seed, kTagCv, engine_tag(engine), f * 17 + 2);
                const FitOutcome fit =
                    fit_engine(engine, config.model, outer_train, h, opts, seed);
                ResultRow row;
                row.engine = engine_name(engine);
                row.model = model_name(config.model);
                row.ard = true;
                row.setting = static_cast<double>(h.K);
                row.fold = static_cast<int>(f);
                row.train_mse = fit.train_mse;
                row.test_mse = outer_test.mse(fit.prediction);
                row.seconds = fit.seconds;
                row.iterations = fit.iterations;
                row.chosen_k = h.K;
                row.active_factors = fit.active_factors;
                result.rows.push_back(std::move(row));
            }
        }
    }
    return result;
}

ExperimentResult model_selection_sweep(const ExperimentConfig& config,
                                       const std::vector<int>& k_values) {
    if (k_values.empty())
        throw std::invalid_argument("model_selection_sweep: empty dimensionality list");
    ExperimentResult result;
    SeededRng data_rng(derive_seed(config.seed, kTagModelSelect, kTagData, 0),
                       make_stream(stream_slot::data_gen, 0));
    const Synthetic synth = generate_synthetic(synthetic_for_model(config), data_rng);
    SeededRng fold_rng(derive_seed(config.seed, kTagModelSelect, kTagSplit, 0),
                       make_stream(stream_slot::data_gen, 1));
    const std::vector<BoolMatrix> folds = k_folds(synth.data, config.folds, fold_rng);

    std::vector<bool> ard_variants;
    if (config.ard_mode == ArdMode::off || config.ard_mode == ArdMode::both)
        ard_variants.push_back(false);
    if (config.ard_mode == ArdMode::on || config.ard_mode == ArdMode::both)
        ard_variants.push_back(true);

    for (int k : k_values) {
        for (Engine engine : config.engines) {
            if (engine == Engine::np) continue;  // Bayesian engines only
            const RunOptions opts = resolved_options(config, engine);
            for (bool ard : ard_variants) {
                const HyperParams h =
                    with_dimensionality(config.hyper, config.model, k, k, ard);
                for (std::size_t f = 0; f < folds.size(); ++f) {
                    const MaskedMatrix train = train_without_fold(synth.data, folds[f]);
                    const MaskedMatrix test = synth.data.with_mask(folds[f]);
                    const std::uint64_t seed = derive_seed(
                        config.seed, kTagModelSelect,
                        engine_tag(engine) * 4 + (ard ? 1 : 0), f * 1000 + k);
                    const FitOutcome fit =
                        fit_engine(engine, config.model, train, h, opts, seed);
                    ResultRow row;
                    row.engine = engine_name(engine);
                    row.model = model_name(config.model);
                    row.ard = ard;
                    row.setting = static_cast<double>(k);
                    row.fold = static_cast<int>(f);
                    row.train_mse = fit.train_mse;
                    row.test_mse = test.mse(fit.prediction);
                    row.seconds = fit.seconds;
                    row.iterations = fit.iterations;
                    row.active_factors = ard ? fit.active_factors : -1;
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }
    return result;
}

}  // namespace bnmtf
