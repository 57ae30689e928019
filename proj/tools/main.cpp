#include <CLI11.hpp>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bnmtf/data_io.hpp"
#include "bnmtf/experiments.hpp"
#include "bnmtf/infer_gibbs_icm.hpp"
#include "bnmtf/infer_np.hpp"
#include "bnmtf/infer_vb.hpp"

namespace fs = std::filesystem;
using namespace bnmtf;

namespace {

struct CommonFlags {
    std::string model = "nmf";
    std::string engine = "vb";
    bool ard = false;
    int k = 10;
    int l = -1;
    double lambda = 0.1;
    double alpha_tau = 1.0, beta_tau = 1.0, alpha0 = 1.0, beta0 = 1.0;
    std::string init = "random_draw";
    int iterations = -1;
    int burn_in = -1;
    int thin = 2;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir;
    std::string schedule = "sequential";
};

Model parse_model(const std::string& s) {
    if (s == "nmf") return Model::nmf;
    if (s == "nmtf") return Model::nmtf;
    throw CLI::ValidationError("--model", "must be nmf or nmtf");
}

Engine parse_engine(const std::string& s) {
    if (s == "np") return Engine::np;
    if (s == "gibbs") return Engine::gibbs;
    if (s == "icm") return Engine::icm;
    if (s == "vb") return Engine::vb;
    throw CLI::ValidationError("--engine", "must be np, gibbs, icm or vb");
}

InitStrategy parse_init(const std::string& s) {
    if (s == "prior_mean") return InitStrategy::prior_mean;
    if (s == "random_draw") return InitStrategy::random_draw;
    if (s == "kmeans") return InitStrategy::kmeans;
    throw CLI::ValidationError("--init", "must be prior_mean, random_draw or kmeans");
}

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("BNMTF_OUT_DIR")) return env;
    return ".";
}

void add_hyper_flags(CLI::App* app, CommonFlags& f) {
    app->add_option("--model", f.model, "Model: nmf or nmtf")
        ->check(CLI::IsMember({"nmf", "nmtf"}));
    app->add_option("--k", f.k, "Number of row factors");
    app->add_option("--l", f.l, "Number of column factors (nmtf only)");
    app->add_option("--lambda", f.lambda, "Prior rate of the factor entries");
    app->add_option("--alpha-tau", f.alpha_tau, "Noise precision prior shape");
    app->add_option("--beta-tau", f.beta_tau, "Noise precision prior rate");
    app->add_option("--alpha0", f.alpha0, "ARD hyperprior shape");
    app->add_option("--beta0", f.beta0, "ARD hyperprior rate");
    app->add_option("--seed", f.seed, "Random seed");
    app->add_option("--threads", f.threads, "Worker threads (results are identical for any value)")
        ->check(CLI::PositiveNumber);
    app->add_option("--out", f.out_dir, "Output directory (default: $BNMTF_OUT_DIR or .)");
}

void add_run_flags(CLI::App* app, CommonFlags& f) {
    app->add_flag("--ard", f.ard, "Enable the automatic relevance determination prior");
    app->add_option("--engine", f.engine, "Inference engine: np, gibbs, icm or vb")
        ->check(CLI::IsMember({"np", "gibbs", "icm", "vb"}));
    app->add_option("--init", f.init, "Initialisation: prior_mean, random_draw or kmeans")
        ->check(CLI::IsMember({"prior_mean", "random_draw", "kmeans"}));
    app->add_option("--iterations", f.iterations, "Iteration budget (engine default if unset)");
    app->add_option("--burn-in", f.burn_in, "Burn-in iterations (sampling engines)");
    app->add_option("--thin", f.thin, "Thinning interval (sampling engines)");
    app->add_option("--schedule", f.schedule,
                    "Update schedule: sequential or synchronous")
        ->check(CLI::IsMember({"sequential", "synchronous"}));
}

HyperParams hyper_from_flags(const CommonFlags& f, Model model) {
    HyperParams h;
    h.lambda = f.lambda;
    h.alpha_tau = f.alpha_tau;
    h.beta_tau = f.beta_tau;
    h.alpha0 = f.alpha0;
    h.beta0 = f.beta0;
    h.K = f.k;
    h.L = model == Model::nmtf ? (f.l > 0 ? f.l : f.k) : 0;
    h.ard = f.ard;
    return h;
}

RunOptions options_from_flags(const CommonFlags& f, Engine engine) {
    RunOptions opts = default_engine_options(engine);
    if (f.iterations >= 0) opts.stop.max_iterations = f.iterations;
    if (f.burn_in >= 0) opts.burn_in = f.burn_in;
    opts.thin = f.thin;
    opts.init = parse_init(f.init);
    opts.threads = f.threads;
    opts.schedule =
        f.schedule == "synchronous" ? Schedule::synchronous : Schedule::sequential;
    return opts;
}

void validate_flags(const CommonFlags& f, Model model, Engine engine) {
    if (engine == Engine::np && f.ard)
        throw CLI::ValidationError("--ard", "the np engine has no prior to place ARD on");
    if (model == Model::nmf && f.l > 0)
        throw CLI::ValidationError("--l", "only the nmtf model has a second dimensionality");
}

void write_summary(const std::string& path, double train_mse, double seconds,
                   int iterations) {
    nlohmann::json j{{"train_mse", train_mse},
                     {"seconds", seconds},
                     {"iterations", iterations}};
    std::ofstream out(path);
    out << j.dump(2) << '\n';
}

int cmd_fit(const CommonFlags& f, const std::string& input,
            const std::string& missing_token, bool header) {
    const Model model = parse_model(f.model);
    const Engine engine = parse_engine(f.engine);
    validate_flags(f, model, engine);
    const HyperParams hyper = hyper_from_flags(f, model);
    const RunOptions opts = options_from_flags(f, engine);
    const MaskedMatrix data = load_csv(input, missing_token, header);

    const fs::path out_dir = resolve_out_dir(f.out_dir);
    fs::create_directories(out_dir);
    const std::string state_path = (out_dir / "state.json").string();
    const std::string trace_path = (out_dir / "trace.csv").string();
    const std::string summary_path = (out_dir / "summary.json").string();

    TraceRecord trace;
    if (model == Model::nmf) {
        switch (engine) {
            case Engine::np: {
                auto r = run_np_nmf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmf(data, hyper, opts, f.seed);
                save_state(r.posterior.summary_mean, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
        }
    } else {
        switch (engine) {
            case Engine::np: {
                auto r = run_np_nmtf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmtf(data, hyper, opts, f.seed);
                save_state(r.posterior.summary_mean, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmtf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmtf(data, hyper, opts, f.seed);
                save_state(r.state, state_path);
                trace = std::move(r.trace);
                break;
            }
        }
    }
    write_trace(trace_path, trace);
    write_summary(summary_path, trace.train_mse.back(), trace.seconds.back(),
                  trace.iterations());
    return 0;
}

int cmd_predict(const std::string& state_path, const std::string& input,
                const std::string& output, const std::string& truth_path,
                const std::string& missing_token, bool header) {
    const Eigen::MatrixXd prediction = load_state_prediction(state_path);
    const MaskedMatrix data = load_csv(input, missing_token, header);
    if (prediction.rows() != data.rows() || prediction.cols() != data.cols())
        throw std::runtime_error("state and input shapes differ");
    write_dense_csv(prediction, output);

    if (!truth_path.empty()) {
        const MaskedMatrix truth = load_csv(truth_path, missing_token, header);
        if (truth.rows() != data.rows() || truth.cols() != data.cols())
            throw std::runtime_error("truth and input shapes differ");
        // Score the cells the input is missing but the truth provides.
        double sum = 0.0;
        std::int64_t count = 0;
        for (const auto& [i, j] : truth.omega()) {
            if (data.observed(i, j)) continue;
            const double d = truth.values()(i, j) - prediction(i, j);
            sum += d * d;
            ++count;
        }
        nlohmann::json j{{"test_cells", count}};
        if (count > 0) j["test_mse"] = sum / static_cast<double>(count);
        std::cout << j.dump(2) << '\n';
    }
    return 0;
}

std::vector<Engine> parse_engines(const std::vector<std::string>& names) {
    std::vector<Engine> engines;
    for (const auto& n : names) engines.push_back(parse_engine(n));
    return engines;
}

std::vector<int> parse_k_values(const std::string& spec) {
    // Either "a..b" or a comma-separated list.
    std::vector<int> values;
    const auto dots = spec.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(spec.substr(0, dots));
        const int hi = std::stoi(spec.substr(dots + 2));
        for (int k = lo; k <= hi; ++k) values.push_back(k);
        return values;
    }
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto pos = spec.find(',', start);
        const std::string tok = spec.substr(start, pos == std::string::npos
                                                       ? std::string::npos
                                                       : pos - start);
        if (!tok.empty()) values.push_back(std::stoi(tok));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return values;
}

struct ExperimentFlags {
    CommonFlags common;
    std::vector<std::string> engines = {"np", "gibbs", "icm", "vb"};
    int i = 100, j = 80;
    int k_true = -1;
    double factor_rate = 1.0;
    int repeats = 20;
    std::vector<double> nsr_levels = {0.0, 0.1, 0.2, 0.5, 1.0};
    int splits = -1;
    std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    int folds = 10;
    int inner_folds = 3;
    std::string k_values;
    std::string ard_mode = "off";
};

ExperimentConfig config_from_flags(const ExperimentFlags& ef, const std::string& kind) {
    const Model model = parse_model(ef.common.model);
    ExperimentConfig config;
    config.model = model;
    config.engines = parse_engines(ef.engines);
    config.hyper = hyper_from_flags(ef.common, model);
    config.seed = ef.common.seed;
    config.threads = ef.common.threads;
    config.synthetic.I = ef.i;
    config.synthetic.J = ef.j;
    config.synthetic.K = ef.k_true > 0 ? ef.k_true : config.hyper.K;
    config.synthetic.L = model == Model::nmtf ? config.synthetic.K : 0;
    config.synthetic.factor_rate = ef.factor_rate;
    config.repeats = ef.repeats;
    config.nsr_levels = ef.nsr_levels;
    config.sparsity_fractions = ef.fractions;
    if (ef.splits > 0) {
        config.splits_per_level = ef.splits;
        config.splits_per_fraction = ef.splits;
    }
    config.folds = ef.folds;
    config.inner_folds = ef.inner_folds;
    if (ef.ard_mode == "on") config.ard_mode = ArdMode::on;
    else if (ef.ard_mode == "both") config.ard_mode = ArdMode::both;
    else config.ard_mode = ArdMode::off;

    for (Engine e : {Engine::np, Engine::gibbs, Engine::icm, Engine::vb}) {
        RunOptions opts = default_engine_options(e);
        if (ef.common.iterations >= 0) opts.stop.max_iterations = ef.common.iterations;
        if (ef.common.burn_in >= 0) opts.burn_in = ef.common.burn_in;
        else if (ef.common.iterations >= 0) opts.burn_in = ef.common.iterations / 2;
        opts.thin = ef.common.thin;
        switch (e) {
            case Engine::np: config.np_opts = opts; break;
            case Engine::gibbs: config.gibbs_opts = opts; break;
            case Engine::icm: config.icm_opts = opts; break;
            case Engine::vb: config.vb_opts = opts; break;
        }
    }
    if (kind == "cv" || kind == "model-select") {
        // ARD runs skip dimensionality selection; defaults follow the model.
        config.ard_fixed_k = model == Model::nmf ? 20 : 10;
        config.ard_fixed_l = 10;
    }
    return config;
}

int cmd_experiment(const std::string& kind, const ExperimentFlags& ef) {
    if (parse_engines(ef.engines).empty())
        throw CLI::ValidationError("--engines", "need at least one engine");
    for (const auto& name : ef.engines)
        if (name == "np" && (ef.ard_mode == "on"))
            throw CLI::ValidationError("--ard-mode", "the np engine has no ARD prior");

    const ExperimentConfig config = config_from_flags(ef, kind);
    ExperimentResult result;
    if (kind == "convergence") {
        result = convergence_experiment(config);
    } else if (kind == "noise") {
        result = noise_test(config);
    } else if (kind == "sparsity") {
        result = sparsity_test(config);
    } else if (kind == "cv") {
        const std::vector<int> grid =
            ef.k_values.empty() ? std::vector<int>{config.hyper.K}
                                : parse_k_values(ef.k_values);
        result = nested_cross_validation(config, grid);
    } else if (kind == "model-select") {
        const std::vector<int> values =
            ef.k_values.empty() ? std::vector<int>{config.hyper.K}
                                : parse_k_values(ef.k_values);
        result = model_selection_sweep(config, values);
    } else {
        throw CLI::ValidationError("experiment", "unknown kind '" + kind + "'");
    }

    const fs::path out_dir = resolve_out_dir(ef.common.out_dir);
    fs::create_directories(out_dir);
    write_results((out_dir / "results.csv").string(), result, ResultFormat::csv);
    write_results((out_dir / "results.json").string(), result, ResultFormat::json);
    write_timings((out_dir / "timings.csv").string(), result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian nonnegative matrix factorisation and tri-factorisation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from a TOML/INI config file");
    app.allow_extras(false);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a factorisation to a CSV matrix");
    CommonFlags fit_flags;
    std::string fit_input, fit_missing;
    bool fit_header = false;
    fit->add_option("--input", fit_input, "Input CSV")->required();
    fit->add_option("--missing-token", fit_missing, "Token marking unobserved cells");
    fit->add_flag("--header", fit_header, "First CSV row is a header");
    add_hyper_flags(fit, fit_flags);
    add_run_flags(fit, fit_flags);

    // predict
    auto* predict = app.add_subcommand("predict", "Write the dense prediction of a saved state");
    std::string pr_state, pr_input, pr_output, pr_truth, pr_missing;
    bool pr_header = false;
    predict->add_option("--state", pr_state, "Saved state JSON")->required();
    predict->add_option("--input", pr_input, "Input CSV (shape and mask reference)")->required();
    predict->add_option("--output", pr_output, "Prediction CSV")->required();
    predict->add_option("--truth", pr_truth, "Optional truth CSV for held-out scoring");
    predict->add_option("--missing-token", pr_missing, "Token marking unobserved cells");
    predict->add_flag("--header", pr_header, "First CSV row is a header");

    // experiment <kind>
    auto* experiment = app.add_subcommand("experiment", "Run a study protocol");
    experiment->require_subcommand(1);
    ExperimentFlags ef;
    std::vector<CLI::App*> kinds;
    for (const char* kind : {"convergence", "noise", "sparsity", "cv", "model-select"}) {
        auto* sub = experiment->add_subcommand(kind);
        add_hyper_flags(sub, ef.common);
        sub->add_option("--engines", ef.engines, "Engines to run");
        sub->add_option("--i", ef.i, "Synthetic rows");
        sub->add_option("--j", ef.j, "Synthetic columns");
        sub->add_option("--k-true", ef.k_true, "Synthetic generating dimensionality");
        sub->add_option("--factor-rate", ef.factor_rate, "Synthetic factor prior rate");
        sub->add_option("--iterations", ef.common.iterations, "Iteration budget override");
        sub->add_option("--burn-in", ef.common.burn_in, "Burn-in override");
        sub->add_option("--thin", ef.common.thin, "Thinning interval");
        sub->add_option("--repeats", ef.repeats, "Convergence repeats");
        sub->add_option("--nsr-levels", ef.nsr_levels, "Noise-to-signal levels");
        sub->add_option("--splits", ef.splits, "Random splits per level/fraction");
        sub->add_option("--fractions", ef.fractions, "Missing-data fractions");
        sub->add_option("--folds", ef.folds, "Cross-validation folds");
        sub->add_option("--inner-folds", ef.inner_folds, "Inner selection folds");
        sub->add_option("--k-values", ef.k_values, "Dimensionality grid, e.g. 1..10 or 2,4,8");
        sub->add_option("--ard", ef.ard_mode, "ARD variants: off, on or both")
            ->check(CLI::IsMember({"off", "on", "both"}));
        kinds.push_back(sub);
    }

    try {
        app.parse(argc, argv);
        if (*fit) return cmd_fit(fit_flags, fit_input, fit_missing, fit_header);
        if (*predict)
            return cmd_predict(pr_state, pr_input, pr_output, pr_truth, pr_missing,
                               pr_header);
        if (*experiment) {
            const char* names[] = {"convergence", "noise", "sparsity", "cv",
                                   "model-select"};
            for (std::size_t idx = 0; idx < kinds.size(); ++idx)
                if (kinds[idx]->parsed()) return cmd_experiment(names[idx], ef);
        }
        std::cerr << "no command given\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}
