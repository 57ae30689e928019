#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bnmtf/common.hpp"
#include "bnmtf/masked_matrix.hpp"
#include "bnmtf/model.hpp"

namespace bnmtf {

/// Synthetic problem: factor matrices drawn from unit-mean exponentials by
/// default, products perturbed by Gaussian noise. `L > 0` selects the
/// three-matrix model. Noise is either a fixed variance or a noise-to-signal
/// ratio (std of the noise over std of the noise-free data).
struct SyntheticSpec {
    int I = 100;
    int J = 80;
    int K = 10;
    int L = 0;
    double factor_rate = 1.0;
    enum class NoiseMode { variance, nsr };
    NoiseMode mode = NoiseMode::variance;
    double noise = 1.0;
};

struct Synthetic {
    MaskedMatrix data;  // fully observed
    Eigen::MatrixXd truth;
    double noise_variance = 0.0;
};

Synthetic generate_synthetic(const SyntheticSpec& spec, SeededRng& rng);

/// Moves `test_fraction` of the observed cells into a disjoint test mask,
/// resampling (up to 100 attempts) until the train mask keeps at least one
/// observed cell in every row and column.
std::pair<MaskedMatrix, MaskedMatrix> split_train_test(const MaskedMatrix& data,
                                                       double test_fraction,
                                                       SeededRng& rng);

/// k disjoint test masks partitioning the observed cells; sizes differ by at
/// most one.
std::vector<BoolMatrix> k_folds(const MaskedMatrix& data, int k, SeededRng& rng);

struct ResultRow {
    std::string engine;
    std::string model;
    bool ard = false;
    double setting = 0.0;  // nsr level, sparsity fraction, K, or iteration
    int fold = 0;          // fold / split / repeat index
    double train_mse = 0.0;
    double test_mse = 0.0;  // NaN when no test split exists
    double seconds = 0.0;   // wall time; serialized separately from results
    int iterations = 0;
    int chosen_k = -1;        // cross-validation only
    int active_factors = -1;  // ARD runs only
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
};

enum class ArdMode { off, on, both };

struct ExperimentConfig {
    Model model = Model::nmf;
    std::vector<Engine> engines = {Engine::np, Engine::gibbs, Engine::icm,
                                   Engine::vb};
    SyntheticSpec synthetic{};
    HyperParams hyper{};
    RunOptions np_opts{}, gibbs_opts{}, icm_opts{}, vb_opts{};
    std::uint64_t seed = 0;
    int threads = 1;
    int repeats = 20;           // convergence
    std::vector<double> nsr_levels = {0.0, 0.1, 0.2, 0.5, 1.0};
    int splits_per_level = 1;   // noise
    std::vector<double> sparsity_fractions = {0.1, 0.2, 0.3, 0.4, 0.5,
                                              0.6, 0.7, 0.8, 0.9};
    int splits_per_fraction = 10;
    int folds = 10;
    int inner_folds = 3;        // dimensionality selection inside each outer fold
    int ard_fixed_k = 20;       // dimensionality of ARD runs that skip selection
    int ard_fixed_l = 10;
    ArdMode ard_mode = ArdMode::off;
};

/// Budgets used when the caller does not override them: 1000 iterations
/// (burn-in 500) for the sampling engines, 500 sweeps for the variational
/// engine, 1000 sweeps with the relative-change rule for the multiplicative
/// engine.
RunOptions default_engine_options(Engine engine);

const char* engine_name(Engine engine);
const char* model_name(Model model);

/// Columns whose mean factor value exceeds 20% of the largest column mean
/// (switched-off columns park roughly an order of magnitude lower).
int active_factor_count(const Eigen::MatrixXd& factor_means);

struct FitOutcome {
    Eigen::MatrixXd prediction;
    double train_mse = 0.0;
    double seconds = 0.0;
    int iterations = 0;
    int active_factors = -1;
};

/// Runs one engine on one training matrix and returns its mean prediction
/// (posterior mean for the Gibbs engine, retained-state mean for ICM,
/// variational means for VB, the fitted point for the multiplicative engine).
FitOutcome fit_engine(Engine engine, Model model, const MaskedMatrix& train,
                      const HyperParams& hyper, const RunOptions& opts,
                      std::uint64_t seed);

/// Training-fit traces per engine, averaged over `repeats` runs.
ExperimentResult convergence_experiment(const ExperimentConfig& config);
/// Held-out error per noise-to-signal level.
ExperimentResult noise_test(const ExperimentConfig& config);
/// Held-out error per missing-data fraction, several random splits each.
ExperimentResult sparsity_test(const ExperimentConfig& config);
/// Outer k-fold with per-fold dimensionality selection on an inner split;
/// ARD variants skip the selection and use the fixed dimensionality.
ExperimentResult nested_cross_validation(const ExperimentConfig& config,
                                         const std::vector<int>& k_grid);
/// Cross-validated error as a function of the dimensionality, with and
/// without ARD; ARD rows carry the active-factor count.
ExperimentResult model_selection_sweep(const ExperimentConfig& config,
                                       const std::vector<int>& k_values);

}  // namespace bnmtf
