#pragma once

#include <cstdint>
#include <utility>

namespace bnmtf {

/// Gamma distribution with shape `alpha` and rate `beta` (mean alpha/beta).
struct GammaParams {
    double shape = 1.0;
    double rate = 1.0;
};

/// Normal with precision `tau`, truncated to x >= 0 and renormalised.
/// `mu` and `tau` are the parameters of the parent (untruncated) normal.
struct TruncatedNormalParams {
    double mu = 0.0;
    double tau = 1.0;
};

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Counter-seeded generator. Two instances built with the same (seed, stream)
/// produce bit-identical sequences on every platform and thread count; distinct
/// streams are statistically independent. Internally xoshiro256++ seeded
/// through a splitmix64 avalanche of (seed, stream).
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next();
    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos();
    /// Standard normal draw (Box-Muller; two uniforms per call).
    double normal();
    /// Uniform integer in [0, bound).
    std::uint64_t next_below(std::uint64_t bound);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t s_[4];
};

/// Stable stream ids for the per-parameter generators used by the samplers.
/// Row factors of the two- and three-matrix models share a slot so that runs
/// on equivalent states consume identical randomness.
namespace stream_slot {
inline constexpr std::uint64_t init = 0;
inline constexpr std::uint64_t row_factor = 1;  // U or F entries
inline constexpr std::uint64_t col_factor = 2;  // V or G entries
inline constexpr std::uint64_t mid_factor = 3;  // S entries
inline constexpr std::uint64_t tau = 4;
inline constexpr std::uint64_t ard_row = 5;
inline constexpr std::uint64_t ard_col = 6;
inline constexpr std::uint64_t data_gen = 7;
}  // namespace stream_slot

/// Encodes (slot, flat index) into a stream id.
constexpr std::uint64_t make_stream(std::uint64_t slot, std::uint64_t index) {
    return (slot << 48) | index;
}

/// Deterministic child-seed derivation for folds, repeats and grid points.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0,
                          std::uint64_t tag1 = 0, std::uint64_t tag2 = 0);

double sample_exponential(double rate, SeededRng& rng);
double sample_gamma(const GammaParams& params, SeededRng& rng);

/// Draw from the left-truncated normal. Exact for every parameter value:
/// plain rejection when the truncation point lies below the mean, a
/// translated-exponential rejection step otherwise (acceptance stays bounded
/// away from zero however far the mass sits in the tail).
double sample_truncated_normal(const TruncatedNormalParams& params,
                               SeededRng& rng);

/// Above this value of -mu*sqrt(tau) the closed-form moments switch to the
/// exponential tail approximation (mean 1/|mu*tau|, variance 1/(mu*tau)^2).
inline constexpr double kTnTailThreshold = 30.0;

/// Closed-form mean/variance of the truncated normal. Uses the hazard
/// function of the standard normal computed through a scaled complementary
/// error function, and the exponential approximation deep in the tail.
Moments tn_moments(const TruncatedNormalParams& params);

double tn_mode(const TruncatedNormalParams& params);
double gamma_mode(const GammaParams& params);  // requires shape >= 1
double gamma_mean(const GammaParams& params);

/// Digamma function for x > 0; relative accuracy ~1e-12 for x >= 1e-3.
double digamma(double x);

/// lambda(x) = phi(x) / (1 - Phi(x)), the standard normal hazard function.
/// Stable for arbitrarily large x.
double normal_hazard(double x);

/// Scaled complementary error function exp(y^2) erfc(y) for y >= 0.
double erfcx_positive(double y);

/// log(1 - Phi(x)) without underflow for large positive x.
double log_normal_sf(double x);

}  // namespace bnmtf
