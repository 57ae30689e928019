#include "bnmtf/random.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bnmtf {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr double kTwoPi = 6.283185307179586;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
    std::uint64_t state = seed;
    std::uint64_t mixed = splitmix64(state);
    state = stream ^ rotl(mixed, 17);
    s_[0] = splitmix64(state);
    s_[1] = splitmix64(state);
    s_[2] = splitmix64(state);
    s_[3] = splitmix64(state);
}

std::uint64_t SeededRng::next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double SeededRng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_pos() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
}

double SeededRng::normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t SeededRng::next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
    return next() % bound;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0,
                          std::uint64_t tag1, std::uint64_t tag2) {
    std::uint64_t state = base;
    std::uint64_t acc = splitmix64(state);
    state = acc ^ rotl(tag0, 11);
    acc = splitmix64(state);
    state = acc ^ rotl(tag1, 29);
    acc = splitmix64(state);
    state = acc ^ rotl(tag2, 43);
    return splitmix64(state);
}

double sample_exponential(double rate, SeededRng& rng) {
    if (!(rate > 0.0)) throw std::invalid_argument("sample_exponential: rate must be > 0");
    return -std::log(rng.uniform_pos()) / rate;
}

double sample_gamma(const GammaParams& params, SeededRng& rng) {
    if (!(params.shape > 0.0) || !(params.rate > 0.0))
        throw std::invalid_argument("sample_gamma: shape and rate must be > 0");
    double alpha = params.shape;
    double boost = 1.0;
    if (alpha < 1.0) {
        // Gamma(a) = Gamma(a+1) * U^{1/a}
        boost = std::pow(rng.uniform_pos(), 1.0 / alpha);
        alpha += 1.0;
    }
    // Marsaglia-Tsang squeeze method for shape >= 1.
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform_pos();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return boost * d * v / params.rate;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
            return boost * d * v / params.rate;
    }
}

double sample_truncated_normal(const TruncatedNormalParams& params,
                               SeededRng& rng) {
    if (!(params.tau > 0.0))
        throw std::invalid_argument("sample_truncated_normal: tau must be > 0");
    const double sigma = 1.0 / std::sqrt(params.tau);
    const double alpha = -params.mu / sigma;  // standardised truncation point
    double z;
    if (alpha <= 0.0) {
        // Truncation below the mean: plain rejection, acceptance >= 1/2.
        do {
            z = rng.normal();
        } while (z < alpha);
    } else {
        // Translated-exponential rejection (Robert 1995).
        const double a = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
        for (;;) {
            z = alpha - std::log(rng.uniform_pos()) / a;
            const double diff = z - a;
            if (std::log(rng.uniform_pos()) <= -0.5 * diff * diff) break;
        }
    }
    const double x = params.mu + sigma * z;
    return x < 0.0 ? 0.0 : x;
}

double erfcx_positive(double y) {
    if (y < 0.0) throw std::invalid_argument("erfcx_positive: y must be >= 0");
    if (y < 25.0) {
        // exp(y^2) stays below overflow and erfc(y) above underflow here.
        return std::exp(y * y) * std::erfc(y);
    }
    // Asymptotic series erfcx(y) ~ (1/(y sqrt(pi))) sum (-1)^k (2k-1)!! / (2y^2)^k.
    const double inv2y2 = 1.0 / (2.0 * y * y);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 10; ++k) {
        term *= -(2.0 * k - 1.0) * inv2y2;
        sum += term;
    }
    return sum / (y * 1.7724538509055159);  // sqrt(pi)
}

double normal_hazard(double x) {
    if (x < 0.0) {
        // 1 - Phi(x) >= 1/2, no cancellation: evaluate directly.
        const double pdf = std::exp(-0.5 * x * x) / kSqrt2Pi;
        const double sf = 0.5 * std::erfc(x / kSqrt2);
        return pdf / sf;
    }
    // lambda(x) = sqrt(2/pi) / erfcx(x / sqrt(2))
    return 0.7978845608028654 / erfcx_positive(x / kSqrt2);
}

double log_normal_sf(double x) {
    if (x < 0.0) return std::log(0.5 * std::erfc(x / kSqrt2));
    return std::log(0.5 * erfcx_positive(x / kSqrt2)) - 0.5 * x * x;
}

Moments tn_moments(const TruncatedNormalParams& params) {
    if (!(params.tau > 0.0))
        throw std::invalid_argument("tn_moments: tau must be > 0");
    const double sqrt_tau = std::sqrt(params.tau);
    const double alpha = -params.mu * sqrt_tau;
    if (alpha > kTnTailThreshold) {
        // Exponential tail regime: TN(mu, tau) ~ Exp(|mu tau|).
        const double rate = -params.mu * params.tau;
        return {1.0 / rate, 1.0 / (rate * rate)};
    }
    const double lam = normal_hazard(alpha);
    const double delta = lam * (lam - alpha);
    const double mean = params.mu + lam / sqrt_tau;
    double variance = (1.0 - delta) / params.tau;
    if (variance < 0.0) variance = 0.0;
    return {mean, variance};
}

double tn_mode(const TruncatedNormalParams& params) {
    if (!(params.tau > 0.0))
        throw std::invalid_argument("tn_mode: tau must be > 0");
    return params.mu > 0.0 ? params.mu : 0.0;
}

double gamma_mode(const GammaParams& params) {
    if (!(params.shape >= 1.0))
        throw std::invalid_argument("gamma_mode: requires shape >= 1");
    if (!(params.rate > 0.0))
        throw std::invalid_argument("gamma_mode: rate must be > 0");
    return (params.shape - 1.0) / params.rate;
}

double gamma_mean(const GammaParams& params) {
    if (!(params.shape > 0.0) || !(params.rate > 0.0))
        throw std::invalid_argument("gamma_mean: shape and rate must be > 0");
    return params.shape / params.rate;
}

double digamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("digamma: x must be > 0");
    double result = 0.0;
    // Recurrence psi(x) = psi(x+1) - 1/x until the asymptotic series applies.
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 -
                      inv2 * (1.0 / 120.0 -
                              inv2 * (1.0 / 252.0 -
                                      inv2 * (1.0 / 240.0 -
                                              inv2 * (1.0 / 132.0 -
                                                      inv2 * 691.0 / 32760.0)))));
    return result;
}

}  // namespace bnmtf
