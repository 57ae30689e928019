#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa,
               double b, double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double fa,
                double b, double fb, double m, double fm, double whole,
                double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, fa, m, fm, lm, flm);
    const double right = simpson(f, m, fm, b, fb, rm, frm);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, fa, m, fm, lm, flm, left, tol * 0.5, depth - 1) +
           adaptive(f, m, fm, b, fb, rm, frm, right, tol * 0.5, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = simpson(f, a, fa, b, fb, m, fm);
    return adaptive(f, a, fa, b, fb, m, fm, whole, tol, 60);
}

double integrate_refined(const std::function<double(double)>& f, double a,
                         double b, double tol, int panels) {
    // Uniform panels keep narrow peaks from slipping past the first coarse
    // Simpson estimate of a plain adaptive pass.
    double total = 0.0;
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p)
        total += integrate(f, a + p * width, a + (p + 1) * width, tol / panels);
    return total;
}

bnmtf::Moments tn_moments_quadrature(double mu, double tau) {
    const double sigma = 1.0 / std::sqrt(tau);
    // The density decays within a few sigma of max(mu, 0); for deep-left mu
    // the mass sits within ~40 / (|mu| tau) of the origin.
    double upper = std::max(mu, 0.0) + 15.0 * sigma;
    if (mu < 0.0) upper = std::min(upper, 60.0 / (-mu * tau) + sigma);
    // Normalise the peak to 1 so the adaptive tolerance is effectively
    // relative; the common factor cancels in the moment ratios.
    const double zpeak = (std::max(mu, 0.0) - mu) / sigma;
    const auto density = [&](double x) {
        const double z = (x - mu) / sigma;
        return std::exp(-0.5 * z * z + 0.5 * zpeak * zpeak);
    };
    const double tol = 1e-13 * upper;
    const double z0 = integrate_refined(density, 0.0, upper, tol, 64);
    const double z1 =
        integrate_refined([&](double x) { return x * density(x); }, 0.0, upper, tol, 64);
    const double z2 = integrate_refined([&](double x) { return x * x * density(x); },
                                        0.0, upper, tol, 64);
    const double mean = z1 / z0;
    return {mean, z2 / z0 - mean * mean};
}

double sample_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double c = cdf(xs[i]);
        d = std::max(d, std::abs(c - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
    }
    return d;
}

double ScalarPosterior::unnormalised(double u) const {
    if (u < 0.0) return 0.0;
    double expo = -rate * u;
    for (std::size_t c = 0; c < observations.size(); ++c) {
        const double d = observations[c] - u * basis[c];
        expo -= 0.5 * tau * d * d;
    }
    return std::exp(expo);
}

double ScalarPosterior::upper_limit() const {
    // Least-squares point plus a wide margin.
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < observations.size(); ++c) {
        num += observations[c] * basis[c];
        den += basis[c] * basis[c];
    }
    const double centre = den > 0.0 ? std::max(0.0, num / den) : 0.0;
    const double spread = den > 0.0 ? 1.0 / std::sqrt(tau * den) : 1.0 / rate;
    return centre + 12.0 * spread + 2.0 / rate;
}

double ScalarPosterior::normaliser(double upper) const {
    return integrate([&](double u) { return unnormalised(u); }, 0.0, upper, 1e-14);
}

double ScalarPosterior::mean(double upper) const {
    const double z = normaliser(upper);
    return integrate([&](double u) { return u * unnormalised(u); }, 0.0, upper, 1e-14) / z;
}

double ScalarPosterior::variance(double upper) const {
    const double z = normaliser(upper);
    const double m = mean(upper);
    const double m2 =
        integrate([&](double u) { return u * u * unnormalised(u); }, 0.0, upper, 1e-14) / z;
    return m2 - m * m;
}

std::vector<double> ScalarPosterior::equal_probability_edges(int bins,
                                                             double upper) const {
    const double z = normaliser(upper);
    std::vector<double> edges(bins + 1);
    edges[0] = 0.0;
    edges[bins] = upper;
    double lo = 0.0;
    double acc = 0.0;
    for (int b = 1; b < bins; ++b) {
        const double target = z * static_cast<double>(b) / bins;
        // Bisection on the cumulative integral from the previous edge.
        double a = lo, c = upper;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + c);
            const double cum =
                acc + integrate([&](double u) { return unnormalised(u); }, lo, mid, 1e-13);
            if (cum < target) a = mid;
            else c = mid;
        }
        edges[b] = 0.5 * (a + c);
        acc += integrate([&](double u) { return unnormalised(u); }, lo, edges[b], 1e-13);
        lo = edges[b];
    }
    return edges;
}

double chi2_equal_bins(const std::vector<double>& draws,
                       const std::vector<double>& edges) {
    const int bins = static_cast<int>(edges.size()) - 1;
    std::vector<int> counts(bins, 0);
    for (double d : draws) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), d);
        int b = static_cast<int>(it - edges.begin()) - 1;
        b = std::clamp(b, 0, bins - 1);
        ++counts[b];
    }
    const double expected = static_cast<double>(draws.size()) / bins;
    double stat = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double d = counts[b] - expected;
        stat += d * d / expected;
    }
    return stat;
}

namespace {

// Adaptive integration over a panelled range; panels keep narrow peaks from
// slipping past the coarse first Simpson estimate.
double integrate_panels(const std::function<double(double)>& f,
                        const std::vector<double>& edges, double tol) {
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p)
        total += integrate(f, edges[p], edges[p + 1], tol);
    return total;
}

}  // namespace

double log_evidence_1x1(double r, double rate, double a, double b) {
    // Nested quadrature over (v, u, tau); exponential priors keep the factor
    // mass within a few multiples of 1/rate.
    const double factor_upper = 25.0 / rate;
    const auto uv_mass = [&](double tau) {
        const auto v_integrand = [&](double v) {
            if (v <= 0.0) return 0.0;
            // The u-integrand peaks near r/v with width 1/(sqrt(tau) v);
            // integrate a window around it (intersected with the support).
            const double width = 1.0 / (std::sqrt(tau) * v);
            const double centre = r / v;
            const double lo = std::max(0.0, centre - 10.0 * width);
            const double hi = std::min(factor_upper, centre + 10.0 * width);
            double inner = 0.0;
            const auto u_integrand = [&](double u) {
                const double d = r - u * v;
                return std::sqrt(tau / (2.0 * M_PI)) * std::exp(-0.5 * tau * d * d) *
                       rate * std::exp(-rate * u);
            };
            if (hi > lo) inner += integrate(u_integrand, lo, hi, 1e-12);
            if (lo > 0.0) inner += integrate(u_integrand, 0.0, lo, 1e-12);
            if (hi < factor_upper) inner += integrate(u_integrand, hi, factor_upper, 1e-12);
            return inner * rate * std::exp(-rate * v);
        };
        std::vector<double> v_edges;
        for (int p = 0; p <= 8; ++p)
            v_edges.push_back(factor_upper * std::pow(2.0, p - 8.0));
        v_edges.insert(v_edges.begin(), 0.0);
        return integrate_panels(v_integrand, v_edges, 1e-11);
    };
    const auto tau_integrand = [&](double tau) {
        if (tau <= 0.0) return 0.0;
        const double prior = std::pow(b, a) / std::tgamma(a) * std::pow(tau, a - 1.0) *
                             std::exp(-b * tau);
        return prior * uv_mass(tau);
    };
    const std::vector<double> tau_edges = {1e-7, 0.125, 0.25, 0.5, 1.0, 1.5, 2.0,
                                           3.0,  4.0,   6.0,  9.0, 14.0, 24.0, 60.0};
    const double mass = integrate_panels(tau_integrand, tau_edges, 1e-9);
    return std::log(mass);
}

}  // namespace oracles
