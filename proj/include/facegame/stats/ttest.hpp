#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "facegame/error.hpp"

namespace facegame::stats {

namespace detail {

// Continued fraction for the incomplete beta function, evaluated with the
// modified Lentz method. Converges quickly for x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
inline double incomplete_beta(double a, double b, double x)
{
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df)
{
    if (!(df > 0.0)) throw DegenerateVariance("degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult
{
    double t = 0.0;
    int df = 0;
    double p = 1.0;
    std::size_t n = 0;
    double mean_a = 0.0, mean_b = 0.0;
    double sd_a = 0.0, sd_b = 0.0;
    double mean_diff = 0.0, sd_diff = 0.0; // of d = b - a
};

namespace detail {

inline void mean_sd(std::span<const double> v, double& mean, double& sd)
{
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

} // namespace detail

/// Paired two-sided t-test on d = b - a (sample standard deviation, df = n - 1).
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw LengthMismatch("paired samples differ in length: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) throw EmptyInput("paired t-test needs at least two pairs");
    TTestResult r;
    r.n = a.size();
    r.df = static_cast<int>(r.n) - 1;
    std::vector<double> d(r.n);
    double scale = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        d[i] = b[i] - a[i];
        scale = std::max(scale, std::abs(d[i]));
    }
    detail::mean_sd(a, r.mean_a, r.sd_a);
    detail::mean_sd(b, r.mean_b, r.sd_b);
    detail::mean_sd(d, r.mean_diff, r.sd_diff);
    // differences equal up to rounding count as constant
    if (r.sd_diff <= 1e-12 * scale || r.sd_diff == 0.0) throw DegenerateVariance("all paired differences are equal");
    r.t = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(r.n)));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

} // namespace facegame::stats
