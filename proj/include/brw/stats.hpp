#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace brw {

// Neumaier compensated summation. Keeps long probability accumulations below
// 1e-10 drift even over 1e7 terms.
struct Neumaier {
    double s = 0.0;
    double c = 0.0;

    void add(double x) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }

    double get() const { return s + c; }
};

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    std::uint64_t n = 0;
};

MeanSE mean_se(const std::vector<double>& v);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval for a binomial proportion at z standard deviations.
Interval wilson(std::uint64_t hits, std::uint64_t n, double z);

// log(sum(exp(a_i))) with max shift; -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& a);

// Regularized incomplete beta I_x(a,b) via Lentz continued fraction.
double beta_inc(double a, double b, double x);

// Exact binomial CDF P(X <= k) for X ~ Bin(n, p).
double binom_cdf(std::int64_t k, std::uint64_t n, double p);

// Two-sided acceptance band at per-test level alpha (each tail <= alpha/2):
// lo = largest L with P(X < L) <= alpha/2, hi = smallest H with P(X > H) <= alpha/2.
// A count outside [lo, hi] rejects at level alpha.
Interval binom_band(std::uint64_t n, double p, double alpha);

// Weighted least squares: minimize sum_i w_i (y_i - X_i . beta)^2.
// X is row-major, rows x params. Returns beta; if se0 is non-null it receives
// the standard error of beta[0] assuming w_i = 1 / sigma_i^2, inflated by
// sqrt(chi2/dof) when the fit is worse than the stated errors.
std::vector<double> weighted_least_squares(const std::vector<std::vector<double>>& X,
                                           const std::vector<double>& y,
                                           const std::vector<double>& w,
                                           double* se0 = nullptr);

// Median of a copy of v (average of middle two for even sizes).
double median(std::vector<double> v);

} // namespace brw
