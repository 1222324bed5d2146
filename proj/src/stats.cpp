#include "brw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace brw {

MeanSE mean_se(const std::vector<double>& v) {
    MeanSE out;
    out.n = v.size();
    if (v.empty()) return out;
    Neumaier s;
    for (double x : v) s.add(x);
    out.mean = s.get() / static_cast<double>(v.size());
    if (v.size() < 2) return out;
    Neumaier q;
    for (double x : v) {
        double d = x - out.mean;
        q.add(d * d);
    }
    double var = q.get() / static_cast<double>(v.size() - 1);
    out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(v.size()));
    return out;
}

Interval wilson(std::uint64_t hits, std::uint64_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    double nh = static_cast<double>(n);
    double p = static_cast<double>(hits) / nh;
    double z2 = z * z;
    double denom = 1.0 + z2 / nh;
    double center = (p + z2 / (2.0 * nh)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nh + z2 / (4.0 * nh * nh)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double log_sum_exp(const std::vector<double>& a) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : a) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    Neumaier s;
    for (double x : a) s.add(std::exp(x - m));
    return m + std::log(s.get());
}

// Continued fraction for the incomplete beta (Lentz's algorithm).
static double beta_cf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-15;
    const double fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

double beta_inc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double binom_cdf(std::int64_t k, std::uint64_t n, double p) {
    if (k < 0) return 0.0;
    if (static_cast<std::uint64_t>(k) >= n) return 1.0;
    // P(X <= k) = I_{1-p}(n-k, k+1)
    return beta_inc(static_cast<double>(n - k), static_cast<double>(k) + 1.0, 1.0 - p);
}

Interval binom_band(std::uint64_t n, double p, double alpha) {
    double tail = alpha / 2.0;
    // lo: largest L with P(X <= L-1) <= tail. CDF is nondecreasing in L.
    std::uint64_t lo = 0, hi = n;
    {
        std::uint64_t a = 0, b = n; // candidates for L
        while (a < b) {
            std::uint64_t mid = a + (b - a + 1) / 2;
            if (binom_cdf(static_cast<std::int64_t>(mid) - 1, n, p) <= tail)
                a = mid;
            else
                b = mid - 1;
        }
        lo = a;
    }
    {
        // hi: smallest H with 1 - P(X <= H) <= tail.
        std::uint64_t a = 0, b = n;
        while (a < b) {
            std::uint64_t mid = a + (b - a) / 2;
            if (1.0 - binom_cdf(static_cast<std::int64_t>(mid), n, p) <= tail)
                b = mid;
            else
                a = mid + 1;
        }
        hi = a;
    }
    return {static_cast<double>(lo), static_cast<double>(hi)};
}

std::vector<double> weighted_least_squares(const std::vector<std::vector<double>>& X,
                                           const std::vector<double>& y,
                                           const std::vector<double>& w,
                                           double* se0) {
    const std::size_t rows = X.size();
    if (rows == 0 || rows != y.size() || rows != w.size())
        throw std::invalid_argument("weighted_least_squares: shape mismatch");
    const std::size_t p = X[0].size();
    if (rows < p) throw std::invalid_argument("weighted_least_squares: underdetermined");

    // Normal equations A beta = b with A = X^T W X.
    std::vector<double> A(p * p, 0.0), b(p, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            b[j] += w[i] * X[i][j] * y[i];
            for (std::size_t k = 0; k < p; ++k) A[j * p + k] += w[i] * X[i][j] * X[i][k];
        }
    }

    // Invert A by Gauss-Jordan with partial pivoting (p is tiny).
    std::vector<double> inv(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) inv[i * p + i] = 1.0;
    std::vector<double> M = A;
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(M[r * p + col]) > std::abs(M[piv * p + col])) piv = r;
        if (std::abs(M[piv * p + col]) < 1e-300)
            throw std::runtime_error("weighted_least_squares: singular normal equations");
        if (piv != col) {
            for (std::size_t k = 0; k < p; ++k) {
                std::swap(M[piv * p + k], M[col * p + k]);
                std::swap(inv[piv * p + k], inv[col * p + k]);
            }
        }
        double d = M[col * p + col];
        for (std::size_t k = 0; k < p; ++k) {
            M[col * p + k] /= d;
            inv[col * p + k] /= d;
        }
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double f = M[r * p + col];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < p; ++k) {
                M[r * p + k] -= f * M[col * p + k];
                inv[r * p + k] -= f * inv[col * p + k];
            }
        }
    }

    std::vector<double> beta(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = 0; k < p; ++k) beta[j] += inv[j * p + k] * b[k];

    if (se0) {
        double var0 = inv[0];
        double chi2 = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            double pred = 0.0;
            for (std::size_t j = 0; j < p; ++j) pred += X[i][j] * beta[j];
            double res = y[i] - pred;
            chi2 += w[i] * res * res;
        }
        double dof = static_cast<double>(rows > p ? rows - p : 1);
        double inflate = std::max(1.0, chi2 / dof);
        *se0 = std::sqrt(std::max(var0, 0.0) * inflate);
    }
    return beta;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    if (v.size() % 2 == 1) return v[m];
    return 0.5 * (v[m - 1] + v[m]);
}

} // namespace brw
