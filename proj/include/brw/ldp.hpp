#pragma once

// Large-deviation layer: scaled cumulant grids Lambda_n(t), extrapolation to
// the limit Lambda, the Legendre-Fenchel transform to the rate function I,
// structural property checks, and the v_max / v_min level solvers.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "brw/stats.hpp"
#include "brw/walk.hpp"

namespace brw {

// One battery entry: Lambda_n(t) for a single n, exact or Monte Carlo.
struct LambdaPoint {
    long n = 0;
    double value = 0.0;
    double se = 0.0;  // standard error of Lambda_n(t); 0 for exact
    double rel = 0.0; // relative standard error of the underlying mean; 0 for exact
    bool exact = true;
};

struct LambdaGrid {
    std::vector<double> t;
    std::vector<std::vector<LambdaPoint>> battery; // per t, ordered by n

    // Filled by lambda_limit:
    std::vector<double> lambda_hat;
    std::vector<double> lambda_se;
    std::vector<bool> extrapolated; // true when a fit produced the value (vs largest-n fallback)
    std::vector<bool> floored;      // true where the spectral floor was binding
    double floor_log_r = 0.0;
    bool floor_applied = false;
    std::vector<std::string> notes;
};

struct LambdaOptions {
    double t_min = -30.0;
    double t_max = 30.0;
    double dt = 0.01;
    std::vector<long> exact_ns = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
    std::vector<long> mc_ns = {50, 100, 200};
    std::uint64_t mc_replicas = 400'000;
    std::uint64_t support_cap = 10'000'000;
    int threads = 1;
};

// Single Lambda_n(t) evaluation. Exact: log-sum-exp over the exact length
// pmf, zero SE. MC: log of the empirical mean of e^{t|Y_n|} with delta-method
// SE, seeded from (master_seed, "lambda1|n=<n>", replica).
struct LambdaValue {
    double value = 0.0;
    double se = 0.0;
    bool exact = true;
};
LambdaValue lambda_n(const FreeProduct& G, const StepLaw& law, double t, long n, bool exact,
                     std::uint64_t replicas_or_cap, std::uint64_t master_seed, int threads = 1);

// Builds the full battery: exact length pmfs at opts.exact_ns, one shared
// length histogram per MC n (reused across the whole t grid). The top of the
// t range is extended (up to t = 120) until the achieved slope of the largest
// exact Lambda_n reaches K(1 - 1e-6), so the transform can cover x up to K.
LambdaGrid compute_lambda(const FreeProduct& G, const StepLaw& law, const LambdaOptions& opts,
                          std::uint64_t master_seed);

// Per-t extrapolation n -> infinity. Fits Lambda_n = Lambda + b/n + c log(n)/n
// by weighted least squares over a same-era point set: exact points with
// n > max(exact n)/2 (even n only for t < 0, killing the return-probability
// parity oscillation), MC points with relative SE below 0.2, then an era
// filter keeping n >= n_usable/8 so short-n points cannot lever the fit when
// long-n MC data is available. Fewer than 3 usable points falls back to the
// largest-n value. Afterwards: exact zero at t = 0, the spectral floor
// Lambda >= log(r) when floor_log_r is finite (Lambda_n(t) >= (1/n) log p_n
// for every t), and a nondecreasing-in-t isotonic clamp (e^{t|Y|} is
// pointwise nondecreasing in t). Convexity violations beyond 1e-6 are noted,
// not repaired.
void lambda_limit(LambdaGrid& grid,
                  double floor_log_r = -std::numeric_limits<double>::infinity());

// ---- rate function ----

struct RateFunction {
    std::vector<double> x;
    std::vector<double> I;        // +infinity where the slope range is exceeded
    std::vector<double> unc;      // Lambda SE at the maximizing t, propagated as-is
    std::vector<int> tag;         // 0 interior, 1 left-boundary plateau, 2 beyond slope range
    double beta_hat = 0.0;        // largest x with finite I (achieved upper endpoint)
    double ell = 0.0;             // argmin of I on the grid; callers may overwrite with a
                                  // drift estimate before property checks
    double neg_log_r = 0.0;       // I at x = 0
    bool refined = false;
    double slope_lo = 0.0, slope_hi = 0.0; // achieved slope range of Lambda on its grid
    std::vector<std::string> notes;

    // Inputs retained so solvers can evaluate the transform off-grid.
    std::vector<double> t_grid;
    std::vector<double> lambda;
    std::vector<double> lambda_se;
};

// I(x) = max over grid t of (x t - Lambda(t)). Ties take the smallest t. With
// refine on, a quadratic vertex correction is applied at interior maxima when
// the three-point stencil is strictly concave and the vertex stays inside the
// bracket; this reaches ~1e-8 accuracy on smooth inputs but injects spurious
// curvature at kinks (e.g. a binding spectral floor), so pipelines with a
// floored Lambda keep refine off: the unrefined transform is a pointwise max
// of affine functions of x and therefore exactly convex on the grid.
RateFunction legendre_transform(const std::vector<double>& t_grid,
                                const std::vector<double>& lambda,
                                const std::vector<double>& lambda_se,
                                const std::vector<double>& x_grid, bool refine);

// Conjugate on a grid: g(y) = max over s of (s y - f(s)), non-finite f
// entries skipped. Used for the double-transform self-consistency check.
std::vector<double> conjugate_on_grid(const std::vector<double>& s_grid,
                                      const std::vector<double>& f,
                                      const std::vector<double>& out_grid);

// ---- property checks ----

struct PropertyItem {
    std::string name;
    bool pass = false;
    std::string witness; // first counterexample, or the checked values
};

struct RatePropertyReport {
    std::vector<PropertyItem> items;
    bool all_pass = false;
};

// (i) the finite part is a contiguous interval starting at x = 0;
// (ii) I(ell) ~ 0 within zero_tol;
// (iii) I nondecreasing on [ell, beta_hat), strictly increasing across gaps
//       of at least strict_gap in x;
// (iv) I(x)/x nondecreasing there as well;
// plus a convexity item (discrete second differences >= -1e-6).
RatePropertyReport check_rate_properties(const RateFunction& I, double ell, double r_hat,
                                         double zero_tol = 5e-3, double strict_gap = 0.05);

// ---- speeds ----

struct SpeedSolution {
    double v_max = 0.0;
    Interval v_max_band;
    std::string v_max_tag; // "intersection" or "sup-domain"
    double v_min = 0.0;
    Interval v_min_band;
    std::string v_min_tag; // "intersection" or "zero"
    double log_rho = 0.0;
    std::vector<std::string> notes;
};

// v_max: largest x >= argmin with I(x) = log rho, bisected to 1e-6 on the
// increasing branch via off-grid transform evaluation; log rho above the
// branch top falls back to beta_hat with tag "sup-domain". v_min: 0 with tag
// "zero" when log rho > -log r_hat, else the crossing on the decreasing
// branch. Bands come from re-solving against Lambda +- its SE.
SpeedSolution solve_speeds(const RateFunction& I, double rho, double r_hat);

} // namespace brw
