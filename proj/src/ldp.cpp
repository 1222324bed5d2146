#include "brw/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "brw/errors.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log sum of exp(t*m + lw) over support entries (m, lw), max-shifted.
double lse_tilted(const std::vector<std::pair<long, double>>& sup, double t) {
    double mx = -kInf;
    for (const auto& [m, lw] : sup) mx = std::max(mx, t * double(m) + lw);
    Neumaier acc;
    for (const auto& [m, lw] : sup) acc.add(std::exp(t * double(m) + lw - mx));
    return mx + std::log(acc.get());
}

std::vector<std::pair<long, double>> log_support(const std::map<long, double>& pmf) {
    std::vector<std::pair<long, double>> sup;
    for (const auto& [m, p] : pmf)
        if (p > 0.0) sup.emplace_back(m, std::log(p));
    return sup;
}

// Lambda_n(t) and the relative SE of the tilted mean from a length histogram.
LambdaPoint mc_point(const std::vector<std::pair<long, double>>& sup, long n, double t,
                     std::uint64_t replicas) {
    LambdaPoint pt;
    pt.n = n;
    pt.exact = false;
    double lm1 = lse_tilted(sup, t);
    double lm2 = lse_tilted(sup, 2.0 * t);
    // Var(e^{t|Y|}) / mean^2 = m2/m1^2 - 1, all in log space for safety.
    double log_rel2 = lm2 - 2.0 * lm1;
    pt.rel = std::sqrt(std::max(std::expm1(log_rel2), 0.0) / double(replicas));
    pt.value = lm1 / double(n);
    pt.se = pt.rel / double(n);
    return pt;
}

std::vector<std::pair<long, double>> hist_log_support(const std::vector<std::uint64_t>& hist,
                                                      std::uint64_t replicas) {
    std::vector<std::pair<long, double>> sup;
    double logR = std::log(double(replicas));
    for (std::size_t m = 0; m < hist.size(); ++m)
        if (hist[m] > 0) sup.emplace_back(long(m), std::log(double(hist[m])) - logR);
    return sup;
}

std::vector<std::uint64_t> mc_length_hist(const FreeProduct& G, const StepLaw& law, long n,
                                          std::uint64_t replicas, std::uint64_t master_seed,
                                          int threads) {
    char tag[64];
    std::snprintf(tag, sizeof tag, "lambda|n=%ld", n);
    const std::size_t bins = static_cast<std::size_t>(n) * std::max(1, G.max_letter_cost) + 1;
    const std::uint64_t chunk = 4096;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    std::vector<std::vector<std::uint64_t>> parts(jobs);
    parallel_for(jobs, threads, [&](std::uint64_t j) {
        auto& h = parts[j];
        h.assign(bins, 0);
        std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
        for (std::uint64_t rep = lo; rep < hi; ++rep) {
            Xoshiro256pp rng(stream_seed(master_seed, tag, rep));
            WalkState w(G);
            for (long k = 0; k < n; ++k) w.step(sample_step(law, rng));
            ++h[static_cast<std::size_t>(w.len)];
        }
    });
    std::vector<std::uint64_t> hist(bins, 0);
    for (const auto& h : parts)
        for (std::size_t m = 0; m < bins; ++m) hist[m] += h[m];
    return hist;
}

std::vector<double> make_t_grid(double t_min, double t_max, double dt) {
    long cells = std::lround((t_max - t_min) / dt);
    std::vector<double> t(static_cast<std::size_t>(cells) + 1);
    for (long i = 0; i <= cells; ++i) t[static_cast<std::size_t>(i)] = t_min + double(i) * dt;
    return t;
}

} // namespace

LambdaValue lambda_n(const FreeProduct& G, const StepLaw& law, double t, long n, bool exact,
                     std::uint64_t replicas_or_cap, std::uint64_t master_seed, int threads) {
    if (n < 1) throw MalformedInput("lambda_n: n must be >= 1");
    LambdaValue out;
    if (exact) {
        auto d = exact_distribution(G, law, n, replicas_or_cap);
        auto sup = log_support(length_pmf(G, d));
        out.value = t == 0.0 ? 0.0 : lse_tilted(sup, t) / double(n);
        out.se = 0.0;
        out.exact = true;
        return out;
    }
    if (replicas_or_cap < 1000) throw MalformedInput("lambda_n: mc needs replicas >= 1000");
    auto hist = mc_length_hist(G, law, n, replicas_or_cap, master_seed, threads);
    auto sup = hist_log_support(hist, replicas_or_cap);
    auto pt = mc_point(sup, n, t, replicas_or_cap);
    out.value = t == 0.0 ? 0.0 : pt.value;
    out.se = pt.se;
    out.exact = false;
    return out;
}

LambdaGrid compute_lambda(const FreeProduct& G, const StepLaw& law, const LambdaOptions& opts,
                          std::uint64_t master_seed) {
    if (opts.exact_ns.empty()) throw MalformedInput("compute_lambda: need exact_ns");
    if (!(opts.dt > 0.0) || !(opts.t_max > opts.t_min))
        throw MalformedInput("compute_lambda: bad t range");

    // Exact length pmfs, captured along one convolution sweep.
    std::vector<long> exact_ns = opts.exact_ns;
    std::sort(exact_ns.begin(), exact_ns.end());
    std::vector<std::pair<long, std::vector<std::pair<long, double>>>> exact_sups;
    {
        ExactConvolver conv(G, law);
        std::size_t next = 0;
        for (long m = 1; m <= exact_ns.back(); ++m) {
            conv.advance(opts.support_cap);
            if (next < exact_ns.size() && exact_ns[next] == m) {
                exact_sups.emplace_back(m, log_support(length_pmf(G, conv.dist())));
                ++next;
            }
        }
    }

    // One shared Monte Carlo length histogram per n, reused across all t.
    std::vector<std::pair<long, std::vector<std::pair<long, double>>>> mc_sups;
    for (long n : opts.mc_ns)
        mc_sups.emplace_back(n, hist_log_support(
                                    mc_length_hist(G, law, n, opts.mc_replicas, master_seed,
                                                   opts.threads),
                                    opts.mc_replicas));

    const double K = double(std::max(1, G.max_letter_cost));
    double t_max = opts.t_max;
    LambdaGrid grid;
    for (;;) {
        grid.t = make_t_grid(opts.t_min, t_max, opts.dt);
        grid.battery.assign(grid.t.size(), {});
        for (std::size_t i = 0; i < grid.t.size(); ++i) {
            double t = grid.t[i];
            bool is_zero = std::abs(t) < opts.dt / 2.0;
            auto& pts = grid.battery[i];
            for (const auto& [n, sup] : exact_sups) {
                LambdaPoint pt;
                pt.n = n;
                pt.exact = true;
                pt.value = is_zero ? 0.0 : lse_tilted(sup, t) / double(n);
                pts.push_back(pt);
            }
            for (const auto& [n, sup] : mc_sups) {
                auto pt = mc_point(sup, n, t, opts.mc_replicas);
                if (is_zero) {
                    pt.value = 0.0;
                    pt.se = 0.0;
                    pt.rel = 0.0;
                }
                pts.push_back(pt);
            }
            std::stable_sort(pts.begin(), pts.end(),
                             [](const LambdaPoint& a, const LambdaPoint& b) { return a.n < b.n; });
        }
        // Achieved top slope of the largest exact n; extend t upward until the
        // transform can reach x near K (or the hard stop at t = 120).
        const auto& sup = exact_sups.back().second;
        long n_top = exact_sups.back().first;
        double s1 = lse_tilted(sup, t_max) / double(n_top);
        double s0 = lse_tilted(sup, t_max - opts.dt) / double(n_top);
        double slope = (s1 - s0) / opts.dt;
        if (slope >= K * (1.0 - 1e-6) || t_max >= 120.0) break;
        t_max = std::min(120.0, t_max + 10.0);
    }
    return grid;
}

void lambda_limit(LambdaGrid& grid, double floor_log_r) {
    const std::size_t T = grid.t.size();
    if (T == 0) throw MalformedInput("lambda_limit: empty grid");
    grid.lambda_hat.assign(T, 0.0);
    grid.lambda_se.assign(T, 0.0);
    grid.extrapolated.assign(T, false);
    grid.floored.assign(T, false);

    long max_exact_n = 0;
    for (const auto& pt : grid.battery.front())
        if (pt.exact) max_exact_n = std::max(max_exact_n, pt.n);

    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < T; ++i) {
        const double t = grid.t[i];
        std::vector<const LambdaPoint*> pts;
        for (const auto& pt : grid.battery[i]) {
            if (pt.exact) {
                if (2 * pt.n <= max_exact_n) continue;
                if (t < 0.0 && pt.n % 2 != 0) continue; // parity oscillation below zero
                pts.push_back(&pt);
            } else if (pt.rel < 0.2) {
                pts.push_back(&pt);
            }
        }
        if (!pts.empty()) {
            long n_usable = 0;
            for (auto* p : pts) n_usable = std::max(n_usable, p->n);
            std::erase_if(pts, [&](const LambdaPoint* p) { return double(p->n) < n_usable / 8.0; });
        }
        if (pts.size() < 3) {
            if (pts.empty()) {
                // Battery guarantees exact points unless the filters removed all;
                // fall back to the largest-n battery entry outright.
                const LambdaPoint* best = nullptr;
                for (const auto& pt : grid.battery[i])
                    if (!best || pt.n > best->n) best = &pt;
                if (!best) throw MalformedInput("lambda_limit: battery empty at a grid point");
                grid.lambda_hat[i] = best->value;
                grid.lambda_se[i] = best->se;
            } else {
                grid.lambda_hat[i] = pts.back()->value;
                grid.lambda_se[i] = pts.back()->se;
            }
            ++fallbacks;
            continue;
        }
        std::vector<std::vector<double>> X;
        std::vector<double> y, w;
        for (auto* p : pts) {
            double n = double(p->n);
            X.push_back({1.0, 1.0 / n, std::log(n) / n});
            y.push_back(p->value);
            double se = std::max(p->se, 1e-9);
            w.push_back(1.0 / (se * se));
        }
        double se0 = 0.0;
        try {
            auto beta = weighted_least_squares(X, y, w, &se0);
            grid.lambda_hat[i] = beta[0];
            grid.lambda_se[i] = se0;
            grid.extrapolated[i] = true;
        } catch (const std::exception&) {
            grid.lambda_hat[i] = pts.back()->value;
            grid.lambda_se[i] = pts.back()->se;
            ++fallbacks;
        }
    }

    // Lambda(0) = 0 exactly.
    for (std::size_t i = 0; i < T; ++i)
        if (std::abs(grid.t[i]) < 1e-12) {
            grid.lambda_hat[i] = 0.0;
            grid.lambda_se[i] = 0.0;
        }

    // Spectral floor: Lambda_n(t) >= (1/n) log p_n for every t, so the limit
    // is bounded below by log r.
    std::size_t floored_cells = 0;
    if (std::isfinite(floor_log_r)) {
        grid.floor_applied = true;
        grid.floor_log_r = floor_log_r;
        for (std::size_t i = 0; i < T; ++i)
            if (grid.lambda_hat[i] < floor_log_r) {
                grid.lambda_hat[i] = floor_log_r;
                grid.floored[i] = true;
                ++floored_cells;
            }
    }

    // Isotonic clamp: e^{t|Y|} is pointwise nondecreasing in t, hence so is
    // every Lambda_n and the limit.
    std::size_t clamped = 0;
    for (std::size_t i = 1; i < T; ++i)
        if (grid.lambda_hat[i] < grid.lambda_hat[i - 1]) {
            grid.lambda_hat[i] = grid.lambda_hat[i - 1];
            ++clamped;
        }

    std::size_t convexity_bad = 0;
    for (std::size_t i = 2; i < T; ++i)
        if (grid.lambda_hat[i] - 2.0 * grid.lambda_hat[i - 1] + grid.lambda_hat[i - 2] < -1e-6)
            ++convexity_bad;

    grid.notes.push_back("fit cells: " + std::to_string(T - fallbacks) + ", largest-n fallback: " +
                         std::to_string(fallbacks));
    if (grid.floor_applied)
        grid.notes.push_back("spectral floor binding on " + std::to_string(floored_cells) +
                             " cells");
    if (clamped) grid.notes.push_back("isotonic clamp adjusted " + std::to_string(clamped) + " cells");
    if (convexity_bad)
        grid.notes.push_back("convexity violations beyond 1e-6: " + std::to_string(convexity_bad));
}

// ---- Legendre transform ----

RateFunction legendre_transform(const std::vector<double>& t_grid,
                                const std::vector<double>& lambda,
                                const std::vector<double>& lambda_se,
                                const std::vector<double>& x_grid, bool refine) {
    const std::size_t T = t_grid.size();
    if (T < 3 || lambda.size() != T)
        throw MalformedInput("legendre_transform: need a t grid with at least 3 points");
    std::vector<double> se = lambda_se;
    if (se.empty()) se.assign(T, 0.0);
    if (se.size() != T) throw MalformedInput("legendre_transform: lambda_se size mismatch");

    RateFunction R;
    R.x = x_grid;
    R.refined = refine;
    R.t_grid = t_grid;
    R.lambda = lambda;
    R.lambda_se = se;
    R.slope_lo = (lambda[1] - lambda[0]) / (t_grid[1] - t_grid[0]);
    R.slope_hi = (lambda[T - 1] - lambda[T - 2]) / (t_grid[T - 1] - t_grid[T - 2]);

    R.I.resize(x_grid.size());
    R.unc.resize(x_grid.size());
    R.tag.resize(x_grid.size());
    for (std::size_t k = 0; k < x_grid.size(); ++k) {
        const double x = x_grid[k];
        std::size_t j = 0;
        double best = -kInf;
        for (std::size_t i = 0; i < T; ++i) {
            double f = x * t_grid[i] - lambda[i];
            if (f > best) { // strict: ties keep the smallest t
                best = f;
                j = i;
            }
        }
        R.unc[k] = se[j];
        if (j == T - 1) {
            // Slope range exhausted: x beyond the achieved upper slope.
            R.I[k] = kInf;
            R.tag[k] = 2;
            continue;
        }
        if (j == 0) {
            // Flat left end (e.g. a binding spectral floor): the sup over the
            // plateau equals the boundary value.
            R.I[k] = best;
            R.tag[k] = 1;
            continue;
        }
        R.tag[k] = 0;
        if (!refine) {
            R.I[k] = best;
            continue;
        }
        double f0 = x * t_grid[j - 1] - lambda[j - 1];
        double f2 = x * t_grid[j + 1] - lambda[j + 1];
        double denom = f0 - 2.0 * best + f2;
        double h = t_grid[j + 1] - t_grid[j];
        if (denom < 0.0) {
            double dt = 0.5 * h * (f0 - f2) / denom;
            // Quadratic vertex, only when it stays inside the stencil.
            R.I[k] = std::abs(dt) <= h ? best - (f0 - f2) * (f0 - f2) / (8.0 * denom) : best;
        } else {
            R.I[k] = best;
        }
    }

    R.beta_hat = -kInf;
    double imin = kInf;
    for (std::size_t k = 0; k < x_grid.size(); ++k) {
        if (!std::isfinite(R.I[k])) continue;
        R.beta_hat = std::max(R.beta_hat, x_grid[k]);
        if (R.I[k] < imin) {
            imin = R.I[k];
            R.ell = x_grid[k];
        }
    }
    R.neg_log_r = R.I.empty() ? 0.0 : R.I.front();

    char buf[128];
    std::snprintf(buf, sizeof buf, "achieved slope range [%.6g, %.6g]; beta_hat %.6g", R.slope_lo,
                  R.slope_hi, R.beta_hat);
    R.notes.emplace_back(buf);
    return R;
}

std::vector<double> conjugate_on_grid(const std::vector<double>& s_grid,
                                      const std::vector<double>& f,
                                      const std::vector<double>& out_grid) {
    std::vector<double> g(out_grid.size(), -kInf);
    for (std::size_t k = 0; k < out_grid.size(); ++k) {
        double y = out_grid[k];
        for (std::size_t i = 0; i < s_grid.size(); ++i) {
            if (!std::isfinite(f[i])) continue;
            g[k] = std::max(g[k], s_grid[i] * y - f[i]);
        }
    }
    return g;
}

// ---- property checks ----

RatePropertyReport check_rate_properties(const RateFunction& R, double ell, double r_hat,
                                         double zero_tol, double strict_gap) {
    RatePropertyReport rep;
    char buf[256];

    std::vector<std::size_t> fin;
    for (std::size_t k = 0; k < R.x.size(); ++k)
        if (std::isfinite(R.I[k])) fin.push_back(k);

    { // (i) finite part is a contiguous interval starting at 0
        PropertyItem it;
        it.name = "finite-interval";
        if (fin.empty()) {
            it.pass = false;
            it.witness = "no finite values";
        } else {
            bool contiguous = fin.back() - fin.front() + 1 == fin.size();
            bool starts_at_zero = fin.front() == 0;
            it.pass = contiguous && starts_at_zero;
            std::snprintf(buf, sizeof buf, "finite on x in [%.6g, %.6g]%s%s", R.x[fin.front()],
                          R.x[fin.back()], contiguous ? "" : "; interior gaps present",
                          starts_at_zero ? "" : "; does not start at the left grid edge");
            it.witness = buf;
        }
        rep.items.push_back(it);
    }

    auto nearest = [&](double x0) {
        std::size_t best = 0;
        double d = kInf;
        for (std::size_t k : fin)
            if (std::abs(R.x[k] - x0) < d) {
                d = std::abs(R.x[k] - x0);
                best = k;
            }
        return best;
    };

    if (!fin.empty()) { // (ii) zero at the drift
        PropertyItem it;
        it.name = "zero-at-drift";
        std::size_t ke = nearest(ell);
        it.pass = R.I[ke] <= zero_tol;
        std::snprintf(buf, sizeof buf, "I(%.6g) = %.3e (tolerance %.1e)", R.x[ke], R.I[ke],
                      zero_tol);
        it.witness = buf;
        rep.items.push_back(it);
    }

    if (!fin.empty()) { // (iii) nondecreasing on [ell, beta), strict across wide gaps
        PropertyItem it;
        it.name = "monotone-increasing";
        it.pass = true;
        std::vector<std::size_t> branch;
        for (std::size_t k : fin)
            if (R.x[k] >= ell - 1e-12) branch.push_back(k);
        for (std::size_t a = 1; a < branch.size() && it.pass; ++a) {
            if (R.I[branch[a]] < R.I[branch[a - 1]] - 1e-9) {
                it.pass = false;
                std::snprintf(buf, sizeof buf, "I decreases: I(%.6g)=%.6g > I(%.6g)=%.6g",
                              R.x[branch[a - 1]], R.I[branch[a - 1]], R.x[branch[a]],
                              R.I[branch[a]]);
                it.witness = buf;
            }
        }
        std::size_t b = 0;
        for (std::size_t a = 0; a < branch.size() && it.pass; ++a) {
            while (b < branch.size() && R.x[branch[b]] < R.x[branch[a]] + strict_gap) ++b;
            if (b >= branch.size()) break;
            if (!(R.I[branch[b]] > R.I[branch[a]])) {
                it.pass = false;
                std::snprintf(buf, sizeof buf,
                              "no strict increase over gap %.3g: I(%.6g)=%.6g vs I(%.6g)=%.6g",
                              strict_gap, R.x[branch[a]], R.I[branch[a]], R.x[branch[b]],
                              R.I[branch[b]]);
                it.witness = buf;
            }
        }
        if (it.pass) it.witness = "nondecreasing, strict across gaps of " + std::to_string(strict_gap);
        rep.items.push_back(it);
    }

    if (!fin.empty()) { // (iv) I(x)/x nondecreasing on the same branch
        PropertyItem it;
        it.name = "ratio-monotone";
        it.pass = true;
        double prev = -kInf;
        double prev_x = 0.0;
        for (std::size_t k : fin) {
            if (R.x[k] < ell - 1e-12 || R.x[k] <= 0.0) continue;
            double ratio = R.I[k] / R.x[k];
            if (ratio < prev - 1e-9) {
                it.pass = false;
                std::snprintf(buf, sizeof buf, "I/x decreases from %.6g (x=%.6g) to %.6g (x=%.6g)",
                              prev, prev_x, ratio, R.x[k]);
                it.witness = buf;
                break;
            }
            prev = ratio;
            prev_x = R.x[k];
        }
        if (it.pass) it.witness = "I(x)/x nondecreasing on the increasing branch";
        rep.items.push_back(it);
    }

    { // convexity of the finite part
        PropertyItem it;
        it.name = "convex";
        it.pass = true;
        double worst = 0.0;
        for (std::size_t a = 2; a < fin.size(); ++a) {
            // second difference on (possibly uneven) finite indices; the finite
            // part is contiguous when (i) holds, so spacing is uniform there
            double d2 = R.I[fin[a]] - 2.0 * R.I[fin[a - 1]] + R.I[fin[a - 2]];
            worst = std::min(worst, d2);
        }
        it.pass = worst >= -1e-6;
        std::snprintf(buf, sizeof buf, "min second difference %.3e (tolerance -1e-6)", worst);
        it.witness = buf;
        rep.items.push_back(it);
    }

    if (!fin.empty()) { // I(0) vs the spectral-radius estimate, 15% relative
        PropertyItem it;
        it.name = "i0-vs-spectral";
        double want = -std::log(r_hat);
        double got = R.I[fin.front()];
        it.pass = std::abs(got - want) <= 0.15 * std::abs(want) + 1e-12;
        std::snprintf(buf, sizeof buf, "I(0) = %.6g vs -log r_hat = %.6g", got, want);
        it.witness = buf;
        rep.items.push_back(it);
    }

    rep.all_pass = true;
    for (const auto& it : rep.items) rep.all_pass = rep.all_pass && it.pass;
    return rep;
}

// ---- speed solvers ----

namespace {

// Off-grid transform value against a shifted Lambda curve (shift in units of
// its pointwise SE); convex in x as a max of affine functions.
double transform_at(const RateFunction& R, double x, double shift) {
    double best = -kInf;
    for (std::size_t i = 0; i < R.t_grid.size(); ++i)
        best = std::max(best, x * R.t_grid[i] - (R.lambda[i] + shift * R.lambda_se[i]));
    return best;
}

// Bisection for transform == level on [lo, hi]; `increasing` gives the branch
// orientation. Both endpoints must bracket the level.
double bisect_level(const RateFunction& R, double shift, double lo, double hi, double level,
                    bool increasing) {
    for (int it = 0; it < 60 && hi - lo > 1e-6; ++it) {
        double mid = 0.5 * (lo + hi);
        double v = transform_at(R, mid, shift);
        bool below = v < level;
        if (below == increasing)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct BranchSolve {
    double v = 0.0;
    bool crossed = false;
};

// Largest crossing on the increasing branch [x_min, x_last]; falls back to
// the branch top when the level is never reached.
BranchSolve solve_upper(const RateFunction& R, double shift, double x_min, double x_last,
                        double level) {
    BranchSolve s;
    if (transform_at(R, x_last, shift) < level) {
        s.v = x_last;
        s.crossed = false;
        return s;
    }
    s.v = bisect_level(R, shift, x_min, x_last, level, true);
    s.crossed = true;
    return s;
}

// Smallest crossing on the decreasing branch [x_first, x_min].
BranchSolve solve_lower(const RateFunction& R, double shift, double x_first, double x_min,
                        double level) {
    BranchSolve s;
    if (transform_at(R, x_first, shift) < level) {
        s.v = x_first;
        s.crossed = false;
        return s;
    }
    s.v = bisect_level(R, shift, x_first, x_min, level, false);
    s.crossed = true;
    return s;
}

} // namespace

SpeedSolution solve_speeds(const RateFunction& R, double rho, double r_hat) {
    if (!(rho > 1.0)) throw MalformedInput("solve_speeds: rho must exceed 1");
    if (!(r_hat > 0.0) || !(r_hat <= 1.0))
        throw MalformedInput("solve_speeds: r_hat must lie in (0, 1]");

    SpeedSolution out;
    out.log_rho = std::log(rho);
    char buf[192];

    std::vector<std::size_t> fin;
    for (std::size_t k = 0; k < R.x.size(); ++k)
        if (std::isfinite(R.I[k])) fin.push_back(k);
    if (fin.empty()) throw MalformedInput("solve_speeds: rate function has no finite part");

    std::size_t j0 = fin.front();
    for (std::size_t k : fin)
        if (R.I[k] < R.I[j0]) j0 = k;
    const double x_min = R.x[j0];
    const double x_first = R.x[fin.front()];
    const double x_last = R.x[fin.back()];

    // v_max on the increasing branch.
    auto up0 = solve_upper(R, 0.0, x_min, x_last, out.log_rho);
    out.v_max = up0.v;
    out.v_max_tag = up0.crossed ? "intersection" : "sup-domain";
    // Lambda + se lowers I, pushing the crossing right; Lambda - se raises it.
    auto up_lo = solve_upper(R, -1.0, x_min, x_last, out.log_rho);
    auto up_hi = solve_upper(R, +1.0, x_min, x_last, out.log_rho);
    out.v_max_band = {std::min(up_lo.v, up0.v), std::max(up_hi.v, up0.v)};
    if (!up0.crossed) {
        std::snprintf(buf, sizeof buf,
                      "log rho %.6g exceeds I at the top of the finite part (%.6g at x=%.6g)",
                      out.log_rho, transform_at(R, x_last, 0.0), x_last);
        out.notes.emplace_back(buf);
    }

    // v_min: the zero case takes priority when log rho clears -log r_hat.
    const double neg_log_r = -std::log(r_hat);
    if (out.log_rho > neg_log_r) {
        out.v_min = 0.0;
        out.v_min_tag = "zero";
        out.v_min_band = {0.0, 0.0};
        std::snprintf(buf, sizeof buf, "zero case: log rho %.6g > -log r_hat %.6g (margin %.3g)",
                      out.log_rho, neg_log_r, out.log_rho - neg_log_r);
        out.notes.emplace_back(buf);
    } else {
        auto dn0 = solve_lower(R, 0.0, x_first, x_min, out.log_rho);
        out.v_min = dn0.v;
        out.v_min_tag = "intersection";
        auto dn_lo = solve_lower(R, +1.0, x_first, x_min, out.log_rho);
        auto dn_hi = solve_lower(R, -1.0, x_first, x_min, out.log_rho);
        out.v_min_band = {std::min(dn_lo.v, dn0.v), std::max(dn_hi.v, dn0.v)};
        if (!dn0.crossed)
            out.notes.emplace_back(
                "level not reached on the decreasing branch; left endpoint returned");
    }

    std::snprintf(buf, sizeof buf, "beta_hat (achieved) = %.6g; finite part [%.6g, %.6g]",
                  R.beta_hat, x_first, x_last);
    out.notes.emplace_back(buf);
    return out;
}

} // namespace brw
