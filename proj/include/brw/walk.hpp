#pragma once

// Single random walk with a factor-mixture step law: simulation, exact n-step
// distributions by convolution, exit times through spheres and cones, and
// estimation of the drift and the spectral radius.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "brw/group.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

// ---- step law ----

struct StepAtom {
    Letter l;       // {0,0} encodes the aggregated identity atom
    double p = 0.0;
};

// mu = sum_k alpha_k mu_k. Each mu_k is a pmf over all elements of factor k,
// identity mass allowed. K is the max word length over the support.
struct StepLaw {
    std::vector<double> alphas;
    std::vector<std::vector<double>> factor_laws;
    int K = 0;
    double identity_mass = 0.0;
    std::vector<StepAtom> atoms; // non-identity atoms, then one identity atom if its mass > 0
    std::vector<double> cdf;     // inclusive running sums over atoms; back() == 1 exactly
};

// Every violation, with a witness: alpha_k > 0 for all k, sums within 1e-12,
// no negative masses, sizes matching the group. Empty means valid.
std::vector<std::string> step_law_violations(const FreeProduct& G,
                                             const std::vector<double>& alphas,
                                             const std::vector<std::vector<double>>& factor_laws);

StepLaw make_step_law(const FreeProduct& G,
                      std::vector<double> alphas,
                      std::vector<std::vector<double>> factor_laws);

// Uniform step on the union of the factor generating sets (alpha_k
// proportional to |S_k|, mu_k uniform on S_k). On (Z/2Z)*r this is the
// simple random walk on the r-regular tree.
StepLaw srw_on_generators(const FreeProduct& G);

// One draw from mu; {0,0} means the identity.
Letter sample_step(const StepLaw& law, Xoshiro256pp& rng);

// The same draw from a single uniform, for counter-based particle streams.
Letter step_from_uniform(const StepLaw& law, double u);

// ---- walking ----

// Current position as a reduced-letter stack with cached length. step() costs
// O(1); word() materializes a copy.
struct WalkState {
    const FreeProduct* G = nullptr;
    std::vector<Letter> st;
    long len = 0;

    explicit WalkState(const FreeProduct& g) : G(&g) {}
    void reset() { st.clear(); len = 0; }
    void set(const Word& w) {
        st = w.letters;
        len = word_length(*G, w);
    }
    void step(Letter l) {
        if (l.factor == 0) return; // identity step
        append_letter(*G, st, len, l);
    }
    int suffix() const { return st.empty() ? 0 : st.back().factor; }
    Word word() const { return Word{st}; }
};

struct WalkPath {
    std::vector<Word> positions; // filled only when requested
    std::vector<long> lengths;   // lengths[k] = |Y_k|, k = 0..n
    std::vector<int> suffix_types;
};

WalkPath simulate_walk(const FreeProduct& G, const StepLaw& law, long n, Xoshiro256pp& rng,
                       bool record_words = false);

// ---- exact distributions ----

struct ExactDistribution {
    long n = 0;
    std::unordered_map<Word, double, WordHash> support;
};

// Iterates mu-convolution one step at a time so callers can walk the whole
// sequence P_1, P_2, ... without recomputing prefixes.
class ExactConvolver {
public:
    ExactConvolver(const FreeProduct& G, const StepLaw& law);
    void advance(std::uint64_t cap); // one step; throws CapExceeded
    const ExactDistribution& dist() const { return cur_; }

private:
    const FreeProduct& G_;
    const StepLaw& law_;
    ExactDistribution cur_;
};

ExactDistribution exact_distribution(const FreeProduct& G, const StepLaw& law, long n,
                                     std::uint64_t cap);

// Marginal of |Y_n| as an ordered pmf.
std::map<long, double> length_pmf(const FreeProduct& G, const ExactDistribution& d);

// ---- spectral radius ----

struct SpectralEstimate {
    std::vector<long> ns;       // the even step counts 2, 4, ..., n_max
    std::vector<double> p2n;    // return probabilities p_{2n}
    std::vector<double> raw;    // p_{2n}^{1/(2n)}
    double last_raw = 0.0;
    double cauchy_gap = 0.0;    // raw.back() - raw[end-2]
    double estimate = 0.0;      // bias-corrected fit; last_raw when the fit is infeasible
    Interval interval;          // heuristic bracket, not a certified bound
    bool p2n_monotone = true;   // nonincreasing after the first entry
    std::string notes;
};

// p_{2n} is computed from the half convolution via p_{2n} = sum_w P_n(w) P_n(w^{-1}),
// so only n_max/2 convolution steps are needed. The point estimate fits
// log p_{2n} = c0 + (2n) log r + c2 log(2n) + c3/(2n) on the upper half of the
// sequence; the raw sequence converges like exp(-c log(n)/n) and is reported
// alongside for honesty about the finite-n gap.
SpectralEstimate estimate_spectral_radius(const FreeProduct& G, const StepLaw& law, long n_max,
                                          std::uint64_t cap = 10'000'000);

// ---- drift ----

struct DriftEstimate {
    double mean = 0.0;  // windowed increment estimator (|Y_n| - |Y_{n/2}|) / (n - n/2)
    double se = 0.0;
    double naive_mean = 0.0; // |Y_n|/n, biased upward by the Green-function boundary term
    double naive_se = 0.0;
    std::vector<double> exact_ratio; // E|Y_m|/m for m = 1..m_max, from exact convolution
    long n = 0;
    std::uint64_t replicas = 0;
};

// The naive mean E|Y_n|/n carries an O(1/n) positive bias that dwarfs the
// Monte Carlo standard error at large replica counts; the windowed estimator
// cancels the boundary term. Both are reported.
DriftEstimate estimate_drift(const FreeProduct& G, const StepLaw& law, long n,
                             std::uint64_t replicas, std::uint64_t master_seed, int threads = 1,
                             long m_max = 10, std::uint64_t cap = 10'000'000);

// ---- exits ----

struct ExitRecord {
    long t_n = -1;        // first k with |Y_k| >= n; -1 when censored
    bool censored = false;
    bool hit_fast = false;       // T_n <= floor(n/a)
    bool stayed_in_cone = false; // Y_k in C(i) for 1 <= k <= T_n (prefix seen, when censored)
    int exit_suffix = 0;         // s(Y_{T_n}); 0 when censored
};

ExitRecord sample_exit(const FreeProduct& G, const StepLaw& law, long n, double a, int i,
                       long step_cap, Xoshiro256pp& rng);

struct ExitCell {
    long n = 0;
    long horizon = 0; // floor(n/a)
    std::uint64_t replicas = 0;
    std::uint64_t hits_plain = 0;       // T_n <= horizon
    std::uint64_t hits_cone = 0;        // ... and the path stayed in C(i)
    std::uint64_t hits_len_at_horizon = 0; // |Y_horizon| >= n
    double rate_plain = 0.0;            // -(1/n) log(hits/replicas)
    Interval band_plain;                // Wilson interval mapped through the rate
    double rate_cone = 0.0;
    Interval band_cone;
    bool zero_plain = false; // no successes: rate is a lower bound at the Wilson edge
    bool zero_cone = false;
    std::uint64_t sandwich_violations = 0; // |Y_horizon| >= n but T_n > horizon (must stay 0)
};

struct ExitCurve {
    double a = 0.0;
    int cone = 0;
    std::vector<ExitCell> cells;
};

// Walks exactly floor(n/a) steps per replica so the containment
// P(|Y_horizon| >= n) <= P(T_n <= horizon) can be checked pathwise.
ExitCurve exit_rate_curve(const FreeProduct& G, const StepLaw& law, double a, int i,
                          const std::vector<long>& n_grid, std::uint64_t replicas,
                          std::uint64_t master_seed, int threads = 1);

// ---- exact vs empirical band check ----

struct BandCheck {
    std::uint64_t cells = 0;      // support size plus the complement bucket
    std::uint64_t violations = 0; // counts outside their simultaneous band
    std::vector<std::string> examples;
};

// Simultaneous level-alpha check: per-cell exact binomial bands at Bonferroni
// level alpha / cells, so the whole-table false-alarm rate stays below alpha.
BandCheck band_check(const FreeProduct& G, const ExactDistribution& exact,
                     const std::unordered_map<Word, std::uint64_t, WordHash>& counts,
                     std::uint64_t n_draws, double alpha = 0.0027);

} // namespace brw
