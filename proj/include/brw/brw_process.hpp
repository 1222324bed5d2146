#pragma once

// Branching random walk: Galton-Watson tree with mu-steps on the edges.
// Every particle owns a deterministic lineage key; its offspring count and
// its birth step are pure functions of that key, so a tree is reproducible
// from the replica seed alone, independent of scheduling or traversal order,
// and coupled runs share randomness by construction.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "brw/group.hpp"
#include "brw/rng.hpp"
#include "brw/walk.hpp"

namespace brw {

struct OffspringLaw {
    std::map<int, double> pmf; // support >= 1 (no extinction)
    double rho = 0.0;          // mean offspring count
    std::vector<int> support;
    std::vector<double> cdf;
    int max_children = 0;
};

std::vector<std::string> offspring_law_violations(const std::map<int, double>& pmf,
                                                  bool require_supercritical = true);

// require_supercritical enforces rho > 1; switch it off for degenerate
// single-child processes used as couplings to the plain walk.
OffspringLaw make_offspring_law(std::map<int, double> pmf, bool require_supercritical = true);

int offspring_from_uniform(const OffspringLaw& pi, double u);

struct GenerationStats {
    long gen = 0;
    std::uint64_t population = 0;
    long max_disp = 0;
    long min_disp = 0;
    std::map<long, std::uint64_t> hist; // displacement counts, bucket width 1
};

struct BrwParticle {
    Word pos;
    long len = 0;
    std::uint64_t key = 0;
    bool stayed = true; // cone flag, used by stopping lines
};

struct BrwResult {
    std::vector<GenerationStats> gens; // gens[0] is the start generation
    bool truncated = false;
    long truncated_gen = -1;           // generation that would have exceeded the cap
    std::uint64_t attempted_pop = 0;   // its would-be size
    std::vector<BrwParticle> frontier; // final generation, when requested
};

// Breadth-first, no pruning: pruning would bias the displacement extremes,
// so exceeding pop_cap aborts with everything up to the previous generation
// retained and the result flagged truncated.
BrwResult simulate_brw(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi, long n,
                       std::uint64_t pop_cap, std::uint64_t replica_seed,
                       const Word& start = Word{}, bool keep_frontier = false);

// ---- test functions for many-to-one ----

struct TestFunction {
    enum Kind { One, IndicatorWord, IndicatorLenGe, ExpLen } kind = One;
    Word w;         // IndicatorWord
    long c = 0;     // IndicatorLenGe
    double t = 0.0; // ExpLen

    double eval(const FreeProduct& G, const Word& pos, long len) const;
    std::string describe() const;
};

struct ManyToOneReport {
    double lhs_mean = 0.0; // Monte Carlo E[sum over generation-n particles of f]
    double lhs_se = 0.0;
    double rhs = 0.0;      // rho^n E[f(Y_n)] from the exact convolution
    double z = 0.0;
    std::uint64_t replicas = 0;
    std::string f_desc;
};

ManyToOneReport many_to_one_check(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                  long n, const TestFunction& f, std::uint64_t replicas,
                                  std::uint64_t master_seed, int threads = 1,
                                  std::uint64_t pop_cap = 10'000'000,
                                  std::uint64_t conv_cap = 10'000'000);

// ---- stopping lines ----

struct ExitParticle {
    long gen = 0;      // |u|, the freezing generation
    long exit_len = 0; // |X_u| in [n, n + K)
    int suffix = 0;    // s(X_u)
    bool stayed = true;
};

struct StoppingLine {
    std::vector<ExitParticle> recs;
    std::uint64_t censored_live = 0; // lineages still inside the ball at gen_cap
    bool truncated = false;
};

// Freezes each lineage at its first exit from the ball of radius n. Cone
// violators keep evolving and freeze too, with stayed = false: filtering is
// the consumer's job, so one run serves every downstream selection.
StoppingLine stopping_line(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                           long n, double a, int i, long gen_cap, std::uint64_t pop_cap,
                           std::uint64_t replica_seed);

// ---- start coupling ----

struct CoupledGen {
    long gen = 0;
    long max_e = 0, min_e = 0; // run from the identity
    long max_x = 0, min_x = 0; // run from the shifted start
};

struct CoupleResult {
    std::vector<CoupledGen> gens;
    long shift_len = 0; // |x|
    bool bound_ok = true; // per-generation |max_x - max_e| <= |x| held pathwise
    bool truncated = false;
};

// Both runs share the tree and the steps (positions differ by the fixed left
// factor x), so the subadditivity bound is checked pathwise, not in law.
CoupleResult coupled_start_shift(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                 long n, const Word& x, std::uint64_t replica_seed,
                                 std::uint64_t pop_cap = 10'000'000);

} // namespace brw
