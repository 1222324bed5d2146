#pragma once

// The multitype process of fast, cone-confined first-exit particles: census
// sampling, mean offspring matrix with errors, Perron-Frobenius certificates,
// and iterated survival simulation.

#include <cstdint>
#include <string>
#include <vector>

#include "brw/brw_process.hpp"
#include "brw/group.hpp"
#include "brw/walk.hpp"

namespace brw {

struct CensusRecord {
    long gen = 0;
    long exit_len = 0; // in [n, n + K)
    int suffix = 0;    // the type j
};

struct ConeExitCensus {
    int root_type = 0;
    double a = 0.0;
    long n = 0;
    std::vector<std::uint64_t> by_type; // index 1..r; [0] unused
    std::vector<CensusRecord> recs;
    std::vector<Word> words; // aligned with recs when collected
    bool truncated = false;
    std::uint64_t killed_cone = 0;     // lineages killed for leaving C(root_type)
    std::uint64_t killed_deadline = 0; // lineages that could no longer exit in time
    std::uint64_t lemma_violations = 0; // counted particles violating the m = 1 bounds
};

// Runs floor(n/a) generations from e: a census particle must exit B_n within
// that budget while every ancestor position stays in C(i), so lineages are
// killed the moment they violate the cone or fall beyond reach of the
// deadline (len < n - K * generations_left). Because each particle's
// randomness is keyed to its lineage, the kills do not perturb surviving
// lineages: the census equals a post-filtered stopping_line run pathwise.
ConeExitCensus sample_cone_exit_census(const FreeProduct& G, const StepLaw& law,
                                       const OffspringLaw& pi, int i, double a, long n,
                                       std::uint64_t pop_cap, std::uint64_t replica_seed,
                                       bool collect_words = false);

struct MeanMatrix {
    double a = 0.0;
    long n = 0;
    int r = 0;
    std::vector<double> M;  // r x r, row-major, M[(i-1)*r + (j-1)]
    std::vector<double> SE; // same layout
    std::uint64_t replicas = 0; // per root type, before exclusions
    std::vector<std::uint64_t> excluded_partial; // truncated censuses per root type
    std::vector<double> row_mean_census;         // mean #Z_i over the same replicas
};

MeanMatrix estimate_mean_matrix(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                double a, long n, std::uint64_t replicas,
                                std::uint64_t master_seed, int threads = 1,
                                std::uint64_t pop_cap = 10'000'000);

struct PerronCertificate {
    double nu = 0.0;
    std::vector<double> left_evec; // nonnegative, sums to 1
    double residual = 0.0;         // L1 residual of the eigen equation
    std::uint64_t iterations = 0;
    bool converged = false;
    bool reducible_retry = false; // second pass on M + 1e-12 I was needed
};

// Left power iteration; residual target 1e-10 relative, 1e4 iteration cap.
PerronCertificate perron_eigenvalue(const std::vector<double>& M, int r);

struct CertifiedCell {
    double a = 0.0;
    long n = 0;
    MeanMatrix matrix;
    PerronCertificate central;
    double nu_lo = 0.0; // Perron value of max(M - 3 SE, 0)
    double nu_hi = 0.0; // Perron value of M + 3 SE
    std::string verdict; // "supercritical", "subcritical", "inconclusive"
};

// nu is monotone in the entrywise order of nonnegative matrices, so shifted
// matrices give a conservative two-sided band for the verdict.
CertifiedCell certify_cell(const MeanMatrix& mm);

struct CertificationReport {
    std::vector<CertifiedCell> cells; // a-major, n increasing within a
    std::vector<double> a_grid;
    std::vector<long> n_grid;
    std::vector<long> n0;            // per a: smallest supercritical n, -1 if none
    std::vector<bool> stays;         // per a: verdict stays supercritical beyond n0
};

CertificationReport certify_supercritical(const FreeProduct& G, const StepLaw& law,
                                          const OffspringLaw& pi,
                                          const std::vector<double>& a_grid,
                                          const std::vector<long>& n_grid,
                                          std::uint64_t replicas, std::uint64_t master_seed,
                                          int threads = 1, std::uint64_t pop_cap = 10'000'000);

struct MultitypeCaps {
    std::uint64_t pop_cap = 10'000'000; // within one census BRW
    std::uint64_t level_cap = 100'000;  // particles per multitype generation
};

struct SurvivalResult {
    double survival_freq = 0.0;       // replicas alive at level m (truncated count as alive)
    std::uint64_t alive = 0;
    std::uint64_t truncated = 0;      // replicas stopped by a cap, reported separately
    std::vector<std::vector<double>> mean_type_counts; // [level][type-1], levels 1..m
    std::uint64_t lemma_violations = 0; // |X_v| >= n*level or cum gens <= n*level/a + 1 broken
    std::uint64_t seam_violations = 0;  // |X_u w| != |X_u| + |w| at a census seam
    std::uint64_t replicas = 0;
};

// Iterates the census level by level with fresh randomness per particle (the
// branching property makes the subtrees independent). Positions are absolute:
// each level-k particle carries X_v with |X_v| >= n k, checked exactly, and
// the seam identity |X_u w| = |X_u| + |w| is asserted for every child (the
// cone constraint forbids cancellation at the seam).
SurvivalResult simulate_multitype_survival(const FreeProduct& G, const StepLaw& law,
                                           const OffspringLaw& pi, int root_type, double a,
                                           long n, long m, std::uint64_t replicas,
                                           const MultitypeCaps& caps, std::uint64_t master_seed,
                                           int threads = 1);

// Extinction probability of a single-type Galton-Watson process with the
// given offspring size pmf: smallest fixed point of the generating function,
// by monotone iteration from 0.
double gw_extinction_prob(const std::vector<double>& size_pmf, int iterations = 10'000);

} // namespace brw
