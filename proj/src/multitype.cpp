#include "brw/multitype.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "brw/errors.hpp"
#include "brw/parallel.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

// ---- cone-exit census ----

ConeExitCensus sample_cone_exit_census(const FreeProduct& G, const StepLaw& law,
                                       const OffspringLaw& pi, int i, double a, long n,
                                       std::uint64_t pop_cap, std::uint64_t replica_seed,
                                       bool collect_words) {
    if (i < 1 || i > G.r()) throw MalformedInput("sample_cone_exit_census: bad factor index");
    if (n < 1) throw MalformedInput("sample_cone_exit_census: radius must be >= 1");
    if (!(a > 0.0)) throw MalformedInput("sample_cone_exit_census: speed a must be positive");

    ConeExitCensus cen;
    cen.root_type = i;
    cen.a = a;
    cen.n = n;
    cen.by_type.assign(std::size_t(G.r()) + 1, 0);

    // Particles counted at generation g need g <= n/a, so the budget is
    // floor(n/a); exits in any later generation would break that bound.
    const long H = long(std::floor(double(n) / a));
    const long K = G.max_letter_cost;

    struct Particle {
        std::vector<Letter> st;
        long len = 0;
        std::uint64_t key = 0;
    };
    std::vector<Particle> frontier(1);
    frontier[0].key = root_key(replica_seed);

    std::vector<Particle> next;
    for (long g = 1; g <= H && !frontier.empty(); ++g) {
        std::uint64_t attempted = 0;
        for (const auto& p : frontier)
            attempted += std::uint64_t(
                offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring)));
        if (attempted > pop_cap) {
            cen.truncated = true;
            break;
        }
        next.clear();
        next.reserve(attempted);
        for (const auto& p : frontier) {
            int kids = offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring));
            for (int c = 0; c < kids; ++c) {
                Particle ch;
                ch.key = child_key(p.key, std::uint64_t(c));
                Letter step = step_from_uniform(law, key_uniform(ch.key, kSlotStep));
                ch.st = p.st;
                ch.len = p.len;
                if (step.factor != 0) append_letter(G, ch.st, ch.len, step);
                if (!(ch.st.empty() || ch.st.front().factor != i)) {
                    ++cen.killed_cone;
                    continue;
                }
                if (ch.len >= n) {
                    int suf = int(ch.st.back().factor);
                    if (ch.len >= n + K) ++cen.lemma_violations; // single step overshoot bound
                    ++cen.by_type[std::size_t(suf)];
                    cen.recs.push_back({g, ch.len, suf});
                    if (collect_words) cen.words.push_back(Word{ch.st});
                    continue;
                }
                // Per-step length gain is at most K, so this lineage can no
                // longer reach n by generation H.
                if (ch.len + (H - g) * K < n) {
                    ++cen.killed_deadline;
                    continue;
                }
                next.push_back(std::move(ch));
            }
        }
        frontier.swap(next);
    }
    return cen;
}

// ---- mean offspring matrix ----

MeanMatrix estimate_mean_matrix(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                double a, long n, std::uint64_t replicas,
                                std::uint64_t master_seed, int threads, std::uint64_t pop_cap) {
    if (replicas < 100) throw MalformedInput("estimate_mean_matrix: needs >= 100 replicas");
    const int r = G.r();

    MeanMatrix mm;
    mm.a = a;
    mm.n = n;
    mm.r = r;
    mm.replicas = replicas;
    mm.M.assign(std::size_t(r) * r, 0.0);
    mm.SE.assign(std::size_t(r) * r, 0.0);
    mm.excluded_partial.assign(std::size_t(r), 0);
    mm.row_mean_census.assign(std::size_t(r), 0.0);

    const std::uint64_t chunk = 256;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    for (int i = 1; i <= r; ++i) {
        char tag[96];
        std::snprintf(tag, sizeof tag, "mtx|i=%d|a=%.17g|n=%ld", i, a, n);

        // Census counts are integers, so plain integer accumulators make the
        // result exact and independent of both summation order and threads.
        struct Partial {
            std::vector<std::uint64_t> sum, sumsq;
            std::uint64_t tot = 0, used = 0, excluded = 0;
        };
        std::vector<Partial> parts(jobs);
        parallel_for(jobs, threads, [&](std::uint64_t j) {
            Partial part;
            part.sum.assign(std::size_t(r), 0);
            part.sumsq.assign(std::size_t(r), 0);
            std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
            for (std::uint64_t rep = lo; rep < hi; ++rep) {
                auto cen = sample_cone_exit_census(G, law, pi, i, a, n, pop_cap,
                                                   stream_seed(master_seed, tag, rep));
                if (cen.truncated) {
                    ++part.excluded;
                    continue;
                }
                ++part.used;
                for (int jj = 1; jj <= r; ++jj) {
                    std::uint64_t z = cen.by_type[std::size_t(jj)];
                    part.sum[std::size_t(jj - 1)] += z;
                    part.sumsq[std::size_t(jj - 1)] += z * z;
                    part.tot += z;
                }
            }
            parts[j] = std::move(part);
        });

        std::vector<std::uint64_t> sum(std::size_t(r), 0), sumsq(std::size_t(r), 0);
        std::uint64_t tot = 0, used = 0;
        for (const auto& part : parts) {
            for (int jj = 0; jj < r; ++jj) {
                sum[std::size_t(jj)] += part.sum[std::size_t(jj)];
                sumsq[std::size_t(jj)] += part.sumsq[std::size_t(jj)];
            }
            tot += part.tot;
            used += part.used;
            mm.excluded_partial[std::size_t(i - 1)] += part.excluded;
        }
        if (used == 0) continue;
        for (int jj = 0; jj < r; ++jj) {
            double mean = double(sum[std::size_t(jj)]) / double(used);
            mm.M[std::size_t(i - 1) * r + std::size_t(jj)] = mean;
            if (used >= 2) {
                double var = (double(sumsq[std::size_t(jj)]) - double(used) * mean * mean) /
                             double(used - 1);
                mm.SE[std::size_t(i - 1) * r + std::size_t(jj)] =
                    std::sqrt(std::max(var, 0.0) / double(used));
            }
        }
        mm.row_mean_census[std::size_t(i - 1)] = double(tot) / double(used);
    }
    return mm;
}

// ---- Perron-Frobenius ----

namespace {

// One pass of left power iteration on a fixed matrix.
PerronCertificate perron_pass(const std::vector<double>& M, int r) {
    PerronCertificate pc;
    std::vector<double> v(std::size_t(r), 1.0 / double(r));
    std::vector<double> w(std::size_t(r), 0.0);
    for (std::uint64_t it = 1; it <= 10'000; ++it) {
        for (int j = 0; j < r; ++j) {
            Neumaier acc;
            for (int i = 0; i < r; ++i) acc.add(v[std::size_t(i)] * M[std::size_t(i) * r + std::size_t(j)]);
            w[std::size_t(j)] = acc.get();
        }
        double nu = 0.0;
        for (double x : w) nu += x;
        double resid = 0.0;
        for (int j = 0; j < r; ++j) resid += std::abs(w[std::size_t(j)] - nu * v[std::size_t(j)]);
        pc.nu = nu;
        pc.residual = resid;
        pc.iterations = it;
        if (nu == 0.0) { // the iterate died: nu = 0 with the last direction
            pc.converged = true;
            break;
        }
        for (int j = 0; j < r; ++j) v[std::size_t(j)] = w[std::size_t(j)] / nu;
        if (resid <= 1e-10 * std::max(1.0, nu)) {
            pc.converged = true;
            break;
        }
    }
    pc.left_evec = v;
    return pc;
}

} // namespace

PerronCertificate perron_eigenvalue(const std::vector<double>& M, int r) {
    if (r < 1 || M.size() != std::size_t(r) * std::size_t(r))
        throw MalformedInput("perron_eigenvalue: matrix shape mismatch");
    for (double x : M)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw MalformedInput("perron_eigenvalue: entries must be finite and nonnegative");

    PerronCertificate pc = perron_pass(M, r);
    if (!pc.converged) {
        // A reducible or periodic matrix can stall the iteration; a tiny
        // diagonal shift preserves the eigenvectors and adds exactly eps to
        // every eigenvalue.
        const double eps = 1e-12;
        std::vector<double> Ms = M;
        for (int i = 0; i < r; ++i) Ms[std::size_t(i) * r + std::size_t(i)] += eps;
        pc = perron_pass(Ms, r);
        pc.nu -= eps;
        pc.reducible_retry = true;
    }
    return pc;
}

// ---- certification ----

CertifiedCell certify_cell(const MeanMatrix& mm) {
    CertifiedCell cell;
    cell.a = mm.a;
    cell.n = mm.n;
    cell.matrix = mm;
    cell.central = perron_eigenvalue(mm.M, mm.r);

    std::vector<double> lo(mm.M.size()), hi(mm.M.size());
    for (std::size_t k = 0; k < mm.M.size(); ++k) {
        lo[k] = std::max(mm.M[k] - 3.0 * mm.SE[k], 0.0);
        hi[k] = mm.M[k] + 3.0 * mm.SE[k];
    }
    auto pl = perron_eigenvalue(lo, mm.r);
    auto ph = perron_eigenvalue(hi, mm.r);
    cell.nu_lo = pl.nu;
    cell.nu_hi = ph.nu;
    if (pl.converged && pl.nu > 1.0)
        cell.verdict = "supercritical";
    else if (ph.converged && ph.nu < 1.0)
        cell.verdict = "subcritical";
    else
        cell.verdict = "inconclusive";
    return cell;
}

CertificationReport certify_supercritical(const FreeProduct& G, const StepLaw& law,
                                          const OffspringLaw& pi,
                                          const std::vector<double>& a_grid,
                                          const std::vector<long>& n_grid,
                                          std::uint64_t replicas, std::uint64_t master_seed,
                                          int threads, std::uint64_t pop_cap) {
    if (a_grid.empty() || n_grid.empty())
        throw MalformedInput("certify_supercritical: empty grid");

    CertificationReport rep;
    rep.a_grid = a_grid;
    rep.n_grid = n_grid;
    std::sort(rep.n_grid.begin(), rep.n_grid.end());
    rep.n_grid.erase(std::unique(rep.n_grid.begin(), rep.n_grid.end()), rep.n_grid.end());

    for (double a : rep.a_grid) {
        long n0 = -1;
        bool stays = false;
        for (long n : rep.n_grid) {
            auto mm = estimate_mean_matrix(G, law, pi, a, n, replicas, master_seed, threads,
                                           pop_cap);
            rep.cells.push_back(certify_cell(mm));
            const auto& cell = rep.cells.back();
            if (cell.verdict == "supercritical") {
                if (n0 < 0) {
                    n0 = n;
                    stays = true;
                }
            } else if (n0 >= 0) {
                stays = false;
            }
        }
        rep.n0.push_back(n0);
        rep.stays.push_back(n0 >= 0 && stays);
    }
    return rep;
}

// ---- iterated survival ----

SurvivalResult simulate_multitype_survival(const FreeProduct& G, const StepLaw& law,
                                           const OffspringLaw& pi, int root_type, double a,
                                           long n, long m, std::uint64_t replicas,
                                           const MultitypeCaps& caps, std::uint64_t master_seed,
                                           int threads) {
    if (root_type < 1 || root_type > G.r())
        throw MalformedInput("simulate_multitype_survival: bad factor index");
    if (n < 1 || m < 1) throw MalformedInput("simulate_multitype_survival: n and m must be >= 1");
    if (!(a > 0.0)) throw MalformedInput("simulate_multitype_survival: speed a must be positive");
    if (replicas == 0) throw MalformedInput("simulate_multitype_survival: zero replicas");

    const int r = G.r();
    char tag[112];
    std::snprintf(tag, sizeof tag, "mts|i=%d|a=%.17g|n=%ld|m=%ld", root_type, a, n, m);

    struct Partial {
        std::uint64_t alive = 0, trunc = 0, lemma = 0, seam = 0;
        std::vector<std::uint64_t> counts; // m * r, level-major
    };
    const std::uint64_t chunk = 16;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    std::vector<Partial> parts(jobs);

    parallel_for(jobs, threads, [&](std::uint64_t j) {
        Partial part;
        part.counts.assign(std::size_t(m) * std::size_t(r), 0);

        struct LevelParticle {
            Word w;
            long len = 0;
            long cum_gen = 0;
            int type = 0;
            std::uint64_t key = 0;
        };
        std::vector<LevelParticle> cur, nxt;

        std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
        for (std::uint64_t rep = lo; rep < hi; ++rep) {
            cur.clear();
            cur.push_back({Word{}, 0, 0, root_type,
                           root_key(stream_seed(master_seed, tag, rep))});
            bool done = false;
            for (long level = 1; level <= m && !done; ++level) {
                nxt.clear();
                for (const auto& p : cur) {
                    auto cen = sample_cone_exit_census(G, law, pi, p.type, a, n, caps.pop_cap,
                                                       key_draw(p.key, kSlotCensus), true);
                    if (cen.truncated) {
                        ++part.trunc;
                        ++part.alive; // cannot rule survival out: count it alive
                        done = true;
                        break;
                    }
                    for (std::size_t k = 0; k < cen.recs.size(); ++k) {
                        const auto& rec = cen.recs[k];
                        LevelParticle ch;
                        ch.w = multiply(G, p.w, cen.words[k]);
                        ch.len = word_length(G, ch.w);
                        ch.cum_gen = p.cum_gen + rec.gen;
                        ch.type = rec.suffix;
                        ch.key = child_key(p.key, std::uint64_t(k));
                        // The relative word starts outside the suffix factor
                        // of p.w, so lengths must add exactly at the seam.
                        if (ch.len != p.len + rec.exit_len ||
                            suffix_type(G, ch.w) != rec.suffix)
                            ++part.seam;
                        if (ch.len < n * level ||
                            double(ch.cum_gen) > double(n) * double(level) / a + 1.0)
                            ++part.lemma;
                        nxt.push_back(std::move(ch));
                    }
                    if (nxt.size() > caps.level_cap) {
                        ++part.trunc;
                        ++part.alive;
                        done = true;
                        break;
                    }
                }
                if (done) break;
                if (nxt.empty()) {
                    done = true; // extinct
                    break;
                }
                for (const auto& p : nxt)
                    ++part.counts[std::size_t(level - 1) * std::size_t(r) +
                                  std::size_t(p.type - 1)];
                if (level == m) {
                    ++part.alive;
                    done = true;
                }
                cur.swap(nxt);
            }
        }
        parts[j] = std::move(part);
    });

    SurvivalResult res;
    res.replicas = replicas;
    std::vector<std::uint64_t> counts(std::size_t(m) * std::size_t(r), 0);
    for (const auto& part : parts) {
        res.alive += part.alive;
        res.truncated += part.trunc;
        res.lemma_violations += part.lemma;
        res.seam_violations += part.seam;
        for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += part.counts[k];
    }
    res.survival_freq = double(res.alive) / double(replicas);
    res.mean_type_counts.assign(std::size_t(m), std::vector<double>(std::size_t(r), 0.0));
    for (long lv = 0; lv < m; ++lv)
        for (int t = 0; t < r; ++t)
            res.mean_type_counts[std::size_t(lv)][std::size_t(t)] =
                double(counts[std::size_t(lv) * std::size_t(r) + std::size_t(t)]) /
                double(replicas);
    return res;
}

// ---- Galton-Watson extinction ----

double gw_extinction_prob(const std::vector<double>& size_pmf, int iterations) {
    if (size_pmf.empty()) throw MalformedInput("gw_extinction_prob: empty pmf");
    double sum = 0.0;
    for (double p : size_pmf) {
        if (!(p >= 0.0)) throw MalformedInput("gw_extinction_prob: negative mass");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw MalformedInput("gw_extinction_prob: pmf does not sum to 1");

    double s = 0.0;
    for (int it = 0; it < iterations; ++it) {
        double f = 0.0, pw = 1.0; // pw = s^k
        for (std::size_t k = 0; k < size_pmf.size(); ++k) {
            f += size_pmf[k] * pw;
            pw *= s;
        }
        if (std::abs(f - s) <= 1e-15) return f;
        s = f;
    }
    return s;
}

} // namespace brw
