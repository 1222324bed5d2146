#include "brw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "brw/errors.hpp"
#include "brw/parallel.hpp"

namespace brw {

// ---- step law ----

std::vector<std::string> step_law_violations(const FreeProduct& G,
                                             const std::vector<double>& alphas,
                                             const std::vector<std::vector<double>>& factor_laws) {
    std::vector<std::string> bad;
    const std::size_t r = static_cast<std::size_t>(G.r());
    if (alphas.size() != r)
        bad.push_back("alphas has " + std::to_string(alphas.size()) + " entries, expected " +
                      std::to_string(r));
    if (factor_laws.size() != r)
        bad.push_back("factor_laws has " + std::to_string(factor_laws.size()) +
                      " entries, expected " + std::to_string(r));
    if (!bad.empty()) return bad;

    double asum = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
        if (!(alphas[k] > 0.0))
            bad.push_back("alpha_" + std::to_string(k + 1) + " = " + std::to_string(alphas[k]) +
                          " must be positive");
        asum += alphas[k];
    }
    if (std::abs(asum - 1.0) > 1e-12)
        bad.push_back("alphas sum to " + std::to_string(asum) + ", expected 1");

    for (std::size_t k = 0; k < r; ++k) {
        const auto& f = G.factor(static_cast<int>(k + 1));
        const auto& mu = factor_laws[k];
        if (mu.size() != static_cast<std::size_t>(f.order)) {
            bad.push_back("factor_laws[" + std::to_string(k + 1) + "] has " +
                          std::to_string(mu.size()) + " entries, expected " +
                          std::to_string(f.order));
            continue;
        }
        double msum = 0.0;
        for (std::size_t a = 0; a < mu.size(); ++a) {
            if (mu[a] < 0.0)
                bad.push_back("factor_laws[" + std::to_string(k + 1) + "][" + std::to_string(a) +
                              "] negative");
            msum += mu[a];
        }
        if (std::abs(msum - 1.0) > 1e-12)
            bad.push_back("factor_laws[" + std::to_string(k + 1) + "] sums to " +
                          std::to_string(msum) + ", expected 1");
    }
    return bad;
}

StepLaw make_step_law(const FreeProduct& G,
                      std::vector<double> alphas,
                      std::vector<std::vector<double>> factor_laws) {
    auto bad = step_law_violations(G, alphas, factor_laws);
    if (!bad.empty()) throw ValidationError(bad);

    StepLaw law;
    law.alphas = std::move(alphas);
    law.factor_laws = std::move(factor_laws);

    for (int k = 1; k <= G.r(); ++k) {
        const auto& f = G.factor(k);
        const auto& mu = law.factor_laws[static_cast<std::size_t>(k) - 1];
        law.identity_mass += law.alphas[static_cast<std::size_t>(k) - 1] * mu[0];
        for (int a = 1; a < f.order; ++a) {
            double p = law.alphas[static_cast<std::size_t>(k) - 1] * mu[static_cast<std::size_t>(a)];
            if (p > 0.0) {
                law.atoms.push_back(
                    {Letter{static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(a)}, p});
                law.K = std::max(law.K, f.dist[static_cast<std::size_t>(a)]);
            }
        }
    }
    std::sort(law.atoms.begin(), law.atoms.end(),
              [](const StepAtom& x, const StepAtom& y) { return x.l < y.l; });
    if (law.identity_mass > 0.0) law.atoms.push_back({Letter{0, 0}, law.identity_mass});

    Neumaier acc;
    law.cdf.reserve(law.atoms.size());
    for (const auto& at : law.atoms) {
        acc.add(at.p);
        law.cdf.push_back(acc.get());
    }
    if (!law.cdf.empty()) law.cdf.back() = 1.0; // seal rounding drift at the top
    return law;
}

StepLaw srw_on_generators(const FreeProduct& G) {
    std::size_t total = 0;
    for (const auto& f : G.factors) total += f.gens.size();
    std::vector<double> alphas;
    std::vector<std::vector<double>> laws;
    for (const auto& f : G.factors) {
        alphas.push_back(double(f.gens.size()) / double(total));
        std::vector<double> mu(static_cast<std::size_t>(f.order), 0.0);
        for (auto g : f.gens) mu[g] = 1.0 / double(f.gens.size());
        laws.push_back(std::move(mu));
    }
    return make_step_law(G, std::move(alphas), std::move(laws));
}

Letter step_from_uniform(const StepLaw& law, double u) {
    auto it = std::upper_bound(law.cdf.begin(), law.cdf.end(), u);
    if (it == law.cdf.end()) --it; // u == 1.0 boundary
    return law.atoms[static_cast<std::size_t>(it - law.cdf.begin())].l;
}

Letter sample_step(const StepLaw& law, Xoshiro256pp& rng) {
    return step_from_uniform(law, rng.uniform());
}

// ---- walking ----

WalkPath simulate_walk(const FreeProduct& G, const StepLaw& law, long n, Xoshiro256pp& rng,
                       bool record_words) {
    WalkPath path;
    path.lengths.reserve(static_cast<std::size_t>(n) + 1);
    path.suffix_types.reserve(static_cast<std::size_t>(n) + 1);
    WalkState w(G);
    path.lengths.push_back(0);
    path.suffix_types.push_back(0);
    if (record_words) path.positions.push_back(Word{});
    for (long k = 0; k < n; ++k) {
        w.step(sample_step(law, rng));
        path.lengths.push_back(w.len);
        path.suffix_types.push_back(w.suffix());
        if (record_words) path.positions.push_back(w.word());
    }
    return path;
}

// ---- exact distributions ----

ExactConvolver::ExactConvolver(const FreeProduct& G, const StepLaw& law) : G_(G), law_(law) {
    cur_.n = 0;
    cur_.support.emplace(Word{}, 1.0);
}

void ExactConvolver::advance(std::uint64_t cap) {
    std::unordered_map<Word, Neumaier, WordHash> next;
    next.reserve(cur_.support.size() * 2);
    std::vector<Letter> scratch;
    long len = 0;
    for (const auto& [w, p] : cur_.support) {
        for (const auto& at : law_.atoms) {
            if (at.l.factor == 0) {
                next[w].add(p * at.p);
            } else {
                scratch = w.letters;
                len = 0; // length untracked here; only the word matters
                append_letter(G_, scratch, len, at.l);
                next[Word{scratch}].add(p * at.p);
            }
            if (next.size() > cap) throw CapExceeded("exact_distribution", next.size());
        }
    }
    ExactDistribution out;
    out.n = cur_.n + 1;
    out.support.reserve(next.size());
    for (auto& [w, acc] : next) out.support.emplace(w, acc.get());
    cur_ = std::move(out);
}

ExactDistribution exact_distribution(const FreeProduct& G, const StepLaw& law, long n,
                                     std::uint64_t cap) {
    if (n < 0) throw MalformedInput("exact_distribution: negative step count");
    ExactConvolver conv(G, law);
    for (long k = 0; k < n; ++k) conv.advance(cap);
    return conv.dist();
}

std::map<long, double> length_pmf(const FreeProduct& G, const ExactDistribution& d) {
    std::map<long, Neumaier> acc;
    for (const auto& [w, p] : d.support) acc[word_length(G, w)].add(p);
    std::map<long, double> out;
    for (auto& [len, a] : acc) out[len] = a.get();
    return out;
}

// ---- spectral radius ----

SpectralEstimate estimate_spectral_radius(const FreeProduct& G, const StepLaw& law, long n_max,
                                          std::uint64_t cap) {
    if (n_max < 2) throw MalformedInput("estimate_spectral_radius: n_max must be >= 2");
    n_max -= n_max % 2;

    SpectralEstimate est;
    ExactConvolver conv(G, law);
    for (long m = 1; m <= n_max / 2; ++m) {
        conv.advance(cap);
        // p_{2m} = sum_w P_m(w) P_m(w^{-1}): two half-walks meeting in the middle.
        Neumaier acc;
        const auto& sup = conv.dist().support;
        for (const auto& [w, p] : sup) {
            auto it = sup.find(inverse(G, w));
            if (it != sup.end()) acc.add(p * it->second);
        }
        est.ns.push_back(2 * m);
        est.p2n.push_back(acc.get());
        est.raw.push_back(acc.get() > 0.0 ? std::exp(std::log(acc.get()) / double(2 * m)) : 0.0);
    }

    for (std::size_t j = 2; j < est.p2n.size(); ++j)
        if (est.p2n[j] > est.p2n[j - 1] + 1e-15) est.p2n_monotone = false;

    est.last_raw = est.raw.empty() ? 0.0 : est.raw.back();
    est.cauchy_gap =
        est.raw.size() >= 2 ? std::abs(est.raw.back() - est.raw[est.raw.size() - 2]) : 0.0;

    // Fit on the upper half of the sequence, where the subexponential model
    // log p_{2n} = c0 + (2n) log r + c2 log(2n) + c3/(2n) is accurate.
    std::vector<std::vector<double>> X;
    std::vector<double> y, wts;
    long cut = std::max<long>(4, n_max / 2);
    for (std::size_t j = 0; j < est.ns.size(); ++j) {
        if (est.ns[j] < cut || est.p2n[j] <= 0.0) continue;
        double t = double(est.ns[j]);
        X.push_back({t, 1.0, std::log(t), 1.0 / t});
        y.push_back(std::log(est.p2n[j]));
        wts.push_back(1.0);
    }
    if (y.size() >= 5) {
        double se_slope = 0.0;
        auto beta = weighted_least_squares(X, y, wts, &se_slope);
        est.estimate = std::exp(beta[0]);
        est.notes = "estimate from subexponential fit on the upper half of the even-n sequence";
    } else {
        est.estimate = est.last_raw;
        est.notes = "too few usable points for the bias fit; estimate is the last raw value";
    }

    // Heuristic bracket: the raw sequence approaches the limit from below with
    // deficit roughly n times the last gap (slowly varying log(n)/n tail).
    double hi = std::min(1.0, est.last_raw + 0.5 * double(n_max) * est.cauchy_gap);
    est.interval = {std::min(est.last_raw, est.estimate), std::max(hi, est.estimate)};
    return est;
}

// ---- drift ----

DriftEstimate estimate_drift(const FreeProduct& G, const StepLaw& law, long n,
                             std::uint64_t replicas, std::uint64_t master_seed, int threads,
                             long m_max, std::uint64_t cap) {
    if (n < 2) throw MalformedInput("estimate_drift: n must be >= 2");
    if (replicas < 1) throw MalformedInput("estimate_drift: replicas must be >= 1");

    DriftEstimate out;
    out.n = n;
    out.replicas = replicas;

    const long half = n / 2;
    std::vector<double> windowed(replicas), naive(replicas);
    const std::uint64_t chunk = 1024;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    parallel_for(jobs, threads, [&](std::uint64_t j) {
        std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
        for (std::uint64_t rep = lo; rep < hi; ++rep) {
            Xoshiro256pp rng(stream_seed(master_seed, "drift", rep));
            WalkState w(G);
            long len_half = 0;
            for (long k = 1; k <= n; ++k) {
                w.step(sample_step(law, rng));
                if (k == half) len_half = w.len;
            }
            windowed[rep] = double(w.len - len_half) / double(n - half);
            naive[rep] = double(w.len) / double(n);
        }
    });
    auto ms = mean_se(windowed);
    out.mean = ms.mean;
    out.se = ms.se;
    auto msn = mean_se(naive);
    out.naive_mean = msn.mean;
    out.naive_se = msn.se;

    // Exact E|Y_m|/m cross-check; truncated early if the support cap is hit.
    try {
        ExactConvolver conv(G, law);
        for (long m = 1; m <= m_max; ++m) {
            conv.advance(cap);
            Neumaier acc;
            for (const auto& [w, p] : conv.dist().support) acc.add(p * double(word_length(G, w)));
            out.exact_ratio.push_back(acc.get() / double(m));
        }
    } catch (const CapExceeded&) {
    }
    return out;
}

// ---- exits ----

namespace {

inline bool cone_ok(const std::vector<Letter>& st, int i) {
    return st.empty() || st.front().factor != i;
}

} // namespace

ExitRecord sample_exit(const FreeProduct& G, const StepLaw& law, long n, double a, int i,
                       long step_cap, Xoshiro256pp& rng) {
    if (!(a > 0.0)) throw MalformedInput("sample_exit: speed a must be positive");
    const long horizon = static_cast<long>(std::floor(double(n) / a));
    ExitRecord rec;
    rec.stayed_in_cone = true;
    WalkState w(G);
    for (long k = 1; k <= step_cap; ++k) {
        w.step(sample_step(law, rng));
        if (rec.stayed_in_cone && !cone_ok(w.st, i)) rec.stayed_in_cone = false;
        if (w.len >= n) {
            rec.t_n = k;
            rec.exit_suffix = w.suffix();
            break;
        }
    }
    rec.censored = rec.t_n < 0;
    rec.hit_fast = !rec.censored && rec.t_n <= horizon;
    return rec;
}

ExitCurve exit_rate_curve(const FreeProduct& G, const StepLaw& law, double a, int i,
                          const std::vector<long>& n_grid, std::uint64_t replicas,
                          std::uint64_t master_seed, int threads) {
    if (!(a > 0.0)) throw MalformedInput("exit_rate_curve: speed a must be positive");
    ExitCurve curve;
    curve.a = a;
    curve.cone = i;

    for (long n : n_grid) {
        ExitCell cell;
        cell.n = n;
        cell.horizon = static_cast<long>(std::floor(double(n) / a));
        cell.replicas = replicas;

        char tag[96];
        std::snprintf(tag, sizeof tag, "exit|n=%ld|a=%.17g|i=%d", n, a, i);

        struct Partial {
            std::uint64_t plain = 0, cone = 0, lenh = 0, sandwich = 0;
        };
        const std::uint64_t chunk = 4096;
        const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
        std::vector<Partial> parts(jobs);
        parallel_for(jobs, threads, [&](std::uint64_t j) {
            Partial& part = parts[j];
            std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
            for (std::uint64_t rep = lo; rep < hi; ++rep) {
                Xoshiro256pp rng(stream_seed(master_seed, tag, rep));
                WalkState w(G);
                long t_n = -1;
                bool stayed = true;
                for (long k = 1; k <= cell.horizon; ++k) {
                    w.step(sample_step(law, rng));
                    if (t_n < 0) {
                        if (stayed && !cone_ok(w.st, i)) stayed = false;
                        if (w.len >= n) t_n = k;
                    }
                }
                if (t_n >= 0) {
                    ++part.plain;
                    if (stayed) ++part.cone;
                }
                if (w.len >= n) {
                    ++part.lenh;
                    if (t_n < 0) ++part.sandwich; // event containment broken
                }
            }
        });
        for (const auto& p : parts) {
            cell.hits_plain += p.plain;
            cell.hits_cone += p.cone;
            cell.hits_len_at_horizon += p.lenh;
            cell.sandwich_violations += p.sandwich;
        }

        auto to_rate = [n](double p) {
            return p > 0.0 ? -std::log(p) / double(n) : std::numeric_limits<double>::infinity();
        };
        auto fill = [&](std::uint64_t hits, double& rate, Interval& band, bool& zero) {
            Interval pb = wilson(hits, replicas, 3.0);
            band = Interval{to_rate(pb.hi), to_rate(pb.lo)};
            zero = hits == 0;
            rate = zero ? band.lo : to_rate(double(hits) / double(replicas));
        };
        fill(cell.hits_plain, cell.rate_plain, cell.band_plain, cell.zero_plain);
        fill(cell.hits_cone, cell.rate_cone, cell.band_cone, cell.zero_cone);
        curve.cells.push_back(std::move(cell));
    }
    return curve;
}

// ---- exact vs empirical band check ----

BandCheck band_check(const FreeProduct& G, const ExactDistribution& exact,
                     const std::unordered_map<Word, std::uint64_t, WordHash>& counts,
                     std::uint64_t n_draws, double alpha) {
    BandCheck res;
    res.cells = exact.support.size() + 1; // + the outside-support bucket
    const double level = alpha / double(res.cells);

    std::uint64_t inside = 0;
    std::vector<std::string> bad;
    for (const auto& [w, p] : exact.support) {
        auto it = counts.find(w);
        std::uint64_t c = it == counts.end() ? 0 : it->second;
        inside += c;
        auto band = binom_band(n_draws, p, level);
        if (double(c) < band.lo || double(c) > band.hi) {
            ++res.violations;
            if (bad.size() < 8) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s: count %llu outside [%.0f, %.0f] (p=%.3e)",
                              word_tokens(G, w).c_str(), (unsigned long long)c, band.lo, band.hi,
                              p);
                bad.emplace_back(buf);
            }
        }
    }
    // Everything with exact probability zero lands in one bucket whose band is {0}:
    // the convolution support is the full support of Y_n, so outside mass is exactly 0.
    std::uint64_t outside = n_draws - inside;
    if (outside > 0) {
        ++res.violations;
        bad.emplace_back("outside-support bucket: count " + std::to_string(outside) +
                         " where exact mass is 0");
    }
    std::sort(bad.begin(), bad.end());
    res.examples = std::move(bad);
    return res;
}

} // namespace brw
