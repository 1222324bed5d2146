#include "brw/brw_process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "brw/errors.hpp"
#include "brw/parallel.hpp"
#include "brw/stats.hpp"

namespace brw {

// ---- offspring law ----

std::vector<std::string> offspring_law_violations(const std::map<int, double>& pmf,
                                                  bool require_supercritical) {
    std::vector<std::string> bad;
    if (pmf.empty()) {
        bad.push_back("offspring pmf is empty");
        return bad;
    }
    double sum = 0.0, mean = 0.0;
    for (const auto& [k, p] : pmf) {
        if (p < 0.0) bad.push_back("offspring pmf(" + std::to_string(k) + ") negative");
        if (k < 1 && p > 0.0)
            bad.push_back("offspring pmf puts mass " + std::to_string(p) + " on " +
                          std::to_string(k) + " children; support must be >= 1");
        sum += p;
        mean += double(k) * p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        bad.push_back("offspring pmf sums to " + std::to_string(sum) + ", expected 1");
    if (require_supercritical && !(mean > 1.0))
        bad.push_back("offspring mean rho = " + std::to_string(mean) + " must exceed 1");
    return bad;
}

OffspringLaw make_offspring_law(std::map<int, double> pmf, bool require_supercritical) {
    auto bad = offspring_law_violations(pmf, require_supercritical);
    if (!bad.empty()) throw ValidationError(bad);

    OffspringLaw pi;
    Neumaier mean, run;
    for (const auto& [k, p] : pmf) {
        if (p <= 0.0 || k < 1) continue;
        pi.support.push_back(k);
        run.add(p);
        pi.cdf.push_back(run.get());
        mean.add(double(k) * p);
        pi.max_children = std::max(pi.max_children, k);
        pi.pmf.emplace(k, p);
    }
    pi.cdf.back() = 1.0;
    pi.rho = mean.get();
    return pi;
}

int offspring_from_uniform(const OffspringLaw& pi, double u) {
    auto it = std::upper_bound(pi.cdf.begin(), pi.cdf.end(), u);
    if (it == pi.cdf.end()) --it;
    return pi.support[static_cast<std::size_t>(it - pi.cdf.begin())];
}

// ---- core evolution ----

namespace {

GenerationStats stats_of(long gen, const std::vector<BrwParticle>& frontier) {
    GenerationStats st;
    st.gen = gen;
    st.population = frontier.size();
    st.max_disp = frontier.empty() ? 0 : frontier.front().len;
    st.min_disp = st.max_disp;
    for (const auto& p : frontier) {
        st.max_disp = std::max(st.max_disp, p.len);
        st.min_disp = std::min(st.min_disp, p.len);
        ++st.hist[p.len];
    }
    return st;
}

} // namespace

BrwResult simulate_brw(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi, long n,
                       std::uint64_t pop_cap, std::uint64_t replica_seed, const Word& start,
                       bool keep_frontier) {
    if (n < 0) throw MalformedInput("simulate_brw: negative generation count");
    if (!is_reduced(G, start)) throw MalformedInput("simulate_brw: start word not reduced");

    BrwResult res;
    std::vector<BrwParticle> frontier(1);
    frontier[0].pos = start;
    frontier[0].len = word_length(G, start);
    frontier[0].key = root_key(replica_seed);
    res.gens.push_back(stats_of(0, frontier));

    std::vector<BrwParticle> next;
    for (long g = 1; g <= n; ++g) {
        std::uint64_t attempted = 0;
        for (const auto& p : frontier)
            attempted += std::uint64_t(
                offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring)));
        if (attempted > pop_cap) {
            res.truncated = true;
            res.truncated_gen = g;
            res.attempted_pop = attempted;
            break;
        }
        next.clear();
        next.reserve(attempted);
        for (const auto& p : frontier) {
            int kids = offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring));
            for (int c = 0; c < kids; ++c) {
                BrwParticle ch;
                ch.key = child_key(p.key, std::uint64_t(c));
                Letter step = step_from_uniform(law, key_uniform(ch.key, kSlotStep));
                ch.pos = p.pos;
                ch.len = p.len;
                if (step.factor != 0) append_letter(G, ch.pos.letters, ch.len, step);
                ch.stayed = p.stayed;
                next.push_back(std::move(ch));
            }
        }
        frontier.swap(next);
        res.gens.push_back(stats_of(g, frontier));
    }
    if (keep_frontier) res.frontier = std::move(frontier);
    return res;
}

// ---- many-to-one ----

double TestFunction::eval(const FreeProduct& G, const Word& pos, long len) const {
    (void)G;
    switch (kind) {
        case One: return 1.0;
        case IndicatorWord: return pos == w ? 1.0 : 0.0;
        case IndicatorLenGe: return len >= c ? 1.0 : 0.0;
        case ExpLen: return std::exp(t * double(len));
    }
    return 0.0;
}

std::string TestFunction::describe() const {
    char buf[64];
    switch (kind) {
        case One: return "1";
        case IndicatorWord: return "ind_word";
        case IndicatorLenGe:
            std::snprintf(buf, sizeof buf, "ind_len_ge_%ld", c);
            return buf;
        case ExpLen:
            std::snprintf(buf, sizeof buf, "exp_%.6g_len", t);
            return buf;
    }
    return "?";
}

ManyToOneReport many_to_one_check(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                  long n, const TestFunction& f, std::uint64_t replicas,
                                  std::uint64_t master_seed, int threads, std::uint64_t pop_cap,
                                  std::uint64_t conv_cap) {
    ManyToOneReport rep;
    rep.replicas = replicas;
    rep.f_desc = f.describe();

    auto exact = exact_distribution(G, law, n, conv_cap);
    Neumaier rhs;
    for (const auto& [w, p] : exact.support) rhs.add(p * f.eval(G, w, word_length(G, w)));
    rep.rhs = std::pow(pi.rho, double(n)) * rhs.get();

    std::string tag = "m2o|f=" + rep.f_desc + "|n=" + std::to_string(n);
    std::vector<double> vals(replicas);
    const std::uint64_t chunk = 1024;
    const std::uint64_t jobs = (replicas + chunk - 1) / chunk;
    parallel_for(jobs, threads, [&](std::uint64_t j) {
        std::uint64_t lo = j * chunk, hi = std::min(replicas, lo + chunk);
        for (std::uint64_t rep_i = lo; rep_i < hi; ++rep_i) {
            auto r = simulate_brw(G, law, pi, n, pop_cap, stream_seed(master_seed, tag.c_str(), rep_i),
                                  Word{}, true);
            if (r.truncated) throw CapExceeded("many_to_one_check", r.attempted_pop);
            Neumaier acc;
            for (const auto& p : r.frontier) acc.add(f.eval(G, p.pos, p.len));
            vals[rep_i] = acc.get();
        }
    });
    auto ms = mean_se(vals);
    rep.lhs_mean = ms.mean;
    rep.lhs_se = ms.se;
    rep.z = rep.lhs_se > 0.0
                ? (rep.lhs_mean - rep.rhs) / rep.lhs_se
                : (rep.lhs_mean == rep.rhs ? 0.0 : std::numeric_limits<double>::infinity());
    return rep;
}

// ---- stopping line ----

StoppingLine stopping_line(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                           long n, double a, int i, long gen_cap, std::uint64_t pop_cap,
                           std::uint64_t replica_seed) {
    if (n < 1) throw MalformedInput("stopping_line: radius must be >= 1");
    if (!(a > 0.0)) throw MalformedInput("stopping_line: speed a must be positive");
    if (double(gen_cap) < std::ceil(double(n) / a))
        throw MalformedInput("stopping_line: gen_cap below ceil(n/a)");

    StoppingLine line;
    std::vector<BrwParticle> frontier(1);
    frontier[0].key = root_key(replica_seed);
    frontier[0].stayed = true; // the identity is inside every cone here

    std::vector<BrwParticle> next;
    for (long g = 1; g <= gen_cap && !frontier.empty(); ++g) {
        std::uint64_t attempted = 0;
        for (const auto& p : frontier)
            attempted += std::uint64_t(
                offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring)));
        if (attempted > pop_cap) {
            line.truncated = true;
            break;
        }
        next.clear();
        next.reserve(attempted);
        for (const auto& p : frontier) {
            int kids = offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring));
            for (int c = 0; c < kids; ++c) {
                BrwParticle ch;
                ch.key = child_key(p.key, std::uint64_t(c));
                Letter step = step_from_uniform(law, key_uniform(ch.key, kSlotStep));
                ch.pos = p.pos;
                ch.len = p.len;
                if (step.factor != 0) append_letter(G, ch.pos.letters, ch.len, step);
                ch.stayed =
                    p.stayed && (ch.pos.letters.empty() || ch.pos.letters.front().factor != i);
                if (ch.len >= n) {
                    line.recs.push_back(
                        {g, ch.len, ch.pos.letters.empty() ? 0 : ch.pos.letters.back().factor,
                         ch.stayed});
                } else {
                    next.push_back(std::move(ch));
                }
            }
        }
        frontier.swap(next);
    }
    line.censored_live = frontier.size();
    return line;
}

// ---- coupled start shift ----

CoupleResult coupled_start_shift(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                                 long n, const Word& x, std::uint64_t replica_seed,
                                 std::uint64_t pop_cap) {
    if (!is_reduced(G, x)) throw MalformedInput("coupled_start_shift: shift word not reduced");

    // One particle, two coupled positions: from e and from x, fed identical
    // steps. X_v^x = x X_v, so the pair evolves in lockstep.
    struct Pair {
        std::vector<Letter> pe, px;
        long le = 0, lx = 0;
        std::uint64_t key = 0;
    };

    CoupleResult res;
    res.shift_len = word_length(G, x);

    std::vector<Pair> frontier(1);
    frontier[0].px = x.letters;
    frontier[0].lx = res.shift_len;
    frontier[0].key = root_key(replica_seed);

    auto record = [&](long g, const std::vector<Pair>& fr) {
        CoupledGen cg;
        cg.gen = g;
        cg.max_e = cg.min_e = fr.front().le;
        cg.max_x = cg.min_x = fr.front().lx;
        for (const auto& p : fr) {
            cg.max_e = std::max(cg.max_e, p.le);
            cg.min_e = std::min(cg.min_e, p.le);
            cg.max_x = std::max(cg.max_x, p.lx);
            cg.min_x = std::min(cg.min_x, p.lx);
        }
        if (std::abs(cg.max_x - cg.max_e) > res.shift_len) res.bound_ok = false;
        res.gens.push_back(cg);
    };
    record(0, frontier);

    std::vector<Pair> next;
    for (long g = 1; g <= n; ++g) {
        std::uint64_t attempted = 0;
        for (const auto& p : frontier)
            attempted += std::uint64_t(
                offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring)));
        if (attempted > pop_cap) {
            res.truncated = true;
            break;
        }
        next.clear();
        next.reserve(attempted);
        for (const auto& p : frontier) {
            int kids = offspring_from_uniform(pi, key_uniform(p.key, kSlotOffspring));
            for (int c = 0; c < kids; ++c) {
                Pair ch;
                ch.key = child_key(p.key, std::uint64_t(c));
                Letter step = step_from_uniform(law, key_uniform(ch.key, kSlotStep));
                ch.pe = p.pe;
                ch.le = p.le;
                ch.px = p.px;
                ch.lx = p.lx;
                if (step.factor != 0) {
                    append_letter(G, ch.pe, ch.le, step);
                    append_letter(G, ch.px, ch.lx, step);
                }
                next.push_back(std::move(ch));
            }
        }
        frontier.swap(next);
        record(g, frontier);
    }
    return res;
}

} // namespace brw
