#pragma once

// Independent reference implementations used only by tests. Everything here
// recomputes results from first principles (naive fixpoint reduction, BFS,
// dense dynamic programming on the radial chain or on explicit word states),
// without touching the library's reduction, convolution, or estimation code
// paths, so agreement is meaningful.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <vector>

#include "brw/group.hpp"
#include "brw/walk.hpp"

namespace oracle {

using brw::FactorGroup;
using brw::FreeProduct;
using brw::Letter;
using brw::StepLaw;
using brw::Word;

// ---- naive word algebra ----

// Graph distances inside one factor, recomputed with a local BFS so the
// oracle does not trust the library's dist table.
inline std::vector<int> factor_dists(const FactorGroup& f) {
    std::vector<int> d(std::size_t(f.order), -1);
    std::deque<std::uint8_t> q;
    d[0] = 0;
    q.push_back(0);
    while (!q.empty()) {
        auto a = q.front();
        q.pop_front();
        for (auto g : f.gens) {
            auto b = f.mul_at(a, g);
            if (d[b] < 0) {
                d[b] = d[a] + 1;
                q.push_back(b);
            }
        }
    }
    return d;
}

// Concatenate then reduce by rescanning for any adjacent same-factor pair and
// merging or cancelling it, until a full pass finds none. Quadratic and
// oblivious to where the seam is, unlike the incremental stack under test.
inline Word naive_reduce(const FreeProduct& G, std::vector<Letter> ls) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i + 1 < ls.size(); ++i) {
            if (ls[i].factor != ls[i + 1].factor) continue;
            const auto& f = G.factor(ls[i].factor);
            std::uint8_t m = f.mul_at(ls[i].elem, ls[i + 1].elem);
            if (m == 0) {
                ls.erase(ls.begin() + long(i), ls.begin() + long(i) + 2);
            } else {
                ls[i].elem = m;
                ls.erase(ls.begin() + long(i) + 1);
            }
            changed = true;
            break;
        }
    }
    // Drop any identity letters an unreduced input may have carried.
    std::vector<Letter> out;
    for (auto l : ls)
        if (l.elem != 0) out.push_back(l);
    return Word{out};
}

inline Word naive_multiply(const FreeProduct& G, const Word& a, const Word& b) {
    std::vector<Letter> cat = a.letters;
    cat.insert(cat.end(), b.letters.begin(), b.letters.end());
    return naive_reduce(G, cat);
}

inline long naive_length(const FreeProduct& G, const Word& w) {
    long len = 0;
    for (const auto& l : w.letters) len += factor_dists(G.factor(l.factor))[l.elem];
    return len;
}

inline bool naive_in_cone(const Word& w, int i) {
    return w.letters.empty() || int(w.letters.front().factor) != i;
}

struct WordLess {
    bool operator()(const Word& a, const Word& b) const {
        return std::lexicographical_compare(a.letters.begin(), a.letters.end(),
                                            b.letters.begin(), b.letters.end());
    }
};

// Elements within Cayley-graph distance < n of e, with their distances, by
// BFS over single generator moves (union of the factors' generating sets).
inline std::map<Word, long, WordLess> bfs_ball(const FreeProduct& G, long n) {
    std::map<Word, long, WordLess> dist;
    std::deque<Word> q;
    dist[Word{}] = 0;
    q.push_back(Word{});
    while (!q.empty()) {
        Word w = q.front();
        q.pop_front();
        long dw = dist[w];
        if (dw + 1 >= n) continue;
        for (int k = 1; k <= G.r(); ++k) {
            for (auto g : G.factor(k).gens) {
                std::vector<Letter> cat = w.letters;
                cat.push_back(Letter{std::uint8_t(k), g});
                Word v = naive_reduce(G, cat);
                if (!dist.count(v)) {
                    dist[v] = dw + 1;
                    q.push_back(v);
                }
            }
        }
    }
    return dist;
}

// ---- step atoms rebuilt from the mixture data ----

struct Atom {
    Letter l; // {0,0} = identity
    double p = 0.0;
};

inline std::vector<Atom> mixture_atoms(const StepLaw& law) {
    std::vector<Atom> out;
    double id = 0.0;
    for (std::size_t k = 0; k < law.alphas.size(); ++k) {
        const auto& mu = law.factor_laws[k];
        id += law.alphas[k] * mu[0];
        for (std::size_t g = 1; g < mu.size(); ++g)
            if (law.alphas[k] * mu[g] > 0.0)
                out.push_back({Letter{std::uint8_t(k + 1), std::uint8_t(g)}, law.alphas[k] * mu[g]});
    }
    if (id > 0.0) out.push_back({Letter{0, 0}, id});
    return out;
}

// Exact P(T_n <= h [, path stayed in C(i)]) by dense DP over explicit word
// states. cone_i = 0 disables the cone condition. Staying means Y_k in C(i)
// for every 1 <= k <= T_n, exit position included.
inline double word_first_passage(const FreeProduct& G, const StepLaw& law, long n, long h,
                                 int cone_i) {
    auto atoms = mixture_atoms(law);
    std::map<Word, double, WordLess> cur;
    cur[Word{}] = 1.0;
    double hit = 0.0;
    for (long k = 0; k < h; ++k) {
        std::map<Word, double, WordLess> nxt;
        for (const auto& [w, p] : cur) {
            for (const auto& at : atoms) {
                Word v = at.l.factor == 0 ? w : naive_multiply(G, w, Word{{at.l}});
                double q = p * at.p;
                if (naive_length(G, v) >= n) {
                    if (cone_i == 0 || naive_in_cone(v, cone_i)) hit += q;
                } else if (cone_i == 0 || naive_in_cone(v, cone_i)) {
                    nxt[v] += q;
                }
            }
        }
        cur.swap(nxt);
    }
    return hit;
}

// ---- radial chain for the SRW on (Z/2Z) * (Z/2Z) * (Z/2Z) ----
//
// |Y_k| is itself a Markov chain: from 0 it moves to 1; from m >= 1 it moves
// to m+1 with probability 2/3 and to m-1 with probability 1/3.

inline std::vector<double> radial_pmf(long n) {
    std::vector<double> p(std::size_t(n) + 2, 0.0), q(std::size_t(n) + 2, 0.0);
    p[0] = 1.0;
    for (long k = 0; k < n; ++k) {
        std::fill(q.begin(), q.end(), 0.0);
        for (long m = 0; m <= k; ++m) {
            double pm = p[std::size_t(m)];
            if (pm == 0.0) continue;
            if (m == 0) {
                q[1] += pm;
            } else {
                q[std::size_t(m) + 1] += pm * (2.0 / 3.0);
                q[std::size_t(m) - 1] += pm / 3.0;
            }
        }
        std::swap(p, q);
    }
    p.resize(std::size_t(n) + 1);
    return p;
}

inline double radial_mean(long n) {
    auto p = radial_pmf(n);
    double s = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) s += double(m) * p[m];
    return s;
}

// (1/n) log E exp(t |Y_n|), max-shifted for stability at large t.
inline double radial_lambda_n(long n, double t) {
    auto p = radial_pmf(n);
    double top = -1e308;
    for (std::size_t m = 0; m < p.size(); ++m)
        if (p[m] > 0.0) top = std::max(top, t * double(m) + std::log(p[m]));
    double s = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m)
        if (p[m] > 0.0) s += std::exp(t * double(m) + std::log(p[m]) - top);
    return (top + std::log(s)) / double(n);
}

// Dirichlet spectral radius of the radial operator killed outside
// {0, ..., L-1}: power iteration on A + I (the chain is 2-periodic, so plain
// iteration on A oscillates), Rayleigh-quotient eigenvalue, minus the shift.
inline double radial_dirichlet_eig(long L, long iters = 200000, double tol = 1e-13) {
    std::vector<double> v(std::size_t(L), 1.0 / std::sqrt(double(L)));
    std::vector<double> w(std::size_t(L), 0.0);
    double eig = 0.0;
    for (long it = 0; it < iters; ++it) {
        for (long m = 0; m < L; ++m) {
            double acc = v[std::size_t(m)]; // the +I shift
            if (m == 0) {
                if (L > 1) acc += v[1] / 3.0;
            } else {
                acc += (m == 1) ? v[0] : v[std::size_t(m) - 1] * (2.0 / 3.0);
                if (m + 1 < L) acc += v[std::size_t(m) + 1] / 3.0;
            }
            w[std::size_t(m)] = acc;
        }
        double norm = 0.0, ray = 0.0;
        for (long m = 0; m < L; ++m) {
            norm += w[std::size_t(m)] * w[std::size_t(m)];
            ray += w[std::size_t(m)] * v[std::size_t(m)];
        }
        norm = std::sqrt(norm);
        for (long m = 0; m < L; ++m) v[std::size_t(m)] = w[std::size_t(m)] / norm;
        double prev = eig;
        eig = ray;
        if (it > 2 && std::abs(eig - prev) <= tol * std::max(1.0, std::abs(eig))) break;
    }
    return eig - 1.0;
}

// Exact P(T_n <= h) for the radial chain (first passage to level n).
inline double radial_first_passage(long n, long h) {
    std::vector<double> p(std::size_t(n), 0.0), q(std::size_t(n), 0.0);
    p[0] = 1.0;
    double hit = 0.0;
    for (long k = 0; k < h; ++k) {
        std::fill(q.begin(), q.end(), 0.0);
        for (long m = 0; m < n; ++m) {
            double pm = p[std::size_t(m)];
            if (pm == 0.0) continue;
            double up = (m == 0) ? pm : pm * (2.0 / 3.0);
            if (m + 1 >= n) hit += up;
            else q[std::size_t(m) + 1] += up;
            if (m >= 1) q[std::size_t(m) - 1] += pm / 3.0;
        }
        std::swap(p, q);
    }
    return hit;
}

// ---- closed forms for the two-point step law (Figure-style benchmark) ----
//
// If |Y_n| is a sum of n iid {0,1} coins with P(1) = 1/2 (realized by the
// lazy generator walk on Z/2Z * Z/2Z before any cancellation), then
// Lambda(t) = log((1 + e^t)/2) and I(x) = x log x + (1-x) log(1-x) + log 2.

inline double two_point_lambda(double t) {
    // log((1 + e^t)/2), stable on both tails.
    if (t > 0) return t + std::log1p(std::exp(-t)) - std::log(2.0);
    return std::log1p(std::exp(t)) - std::log(2.0);
}

inline double two_point_rate(double x) {
    if (x < 0.0 || x > 1.0) return std::numeric_limits<double>::infinity();
    double s = std::log(2.0);
    if (x > 0.0) s += x * std::log(x);
    if (x < 1.0) s += (1.0 - x) * std::log(1.0 - x);
    return s;
}

} // namespace oracle
