#include "brw/group.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace brw {

// ---- factor group construction ----

std::vector<std::string> FactorGroup::check(int index,
                                            const std::vector<std::string>& labels,
                                            const std::vector<std::uint8_t>& mul,
                                            const std::vector<std::uint8_t>& gens) {
    std::vector<std::string> bad;
    auto tag = [index](const std::string& s) { return "factor " + std::to_string(index) + ": " + s; };

    const std::size_t n = labels.size();
    if (n < 1) {
        bad.push_back(tag("no elements"));
        return bad;
    }
    if (n > 255) {
        bad.push_back(tag("order " + std::to_string(n) + " exceeds 255"));
        return bad;
    }
    if (mul.size() != n * n) {
        bad.push_back(tag("multiplication table has " + std::to_string(mul.size()) +
                          " entries, expected " + std::to_string(n * n)));
        return bad;
    }
    for (std::size_t i = 0; i < n * n; ++i)
        if (mul[i] >= n) {
            bad.push_back(tag("table entry " + std::to_string(i) + " = " +
                              std::to_string(int(mul[i])) + " out of range"));
            return bad;
        }

    auto at = [&](std::size_t a, std::size_t b) { return mul[a * n + b]; };

    // identity is element 0 by convention
    for (std::size_t a = 0; a < n; ++a) {
        if (at(0, a) != a) bad.push_back(tag("e*" + labels[a] + " != " + labels[a]));
        if (at(a, 0) != a) bad.push_back(tag(labels[a] + "*e != " + labels[a]));
    }

    // two-sided inverses
    for (std::size_t a = 0; a < n; ++a) {
        bool found = false;
        for (std::size_t b = 0; b < n; ++b)
            if (at(a, b) == 0 && at(b, a) == 0) { found = true; break; }
        if (!found) bad.push_back(tag("no two-sided inverse for " + labels[a]));
    }

    // associativity, all triples (orders here are tiny)
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < n; ++c)
                if (at(at(a, b), c) != at(a, at(b, c))) {
                    bad.push_back(tag("associativity fails at (" + labels[a] + "," + labels[b] +
                                      "," + labels[c] + ")"));
                    goto assoc_done;
                }
assoc_done:

    if (gens.empty()) bad.push_back(tag("empty generating set"));
    std::set<std::uint8_t> gset;
    for (auto g : gens) {
        if (g >= n) bad.push_back(tag("generator index " + std::to_string(int(g)) + " out of range"));
        else if (g == 0) bad.push_back(tag("identity listed as generator"));
        else gset.insert(g);
    }
    if (!bad.empty()) return bad;

    // generation: BFS over the symmetric closure must reach everything
    std::vector<std::uint8_t> inv(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (at(a, b) == 0) inv[a] = static_cast<std::uint8_t>(b);
    std::set<std::uint8_t> closed = gset;
    for (auto g : gset) closed.insert(inv[g]);

    std::vector<int> dist(n, -1);
    dist[0] = 0;
    std::deque<std::uint8_t> q{0};
    while (!q.empty()) {
        auto a = q.front();
        q.pop_front();
        for (auto g : closed) {
            auto b = at(a, g);
            if (dist[b] < 0) {
                dist[b] = dist[a] + 1;
                q.push_back(b);
            }
        }
    }
    for (std::size_t a = 0; a < n; ++a)
        if (dist[a] < 0) bad.push_back(tag("generators do not reach " + labels[a]));

    return bad;
}

FactorGroup FactorGroup::from_table(int index,
                                    std::vector<std::string> labels,
                                    std::vector<std::uint8_t> mul,
                                    std::vector<std::uint8_t> gens) {
    auto bad = check(index, labels, mul, gens);
    if (!bad.empty()) throw ValidationError(bad);

    FactorGroup f;
    f.index = index;
    f.order = static_cast<int>(labels.size());
    f.labels = std::move(labels);
    f.mul = std::move(mul);

    const std::size_t n = static_cast<std::size_t>(f.order);
    f.inv.resize(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (f.mul[a * n + b] == 0) f.inv[a] = static_cast<std::uint8_t>(b);

    std::set<std::uint8_t> gset(gens.begin(), gens.end());
    std::set<std::uint8_t> closed = gset;
    for (auto g : gset) closed.insert(f.inv[g]);
    f.symmetrized = closed != gset;
    f.gens.assign(closed.begin(), closed.end());

    f.dist.assign(n, -1);
    f.dist[0] = 0;
    std::deque<std::uint8_t> q{0};
    while (!q.empty()) {
        auto a = q.front();
        q.pop_front();
        for (auto g : f.gens) {
            auto b = f.mul_at(a, g);
            if (f.dist[b] < 0) {
                f.dist[b] = f.dist[a] + 1;
                q.push_back(b);
            }
        }
    }
    return f;
}

FactorGroup FactorGroup::cyclic(int index, int m) {
    if (m < 2 || m > 255)
        throw ValidationError({"cyclic factor order " + std::to_string(m) + " outside [2,255]"});
    std::vector<std::string> labels(static_cast<std::size_t>(m));
    labels[0] = "e";
    for (int k = 1; k < m; ++k) labels[k] = k == 1 ? "g" : "g^" + std::to_string(k);
    std::vector<std::uint8_t> mul(static_cast<std::size_t>(m) * m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            mul[static_cast<std::size_t>(a) * m + b] = static_cast<std::uint8_t>((a + b) % m);
    std::vector<std::uint8_t> gens{1};
    if (m > 2) gens.push_back(static_cast<std::uint8_t>(m - 1));
    return from_table(index, std::move(labels), std::move(mul), std::move(gens));
}

FreeProduct make_free_product(std::vector<FactorGroup> factors) {
    if (factors.size() < 2)
        throw ValidationError({"free product needs at least 2 factors, got " +
                               std::to_string(factors.size())});
    if (factors.size() > 255) throw ValidationError({"more than 255 factors"});
    FreeProduct G;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        factors[i].index = static_cast<int>(i + 1);
        for (int d : factors[i].dist) G.max_letter_cost = std::max(G.max_letter_cost, d);
    }
    G.factors = std::move(factors);
    return G;
}

// ---- words ----

void check_letter(const FreeProduct& G, Letter l) {
    if (l.factor < 1 || l.factor > G.r())
        throw MalformedInput("letter factor " + std::to_string(int(l.factor)) + " out of range");
    if (l.elem == 0 || l.elem >= G.factor(l.factor).order)
        throw MalformedInput("letter element " + std::to_string(int(l.elem)) +
                             " invalid for factor " + std::to_string(int(l.factor)));
}

bool is_reduced(const FreeProduct& G, const Word& x) {
    for (std::size_t i = 0; i < x.letters.size(); ++i) {
        Letter l = x.letters[i];
        if (l.factor < 1 || l.factor > G.r() || l.elem == 0 || l.elem >= G.factor(l.factor).order)
            return false;
        if (i > 0 && l.factor == x.letters[i - 1].factor) return false;
    }
    return true;
}

void append_letter(const FreeProduct& G, std::vector<Letter>& st, long& len, Letter l) {
    if (!st.empty() && st.back().factor == l.factor) {
        const FactorGroup& f = G.factor(l.factor);
        std::uint8_t merged = f.mul_at(st.back().elem, l.elem);
        len -= f.dist[st.back().elem];
        st.pop_back();
        if (merged != 0) {
            st.push_back({l.factor, merged});
            len += f.dist[merged];
        }
        return;
    }
    st.push_back(l);
    len += G.factor(l.factor).dist[l.elem];
}

Word multiply(const FreeProduct& G, const Word& x, const Word& y) {
    std::vector<Letter> st = x.letters;
    long len = 0; // not tracked here; recomputed on demand
    for (Letter l : y.letters) append_letter(G, st, len, l);
    return Word{std::move(st)};
}

Word inverse(const FreeProduct& G, const Word& x) {
    Word w;
    w.letters.reserve(x.letters.size());
    for (auto it = x.letters.rbegin(); it != x.letters.rend(); ++it)
        w.letters.push_back({it->factor, G.factor(it->factor).inv[it->elem]});
    return w;
}

long word_length(const FreeProduct& G, const Word& x) {
    long len = 0;
    for (Letter l : x.letters) len += G.factor(l.factor).dist[l.elem];
    return len;
}

long distance(const FreeProduct& G, const Word& x, const Word& y) {
    return word_length(G, multiply(G, inverse(G, x), y));
}

int suffix_type(const FreeProduct& G, const Word& x) {
    (void)G;
    return x.letters.empty() ? 0 : x.letters.back().factor;
}

bool in_cone(const FreeProduct& G, const Word& y, int i, bool strict) {
    (void)G;
    if (y.letters.empty()) return !strict;
    return y.letters.front().factor != i;
}

// ---- ball enumeration ----

namespace {

// DFS over the prefix tree of reduced words. A child extends the word by one
// letter of a different factor; weighted length is monotone along branches,
// so a branch dies as soon as it reaches n.
void ball_dfs(const FreeProduct& G, long n, std::uint64_t cap, std::vector<Letter>& st,
              long len, std::vector<Word>& out) {
    out.push_back(Word{st});
    if (out.size() > cap) throw CapExceeded("ball_enumerate", out.size());
    int last = st.empty() ? 0 : st.back().factor;
    for (int i = 1; i <= G.r(); ++i) {
        if (i == last) continue;
        const FactorGroup& f = G.factor(i);
        for (int a = 1; a < f.order; ++a) {
            long child = len + f.dist[a];
            if (child >= n) continue;
            st.push_back({static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(a)});
            ball_dfs(G, n, cap, st, child, out);
            st.pop_back();
        }
    }
}

} // namespace

std::vector<Word> ball_enumerate(const FreeProduct& G, long n, std::uint64_t cap) {
    std::vector<Word> out;
    if (n <= 0) return out;
    std::vector<Letter> st;
    ball_dfs(G, n, cap, st, 0, out);
    std::sort(out.begin(), out.end(), [&](const Word& a, const Word& b) {
        long la = word_length(G, a), lb = word_length(G, b);
        if (la != lb) return la < lb;
        return std::lexicographical_compare(a.letters.begin(), a.letters.end(),
                                            b.letters.begin(), b.letters.end());
    });
    return out;
}

// ---- text forms ----

std::string word_tokens(const FreeProduct& G, const Word& w) {
    (void)G;
    if (w.letters.empty()) return "e";
    std::string s;
    for (std::size_t i = 0; i < w.letters.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(int(w.letters[i].factor));
        s += ':';
        s += std::to_string(int(w.letters[i].elem));
    }
    return s;
}

Word parse_word_tokens(const FreeProduct& G, const std::string& s) {
    Word w;
    if (s == "e" || s.empty()) return w;
    std::stringstream ss(s);
    std::string tok;
    std::vector<Letter> st;
    long len = 0;
    while (std::getline(ss, tok, '-')) {
        auto colon = tok.find(':');
        if (colon == std::string::npos)
            throw MalformedInput("bad word token '" + tok + "': expected factor:element");
        int fi = 0, ei = 0;
        try {
            fi = std::stoi(tok.substr(0, colon));
            ei = std::stoi(tok.substr(colon + 1));
        } catch (const std::exception&) {
            throw MalformedInput("bad word token '" + tok + "': not numeric");
        }
        if (fi < 1 || fi > 255 || ei < 0 || ei > 255)
            throw MalformedInput("bad word token '" + tok + "': out of range");
        Letter l{static_cast<std::uint8_t>(fi), static_cast<std::uint8_t>(ei)};
        check_letter(G, l);
        if (!st.empty() && st.back().factor == l.factor)
            throw MalformedInput("word not reduced: consecutive letters in factor " +
                                 std::to_string(fi));
        append_letter(G, st, len, l);
    }
    w.letters = std::move(st);
    return w;
}

std::string word_pretty(const FreeProduct& G, const Word& w) {
    if (w.letters.empty()) return "e";
    std::string s;
    for (std::size_t i = 0; i < w.letters.size(); ++i) {
        if (i) s += '.';
        s += G.factor(w.letters[i].factor).labels[w.letters[i].elem];
    }
    return s;
}

} // namespace brw
