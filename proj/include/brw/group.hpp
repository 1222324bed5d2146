#pragma once

// Exact algebra of free products of finite groups.
//
// A group element is a reduced word: a sequence of letters (factor, element)
// in which consecutive letters never share a factor and no letter is a factor
// identity. Multiplication concatenates and reduces at the seam; every
// random-walk step touches only the suffix, so words are kept as flat stacks
// with O(1) amortized suffix mutation.
//
// The word length |x| is the Cayley-graph distance from the identity and
// equals the sum of within-factor distances of the letters (geodesics in free
// products decompose per syllable).

#include <cstdint>
#include <string>
#include <vector>

#include "brw/errors.hpp"
#include "brw/rng.hpp"

namespace brw {

struct Letter {
    std::uint8_t factor = 0; // 1-based factor index
    std::uint8_t elem = 0;   // element index within the factor; 0 is the identity

    friend bool operator==(Letter a, Letter b) { return a.factor == b.factor && a.elem == b.elem; }
    friend bool operator<(Letter a, Letter b) {
        return a.factor != b.factor ? a.factor < b.factor : a.elem < b.elem;
    }
};

struct Word {
    std::vector<Letter> letters;
    bool operator==(const Word&) const = default;
};

struct WordHash {
    std::size_t operator()(const Word& w) const {
        static_assert(sizeof(Letter) == 2);
        return static_cast<std::size_t>(
            fnv1a64(w.letters.data(), w.letters.size() * sizeof(Letter)));
    }
};

// A finite group given by its multiplication table, plus a symmetric
// generating set and the graph distances it induces.
struct FactorGroup {
    int index = 0; // 1-based position inside the free product
    int order = 0;
    std::vector<std::string> labels;    // labels[0] is the identity
    std::vector<std::uint8_t> mul;      // order x order, row-major
    std::vector<std::uint8_t> inv;      // derived from mul
    std::vector<std::uint8_t> gens;     // symmetric closure, sorted, non-identity
    std::vector<int> dist;              // graph distance from the identity
    bool symmetrized = false;           // true if the input generating set was completed

    std::uint8_t mul_at(std::uint8_t a, std::uint8_t b) const {
        return mul[static_cast<std::size_t>(a) * order + b];
    }

    // Collect every axiom violation with a witness; empty means valid.
    static std::vector<std::string> check(int index,
                                          const std::vector<std::string>& labels,
                                          const std::vector<std::uint8_t>& mul,
                                          const std::vector<std::uint8_t>& gens);

    // Build and fully validate; throws ValidationError listing all violations.
    static FactorGroup from_table(int index,
                                  std::vector<std::string> labels,
                                  std::vector<std::uint8_t> mul,
                                  std::vector<std::uint8_t> gens);

    // Z/mZ with generators {1, m-1} and labels e, g, g^2, ...
    static FactorGroup cyclic(int index, int m);
};

struct FreeProduct {
    std::vector<FactorGroup> factors; // factor i at factors[i-1]
    int max_letter_cost = 0;          // max over factors and elements of dist

    int r() const { return static_cast<int>(factors.size()); }
    const FactorGroup& factor(int i) const { return factors[static_cast<std::size_t>(i) - 1]; }
};

// r >= 2 required; factor indices are assigned from position.
FreeProduct make_free_product(std::vector<FactorGroup> factors);

void check_letter(const FreeProduct& G, Letter l); // throws MalformedInput
bool is_reduced(const FreeProduct& G, const Word& x);

// Append one non-identity letter to a reduced stack, reducing at the seam and
// maintaining the cached weighted length. The workhorse of every walk step.
void append_letter(const FreeProduct& G, std::vector<Letter>& st, long& len, Letter l);

Word multiply(const FreeProduct& G, const Word& x, const Word& y);
Word inverse(const FreeProduct& G, const Word& x);
long word_length(const FreeProduct& G, const Word& x);
long distance(const FreeProduct& G, const Word& x, const Word& y);

// Factor index of the last letter; 0 for the identity word.
int suffix_type(const FreeProduct& G, const Word& x);

// First letter not in factor i. The identity is in every cone by convention;
// strict mode excludes it.
bool in_cone(const FreeProduct& G, const Word& y, int i, bool strict = false);

// All reduced words with |x| < n, exactly once, sorted by (|x|, letter
// sequence). Throws CapExceeded when more than cap words are found.
std::vector<Word> ball_enumerate(const FreeProduct& G, long n, std::uint64_t cap);

// "e" for the identity, else dash-separated factor:element tokens ("1:1-2:2").
std::string word_tokens(const FreeProduct& G, const Word& w);
Word parse_word_tokens(const FreeProduct& G, const std::string& s);

// Concatenated element labels, for humans.
std::string word_pretty(const FreeProduct& G, const Word& w);

} // namespace brw
