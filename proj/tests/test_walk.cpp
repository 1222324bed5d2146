#include <doctest.h>

#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

#include "brw/errors.hpp"
#include "brw/walk.hpp"
#include "oracles.hpp"

using namespace brw;

namespace {

FreeProduct z2_cubed() {
    return make_free_product(
        {FactorGroup::cyclic(1, 2), FactorGroup::cyclic(2, 2), FactorGroup::cyclic(3, 2)});
}

FreeProduct z2_z3() {
    return make_free_product({FactorGroup::cyclic(1, 2), FactorGroup::cyclic(2, 3)});
}

} // namespace

TEST_CASE("step law validation and construction") {
    auto G = z2_z3();
    // alpha must be strictly positive on every factor.
    auto v = step_law_violations(G, {1.0, 0.0}, {{0.0, 1.0}, {0.0, 0.5, 0.5}});
    CHECK(!v.empty());
    // masses must be nonnegative and sum to one.
    CHECK(!step_law_violations(G, {0.5, 0.5}, {{0.0, 0.9}, {0.0, 0.5, 0.5}}).empty());
    CHECK(!step_law_violations(G, {0.5, 0.5}, {{0.0, 1.0}, {0.0, 1.5, -0.5}}).empty());
    CHECK(step_law_violations(G, {0.7, 0.3}, {{0.0, 1.0}, {0.0, 0.5, 0.5}}).empty());

    CHECK_THROWS_AS(make_step_law(G, {1.0}, {{0.0, 1.0}}), ValidationError);

    auto law = make_step_law(G, {0.5, 0.5}, {{0.2, 0.8}, {0.1, 0.45, 0.45}});
    CHECK(law.identity_mass == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(law.K == 1);
    CHECK(law.cdf.back() == 1.0); // sealed exactly
    double total = 0.0;
    for (const auto& at : law.atoms) total += at.p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("srw_on_generators is the uniform generator step") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    CHECK(law.K == 1);
    CHECK(law.identity_mass == 0.0);
    REQUIRE(law.atoms.size() == 3);
    for (const auto& at : law.atoms) CHECK(at.p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // Mixed orders: Z/4Z contributes two generators of cost 1, so K stays 1
    // even though the factor contains a cost-2 element.
    auto H = make_free_product({FactorGroup::cyclic(1, 3), FactorGroup::cyclic(2, 4)});
    auto lh = srw_on_generators(H);
    CHECK(lh.K == 1);
    CHECK(lh.alphas[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lh.factor_laws[1][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lh.factor_laws[1][2] == 0.0);
}

TEST_CASE("step_from_uniform partitions [0,1) consistently with sample_step") {
    auto G = z2_z3();
    auto law = make_step_law(G, {0.5, 0.5}, {{0.2, 0.8}, {0.1, 0.45, 0.45}});

    // The cdf cells are inclusive running sums; a uniform just below a cut
    // selects the cell, at the cut the next one.
    Letter first = step_from_uniform(law, 0.0);
    CHECK(first == law.atoms[0].l);
    for (std::size_t i = 0; i + 1 < law.atoms.size(); ++i) {
        Letter before = step_from_uniform(law, law.cdf[i] - 1e-12);
        Letter after = step_from_uniform(law, law.cdf[i]);
        CHECK(before == law.atoms[i].l);
        CHECK(after == law.atoms[i + 1].l);
    }

    // Empirical frequencies match atom masses within 4 sigma.
    Xoshiro256pp rng(31);
    std::map<std::pair<int, int>, int> counts;
    const int N = 40000;
    for (int k = 0; k < N; ++k) {
        Letter l = sample_step(law, rng);
        counts[{l.factor, l.elem}]++;
    }
    for (const auto& at : law.atoms) {
        double expect = at.p * N;
        double sd = std::sqrt(at.p * (1 - at.p) * N);
        CHECK(std::abs(counts[{at.l.factor, at.l.elem}] - expect) <= 4 * sd);
    }
}

TEST_CASE("simulate_walk produces consistent paths") {
    auto G = z2_z3();
    auto law = srw_on_generators(G);
    Xoshiro256pp rng(77);
    auto path = simulate_walk(G, law, 50, rng, true);
    REQUIRE(path.lengths.size() == 51);
    REQUIRE(path.positions.size() == 51);
    REQUIRE(path.suffix_types.size() == 51);
    CHECK(path.lengths[0] == 0);
    CHECK(path.positions[0] == Word{});
    for (std::size_t k = 1; k < path.lengths.size(); ++k) {
        CHECK(std::abs(path.lengths[k] - path.lengths[k - 1]) <= law.K);
        CHECK(path.lengths[k] == word_length(G, path.positions[k]));
        CHECK(path.suffix_types[k] == suffix_type(G, path.positions[k]));
    }
}

TEST_CASE("exact distributions match the radial oracle on (Z/2Z)*3") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);

    auto d0 = exact_distribution(G, law, 0, 1000);
    REQUIRE(d0.support.size() == 1);
    CHECK(d0.support.at(Word{}) == 1.0);

    for (long n : {1L, 4L, 9L, 12L}) {
        auto d = exact_distribution(G, law, n, 1'000'000);
        auto pmf = length_pmf(G, d);
        auto ref = oracle::radial_pmf(n);
        double mass = 0.0;
        for (const auto& [len, p] : pmf) {
            REQUIRE(len <= n);
            CHECK(p == doctest::Approx(ref[std::size_t(len)]).epsilon(1e-12));
            mass += p;
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
        // Parity: |Y_n| = n mod 2 for the generator walk.
        for (const auto& [len, p] : pmf) CHECK((len & 1) == (n & 1));
    }
}

TEST_CASE("the convolver advances one step at a time") {
    auto G = z2_z3();
    auto law = srw_on_generators(G);
    ExactConvolver conv(G, law);
    for (long n = 1; n <= 6; ++n) {
        conv.advance(1'000'000);
        auto direct = exact_distribution(G, law, n, 1'000'000);
        REQUIRE(conv.dist().support.size() == direct.support.size());
        for (const auto& [w, p] : direct.support) {
            auto it = conv.dist().support.find(w);
            REQUIRE(it != conv.dist().support.end());
            CHECK(it->second == doctest::Approx(p).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(exact_distribution(G, law, 20, 100), CapExceeded);
}

TEST_CASE("symmetric laws give inversion-invariant distributions") {
    auto G = z2_z3();
    auto law = srw_on_generators(G); // uniform on a symmetric generating set
    auto d = exact_distribution(G, law, 5, 1'000'000);
    for (const auto& [w, p] : d.support) {
        auto it = d.support.find(inverse(G, w));
        REQUIRE(it != d.support.end());
        CHECK(it->second == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("empirical word counts sit inside the exact simultaneous bands") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    const long n = 8;
    const std::uint64_t draws = 20000;
    auto exact = exact_distribution(G, law, n, 1'000'000);

    std::unordered_map<Word, std::uint64_t, WordHash> counts;
    for (std::uint64_t rep = 0; rep < draws; ++rep) {
        Xoshiro256pp rng(stream_seed(424242, "bandtest|n=8", rep));
        auto path = simulate_walk(G, law, n, rng, true);
        counts[path.positions.back()]++;
    }

    auto res = band_check(G, exact, counts, draws);
    CHECK(res.violations == 0);
    CHECK(res.cells == exact.support.size() + 1);

    // A corrupted table must be caught: move all mass from the heaviest cell
    // onto a word outside the support.
    auto corrupted = counts;
    Word heaviest;
    std::uint64_t top = 0;
    for (const auto& [w, c] : corrupted)
        if (c > top) { top = c; heaviest = w; }
    corrupted.erase(heaviest);
    // Dump it on a boundary word whose true probability is tiny.
    corrupted[parse_word_tokens(G, "1:1-2:1-1:1-2:1-1:1-2:1-1:1-2:1")] += top;
    auto bad = band_check(G, exact, corrupted, draws);
    CHECK(bad.violations > 0);
    CHECK(!bad.examples.empty());
}

TEST_CASE("spectral return probabilities match the radial oracle exactly") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto est = estimate_spectral_radius(G, law, 12, 1'000'000);
    REQUIRE(est.ns.size() == 6);
    for (std::size_t k = 0; k < est.ns.size(); ++k) {
        long n2 = est.ns[k];
        CHECK(n2 == 2 * long(k + 1));
        CHECK(est.p2n[k] == doctest::Approx(oracle::radial_pmf(n2)[0]).epsilon(1e-12));
        CHECK(est.raw[k] == doctest::Approx(std::pow(est.p2n[k], 1.0 / double(n2))).epsilon(1e-12));
    }
    CHECK(est.p2n_monotone);
    CHECK(est.last_raw == est.raw.back());
    // Six even points leave fewer than five above the fit cut, so the
    // estimate falls back to the last raw root.
    CHECK(est.estimate == est.last_raw);
    CHECK(est.interval.lo <= est.estimate);
    CHECK(est.interval.hi >= est.estimate);

    // One ball radius further the bias fit engages and lands close to the
    // known value 2 sqrt(2) / 3 despite the short sequence.
    auto est16 = estimate_spectral_radius(G, law, 16, 1'000'000);
    CHECK(est16.estimate == doctest::Approx(0.935348).epsilon(2e-3));
    CHECK(std::abs(est16.estimate - 2.0 * std::sqrt(2.0) / 3.0) < 0.01);
    CHECK(est16.interval.lo <= est16.estimate);
    CHECK(est16.interval.hi >= est16.estimate);
}

TEST_CASE("drift estimators: exact ratios, windowed mean, determinism") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto d = estimate_drift(G, law, 400, 4000, 919, 1, 10);
    REQUIRE(d.exact_ratio.size() == 10);
    for (long m = 1; m <= 10; ++m)
        CHECK(d.exact_ratio[std::size_t(m) - 1] ==
              doctest::Approx(oracle::radial_mean(m) / double(m)).epsilon(1e-12));

    // Windowed estimator is unbiased for this chain away from the origin.
    CHECK(std::abs(d.mean - 1.0 / 3.0) <= 5 * d.se);
    // Naive estimator carries a visible positive bias at n = 400.
    CHECK(d.naive_mean > d.mean);

    auto d3 = estimate_drift(G, law, 400, 4000, 919, 3, 10);
    CHECK(d3.mean == d.mean); // bit-identical across worker counts
    CHECK(d3.se == d.se);
    CHECK(d3.naive_mean == d.naive_mean);
}

TEST_CASE("exit sampling invariants") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    const long n = 5;
    Xoshiro256pp rng(1234);
    for (int rep = 0; rep < 500; ++rep) {
        auto rec = sample_exit(G, law, n, 0.4, 1, 40, rng);
        if (rec.censored) {
            CHECK(rec.t_n == -1);
            CHECK(rec.exit_suffix == 0);
        } else {
            CHECK(rec.t_n >= n); // K = 1: length grows at most 1 per step
            CHECK(rec.t_n <= 40);
            CHECK(rec.hit_fast == (rec.t_n <= long(n / 0.4)));
            CHECK(rec.exit_suffix >= 1);
            CHECK(rec.exit_suffix <= 3);
        }
    }
}

TEST_CASE("exit rate cells match the exact first-passage DP") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    const double a = 0.4;
    const std::uint64_t R = 100000;
    auto curve = exit_rate_curve(G, law, a, 1, {4, 6}, R, 5150, 1);
    REQUIRE(curve.cells.size() == 2);

    for (const auto& cell : curve.cells) {
        CHECK(cell.horizon == long(double(cell.n) / a));
        CHECK(cell.sandwich_violations == 0);
        CHECK(cell.hits_len_at_horizon <= cell.hits_plain);
        CHECK(cell.hits_cone <= cell.hits_plain);

        double p_plain = oracle::word_first_passage(G, law, cell.n, cell.horizon, 0);
        double p_cone = oracle::word_first_passage(G, law, cell.n, cell.horizon, 1);
        // The two oracles agree with each other on the plain variant.
        CHECK(p_plain ==
              doctest::Approx(oracle::radial_first_passage(cell.n, cell.horizon)).epsilon(1e-12));

        auto band_p = wilson(cell.hits_plain, R, 4.0);
        CHECK(band_p.lo <= p_plain);
        CHECK(band_p.hi >= p_plain);
        auto band_c = wilson(cell.hits_cone, R, 4.0);
        CHECK(band_c.lo <= p_cone);
        CHECK(band_c.hi >= p_cone);

        // Rate mapping: band endpoints are the log-transformed Wilson edges.
        CHECK(cell.rate_plain ==
              doctest::Approx(-std::log(double(cell.hits_plain) / double(R)) / double(cell.n))
                  .epsilon(1e-12));
        CHECK(cell.band_plain.lo <= cell.rate_plain);
        CHECK(cell.band_plain.hi >= cell.rate_plain);
        CHECK_FALSE(cell.zero_plain);
    }

    // Bit-identical across worker counts.
    auto c3 = exit_rate_curve(G, law, a, 1, {4, 6}, R, 5150, 3);
    for (std::size_t i = 0; i < curve.cells.size(); ++i) {
        CHECK(c3.cells[i].hits_plain == curve.cells[i].hits_plain);
        CHECK(c3.cells[i].hits_cone == curve.cells[i].hits_cone);
        CHECK(c3.cells[i].hits_len_at_horizon == curve.cells[i].hits_len_at_horizon);
    }
}
