#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "brw/errors.hpp"
#include "brw/multitype.hpp"
#include "oracles.hpp"

using namespace brw;

namespace {

FreeProduct z2_cubed() {
    return make_free_product(
        {FactorGroup::cyclic(1, 2), FactorGroup::cyclic(2, 2), FactorGroup::cyclic(3, 2)});
}

FreeProduct z3_z4() {
    return make_free_product({FactorGroup::cyclic(1, 3), FactorGroup::cyclic(2, 4)});
}

OffspringLaw geom15() { return make_offspring_law({{1, 0.5}, {2, 0.5}}); }

using Trip = std::tuple<long, long, int>;

std::vector<Trip> census_trips(const ConeExitCensus& c) {
    std::vector<Trip> v;
    for (const auto& r : c.recs) v.emplace_back(r.gen, r.exit_len, r.suffix);
    std::sort(v.begin(), v.end());
    return v;
}

// The same multiset obtained the slow way: a full stopping line, then the
// post-filter {stayed in the cone, froze within the generation budget}.
std::vector<Trip> line_trips(const FreeProduct& G, const StepLaw& law, const OffspringLaw& pi,
                             long n, double a, int i, std::uint64_t seed) {
    long H = long(std::floor(double(n) / a));
    long gen_cap = long(std::ceil(double(n) / a));
    auto line = stopping_line(G, law, pi, n, a, i, gen_cap, 10'000'000, seed);
    std::vector<Trip> v;
    for (const auto& rec : line.recs)
        if (rec.stayed && rec.gen <= H) v.emplace_back(rec.gen, rec.exit_len, rec.suffix);
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST_CASE("the kill-early census equals the post-filtered stopping line pathwise") {
    auto G2 = z2_cubed();
    auto law2 = srw_on_generators(G2);
    auto G34 = z3_z4();
    auto law34 = make_step_law(G34, {0.5, 0.5}, {{0.0, 0.5, 0.5}, {0.0, 0.3, 0.4, 0.3}});
    auto pi = geom15();

    struct Case {
        const FreeProduct* G;
        const StepLaw* law;
        long n;
        double a;
        int i;
    };
    std::vector<Case> cases = {{&G2, &law2, 4, 0.45, 1},
                               {&G2, &law2, 8, 0.45, 2},
                               {&G2, &law2, 8, 0.7, 3},
                               {&G34, &law34, 6, 0.6, 1},
                               {&G34, &law34, 6, 0.6, 2}};
    for (const auto& c : cases) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            auto cen = sample_cone_exit_census(*c.G, *c.law, pi, c.i, c.a, c.n, 10'000'000, seed);
            REQUIRE_FALSE(cen.truncated);
            CHECK(cen.lemma_violations == 0);
            auto got = census_trips(cen);
            auto want = line_trips(*c.G, *c.law, pi, c.n, c.a, c.i, seed);
            REQUIRE(got.size() == want.size());
            CHECK(got == want);
        }
    }
}

TEST_CASE("census records obey the first-level bounds and type counts") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto pi = geom15();
    const long n = 8;
    const double a = 0.45;
    const long H = long(std::floor(double(n) / a));

    std::uint64_t nonempty = 0;
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        auto cen = sample_cone_exit_census(G, law, pi, 1, a, n, 10'000'000, seed, true);
        REQUIRE(cen.words.size() == cen.recs.size());
        std::vector<std::uint64_t> counts(4, 0);
        for (std::size_t k = 0; k < cen.recs.size(); ++k) {
            const auto& rec = cen.recs[k];
            CHECK(rec.gen >= 1);
            CHECK(rec.gen <= H);
            CHECK(rec.exit_len >= n);
            CHECK(rec.exit_len < n + law.K);
            CHECK(rec.suffix >= 1);
            CHECK(rec.suffix <= 3);
            counts[std::size_t(rec.suffix)]++;

            const Word& w = cen.words[k];
            CHECK(word_length(G, w) == rec.exit_len);
            CHECK(suffix_type(G, w) == rec.suffix);
            CHECK(in_cone(G, w, 1, true)); // strictly: the exit position is a nontrivial cone word
        }
        REQUIRE(cen.by_type.size() == 4);
        for (int j = 1; j <= 3; ++j) CHECK(cen.by_type[std::size_t(j)] == counts[std::size_t(j)]);
        if (!cen.recs.empty()) ++nonempty;
    }
    CHECK(nonempty > 0);

    CHECK_THROWS_AS(sample_cone_exit_census(G, law, pi, 0, a, n, 1000, 1), MalformedInput);
    CHECK_THROWS_AS(sample_cone_exit_census(G, law, pi, 4, a, n, 1000, 1), MalformedInput);
}

TEST_CASE("mean matrix estimation: row sums, symmetry, determinism") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto pi = geom15();
    auto mm = estimate_mean_matrix(G, law, pi, 0.45, 6, 200, 616);
    REQUIRE(mm.r == 3);
    REQUIRE(mm.M.size() == 9);
    CHECK(mm.replicas == 200);

    for (int i = 0; i < 3; ++i) {
        CHECK(mm.excluded_partial[std::size_t(i)] == 0);
        double row = 0.0;
        for (int j = 0; j < 3; ++j) {
            double m = mm.M[std::size_t(i) * 3 + std::size_t(j)];
            CHECK(m >= 0.0);
            CHECK(mm.SE[std::size_t(i) * 3 + std::size_t(j)] > 0.0);
            row += m;
        }
        // Row sum identity: mean census size, same integer accumulators.
        CHECK(std::abs(row - mm.row_mean_census[std::size_t(i)]) <= 1e-12 * std::max(1.0, row));
    }

    // The three factors are interchangeable, so diagonal (and off-diagonal)
    // entries agree within statistical error.
    auto at = [&](int i, int j) { return mm.M[std::size_t(i) * 3 + std::size_t(j)]; };
    auto se = [&](int i, int j) { return mm.SE[std::size_t(i) * 3 + std::size_t(j)]; };
    CHECK(std::abs(at(0, 0) - at(1, 1)) <= 4.0 * (se(0, 0) + se(1, 1)));
    CHECK(std::abs(at(0, 1) - at(2, 0)) <= 4.0 * (se(0, 1) + se(2, 0)));

    auto mm3 = estimate_mean_matrix(G, law, pi, 0.45, 6, 200, 616, 3);
    for (std::size_t k = 0; k < 9; ++k) {
        CHECK(mm3.M[k] == mm.M[k]); // bit-identical across worker counts
        CHECK(mm3.SE[k] == mm.SE[k]);
    }
}

TEST_CASE("perron eigenvalue on closed-form matrices") {
    auto diag = perron_eigenvalue({2.0, 0.0, 0.0, 2.0}, 2);
    CHECK(diag.converged);
    CHECK(diag.nu == doctest::Approx(2.0).epsilon(1e-12));

    auto m = perron_eigenvalue({0.5, 0.7, 0.6, 0.5}, 2);
    CHECK(m.converged);
    CHECK(m.nu == doctest::Approx(0.5 + std::sqrt(0.42)).epsilon(1e-9));
    REQUIRE(m.left_evec.size() == 2);
    double s = m.left_evec[0] + m.left_evec[1];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.left_evec[0] >= 0.0);
    CHECK(m.left_evec[1] >= 0.0);
    // Residual of the reported pair, recomputed here.
    double r0 = m.left_evec[0] * 0.5 + m.left_evec[1] * 0.6 - m.nu * m.left_evec[0];
    double r1 = m.left_evec[0] * 0.7 + m.left_evec[1] * 0.5 - m.nu * m.left_evec[1];
    CHECK(std::abs(r0) + std::abs(r1) <= 1e-9);

    auto perm = perron_eigenvalue({0.0, 1.0, 1.0, 0.0}, 2);
    CHECK(perm.nu == doctest::Approx(1.0).epsilon(1e-12));

    auto nil = perron_eigenvalue({0.0, 2.0, 0.0, 0.0}, 2);
    CHECK(nil.nu == doctest::Approx(0.0));
}

TEST_CASE("perron eigenvalue dominates row minima and is monotone") {
    Xoshiro256pp rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> M(16), E(16);
        for (auto& x : M) x = rng.uniform() * 2.0;
        for (auto& x : E) x = rng.uniform() * 0.3;
        auto base = perron_eigenvalue(M, 4);
        double bound = 0.0;
        for (int i = 0; i < 4; ++i) {
            double mn = 1e300;
            for (int j = 0; j < 4; ++j) mn = std::min(mn, M[std::size_t(i) * 4 + std::size_t(j)]);
            bound = std::max(bound, mn);
        }
        CHECK(base.nu >= bound - 1e-9);

        auto bigger = M;
        for (std::size_t k = 0; k < 16; ++k) bigger[k] += E[k];
        auto up = perron_eigenvalue(bigger, 4);
        CHECK(up.nu >= base.nu - 1e-9);
    }
}

TEST_CASE("cell certification verdicts from the 3-sigma matrix band") {
    MeanMatrix mm;
    mm.a = 0.5;
    mm.n = 10;
    mm.r = 2;
    mm.replicas = 100;
    mm.excluded_partial = {0, 0};
    mm.row_mean_census = {1.3, 1.3};

    mm.M = {1.2, 0.1, 0.1, 1.2};
    mm.SE = {0.001, 0.001, 0.001, 0.001};
    auto cell = certify_cell(mm);
    CHECK(cell.verdict == "supercritical");
    CHECK(cell.nu_lo <= cell.central.nu);
    CHECK(cell.nu_hi >= cell.central.nu);
    CHECK(cell.central.nu == doctest::Approx(1.3).epsilon(1e-9));

    mm.M = {0.5, 0.1, 0.1, 0.5};
    auto sub = certify_cell(mm);
    CHECK(sub.verdict == "subcritical");

    mm.M = {1.0, 0.05, 0.05, 1.0};
    mm.SE = {0.2, 0.2, 0.2, 0.2}; // the band straddles 1
    auto inc = certify_cell(mm);
    CHECK(inc.verdict == "inconclusive");

    // Lower shift clamps at zero instead of going negative.
    mm.M = {0.001, 0.001, 0.001, 0.001};
    mm.SE = {0.5, 0.5, 0.5, 0.5};
    auto clamped = certify_cell(mm);
    CHECK(clamped.nu_lo == 0.0);
}

TEST_CASE("certification report over a small grid is consistent with its cells") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto pi = geom15();
    auto rep = certify_supercritical(G, law, pi, {0.45}, {6, 4}, 100, 2024);
    REQUIRE(rep.a_grid.size() == 1);
    REQUIRE(rep.n_grid.size() == 2);
    CHECK(rep.n_grid[0] == 4); // sorted
    CHECK(rep.n_grid[1] == 6);
    REQUIRE(rep.cells.size() == 2);
    CHECK(rep.cells[0].n == 4);
    CHECK(rep.cells[1].n == 6);

    // Recompute n0 and stays from the verdict sequence.
    long n0 = -1;
    bool stays = false;
    for (std::size_t k = 0; k < rep.cells.size(); ++k) {
        if (rep.cells[k].verdict == "supercritical") {
            n0 = rep.cells[k].n;
            stays = true;
            for (std::size_t j = k + 1; j < rep.cells.size(); ++j)
                stays = stays && rep.cells[j].verdict == "supercritical";
            break;
        }
    }
    CHECK(rep.n0[0] == n0);
    CHECK(rep.stays[0] == stays);
}

TEST_CASE("iterated survival holds its exact lemma and seam invariants") {
    auto G = z2_cubed();
    auto law = srw_on_generators(G);
    auto pi = geom15();
    MultitypeCaps caps;
    auto res = simulate_multitype_survival(G, law, pi, 1, 0.45, 4, 2, 60, caps, 909);
    CHECK(res.replicas == 60);
    CHECK(res.lemma_violations == 0);
    CHECK(res.seam_violations == 0);
    CHECK(res.alive <= 60);
    CHECK(res.survival_freq == doctest::Approx(double(res.alive) / 60.0).epsilon(1e-15));
    REQUIRE(res.mean_type_counts.size() == 2);
    for (const auto& level : res.mean_type_counts) {
        REQUIRE(level.size() == 3);
        for (double c : level) CHECK(c >= 0.0);
    }

    auto res3 = simulate_multitype_survival(G, law, pi, 1, 0.45, 4, 2, 60, caps, 909, 3);
    CHECK(res3.alive == res.alive);
    CHECK(res3.truncated == res.truncated);
    for (std::size_t l = 0; l < res.mean_type_counts.size(); ++l)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(res3.mean_type_counts[l][j] == res.mean_type_counts[l][j]);

    CHECK_THROWS_AS(
        simulate_multitype_survival(G, law, pi, 9, 0.45, 4, 2, 10, caps, 1), MalformedInput);
}

TEST_CASE("galton-watson extinction probabilities against closed forms") {
    // q = 0.25 + 0.75 q^2 has smallest root 1/3.
    CHECK(gw_extinction_prob({0.25, 0.0, 0.75}) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    // Critical binary branching dies out almost surely.
    CHECK(gw_extinction_prob({0.5, 0.0, 0.5}) == doctest::Approx(1.0).epsilon(1e-4));
    // Deterministic single child survives.
    CHECK(gw_extinction_prob({0.0, 1.0}) == 0.0);
    // q = 0.2 + 0.3 q + 0.5 q^2 has smallest root 0.4.
    CHECK(gw_extinction_prob({0.2, 0.3, 0.5}) == doctest::Approx(0.4).epsilon(1e-9));

    CHECK_THROWS_AS(gw_extinction_prob({}), MalformedInput);
    CHECK_THROWS_AS(gw_extinction_prob({0.5, 0.4}), MalformedInput);
    CHECK_THROWS_AS(gw_extinction_prob({1.5, -0.5}), MalformedInput);
}
