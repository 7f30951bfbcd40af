#include "gufp_check.hpp"
#include "opfline/gufp.hpp"
#include "opfline/io.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace opfline;
using namespace opfline::testing;

namespace {

// Single-dimension instance with one shared base function per term.
GufpInstance one_dim(std::vector<double> util, std::vector<std::vector<double>> base,
                     std::vector<std::vector<double>> coeff, std::vector<int> start,
                     std::vector<int> sat, std::vector<double> cap) {
    GufpInstance g;
    g.utility = std::move(util);
    GufpDimension d;
    d.terms = static_cast<int>(base.size());
    d.base = std::move(base);
    d.coeff = std::move(coeff);
    d.start = std::move(start);
    d.sat = std::move(sat);
    d.capacity = std::move(cap);
    g.dims.push_back(std::move(d));
    return g;
}

} // namespace

TEST_CASE("separable demand evaluation") {
    // One user, 3 edges, two terms with coefficients (2, 3) against constant
    // bases (1, 0.5); active from edge 1, saturated at edge 1.
    const GufpInstance g = one_dim({1.0}, {{1, 1, 1}, {0.5, 0.5, 0.5}}, {{2.0}, {3.0}}, {1}, {1},
                                   {10, 10, 10});
    CHECK(evaluate_demand(g, 0, 0, 0) == 0.0);
    CHECK(evaluate_demand(g, 0, 0, 1) == doctest::Approx(3.5));
    CHECK(evaluate_demand(g, 0, 0, 2) == doctest::Approx(3.5)); // saturated
}

TEST_CASE("edge partition") {
    SUBCASE("a constant base yields a single interval") {
        const GufpInstance g =
            one_dim({1.0}, {{2, 2, 2, 2}}, {{1.0}}, {0}, {3}, {10, 10, 10, 10});
        const EdgePartition part = build_partition(g, 2.0);
        REQUIRE(part.count(0) == 1);
        CHECK(part.spans[0][0] == std::pair<int, int>{0, 3});
    }
    SUBCASE("cuts fall where the base more than doubles") {
        const GufpInstance g =
            one_dim({1.0}, {{1, 1.5, 4, 9}}, {{1.0}}, {0}, {3}, {20, 20, 20, 20});
        const EdgePartition part = build_partition(g, 2.0);
        REQUIRE(part.count(0) == 3);
        CHECK(part.spans[0][0] == std::pair<int, int>{0, 1});
        CHECK(part.spans[0][1] == std::pair<int, int>{2, 2});
        CHECK(part.spans[0][2] == std::pair<int, int>{3, 3});
    }
    SUBCASE("per-interval demand spread stays within the growth factor") {
        for (int seed = 0; seed < 20; ++seed) {
            const GufpInstance g = generate_gufp(1000 + seed, 8, 5);
            const EdgePartition part = build_partition(g, 2.0);
            for (int r = 0; r < g.num_dims(); ++r)
                for (int p = 0; p < part.count(r); ++p)
                    for (int k = 0; k < g.num_users(); ++k) {
                        const auto [lo, hi] = part.spans[r][p];
                        const double fmin = min_positive_demand(g, k, r, lo, hi);
                        if (fmin > 0.0)
                            CHECK(peak_demand(g, k, r, lo, hi) <= 2.0 * fmin * (1 + 1e-12));
                    }
        }
    }
    SUBCASE("interval count respects the logarithmic bound") {
        for (int seed = 0; seed < 20; ++seed) {
            const GufpInstance g = generate_gufp(2000 + seed, 6, 6);
            const EdgePartition part = build_partition(g, 2.0);
            for (int r = 0; r < g.num_dims(); ++r) {
                const GufpDimension& d = g.dims[r];
                // One interval per term plus the geometric growth, plus the
                // leading span covering edges before the first positive base.
                double bound = d.terms + 1;
                for (int t = 0; t < d.terms; ++t) {
                    double bmin = 0.0, bmax = 0.0;
                    for (double b : d.base[t]) {
                        if (b > 0.0 && (bmin == 0.0 || b < bmin)) bmin = b;
                        bmax = std::max(bmax, b);
                    }
                    if (bmin > 0.0) bound += std::log2(bmax / bmin);
                }
                CHECK(part.count(r) <= bound + 1e-9);
            }
        }
    }
}

TEST_CASE("user grouping") {
    SUBCASE("identical users share a group") {
        const GufpInstance g = one_dim({2.0, 2.0, 2.0}, {{1, 1}}, {{0.5, 0.5, 0.5}}, {0, 0, 0},
                                       {1, 1, 1}, {10, 10});
        const Grouping grp = group_users(g, 0.5);
        CHECK(grp.surviving.size() == 3);
        CHECK(grp.groups.size() == 1);
    }
    SUBCASE("negligible utilities are filtered out") {
        const GufpInstance g = one_dim({2.0, 0.01}, {{1, 1}}, {{0.5, 0.5}}, {0, 0}, {1, 1},
                                       {10, 10});
        const Grouping grp = group_users(g, 0.5);
        // Threshold is 0.5 * 2 / 2 = 0.5.
        CHECK(grp.surviving == std::vector<int>{0});
    }
    SUBCASE("a factor-4 utility-to-coefficient gap separates dyadic classes") {
        const GufpInstance g = one_dim({1.0, 4.0}, {{1, 1}}, {{1.0, 1.0}}, {0, 0}, {1, 1},
                                       {10, 10});
        const Grouping grp = group_users(g, 0.5);
        REQUIRE(grp.surviving.size() == 2);
        REQUIRE(grp.groups.size() == 2);
        const std::vector<int> qa = grp.groups.begin()->first;
        const std::vector<int> qb = std::next(grp.groups.begin())->first;
        CHECK(std::abs(qa[0] - qb[0]) >= 2);
    }
}

TEST_CASE("restricted profile from a fractional assignment") {
    const GufpInstance base = one_dim({1.0}, {{1, 1}}, {{0.37}}, {0}, {1}, {10, 10});
    const EdgePartition part = build_partition(base, 2.0);
    const std::vector<std::vector<double>> h{{1.0}};

    SUBCASE("the all-off assignment gives the zero profile") {
        const auto prof = restricted_profile_from_fractional(base, {0}, {0.0}, part, h, 0.25);
        CHECK(prof[0][0] == 0.0);
        CHECK(prof[0][1] == 0.0);
    }
    SUBCASE("a lattice-point load is preserved") {
        GufpInstance g = base;
        g.dims[0].coeff = {{0.5}};
        const auto prof = restricted_profile_from_fractional(g, {0}, {1.0}, part, h, 0.25);
        CHECK(prof[0][0] == doctest::Approx(0.5));
    }
    SUBCASE("off-lattice loads floor to the lattice") {
        const auto prof = restricted_profile_from_fractional(base, {0}, {1.0}, part, h, 0.25);
        CHECK(prof[0][0] == doctest::Approx(0.25));
    }
    SUBCASE("a non-integral reciprocal is rejected") {
        CHECK_THROWS_AS(restricted_profile_from_fractional(base, {0}, {1.0}, part, h, 0.3),
                        std::invalid_argument);
    }
}

TEST_CASE("rounding small demands") {
    SUBCASE("the empty user set is a fixed point") {
        const GufpInstance g = one_dim({1.0}, {{1, 1}}, {{0.5}}, {0}, {1}, {10, 10});
        const EdgePartition part = build_partition(g, 2.0);
        const ModifyResult res = modify(g, {}, {0.7}, part, {{1.0}}, 0.5);
        CHECK(res.x_hat[0] == doctest::Approx(0.7)); // untouched, not in the set
        CHECK(res.fractional_support == 0);
        CHECK(res.removed_utility == 0.0);
    }
    SUBCASE("an integral fitting assignment passes through unchanged") {
        const GufpInstance g = one_dim({1.0, 1.0, 1.0}, {{1, 1}}, {{0.25, 0.25, 0.25}},
                                       {0, 0, 0}, {1, 1, 1}, {10, 10});
        const EdgePartition part = build_partition(g, 2.0);
        // Loads 0.25 + 0.25 = 0.5 sit exactly on the profile lattice of h = 1.
        const std::vector<double> x{1.0, 0.0, 1.0};
        const ModifyResult res = modify(g, {0, 1, 2}, x, part, {{1.0}}, 0.25);
        CHECK(res.x_hat == x);
        CHECK(res.removed_utility == 0.0);
    }
    SUBCASE("random instances satisfy both rounding guarantees") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> frac(0.0, 1.0);
        for (int seed = 0; seed < 20; ++seed) {
            const GufpInstance g = generate_gufp(3000 + seed, 8, 5);
            std::vector<double> x(g.num_users());
            for (double& xi : x) xi = frac(rng);
            const RoundingCheck chk = check_rounding(g, 0.5, x);
            CHECK(chk.condition_i);
            CHECK(chk.condition_ii);
            CHECK(chk.support_ok);
            CHECK(chk.groups_checked > 0);
        }
    }
}

TEST_CASE("basic-solution extraction") {
    SUBCASE("an integral point is already a vertex") {
        const GufpInstance g = one_dim({1.0, 2.0}, {{1, 1}}, {{0.3, 0.4}}, {0, 0}, {1, 1},
                                       {10, 10});
        const std::vector<std::vector<double>> prof{{1.0, 1.0}};
        const std::vector<double> out = to_bfs(g, {0, 1}, prof, {1.0, 0.0});
        CHECK(out == std::vector<double>{1.0, 0.0});
    }
    SUBCASE("one tight row leaves at most one fractional entry") {
        const GufpInstance g = one_dim({1.0, 1.0}, {{1}}, {{1.0, 1.0}}, {0, 0}, {0, 0}, {10});
        const std::vector<std::vector<double>> prof{{1.0}};
        const std::vector<double> out = to_bfs(g, {0, 1}, prof, {0.5, 0.5});
        int nfrac = 0;
        for (double v : out)
            if (v > 1e-9 && v < 1.0 - 1e-9) ++nfrac;
        CHECK(nfrac <= 1);
        CHECK(out[0] + out[1] >= 1.0 - 1e-9); // utility not decreased
        CHECK(out[0] + out[1] <= 1.0 + 1e-9); // still packed
    }
    SUBCASE("fractional support is bounded by the non-redundant row count") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> frac(0.0, 0.6);
        for (int seed = 0; seed < 10; ++seed) {
            const GufpInstance g = generate_gufp(4000 + seed, 10, 4);
            std::vector<int> users(g.num_users());
            for (int k = 0; k < g.num_users(); ++k) users[k] = k;
            std::vector<double> start(g.num_users());
            for (double& s : start) s = frac(rng);

            // Capacity profile: the start's own loads, so the start is feasible.
            std::vector<std::vector<double>> prof(g.num_dims(),
                                                  std::vector<double>(g.num_edges(), 0.0));
            int rows = 0;
            for (int r = 0; r < g.num_dims(); ++r) {
                for (int e = 0; e < g.num_edges(); ++e)
                    for (int k = 0; k < g.num_users(); ++k)
                        prof[r][e] += evaluate_demand(g, k, r, e) * start[k];
                for (int e = 0; e < g.num_edges(); ++e)
                    if ((e + 1 == g.num_edges() || prof[r][e + 1] != prof[r][e]) &&
                        prof[r][e] > 0.0)
                        ++rows;
            }

            const std::vector<double> out = to_bfs(g, users, prof, start);
            double before = 0.0, after = 0.0;
            int nfrac = 0;
            for (int k = 0; k < g.num_users(); ++k) {
                before += g.utility[k] * start[k];
                after += g.utility[k] * out[k];
                if (out[k] > 1e-9 && out[k] < 1.0 - 1e-9) ++nfrac;
            }
            CHECK(after >= before - 1e-9 * (1.0 + before));
            CHECK(nfrac <= rows);
        }
    }
}

TEST_CASE("capacity check") {
    const GufpInstance g = one_dim({1.0}, {{1, 2}}, {{1.0}}, {0}, {1}, {0.5, 0.5});
    SUBCASE("the empty selection always fits") {
        CHECK(check_gufp_feasible(g, {0.0}));
    }
    SUBCASE("a single oversized user does not") {
        CHECK_FALSE(check_gufp_feasible(g, {1.0}));
    }
    SUBCASE("verdicts match direct constraint evaluation") {
        std::mt19937_64 rng(13);
        for (int seed = 0; seed < 10; ++seed) {
            const GufpInstance gi = generate_gufp(5000 + seed, 8, 5);
            std::vector<double> x(gi.num_users());
            for (double& xi : x) xi = (rng() & 1) ? 1.0 : 0.0;
            bool ok = true;
            for (int r = 0; ok && r < gi.num_dims(); ++r)
                for (int e = 0; ok && e < gi.num_edges(); ++e) {
                    double load = 0.0;
                    for (int k = 0; k < gi.num_users(); ++k)
                        load += evaluate_demand(gi, k, r, e) * x[k];
                    if (load > gi.dims[r].capacity[e] * (1 + 1e-9) + 1e-9) ok = false;
                }
            CHECK(check_gufp_feasible(gi, x) == ok);
        }
    }
}

TEST_CASE("level grid brackets every demand scale") {
    for (int seed = 0; seed < 10; ++seed) {
        const GufpInstance g = generate_gufp(6000 + seed, 6, 5);
        const LevelGrid grid = build_levels(g, 0.5);
        for (int r = 0; r < g.num_dims(); ++r) {
            double fmin = 0.0, fmax = 0.0;
            for (int k = 0; k < g.num_users(); ++k) {
                const double lo = min_positive_demand(g, k, r, 0, g.num_edges() - 1);
                if (lo > 0.0 && (fmin == 0.0 || lo < fmin)) fmin = lo;
                fmax = std::max(fmax, evaluate_demand(g, k, r, g.num_edges() - 1));
            }
            if (fmin == 0.0) continue;
            REQUIRE(grid.levels[r].size() >= 2);
            CHECK(grid.levels[r][1] <= fmin * (1 + 1e-12));
            CHECK(grid.levels[r].back() * (1 + 0.5) >= g.num_users() * fmax);
        }
    }
}
