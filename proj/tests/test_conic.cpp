#include "helpers.hpp"
#include "opfline/conic.hpp"
#include "opfline/io.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace opfline;
using namespace opfline::testing;

namespace {

// Fixed 3-node line used for the external cross-check below.
RadialInstance cross_check_instance() {
    RadialInstance inst = make_line(3, {0.0, 0.0}, 2.0, 5.0, 0.9025, 1.1025);
    inst.edges[1].z = {0.01, 0.02};
    inst.edges[2].z = {0.015, 0.025};
    inst.edges[3].z = {0.02, 0.01};
    add_user(inst, 3, {0.8, 0.2}, 1.5);
    add_user(inst, 2, {0.5, 0.1}, 1.0);
    add_user(inst, 1, {0.6, 0.3}, 0.0, UserKind::Elastic);
    inst.objective.breakpoints = {-0.5};
    inst.objective.slopes = {1.2, 0.8};
    inst.objective.m_shift = 2.0;
    inst.objective.f1_weights[2] = 0.7;
    inst.finalize();
    return inst;
}

} // namespace

TEST_CASE("demand-free relaxation is optimal at zero") {
    RadialInstance inst = make_line(2, {0.01, 0.01}, 1.0, 1.0);
    inst.finalize();
    const SolveOutcome sol = solve_relaxation(inst, RelaxationSpec{});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.objective) <= 1e-7);
    // The constant objective leaves the currents free, so minimise loss at the
    // same objective level to pin them down.
    RelaxationSpec lossmin;
    lossmin.kind = RelaxationKind::LossMin;
    lossmin.objective_floor = sol.objective;
    const SolveOutcome min = solve_relaxation(inst, lossmin);
    REQUIRE(min.status == SolveStatus::Optimal);
    CHECK(min.loss <= 1e-6);
}

TEST_CASE("an unconstrained user is fully served") {
    RadialInstance inst = make_line(1, {0.001, 0.001}, 100.0, 100.0, 0.2, 2.0);
    add_user(inst, 1, {1.0, 0.0}, 5.0);
    inst.finalize();
    const SolveOutcome sol = solve_relaxation(inst, RelaxationSpec{});
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.state.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("a demand tripping the voltage floor is infeasible only when served") {
    RadialInstance inst = make_line(1, {0.05, 0.0}, 10.0, 10.0, 0.95, 1.21);
    add_user(inst, 1, {2.0, 0.0}, 1.0);
    inst.finalize();
    // Serving the load drops v_1 by at least 2*Re(z*s) = 0.2, through the floor.
    RelaxationSpec on;
    on.kind = RelaxationKind::Fixed;
    on.x_fixed = {1.0};
    CHECK(solve_relaxation(inst, on).status == SolveStatus::PrimalInfeasible);
    RelaxationSpec off;
    off.kind = RelaxationKind::Fixed;
    off.x_fixed = {0.0};
    CHECK(solve_relaxation(inst, off).status == SolveStatus::Optimal);
}

TEST_CASE("relaxation matches an independent convex solver") {
    const RadialInstance inst = cross_check_instance();
    const SolveOutcome sol = solve_relaxation(inst, RelaxationSpec{});
    REQUIRE(sol.status == SolveStatus::Optimal);
    // Reference value computed with two unrelated conic solvers (Clarabel and
    // CVXOPT), which agree to 1e-8.
    CHECK(near(sol.objective, 2.9004907, 1e-5));
}

TEST_CASE("relaxation dominates every pinned binary assignment") {
    const RadialInstance inst = cross_check_instance();
    const SolveOutcome relaxed = solve_relaxation(inst, RelaxationSpec{});
    REQUIRE(relaxed.status == SolveStatus::Optimal);
    for (int mask = 0; mask < 4; ++mask) {
        RelaxationSpec spec;
        spec.kind = RelaxationKind::Relaxed;
        spec.pins[0] = mask & 1 ? 1.0 : 0.0;
        spec.pins[1] = mask & 2 ? 1.0 : 0.0;
        const SolveOutcome pinned = solve_relaxation(inst, spec);
        if (pinned.status != SolveStatus::Optimal) continue;
        CHECK(relaxed.objective >= pinned.objective - 1e-6);
    }
}

TEST_CASE("exactness restoration") {
    SUBCASE("all-off on a demand-free network is exact with zero loss") {
        RadialInstance inst = make_line(2, {0.01, 0.02}, 1.0, 1.0);
        inst.finalize();
        const ExactnessResult res = restore_exactness(inst, {});
        REQUIRE(res.success);
        CHECK(res.report.exactness <= 1e-10);
        CHECK(std::abs(res.objective) <= 1e-7);
    }
    SUBCASE("restoration removes the cone slack of a pinned solve") {
        RadialInstance inst = make_line(1, {0.02, 0.01}, 5.0, 5.0);
        add_user(inst, 1, {1.0, 0.3}, 1.0);
        inst.finalize();
        const ExactnessResult res = restore_exactness(inst, {1.0});
        REQUIRE(res.success);
        CHECK(res.report.exactness <= 1e-6);
        CHECK(res.report.feasible);
    }
    SUBCASE("restoration does not degrade the pinned objective") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 8; ++trial) {
            const RadialInstance inst = generate_instance(500 + trial, 5, 3, 1);
            std::vector<double> x(inst.users.size(), 0.0);
            for (int k : inst.inelastic_users()) x[k] = rng() & 1 ? 1.0 : 0.0;
            const ExactnessResult res = restore_exactness(inst, x);
            if (!res.success) {
                // The random assignment may simply be infeasible; all-off never is.
                const ExactnessResult off = restore_exactness(inst, std::vector<double>(x.size(), 0.0));
                CHECK(off.success);
                continue;
            }
            CHECK(res.objective >= res.relaxed_objective - 1e-6);
            CHECK(res.report.exactness <= 1e-6);
        }
    }
}

TEST_CASE("loss minimisation never increases total loss") {
    const RadialInstance inst = cross_check_instance();
    RelaxationSpec fixed;
    fixed.kind = RelaxationKind::Fixed;
    fixed.x_fixed = {0.0, 1.0, 0.5};
    const SolveOutcome base = solve_relaxation(inst, fixed);
    REQUIRE(base.status == SolveStatus::Optimal);
    RelaxationSpec lossmin = fixed;
    lossmin.kind = RelaxationKind::LossMin;
    lossmin.objective_floor = base.objective;
    const SolveOutcome minimal = solve_relaxation(inst, lossmin);
    REQUIRE(minimal.status == SolveStatus::Optimal);
    CHECK(minimal.loss <= base.loss + 1e-7);
    CHECK(minimal.objective >= base.objective - 1e-6);
}

TEST_CASE("restored voltages stay below the feeder voltage") {
    for (int trial = 0; trial < 5; ++trial) {
        RadialInstance inst = generate_instance(700 + trial, 5, 4, 1);
        const RotationRecord rot = rotation_angle(inst);
        RadialInstance ri = rotate_instance(inst, rot);
        ri.finalize();
        std::vector<double> x(ri.users.size(), 0.0);
        for (int k : ri.inelastic_users()) x[k] = (trial + k) % 2 ? 1.0 : 0.0;
        const ExactnessResult res = restore_exactness(ri, x);
        if (!res.success) continue;
        for (int j = 1; j <= ri.node_count; ++j) CHECK(res.state.v[j] <= ri.v0 + 1e-8);
    }
}

TEST_CASE("linear capacity rows bind the relaxed assignment") {
    RadialInstance inst = make_line(1, {0.001, 0.001}, 100.0, 100.0, 0.2, 2.0);
    add_user(inst, 1, {0.5, 0.0}, 2.0);
    add_user(inst, 1, {0.5, 0.0}, 1.0);
    inst.finalize();
    RelaxationSpec spec;
    spec.caps.push_back({{0, 1}, {1.0, 1.0}, 1.2});
    const SolveOutcome sol = solve_relaxation(inst, spec);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.state.x[0] + sol.state.x[1] <= 1.2 + 1e-6);
    // Utility prefers user 0 at full service.
    CHECK(sol.state.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(sol.state.x[1] == doctest::Approx(0.2).epsilon(1e-4));
}
