#pragma once

#include "opfline/instance.hpp"
#include "opfline/socp.hpp"
#include "opfline/sweep.hpp"

#include <map>

namespace opfline {

/// Which convex program to assemble over the branch-flow variables.
///  - Relaxed:      x box-relaxed to [0,1] for every user
///  - Fixed:        the whole assignment pinned to x_fixed
///  - LossMin:      resistive loss minimised subject to an objective floor,
///                  with the assignment pinned to x_fixed
/// Additional pins and linear capacity rows apply in every mode.
enum class RelaxationKind { Relaxed, Fixed, LossMin };

/// sum_k coeffs[k] * x[users[k]] <= bound
struct LinearCap {
    std::vector<int> users;
    std::vector<double> coeffs;
    double bound = 0.0;
};

struct RelaxationSpec {
    RelaxationKind kind = RelaxationKind::Relaxed;
    std::vector<double> x_fixed;          // Fixed / LossMin: full assignment
    std::map<int, double> pins;           // user index -> pinned value
    std::vector<LinearCap> caps;
    double objective_floor = 0.0;         // LossMin only
    double floor_slack = 1e-9;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::NumericalFailure;
    PowerFlowState state;
    double objective = 0.0; // welfare value f(s0, x) of the returned state
    double loss = 0.0;      // total resistive loss sum_e Re(z_e) l_e
    int iterations = 0;
    std::string message;
};

ConeProgram assemble_cone_program(const RadialInstance& inst, const RelaxationSpec& spec);

SolveOutcome solve_relaxation(const RadialInstance& inst, const RelaxationSpec& spec,
                              const SocpSettings& settings = {});

struct ExactnessResult {
    bool success = false;
    PowerFlowState state;
    double objective = 0.0;
    double relaxed_objective = 0.0; // optimum of the x-pinned relaxation
    FeasibilityReport report;
    std::string message;
};

/// Given a (possibly fractional) assignment with a feasible x-pinned
/// relaxation, produces an exact branch-flow state at the same assignment:
/// solve the pinned relaxation, re-solve minimising loss at that objective
/// value, then run one exact-current sweep and verify feasibility.
ExactnessResult restore_exactness(const RadialInstance& inst, const std::vector<double>& x,
                                  double tol = 1e-6, const SocpSettings& settings = {});

} // namespace opfline
