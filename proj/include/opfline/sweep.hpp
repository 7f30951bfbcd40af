#pragma once

#include "opfline/instance.hpp"

namespace opfline {

/// ExactCurrent recomputes each squared current from the baseline power and
/// voltage; KeepCurrent carries the baseline currents through unchanged.
enum class SweepMode { ExactCurrent, KeepCurrent };

/// Worst-case residuals of the branch-flow constraints. Equality residuals
/// and bound residuals are scaled by 1/(1+|bound|).
struct FeasibilityReport {
    double power_balance = 0.0;   // per-edge complex balance
    double root_balance = 0.0;    // s0 vs feeder power
    double voltage_drop = 0.0;    // Ohm recursion
    double voltage_bounds = 0.0;
    double forward_capacity = 0.0;
    double reverse_capacity = 0.0;
    double current_cap = 0.0;
    double cone = 0.0;            // max_e (|S_e|^2 - l_e v_i)+
    double exactness = 0.0;       // max_e |l_e v_i - |S_e|^2|
    bool feasible = false;        // relaxed verdict at the query tolerance

    double worst_relaxed() const;
    double worst_exact() const;
    bool feasible_relaxed(double tol) const { return worst_relaxed() <= tol; }
    bool feasible_exact(double tol) const { return worst_exact() <= tol; }
};

/// One pass of the forward-backward sweep: branch powers leaf-to-root from
/// the assignment and currents, then voltages root-to-leaf. Equality
/// constraints hold by construction in the output.
PowerFlowState forward_backward_sweep(const RadialInstance& inst, const std::vector<double>& x_bar,
                                      const PowerFlowState& baseline, SweepMode mode);

/// Closed form of the forward sweep: S_e = sum of subtree demands plus
/// accumulated line losses at and below e.
std::vector<Complex> aggregate_power(const RadialInstance& inst, const std::vector<double>& x,
                                     const std::vector<double>& l);

/// Closed form of the backward sweep voltage recursion.
std::vector<double> closed_form_voltage(const RadialInstance& inst, const std::vector<double>& x,
                                        const std::vector<double>& l);

FeasibilityReport check_feasibility(const RadialInstance& inst, const PowerFlowState& state, double tol);

} // namespace opfline
