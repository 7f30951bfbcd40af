#include "opfline/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opfline {

namespace {

double rel(double violation, double bound) { return violation / (1.0 + std::abs(bound)); }

} // namespace

double FeasibilityReport::worst_relaxed() const {
    return std::max({power_balance, root_balance, voltage_drop, voltage_bounds, forward_capacity,
                     reverse_capacity, current_cap, cone});
}

double FeasibilityReport::worst_exact() const { return std::max(worst_relaxed(), exactness); }

PowerFlowState forward_backward_sweep(const RadialInstance& inst, const std::vector<double>& x_bar,
                                      const PowerFlowState& baseline, SweepMode mode) {
    if (x_bar.size() != inst.users.size()) throw std::invalid_argument("assignment size mismatch");

    PowerFlowState out = inst.zero_state();
    out.x = x_bar;

    // Forward sweep, leaves toward the root.
    for (auto it = inst.bfs_order.rbegin(); it != inst.bfs_order.rend(); ++it) {
        const int j = *it;
        const int i = inst.parent[j];
        if (mode == SweepMode::ExactCurrent) {
            const double vi = baseline.v[i];
            if (vi <= 0.0) throw std::runtime_error("baseline voltage non-positive at node " + std::to_string(i));
            out.l[j] = std::norm(baseline.S[j]) / vi;
        } else {
            out.l[j] = baseline.l[j];
        }
        Complex S{0.0, 0.0};
        for (int k : inst.node_users[j]) S += inst.users[k].demand * x_bar[k];
        for (int c : inst.children[j]) S += out.S[c];
        S += inst.edges[j].z * out.l[j];
        out.S[j] = S;
    }
    out.s0 = -out.S[1];

    // Backward sweep, root toward the leaves.
    out.v[0] = inst.v0;
    for (int j : inst.bfs_order) {
        const int i = inst.parent[j];
        const Complex z = inst.edges[j].z;
        out.v[j] = out.v[i] + std::norm(z) * out.l[j] - 2.0 * std::real(std::conj(z) * out.S[j]);
    }
    return out;
}

std::vector<Complex> aggregate_power(const RadialInstance& inst, const std::vector<double>& x,
                                     const std::vector<double>& l) {
    std::vector<Complex> S(inst.node_count + 1, Complex{0.0, 0.0});
    for (int j = 1; j <= inst.node_count; ++j) {
        Complex acc{0.0, 0.0};
        for (int k : inst.subtree_users(j)) acc += inst.users[k].demand * x[k];
        // Loss term over the edge (i,j) and every edge strictly below j.
        std::vector<int> stack{j};
        while (!stack.empty()) {
            int c = stack.back();
            stack.pop_back();
            acc += inst.edges[c].z * l[c];
            for (int cc : inst.children[c]) stack.push_back(cc);
        }
        S[j] = acc;
    }
    return S;
}

std::vector<double> closed_form_voltage(const RadialInstance& inst, const std::vector<double>& x,
                                        const std::vector<double>& l) {
    std::vector<double> v(inst.node_count + 1, inst.v0);
    for (int j = 1; j <= inst.node_count; ++j) {
        const std::vector<int> pj = inst.path_edges(j);
        double demand_term = 0.0;
        for (size_t k = 0; k < inst.users.size(); ++k) {
            const std::vector<int> pk = inst.path_edges(inst.users[k].node);
            Complex acc{0.0, 0.0};
            // Shared prefix of the two root paths.
            for (size_t i = 0; i < std::min(pj.size(), pk.size()) && pj[i] == pk[i]; ++i)
                acc += std::conj(inst.edges[pj[i]].z) * inst.users[k].demand;
            demand_term += acc.real() * x[k];
        }
        double loss_term = 0.0;
        for (int t : pj) {
            Complex below{0.0, 0.0};
            std::vector<int> stack(inst.children[t].begin(), inst.children[t].end());
            while (!stack.empty()) {
                int c = stack.back();
                stack.pop_back();
                below += inst.edges[c].z * l[c];
                for (int cc : inst.children[c]) stack.push_back(cc);
            }
            loss_term += 2.0 * std::real(std::conj(inst.edges[t].z) * below);
            loss_term += std::norm(inst.edges[t].z) * l[t];
        }
        v[j] = inst.v0 - 2.0 * demand_term - loss_term;
    }
    return v;
}

FeasibilityReport check_feasibility(const RadialInstance& inst, const PowerFlowState& state, double tol) {
    FeasibilityReport rep;
    for (int j = 1; j <= inst.node_count; ++j) {
        const int i = inst.parent[j];
        const Complex z = inst.edges[j].z;

        Complex rhs{0.0, 0.0};
        for (int k : inst.node_users[j]) rhs += inst.users[k].demand * state.x[k];
        for (int c : inst.children[j]) rhs += state.S[c];
        rhs += z * state.l[j];
        rep.power_balance = std::max(rep.power_balance, rel(std::abs(state.S[j] - rhs), std::abs(rhs)));

        const double vdrop = state.v[i] + std::norm(z) * state.l[j] - 2.0 * std::real(std::conj(z) * state.S[j]);
        rep.voltage_drop = std::max(rep.voltage_drop, rel(std::abs(state.v[j] - vdrop), state.v[j]));

        rep.voltage_bounds = std::max(rep.voltage_bounds,
                                      std::max(rel(inst.v_min[j] - state.v[j], inst.v_min[j]),
                                               rel(state.v[j] - inst.v_max[j], inst.v_max[j])));

        const double scap = inst.edges[j].power_cap;
        rep.forward_capacity = std::max(rep.forward_capacity, rel(std::abs(state.S[j]) - scap, scap));
        rep.reverse_capacity =
            std::max(rep.reverse_capacity, rel(std::abs(-state.S[j] + z * state.l[j]) - scap, scap));

        const double lcap = inst.edges[j].current_cap;
        rep.current_cap = std::max({rep.current_cap, rel(state.l[j] - lcap, lcap), rel(-state.l[j], 0.0)});

        const double sq = std::norm(state.S[j]);
        const double lv = state.l[j] * state.v[i];
        rep.cone = std::max(rep.cone, rel(sq - lv, sq));
        rep.exactness = std::max(rep.exactness, rel(std::abs(lv - sq), sq));
    }
    rep.root_balance = rel(std::abs(state.S[1] + state.s0), std::abs(state.s0));

    // Clamp the one-sided residuals at zero.
    rep.voltage_bounds = std::max(rep.voltage_bounds, 0.0);
    rep.forward_capacity = std::max(rep.forward_capacity, 0.0);
    rep.reverse_capacity = std::max(rep.reverse_capacity, 0.0);
    rep.current_cap = std::max(rep.current_cap, 0.0);
    rep.cone = std::max(rep.cone, 0.0);

    rep.feasible = rep.worst_relaxed() <= tol;
    return rep;
}

} // namespace opfline
