#include "opfline/conic.hpp"

#include <cmath>
#include <stdexcept>

namespace opfline {

namespace {

// Column layout: [s0_re, s0_im, x_0..n-1, v_1..m, l_1..m, S_re_1..m, S_im_1..m, t]
struct VarMap {
    int n, m;
    int s0re() const { return 0; }
    int s0im() const { return 1; }
    int x(int k) const { return 2 + k; }
    int v(int j) const { return 2 + n + (j - 1); }
    int l(int j) const { return 2 + n + m + (j - 1); }
    int Sre(int j) const { return 2 + n + 2 * m + (j - 1); }
    int Sim(int j) const { return 2 + n + 3 * m + (j - 1); }
    int t() const { return 2 + n + 4 * m; }
    int total() const { return 2 + n + 4 * m + 1; }
};

struct RowBuilder {
    std::vector<std::vector<std::pair<int, double>>> rows;
    std::vector<double> rhs;

    void add(std::vector<std::pair<int, double>> coeffs, double r) {
        rows.push_back(std::move(coeffs));
        rhs.push_back(r);
    }
    void fill(Eigen::MatrixXd& M, Eigen::VectorXd& v, int ncols) const {
        M.setZero(static_cast<int>(rows.size()), ncols);
        v.resize(static_cast<int>(rows.size()));
        for (size_t i = 0; i < rows.size(); ++i) {
            for (auto [c, a] : rows[i]) M(static_cast<int>(i), c) += a;
            v(static_cast<int>(i)) = rhs[i];
        }
    }
};

std::vector<double> objective_coeffs(const RadialInstance& inst) {
    std::vector<double> c(inst.users.size());
    for (size_t k = 0; k < inst.users.size(); ++k) {
        const User& u = inst.users[k];
        c[k] = (u.kind == UserKind::Inelastic) ? u.utility : u.f1_coeff;
    }
    return c;
}

} // namespace

ConeProgram assemble_cone_program(const RadialInstance& inst, const RelaxationSpec& spec) {
    const int n = static_cast<int>(inst.users.size());
    const int m = inst.node_count;
    const VarMap vm{n, m};
    const std::vector<double> ucoef = objective_coeffs(inst);

    const bool pin_all = spec.kind != RelaxationKind::Relaxed;
    if (pin_all && static_cast<int>(spec.x_fixed.size()) != n)
        throw std::invalid_argument("x_fixed size mismatch");

    RowBuilder eq;
    // Power balance on each edge, real and imaginary parts.
    for (int j = 1; j <= m; ++j) {
        const Complex z = inst.edges[j].z;
        std::vector<std::pair<int, double>> re{{vm.Sre(j), 1.0}, {vm.l(j), -z.real()}};
        std::vector<std::pair<int, double>> im{{vm.Sim(j), 1.0}, {vm.l(j), -z.imag()}};
        for (int k : inst.node_users[j]) {
            re.emplace_back(vm.x(k), -inst.users[k].demand.real());
            im.emplace_back(vm.x(k), -inst.users[k].demand.imag());
        }
        for (int c : inst.children[j]) {
            re.emplace_back(vm.Sre(c), -1.0);
            im.emplace_back(vm.Sim(c), -1.0);
        }
        eq.add(std::move(re), 0.0);
        eq.add(std::move(im), 0.0);
    }
    // Feeder balance s0 = -S_1.
    eq.add({{vm.s0re(), 1.0}, {vm.Sre(1), 1.0}}, 0.0);
    eq.add({{vm.s0im(), 1.0}, {vm.Sim(1), 1.0}}, 0.0);
    // Voltage drop; v at the root is the constant v0.
    for (int j = 1; j <= m; ++j) {
        const Complex z = inst.edges[j].z;
        std::vector<std::pair<int, double>> row{{vm.v(j), 1.0},
                                                {vm.l(j), -std::norm(z)},
                                                {vm.Sre(j), 2.0 * z.real()},
                                                {vm.Sim(j), 2.0 * z.imag()}};
        double r = 0.0;
        const int i = inst.parent[j];
        if (i == 0)
            r = inst.v0;
        else
            row.emplace_back(vm.v(i), -1.0);
        eq.add(std::move(row), r);
    }
    // Pinned assignments.
    if (pin_all) {
        for (int k = 0; k < n; ++k) eq.add({{vm.x(k), 1.0}}, spec.x_fixed[k]);
    } else {
        for (auto [k, val] : spec.pins) {
            if (k < 0 || k >= n) throw std::invalid_argument("pin for unknown user");
            eq.add({{vm.x(k), 1.0}}, val);
        }
    }

    RowBuilder orth; // rows g.x <= h
    for (int j = 1; j <= m; ++j) {
        orth.add({{vm.v(j), -1.0}}, -inst.v_min[j]);
        orth.add({{vm.v(j), 1.0}}, inst.v_max[j]);
        orth.add({{vm.l(j), -1.0}}, 0.0);
        orth.add({{vm.l(j), 1.0}}, inst.edges[j].current_cap);
    }
    if (!pin_all)
        for (int k = 0; k < n; ++k) {
            orth.add({{vm.x(k), -1.0}}, 0.0);
            orth.add({{vm.x(k), 1.0}}, 1.0);
        }
    // Hypograph of the concave generation term: t <= a*g(s0) + b per piece.
    const double cphi = std::cos(inst.objective.phi);
    const double sphi = std::sin(inst.objective.phi);
    for (auto [a, b] : inst.objective.segments())
        orth.add({{vm.t(), 1.0}, {vm.s0re(), -a * cphi}, {vm.s0im(), -a * sphi}}, b);
    for (const LinearCap& cap : spec.caps) {
        std::vector<std::pair<int, double>> row;
        for (size_t i = 0; i < cap.users.size(); ++i) row.emplace_back(vm.x(cap.users[i]), cap.coeffs[i]);
        orth.add(std::move(row), cap.bound);
    }
    if (spec.kind == RelaxationKind::LossMin) {
        // Welfare t + sum u_k x_k >= floor - slack.
        std::vector<std::pair<int, double>> row{{vm.t(), -1.0}};
        for (int k = 0; k < n; ++k)
            if (ucoef[k] != 0.0) row.emplace_back(vm.x(k), -ucoef[k]);
        orth.add(std::move(row), -(spec.objective_floor - spec.floor_slack));
    }
    const int orthant_dim = static_cast<int>(orth.rows.size());

    RowBuilder cone; // SOC rows appended after the orthant block
    std::vector<int> soc_dims;
    for (int j = 1; j <= m; ++j) {
        const Complex z = inst.edges[j].z;
        const double scap = inst.edges[j].power_cap;
        // |S_e| <= cap
        cone.add({}, scap);
        cone.add({{vm.Sre(j), -1.0}}, 0.0);
        cone.add({{vm.Sim(j), -1.0}}, 0.0);
        soc_dims.push_back(3);
        // |-S_e + z_e l_e| <= cap (reverse end of the line)
        cone.add({}, scap);
        cone.add({{vm.Sre(j), 1.0}, {vm.l(j), -z.real()}}, 0.0);
        cone.add({{vm.Sim(j), 1.0}, {vm.l(j), -z.imag()}}, 0.0);
        soc_dims.push_back(3);
        // l_e v_i >= |S_e|^2 as ||(2S_re, 2S_im, l - v_i)|| <= l + v_i
        const int i = inst.parent[j];
        if (i == 0) {
            cone.add({{vm.l(j), -1.0}}, inst.v0);
            cone.add({{vm.Sre(j), -2.0}}, 0.0);
            cone.add({{vm.Sim(j), -2.0}}, 0.0);
            cone.add({{vm.l(j), -1.0}}, -inst.v0);
        } else {
            cone.add({{vm.l(j), -1.0}, {vm.v(i), -1.0}}, 0.0);
            cone.add({{vm.Sre(j), -2.0}}, 0.0);
            cone.add({{vm.Sim(j), -2.0}}, 0.0);
            cone.add({{vm.l(j), -1.0}, {vm.v(i), 1.0}}, 0.0);
        }
        soc_dims.push_back(4);
    }

    ConeProgram prog;
    const int nv = vm.total();
    eq.fill(prog.A, prog.b, nv);
    Eigen::MatrixXd Go, Gc;
    Eigen::VectorXd ho, hc;
    orth.fill(Go, ho, nv);
    cone.fill(Gc, hc, nv);
    prog.G.resize(Go.rows() + Gc.rows(), nv);
    prog.G << Go, Gc;
    prog.h.resize(ho.size() + hc.size());
    prog.h << ho, hc;
    prog.orthant_dim = orthant_dim;
    prog.soc_dims = std::move(soc_dims);

    prog.c = Eigen::VectorXd::Zero(nv);
    if (spec.kind == RelaxationKind::LossMin) {
        for (int j = 1; j <= m; ++j) prog.c(vm.l(j)) = inst.edges[j].z.real();
    } else {
        prog.c(vm.t()) = -1.0;
        for (int k = 0; k < n; ++k) prog.c(vm.x(k)) = -ucoef[k];
    }
    return prog;
}

SolveOutcome solve_relaxation(const RadialInstance& inst, const RelaxationSpec& spec,
                              const SocpSettings& settings) {
    const ConeProgram prog = assemble_cone_program(inst, spec);
    const ConeSolution cs = solve_socp(prog, settings);

    SolveOutcome out;
    out.status = cs.status;
    out.iterations = cs.iterations;
    out.message = cs.message;
    if (cs.status != SolveStatus::Optimal) return out;

    const int n = static_cast<int>(inst.users.size());
    const int m = inst.node_count;
    const VarMap vm{n, m};
    PowerFlowState st = inst.zero_state();
    st.s0 = Complex{cs.x(vm.s0re()), cs.x(vm.s0im())};
    for (int k = 0; k < n; ++k) st.x[k] = cs.x(vm.x(k));
    for (int j = 1; j <= m; ++j) {
        st.v[j] = cs.x(vm.v(j));
        st.l[j] = cs.x(vm.l(j));
        st.S[j] = Complex{cs.x(vm.Sre(j)), cs.x(vm.Sim(j))};
    }
    out.state = std::move(st);
    out.objective = evaluate_objective(inst, out.state);
    for (int j = 1; j <= m; ++j) out.loss += inst.edges[j].z.real() * out.state.l[j];
    return out;
}

ExactnessResult restore_exactness(const RadialInstance& inst, const std::vector<double>& x,
                                  double tol, const SocpSettings& settings) {
    ExactnessResult res;

    RelaxationSpec fixed;
    fixed.kind = RelaxationKind::Fixed;
    fixed.x_fixed = x;
    const SolveOutcome base = solve_relaxation(inst, fixed, settings);
    if (base.status != SolveStatus::Optimal) {
        res.message = "pinned relaxation not solvable: " + base.message;
        return res;
    }
    res.relaxed_objective = base.objective;

    RelaxationSpec lossmin = fixed;
    lossmin.kind = RelaxationKind::LossMin;
    lossmin.objective_floor = base.objective;
    const SolveOutcome minimal = solve_relaxation(inst, lossmin, settings);
    const PowerFlowState& baseline = (minimal.status == SolveStatus::Optimal) ? minimal.state : base.state;

    PowerFlowState exact = forward_backward_sweep(inst, x, baseline, SweepMode::ExactCurrent);
    res.state = std::move(exact);
    res.objective = evaluate_objective(inst, res.state);
    res.report = check_feasibility(inst, res.state, tol);
    res.success = res.report.feasible_exact(tol);
    if (!res.success) res.message = "exact state violates feasibility tolerance";
    return res;
}

} // namespace opfline
