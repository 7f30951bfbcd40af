#include "opfline/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace opfline {

namespace {

constexpr double kAngleTol = 1e-12;

bool finite(const Complex& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

// Ratio max/min_positive over a list of values; 1 when no positive entry.
double positive_range(const std::vector<double>& vals) {
    double hi = 0.0, lo = 0.0;
    bool any = false;
    for (double v : vals) {
        if (v > 0.0) {
            hi = any ? std::max(hi, v) : v;
            lo = any ? std::min(lo, v) : v;
            any = true;
        }
    }
    return any ? hi / lo : 1.0;
}

} // namespace

double ObjectiveSpec::generation_coordinate(const Complex& s0) const {
    return s0.real() * std::cos(phi) + s0.imag() * std::sin(phi);
}

double ObjectiveSpec::generation_value(double g) const {
    // Integrate the slope function from 0 to g; the value at 0 is m_shift.
    double value = m_shift;
    const int nseg = static_cast<int>(slopes.size());
    auto seg_of = [&](double t) {
        int i = 0;
        while (i < static_cast<int>(breakpoints.size()) && t >= breakpoints[i]) ++i;
        return i;
    };
    double pos = 0.0;
    if (g >= 0.0) {
        while (pos < g) {
            int i = seg_of(pos);
            double end = (i < nseg - 1) ? std::min(breakpoints[i], g) : g;
            if (end <= pos) end = g;
            value += slopes[i] * (end - pos);
            pos = end;
        }
    } else {
        while (pos > g) {
            int i = seg_of(std::nextafter(pos, -1e300));
            double start = g;
            if (i > 0) start = std::max(breakpoints[i - 1], g);
            value -= slopes[i] * (pos - start);
            pos = start;
        }
    }
    return value;
}

std::vector<std::pair<double, double>> ObjectiveSpec::segments() const {
    std::vector<std::pair<double, double>> segs;
    segs.reserve(slopes.size());
    for (size_t i = 0; i < slopes.size(); ++i) {
        double anchor = breakpoints.empty() ? 0.0 : (i == 0 ? breakpoints.front() : breakpoints[i - 1]);
        double fa = generation_value(anchor);
        segs.emplace_back(slopes[i], fa - slopes[i] * anchor);
    }
    return segs;
}

bool ObjectiveSpec::concave_nondecreasing() const {
    if (slopes.size() != breakpoints.size() + 1) return false;
    for (size_t i = 0; i + 1 < breakpoints.size(); ++i)
        if (!(breakpoints[i] < breakpoints[i + 1])) return false;
    for (size_t i = 0; i < slopes.size(); ++i) {
        if (slopes[i] < 0.0) return false;
        if (i > 0 && slopes[i] > slopes[i - 1] + 1e-15) return false;
    }
    return true;
}

void RadialInstance::finalize() {
    const int m = node_count;
    if (m < 1) throw std::runtime_error("instance needs at least one edge");
    if (static_cast<int>(parent.size()) != m + 1) throw std::runtime_error("parent map size mismatch");
    if (static_cast<int>(edges.size()) != m + 1) throw std::runtime_error("edge array size mismatch");
    if (static_cast<int>(v_min.size()) != m + 1 || static_cast<int>(v_max.size()) != m + 1)
        throw std::runtime_error("voltage bound array size mismatch");
    if (parent[0] != -1) throw std::runtime_error("node 0 must be the root");

    children.assign(m + 1, {});
    for (int j = 1; j <= m; ++j) {
        if (parent[j] < 0 || parent[j] > m || parent[j] == j)
            throw std::runtime_error("invalid parent for node " + std::to_string(j));
        children[parent[j]].push_back(j);
    }
    if (children[0].size() != 1 || children[0][0] != 1)
        throw std::runtime_error("node 0 must have the single feeder edge (0,1)");

    // Cycle check: every node must reach the root.
    for (int j = 1; j <= m; ++j) {
        int cur = j, hops = 0;
        while (cur != 0) {
            cur = parent[cur];
            if (++hops > m) throw std::runtime_error("parent map contains a cycle");
        }
    }

    bfs_order.clear();
    std::queue<int> q;
    q.push(0);
    while (!q.empty()) {
        int i = q.front();
        q.pop();
        if (i != 0) bfs_order.push_back(i);
        for (int c : children[i]) q.push(c);
    }

    node_users.assign(m + 1, {});
    for (size_t k = 0; k < users.size(); ++k) {
        const User& u = users[k];
        if (u.node < 1 || u.node > m) throw std::runtime_error("user attached to invalid node");
        if (!finite(u.demand)) throw std::runtime_error("non-finite demand");
        node_users[u.node].push_back(static_cast<int>(k));
    }

    if (!objective.f1_weights.empty()) {
        for (auto [k, w] : objective.f1_weights) {
            if (k < 0 || k >= static_cast<int>(users.size()))
                throw std::runtime_error("f1 weight for unknown user");
            users[k].f1_coeff = w * users[k].demand.real();
        }
        objective.f1_weights.clear();
    }
}

bool RadialInstance::is_line() const {
    for (int j = 0; j <= node_count; ++j)
        if (children[j].size() > 1) return false;
    return true;
}

std::vector<int> RadialInstance::path_edges(int j) const {
    std::vector<int> path;
    for (int cur = j; cur != 0; cur = parent[cur]) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<int> RadialInstance::subtree_users(int j) const {
    std::vector<int> out;
    std::vector<int> stack{j};
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        out.insert(out.end(), node_users[i].begin(), node_users[i].end());
        for (int c : children[i]) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> RadialInstance::inelastic_users() const {
    std::vector<int> out;
    for (size_t k = 0; k < users.size(); ++k)
        if (users[k].kind == UserKind::Inelastic) out.push_back(static_cast<int>(k));
    return out;
}

std::vector<int> RadialInstance::elastic_users() const {
    std::vector<int> out;
    for (size_t k = 0; k < users.size(); ++k)
        if (users[k].kind == UserKind::Elastic) out.push_back(static_cast<int>(k));
    return out;
}

PowerFlowState RadialInstance::zero_state() const {
    PowerFlowState st;
    st.x.assign(users.size(), 0.0);
    st.v.assign(node_count + 1, v0);
    st.l.assign(node_count + 1, 0.0);
    st.S.assign(node_count + 1, Complex{0.0, 0.0});
    return st;
}

ValidationReport validate_instance(const RadialInstance& inst) {
    ValidationReport rep;
    RadialInstance probe = inst;
    try {
        probe.finalize();
        rep.structure_ok = true;
    } catch (const std::exception& ex) {
        rep.violations.emplace_back(std::string("structure: ") + ex.what());
        return rep;
    }

    rep.a0 = inst.objective.concave_nondecreasing();
    if (!rep.a0) rep.violations.emplace_back("A0: generation objective not concave non-decreasing");

    rep.a1 = true;
    for (int j = 1; j <= inst.node_count; ++j) {
        if (inst.edges[j].z.real() < 0.0) {
            rep.a1 = false;
            rep.violations.emplace_back("A1: negative resistance on edge into node " + std::to_string(j));
        }
    }

    rep.a2 = true;
    for (int j = 1; j <= inst.node_count; ++j) {
        if (!(inst.v_min[j] <= inst.v0 && inst.v0 <= inst.v_max[j])) {
            rep.a2 = false;
            rep.violations.emplace_back("A2: feeder voltage outside bounds of node " + std::to_string(j));
        }
    }

    rep.a3 = true;
    for (int j = 1; j <= inst.node_count && rep.a3; ++j)
        for (const User& u : inst.users)
            if (std::real(std::conj(inst.edges[j].z) * u.demand) < -kAngleTol) {
                rep.a3 = false;
                rep.violations.emplace_back("A3: impedance/demand phase spread exceeds pi/2");
                break;
            }

    rep.a4 = true;
    double amin = 0.0, amax = 0.0;
    bool any_demand = false;
    for (const User& u : inst.users) {
        if (u.demand.real() < -kAngleTol) {
            rep.a4 = false;
            rep.violations.emplace_back("A4: negative active demand");
        }
        if (std::abs(u.demand) > 0.0) {
            double a = std::arg(u.demand);
            amin = any_demand ? std::min(amin, a) : a;
            amax = any_demand ? std::max(amax, a) : a;
            any_demand = true;
        }
    }
    if (any_demand && amax - amin > std::numbers::pi / 2 + kAngleTol) {
        rep.a4 = false;
        rep.violations.emplace_back("A4: pairwise demand phase spread exceeds pi/2");
    }

    rep.a4_rot = true;
    for (const User& u : inst.users)
        if (u.demand.real() < -kAngleTol || u.demand.imag() < -kAngleTol) rep.a4_rot = false;

    rep.a0_rot = rep.a0 && inst.objective.phi >= 0.0 && inst.objective.phi <= std::numbers::pi / 2 + kAngleTol;

    std::vector<double> zr, zi, sr, si;
    for (int j = 1; j <= inst.node_count; ++j) {
        zr.push_back(inst.edges[j].z.real());
        zi.push_back(inst.edges[j].z.imag());
    }
    for (const User& u : inst.users) {
        sr.push_back(u.demand.real());
        si.push_back(u.demand.imag());
    }
    rep.data_range = std::max({positive_range(zr), positive_range(zi), positive_range(sr), positive_range(si)});
    rep.a5 = std::isfinite(rep.data_range);
    if (!rep.a5) rep.violations.emplace_back("A5: unbounded data range");

    return rep;
}

RotationRecord rotation_angle(const RadialInstance& inst) {
    double phi = 0.0;
    for (const User& u : inst.users)
        if (std::abs(u.demand) > 0.0) phi = std::max(phi, -std::arg(u.demand));
    phi = std::clamp(phi, 0.0, std::numbers::pi / 2);

    const Complex rot = std::polar(1.0, phi);
    for (const User& u : inst.users) {
        Complex s = u.demand * rot;
        if (s.real() < -kAngleTol || s.imag() < -kAngleTol)
            throw std::invalid_argument("demand phase spread violates A4; no valid rotation exists");
    }
    return RotationRecord{phi};
}

RadialInstance rotate_instance(const RadialInstance& inst, const RotationRecord& r) {
    RadialInstance out = inst;
    const Complex rot = std::polar(1.0, r.phi);
    for (int j = 1; j <= out.node_count; ++j) out.edges[j].z *= rot;
    for (User& u : out.users) u.demand *= rot;
    out.objective.phi += r.phi;
    return out;
}

PowerFlowState unrotate_state(const PowerFlowState& state, const RotationRecord& r) {
    PowerFlowState out = state;
    const Complex rot = std::polar(1.0, -r.phi);
    out.s0 *= rot;
    for (Complex& s : out.S) s *= rot;
    return out;
}

double evaluate_objective(const RadialInstance& inst, const PowerFlowState& state) {
    double value = inst.objective.generation_value(inst.objective.generation_coordinate(state.s0));
    for (size_t k = 0; k < inst.users.size(); ++k) {
        const User& u = inst.users[k];
        value += (u.kind == UserKind::Inelastic ? u.utility : u.f1_coeff) * state.x[k];
    }
    return value;
}

} // namespace opfline
