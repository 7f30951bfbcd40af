#pragma once

#include "opfline/instance.hpp"

#include <cmath>

namespace opfline::testing {

// Line network with m edges, uniform line data, generous default voltage band.
// Call finalize() after attaching users.
inline RadialInstance make_line(int m, Complex z, double s_cap, double l_cap,
                                double v_lo = 0.81, double v_hi = 1.21) {
    RadialInstance inst;
    inst.node_count = m;
    inst.parent.assign(m + 1, 0);
    inst.parent[0] = -1;
    for (int j = 2; j <= m; ++j) inst.parent[j] = j - 1;
    inst.edges.assign(m + 1, Edge{z, s_cap, l_cap});
    inst.v0 = 1.0;
    inst.v_min.assign(m + 1, v_lo);
    inst.v_max.assign(m + 1, v_hi);
    return inst;
}

inline void add_user(RadialInstance& inst, int node, Complex s, double u,
                     UserKind kind = UserKind::Inelastic) {
    User usr;
    usr.node = node;
    usr.demand = s;
    usr.utility = u;
    usr.kind = kind;
    inst.users.push_back(usr);
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(b)); }

} // namespace opfline::testing
