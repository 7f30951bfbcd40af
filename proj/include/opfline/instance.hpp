#pragma once

#include <complex>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace opfline {

using Complex = std::complex<double>;

enum class UserKind { Inelastic, Elastic };

/// A load attached to node `node`. Inelastic demands are all-or-nothing,
/// elastic demands may be served fractionally. `f1_coeff` is the linear
/// objective coefficient of the elastic term; it is fixed at construction
/// and unaffected by rotation so that objective values are rotation
/// invariant.
struct User {
    int node = 0;
    Complex demand{0.0, 0.0};
    double utility = 0.0;
    UserKind kind = UserKind::Inelastic;
    double f1_coeff = 0.0;
};

/// Line data for the edge (parent[j], j), stored at index j.
struct Edge {
    Complex z{0.0, 0.0};      // impedance
    double power_cap = 0.0;   // apparent-power cap
    double current_cap = 0.0; // squared-current cap
};

/// Concave piecewise-linear generation term. The function value at g = 0 is
/// m_shift; slopes apply on the intervals delimited by the (strictly
/// increasing) breakpoints and must be non-increasing and non-negative.
/// After rotating the instance by phi, the term is evaluated at the
/// generation coordinate s0.re*cos(phi) + s0.im*sin(phi).
struct ObjectiveSpec {
    std::vector<double> breakpoints;
    std::vector<double> slopes{0.0};
    double m_shift = 0.0;
    double phi = 0.0;
    std::map<int, double> f1_weights; // elastic user index -> weight

    double generation_coordinate(const Complex& s0) const;
    double generation_value(double g) const;
    // Affine pieces (a, b) such that f0(g) = min_i (a_i * g + b_i).
    std::vector<std::pair<double, double>> segments() const;
    bool concave_nondecreasing() const;
};

/// One candidate operating point. Vectors v, l, S are indexed by node id
/// (slot 0 of l and S is unused; v[0] holds the feeder voltage).
struct PowerFlowState {
    Complex s0{0.0, 0.0};
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> l;
    std::vector<Complex> S;
};

struct ValidationReport {
    bool structure_ok = false;
    bool a0 = false, a1 = false, a2 = false, a3 = false, a4 = false, a5 = false;
    bool a0_rot = false, a4_rot = false; // rotated forms A0', A4'
    double data_range = 1.0;             // M, the max of the data ratios
    std::vector<std::string> violations;

    bool pass() const { return structure_ok && a0 && a1 && a2 && a3 && a4 && a5; }
};

struct RotationRecord {
    double phi = 0.0;
};

/// A radial distribution network rooted at node 0 with a single feeder edge
/// (0, 1). Node ids are 0..node_count; edge e = (parent[j], j) is identified
/// with its child node j.
struct RadialInstance {
    int node_count = 0;
    std::vector<int> parent;  // size node_count+1, parent[0] = -1
    std::vector<Edge> edges;  // size node_count+1, slot 0 unused
    double v0 = 1.0;
    std::vector<double> v_min, v_max; // size node_count+1, slot 0 unused
    std::vector<User> users;
    ObjectiveSpec objective;

    // Derived topology, built by finalize().
    std::vector<std::vector<int>> children;
    std::vector<int> bfs_order;              // nodes 1..node_count
    std::vector<std::vector<int>> node_users; // users attached per node

    void finalize(); // throws std::runtime_error on structural defects
    bool is_line() const;
    int edge_count() const { return node_count; }
    // Edges (child ids) on the path root -> j, in root-first order.
    std::vector<int> path_edges(int j) const;
    // Users attached in the subtree rooted at j.
    std::vector<int> subtree_users(int j) const;
    std::vector<int> inelastic_users() const;
    std::vector<int> elastic_users() const;

    PowerFlowState zero_state() const;
};

ValidationReport validate_instance(const RadialInstance& inst);

/// Smallest angle in [0, pi/2] whose rotation puts every demand in the first
/// quadrant. Throws if no such angle exists (pairwise phase spread > pi/2 or
/// negative active power).
RotationRecord rotation_angle(const RadialInstance& inst);

RadialInstance rotate_instance(const RadialInstance& inst, const RotationRecord& r);

/// Maps a state of the rotated instance back to the original instance.
PowerFlowState unrotate_state(const PowerFlowState& state, const RotationRecord& r);

double evaluate_objective(const RadialInstance& inst, const PowerFlowState& state);

} // namespace opfline
