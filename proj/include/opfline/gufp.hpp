#pragma once

#include <map>
#include <vector>

namespace opfline {

/// One resource dimension of a d-GUFP instance. Everything is stored in the
/// dimension's own edge order (position 0 first); `reversed` records whether
/// that order runs away from or toward the root of the originating line.
/// User k's demand at position e is
///   0                          if e <  start[k]
///   sum_t coeff[t][k]*base[t][e]   if start[k] <= e < sat[k]
///   sum_t coeff[t][k]*base[t][sat[k]]  otherwise,
/// which is monotone non-decreasing when the bases are.
struct GufpDimension {
    int terms = 1; // T_r
    bool reversed = false;
    std::vector<std::vector<double>> base;  // base[t][e], monotone non-decreasing
    std::vector<std::vector<double>> coeff; // coeff[t][k] >= 0
    std::vector<int> start;                 // e_k^r per user
    std::vector<int> sat;                   // \hat e_k^r per user
    std::vector<double> capacity;           // c^r(e), monotone non-decreasing
};

struct GufpInstance {
    std::vector<double> utility;
    std::vector<GufpDimension> dims;

    int num_users() const { return static_cast<int>(utility.size()); }
    int num_edges() const { return dims.empty() ? 0 : static_cast<int>(dims[0].capacity.size()); }
    int num_dims() const { return static_cast<int>(dims.size()); }
};

double evaluate_demand(const GufpInstance& g, int k, int r, int e);

/// Peak demand of user k over interval [lo, hi] of dimension r: the value at
/// the interval's last edge, by monotonicity.
double peak_demand(const GufpInstance& g, int k, int r, int lo, int hi);
/// Smallest positive demand of user k over [lo, hi]; 0 if none is positive.
double min_positive_demand(const GufpInstance& g, int k, int r, int lo, int hi);

struct EdgePartition {
    std::vector<double> growth;                            // C_r per dimension
    std::vector<std::vector<std::pair<int, int>>> spans;   // per r: [lo, hi] positions

    int count(int r) const { return static_cast<int>(spans[r].size()); } // P_r
    int total_count() const;                                             // sum_r P_r
};

/// Partitions each dimension's edge order so that every base function varies
/// by at most a factor C within an interval; demand values then satisfy
/// peak <= C * min-positive per user per interval.
EdgePartition build_partition(const GufpInstance& g, const std::vector<double>& C);
EdgePartition build_partition(const GufpInstance& g, double C = 2.0);

struct LevelGrid {
    // Per dimension: value 0 followed by (1+eps)^l * fmin for l = 0..top.
    std::vector<std::vector<double>> levels;
};

LevelGrid build_levels(const GufpInstance& g, double eps);

/// Group index vector q = (q_{r,t}); kQInfinity marks a zero coefficient.
inline constexpr int kQInfinity = 1 << 28;

struct Grouping {
    std::vector<int> surviving;                    // users with u_k >= eps*u_max/n
    std::map<std::vector<int>, std::vector<int>> groups; // q-vector -> member users
    std::vector<double> L;                         // per-dimension scale eps*u_max/(n*amax_r)

    // H^{q,p,r} = sum_t base[t][last edge of interval p] / (2^{q_{r,t}} L_r).
    double H(const GufpInstance& g, const EdgePartition& part, const std::vector<int>& q,
             int p, int r) const;
    // Dimensions with H^{q,P_r,r} > 0.
    std::vector<int> active_dims(const GufpInstance& g, const EdgePartition& part,
                                 const std::vector<int>& q) const;
    double alpha(const GufpInstance& g, const EdgePartition& part, const std::vector<int>& q) const;
};

Grouping group_users(const GufpInstance& g, double eps);

/// Monotone step profile on the dimension's order with values restricted to
/// multiples of eps*h^{p,r}: the largest lattice point below the fractional
/// profile sum_k f_k^r(e) x_k, made monotone by a running maximum.
/// h[r][p] indexes peaks by dimension and interval; 1/eps must be integral.
std::vector<std::vector<double>> restricted_profile_from_fractional(
    const GufpInstance& g, const std::vector<int>& users, const std::vector<double>& x_tilde,
    const EdgePartition& part, const std::vector<std::vector<double>>& h, double eps);

struct ModifyResult {
    std::vector<double> x_bar;  // after greedy removal, indexed like x_tilde
    std::vector<double> x_bfs;  // vertex of the packing LP
    std::vector<double> x_hat;  // integral round-down
    std::vector<std::vector<double>> profile; // the restricted profile used
    int fractional_support = 0; // strictly fractional entries of x_bfs
    double removed_utility = 0.0;
};

/// Rounds a fractional assignment of small demands to an integral one fitting
/// under a restricted profile: greedy left-most removal of eps*h^{p,r}
/// fractional mass per interval, conversion to a basic feasible solution of
/// the packing LP, then round-down.
ModifyResult modify(const GufpInstance& g, const std::vector<int>& users,
                    const std::vector<double>& x_tilde, const EdgePartition& part,
                    const std::vector<std::vector<double>>& h, double eps);

/// Crawls along null-space directions of the tight constraint rows until the
/// point is a vertex of { x in [0,1]^S : sum_k f_k^r(e) x_k <= g^r(e) } taken
/// over the non-redundant rows (one per constant piece of each profile),
/// never decreasing sum u_k x_k.
std::vector<double> to_bfs(const GufpInstance& g, const std::vector<int>& users,
                           const std::vector<std::vector<double>>& profile,
                           const std::vector<double>& start);

bool check_gufp_feasible(const GufpInstance& g, const std::vector<double>& x, double tol = 1e-9);

} // namespace opfline
