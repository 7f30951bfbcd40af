#pragma once

#include "opfline/conic.hpp"
#include "opfline/gufp.hpp"
#include "opfline/oracle.hpp"

namespace opfline {

/// Per-group guess: the pinned large users, the peak level per
/// (dimension, interval), and the derived small-user set. User ids are
/// positions in the reduced GUFP instance (the inelastic users in order).
struct GroupGuess {
    std::vector<int> key;                   // group index vector q
    std::vector<int> large;                 // L^q
    std::vector<std::vector<double>> peaks; // h^{q,p,r}, indexed [r][p]
    std::vector<int> small;                 // S^q, derived from the smallness rule
};

struct GuessConfig {
    long long index = 0;
    std::vector<GroupGuess> groups;
};

enum class GuessMode { Full, Capped, OracleGuess };

struct QptasConfig {
    double eps_prime = 0.3;      // user-facing approximation parameter
    GuessMode mode = GuessMode::OracleGuess;
    long long cap_limit = 256;   // Capped: number of guesses processed
    long long full_limit = 4096; // Full: abort when the estimate exceeds this
    std::vector<double> reference_x; // OracleGuess: full assignment over instance users
    double growth = 2.0;             // partition constant C_r
    int workers = 0;                 // 0 -> OPFLINE_WORKERS env or hardware count
    SocpSettings solver;
};

struct QptasResult {
    bool feasible = false;  // final state passed the exact feasibility check
    bool fallback = false;  // no guess produced a solution; x == 0 returned
    PowerFlowState state;
    double value = 0.0;
    long long guesses_processed = 0;
    double guess_count_estimate = 0.0;
    double internal_eps = 0.0;
    std::string message;
};

/// Reduction of line OPF to 3-GUFP: dimension 0 is the voltage-drop demand
/// in forward edge order (two terms, cumulative resistance/reactance bases);
/// dimensions 1 and 2 are the subtree active/reactive loads in reversed
/// order. Users are the inelastic users in instance order; capacities are
/// the loads of the reference assignment x'.
GufpInstance reduce_to_gufp(const RadialInstance& inst, const std::vector<double>& x_prime);

/// Knapsack slack sum_k rho_{k,j} x_k - c_j per leaf, where rho is the
/// shared-path demand coefficient and c_j collects the voltage headroom,
/// loss terms of the baseline currents, and the elastic contribution.
/// Non-positive slack certifies the leaf voltage floor.
std::vector<std::pair<int, double>> leaf_knapsack_bound(const RadialInstance& inst,
                                                        const std::vector<double>& x_bar,
                                                        const PowerFlowState& baseline);

std::vector<GuessConfig> enumerate_guesses(const GufpInstance& g, const Grouping& grp,
                                           const EdgePartition& part, const LevelGrid& levels,
                                           const QptasConfig& cfg, double internal_eps,
                                           const std::vector<double>& reference_gufp_x,
                                           double& count_estimate);

QptasResult qptas_solve(const RadialInstance& inst, const QptasConfig& cfg);

} // namespace opfline
