#pragma once

#include "opfline/conic.hpp"
#include "opfline/gufp.hpp"

namespace opfline {

struct OracleResult {
    bool found = false;
    std::vector<double> best_x;
    double best_value = 0.0;
    PowerFlowState best_state;    // exhaustive OPF search only
    int subproblems = 0;
    int feasible_count = 0;
    std::string message;
};

/// Exhaustive search over binary assignments of the inelastic users. Each
/// candidate pins the inelastic entries, leaves elastic entries free in the
/// relaxation, and is kept only if exactness restoration succeeds.
OracleResult brute_force_opf(const RadialInstance& inst, int limit = 14,
                             const SocpSettings& settings = {});

/// Maximum-utility subset satisfying every edge/dimension capacity, by
/// subset enumeration in Gray-code order with incremental load updates.
OracleResult brute_force_gufp(const GufpInstance& g, int limit = 20);

} // namespace opfline
