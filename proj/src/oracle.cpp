#include "opfline/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace opfline {

OracleResult brute_force_opf(const RadialInstance& inst, int limit, const SocpSettings& settings) {
    OracleResult res;
    const std::vector<int> inelastic = inst.inelastic_users();
    const int ni = static_cast<int>(inelastic.size());
    if (ni > limit) throw std::invalid_argument("inelastic user count exceeds oracle limit");

    for (std::uint64_t mask = 0; mask < (1ull << ni); ++mask) {
        ++res.subproblems;
        RelaxationSpec spec;
        spec.kind = RelaxationKind::Relaxed;
        for (int i = 0; i < ni; ++i) spec.pins[inelastic[i]] = (mask >> i) & 1 ? 1.0 : 0.0;
        const SolveOutcome relaxed = solve_relaxation(inst, spec, settings);
        if (relaxed.status != SolveStatus::Optimal) continue;

        // Snap elastic entries out of the box-boundary fuzz, then restore.
        std::vector<double> x = relaxed.state.x;
        for (int i = 0; i < ni; ++i) x[inelastic[i]] = (mask >> i) & 1 ? 1.0 : 0.0;
        for (double& v : x) v = std::clamp(v, 0.0, 1.0);
        const ExactnessResult exact = restore_exactness(inst, x, 1e-6, settings);
        if (!exact.success) continue;

        ++res.feasible_count;
        if (!res.found || exact.objective > res.best_value) {
            res.found = true;
            res.best_value = exact.objective;
            res.best_x = x;
            res.best_state = exact.state;
        }
    }
    if (!res.found) res.message = "no assignment admitted a feasible exact state";
    return res;
}

OracleResult brute_force_gufp(const GufpInstance& g, int limit) {
    OracleResult res;
    const int n = g.num_users();
    if (n > limit) throw std::invalid_argument("user count exceeds oracle limit");
    const int d = g.num_dims();
    const int E = g.num_edges();

    // Incremental per-edge loads maintained under Gray-code single flips.
    std::vector<std::vector<double>> load(d, std::vector<double>(E, 0.0));
    std::vector<char> in(n, 0);
    double value = 0.0;

    auto feasible = [&] {
        for (int r = 0; r < d; ++r)
            for (int e = 0; e < E; ++e)
                if (load[r][e] > g.dims[r].capacity[e] + 1e-9 * (1.0 + g.dims[r].capacity[e]))
                    return false;
        return true;
    };

    res.best_x.assign(n, 0.0);
    for (std::uint64_t i = 0; i < (1ull << n); ++i) {
        if (i > 0) {
            const int k = std::countr_zero(i); // bit flipped by the Gray code
            const double sign = in[k] ? -1.0 : 1.0;
            in[k] ^= 1;
            value += sign * g.utility[k];
            for (int r = 0; r < d; ++r)
                for (int e = 0; e < E; ++e) load[r][e] += sign * evaluate_demand(g, k, r, e);
        }
        ++res.subproblems;
        if (!feasible()) continue;
        ++res.feasible_count;
        if (!res.found || value > res.best_value) {
            res.found = true;
            res.best_value = value;
            for (int k = 0; k < n; ++k) res.best_x[k] = in[k] ? 1.0 : 0.0;
        }
    }
    return res;
}

} // namespace opfline
