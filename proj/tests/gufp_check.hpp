#pragma once

#include "opfline/gufp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace opfline::testing {

struct RoundingCheck {
    bool condition_i = true;
    bool condition_ii = true;
    bool support_ok = true;
    int groups_checked = 0;
    std::string detail;
};

// Exercises the rounding guarantee on every user group of `g`: builds a
// fractional start, peaks matching it, the loosest admissible smallness
// numbers, runs modify, and verifies
//   (i)  rounded load <= profile <= fractional load, edge by edge,
//   (ii) utility loss bounded by the instance-computed expression
//        sum_{r active} [ sum_p (C_r/H^{p,r}) (eps h^{p,r} + B^{p,r})
//                         + alpha P_r B^{Pr,r} / (eps H^{Pr,r}) ],
// and the fractional-support cap (1/eps) * sum_r P_r.
inline RoundingCheck check_rounding(const GufpInstance& g, double eps,
                                    const std::vector<double>& x_tilde) {
    RoundingCheck out;
    const EdgePartition part = build_partition(g, 2.0);
    const Grouping grp = group_users(g, eps);
    const int E = g.num_edges();
    const int d = g.num_dims();

    for (const auto& [q, members] : grp.groups) {
        const std::vector<int>& S = members;
        ++out.groups_checked;

        // Peaks equal to the fractional interval peaks, smallness numbers equal
        // to the largest interval peak of any member; both are admissible.
        std::vector<std::vector<double>> h(d), B(d);
        for (int r = 0; r < d; ++r) {
            h[r].resize(part.count(r));
            B[r].resize(part.count(r));
            for (int p = 0; p < part.count(r); ++p) {
                const auto [lo, hi] = part.spans[r][p];
                double peak_sum = 0.0, peak_max = 0.0;
                for (int k : S) {
                    const double f = peak_demand(g, k, r, lo, hi);
                    peak_sum += f * x_tilde[k];
                    peak_max = std::max(peak_max, f);
                }
                h[r][p] = peak_sum;
                B[r][p] = peak_max;
            }
        }

        const ModifyResult res = modify(g, S, x_tilde, part, h, eps);

        for (int r = 0; r < d; ++r)
            for (int e = 0; e < E; ++e) {
                double rounded = 0.0, frac = 0.0;
                for (int k : S) {
                    rounded += evaluate_demand(g, k, r, e) * res.x_hat[k];
                    frac += evaluate_demand(g, k, r, e) * x_tilde[k];
                }
                const double tol = 1e-7 * (1.0 + frac);
                if (rounded > res.profile[r][e] + tol || res.profile[r][e] > frac + tol) {
                    out.condition_i = false;
                    out.detail = "profile sandwich violated";
                }
            }

        double bound = 0.0;
        for (int r : grp.active_dims(g, part, q)) {
            const int P = part.count(r);
            const double Hlast = grp.H(g, part, q, P - 1, r);
            for (int p = 0; p < P; ++p) {
                const double Hp = grp.H(g, part, q, p, r);
                if (Hp > 0.0) bound += (part.growth[r] / Hp) * (eps * h[r][p] + B[r][p]);
            }
            if (Hlast > 0.0)
                bound += grp.alpha(g, part, q) * P * B[r][P - 1] / (eps * Hlast);
        }
        double before = 0.0, after = 0.0;
        for (int k : S) {
            before += g.utility[k] * x_tilde[k];
            after += g.utility[k] * res.x_hat[k];
        }
        if (after < before - bound - 1e-7 * (1.0 + before)) {
            out.condition_ii = false;
            out.detail = "utility loss exceeds the computed bound";
        }

        if (res.fractional_support > static_cast<int>(std::round(1.0 / eps)) * part.total_count()) {
            out.support_ok = false;
            out.detail = "fractional support above (1/eps) * sum P_r";
        }
    }
    return out;
}

} // namespace opfline::testing
