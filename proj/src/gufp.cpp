#include "opfline/gufp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace opfline {

namespace {

constexpr double kTol = 1e-9;

void require_reciprocal(double eps) {
    const double inv = 1.0 / eps;
    if (std::abs(inv - std::round(inv)) > 1e-9)
        throw std::invalid_argument("1/eps must be a positive integer");
}

} // namespace

double evaluate_demand(const GufpInstance& g, int k, int r, int e) {
    const GufpDimension& d = g.dims[r];
    if (e < d.start[k]) return 0.0;
    const int at = std::min(e, d.sat[k]);
    double f = 0.0;
    for (int t = 0; t < d.terms; ++t) f += d.coeff[t][k] * d.base[t][at];
    return f;
}

double peak_demand(const GufpInstance& g, int k, int r, int lo, int hi) {
    (void)lo;
    return evaluate_demand(g, k, r, hi);
}

double min_positive_demand(const GufpInstance& g, int k, int r, int lo, int hi) {
    double best = 0.0;
    for (int e = lo; e <= hi; ++e) {
        const double f = evaluate_demand(g, k, r, e);
        if (f > 0.0 && (best == 0.0 || f < best)) best = f;
    }
    return best;
}

int EdgePartition::total_count() const {
    int total = 0;
    for (size_t r = 0; r < spans.size(); ++r) total += count(static_cast<int>(r));
    return total;
}

EdgePartition build_partition(const GufpInstance& g, const std::vector<double>& C) {
    if (C.size() != g.dims.size()) throw std::invalid_argument("one growth constant per dimension");
    EdgePartition part;
    part.growth = C;
    part.spans.resize(g.dims.size());
    const int E = g.num_edges();
    for (size_t r = 0; r < g.dims.size(); ++r) {
        const GufpDimension& d = g.dims[r];
        std::vector<int> cuts;
        for (int t = 0; t < d.terms; ++t) {
            int last = -1;
            for (int e = 0; e < E; ++e) {
                if (d.base[t][e] <= 0.0) continue;
                if (last < 0 || d.base[t][e] > C[r] * d.base[t][last]) {
                    cuts.push_back(e);
                    last = e;
                }
            }
        }
        cuts.push_back(0);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (size_t i = 0; i < cuts.size(); ++i) {
            const int lo = cuts[i];
            const int hi = (i + 1 < cuts.size()) ? cuts[i + 1] - 1 : E - 1;
            part.spans[r].emplace_back(lo, hi);
        }
    }
    return part;
}

EdgePartition build_partition(const GufpInstance& g, double C) {
    return build_partition(g, std::vector<double>(g.dims.size(), C));
}

LevelGrid build_levels(const GufpInstance& g, double eps) {
    LevelGrid grid;
    const int E = g.num_edges();
    const int n = std::max(1, g.num_users());
    for (int r = 0; r < g.num_dims(); ++r) {
        double fmin = 0.0, fmax = 0.0;
        for (int k = 0; k < g.num_users(); ++k) {
            const double lo = min_positive_demand(g, k, r, 0, E - 1);
            if (lo > 0.0 && (fmin == 0.0 || lo < fmin)) fmin = lo;
            fmax = std::max(fmax, evaluate_demand(g, k, r, E - 1));
        }
        std::vector<double> lv{0.0};
        if (fmin > 0.0) {
            const int top =
                static_cast<int>(std::ceil(std::log(n * fmax / fmin) / std::log1p(eps)));
            for (int l = 0; l <= top; ++l) lv.push_back(std::pow(1.0 + eps, l) * fmin);
        }
        grid.levels.push_back(std::move(lv));
    }
    return grid;
}

double Grouping::H(const GufpInstance& g, const EdgePartition& part, const std::vector<int>& q,
                   int p, int r) const {
    int idx = 0;
    for (int rr = 0; rr < r; ++rr) idx += g.dims[rr].terms;
    const int hi = part.spans[r][p].second;
    double h = 0.0;
    for (int t = 0; t < g.dims[r].terms; ++t) {
        const int qt = q[idx + t];
        if (qt == kQInfinity) continue;
        h += g.dims[r].base[t][hi] * std::ldexp(1.0, -qt) / L[r];
    }
    return h;
}

std::vector<int> Grouping::active_dims(const GufpInstance& g, const EdgePartition& part,
                                       const std::vector<int>& q) const {
    std::vector<int> out;
    for (int r = 0; r < g.num_dims(); ++r)
        if (H(g, part, q, part.count(r) - 1, r) > 0.0) out.push_back(r);
    return out;
}

double Grouping::alpha(const GufpInstance& g, const EdgePartition& part,
                       const std::vector<int>& q) const {
    int denom = 0;
    for (int r : active_dims(g, part, q)) denom += part.count(r);
    return denom > 0 ? static_cast<double>(part.total_count()) / denom : 0.0;
}

Grouping group_users(const GufpInstance& g, double eps) {
    Grouping grp;
    const int n = g.num_users();
    double umax = 0.0;
    for (double u : g.utility) umax = std::max(umax, u);
    for (int k = 0; k < n; ++k)
        if (g.utility[k] >= eps * umax / std::max(1, n)) grp.surviving.push_back(k);

    grp.L.assign(g.num_dims(), 1.0);
    for (int r = 0; r < g.num_dims(); ++r) {
        double amax = 0.0;
        for (int t = 0; t < g.dims[r].terms; ++t)
            for (int k : grp.surviving) amax = std::max(amax, g.dims[r].coeff[t][k]);
        if (amax > 0.0) grp.L[r] = eps * umax / (std::max(1, n) * amax);
    }

    for (int k : grp.surviving) {
        std::vector<int> q;
        for (int r = 0; r < g.num_dims(); ++r)
            for (int t = 0; t < g.dims[r].terms; ++t) {
                const double a = g.dims[r].coeff[t][k];
                if (a <= 0.0) {
                    q.push_back(kQInfinity);
                } else {
                    const double ratio = g.utility[k] / a;
                    // smallest integer with ratio < 2^qt * L
                    int qt = static_cast<int>(std::floor(std::log2(ratio / grp.L[r]))) + 1;
                    while (std::ldexp(grp.L[r], qt - 1) > ratio) --qt;
                    while (std::ldexp(grp.L[r], qt) <= ratio) ++qt;
                    q.push_back(std::max(qt, 1));
                }
            }
        grp.groups[q].push_back(k);
    }
    return grp;
}

std::vector<std::vector<double>> restricted_profile_from_fractional(
    const GufpInstance& g, const std::vector<int>& users, const std::vector<double>& x_tilde,
    const EdgePartition& part, const std::vector<std::vector<double>>& h, double eps) {
    require_reciprocal(eps);
    const int E = g.num_edges();
    std::vector<std::vector<double>> profile(g.num_dims(), std::vector<double>(E, 0.0));
    for (int r = 0; r < g.num_dims(); ++r) {
        double running = 0.0;
        for (int p = 0; p < part.count(r); ++p) {
            const auto [lo, hi] = part.spans[r][p];
            const double step = eps * h[r][p];
            for (int e = lo; e <= hi; ++e) {
                double frac = 0.0;
                for (int k : users) frac += evaluate_demand(g, k, r, e) * x_tilde[k];
                double flo = 0.0;
                if (step > 0.0) flo = std::floor(frac / step + 1e-12) * step;
                running = std::max(running, flo);
                profile[r][e] = running;
            }
        }
    }
    return profile;
}

std::vector<double> to_bfs(const GufpInstance& g, const std::vector<int>& users,
                           const std::vector<std::vector<double>>& profile,
                           const std::vector<double>& start) {
    const int ns = static_cast<int>(users.size());
    const int E = g.num_edges();

    // Non-redundant packing rows: the last edge of each constant run of the
    // profile; by monotonicity of the loads it dominates the run.
    struct Row {
        Eigen::VectorXd f;
        double cap;
    };
    std::vector<Row> rows;
    for (int r = 0; r < g.num_dims(); ++r) {
        for (int e = 0; e < E; ++e) {
            if (e + 1 < E && profile[r][e + 1] == profile[r][e]) continue;
            Row row;
            row.cap = profile[r][e];
            row.f.resize(ns);
            for (int i = 0; i < ns; ++i) row.f(i) = evaluate_demand(g, users[i], r, e);
            if (row.f.lpNorm<Eigen::Infinity>() > 0.0) rows.push_back(std::move(row));
        }
    }

    Eigen::VectorXd x(ns), u(ns);
    for (int i = 0; i < ns; ++i) {
        x(i) = start[users[i]];
        u(i) = g.utility[users[i]];
    }

    const int max_pass = 4 * (ns + static_cast<int>(rows.size())) + 16;
    for (int pass = 0; pass < max_pass; ++pass) {
        std::vector<int> frac;
        for (int i = 0; i < ns; ++i)
            if (x(i) > kTol && x(i) < 1.0 - kTol) frac.push_back(i);
        if (frac.empty()) break;

        std::vector<int> tight;
        for (size_t rI = 0; rI < rows.size(); ++rI)
            if (rows[rI].f.dot(x) >= rows[rI].cap - kTol * (1.0 + rows[rI].cap))
                tight.push_back(static_cast<int>(rI));

        Eigen::MatrixXd M(static_cast<int>(tight.size()), static_cast<int>(frac.size()));
        for (size_t a = 0; a < tight.size(); ++a)
            for (size_t bI = 0; bI < frac.size(); ++bI)
                M(static_cast<int>(a), static_cast<int>(bI)) = rows[tight[a]].f(frac[bI]);

        Eigen::VectorXd dir;
        if (M.rows() == 0) {
            dir = Eigen::VectorXd::Zero(static_cast<int>(frac.size()));
            dir(0) = 1.0;
        } else {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
            lu.setThreshold(1e-10);
            const Eigen::MatrixXd ker = lu.kernel();
            if (lu.rank() >= static_cast<int>(frac.size()) || ker.cols() == 0 ||
                ker.col(0).lpNorm<Eigen::Infinity>() < kTol)
                break; // vertex reached
            dir = ker.col(0);
        }
        double du = 0.0;
        for (size_t i = 0; i < frac.size(); ++i) du += u(frac[i]) * dir(static_cast<int>(i));
        if (du < 0.0) dir = -dir;

        Eigen::VectorXd d = Eigen::VectorXd::Zero(ns);
        for (size_t i = 0; i < frac.size(); ++i) d(frac[i]) = dir(static_cast<int>(i));

        double step = std::numeric_limits<double>::infinity();
        for (int i = 0; i < ns; ++i) {
            if (d(i) > kTol) step = std::min(step, (1.0 - x(i)) / d(i));
            if (d(i) < -kTol) step = std::min(step, -x(i) / d(i));
        }
        for (const Row& row : rows) {
            const double fd = row.f.dot(d);
            if (fd > kTol) step = std::min(step, (row.cap - row.f.dot(x)) / fd);
        }
        if (!std::isfinite(step) || step < 0.0) break;
        x += std::max(step, 0.0) * d;
        for (int i = 0; i < ns; ++i) {
            if (x(i) < kTol) x(i) = 0.0;
            if (x(i) > 1.0 - kTol) x(i) = 1.0;
        }
    }

    std::vector<double> out(start);
    for (int i = 0; i < ns; ++i) out[users[i]] = x(i);
    return out;
}

ModifyResult modify(const GufpInstance& g, const std::vector<int>& users,
                    const std::vector<double>& x_tilde, const EdgePartition& part,
                    const std::vector<std::vector<double>>& h, double eps) {
    ModifyResult res;
    res.profile = restricted_profile_from_fractional(g, users, x_tilde, part, h, eps);
    res.x_bar = x_tilde;

    // Removal exists only to push the start under the profile; when it already
    // fits, keep it (the rounding guarantee can only improve).
    bool fits = true;
    for (int r = 0; fits && r < g.num_dims(); ++r)
        for (int e = 0; fits && e < g.num_edges(); ++e) {
            double load = 0.0;
            for (int k : users) load += evaluate_demand(g, k, r, e) * x_tilde[k];
            if (load > res.profile[r][e] + kTol * (1.0 + res.profile[r][e])) fits = false;
        }

    // Greedy left-most removal of eps*h^{p,r} of fractional mass. The removed
    // mass counter carries across intervals within a dimension, per the
    // while-condition of the rounding procedure.
    for (int r = 0; !fits && r < g.num_dims(); ++r) {
        double removed = 0.0;
        for (int p = 0; p < part.count(r); ++p) {
            const auto [lo, hi] = part.spans[r][p];
            int e = lo;
            while (removed < eps * h[r][p] && e <= hi) {
                int pick = -1;
                for (int k : users)
                    if (res.x_bar[k] > 0.0 && x_tilde[k] * evaluate_demand(g, k, r, e) > 0.0) {
                        pick = k;
                        break;
                    }
                if (pick < 0) {
                    ++e;
                    continue;
                }
                removed += x_tilde[pick] * evaluate_demand(g, pick, r, e);
                res.removed_utility += g.utility[pick] * x_tilde[pick];
                res.x_bar[pick] = 0.0;
            }
        }
    }

    res.x_bfs = to_bfs(g, users, res.profile, res.x_bar);
    res.x_hat = res.x_bfs;
    for (int k : users) {
        if (res.x_bfs[k] > kTol && res.x_bfs[k] < 1.0 - kTol) ++res.fractional_support;
        res.x_hat[k] = std::floor(res.x_bfs[k] + kTol);
    }
    return res;
}

bool check_gufp_feasible(const GufpInstance& g, const std::vector<double>& x, double tol) {
    for (int r = 0; r < g.num_dims(); ++r)
        for (int e = 0; e < g.num_edges(); ++e) {
            double load = 0.0;
            for (int k = 0; k < g.num_users(); ++k) load += evaluate_demand(g, k, r, e) * x[k];
            if (load > g.dims[r].capacity[e] + tol * (1.0 + g.dims[r].capacity[e])) return false;
        }
    return true;
}

} // namespace opfline
