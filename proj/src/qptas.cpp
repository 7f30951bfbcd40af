#include "opfline/qptas.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

namespace opfline {

namespace {

// Forward edge order of a line instance: edge ids from the root to the leaf.
std::vector<int> line_order(const RadialInstance& inst) {
    if (!inst.is_line()) throw std::invalid_argument("reduction requires a line network");
    int leaf = -1;
    for (int j = 1; j <= inst.node_count; ++j)
        if (inst.children[j].empty()) leaf = j;
    return inst.path_edges(leaf);
}

double round_reciprocal(double eps) { return 1.0 / std::ceil(1.0 / eps); }

struct GuessOutcome {
    long long index = 0;
    double objective = 0.0;
    std::vector<double> x_bar;
};

} // namespace

GufpInstance reduce_to_gufp(const RadialInstance& inst, const std::vector<double>& x_prime) {
    const std::vector<int> order = line_order(inst);
    const int E = static_cast<int>(order.size());
    const std::vector<int> users = inst.inelastic_users();
    const int nu = static_cast<int>(users.size());

    std::vector<int> pos(inst.node_count + 1, -1);
    for (int p = 0; p < E; ++p) pos[order[p]] = p;

    GufpInstance g;
    for (int k : users) g.utility.push_back(inst.users[k].utility);

    // Dimension 0: voltage-drop demand, forward order, cumulative impedance bases.
    GufpDimension d0;
    d0.terms = 2;
    d0.reversed = false;
    d0.base.assign(2, std::vector<double>(E, 0.0));
    double cr = 0.0, ci = 0.0;
    for (int p = 0; p < E; ++p) {
        cr += inst.edges[order[p]].z.real();
        ci += inst.edges[order[p]].z.imag();
        d0.base[0][p] = cr;
        d0.base[1][p] = ci;
    }
    d0.coeff.assign(2, std::vector<double>(nu, 0.0));
    d0.start.assign(nu, 0);
    d0.sat.assign(nu, 0);
    for (int i = 0; i < nu; ++i) {
        const Complex s = inst.users[users[i]].demand;
        d0.coeff[0][i] = s.real();
        d0.coeff[1][i] = s.imag();
        d0.sat[i] = pos[inst.users[users[i]].node];
    }

    // Dimensions 1, 2: subtree active/reactive load, reversed order, unit base.
    auto subtree_dim = [&](bool imag) {
        GufpDimension d;
        d.terms = 1;
        d.reversed = true;
        d.base.assign(1, std::vector<double>(E, 1.0));
        d.coeff.assign(1, std::vector<double>(nu, 0.0));
        d.start.assign(nu, 0);
        d.sat.assign(nu, 0);
        for (int i = 0; i < nu; ++i) {
            const Complex s = inst.users[users[i]].demand;
            d.coeff[0][i] = imag ? s.imag() : s.real();
            d.start[i] = d.sat[i] = E - 1 - pos[inst.users[users[i]].node];
        }
        return d;
    };
    g.dims = {std::move(d0), subtree_dim(false), subtree_dim(true)};

    for (auto& dim : g.dims) dim.capacity.assign(E, 0.0);
    for (int r = 0; r < 3; ++r)
        for (int e = 0; e < E; ++e)
            for (int i = 0; i < nu; ++i)
                g.dims[r].capacity[e] += evaluate_demand(g, i, r, e) * x_prime[users[i]];
    return g;
}

std::vector<std::pair<int, double>> leaf_knapsack_bound(const RadialInstance& inst,
                                                        const std::vector<double>& x_bar,
                                                        const PowerFlowState& baseline) {
    std::vector<std::pair<int, double>> report;
    for (int j = 1; j <= inst.node_count; ++j) {
        if (!inst.children[j].empty()) continue;
        const std::vector<int> pj = inst.path_edges(j);

        auto rho = [&](int k) {
            const std::vector<int> pk = inst.path_edges(inst.users[k].node);
            Complex acc{0.0, 0.0};
            for (size_t i = 0; i < std::min(pj.size(), pk.size()) && pj[i] == pk[i]; ++i)
                acc += std::conj(inst.edges[pj[i]].z) * inst.users[k].demand;
            return acc.real();
        };

        double loss = 0.0;
        for (int t : pj) {
            Complex below{0.0, 0.0};
            std::vector<int> stack(inst.children[t].begin(), inst.children[t].end());
            while (!stack.empty()) {
                int c = stack.back();
                stack.pop_back();
                below += inst.edges[c].z * baseline.l[c];
                for (int cc : inst.children[c]) stack.push_back(cc);
            }
            loss += 2.0 * std::real(std::conj(inst.edges[t].z) * below);
            loss += std::norm(inst.edges[t].z) * baseline.l[t];
        }

        double demand = 0.0, elastic = 0.0;
        for (size_t k = 0; k < inst.users.size(); ++k) {
            if (inst.users[k].kind == UserKind::Inelastic)
                demand += rho(static_cast<int>(k)) * x_bar[k];
            else
                elastic += rho(static_cast<int>(k)) * x_bar[k];
        }
        const double cj = inst.v0 - inst.v_min[j] - loss - elastic;
        report.emplace_back(j, demand - cj);
    }
    return report;
}

namespace {

// Peak demand of user k on interval p of dimension r.
double fbar(const GufpInstance& g, const EdgePartition& part, int k, int r, int p) {
    return evaluate_demand(g, k, r, part.spans[r][p].second);
}

std::vector<int> derive_small(const GufpInstance& g, const EdgePartition& part,
                              const std::vector<int>& members, const std::vector<int>& large,
                              const std::vector<std::vector<double>>& peaks, double eps) {
    std::vector<int> small;
    for (int k : members) {
        if (std::find(large.begin(), large.end(), k) != large.end()) continue;
        bool ok = true;
        for (int r = 0; r < g.num_dims() && ok; ++r)
            for (int p = 0; p < part.count(r) && ok; ++p) {
                double lsum = 0.0;
                for (int kl : large) lsum += fbar(g, part, kl, r, p);
                const double B = eps * eps * (peaks[r][p] + lsum);
                const auto [lo, hi] = part.spans[r][p];
                if (min_positive_demand(g, k, r, lo, hi) > B) ok = false;
            }
        if (ok) small.push_back(k);
    }
    return small;
}

} // namespace

std::vector<GuessConfig> enumerate_guesses(const GufpInstance& g, const Grouping& grp,
                                           const EdgePartition& part, const LevelGrid& levels,
                                           const QptasConfig& cfg, double internal_eps,
                                           const std::vector<double>& reference_gufp_x,
                                           double& count_estimate) {
    const double eps = internal_eps;
    std::vector<GuessConfig> out;

    std::vector<std::pair<std::vector<int>, std::vector<int>>> groups(grp.groups.begin(),
                                                                      grp.groups.end());
    if (cfg.mode == GuessMode::OracleGuess) {
        count_estimate = 1.0;
        GuessConfig gc;
        for (auto& [key, members] : groups) {
            GroupGuess gg;
            gg.key = key;
            std::vector<int> taken;
            for (int k : members)
                if (reference_gufp_x[k] > 0.5) taken.push_back(k);

            std::vector<std::vector<double>> hstar(g.num_dims());
            for (int r = 0; r < g.num_dims(); ++r) {
                hstar[r].assign(part.count(r), 0.0);
                for (int p = 0; p < part.count(r); ++p)
                    for (int k : taken) hstar[r][p] += fbar(g, part, k, r, p);
            }
            for (int k : taken) {
                bool is_large = false;
                for (int r = 0; r < g.num_dims() && !is_large; ++r)
                    for (int p = 0; p < part.count(r) && !is_large; ++p) {
                        const auto [lo, hi] = part.spans[r][p];
                        const double fmin = min_positive_demand(g, k, r, lo, hi);
                        if (fmin > eps * eps * hstar[r][p]) is_large = true;
                    }
                if (is_large) gg.large.push_back(k);
            }
            gg.peaks.resize(g.num_dims());
            for (int r = 0; r < g.num_dims(); ++r) {
                gg.peaks[r].assign(part.count(r), 0.0);
                for (int p = 0; p < part.count(r); ++p) {
                    double lsum = 0.0;
                    for (int kl : gg.large) lsum += fbar(g, part, kl, r, p);
                    // Smallest level with level + lsum >= h*.
                    double chosen = levels.levels[r].back();
                    for (double lv : levels.levels[r])
                        if (lv + lsum >= hstar[r][p] - 1e-12 * (1.0 + hstar[r][p])) {
                            chosen = lv;
                            break;
                        }
                    gg.peaks[r][p] = chosen;
                }
            }
            gg.small = derive_small(g, part, members, gg.large, gg.peaks, eps);
            gc.groups.push_back(std::move(gg));
        }
        out.push_back(std::move(gc));
        return out;
    }

    // Full / Capped: per-group option lists (subset by size then lex, peak
    // vectors monotone per dimension, lexicographic), then a cross product.
    const long long limit = cfg.mode == GuessMode::Capped
                                ? cfg.cap_limit
                                : std::numeric_limits<long long>::max();
    const double size_cap_d = part.total_count() / (eps * eps);

    struct GroupOptions {
        std::vector<int> key;
        std::vector<int> members;
        std::vector<std::pair<std::vector<int>, std::vector<std::vector<double>>>> opts;
        double full_count = 0.0;
    };
    std::vector<GroupOptions> gopts;
    count_estimate = 1.0;

    for (auto& [key, members] : groups) {
        GroupOptions go;
        go.key = key;
        go.members = members;

        const int nm = static_cast<int>(members.size());
        const int max_sz = static_cast<int>(std::min<double>(nm, size_cap_d));
        double nsubsets = 0.0;
        {
            double c = 1.0;
            for (int s = 0; s <= max_sz; ++s) {
                nsubsets += c;
                c = c * (nm - s) / (s + 1);
            }
        }
        // Monotone peak vectors: combinations with repetition of level indices.
        double npeaks = 1.0;
        for (int r = 0; r < g.num_dims(); ++r) {
            const int nl = static_cast<int>(levels.levels[r].size());
            const int pr = part.count(r);
            double c = 1.0;
            for (int i = 0; i < pr; ++i) c = c * (nl + i) / (i + 1);
            npeaks *= c;
        }
        go.full_count = nsubsets * npeaks;
        count_estimate *= std::max(1.0, go.full_count);

        // Materialize (bounded in Capped mode).
        const long long per_group_cap =
            cfg.mode == GuessMode::Capped ? cfg.cap_limit : (1ll << 40);
        std::vector<std::vector<int>> subsets;
        for (int sz = 0; sz <= max_sz && (long long)subsets.size() < per_group_cap; ++sz) {
            std::vector<int> idx(sz);
            for (int i = 0; i < sz; ++i) idx[i] = i;
            while (true) {
                std::vector<int> sub;
                for (int i : idx) sub.push_back(members[i]);
                subsets.push_back(sub);
                if ((long long)subsets.size() >= per_group_cap) break;
                int i = sz - 1;
                while (i >= 0 && idx[i] == nm - sz + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (int j = i + 1; j < sz; ++j) idx[j] = idx[j - 1] + 1;
            }
        }
        std::vector<std::vector<std::vector<double>>> peakvecs;
        {
            std::vector<std::vector<double>> cur(g.num_dims());
            // odometer over per-dimension monotone index vectors
            std::vector<std::vector<int>> iv(g.num_dims());
            for (int r = 0; r < g.num_dims(); ++r) iv[r].assign(part.count(r), 0);
            auto realize = [&] {
                for (int r = 0; r < g.num_dims(); ++r) {
                    cur[r].resize(part.count(r));
                    for (int p = 0; p < part.count(r); ++p) cur[r][p] = levels.levels[r][iv[r][p]];
                }
                peakvecs.push_back(cur);
            };
            while ((long long)peakvecs.size() < per_group_cap) {
                realize();
                // advance: last dimension, last position fastest, keep monotone
                int r = g.num_dims() - 1;
                bool carried = true;
                while (r >= 0 && carried) {
                    const int nl = static_cast<int>(levels.levels[r].size());
                    int p = part.count(r) - 1;
                    while (p >= 0) {
                        if (iv[r][p] + 1 < nl) {
                            ++iv[r][p];
                            for (int pp = p + 1; pp < part.count(r); ++pp) iv[r][pp] = iv[r][p];
                            carried = false;
                            break;
                        }
                        --p;
                    }
                    if (carried) {
                        iv[r].assign(part.count(r), 0);
                        --r;
                    }
                }
                if (carried) break;
            }
        }
        for (const auto& sub : subsets)
            for (const auto& pv : peakvecs) {
                if ((long long)go.opts.size() >= per_group_cap) break;
                go.opts.emplace_back(sub, pv);
            }
        gopts.push_back(std::move(go));
    }

    if (cfg.mode == GuessMode::Full && count_estimate > static_cast<double>(cfg.full_limit))
        throw std::runtime_error("full enumeration estimate " + std::to_string(count_estimate) +
                                 " exceeds the configured limit");

    // Cross product, last group fastest.
    std::vector<size_t> odo(gopts.size(), 0);
    long long index = 0;
    while (index < limit) {
        GuessConfig gc;
        gc.index = index;
        for (size_t gi = 0; gi < gopts.size(); ++gi) {
            const auto& [sub, pv] = gopts[gi].opts[odo[gi]];
            GroupGuess gg;
            gg.key = gopts[gi].key;
            gg.large = sub;
            gg.peaks = pv;
            gg.small = derive_small(g, part, gopts[gi].members, gg.large, gg.peaks, eps);
            gc.groups.push_back(std::move(gg));
        }
        out.push_back(std::move(gc));
        ++index;
        int gi = static_cast<int>(gopts.size()) - 1;
        while (gi >= 0) {
            if (++odo[gi] < gopts[gi].opts.size()) break;
            odo[gi] = 0;
            --gi;
        }
        if (gi < 0) break;
        if (gopts.empty()) break;
    }
    if (gopts.empty() && out.empty()) {
        GuessConfig gc;
        gc.index = 0;
        out.push_back(gc); // no groups: the single empty guess
    }
    return out;
}

QptasResult qptas_solve(const RadialInstance& inst, const QptasConfig& cfg) {
    QptasResult res;
    const RotationRecord rot = rotation_angle(inst);
    RadialInstance ri = rotate_instance(inst, rot);
    ri.finalize();

    const std::vector<int> inelastic = ri.inelastic_users();
    const int n = static_cast<int>(ri.users.size());

    RelaxationSpec relaxed;
    relaxed.kind = RelaxationKind::Relaxed;
    const SolveOutcome base = solve_relaxation(ri, relaxed, cfg.solver);

    std::optional<GuessOutcome> best;
    auto consider = [&](GuessOutcome cand) {
        if (!best || cand.objective > best->objective ||
            (cand.objective == best->objective && cand.index < best->index))
            best = std::move(cand);
    };

    if (inelastic.empty()) {
        res.guess_count_estimate = 1.0;
        res.guesses_processed = 1;
        if (base.status == SolveStatus::Optimal) {
            GuessOutcome g0;
            g0.x_bar = base.state.x;
            for (double& v : g0.x_bar) v = std::clamp(v, 0.0, 1.0);
            g0.objective = base.objective;
            consider(std::move(g0));
        }
    } else {
        std::vector<double> xref(n, 0.0);
        if (base.status == SolveStatus::Optimal) xref = base.state.x;
        const GufpInstance gufp = reduce_to_gufp(ri, xref);
        const EdgePartition part = build_partition(gufp, cfg.growth);

        // Pessimistic bound on the per-group loss factor; alpha <= sum_r P_r.
        double beta_hat = 0.0;
        for (int r = 0; r < gufp.num_dims(); ++r)
            beta_hat = std::max(beta_hat,
                                2.0 * (2.0 * cfg.growth + part.total_count() * part.count(r)));
        const double eps = round_reciprocal(cfg.eps_prime / (3.0 * (2.0 * beta_hat + 1.0)));
        res.internal_eps = eps;

        const Grouping grp = group_users(gufp, eps);
        const LevelGrid levels = build_levels(gufp, eps);

        std::vector<double> ref_g(gufp.num_users(), 0.0);
        if (cfg.mode == GuessMode::OracleGuess) {
            std::vector<double> ref = cfg.reference_x;
            if (ref.empty()) ref = brute_force_opf(ri, 14, cfg.solver).best_x;
            if (static_cast<int>(ref.size()) != n)
                throw std::invalid_argument("reference assignment size mismatch");
            for (size_t i = 0; i < inelastic.size(); ++i) ref_g[i] = ref[inelastic[i]];
        }

        const std::vector<GuessConfig> guesses = enumerate_guesses(
            gufp, grp, part, levels, cfg, eps, ref_g, res.guess_count_estimate);

        auto process = [&](const GuessConfig& gc) -> std::optional<GuessOutcome> {
            RelaxationSpec spec;
            spec.kind = RelaxationKind::Relaxed;
            std::vector<char> is_large(n, 0), is_small(n, 0);
            for (const GroupGuess& gg : gc.groups) {
                for (int k : gg.large) is_large[inelastic[k]] = 1;
                for (int k : gg.small) is_small[inelastic[k]] = 1;
            }
            for (int k : inelastic)
                spec.pins[k] = is_large[k] ? 1.0 : (is_small[k] ? -1.0 : 0.0);
            for (auto it = spec.pins.begin(); it != spec.pins.end();)
                it = (it->second < 0.0) ? spec.pins.erase(it) : std::next(it);
            for (const GroupGuess& gg : gc.groups) {
                if (gg.small.empty()) continue;
                for (size_t r = 0; r < gg.peaks.size(); ++r)
                    for (size_t p = 0; p < gg.peaks[r].size(); ++p) {
                        LinearCap cap;
                        cap.bound = gg.peaks[r][p];
                        for (int k : gg.small) {
                            cap.users.push_back(inelastic[k]);
                            cap.coeffs.push_back(
                                fbar(gufp, part, k, static_cast<int>(r), static_cast<int>(p)));
                        }
                        spec.caps.push_back(std::move(cap));
                    }
            }
            const SolveOutcome sol = solve_relaxation(ri, spec, cfg.solver);
            if (sol.status != SolveStatus::Optimal) return std::nullopt;

            std::vector<double> xp = sol.state.x;
            for (double& v : xp) v = std::clamp(v, 0.0, 1.0);
            std::vector<double> xbar = xp;
            for (int k : inelastic) xbar[k] = is_large[k] ? 1.0 : 0.0;

            std::vector<double> xt(gufp.num_users(), 0.0);
            for (size_t i = 0; i < inelastic.size(); ++i) xt[i] = xp[inelastic[i]];
            for (const GroupGuess& gg : gc.groups) {
                if (gg.small.empty()) continue;
                const ModifyResult mr = modify(gufp, gg.small, xt, part, gg.peaks, eps);
                for (int k : gg.small) xbar[inelastic[k]] = mr.x_hat[k];
            }

            RelaxationSpec fixed;
            fixed.kind = RelaxationKind::Fixed;
            fixed.x_fixed = xbar;
            const SolveOutcome fs = solve_relaxation(ri, fixed, cfg.solver);
            if (fs.status != SolveStatus::Optimal) return std::nullopt;
            GuessOutcome out;
            out.index = gc.index;
            out.objective = fs.objective;
            out.x_bar = std::move(xbar);
            return out;
        };

        int workers = cfg.workers;
        if (workers <= 0) {
            if (const char* env = std::getenv("OPFLINE_WORKERS")) workers = std::atoi(env);
            if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
            if (workers <= 0) workers = 1;
        }
        workers = std::min(workers, static_cast<int>(std::max<size_t>(guesses.size(), 1)));

        std::atomic<size_t> next{0};
        std::mutex mu;
        auto worker = [&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= guesses.size()) return;
                auto r = process(guesses[i]);
                std::lock_guard<std::mutex> lock(mu);
                ++res.guesses_processed;
                if (r) consider(std::move(*r));
            }
        };
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
    }

    std::vector<double> final_x(n, 0.0);
    if (best) {
        final_x = best->x_bar;
    } else {
        res.fallback = true;
        res.message = "no guess produced a feasible candidate; returning the all-off assignment";
    }
    const ExactnessResult er = restore_exactness(ri, final_x, 1e-6, cfg.solver);
    if (er.success) {
        res.feasible = true;
        res.state = unrotate_state(er.state, rot);
        res.state.x = final_x;
        res.value = er.objective;
    } else {
        res.state = unrotate_state(er.state, rot);
        res.state.x = final_x;
        res.value = er.objective;
        res.message = res.message.empty() ? ("exactness restoration flagged: " + er.message)
                                          : res.message;
    }
    return res;
}

} // namespace opfline
