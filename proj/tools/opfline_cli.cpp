#include "opfline/conic.hpp"
#include "opfline/io.hpp"
#include "opfline/oracle.hpp"
#include "opfline/qptas.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace {

using namespace opfline;

constexpr int kOk = 0, kInfeasible = 1, kInputError = 2, kNumerical = 3;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

void write_result(const std::string& path, const Json& doc) {
    if (!path.empty()) save_json(doc, path);
}

int run_validate(const std::string& file, const std::string& out) {
    const RadialInstance inst = load_instance(file);
    const ValidationReport rep = validate_instance(inst);
    Json doc{{"command", "validate"}, {"pass", rep.pass()}, {"data_range", rep.data_range},
             {"violations", rep.violations}};
    write_result(out, doc);
    std::cout << (rep.pass() ? "valid" : "invalid") << " (M = " << rep.data_range << ")\n";
    for (const std::string& v : rep.violations) std::cout << "  " << v << "\n";
    return rep.pass() ? kOk : kInfeasible;
}

int run_relax(const std::string& file, const std::string& out) {
    const RadialInstance inst = load_instance(file);
    const RotationRecord rot = rotation_angle(inst);
    RadialInstance ri = rotate_instance(inst, rot);
    ri.finalize();
    RelaxationSpec spec;
    const double t0 = now_seconds();
    const SolveOutcome sol = solve_relaxation(ri, spec);
    const double dt = now_seconds() - t0;
    if (sol.status == SolveStatus::PrimalInfeasible) {
        std::cout << "infeasible: " << sol.message << "\n";
        return kInfeasible;
    }
    if (sol.status != SolveStatus::Optimal) {
        std::cout << "numerical failure: " << sol.message << "\n";
        return kNumerical;
    }
    const PowerFlowState st = unrotate_state(sol.state, rot);
    const FeasibilityReport rep = check_feasibility(inst, st, 1e-6);
    Json doc{{"command", "relax"}, {"status", "optimal"}, {"objective", sol.objective},
             {"loss", sol.loss}, {"iterations", sol.iterations}, {"wall_seconds", dt},
             {"state", emit_state(st)}, {"residuals", emit_report(rep)}};
    write_result(out, doc);
    std::cout << "relaxation objective " << sol.objective << " (loss " << sol.loss << ", "
              << sol.iterations << " iterations, " << dt << " s)\n";
    return kOk;
}

int run_exact(const std::string& file, const std::string& out, int limit) {
    const RadialInstance inst = load_instance(file);
    const RotationRecord rot = rotation_angle(inst);
    RadialInstance ri = rotate_instance(inst, rot);
    ri.finalize();
    const double t0 = now_seconds();
    const OracleResult res = brute_force_opf(ri, limit);
    const double dt = now_seconds() - t0;
    if (!res.found) {
        std::cout << "no feasible assignment (" << res.subproblems << " subproblems)\n";
        return kInfeasible;
    }
    const ExactnessResult er = restore_exactness(ri, res.best_x);
    const PowerFlowState st = unrotate_state(er.state, rot);
    Json doc{{"command", "exact"}, {"status", "optimal"}, {"objective", res.best_value},
             {"subproblems", res.subproblems}, {"feasible_assignments", res.feasible_count},
             {"wall_seconds", dt}, {"state", emit_state(st)},
             {"residuals", emit_report(check_feasibility(inst, st, 1e-6))}};
    write_result(out, doc);
    std::cout << "exhaustive optimum " << res.best_value << " over " << res.subproblems
              << " subproblems (" << dt << " s)\n";
    return kOk;
}

int run_qptas(const std::string& file, const std::string& out, double eps,
              const std::string& mode) {
    const RadialInstance inst = load_instance(file);
    QptasConfig cfg;
    cfg.eps_prime = eps;
    if (mode == "full")
        cfg.mode = GuessMode::Full;
    else if (mode.rfind("capped:", 0) == 0) {
        cfg.mode = GuessMode::Capped;
        cfg.cap_limit = std::stoll(mode.substr(7));
    } else if (mode == "oracle")
        cfg.mode = GuessMode::OracleGuess;
    else {
        std::cerr << "unknown mode '" << mode << "' (full | capped:N | oracle)\n";
        return kInputError;
    }
    const double t0 = now_seconds();
    const QptasResult res = qptas_solve(inst, cfg);
    const double dt = now_seconds() - t0;
    Json doc{{"command", "qptas"}, {"value", res.value}, {"feasible", res.feasible},
             {"fallback", res.fallback}, {"guesses_processed", res.guesses_processed},
             {"guess_count_estimate", res.guess_count_estimate},
             {"internal_eps", res.internal_eps}, {"wall_seconds", dt},
             {"state", emit_state(res.state)},
             {"residuals", emit_report(check_feasibility(inst, res.state, 1e-6))},
             {"message", res.message}};
    write_result(out, doc);
    std::cout << "qptas value " << res.value << " (" << res.guesses_processed << " of ~"
              << res.guess_count_estimate << " guesses, internal eps " << res.internal_eps
              << ", " << dt << " s)\n";
    if (!res.message.empty()) std::cout << "  note: " << res.message << "\n";
    if (res.fallback) return kInfeasible;
    return res.feasible ? kOk : kNumerical;
}

int run_gufp(const std::string& file, const std::string& out, int limit) {
    const GufpInstance g = load_gufp(file);
    const double t0 = now_seconds();
    const OracleResult res = brute_force_gufp(g, limit);
    const double dt = now_seconds() - t0;
    Json doc{{"command", "gufp"}, {"value", res.best_value}, {"x", res.best_x},
             {"subproblems", res.subproblems}, {"wall_seconds", dt}};
    write_result(out, doc);
    std::cout << "gufp optimum " << res.best_value << " (" << res.subproblems << " subsets, "
              << dt << " s)\n";
    return kOk;
}

int run_gen(std::uint64_t seed, int m, int ni, int ne, const std::string& profile,
            const std::string& out) {
    const RadialInstance inst = generate_instance(seed, m, ni, ne, profile);
    const Json doc = emit_instance(inst);
    if (out.empty())
        std::cout << doc.dump(2) << "\n";
    else
        save_json(doc, out);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-optimal AC optimal power flow with discrete demands on radial networks"};
    app.require_subcommand(1);

    std::string file, out, mode = "oracle", profile = "default";
    double eps = 0.3;
    int limit = 14;
    std::uint64_t seed = 1;
    int m = 5, ni = 4, ne = 1;

    auto* validate = app.add_subcommand("validate", "check an instance against the model assumptions");
    validate->add_option("file", file)->required();
    validate->add_option("-o,--out", out);

    auto* relax = app.add_subcommand("relax", "solve the box-relaxed SOCP and report the state");
    relax->add_option("file", file)->required();
    relax->add_option("-o,--out", out);

    auto* exact = app.add_subcommand("exact", "exhaustive search over inelastic assignments");
    exact->add_option("file", file)->required();
    exact->add_option("-o,--out", out);
    exact->add_option("--limit", limit);

    auto* qptas = app.add_subcommand("qptas", "approximation scheme on a line instance");
    qptas->add_option("file", file)->required();
    qptas->add_option("-o,--out", out);
    qptas->add_option("--eps", eps);
    qptas->add_option("--mode", mode, "full | capped:N | oracle");

    auto* gufp = app.add_subcommand("gufp", "exhaustive solve of a standalone GUFP file");
    gufp->add_option("file", file)->required();
    gufp->add_option("-o,--out", out);
    gufp->add_option("--limit", limit)->default_val(20);

    auto* gen = app.add_subcommand("gen", "generate a random line instance");
    gen->add_option("--seed", seed);
    gen->add_option("--m", m);
    gen->add_option("--ni", ni);
    gen->add_option("--ne", ne);
    gen->add_option("--profile", profile, "default | tight | lossy");
    gen->add_option("-o,--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInputError;
    }

    try {
        if (*validate) return run_validate(file, out);
        if (*relax) return run_relax(file, out);
        if (*exact) return run_exact(file, out, limit);
        if (*qptas) return run_qptas(file, out, eps, mode);
        if (*gufp) return run_gufp(file, out, limit);
        if (*gen) return run_gen(seed, m, ni, ne, profile, out);
    } catch (const ParseError& ex) {
        std::cerr << "input error: " << ex.what() << "\n";
        return kInputError;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "input error: " << ex.what() << "\n";
        return kInputError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kNumerical;
    }
    return kInputError;
}
