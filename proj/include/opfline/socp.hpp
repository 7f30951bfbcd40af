#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace opfline {

/// Conic program in standard form:
///   min c'x  s.t.  A x = b,  G x + s = h,  s in K,
/// where K = R+^{orthant_dim} x SOC(q_1) x ... x SOC(q_N) and the rows of G
/// are laid out in that cone order.
struct ConeProgram {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    Eigen::VectorXd c;
    int orthant_dim = 0;
    std::vector<int> soc_dims;

    int num_vars() const { return static_cast<int>(c.size()); }
    int cone_rows() const;
};

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, NumericalFailure };

struct ConeSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x, y, z, s;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;
    int iterations = 0;
    std::string message;
};

struct SocpSettings {
    double tol = 1e-9;             // feasibility and gap tolerance
    double tol_infeasible = 1e-8;  // certificate residual threshold
    int max_iter = 100;
    double step_fraction = 0.99;
    double regularization = 1e-11;
};

/// Dense primal-dual interior-point solver on the homogeneous self-dual
/// embedding, with Nesterov-Todd scaling and a Mehrotra corrector.
ConeSolution solve_socp(const ConeProgram& prog, const SocpSettings& settings = {});

} // namespace opfline
