#include "opfline/socp.hpp"

#include <cmath>
#include <limits>

namespace opfline {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Layout {
    int orthant = 0;
    std::vector<int> soc;
    int total = 0;
    int degree = 0; // orthant rows + one per SOC block
};

VectorXd cone_identity(const Layout& lay) {
    VectorXd e = VectorXd::Zero(lay.total);
    e.head(lay.orthant).setOnes();
    int at = lay.orthant;
    for (int q : lay.soc) {
        e(at) = 1.0;
        at += q;
    }
    return e;
}

// Distance to the cone along -e: max block violation (negative inside).
double cone_violation(const VectorXd& v, const Layout& lay) {
    double worst = -kInf;
    for (int i = 0; i < lay.orthant; ++i) worst = std::max(worst, -v(i));
    int at = lay.orthant;
    for (int q : lay.soc) {
        worst = std::max(worst, v.segment(at + 1, q - 1).norm() - v(at));
        at += q;
    }
    return worst;
}

// sup { a >= 0 : v + t*dv in K for all t in [0, a] }, for v in the interior.
double cone_max_step(const VectorXd& v, const VectorXd& dv, const Layout& lay) {
    double alpha = kInf;
    for (int i = 0; i < lay.orthant; ++i)
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    int at = lay.orthant;
    for (int q : lay.soc) {
        const double v0 = v(at), d0 = dv(at);
        const auto vb = v.segment(at + 1, q - 1);
        const auto db = dv.segment(at + 1, q - 1);
        // Smallest positive root of (v0+t*d0)^2 - |vb+t*db|^2 = 0.
        const double a = d0 * d0 - db.squaredNorm();
        const double b = 2.0 * (v0 * d0 - vb.dot(db));
        const double c = v0 * v0 - vb.squaredNorm();
        double root = kInf;
        if (std::abs(a) < 1e-14) {
            if (b < 0.0) root = -c / b;
        } else {
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                for (double r : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)})
                    if (r > 0.0) root = std::min(root, r);
            }
        }
        alpha = std::min(alpha, root);
        at += q;
    }
    return alpha;
}

VectorXd jordan_prod(const VectorXd& u, const VectorXd& v, const Layout& lay) {
    VectorXd out(lay.total);
    out.head(lay.orthant) = u.head(lay.orthant).cwiseProduct(v.head(lay.orthant));
    int at = lay.orthant;
    for (int q : lay.soc) {
        out(at) = u.segment(at, q).dot(v.segment(at, q));
        out.segment(at + 1, q - 1) =
            u(at) * v.segment(at + 1, q - 1) + v(at) * u.segment(at + 1, q - 1);
        at += q;
    }
    return out;
}

// Solves lam o w = d for w (arrow-matrix inverse per SOC block).
VectorXd jordan_div(const VectorXd& lam, const VectorXd& d, const Layout& lay) {
    VectorXd out(lay.total);
    out.head(lay.orthant) = d.head(lay.orthant).cwiseQuotient(lam.head(lay.orthant));
    int at = lay.orthant;
    for (int q : lay.soc) {
        const double l0 = lam(at);
        const auto lb = lam.segment(at + 1, q - 1);
        const double det = l0 * l0 - lb.squaredNorm();
        const double w0 = (l0 * d(at) - lb.dot(d.segment(at + 1, q - 1))) / det;
        out(at) = w0;
        out.segment(at + 1, q - 1) = (d.segment(at + 1, q - 1) - w0 * lb) / l0;
        at += q;
    }
    return out;
}

// Nesterov-Todd scaling: symmetric W with W z = W^{-1} s.
struct Scaling {
    VectorXd orth_w;                 // sqrt(s/z) componentwise
    std::vector<MatrixXd> W, Winv;   // per SOC block

    VectorXd apply(const VectorXd& v, const Layout& lay, bool inverse) const {
        VectorXd out(lay.total);
        if (inverse)
            out.head(lay.orthant) = v.head(lay.orthant).cwiseQuotient(orth_w);
        else
            out.head(lay.orthant) = v.head(lay.orthant).cwiseProduct(orth_w);
        int at = lay.orthant;
        for (size_t i = 0; i < lay.soc.size(); ++i) {
            const int q = lay.soc[i];
            out.segment(at, q) = (inverse ? Winv[i] : W[i]) * v.segment(at, q);
            at += q;
        }
        return out;
    }

    MatrixXd squared_dense(const Layout& lay) const {
        MatrixXd M = MatrixXd::Zero(lay.total, lay.total);
        M.diagonal().head(lay.orthant) = orth_w.cwiseProduct(orth_w);
        int at = lay.orthant;
        for (size_t i = 0; i < lay.soc.size(); ++i) {
            const int q = lay.soc[i];
            M.block(at, at, q, q) = W[i] * W[i];
            at += q;
        }
        return M;
    }
};

bool compute_scaling(const VectorXd& s, const VectorXd& z, const Layout& lay, Scaling& sc) {
    sc.orth_w.resize(lay.orthant);
    for (int i = 0; i < lay.orthant; ++i) {
        if (s(i) <= 0.0 || z(i) <= 0.0) return false;
        sc.orth_w(i) = std::sqrt(s(i) / z(i));
    }
    sc.W.clear();
    sc.Winv.clear();
    int at = lay.orthant;
    for (int q : lay.soc) {
        const auto sb = s.segment(at, q);
        const auto zb = z.segment(at, q);
        const double res_s = sb(0) * sb(0) - sb.tail(q - 1).squaredNorm();
        const double res_z = zb(0) * zb(0) - zb.tail(q - 1).squaredNorm();
        if (res_s <= 0.0 || res_z <= 0.0 || sb(0) <= 0.0 || zb(0) <= 0.0) return false;
        const VectorXd sn = sb / std::sqrt(res_s);
        VectorXd zn = zb / std::sqrt(res_z);
        const double gamma = std::sqrt((1.0 + sn.dot(zn)) / 2.0);
        zn.tail(q - 1) *= -1.0; // J z
        VectorXd w = (sn + zn) / (2.0 * gamma);
        const double eta = std::pow(res_s / res_z, 0.25);

        MatrixXd Wb(q, q), Wib(q, q);
        const VectorXd wb = w.tail(q - 1);
        Wb(0, 0) = w(0);
        Wb.block(0, 1, 1, q - 1) = wb.transpose();
        Wb.block(1, 0, q - 1, 1) = wb;
        Wb.block(1, 1, q - 1, q - 1) =
            MatrixXd::Identity(q - 1, q - 1) + wb * wb.transpose() / (1.0 + w(0));
        Wib = Wb;
        Wib.block(0, 1, 1, q - 1) *= -1.0;
        Wib.block(1, 0, q - 1, 1) *= -1.0;
        sc.W.push_back(eta * Wb);
        sc.Winv.push_back(Wib / eta);
        at += q;
    }
    return true;
}

} // namespace

int ConeProgram::cone_rows() const {
    int total = orthant_dim;
    for (int q : soc_dims) total += q;
    return total;
}

ConeSolution solve_socp(const ConeProgram& prog, const SocpSettings& settings) {
    const int n = prog.num_vars();
    const int p = static_cast<int>(prog.b.size());
    Layout lay;
    lay.orthant = prog.orthant_dim;
    lay.soc = prog.soc_dims;
    lay.total = prog.cone_rows();
    lay.degree = lay.orthant + static_cast<int>(lay.soc.size());
    const int mc = lay.total;

    ConeSolution sol;
    if (mc == 0 || n == 0) {
        sol.message = "degenerate program";
        return sol;
    }
    if (prog.G.rows() != mc || prog.G.cols() != n || prog.h.size() != mc ||
        (p > 0 && (prog.A.rows() != p || prog.A.cols() != n))) {
        sol.message = "dimension mismatch";
        return sol;
    }

    const MatrixXd& A = prog.A;
    const MatrixXd& G = prog.G;
    const VectorXd& b = prog.b;
    const VectorXd& h = prog.h;
    const VectorXd& c = prog.c;
    const VectorXd e = cone_identity(lay);

    const int N = n + p + mc;
    MatrixXd K0 = MatrixXd::Zero(N, N);
    if (p > 0) {
        K0.block(0, n, n, p) = A.transpose();
        K0.block(n, 0, p, n) = A;
    }
    K0.block(0, n + p, n, mc) = G.transpose();
    K0.block(n + p, 0, mc, n) = G;

    Eigen::PartialPivLU<MatrixXd> lu;
    MatrixXd K = K0;
    auto factor = [&](const MatrixXd& W2) {
        K = K0;
        K.block(n + p, n + p, mc, mc) = -W2;
        K.diagonal().head(n).array() += settings.regularization;
        K.diagonal().tail(p + mc).array() -= settings.regularization;
        lu.compute(K);
    };
    // Solve against the unregularized system with one refinement pass.
    auto kkt_solve = [&](const VectorXd& rx, const VectorXd& ry, const VectorXd& rz,
                         const MatrixXd& W2) {
        VectorXd rhs(N);
        rhs.head(n) = rx;
        rhs.segment(n, p) = ry;
        rhs.tail(mc) = rz;
        VectorXd u = lu.solve(rhs);
        MatrixXd Kexact = K0;
        Kexact.block(n + p, n + p, mc, mc) = -W2;
        for (int pass = 0; pass < 2; ++pass) u += lu.solve(rhs - Kexact * u);
        return u;
    };

    // Initial point from two least-squares solves with identity scaling.
    factor(MatrixXd::Identity(mc, mc));
    VectorXd x, y, s, z;
    {
        VectorXd u = kkt_solve(VectorXd::Zero(n), b, h, MatrixXd::Identity(mc, mc));
        x = u.head(n);
        s = -u.tail(mc);
        double ap = cone_violation(s, lay);
        if (ap >= -1e-8) s += (1.0 + ap) * e;

        VectorXd ud = kkt_solve(-c, VectorXd::Zero(p), VectorXd::Zero(mc), MatrixXd::Identity(mc, mc));
        y = ud.segment(n, p);
        z = ud.tail(mc);
        double ad = cone_violation(z, lay);
        if (ad >= -1e-8) z += (1.0 + ad) * e;
    }
    double tau = 1.0, kappa = 1.0;

    const double bh_norm = std::max(1.0, std::sqrt(b.squaredNorm() + h.squaredNorm()));
    const double c_norm = std::max(1.0, c.norm());

    double best_metric = kInf;
    VectorXd best_x = x, best_y = y, best_z = z, best_s = s;
    double best_tau = tau;
    Scaling sc;
    for (int iter = 0; iter < settings.max_iter; ++iter) {
        sol.iterations = iter;

        // Residuals of the self-dual embedding.
        VectorXd rx = G.transpose() * z + c * tau;
        if (p > 0) rx += A.transpose() * y;
        VectorXd ry = p > 0 ? VectorXd(-A * x + b * tau) : VectorXd();
        VectorXd rz = -G * x + h * tau - s;
        const double bty = (p > 0 ? b.dot(y) : 0.0) + h.dot(z);
        const double rtau = -c.dot(x) - bty - kappa;
        const double mu = (s.dot(z) + tau * kappa) / (lay.degree + 1);

        const double pcost = c.dot(x) / tau;
        const double pres = std::sqrt(ry.squaredNorm() + rz.squaredNorm()) / tau / bh_norm;
        const double dres = rx.norm() / tau / c_norm;
        const double absgap = s.dot(z) / (tau * tau);
        const double relgap = absgap / std::max(1.0, std::abs(pcost));
        const double metric = std::max({pres, dres, relgap});
        if (std::isfinite(metric) && metric < best_metric) {
            best_metric = metric;
            best_x = x;
            best_y = y;
            best_z = z;
            best_s = s;
            best_tau = tau;
        }

        if (pres <= settings.tol && dres <= settings.tol &&
            (absgap <= settings.tol || relgap <= settings.tol)) {
            sol.status = SolveStatus::Optimal;
            sol.x = x / tau;
            sol.y = y / tau;
            sol.z = z / tau;
            sol.s = s / tau;
            sol.primal_objective = pcost;
            sol.dual_objective = -bty / tau;
            sol.gap = absgap;
            return sol;
        }

        // Certificates of infeasibility (kappa dominating tau).
        if (kappa > tau) {
            if (bty < -1e-14) {
                const double cert = rx.norm() / (-bty) * tau; // == ||A'y+G'z|| / (-b'y-h'z) up to c*tau
                const double raw = ((p > 0 ? (A.transpose() * y).eval() : VectorXd::Zero(n)) +
                                    G.transpose() * z)
                                       .norm() /
                                   (-bty);
                (void)cert;
                if (raw <= settings.tol_infeasible) {
                    sol.status = SolveStatus::PrimalInfeasible;
                    sol.y = y / (-bty);
                    sol.z = z / (-bty);
                    sol.message = "primal infeasibility certificate";
                    return sol;
                }
            }
            const double ctx = c.dot(x);
            if (ctx < -1e-14) {
                double raw = std::sqrt((p > 0 ? (A * x).squaredNorm() : 0.0) +
                                       (G * x + s).squaredNorm()) /
                             (-ctx);
                if (raw <= settings.tol_infeasible) {
                    sol.status = SolveStatus::DualInfeasible;
                    sol.x = x / (-ctx);
                    sol.s = s / (-ctx);
                    sol.message = "dual infeasibility certificate (unbounded objective)";
                    return sol;
                }
            }
        }

        if (!compute_scaling(s, z, lay, sc)) {
            sol.message = "iterate left the cone interior";
            break;
        }
        const VectorXd lambda = sc.apply(z, lay, false);
        const MatrixXd W2 = sc.squared_dense(lay);
        factor(W2);

        const VectorXd u1 = kkt_solve(-c, b, h, W2);
        const double cx1 = c.dot(u1.head(n));
        const double by1 = (p > 0 ? b.dot(u1.segment(n, p)) : 0.0) + h.dot(u1.tail(mc));

        auto direction = [&](double sigma, const VectorXd& ds_rhs, double dkappa_rhs) {
            const double f = 1.0 - sigma;
            const VectorXd u2 = kkt_solve(-f * rx, f * ry, f * rz - sc.apply(jordan_div(lambda, ds_rhs, lay), lay, false), W2);
            const double cx2 = c.dot(u2.head(n));
            const double by2 = (p > 0 ? b.dot(u2.segment(n, p)) : 0.0) + h.dot(u2.tail(mc));
            const double denom = cx1 + by1 - kappa / tau;
            const double dtau = (f * rtau - cx2 - by2 - dkappa_rhs / tau) / denom;
            VectorXd dx = u2.head(n) + dtau * u1.head(n);
            VectorXd dy = p > 0 ? VectorXd(u2.segment(n, p) + dtau * u1.segment(n, p)) : VectorXd();
            VectorXd dz = u2.tail(mc) + dtau * u1.tail(mc);
            VectorXd ds = sc.apply(jordan_div(lambda, ds_rhs, lay), lay, false) - W2 * dz;
            const double dkappa = (dkappa_rhs - kappa * dtau) / tau;
            return std::make_tuple(dx, dy, dz, ds, dtau, dkappa);
        };

        auto max_alpha = [&](const VectorXd& dz, const VectorXd& ds, double dtau, double dkappa) {
            double a = std::min(cone_max_step(s, ds, lay), cone_max_step(z, dz, lay));
            if (dtau < 0.0) a = std::min(a, -tau / dtau);
            if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
            return a;
        };

        // Affine scaling direction.
        const VectorXd ll = jordan_prod(lambda, lambda, lay);
        auto [dxa, dya, dza, dsa, dtaua, dkappaa] = direction(0.0, -ll, -tau * kappa);
        const double alpha_aff = std::min(1.0, max_alpha(dza, dsa, dtaua, dkappaa));
        double sigma = std::pow(1.0 - alpha_aff, 3);
        sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

        // Combined direction with Mehrotra correction.
        const VectorXd corr =
            jordan_prod(sc.apply(dsa, lay, true), sc.apply(dza, lay, false), lay);
        const VectorXd ds_rhs = sigma * mu * e - ll - corr;
        const double dkappa_rhs = sigma * mu - tau * kappa - dtaua * dkappaa;
        auto [dx, dy, dz, ds, dtau, dkappa] = direction(sigma, ds_rhs, dkappa_rhs);

        double alpha = settings.step_fraction * max_alpha(dz, ds, dtau, dkappa);
        alpha = std::min(alpha, 1.0);
        if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
            sol.message = "step length collapsed";
            break;
        }

        x += alpha * dx;
        if (p > 0) y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if (!(tau > 0.0) || !std::isfinite(tau)) {
            sol.message = "tau collapsed";
            break;
        }
    }

    // Accept a slightly reduced accuracy answer from the best iterate seen;
    // otherwise report failure.
    sol.x = best_x / best_tau;
    sol.y = best_y / best_tau;
    sol.z = best_z / best_tau;
    sol.s = best_s / best_tau;
    sol.primal_objective = c.dot(best_x) / best_tau;
    sol.dual_objective = -((p > 0 ? b.dot(best_y) : 0.0) + h.dot(best_z)) / best_tau;
    sol.gap = best_s.dot(best_z) / (best_tau * best_tau);
    if (best_metric <= std::max(1e-7, 100.0 * settings.tol) && sol.x.allFinite()) {
        sol.status = SolveStatus::Optimal;
        sol.message = "reduced accuracy";
    } else {
        sol.status = SolveStatus::NumericalFailure;
        if (sol.message.empty()) sol.message = "iteration limit";
    }
    return sol;
}

} // namespace opfline
