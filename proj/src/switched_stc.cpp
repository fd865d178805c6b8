#include "ddn/switched_stc.hpp"

namespace ddn::aperiodic {

void SwitchedStcDesign::validate() const {
    if (s_max < 2) throw std::invalid_argument("sts: s_max must be >= 2");
    if (sigma1 < 0.0 || sigma2 < 0.0) throw std::invalid_argument("sts: sigma weights must be >= 0");
    if (omega.rows() != omega.cols() || min_eigenvalue(omega) <= 0.0)
        throw std::invalid_argument("sts: triggering matrix must be positive definite");
    if (K.cols() != omega.rows()) throw std::invalid_argument("sts: gain shape mismatch");
}

namespace {

Vec held_direction(const data::LiftedDataSet& set, const Vec& x, const Mat& K) {
    Vec xi(set.n + set.lifted_input_dim());
    xi.head(set.n) = x;
    for (Eigen::Index i = 0; i < set.s; ++i)
        xi.segment(set.n + i * set.m, set.m) = K * x;
    return xi;
}

}  // namespace

bool sts_member_certificate(const data::LiftedDataSet& set, const Vec& xi, const Mat& M11,
                            const Vec& m12, double c0, double tol) {
    const Eigen::Index n = set.n;
    const Eigen::Index q = n + set.lifted_input_dim();
    if (xi.size() != q) throw std::invalid_argument("sts: direction dimension mismatch");
    if (M11.rows() != n || m12.size() != n)
        throw std::invalid_argument("sts: certificate block dimensions mismatch");

    Mat Q = set.Q_blk();
    Mat S = set.S_blk();
    Mat R = set.R_blk();

    const Eigen::Index d = n * q;
    Mat F0 = Mat::Zero(d + 1, d + 1);
    F0.topLeftCorner(d, d) = kron(M11, xi * xi.transpose());
    Vec b = kron(Mat(m12), Mat(xi));  // (m12 (x) xi)
    F0.block(0, d, d, 1) = b;
    F0.block(d, 0, 1, d) = b.transpose();
    F0(d, d) = c0;

    Mat F1 = Mat::Zero(d + 1, d + 1);
    F1.topLeftCorner(d, d) = -kron(Mat::Identity(n, n), Q);
    Vec vs = vectorize(S);
    F1.block(0, d, d, 1) = -vs;
    F1.block(d, 0, 1, d) = -vs.transpose();
    F1(d, d) = -R.trace();

    // F0 + gamma F1 >= 0 for some gamma > 0; lambda_min is concave in gamma.
    return sts_gamma_feasible(F0, -F1, nullptr, tol);
}

bool sts_trigger_certified(const data::LiftedDataSet& set, const Vec& x, const Mat& K,
                           const Mat& omega, double sigma1, double sigma2, double tol) {
    Vec xi = held_direction(set, x, K);
    Mat M11 = (sigma1 - 1.0) * omega;
    Vec m12 = omega * x;
    double c0 = (sigma2 - 1.0) * x.dot(omega * x);
    return sts_member_certificate(set, xi, M11, m12, c0, tol);
}

bool sts_contraction_certified(const data::LiftedDataSet& set, const Vec& x, const Mat& K,
                               const Mat& lyapunov, double mu, double tol) {
    Vec xi = held_direction(set, x, K);
    return sts_member_certificate(set, xi, -lyapunov, Vec::Zero(set.n),
                                  mu * x.dot(lyapunov * x), tol);
}

bool sts_gamma_feasible(const Mat& q_tilde, const Mat& g_tilde, double* gamma_best, double tol) {
    // Normalise both sides so the acceptance tolerance is relative; the
    // existence of gamma > 0 is invariant under separate positive scalings.
    double sq = std::max(q_tilde.cwiseAbs().maxCoeff(), 1e-300);
    double sg = std::max(g_tilde.cwiseAbs().maxCoeff(), 1e-300);
    Mat qn = q_tilde / sq;
    Mat gn = g_tilde / sg;
    auto eig_at = [&](double lg) { return min_eigenvalue(qn - std::pow(10.0, lg) * gn); };

    double best_lg = 0.0, best_val = -std::numeric_limits<double>::infinity();
    for (double lg = -6.0; lg <= 6.0 + 1e-9; lg += 0.5) {
        double v = eig_at(lg);
        if (v > best_val) {
            best_val = v;
            best_lg = lg;
        }
    }
    // Golden-section refinement around the grid peak (lambda_min is concave
    // in gamma, hence unimodal on the line).
    double a = best_lg - 0.5, b = best_lg + 0.5;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = eig_at(c), fd = eig_at(d);
    for (int it = 0; it < 60; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = eig_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = eig_at(d);
        }
    }
    double lg_star = fc > fd ? c : d;
    double val = std::max({best_val, fc, fd});
    if (gamma_best) *gamma_best = std::pow(10.0, lg_star);
    return val >= -tol;
}

Eigen::Index sts_switched_evaluate(const Vec& x, const std::vector<data::LiftedDataSet>& family,
                                   const Mat& K, const Mat& omega, double sigma1, double sigma2,
                                   double tol, const Mat* lyapunov, double decay) {
    if (family.empty()) throw std::invalid_argument("sts: empty lifted family");
    if (omega.rows() != omega.cols() || min_eigenvalue(omega) <= 0.0)
        throw std::invalid_argument("sts: triggering matrix must be positive definite");
    // Consecutive chain: certifying every depth up to s keeps the per-step
    // triggering inequality valid at the intermediate instants as well, which
    // is what the Lyapunov argument of the co-design consumes.
    Eigen::Index best = 0;
    double mu = 1.0;
    for (const auto& set : family) {
        if (!sts_trigger_certified(set, x, K, omega, sigma1, sigma2, tol)) break;
        if (lyapunov) {
            mu *= decay;
            if (!sts_contraction_certified(set, x, K, *lyapunov, mu, tol)) break;
        }
        best = set.s;
    }
    return std::max<Eigen::Index>(best, 1);
}

SwitchedDesignResult stc_switched_design(const data::LiftedDataSet& set_s1, double sigma1,
                                         double sigma2, std::optional<double> alpha,
                                         double decay) {
    if (set_s1.s != 1) throw std::invalid_argument("sts design: depth-1 set required");
    const Eigen::Index n = set_s1.n;
    const Eigen::Index m = set_s1.m;

    std::vector<double> alphas;
    if (alpha)
        alphas.push_back(*alpha);
    else
        alphas = {2.0, 5.0, -2.0, -5.0, 10.0, -10.0, 1.0};

    // Block selectors over the inner vector [x(t+1); x(t); x(t_k)].
    auto selector = [&](int which) {
        Mat e = Mat::Zero(n, 3 * n);
        e.block(0, which * n, n, n) = Mat::Identity(n, n);
        return e;
    };
    Mat E2 = selector(0);  // successor
    Mat E1 = selector(1);  // current sample
    Mat E3 = selector(2);  // held state

    SwitchedDesignResult out;
    for (double a : alphas) {
        Mat Lmat = (E1 + a * E2).transpose();  // 3n x n descriptor multiplier
        Mat Z1 = Mat::Zero(n + m, 2 * n + m);
        Z1.leftCols(n + m) = Mat::Identity(n + m, n + m);
        Mat Z2 = Mat::Zero(3 * n, 2 * n + m);
        Z2.rightCols(n) = Lmat;

        lmi::SdpProblem prob;
        auto P = prob.symmetric(n, "P");
        auto Oz = prob.symmetric(n, "Omega_z");
        auto G = prob.rect(n, n, "G");
        auto Kc = prob.rect(m, n, "K_c");
        auto ep = prob.scalar("eps");

        const double delta = 1e-6;
        prob.require_psd(prob.expr(P), delta);
        prob.require_psd(prob.expr(Oz), delta);
        prob.require_ge(prob.expr(ep), delta);

        lmi::LinExpr H = E2.transpose() * prob.expr(P) * E2 -
                         E1.transpose() * (decay * prob.expr(P)) * E1;
        lmi::LinExpr J = lmi::sym_sum(-(Lmat * (prob.expr(G) * E2))) +
                         E1.transpose() * (sigma1 * prob.expr(Oz)) * E1 +
                         E3.transpose() * (sigma2 * prob.expr(Oz)) * E3 -
                         (E1 - E3).transpose() * prob.expr(Oz) * (E1 - E3);
        lmi::LinExpr Kblk = lmi::block_matrix({{prob.expr(G) * E1}, {prob.expr(Kc) * E3}});
        lmi::LinExpr Y1 = lmi::scale_by(prob.expr(ep), Z1 * set_s1.theta * Z1.transpose());
        lmi::LinExpr Y2 = lmi::scale_by(prob.expr(ep), Z1 * set_s1.theta * Z2.transpose());
        lmi::LinExpr Y3 = lmi::scale_by(prob.expr(ep), Z2 * set_s1.theta * Z2.transpose());

        lmi::LinExpr top_right = Y2 + Kblk;
        lmi::LinExpr big = lmi::block_matrix(
            {{Y1, top_right}, {top_right.transpose(), H + J + Y3}});
        prob.require_nsd(big, delta, "codesign");

        auto sol = prob.solve_feasibility();
        if (!sol.feasible()) {
            if (!out.ok()) {
                out.status = sol.status;
                out.message = sol.message;
            }
            continue;
        }
        Mat Gv = prob.value(sol, G);
        Eigen::JacobiSVD<Mat> svd(Gv);
        if (svd.singularValues()(svd.singularValues().size() - 1) < 1e-8) {
            if (!out.ok()) {
                out.status = lmi::SdpStatus::NumericalFailure;
                out.message = "design returned a singular G";
            }
            continue;
        }
        Mat G_inv = Gv.inverse();
        out.status = lmi::SdpStatus::Feasible;
        out.K = prob.value(sol, Kc) * G_inv;
        out.omega = sym(G_inv.transpose() * prob.value(sol, Oz) * G_inv);
        out.lyapunov = sym(G_inv.transpose() * prob.value(sol, P) * G_inv);
        out.decay = decay;
        out.alpha_used = a;
        out.multiplier = prob.scalar_value(sol, ep);
        out.message.clear();
        return out;
    }
    return out;
}

SwitchedDesignResult stc_switched_design_fast(const data::LiftedDataSet& set_s1, double sigma1,
                                              double sigma2, double decay_floor) {
    SwitchedDesignResult best = stc_switched_design(set_s1, sigma1, sigma2);
    if (!best.ok()) return best;
    double lo = decay_floor, hi = 1.0;
    for (int it = 0; it < 6; ++it) {
        double mid = 0.5 * (lo + hi);
        auto trial = stc_switched_design(set_s1, sigma1, sigma2, std::nullopt, mid);
        if (trial.ok()) {
            best = trial;
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return best;
}

}  // namespace ddn::aperiodic
