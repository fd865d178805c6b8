#include "ddn/dist_stc.hpp"

#include "ddn/switched_stc.hpp"

#include <optional>

namespace ddn::dist {

namespace {

Vec held_error_direction(const data::LiftedDataSet& set, const Vec& eps, const Vec& z,
                         const Mat& K) {
    Vec xi(set.n + set.lifted_input_dim());
    xi.head(set.n) = eps;
    for (Eigen::Index i = 0; i < set.s; ++i) xi.segment(set.n + i * set.m, set.m) = K * z;
    return xi;
}

}  // namespace

bool dist_trigger_certified(const data::LiftedDataSet& set, const Vec& eps, const Vec& z,
                            const Mat& K, const Mat& phi, double sigma, double m_slack,
                            double tol) {
    const Eigen::Index n = set.n;
    if (eps.size() != n || z.size() != n) throw std::invalid_argument("dist: dimension mismatch");
    if (K.rows() != set.m || K.cols() != n) throw std::invalid_argument("dist: gain shape mismatch");
    Vec xi = held_error_direction(set, eps, z, K);
    // e' phi e <= sigma z' phi z at the jump, with a relative margin.
    Mat M11 = -phi;
    Vec m12 = phi * eps;
    double c0 = -eps.dot(phi * eps) + sigma * z.dot(phi * z) - m_slack * xi.squaredNorm();
    return aperiodic::sts_member_certificate(set, xi, M11, m12, c0, tol);
}

Eigen::Index dist_sts_evaluate(const std::vector<data::LiftedDataSet>& family, const Vec& eps,
                               const Vec& z, const Mat& K, const Mat& phi, double sigma,
                               double m_slack, double tol, const Mat* lyapunov, double decay) {
    if (family.empty()) throw std::invalid_argument("dist: empty lifted family");
    if (phi.rows() != phi.cols() || min_eigenvalue(phi) <= 0.0)
        throw std::invalid_argument("dist: triggering matrix must be positive definite");
    Eigen::Index best = 0;
    double mu = 1.0;
    for (const auto& set : family) {
        if (!dist_trigger_certified(set, eps, z, K, phi, sigma, m_slack, tol)) break;
        if (lyapunov) {
            mu *= decay;
            Vec xi = held_error_direction(set, eps, z, K);
            if (!aperiodic::sts_member_certificate(set, xi, -*lyapunov, Vec::Zero(set.n),
                                                   mu * eps.dot(*lyapunov * eps), tol))
                break;
        }
        best = set.s;
    }
    return std::max<Eigen::Index>(best, 1);
}

namespace {

DistStcDesign dist_stc_design_fixed(const std::vector<data::LiftedDataSet>& agent_sets,
                                    const CommGraph& graph, double sigma, double eps_scalar,
                                    double decay) {
    DistStcDesign out;
    if (!graph.spanning_tree) throw std::invalid_argument("dist: graph needs a spanning tree");
    const auto N = graph.followers();
    if (static_cast<Eigen::Index>(agent_sets.size()) != N)
        throw std::invalid_argument("dist: one depth-1 set per follower required");
    for (const auto& s : agent_sets)
        if (s.s != 1) throw std::invalid_argument("dist: depth-1 sets required");
    const Eigen::Index n = agent_sets.front().n;
    const Eigen::Index m = agent_sets.front().m;
    if (sigma <= 0.0) throw std::invalid_argument("dist: sigma must be > 0");

    // Per-agent inner coordinates [eps(t); eps(t+1); eps(t_k)].
    auto selector = [&](int which) {
        Mat e = Mat::Zero(n, 3 * n);
        e.block(0, which * n, n, n) = Mat::Identity(n, n);
        return e;
    };
    Mat L1 = selector(0), L2 = selector(1), L3 = selector(2);
    Mat Rdesc = (L1 + eps_scalar * L2).transpose();  // 3n x n

    Mat BigL1 = kron(Mat::Identity(N, N), L1);
    Mat BigL2 = kron(Mat::Identity(N, N), L2);
    Mat BigL3 = kron(Mat::Identity(N, N), L3);
    Mat IN = Mat::Identity(N, N);
    Mat Lam2 = graph.lambda * graph.lambda;

    lmi::SdpProblem prob;
    auto P = prob.symmetric(n, "P");
    auto Phb = prob.symmetric(n, "Phi_bar");
    auto G = prob.rect(n, n, "G");
    auto KG = prob.rect(m, n, "K_G");
    auto beta = prob.scalar("beta");

    const double delta = 1e-6;
    prob.require_psd(prob.expr(P), delta);
    prob.require_psd(prob.expr(Phb), delta);
    prob.require_ge(prob.expr(beta), delta);

    lmi::LinExpr omega = BigL2.transpose() * kron_const(IN, prob.expr(P)) * BigL2 -
                         BigL1.transpose() * kron_const(IN, decay * prob.expr(P)) * BigL1;
    lmi::LinExpr psi =
        lmi::sym_sum(-kron_const(IN, Rdesc * (prob.expr(G) * L2))) +
        BigL3.transpose() * kron_const(Lam2, sigma * prob.expr(Phb)) * BigL3 -
        (BigL3 - BigL1).transpose() * kron_const(IN, prob.expr(Phb)) * (BigL3 - BigL1);
    lmi::LinExpr tmat = lmi::block_matrix({{kron_const(IN, prob.expr(G) * L1)},
                                           {kron_const(graph.lambda, prob.expr(KG) * L3)}});

    const Eigen::Index head = N * (n + m);
    const Eigen::Index inner = 3 * N * n;
    lmi::LinExpr big = lmi::block_matrix(
        {{lmi::LinExpr::zero(head, head), tmat}, {tmat.transpose(), omega + psi}});

    // Agent-i data certificate replicated over every agent slot, permuted to
    // the [x-rows | u-rows | inner] global ordering.
    Mat lift = Mat::Zero(n + m + 3 * n, 2 * n + m);
    lift.topLeftCorner(n + m, n + m) = Mat::Identity(n + m, n + m);
    lift.bottomRightCorner(3 * n, n) = Rdesc;
    for (Eigen::Index i = 0; i < N; ++i) {
        Mat theta_tilde = lift * sym(agent_sets[static_cast<std::size_t>(i)].theta) * lift.transpose();
        Mat data_term = Mat::Zero(head + inner, head + inner);
        for (Eigen::Index k = 0; k < N; ++k) {
            Mat embed = Mat::Zero(head + inner, n + m + 3 * n);
            embed.block(k * n, 0, n, n) = Mat::Identity(n, n);
            embed.block(N * n + k * m, n, m, m) = Mat::Identity(m, m);
            embed.block(head + k * 3 * n, n + m, 3 * n, 3 * n) = Mat::Identity(3 * n, 3 * n);
            data_term += embed * theta_tilde * embed.transpose();
        }
        prob.require_nsd(big + lmi::scale_by(prob.expr(beta), data_term), delta,
                         "agent " + std::to_string(i));
    }

    auto sol = prob.solve_feasibility();
    out.status = sol.status;
    out.message = sol.message;
    if (!sol.feasible()) return out;

    Mat Gv = prob.value(sol, G);
    Eigen::JacobiSVD<Mat> svd(Gv);
    if (svd.singularValues()(svd.singularValues().size() - 1) < 1e-8) {
        out.status = lmi::SdpStatus::NumericalFailure;
        out.message = "design returned a singular G";
        return out;
    }
    Mat G_inv = Gv.inverse();
    out.K = prob.value(sol, KG) * G_inv;
    out.phi = sym(G_inv.transpose() * prob.value(sol, Phb) * G_inv);
    out.lyapunov = sym(G_inv.transpose() * prob.value(sol, P) * G_inv);
    out.decay = decay;
    out.beta = prob.scalar_value(sol, beta);
    return out;
}

DistStcDesign dist_design_grid(const std::vector<data::LiftedDataSet>& agent_sets,
                               const CommGraph& graph, double sigma,
                               std::optional<double> eps_scalar, double decay) {
    std::vector<double> grid;
    if (eps_scalar)
        grid.push_back(*eps_scalar);
    else
        grid = {1.0, 2.0, -2.0, 5.0, -5.0, 0.5, 10.0};
    DistStcDesign out;
    for (double e : grid) {
        DistStcDesign trial = dist_stc_design_fixed(agent_sets, graph, sigma, e, decay);
        if (trial.ok()) return trial;
        if (!out.ok()) out = trial;
    }
    return out;
}

}  // namespace

DistStcDesign dist_stc_design(const std::vector<data::LiftedDataSet>& agent_sets,
                              const CommGraph& graph, double sigma,
                              std::optional<double> eps_scalar) {
    DistStcDesign best = dist_design_grid(agent_sets, graph, sigma, eps_scalar, 1.0);
    if (!best.ok()) return best;
    double lo = 0.5, hi = 1.0;
    for (int it = 0; it < 5; ++it) {
        double mid = 0.5 * (lo + hi);
        auto trial = dist_design_grid(agent_sets, graph, sigma, eps_scalar, mid);
        if (trial.ok()) {
            best = trial;
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return best;
}

}  // namespace ddn::dist
