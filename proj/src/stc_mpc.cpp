#include "ddn/stc_mpc.hpp"

namespace ddn::aperiodic {

namespace {

double inf_norm(const Mat& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

double matrix_norm(const Mat& m, NormTag tag) {
    if (tag == NormTag::Inf) return inf_norm(m);
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

void check_pd(const Mat& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0 || min_eigenvalue(m) <= 0.0)
        throw std::invalid_argument(std::string("stc: ") + what + " must be positive definite");
}

}  // namespace

void StcMpcConfig::validate_state(Eigen::Index state_dim) const {
    if (L < 2) throw std::invalid_argument("stc: horizon must be >= 2");
    if (lambda_g <= 0.0 || lambda_h <= 0.0)
        throw std::invalid_argument("stc: regularization weights must be > 0");
    if (v_bar < 0.0) throw std::invalid_argument("stc: noise bound must be >= 0");
    if (sigma <= 0.0 || sigma >= 1.0) throw std::invalid_argument("stc: sigma must be in (0,1)");
    check_pd(Q, "Q");
    if (Q.rows() != state_dim) throw std::invalid_argument("stc: Q dimension mismatch");
}

void StcMpcConfig::validate_output(Eigen::Index input_dim, Eigen::Index output_dim) const {
    if (L < 2) throw std::invalid_argument("stc: horizon must be >= 2");
    if (eta_obs < 1) throw std::invalid_argument("stc: observability index must be >= 1");
    if (lambda_g <= 0.0 || lambda_h <= 0.0)
        throw std::invalid_argument("stc: regularization weights must be > 0");
    if (v_bar < 0.0) throw std::invalid_argument("stc: noise bound must be >= 0");
    if (sigma <= 0.0 || sigma >= 1.0) throw std::invalid_argument("stc: sigma must be in (0,1)");
    check_pd(Q, "Q");
    check_pd(R, "R");
    check_pd(P, "P");
    if (Q.rows() != output_dim || R.rows() != input_dim)
        throw std::invalid_argument("stc: weight dimensions mismatch");
    const Eigen::Index n_xi = (input_dim + output_dim) * eta_obs;
    if (P.rows() != n_xi) throw std::invalid_argument("stc: P must act on the extended state");
    if (K_terminal.rows() != input_dim || K_terminal.cols() != n_xi)
        throw std::invalid_argument("stc: terminal gain shape mismatch");
    if (r <= 0.0) throw std::invalid_argument("stc: terminal radius must be > 0");
    if (eps > r) throw std::invalid_argument("stc: terminal tightening must satisfy eps <= r");
    double lo = (1.0 - min_eigenvalue(K_terminal.transpose() * R * K_terminal) / max_eigenvalue(P)) *
                r * r;
    if (eps * eps < lo - 1e-12)
        throw std::invalid_argument("stc: terminal tightening violates the lower bound");
}

StcStateSolution stc_mpc_state_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hz,
                                     const Vec& zeta, const Vec& u_held, const StcMpcConfig& cfg) {
    const Eigen::Index L = cfg.L;
    const Eigen::Index n = Hz.signal_dim;
    const Eigen::Index m = Hu.signal_dim;
    cfg.validate_state(n);
    if (Hu.depth != L || Hz.depth != L) throw std::invalid_argument("stc: Hankel depth must be L");
    if (Hu.columns() != Hz.columns()) throw std::invalid_argument("stc: Hankel column mismatch");
    if (zeta.size() != n || u_held.size() != m)
        throw std::invalid_argument("stc: state/input dimension mismatch");

    Mat stacked(Hu.matrix.rows() + Hz.matrix.rows(), Hu.columns());
    stacked.topRows(Hu.matrix.rows()) = Hu.matrix;
    stacked.bottomRows(Hz.matrix.rows()) = Hz.matrix;
    // Measured-state records reach rank m*L + n when noise-free; require the
    // behaviour span rather than full row rank.
    if (numerical_rank(stacked) < m * L + n)
        throw std::runtime_error("stc: stacked Hankel does not span the behaviour (insufficient excitation)");

    const Eigen::Index ng = Hu.columns();
    const bool slack = cfg.v_bar > 0.0;
    const Eigen::Index nh = slack ? n * L : 0;
    const Eigen::Index nz = n * L + ng + nh;
    const Eigen::Index off_x = 0, off_g = n * L, off_h = n * L + ng;

    qp::QpProblem p;
    p.H = Mat::Zero(nz, nz);
    p.f = Vec::Zero(nz);
    for (Eigen::Index i = 0; i < L; ++i)
        p.H.block(off_x + i * n, off_x + i * n, n, n) = 2.0 * cfg.Q;
    if (slack) {
        p.H.block(off_g, off_g, ng, ng) = 2.0 * cfg.lambda_g * cfg.v_bar * Mat::Identity(ng, ng);
        p.H.block(off_h, off_h, nh, nh) = 2.0 * (cfg.lambda_h / cfg.v_bar) * Mat::Identity(nh, nh);
    }

    // Rows: input Hankel equality, state Hankel equality, initial state pin.
    const Eigen::Index ne = m * L + n * L + n;
    p.Aeq = Mat::Zero(ne, nz);
    p.beq = Vec::Zero(ne);
    p.Aeq.block(0, off_g, m * L, ng) = Hu.matrix;
    for (Eigen::Index i = 0; i < L; ++i) p.beq.segment(i * m, m) = u_held;
    p.Aeq.block(m * L, off_g, n * L, ng) = Hz.matrix;
    p.Aeq.block(m * L, off_x, n * L, n * L) = -Mat::Identity(n * L, n * L);
    if (slack) p.Aeq.block(m * L, off_h, n * L, nh) = -Mat::Identity(nh, nh);
    p.Aeq.block(m * L + n * L, off_x, n, n) = Mat::Identity(n, n);
    p.beq.segment(m * L + n * L, n) = zeta;

    auto r = qp::solve(p);
    StcStateSolution sol;
    sol.status = r.status;
    if (!r.ok()) return sol;
    sol.x_pred = unvectorize(r.z.segment(off_x, n * L), n, L);
    sol.g = r.z.segment(off_g, ng);
    if (slack) sol.h = r.z.segment(off_h, nh);
    sol.cost = r.objective;
    return sol;
}

Eigen::Index stc_next_trigger_state(const StcStateSolution& sol, const Vec& zeta,
                                    const RhoOracle& rho, const StcMpcConfig& cfg) {
    if (!sol.ok()) throw std::invalid_argument("stc: triggering needs a solved prediction");
    const Eigen::Index L = cfg.L;
    const Eigen::Index n = sol.x_pred.rows();
    const double zeta_inf = zeta.cwiseAbs().maxCoeff();
    if (zeta_inf <= 1e-14) return L - 1;  // at rest, ride the full horizon

    const double g1 = sol.g.lpNorm<1>();
    const double h0 = sol.h.size() ? sol.h.segment(0, n).cwiseAbs().maxCoeff() : 0.0;
    Eigen::Index best = 0;
    for (Eigen::Index s = 1; s <= L - 1; ++s) {
        double dev = (sol.x_pred.col(s) - zeta).cwiseAbs().maxCoeff();
        double hs = sol.h.size() ? sol.h.segment(s * n, n).cwiseAbs().maxCoeff() : 0.0;
        double lhs = dev + hs + rho(s) * (cfg.v_bar + cfg.v_bar * g1 + h0) + cfg.v_bar * g1;
        if (lhs <= cfg.sigma * zeta_inf) best = s;
    }
    return std::max<Eigen::Index>(best, 1);
}

Vec build_extended_state(const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist) {
    if (u_hist.empty() || y_hist.empty())
        throw std::invalid_argument("extended state: histories must be nonempty");
    if (u_hist.size() != y_hist.size())
        throw std::invalid_argument("extended state: histories must have equal length");
    const Eigen::Index m = u_hist.front().size();
    const Eigen::Index pp = y_hist.front().size();
    const auto eta = static_cast<Eigen::Index>(u_hist.size());
    Vec xi(eta * (m + pp));
    for (Eigen::Index i = 0; i < eta; ++i) xi.segment(i * m, m) = u_hist[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < eta; ++i)
        xi.segment(eta * m + i * pp, pp) = y_hist[static_cast<std::size_t>(i)];
    return xi;
}

StcOutputSolution stc_mpc_output_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hy,
                                       const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist,
                                       const StcMpcConfig& cfg) {
    const Eigen::Index m = Hu.signal_dim;
    const Eigen::Index pdim = Hy.signal_dim;
    cfg.validate_output(m, pdim);
    const Eigen::Index L = cfg.L;
    const Eigen::Index eta = cfg.eta_obs;
    if (Hu.depth != L + eta || Hy.depth != L + eta)
        throw std::invalid_argument("stc: Hankel depth must be L + eta");
    if (static_cast<Eigen::Index>(u_hist.size()) != eta ||
        static_cast<Eigen::Index>(y_hist.size()) != eta)
        throw std::invalid_argument("stc: histories must have length eta");

    // Input excitation is the checkable part of the data requirement here;
    // a short record surfaces as an inconsistent equality system instead.
    if (!has_full_row_rank(Hu.matrix))
        throw std::runtime_error("stc: input Hankel is row-rank deficient (insufficient excitation)");

    const Eigen::Index nu = m * (L + eta);
    const Eigen::Index ny = pdim * (L + eta);
    const Eigen::Index ng = Hu.columns();
    const bool slack = cfg.v_bar > 0.0;
    const Eigen::Index nh = slack ? ny : 0;
    const Eigen::Index nz = nu + ny + ng + nh;
    const Eigen::Index off_u = 0, off_y = nu, off_g = nu + ny, off_h = nu + ny + ng;

    qp::QpProblem p;
    p.H = Mat::Zero(nz, nz);
    p.f = Vec::Zero(nz);
    for (Eigen::Index i = 0; i < L + eta; ++i) {
        p.H.block(off_u + i * m, off_u + i * m, m, m) = 2.0 * cfg.R;
        p.H.block(off_y + i * pdim, off_y + i * pdim, pdim, pdim) = 2.0 * cfg.Q;
    }
    if (slack) {
        p.H.block(off_g, off_g, ng, ng) = 2.0 * cfg.lambda_g * cfg.v_bar * Mat::Identity(ng, ng);
        p.H.block(off_h, off_h, nh, nh) = 2.0 * (cfg.lambda_h / cfg.v_bar) * Mat::Identity(nh, nh);
    }
    // Terminal cost ||xi_L||_P^2 on [u_{[L-eta,L-1]}; y_{[L-eta,L-1]}];
    // prediction index L - eta + i is stored at column block L + i.
    const Eigen::Index n_xi = (m + pdim) * eta;
    Mat Sxi = Mat::Zero(n_xi, nz);
    for (Eigen::Index i = 0; i < eta; ++i) {
        Sxi.block(i * m, off_u + (L + i) * m, m, m) = Mat::Identity(m, m);
        Sxi.block(eta * m + i * pdim, off_y + (L + i) * pdim, pdim, pdim) =
            Mat::Identity(pdim, pdim);
    }
    p.H += 2.0 * Sxi.transpose() * cfg.P * Sxi;

    // Equalities: Hankel consistency and the eta-long initialization window.
    const Eigen::Index ne = nu + ny + eta * (m + pdim);
    p.Aeq = Mat::Zero(ne, nz);
    p.beq = Vec::Zero(ne);
    p.Aeq.block(0, off_g, nu, ng) = Hu.matrix;
    p.Aeq.block(0, off_u, nu, nu) = -Mat::Identity(nu, nu);
    p.Aeq.block(nu, off_g, ny, ng) = Hy.matrix;
    p.Aeq.block(nu, off_y, ny, ny) = -Mat::Identity(ny, ny);
    if (slack) p.Aeq.block(nu, off_h, ny, nh) = -Mat::Identity(ny, ny);
    Eigen::Index row = nu + ny;
    for (Eigen::Index i = 0; i < eta; ++i) {
        p.Aeq.block(row, off_u + i * m, m, m) = Mat::Identity(m, m);
        p.beq.segment(row, m) = u_hist[static_cast<std::size_t>(i)];
        row += m;
    }
    for (Eigen::Index i = 0; i < eta; ++i) {
        p.Aeq.block(row, off_y + i * pdim, pdim, pdim) = Mat::Identity(pdim, pdim);
        p.beq.segment(row, pdim) = y_hist[static_cast<std::size_t>(i)];
        row += pdim;
    }

    // Input box over applied prediction steps 0..L-1.
    if (cfg.u_min.size() == m || cfg.u_max.size() == m) {
        const double inf = std::numeric_limits<double>::infinity();
        p.lb = Vec::Constant(nz, -inf);
        p.ub = Vec::Constant(nz, inf);
        for (Eigen::Index i = 0; i < L; ++i)
            for (Eigen::Index k = 0; k < m; ++k) {
                if (cfg.u_min.size() == m) p.lb(off_u + (eta + i) * m + k) = cfg.u_min(k);
                if (cfg.u_max.size() == m) p.ub(off_u + (eta + i) * m + k) = cfg.u_max(k);
            }
    }

    // Terminal ball ||xi_L||_P <= eps around the origin equilibrium.
    qp::QpProblem::Ball ball;
    ball.S = Sxi;
    ball.c = Vec::Zero(n_xi);
    ball.W = cfg.P;
    ball.r = cfg.eps;
    p.ball = ball;

    auto r = qp::solve(p);
    StcOutputSolution sol;
    sol.status = r.status;
    if (!r.ok()) return sol;
    sol.u_pred = unvectorize(r.z.segment(off_u, nu), m, L + eta);
    sol.y_pred = unvectorize(r.z.segment(off_y, ny), pdim, L + eta);
    sol.g = r.z.segment(off_g, ng);
    if (slack) sol.h = r.z.segment(off_h, nh);
    sol.xi_L = Sxi * r.z;
    sol.cost = r.objective;
    return sol;
}

Eigen::Index stc_next_trigger_output(const StcOutputSolution& sol, const StcMpcConfig& cfg,
                                     const RhoOracle& rho) {
    if (!sol.ok()) throw std::invalid_argument("stc: triggering needs a solved prediction");
    const Eigen::Index L = cfg.L;
    const Eigen::Index eta = cfg.eta_obs;
    const Eigen::Index m = sol.u_pred.rows();
    const Eigen::Index pdim = sol.y_pred.rows();
    const double v = cfg.v_bar;
    const double lamP = max_eigenvalue(cfg.P);
    const double lamQ = max_eigenvalue(cfg.Q);
    const double lamRmin = min_eigenvalue(cfg.R);
    const double g1 = sol.g.lpNorm<1>();
    const double gsq = sol.g.squaredNorm();

    auto h_block = [&](Eigen::Index i) -> Vec {  // prediction index i in [-eta, L-1]
        if (!sol.h.size()) return Vec::Zero(pdim);
        return sol.h.segment((i + eta) * pdim, pdim);
    };
    auto h_window = [&](Eigen::Index from, Eigen::Index to) -> double {  // 2-norm over blocks
        double acc = 0.0;
        for (Eigen::Index i = from; i <= to; ++i) acc += h_block(i).squaredNorm();
        return std::sqrt(acc);
    };
    auto xi_at = [&](Eigen::Index s) -> Vec {  // [u_{[s-eta,s-1]}; y_{[s-eta,s-1]}]
        Vec xi((m + pdim) * eta);
        for (Eigen::Index i = 0; i < eta; ++i) {
            xi.segment(i * m, m) = sol.u_pred.col(s - eta + i + eta);
            xi.segment(eta * m + i * pdim, pdim) = sol.y_pred.col(s - eta + i + eta);
        }
        return xi;
    };

    const double h_init = h_window(-eta, -1);

    // s_hat: predicted extended state stays inside the terminal margin.
    Eigen::Index s_hat = 0;
    for (Eigen::Index s = 1; s <= L - 1; ++s) {
        double rho_sum = 0.0;
        for (Eigen::Index i = s; i <= s + eta - 1; ++i) rho_sum += rho(i);
        double lhs = (std::sqrt(static_cast<double>(eta)) * v + h_init) * std::sqrt(rho_sum) +
                     h_window(s - eta, s - 1);
        double rhs = cfg.r / lamP - xi_at(s).norm();
        if (lhs <= rhs)
            s_hat = s;
        else
            break;
    }

    // s_check: accumulated cost-degradation bound against the tracked decay.
    Eigen::Index s_check = 0;
    for (Eigen::Index s = 1; s <= L - 1; ++s) {
        double hsq_prefix = 0.0;
        for (Eigen::Index i = 0; i <= s - 1; ++i) hsq_prefix += h_block(i).squaredNorm();
        double rho_win = 0.0;
        for (Eigen::Index i = s; i <= s + eta - 1; ++i) rho_win += rho(i);
        double rho_prefix = 0.0;
        for (Eigen::Index i = 0; i <= s - 1; ++i) rho_prefix += rho(i + eta);
        double hs_inf = h_block(s).cwiseAbs().maxCoeff();
        double h_win_inf = 0.0;
        for (Eigen::Index i = s - eta; i <= s - 1; ++i)
            h_win_inf = std::max(h_win_inf, h_block(i).cwiseAbs().maxCoeff());
        double hsq_total = sol.h.size() ? sol.h.squaredNorm() : 0.0;

        double lhs = 2.0 * lamQ * hsq_prefix;
        if (v > 0.0) lhs += cfg.lambda_h * (static_cast<double>(eta) * v - hsq_total / v);
        lhs += std::sqrt(lamP) * (cfg.r + cfg.eps) *
               ((v * g1 + hs_inf) * rho_win + v * g1 + h_win_inf);
        lhs += cfg.lambda_g * v *
               (cfg.h_uxi_pinv_norm * cfg.h_uxi_pinv_norm * (2.0 + lamP / lamRmin) * cfg.r * cfg.r -
                gsq);
        lhs += lamQ * (2.0 * static_cast<double>(eta) * v * v + 2.0 * h_init * h_init) * rho_prefix;

        double rhs = 0.0;
        for (Eigen::Index i = 0; i <= s - 1; ++i) rhs += xi_at(i).squaredNorm();
        rhs *= cfg.sigma;
        if (lhs <= rhs)
            s_check = s;
        else
            break;
    }

    Eigen::Index s_k = std::min({s_hat, s_check, L - 1});
    return std::max<Eigen::Index>(s_k, 1);
}

double hankel_uxi_pinv_norm(const Mat& u_cols, const Mat& y_cols, Eigen::Index L,
                            Eigen::Index eta) {
    if (u_cols.cols() != y_cols.cols()) throw std::invalid_argument("stc: data length mismatch");
    const Eigen::Index T = u_cols.cols();
    const Eigen::Index m = u_cols.rows();
    const Eigen::Index pdim = y_cols.rows();
    if (T < L + eta) throw std::invalid_argument("stc: data too short");

    // Pair each extended-state sample xi(t), t = eta .. T-L, with the input
    // window u(t .. t+L-1); stacking xi inside the past input window instead
    // would duplicate rows and could never admit a right inverse.
    const Eigen::Index cols = T - L - eta + 1;
    Mat H(m * L + (m + pdim) * eta, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Index t = eta + c;
        for (Eigen::Index i = 0; i < L; ++i) H.block(i * m, c, m, 1) = u_cols.col(t + i);
        for (Eigen::Index i = 0; i < eta; ++i) {
            H.block(m * L + i * m, c, m, 1) = u_cols.col(t - eta + i);
            H.block(m * L + eta * m + i * pdim, c, pdim, 1) = y_cols.col(t - eta + i);
        }
    }
    Eigen::JacobiSVD<Mat> svd(H);
    const auto& s = svd.singularValues();
    double smin = s(s.size() - 1);
    if (smin <= 1e-12 * std::max(1.0, s(0)))
        throw std::runtime_error("stc: H_{u xi} has no right inverse (insufficient excitation)");
    return 1.0 / smin;
}

double rho_overapprox(const std::vector<Mat>& a_members, Eigen::Index s, NormTag norm) {
    if (s < 1) throw std::out_of_range("rho: lift power must be >= 1");
    if (a_members.empty()) throw std::invalid_argument("rho: empty member set");
    double worst = 0.0;
    for (const auto& a : a_members) {
        Mat power = Mat::Identity(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < s; ++i) power = power * a;
        worst = std::max(worst, matrix_norm(power, norm));
    }
    return 1.05 * worst;
}

double rho_overapprox(const data::QmiConsistencySet& set, Eigen::Index s, NormTag norm,
                      int samples, std::uint64_t seed) {
    if (s < 1) throw std::out_of_range("rho: lift power must be >= 1");
    std::vector<Mat> members;
    for (const auto& ab : set.sample_members(samples, seed))
        members.push_back(ab.leftCols(set.n()));
    return rho_overapprox(members, s, norm);
}

bool check_terminal_ingredients(const StcMpcConfig& cfg,
                                const std::vector<std::pair<Mat, Mat>>& sampled_AB,
                                const Mat& C_ext, const Mat& D_ext, int boundary_samples,
                                std::uint64_t seed) {
    const Eigen::Index n_xi = cfg.P.rows();
    Eigen::SelfAdjointEigenSolver<Mat> es(cfg.P);
    Mat P_inv_half = es.operatorInverseSqrt();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& [A_ext, B_ext] : sampled_AB) {
        for (int k = 0; k < boundary_samples; ++k) {
            Vec dir(n_xi);
            for (Eigen::Index i = 0; i < n_xi; ++i) dir(i) = normal(rng);
            dir.normalize();
            Vec xi = cfg.r * (P_inv_half * dir);  // on the P-ball boundary
            Vec u = cfg.K_terminal * xi;
            Vec xi_next = A_ext * xi + B_ext * u;
            Vec y = C_ext * xi + D_ext * u;
            if (cfg.u_min.size() && ((u - cfg.u_min).minCoeff() < 0.0)) return false;
            if (cfg.u_max.size() && ((cfg.u_max - u).minCoeff() < 0.0)) return false;
            double vnext = xi_next.dot(cfg.P * xi_next);
            double vcur = xi.dot(cfg.P * xi);
            double decay = vcur - u.dot(cfg.R * u) - y.dot(cfg.Q * y);
            if (vnext > decay + 1e-9 * std::max(1.0, vcur)) return false;
            if (std::sqrt(vnext) > cfg.r * (1.0 + 1e-9)) return false;
        }
    }
    return true;
}

}  // namespace ddn::aperiodic
