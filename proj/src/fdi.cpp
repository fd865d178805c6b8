#include "ddn/fdi.hpp"

#include <algorithm>

namespace ddn::resilient {

std::vector<ChannelCombination> fdi_channel_combinations(Eigen::Index m) {
    if (m < 1) throw std::invalid_argument("fdi: need at least one actuator channel");
    if (m > 16) throw std::invalid_argument("fdi: channel count out of range");
    std::vector<std::vector<int>> subsets;
    for (std::size_t mask = 0; mask < (static_cast<std::size_t>(1) << m); ++mask) {
        std::vector<int> s;
        for (Eigen::Index c = 0; c < m; ++c)
            if ((mask >> c) & 1) s.push_back(static_cast<int>(c) + 1);
        subsets.push_back(std::move(s));
    }
    std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    std::vector<ChannelCombination> out;
    out.reserve(subsets.size());
    for (std::size_t j = 0; j < subsets.size(); ++j) {
        ChannelCombination cc;
        cc.index = static_cast<int>(j);
        cc.channels = subsets[j];
        cc.Da = Mat::Zero(m, m);
        for (int ch : cc.channels) cc.Da(ch - 1, ch - 1) = 1.0;
        out.push_back(std::move(cc));
    }
    return out;
}

FdiModel::FdiModel(Eigen::Index m_, Eigen::Index n_, double phi_, Eigen::Index kappa_,
                   Eigen::Index tau_, std::vector<Mat> gains_)
    : m(m_), n(n_), phi(phi_), kappa(kappa_), tau(tau_), combos(fdi_channel_combinations(m_)),
      gains(std::move(gains_)) {
    if (phi < 0.0) throw std::invalid_argument("fdi: power bound must be >= 0");
    if (tau < 2) throw std::invalid_argument("fdi: dwell parameter must be >= 2");
    if (kappa < 0) throw std::invalid_argument("fdi: chatter bound must be >= 0");
    if (gains.size() != combos.size())
        throw std::invalid_argument("fdi: one gain per channel combination required");
    for (std::size_t j = 0; j < combos.size(); ++j) {
        if (gains[j].rows() != m || gains[j].cols() != n)
            throw std::invalid_argument("fdi: gain shape mismatch");
        Eigen::JacobiSVD<Mat> svd(combos[j].Da * gains[j]);
        if (svd.singularValues().size() && svd.singularValues()(0) > phi + 1e-9)
            throw std::invalid_argument("fdi: attack power bound violated");
    }
}

FdiModel FdiModel::random(Eigen::Index m, Eigen::Index n, double phi, Eigen::Index kappa,
                          Eigen::Index tau, std::uint64_t seed) {
    auto combos = fdi_channel_combinations(m);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Mat> gains;
    gains.reserve(combos.size());
    for (const auto& cc : combos) {
        Mat K(m, n);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < n; ++j) K(i, j) = normal(rng);
        Mat DK = cc.Da * K;
        Eigen::JacobiSVD<Mat> svd(DK, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Vec s = svd.singularValues();
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), phi);
        // Clipped in the power ball; rows outside the combination are zero,
        // so the clipped product itself serves as the stored gain.
        gains.push_back(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
    }
    return FdiModel(m, n, phi, kappa, tau, std::move(gains));
}

Mat FdiModel::attack_matrix(int mode) const {
    return combos.at(static_cast<std::size_t>(mode)).Da * gains.at(static_cast<std::size_t>(mode));
}

bool fdi_switch_signal_check(const std::vector<int>& sigma, Eigen::Index kappa, Eigen::Index tau) {
    const auto len = static_cast<Eigen::Index>(sigma.size());
    std::vector<long> cs(static_cast<std::size_t>(len) + 1, 0);
    for (Eigen::Index t = 0; t < len; ++t) {
        int sw = (t > 0 && sigma[static_cast<std::size_t>(t)] != sigma[static_cast<std::size_t>(t) - 1]) ? 1 : 0;
        cs[static_cast<std::size_t>(t) + 1] = cs[static_cast<std::size_t>(t)] + sw;
    }
    for (Eigen::Index t1 = 0; t1 <= len; ++t1)
        for (Eigen::Index t2 = t1; t2 <= len; ++t2) {
            double cnt = static_cast<double>(cs[static_cast<std::size_t>(t2)] - cs[static_cast<std::size_t>(t1)]);
            if (cnt > static_cast<double>(kappa) + static_cast<double>(t2 - t1) / static_cast<double>(tau) + 1e-12)
                return false;
        }
    return true;
}

std::vector<int> fdi_switch_signal(const FdiModel& model, Eigen::Index length, std::uint64_t seed,
                                   double aggressiveness) {
    if (aggressiveness < 0.0 || aggressiveness > 1.0)
        throw std::invalid_argument("fdi: aggressiveness must be in [0,1]");
    Rng rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(model.mode_count()) - 1);
    std::vector<int> sigma(static_cast<std::size_t>(length), 0);
    std::vector<long> cs(static_cast<std::size_t>(length) + 1, 0);
    int cur = 0;
    for (Eigen::Index t = 0; t < length; ++t) {
        bool want = t > 0 && coin(rng) < aggressiveness;
        int next = cur;
        if (want) {
            int candidate = pick(rng);
            if (candidate != cur) {
                bool ok = true;
                for (Eigen::Index t1 = 0; t1 <= t && ok; ++t1) {
                    double cnt = static_cast<double>(cs[static_cast<std::size_t>(t)] - cs[static_cast<std::size_t>(t1)]) + 1.0;
                    double budget = static_cast<double>(model.kappa) +
                                    static_cast<double>(t + 1 - t1) / static_cast<double>(model.tau);
                    if (cnt > budget + 1e-12) ok = false;
                }
                if (ok) next = candidate;
            }
        }
        sigma[static_cast<std::size_t>(t)] = next;
        int sw = (t > 0 && next != cur) ? 1 : 0;
        cs[static_cast<std::size_t>(t) + 1] = cs[static_cast<std::size_t>(t)] + sw;
        cur = next;
    }
    return sigma;
}

bool MatrixEllipsoid::contains(const Mat& Z, double tol) const {
    if (Z.rows() != A.rows() || Z.cols() != C.rows())
        throw std::invalid_argument("ellipsoid: candidate shape mismatch");
    Mat form = Z.transpose() * A * Z + Z.transpose() * B + B.transpose() * Z + C;
    return max_eigenvalue(form) <= tol;
}

Mat MatrixEllipsoid::center() const { return -A.ldlt().solve(B); }

MatrixEllipsoid fdi_offline_healthy(const data::DataBatch& batch, double w_bar) {
    const Eigen::Index n = batch.n();
    const Eigen::Index m = batch.m();
    const Eigen::Index T = batch.T();
    Mat Phi(n + m, T);
    Phi.topRows(n) = batch.X;
    Phi.bottomRows(m) = batch.U;
    MatrixEllipsoid e;
    e.A = Phi * Phi.transpose();
    e.B = -Phi * batch.Xp.transpose();
    e.C = batch.Xp * batch.Xp.transpose() -
          static_cast<double>(T) * w_bar * w_bar * Mat::Identity(n, n);
    return e;
}

MatrixEllipsoid fdi_offline_set(const data::DataBatch& batch, double w_bar, double phi,
                                double b_norm_bound) {
    auto healthy = fdi_offline_healthy(batch, w_bar);
    const Eigen::Index nm = healthy.A.rows();
    if (!has_full_row_rank(healthy.A))
        throw std::runtime_error("fdi: data matrix Phi Phi^T is singular (insufficient excitation)");
    Mat A_inv = healthy.A.ldlt().solve(Mat::Identity(nm, nm));
    Mat Zc = -A_inv * healthy.B;
    Mat radius_sq = sym(healthy.B.transpose() * A_inv * healthy.B - healthy.C);
    double lo = min_eigenvalue(radius_sq);
    if (lo < -1e-9 * std::max(1.0, radius_sq.cwiseAbs().maxCoeff()))
        throw std::runtime_error("fdi: degenerate data, consistency set is empty");
    Eigen::SelfAdjointEigenSolver<Mat> es(radius_sq);
    double half_norm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    double phi1 = phi * b_norm_bound;
    double delta = half_norm / std::sqrt(min_eigenvalue(healthy.A)) + phi1;

    MatrixEllipsoid ball;
    ball.A = Mat::Identity(nm, nm);
    ball.B = -Zc;
    ball.C = Zc.transpose() * Zc - delta * delta * Mat::Identity(Zc.cols(), Zc.cols());
    return ball;
}

MatrixEllipsoid fdi_online_ellipsoid(const Vec& x_prev, const Vec& u_prev, const Vec& x_now,
                                     double w_bar) {
    const Eigen::Index n = x_prev.size();
    const Eigen::Index m = u_prev.size();
    Vec phi(n + m);
    phi.head(n) = x_prev;
    phi.tail(m) = u_prev;
    MatrixEllipsoid e;
    e.A = phi * phi.transpose();
    e.B = -phi * x_now.transpose();
    e.C = x_now * x_now.transpose() - w_bar * w_bar * Mat::Identity(n, n);
    return e;
}

FdiGainResult fdi_gain_sdp(const MatrixEllipsoid& online, const MatrixEllipsoid& offline_ball,
                           double eps_reg) {
    const Eigen::Index nm = online.A.rows();
    const Eigen::Index n = online.C.rows();
    const Eigen::Index m = nm - n;
    if (offline_ball.A.rows() != nm || offline_ball.C.rows() != n)
        throw std::invalid_argument("fdi: set dimension mismatch");

    lmi::SdpProblem prob;
    auto P = prob.symmetric(n, "P");
    auto Y = prob.rect(m, n, "Y");
    auto Lv = prob.symmetric(m, "L");
    auto Q = prob.symmetric(n, "Q");
    auto gamma = prob.scalar("gamma");
    auto beta = prob.scalar("beta");
    auto tau1 = prob.scalar("tau1");
    auto tau2 = prob.scalar("tau2");
    auto qn = prob.scalar("q_norm");

    const double delta = 1e-6;
    prob.require_psd(prob.expr(P), delta);
    prob.require_ge(prob.expr(beta), delta);
    prob.require_ge(prob.expr(tau1), 0.0);
    prob.require_ge(prob.expr(tau2), 0.0);

    auto Zx = [&](Eigen::Index r, Eigen::Index c) { return lmi::LinExpr::zero(r, c); };
    lmi::LinExpr Pe = prob.expr(P), Ye = prob.expr(Y);
    lmi::LinExpr big = lmi::block_matrix({
        {Pe - lmi::scale_by(prob.expr(beta), Mat::Identity(n, n)), Zx(n, n), Zx(n, m), Zx(n, n)},
        {Zx(n, n), -Pe, -Ye.transpose(), Zx(n, n)},
        {Zx(m, n), -Ye, Zx(m, m), Ye},
        {Zx(n, n), Zx(n, n), Ye.transpose(), Pe},
    });

    // S-procedure terms: + tau * [C, B'; B, A] (padded) per membership form,
    // so members make the subtracted quadratic nonpositive.
    auto pad_form = [&](const MatrixEllipsoid& e) {
        Mat M = Mat::Zero(3 * n + m, 3 * n + m);
        M.topLeftCorner(n, n) = e.C;
        M.block(0, n, n, n + m) = e.B.transpose();
        M.block(n, 0, n + m, n) = e.B;
        M.block(n, n, n + m, n + m) = e.A;
        return M;
    };
    big += lmi::scale_by(prob.expr(tau1), pad_form(online));
    big += lmi::scale_by(prob.expr(tau2), pad_form(offline_ball));
    prob.require_psd(big, 0.0, "stability");

    prob.require_psd(lmi::block_matrix({{prob.expr(Lv), Ye}, {Ye.transpose(), Pe}}));
    prob.require_psd(lmi::block_matrix({{prob.expr(Q), lmi::LinExpr(Mat::Identity(n, n))},
                                        {lmi::LinExpr(Mat::Identity(n, n)), Pe}}));
    // Spectral-norm epigraph for the regulariser.
    prob.require_psd(lmi::scale_by(prob.expr(qn), Mat::Identity(n, n)) - prob.expr(Q));
    prob.require_psd(lmi::scale_by(prob.expr(qn), Mat::Identity(n, n)) + prob.expr(Q));
    prob.require_ge(prob.expr(gamma) - lmi::trace_of(Pe) - lmi::trace_of(prob.expr(Lv)) -
                        eps_reg * prob.expr(qn),
                    0.0);
    prob.minimize(prob.expr(gamma));

    FdiGainResult out;
    auto sol = prob.solve_min();
    out.status = sol.status;
    out.message = sol.message;
    if (!sol.feasible()) return out;
    Mat Pv = prob.value(sol, P);
    out.K = prob.value(sol, Y) * Pv.inverse();
    out.gamma = sol.objective;
    out.certificate_residual = sol.worst_residual;
    return out;
}

FdiAttacker::FdiAttacker(FdiModel model, Eigen::Index horizon, std::uint64_t seed,
                         double aggressiveness)
    : model_(std::move(model)), sigma_(fdi_switch_signal(model_, horizon, seed, aggressiveness)) {
    if (!fdi_switch_signal_check(sigma_, model_.kappa, model_.tau))
        throw std::logic_error("fdi: generated schedule violates the dwell budget");
}

Vec FdiAttacker::inject(Eigen::Index t, const Vec& x_p) const {
    return model_.attack_matrix(mode_at(t)) * x_p;
}

FdiOnlineController::FdiOnlineController(MatrixEllipsoid offline_ball, double w_bar,
                                         Eigen::Index n, Eigen::Index m, double eps_reg)
    : offline_(std::move(offline_ball)), w_bar_(w_bar), eps_reg_(eps_reg),
      K_(Mat::Zero(m, n)), x_prev_(Vec::Zero(n)), u_prev_(Vec::Zero(m)) {}

Vec FdiOnlineController::step(Eigen::Index t, const Vec& x_p) {
    if (t > 0 && primed_) {
        online_ = fdi_online_ellipsoid(x_prev_, u_prev_, x_p, w_bar_);
        auto res = fdi_gain_sdp(online_, offline_, eps_reg_);
        last_status_ = res.status;
        if (res.ok()) K_ = res.K;  // otherwise hold the previous gain
    }
    Vec u = K_ * x_p;
    x_prev_ = x_p;
    u_prev_ = u;
    primed_ = true;
    return u;
}

}  // namespace ddn::resilient
