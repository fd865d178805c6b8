#pragma once

#include "ddn/lmi.hpp"
#include "ddn/qp.hpp"
#include "ddn/trajectory.hpp"

#include <random>

namespace ddn::testing {

// ---------------------------------------------------------------------------
// Random systems and records

inline Mat random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
    return m;
}

/// Random controllable pair with spectral radius scaled to `rho`.
inline std::pair<Mat, Mat> random_controllable(Rng& rng, Eigen::Index n, Eigen::Index m,
                                               double rho = 1.1) {
    for (;;) {
        Mat A = random_matrix(rng, n, n);
        double r = lmi::spectral_radius(A);
        if (r > 1e-6) A *= rho / r;
        Mat B = random_matrix(rng, n, m);
        // Controllability via the rank of [B AB ... A^{n-1}B].
        Mat ctrb(n, n * m);
        Mat pw = Mat::Identity(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            ctrb.middleCols(k * m, m) = pw * B;
            pw = A * pw;
        }
        if (numerical_rank(ctrb) == n) return {A, B};
    }
}

struct RecordOptions {
    Eigen::Index T = 30;
    double excitation = 1.0;
    double w_bar = 0.0;       // 2-norm pointwise process noise bound
    double damping = 0.0;     // u -= damping * B^T x
    bool inf_ball_noise = false;
};

inline data::Trajectory rollout(const Mat& A, const Mat& B, Rng& rng, const RecordOptions& opt,
                                const Mat* Bw = nullptr, const Mat* C = nullptr,
                                double v_bar = 0.0) {
    data::Trajectory tr;
    Vec x = Vec::Zero(A.rows());
    Mat Bw_eff = Bw ? *Bw : Mat(Mat::Identity(A.rows(), A.rows()));
    for (Eigen::Index t = 0; t < opt.T; ++t) {
        Vec u = uniform_ball_inf(rng, B.cols(), opt.excitation);
        if (opt.damping > 0.0) u -= opt.damping * (B.transpose() * x);
        Vec w = Vec::Zero(Bw_eff.cols());
        if (opt.w_bar > 0.0)
            w = opt.inf_ball_noise ? uniform_ball_inf(rng, Bw_eff.cols(), opt.w_bar)
                                   : uniform_ball_2(rng, Bw_eff.cols(), opt.w_bar);
        tr.u.push_back(u);
        tr.x.push_back(x);
        if (C) {
            Vec v = v_bar > 0.0 ? uniform_ball_2(rng, C->rows(), v_bar) : Vec(Vec::Zero(C->rows()));
            tr.y.push_back(*C * x + v);
        }
        x = A * x + B * u + Bw_eff * w;
    }
    tr.x.push_back(x);
    return tr;
}

// ---------------------------------------------------------------------------
// Independent QP oracles

/// Equality-constrained stationary point via one dense KKT factorisation,
/// minimum-norm in both the multiplier and the primal kernel directions.
inline Vec kkt_oracle(const Mat& H, const Vec& f, const Mat& A, const Vec& b) {
    const Eigen::Index n = f.size(), me = A.rows();
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, me) = A.transpose();
    K.bottomLeftCorner(me, n) = A;
    Vec rhs(n + me);
    rhs.head(n) = -f;
    rhs.tail(me) = b;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(K);
    cod.setThreshold(1e-12);
    Vec zl = cod.solve(rhs);
    return zl.head(n);
}

/// Exhaustive active-set enumeration for boxed QPs (exact for convex
/// problems of this size). Returns the best feasible stationary point.
inline std::optional<Vec> enumeration_oracle(const qp::QpProblem& p) {
    const Eigen::Index n = p.size();
    std::vector<Eigen::Index> boxed;
    const double inf = std::numeric_limits<double>::infinity();
    auto lb = [&](Eigen::Index i) { return p.lb.size() == n ? p.lb(i) : -inf; };
    auto ub = [&](Eigen::Index i) { return p.ub.size() == n ? p.ub(i) : inf; };
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::isfinite(lb(i)) || std::isfinite(ub(i))) boxed.push_back(i);
    if (boxed.size() > 16) throw std::invalid_argument("oracle: too many boxes to enumerate");

    double best = std::numeric_limits<double>::infinity();
    std::optional<Vec> best_z;
    const std::size_t combos = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(boxed.size())));
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        Mat A = p.Aeq;
        Vec b = p.beq;
        bool valid = true;
        for (auto i : boxed) {
            int state = static_cast<int>(c % 3);
            c /= 3;
            if (state == 0) continue;
            double bound = state == 1 ? lb(i) : ub(i);
            if (!std::isfinite(bound)) {
                valid = false;
                break;
            }
            A.conservativeResize(A.rows() + 1, n);
            A.row(A.rows() - 1).setZero();
            A(A.rows() - 1, i) = 1.0;
            b.conservativeResize(b.size() + 1);
            b(b.size() - 1) = bound;
        }
        if (!valid) continue;
        Vec z = kkt_oracle(p.H, p.f, A, b);
        if ((A * z - b).cwiseAbs().maxCoeff() > 1e-7) continue;
        bool feas = true;
        for (auto i : boxed)
            if (z(i) < lb(i) - 1e-8 || z(i) > ub(i) + 1e-8) feas = false;
        if (!feas) continue;
        double val = 0.5 * z.dot(p.H * z) + p.f.dot(z) + p.c0;
        if (val < best - 1e-12) {
            best = val;
            best_z = z;
        }
    }
    return best_z;
}

/// Ball-constrained reference: dense multiplier sweep with golden refinement
/// on the constraint residual, fully independent of the production path.
inline Vec ball_oracle(const qp::QpProblem& p, int grid = 200) {
    if (!p.ball) throw std::invalid_argument("oracle: no ball");
    auto solve_free = [&](double mu) {
        Mat H = p.H + 2.0 * mu * (p.ball->S.transpose() * p.ball->W * p.ball->S);
        Vec f = p.f - 2.0 * mu * (p.ball->S.transpose() * p.ball->W * p.ball->c);
        return kkt_oracle(H, f, p.Aeq, p.beq);
    };
    auto viol = [&](const Vec& z) {
        Vec d = p.ball->S * z - p.ball->c;
        return std::sqrt(std::max(0.0, d.dot(p.ball->W * d))) - p.ball->r;
    };
    Vec z0 = solve_free(0.0);
    if (viol(z0) <= 1e-12) return z0;
    double lo = 0.0, hi = 1.0;
    while (viol(solve_free(hi)) > 0 && hi < 1e13) {
        lo = hi;
        hi *= 3.0;
    }
    for (int i = 0; i < grid; ++i) {
        double mid = 0.5 * (lo + hi);
        if (viol(solve_free(mid)) > 0)
            lo = mid;
        else
            hi = mid;
    }
    return solve_free(hi);
}

inline double qp_objective(const qp::QpProblem& p, const Vec& z) {
    return 0.5 * z.dot(p.H * z) + p.f.dot(z) + p.c0;
}

}  // namespace ddn::testing
