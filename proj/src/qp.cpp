#include "ddn/qp.hpp"

#include <set>

namespace ddn::qp {

namespace {

struct KktOutcome {
    bool consistent = false;   // equality system solvable
    bool bounded = false;      // reduced problem bounded below
    Vec z;
    Vec grad;                  // H z + f, for multiplier signs
};

// Equality-constrained minimisation with minimum-norm tie-breaking via the
// nullspace method. `pins` adds rows e_i^T z = value.
KktOutcome solve_equality_qp(const Mat& H, const Vec& f, const Mat& Aeq, const Vec& beq,
                             const std::vector<std::pair<Eigen::Index, double>>& pins) {
    const Eigen::Index nz = f.size();
    const Eigen::Index n_eq = Aeq.rows() + static_cast<Eigen::Index>(pins.size());
    KktOutcome out;

    Mat A(n_eq, nz);
    Vec b(n_eq);
    if (Aeq.rows() > 0) {
        A.topRows(Aeq.rows()) = Aeq;
        b.head(Aeq.rows()) = beq;
    }
    for (std::size_t k = 0; k < pins.size(); ++k) {
        A.row(Aeq.rows() + static_cast<Eigen::Index>(k)).setZero();
        A(Aeq.rows() + static_cast<Eigen::Index>(k), pins[k].first) = 1.0;
        b(Aeq.rows() + static_cast<Eigen::Index>(k)) = pins[k].second;
    }

    Vec zp;
    Mat N;
    if (n_eq > 0) {
        Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV | Eigen::ComputeThinU);
        const auto& s = svd.singularValues();
        double smax = s.size() ? s(0) : 0.0;
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > 1e-12 * std::max(1.0, smax)) ++rank;
        Vec ub = svd.matrixU().transpose() * b;
        Vec si = Vec::Zero(s.size());
        for (Eigen::Index i = 0; i < rank; ++i) si(i) = ub(i) / s(i);
        zp = svd.matrixV().leftCols(s.size()) * si;
        if ((A * zp - b).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff()))
            return out;  // inconsistent
        N = svd.matrixV().rightCols(nz - rank);
    } else {
        zp = Vec::Zero(nz);
        N = Mat::Identity(nz, nz);
    }
    out.consistent = true;

    if (N.cols() == 0) {
        out.bounded = true;
        out.z = zp;
        out.grad = H * zp + f;
        return out;
    }

    Mat Hr = N.transpose() * H * N;
    Vec gr = N.transpose() * (H * zp + f);
    // Flat directions of the reduced Hessian (exact kernels of the cost on
    // the constraint manifold) must receive zero step; thresholding against
    // the full Hessian scale keeps round-off curvature out of the pivots.
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(Hr));
    const double h_scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    const double curve_tol = 1e-13 * h_scale;
    Vec y = Vec::Zero(N.cols());
    double dropped_grad = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double lam = es.eigenvalues()(i);
        double gi = es.eigenvectors().col(i).dot(gr);
        if (lam > curve_tol)
            y -= (gi / lam) * es.eigenvectors().col(i);
        else
            dropped_grad = std::max(dropped_grad, std::abs(gi));
    }
    // A gradient component along a flat direction means the cost is
    // unbounded below on the manifold.
    if (dropped_grad > 1e-7 * std::max(1.0, gr.cwiseAbs().maxCoeff())) return out;
    out.bounded = true;
    out.z = zp + N * y;
    out.grad = H * out.z + f;
    return out;
}

double objective_value(const QpProblem& p, const Vec& z) {
    return 0.5 * z.dot(p.H * z) + p.f.dot(z) + p.c0;
}

// Box handling: primal-dual active set around the equality core.
QpResult solve_boxed(const QpProblem& p, const Mat& H, const Vec& f) {
    const Eigen::Index nz = p.size();
    QpResult res;
    const bool has_box = p.lb.size() == nz || p.ub.size() == nz;
    const double inf = std::numeric_limits<double>::infinity();
    auto lb_at = [&](Eigen::Index i) { return p.lb.size() == nz ? p.lb(i) : -inf; };
    auto ub_at = [&](Eigen::Index i) { return p.ub.size() == nz ? p.ub(i) : inf; };

    std::set<Eigen::Index> act_lo, act_hi;
    std::vector<std::size_t> history;
    const double tol = 1e-10;

    for (int iter = 0; iter < 80; ++iter) {
        std::vector<std::pair<Eigen::Index, double>> pins;
        for (auto i : act_lo) pins.emplace_back(i, lb_at(i));
        for (auto i : act_hi) pins.emplace_back(i, ub_at(i));
        KktOutcome kkt = solve_equality_qp(H, f, p.Aeq, p.beq, pins);
        if (!kkt.consistent) {
            res.status = QpStatus::Infeasible;
            res.message = "equality system inconsistent";
            return res;
        }
        if (!kkt.bounded) {
            res.status = QpStatus::NumericalFailure;
            res.message = "cost unbounded on the equality manifold";
            return res;
        }
        if (!has_box) {
            res.status = QpStatus::Optimal;
            res.z = kkt.z;
            res.objective = objective_value(p, kkt.z);
            return res;
        }

        // Multipliers of the pinned rows decide which bounds stay active:
        // stationarity reads H z + f + A_eq^T nu + sum mu_k e_{i_k} = 0, and
        // an active lower bound requires mu <= 0, an active upper mu >= 0.
        const Eigen::Index n_con = p.Aeq.rows() + static_cast<Eigen::Index>(pins.size());
        Vec mult = Vec::Zero(n_con);
        if (n_con > 0) {
            Mat At(nz, n_con);
            if (p.Aeq.rows() > 0) At.leftCols(p.Aeq.rows()) = p.Aeq.transpose();
            for (std::size_t k = 0; k < pins.size(); ++k) {
                At.col(p.Aeq.rows() + static_cast<Eigen::Index>(k)).setZero();
                At(pins[k].first, p.Aeq.rows() + static_cast<Eigen::Index>(k)) = 1.0;
            }
            mult = At.completeOrthogonalDecomposition().solve(-kkt.grad);
        }
        double scale = std::max(1.0, kkt.grad.cwiseAbs().maxCoeff());
        std::set<Eigen::Index> next_lo, next_hi;
        std::size_t k = 0;
        for (auto i : act_lo) {
            double mu = mult(p.Aeq.rows() + static_cast<Eigen::Index>(k++));
            if (mu <= tol * scale) next_lo.insert(i);
        }
        for (auto i : act_hi) {
            double mu = mult(p.Aeq.rows() + static_cast<Eigen::Index>(k++));
            if (mu >= -tol * scale) next_hi.insert(i);
        }
        for (Eigen::Index i = 0; i < nz; ++i) {
            if (!act_lo.count(i) && kkt.z(i) < lb_at(i) - tol * scale) next_lo.insert(i);
            if (!act_hi.count(i) && kkt.z(i) > ub_at(i) + tol * scale) next_hi.insert(i);
        }
        if (next_lo == act_lo && next_hi == act_hi) {
            res.status = QpStatus::Optimal;
            res.z = kkt.z;
            for (auto i : act_lo) res.z(i) = lb_at(i);
            for (auto i : act_hi) res.z(i) = ub_at(i);
            res.objective = objective_value(p, res.z);
            return res;
        }
        // Cycle guard on the active-set fingerprint.
        std::size_t h = 1469598103934665603ull;
        for (auto i : next_lo) h = (h ^ static_cast<std::size_t>(i + 1)) * 1099511628211ull;
        for (auto i : next_hi) h = (h ^ static_cast<std::size_t>(nz + i + 1)) * 1099511628211ull;
        if (std::find(history.begin(), history.end(), h) != history.end()) {
            res.status = QpStatus::NumericalFailure;
            res.message = "active-set cycling";
            return res;
        }
        history.push_back(h);
        act_lo = std::move(next_lo);
        act_hi = std::move(next_hi);
    }
    res.status = QpStatus::NumericalFailure;
    res.message = "active-set iteration limit";
    return res;
}

}  // namespace

QpResult solve(const QpProblem& problem) {
    const Eigen::Index nz = problem.size();
    if (problem.H.rows() != nz || problem.H.cols() != nz)
        throw std::invalid_argument("qp: H size mismatch");
    if (problem.Aeq.rows() > 0 && problem.Aeq.cols() != nz)
        throw std::invalid_argument("qp: Aeq size mismatch");

    QpResult res = solve_boxed(problem, problem.H, problem.f);
    if (!problem.ball || res.status != QpStatus::Optimal) return res;

    const auto& ball = *problem.ball;
    auto ball_norm = [&](const Vec& z) {
        Vec d = ball.S * z - ball.c;
        return std::sqrt(std::max(0.0, d.dot(ball.W * d)));
    };
    if (ball_norm(res.z) <= ball.r * (1.0 + 1e-9) + 1e-12) return res;

    // Constraint active: search the multiplier of the quadratic constraint.
    Mat SWS = ball.S.transpose() * ball.W * ball.S;
    Vec SWc = ball.S.transpose() * ball.W * ball.c;
    auto solve_mu = [&](double mu) {
        Mat H = problem.H + 2.0 * mu * SWS;
        Vec f = problem.f - 2.0 * mu * SWc;
        return solve_boxed(problem, H, f);
    };

    double mu_lo = 0.0, mu_hi = 1.0;
    QpResult hi_res;
    for (int grow = 0; grow < 60; ++grow) {
        hi_res = solve_mu(mu_hi);
        if (hi_res.status != QpStatus::Optimal) return hi_res;
        if (ball_norm(hi_res.z) <= ball.r) break;
        mu_lo = mu_hi;
        mu_hi *= 4.0;
        if (mu_hi > 1e14) {
            hi_res.status = QpStatus::Infeasible;
            hi_res.message = "quadratic constraint unattainable";
            return hi_res;
        }
    }
    QpResult best = hi_res;
    double best_mu = mu_hi;
    for (int it = 0; it < 120; ++it) {
        double mu = 0.5 * (mu_lo + mu_hi);
        QpResult r = solve_mu(mu);
        if (r.status != QpStatus::Optimal) return r;
        double g = ball_norm(r.z) - ball.r;
        if (g > 0)
            mu_lo = mu;
        else {
            mu_hi = mu;
            best = r;
            best_mu = mu;
        }
        if (std::abs(g) <= 1e-11 * std::max(1.0, ball.r)) {
            best = r;
            best_mu = mu;
            break;
        }
    }
    best.objective = objective_value(problem, best.z);
    best.ball_multiplier = best_mu;
    return best;
}

}  // namespace ddn::qp
