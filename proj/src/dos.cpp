#include "ddn/dos.hpp"

namespace ddn::resilient {

DoSModel::DoSModel(double kf, double nf, double kd, double nd)
    : kappa_f(kf), nu_f(nf), kappa_d(kd), nu_d(nd) {
    if (kappa_f < 0.0 || kappa_d < 0.0) throw std::invalid_argument("dos: kappa must be >= 0");
    if (nu_f < 2.0) throw std::invalid_argument("dos: nu_f must be >= 2");
    if (nu_d < 1.0) throw std::invalid_argument("dos: nu_d must be >= 1");
}

std::vector<std::uint8_t> DoSTrace::onsets() const {
    std::vector<std::uint8_t> d(k.size(), 0);
    for (std::size_t t = 0; t < k.size(); ++t)
        d[t] = (k[t] == 1 && (t == 0 || k[t - 1] == 0)) ? 1 : 0;
    return d;
}

std::vector<Eigen::Index> DoSTrace::success_times() const {
    std::vector<Eigen::Index> s;
    for (std::size_t t = 0; t < k.size(); ++t)
        if (k[t] == 0) s.push_back(static_cast<Eigen::Index>(t));
    return s;
}

Eigen::Index DoSTrace::max_success_gap() const {
    auto s = success_times();
    if (s.empty()) return static_cast<Eigen::Index>(k.size());
    Eigen::Index gap = s.front() + 1;  // s_0 happens gap-1 steps in
    for (std::size_t i = 1; i < s.size(); ++i) gap = std::max(gap, s[i] - s[i - 1]);
    return gap;
}

bool dos_trace_check(const DoSTrace& trace, const DoSModel& model) {
    const auto len = static_cast<Eigen::Index>(trace.k.size());
    auto d = trace.onsets();
    std::vector<long> ck(static_cast<std::size_t>(len) + 1, 0), cd(static_cast<std::size_t>(len) + 1, 0);
    for (Eigen::Index t = 0; t < len; ++t) {
        ck[static_cast<std::size_t>(t) + 1] = ck[static_cast<std::size_t>(t)] + trace.k[static_cast<std::size_t>(t)];
        cd[static_cast<std::size_t>(t) + 1] = cd[static_cast<std::size_t>(t)] + d[static_cast<std::size_t>(t)];
    }
    for (Eigen::Index t1 = 0; t1 <= len; ++t1)
        for (Eigen::Index t2 = t1; t2 <= len; ++t2) {
            double span = static_cast<double>(t2 - t1);
            double dur = static_cast<double>(ck[static_cast<std::size_t>(t2)] - ck[static_cast<std::size_t>(t1)]);
            double fre = static_cast<double>(cd[static_cast<std::size_t>(t2)] - cd[static_cast<std::size_t>(t1)]);
            if (dur > model.kappa_d + span / model.nu_d + 1e-12) return false;
            if (fre > model.kappa_f + span / model.nu_f + 1e-12) return false;
        }
    return true;
}

double dos_max_gap_bound(const DoSModel& model) {
    if (!model.resilient())
        throw std::domain_error("dos: resilience requires 1/nu_f + 1/nu_d < 1");
    return (model.kappa_d + model.kappa_f) / (1.0 - 1.0 / model.nu_d - 1.0 / model.nu_f) + 1.0;
}

DoSTrace dos_trace_generate(const DoSModel& model, Eigen::Index length, std::uint64_t seed,
                            double aggressiveness) {
    if (aggressiveness < 0.0 || aggressiveness > 1.0)
        throw std::invalid_argument("dos: aggressiveness must be in [0,1]");
    DoSTrace trace;
    trace.k.assign(static_cast<std::size_t>(length), 0);
    if (aggressiveness == 0.0) return trace;

    Rng rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<long> ck(static_cast<std::size_t>(length) + 1, 0), cd(static_cast<std::size_t>(length) + 1, 0);
    for (Eigen::Index t = 0; t < length; ++t) {
        bool want = aggressiveness >= 1.0 || coin(rng) < aggressiveness;
        bool ok = want;
        if (want) {
            // Attacking at t adds one to every duration window ending past t
            // and possibly one onset; only windows ending at t+1 can break.
            int onset = (t == 0 || trace.k[static_cast<std::size_t>(t) - 1] == 0) ? 1 : 0;
            for (Eigen::Index t1 = 0; t1 <= t && ok; ++t1) {
                double span = static_cast<double>(t + 1 - t1);
                double dur = static_cast<double>(ck[static_cast<std::size_t>(t)] - ck[static_cast<std::size_t>(t1)]) + 1.0;
                double fre = static_cast<double>(cd[static_cast<std::size_t>(t)] - cd[static_cast<std::size_t>(t1)]) + onset;
                if (dur > model.kappa_d + span / model.nu_d + 1e-12) ok = false;
                if (fre > model.kappa_f + span / model.nu_f + 1e-12) ok = false;
            }
        }
        if (ok) trace.k[static_cast<std::size_t>(t)] = 1;
        int onset = trace.k[static_cast<std::size_t>(t)] == 1 &&
                            (t == 0 || trace.k[static_cast<std::size_t>(t) - 1] == 0)
                        ? 1
                        : 0;
        ck[static_cast<std::size_t>(t) + 1] = ck[static_cast<std::size_t>(t)] + trace.k[static_cast<std::size_t>(t)];
        cd[static_cast<std::size_t>(t) + 1] = cd[static_cast<std::size_t>(t)] + onset;
    }
    return trace;
}

namespace {

DosMpcSolution solve_plan(const data::HankelMatrix& Hu, const data::HankelMatrix& Hx,
                          const std::vector<Vec>& u_init, const std::vector<Vec>& x_init,
                          Eigen::Index terminal_len, double w_bar, const DosMpcWeights& weights) {
    const Eigen::Index depth = Hu.depth;
    const Eigen::Index m = Hu.signal_dim;
    const Eigen::Index n = Hx.signal_dim;
    const auto eta = static_cast<Eigen::Index>(u_init.size());
    const Eigen::Index L = depth - eta;

    Mat stacked(Hu.matrix.rows() + Hx.matrix.rows(), Hu.columns());
    stacked.topRows(Hu.matrix.rows()) = Hu.matrix;
    stacked.bottomRows(Hx.matrix.rows()) = Hx.matrix;
    // Noise-free records cap the stacked rank at the behaviour dimension
    // m*depth + n, so that is the data-sufficiency threshold.
    if (numerical_rank(stacked) < m * depth + n)
        throw std::runtime_error("dos: stacked Hankel does not span the behaviour (insufficient excitation)");

    const Eigen::Index nu = m * depth, nx = n * depth, ng = Hu.columns();
    const bool slack = w_bar > 0.0;
    const Eigen::Index nh = slack ? nx : 0;
    const Eigen::Index nz = nu + nx + ng + nh;
    const Eigen::Index off_u = 0, off_x = nu, off_g = nu + nx, off_h = nu + nx + ng;

    qp::QpProblem p;
    p.H = Mat::Zero(nz, nz);
    p.f = Vec::Zero(nz);
    for (Eigen::Index i = eta; i < depth; ++i) {
        p.H.block(off_u + i * m, off_u + i * m, m, m) = 2.0 * weights.R1;
        p.H.block(off_x + i * n, off_x + i * n, n, n) = 2.0 * weights.R2;
    }
    if (slack) {
        p.H.block(off_g, off_g, ng, ng) = 2.0 * weights.lambda_g * w_bar * Mat::Identity(ng, ng);
        p.H.block(off_h, off_h, nh, nh) = 2.0 * (weights.lambda_h / w_bar) * Mat::Identity(nh, nh);
    }

    const Eigen::Index ne = nu + nx + eta * (m + n) + terminal_len * (m + n);
    p.Aeq = Mat::Zero(ne, nz);
    p.beq = Vec::Zero(ne);
    p.Aeq.block(0, off_g, nu, ng) = Hu.matrix;
    p.Aeq.block(0, off_u, nu, nu) = -Mat::Identity(nu, nu);
    p.Aeq.block(nu, off_g, nx, ng) = Hx.matrix;
    p.Aeq.block(nu, off_x, nx, nx) = -Mat::Identity(nx, nx);
    if (slack) p.Aeq.block(nu, off_h, nx, nh) = -Mat::Identity(nx, nx);
    Eigen::Index row = nu + nx;
    for (Eigen::Index i = 0; i < eta; ++i) {
        p.Aeq.block(row, off_u + i * m, m, m) = Mat::Identity(m, m);
        p.beq.segment(row, m) = u_init[static_cast<std::size_t>(i)];
        row += m;
        p.Aeq.block(row, off_x + i * n, n, n) = Mat::Identity(n, n);
        p.beq.segment(row, n) = x_init[static_cast<std::size_t>(i)];
        row += n;
    }
    for (Eigen::Index j = 0; j < terminal_len; ++j) {
        Eigen::Index col = depth - terminal_len + j;
        p.Aeq.block(row, off_u + col * m, m, m) = Mat::Identity(m, m);
        row += m;
        p.Aeq.block(row, off_x + col * n, n, n) = Mat::Identity(n, n);
        row += n;
    }

    if (weights.u_min.size() == m || weights.u_max.size() == m) {
        const double inf = std::numeric_limits<double>::infinity();
        p.lb = Vec::Constant(nz, -inf);
        p.ub = Vec::Constant(nz, inf);
        for (Eigen::Index i = 0; i < L; ++i)
            for (Eigen::Index kk = 0; kk < m; ++kk) {
                if (weights.u_min.size() == m) p.lb(off_u + (eta + i) * m + kk) = weights.u_min(kk);
                if (weights.u_max.size() == m) p.ub(off_u + (eta + i) * m + kk) = weights.u_max(kk);
            }
    }

    auto r = qp::solve(p);
    DosMpcSolution sol;
    sol.status = r.status;
    if (!r.ok()) return sol;
    sol.u_plan = unvectorize(r.z.segment(off_u, nu), m, depth);
    sol.x_plan = unvectorize(r.z.segment(off_x, nx), n, depth);
    sol.cost = r.objective;
    return sol;
}

}  // namespace

DosMpcSolution dos_mpc_state_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hx,
                                   const Vec& u_prev, const Vec& x_prev, double w_bar,
                                   const DosMpcWeights& weights) {
    if (Hu.depth != Hx.depth || Hu.depth < 2)
        throw std::invalid_argument("dos: Hankel depth must be L+1 with L >= 1");
    if (weights.R1.rows() != Hu.signal_dim || weights.R2.rows() != Hx.signal_dim)
        throw std::invalid_argument("dos: weight dimensions mismatch");
    return solve_plan(Hu, Hx, {u_prev}, {x_prev}, 1, w_bar, weights);
}

DosMpcOutputSolution dos_mpc_output_solve(const data::HankelMatrix& Hu,
                                          const data::HankelMatrix& Hy,
                                          const std::vector<Vec>& u_hist,
                                          const std::vector<Vec>& y_hist, double w_bar,
                                          const DosMpcWeights& weights, Eigen::Index eta) {
    if (eta < 1) throw std::invalid_argument("dos: eta must be >= 1");
    const Eigen::Index L = Hu.depth - eta;
    if (L < eta) throw std::invalid_argument("dos: horizon must satisfy L >= eta");
    if (static_cast<Eigen::Index>(u_hist.size()) != eta ||
        static_cast<Eigen::Index>(y_hist.size()) != eta)
        throw std::invalid_argument("dos: histories must have length eta");
    auto sol = solve_plan(Hu, Hy, u_hist, y_hist, eta, w_bar, weights);
    DosMpcOutputSolution out;
    out.status = sol.status;
    if (sol.ok()) {
        out.u_plan = sol.u_plan;
        out.y_plan = sol.x_plan;
        out.cost = sol.cost;
    }
    return out;
}

DosResilientController::DosResilientController(data::HankelMatrix Hu, data::HankelMatrix Hx,
                                               double w_bar, DosMpcWeights weights)
    : Hu_(std::move(Hu)), Hx_(std::move(Hx)), w_bar_(w_bar), weights_(std::move(weights)),
      L_(Hu_.depth - 1) {
    if (Hu_.depth != Hx_.depth || Hu_.depth < 3)
        throw std::invalid_argument("dos: controller needs L >= 2");
    u_last_ = Vec::Zero(Hu_.signal_dim);
    x_last_ = Vec::Zero(Hx_.signal_dim);
}

Vec DosResilientController::step(Eigen::Index t, const std::optional<Vec>& received_state) {
    const Eigen::Index m = Hu_.signal_dim;
    Vec u = Vec::Zero(m);

    if (received_state && has_pair_) {
        // Fresh measurement confirms the channel: refresh the plan from the
        // most recent complete (input, state) pair.
        auto sol = dos_mpc_state_solve(Hu_, Hx_, u_last_, x_last_, w_bar_, weights_);
        last_status_ = sol.status;
        if (sol.ok()) {
            u_plan_ = sol.u_plan;
            plan_base_ = pair_time_ + 1;  // plan column 1 applies here
            has_plan_ = true;
        }
    }

    if (has_plan_) {
        Eigen::Index col = t - plan_base_ + 1;
        if (col >= 1 && col < u_plan_.cols())
            u = u_plan_.col(col);
        else
            u.setZero();  // beyond the stored plan, coast at zero
    }

    if (received_state) {
        u_last_ = u;
        x_last_ = *received_state;
        pair_time_ = t;
        has_pair_ = true;
    }
    return u;
}

}  // namespace ddn::resilient
