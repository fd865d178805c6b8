#include "ddn/lifted.hpp"

namespace ddn::data {

Mat LiftedDataSet::dual_form() const {
    const Eigen::Index a = n + s * m;
    Mat Qt = theta_inv.topLeftCorner(a, a);
    Mat St = theta_inv.topRightCorner(a, n);
    Mat Rt = theta_inv.bottomRightCorner(n, n);
    Mat out(n + a, n + a);
    out.topLeftCorner(n, n) = -Rt;
    out.topRightCorner(n, a) = St.transpose();
    out.bottomLeftCorner(a, n) = St;
    out.bottomRightCorner(a, a) = -Qt;
    return sym(out);
}

bool LiftedDataSet::contains(const Mat& candidate, double tol) const {
    if (candidate.rows() != n || candidate.cols() != n + s * m)
        throw std::invalid_argument("lifted: candidate must be n x (n+sm)");
    Mat Z = candidate.transpose();
    Mat form = Z.transpose() * Q_blk() * Z + Z.transpose() * S_blk() +
               S_blk().transpose() * Z + R_blk();
    return min_eigenvalue(form) >= -tol;
}

LiftedMatrices lifted_matrices(const Trajectory& traj, Eigen::Index s, Eigen::Index columns) {
    traj.validate();
    if (!traj.has_states()) throw std::invalid_argument("lifted: trajectory has no states");
    if (s < 1) throw std::out_of_range("lifted: depth must be >= 1");
    const Eigen::Index n = traj.state_dim();
    const Eigen::Index m = traj.input_dim();
    const Eigen::Index Nu = traj.horizon();
    Eigen::Index T = columns > 0 ? columns : Nu - s + 1;
    if (T < 1 || T + s - 1 > Nu)
        throw std::out_of_range("lifted: need T + s - 1 input samples");
    LiftedMatrices out;
    out.Us.resize(s * m, T);
    for (Eigen::Index r = 0; r < s; ++r)
        for (Eigen::Index t = 0; t < T; ++t)
            out.Us.block(r * m, t, m, 1) = traj.u[static_cast<std::size_t>(r + t)];
    out.X.resize(n, T);
    out.Xps.resize(n, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        out.X.col(t) = traj.x[static_cast<std::size_t>(t)];
        out.Xps.col(t) = traj.x[static_cast<std::size_t>(t + s)];
    }
    return out;
}

LiftedDataSet lifted_data(const Trajectory& traj, Eigen::Index s,
                          const QuadraticNoiseModel& lifted_noise, const Mat& B_w,
                          Eigen::Index columns) {
    auto mats = lifted_matrices(traj, s, columns);
    const Eigen::Index n = traj.state_dim();
    const Eigen::Index m = traj.input_dim();
    const Eigen::Index T = mats.X.cols();

    LiftedDataSet set;
    set.n = n;
    set.m = m;
    set.s = s;
    set.T = T;
    set.Us = std::move(mats.Us);
    set.X = std::move(mats.X);
    set.Xps = std::move(mats.Xps);

    Mat Bw_eff = (s == 1) ? B_w : Mat(Mat::Identity(n, n));
    const Eigen::Index nw = Bw_eff.cols();
    if (lifted_noise.horizon() != T)
        throw std::invalid_argument("lifted: noise horizon != column count");
    if (lifted_noise.noise_dim() != nw)
        throw std::invalid_argument("lifted: noise dimension mismatch (n_w at s=1, n beyond)");

    Mat F(2 * n + s * m, T + nw);
    F.setZero();
    F.block(0, 0, n, T) = -set.X;
    F.block(n, 0, s * m, T) = -set.Us;
    F.block(n + s * m, 0, n, T) = set.Xps;
    F.block(n + s * m, T, n, nw) = Bw_eff;
    set.theta = sym(F * lifted_noise.multiplier() * F.transpose());

    if (!has_full_column_rank(set.theta))
        throw std::runtime_error("lifted: assembled data form is rank deficient (data requirement)");
    set.theta_inv = set.theta.ldlt().solve(Mat::Identity(set.theta.rows(), set.theta.cols()));
    set.theta_inv = sym(set.theta_inv);
    return set;
}

std::vector<LiftedDataSet> lifted_family(
    const Trajectory& traj, Eigen::Index s_max,
    const std::function<QuadraticNoiseModel(Eigen::Index, Eigen::Index)>& noise_for,
    const Mat& B_w) {
    if (s_max < 1) throw std::out_of_range("lifted: s_max must be >= 1");
    const Eigen::Index T = traj.horizon() - s_max + 1;
    std::vector<LiftedDataSet> family;
    family.reserve(static_cast<std::size_t>(s_max));
    for (Eigen::Index s = 1; s <= s_max; ++s)
        family.push_back(lifted_data(traj, s, noise_for(s, T), B_w, T));
    return family;
}

QuadraticNoiseModel lifted_pointwise_noise(Eigen::Index horizon, Eigen::Index state_dim,
                                           Eigen::Index noise_dim, Eigen::Index s, double w_bar,
                                           double growth, double bw_norm) {
    double gain = 0.0;
    double pw = 1.0;
    for (Eigen::Index i = 0; i < s; ++i) {
        gain += pw;
        pw *= growth;
    }
    double bound = w_bar * gain * bw_norm;
    Eigen::Index dim = (s == 1) ? noise_dim : state_dim;
    return QuadraticNoiseModel::pointwise(horizon, dim, bound);
}

}  // namespace ddn::data
