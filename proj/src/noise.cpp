#include "ddn/noise.hpp"

namespace ddn::data {

QuadraticNoiseModel::QuadraticNoiseModel(Mat Q_d, Mat S_d, Mat R_d)
    : Qd_(std::move(Q_d)), Sd_(std::move(S_d)), Rd_(std::move(R_d)) {
    if (Qd_.rows() != Qd_.cols()) throw std::invalid_argument("noise: Q_d must be square");
    if (Rd_.rows() != Rd_.cols()) throw std::invalid_argument("noise: R_d must be square");
    if (Sd_.rows() != Qd_.rows() || Sd_.cols() != Rd_.rows())
        throw std::invalid_argument("noise: S_d shape mismatch");
    if ((Qd_ - Qd_.transpose()).norm() > 1e-12 * (1.0 + Qd_.norm()))
        throw std::invalid_argument("noise: Q_d must be symmetric");
    if ((Rd_ - Rd_.transpose()).norm() > 1e-12 * (1.0 + Rd_.norm()))
        throw std::invalid_argument("noise: R_d must be symmetric");
    // Side condition of the quadratic noise assumption.
    if (max_eigenvalue(Qd_) >= 0.0)
        throw std::invalid_argument("noise: upper-left multiplier block must be negative definite");
}

QuadraticNoiseModel QuadraticNoiseModel::pointwise(Eigen::Index horizon, Eigen::Index noise_dim,
                                                   double w_bar, double eps) {
    if (horizon < 1) throw std::invalid_argument("noise: horizon must be >= 1");
    if (noise_dim < 1) throw std::invalid_argument("noise: noise dimension must be >= 1");
    if (w_bar < 0.0) throw std::invalid_argument("noise: bound must be >= 0");
    if (eps <= 0.0) throw std::invalid_argument("noise: multiplier scalar must be > 0");
    Mat Qd = -eps * Mat::Identity(horizon, horizon);
    Mat Sd = Mat::Zero(horizon, noise_dim);
    Mat Rd = eps * static_cast<double>(horizon) * w_bar * w_bar * Mat::Identity(noise_dim, noise_dim);
    return QuadraticNoiseModel(std::move(Qd), std::move(Sd), std::move(Rd));
}

QuadraticNoiseModel QuadraticNoiseModel::per_sample(const std::vector<double>& eps,
                                                    Eigen::Index noise_dim, double w_bar) {
    const auto T = static_cast<Eigen::Index>(eps.size());
    if (T < 1) throw std::invalid_argument("noise: need at least one sample scalar");
    Mat Qd = Mat::Zero(T, T);
    double total = 0.0;
    for (Eigen::Index i = 0; i < T; ++i) {
        if (eps[static_cast<std::size_t>(i)] <= 0.0)
            throw std::invalid_argument("noise: per-sample scalars must be > 0");
        Qd(i, i) = -eps[static_cast<std::size_t>(i)];
        total += eps[static_cast<std::size_t>(i)];
    }
    Mat Sd = Mat::Zero(T, noise_dim);
    Mat Rd = total * w_bar * w_bar * Mat::Identity(noise_dim, noise_dim);
    return QuadraticNoiseModel(std::move(Qd), std::move(Sd), std::move(Rd));
}

Mat QuadraticNoiseModel::multiplier() const {
    const auto T = horizon();
    const auto nw = noise_dim();
    Mat P(T + nw, T + nw);
    P.topLeftCorner(T, T) = Qd_;
    P.topRightCorner(T, nw) = Sd_;
    P.bottomLeftCorner(nw, T) = Sd_.transpose();
    P.bottomRightCorner(nw, nw) = Rd_;
    return P;
}

bool QuadraticNoiseModel::admits(const Mat& W, double tol) const {
    if (W.rows() != noise_dim() || W.cols() != horizon())
        throw std::invalid_argument("noise: W shape mismatch");
    Mat Wt = W.transpose();
    Mat form = Wt.transpose() * Qd_ * Wt + Wt.transpose() * Sd_ + Sd_.transpose() * Wt + Rd_;
    return min_eigenvalue(form) >= -tol;
}

PolytopicNoiseModel::PolytopicNoiseModel(std::vector<Vec> w_verts, std::vector<Vec> v_verts)
    : w_vertices(std::move(w_verts)), v_vertices(std::move(v_verts)) {
    if (w_vertices.empty()) throw std::invalid_argument("noise: need at least one process vertex");
    for (const auto& v : w_vertices)
        if (v.size() != w_vertices.front().size())
            throw std::invalid_argument("noise: process vertex dimensions differ");
    for (const auto& v : v_vertices)
        if (v.size() != v_vertices.front().size())
            throw std::invalid_argument("noise: measurement vertex dimensions differ");
}

std::vector<Vec> PolytopicNoiseModel::box_vertices(Eigen::Index dim, double bound) {
    if (dim < 1 || dim > 16) throw std::invalid_argument("noise: box dimension out of range");
    if (bound < 0.0) throw std::invalid_argument("noise: bound must be >= 0");
    std::vector<Vec> verts;
    verts.reserve(static_cast<std::size_t>(1) << dim);
    for (std::size_t mask = 0; mask < (static_cast<std::size_t>(1) << dim); ++mask) {
        Vec v(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            v(i) = (mask >> i) & 1 ? bound : -bound;
        verts.push_back(v);
    }
    return verts;
}

}  // namespace ddn::data
