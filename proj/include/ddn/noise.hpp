#pragma once

#include "ddn/types.hpp"

namespace ddn::data {

/// Quadratic noise bound on a stacked noise matrix W (n_w x T):
/// [W^T; I]^T P_d [W^T; I] >= 0 with P_d = [Q_d, S_d; S_d^T, R_d],
/// Q_d (T x T) negative definite.
class QuadraticNoiseModel {
  public:
    QuadraticNoiseModel(Mat Q_d, Mat S_d, Mat R_d);

    /// Pointwise bound ||w(t)||_2 <= w_bar with one free multiplier scalar:
    /// Q_d = -eps I, S_d = 0, R_d = eps T w_bar^2 I.
    static QuadraticNoiseModel pointwise(Eigen::Index horizon, Eigen::Index noise_dim,
                                         double w_bar, double eps = 1.0);

    /// Per-sample scalars eps_i, the less conservative diagonal form.
    static QuadraticNoiseModel per_sample(const std::vector<double>& eps, Eigen::Index noise_dim,
                                          double w_bar);

    const Mat& Qd() const { return Qd_; }
    const Mat& Sd() const { return Sd_; }
    const Mat& Rd() const { return Rd_; }
    Eigen::Index horizon() const { return Qd_.rows(); }
    Eigen::Index noise_dim() const { return Rd_.rows(); }

    /// Full multiplier [Q_d, S_d; S_d^T, R_d].
    Mat multiplier() const;

    /// Does a concrete noise matrix satisfy the bound (up to tol)?
    bool admits(const Mat& W, double tol = 1e-9) const;

  private:
    Mat Qd_, Sd_, Rd_;
};

/// Vertex-described bounds on per-instant process and measurement noise.
struct PolytopicNoiseModel {
    std::vector<Vec> w_vertices;  // at least one, common dimension n_w
    std::vector<Vec> v_vertices;  // may be empty when no output channel

    PolytopicNoiseModel(std::vector<Vec> w_verts, std::vector<Vec> v_verts = {});

    Eigen::Index w_dim() const { return w_vertices.front().size(); }
    Eigen::Index v_dim() const { return v_vertices.empty() ? 0 : v_vertices.front().size(); }
    std::size_t gamma_w() const { return w_vertices.size(); }
    std::size_t gamma_v() const { return v_vertices.size(); }

    /// Symmetric box [-w_bar, w_bar]^dim as 2^dim vertices (dim <= 16).
    static std::vector<Vec> box_vertices(Eigen::Index dim, double bound);
};

}  // namespace ddn::data
