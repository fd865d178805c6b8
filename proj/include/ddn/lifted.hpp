#pragma once

#include "ddn/consistency.hpp"

namespace ddn::data {

/// Data matrices and assembled quadratic form for the s-step lifted system
/// x(t+s) = A^s x(t) + [A^{s-1}B ... B] u-block. Membership of a candidate
/// [A^s, B-block] (n x (n+sm)) uses the same QMI layout as the unlifted set.
struct LiftedDataSet {
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index s = 0;    // lift depth
    Eigen::Index T = 0;    // column count
    Mat Us;                // (s m) x T stacked input rows
    Mat X;                 // n x T
    Mat Xps;               // n x T, states shifted by s
    Mat theta;             // (2n + sm) square, full rank by construction
    Mat theta_inv;

    Eigen::Index lifted_input_dim() const { return s * m; }

    /// Top-left (n+sm) block of theta (negative definite for rich data).
    Mat Q_blk() const { return theta.topLeftCorner(n + s * m, n + s * m); }
    Mat S_blk() const { return theta.topRightCorner(n + s * m, n); }
    Mat R_blk() const { return theta.bottomRightCorner(n, n); }

    /// Dual-form blocks used by the triggering LMIs: from theta_inv with the
    /// same split, arranged as [-R_tilde, S_tilde^T; S_tilde, -Q_tilde].
    Mat dual_form() const;

    bool contains(const Mat& candidate, double tol = 1e-8) const;
};

/// Just the stacked matrices (U^s, X, X_+^s) at depth s, without the
/// quadratic form; useful when the record is too short for the full set.
struct LiftedMatrices {
    Mat Us, X, Xps;
};
LiftedMatrices lifted_matrices(const Trajectory& traj, Eigen::Index s, Eigen::Index columns = -1);

/// Builds the lifted data set at depth s from a trajectory with at least
/// T + s - 1 input samples. B_w enters for s = 1 only; deeper lifts use the
/// identity channel. Throws when the assembled form loses full column rank.
LiftedDataSet lifted_data(const Trajectory& traj, Eigen::Index s,
                          const QuadraticNoiseModel& lifted_noise, const Mat& B_w,
                          Eigen::Index columns = -1);

/// Family with a common column count for s = 1..s_max; `noise_for` supplies
/// the lifted multiplier per depth (dimension n_w at s=1, n afterwards).
std::vector<LiftedDataSet> lifted_family(
    const Trajectory& traj, Eigen::Index s_max,
    const std::function<QuadraticNoiseModel(Eigen::Index s, Eigen::Index horizon)>& noise_for,
    const Mat& B_w);

/// Pointwise multiplier for the lifted noise: column norms of the lifted
/// noise matrix are bounded by w_bar * sum_{i<s} growth^i * ||B_w||.
QuadraticNoiseModel lifted_pointwise_noise(Eigen::Index horizon, Eigen::Index state_dim,
                                           Eigen::Index noise_dim, Eigen::Index s, double w_bar,
                                           double growth, double bw_norm);

}  // namespace ddn::data
