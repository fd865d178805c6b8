#pragma once

#include "ddn/types.hpp"

#include <iosfwd>
#include <optional>

namespace ddn::data {

/// Recorded input/state(/output) samples of one experiment.
///
/// Inputs cover t = 0..T-1; when states are present they cover t = 0..T so
/// that the shifted matrix X_+ is well defined. Dimensions are constant
/// across time.
struct Trajectory {
    std::vector<Vec> u;  // length T
    std::vector<Vec> x;  // length T+1 when present, else empty
    std::vector<Vec> y;  // length T when present, else empty

    Eigen::Index input_dim() const { return u.empty() ? 0 : u.front().size(); }
    Eigen::Index state_dim() const { return x.empty() ? 0 : x.front().size(); }
    Eigen::Index output_dim() const { return y.empty() ? 0 : y.front().size(); }
    Eigen::Index horizon() const { return static_cast<Eigen::Index>(u.size()); }
    bool has_states() const { return !x.empty(); }
    bool has_outputs() const { return !y.empty(); }

    // Throws std::invalid_argument when lengths or dimensions are inconsistent.
    void validate() const;
};

/// Stacked data matrices of a trajectory: U, X, X_+ and optionally Y.
struct DataBatch {
    Mat U;   // m x T
    Mat X;   // n x T
    Mat Xp;  // n x T, columns shifted by one
    std::optional<Mat> Y;  // p x T

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index m() const { return U.rows(); }
    Eigen::Index T() const { return U.cols(); }
};

/// U = [u(0) ... u(T-1)], X = [x(0) ... x(T-1)], X_+ = [x(1) ... x(T)].
DataBatch collect_data_matrices(const Trajectory& traj);

/// CSV ingestion, header `t,u_0..u_{m-1},x_0..x_{n-1}[,y_0..y_{p-1}]`,
/// one row per instant with a monotone integer t starting at 0. The state
/// row at t = T carries the final state; its u (and y) cells may be empty.
Trajectory trajectory_from_csv(std::istream& in);
Trajectory trajectory_from_csv_file(const std::string& path);
void trajectory_to_csv(const Trajectory& traj, std::ostream& out);

}  // namespace ddn::data
