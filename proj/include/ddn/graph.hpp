#pragma once

#include "ddn/types.hpp"

namespace ddn::dist {

/// Leader-follower communication topology: weighted adjacency among the N
/// followers plus pinning gains from the leader.
struct CommGraph {
    Mat adjacency;   // N x N, zero diagonal, a_ij >= 0 (edge j -> i)
    Vec pinning;     // p_i >= 0
    Mat degree;      // diag(sum_j a_ij)
    Mat laplacian;   // degree - adjacency
    Mat pin_matrix;  // diag(pinning)
    Mat lambda;      // laplacian + pin_matrix
    bool spanning_tree = false;  // every follower reachable from the leader

    Eigen::Index followers() const { return adjacency.rows(); }
};

CommGraph graph_analyze(const Mat& adjacency, const Vec& pinning);

/// z_i = sum_j a_ij (x_i - x_j) + p_i (x_i - x_0).
Vec combined_measurement(const std::vector<Vec>& follower_states, const Vec& leader_state,
                         const CommGraph& graph, Eigen::Index i);

/// Stacked form (Lambda (x) I)(x - 1 (x) x0) for identical agent dimensions.
Vec combined_measurement_stacked(const std::vector<Vec>& follower_states, const Vec& leader_state,
                                 const CommGraph& graph);

}  // namespace ddn::dist
