#include "ddn/graph.hpp"

#include <queue>

namespace ddn::dist {

CommGraph graph_analyze(const Mat& adjacency, const Vec& pinning) {
    const Eigen::Index N = adjacency.rows();
    if (adjacency.cols() != N) throw std::invalid_argument("graph: adjacency must be square");
    if (pinning.size() != N) throw std::invalid_argument("graph: pinning length mismatch");
    for (Eigen::Index i = 0; i < N; ++i) {
        if (adjacency(i, i) != 0.0) throw std::invalid_argument("graph: self loops are not allowed");
        if (pinning(i) < 0.0) throw std::invalid_argument("graph: pinning gains must be >= 0");
        for (Eigen::Index j = 0; j < N; ++j)
            if (adjacency(i, j) < 0.0) throw std::invalid_argument("graph: weights must be >= 0");
    }

    CommGraph g;
    g.adjacency = adjacency;
    g.pinning = pinning;
    g.degree = adjacency.rowwise().sum().asDiagonal();
    g.laplacian = g.degree - adjacency;
    g.pin_matrix = pinning.asDiagonal();
    g.lambda = g.laplacian + g.pin_matrix;

    // BFS from the leader: pinning edges seed the frontier, information then
    // flows along a_ij > 0 (an edge from j to i).
    std::vector<bool> reached(static_cast<std::size_t>(N), false);
    std::queue<Eigen::Index> frontier;
    for (Eigen::Index i = 0; i < N; ++i)
        if (pinning(i) > 0.0) {
            reached[static_cast<std::size_t>(i)] = true;
            frontier.push(i);
        }
    while (!frontier.empty()) {
        Eigen::Index j = frontier.front();
        frontier.pop();
        for (Eigen::Index i = 0; i < N; ++i)
            if (!reached[static_cast<std::size_t>(i)] && adjacency(i, j) > 0.0) {
                reached[static_cast<std::size_t>(i)] = true;
                frontier.push(i);
            }
    }
    g.spanning_tree = std::all_of(reached.begin(), reached.end(), [](bool b) { return b; });
    return g;
}

Vec combined_measurement(const std::vector<Vec>& follower_states, const Vec& leader_state,
                         const CommGraph& graph, Eigen::Index i) {
    const Eigen::Index N = graph.followers();
    if (static_cast<Eigen::Index>(follower_states.size()) != N)
        throw std::invalid_argument("graph: follower count mismatch");
    if (i < 0 || i >= N) throw std::invalid_argument("graph: agent index out of range");
    const Vec& xi = follower_states[static_cast<std::size_t>(i)];
    Vec z = Vec::Zero(xi.size());
    for (Eigen::Index j = 0; j < N; ++j)
        if (graph.adjacency(i, j) > 0.0)
            z += graph.adjacency(i, j) * (xi - follower_states[static_cast<std::size_t>(j)]);
    z += graph.pinning(i) * (xi - leader_state);
    return z;
}

Vec combined_measurement_stacked(const std::vector<Vec>& follower_states, const Vec& leader_state,
                                 const CommGraph& graph) {
    const Eigen::Index N = graph.followers();
    const Eigen::Index n = leader_state.size();
    Vec err(N * n);
    for (Eigen::Index i = 0; i < N; ++i)
        err.segment(i * n, n) = follower_states[static_cast<std::size_t>(i)] - leader_state;
    return kron(graph.lambda, Mat::Identity(n, n)) * err;
}

}  // namespace ddn::dist
