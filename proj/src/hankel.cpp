#include "ddn/hankel.hpp"

namespace ddn::data {

HankelMatrix build_hankel(const Mat& signal_columns, Eigen::Index depth) {
    const Eigen::Index T = signal_columns.cols();
    const Eigen::Index n = signal_columns.rows();
    if (depth < 1) throw std::invalid_argument("build_hankel: depth must be >= 1");
    if (depth > T) throw std::invalid_argument("build_hankel: depth exceeds signal length");

    HankelMatrix h;
    h.signal_dim = n;
    h.depth = depth;
    h.matrix.resize(n * depth, T - depth + 1);
    for (Eigen::Index i = 0; i < depth; ++i)
        for (Eigen::Index j = 0; j < T - depth + 1; ++j)
            h.matrix.block(i * n, j, n, 1) = signal_columns.col(i + j);
    return h;
}

HankelMatrix build_hankel(const std::vector<Vec>& signal, Eigen::Index depth) {
    if (signal.empty()) throw std::invalid_argument("build_hankel: empty signal");
    Mat cols(signal.front().size(), static_cast<Eigen::Index>(signal.size()));
    for (std::size_t t = 0; t < signal.size(); ++t) {
        if (signal[t].size() != cols.rows())
            throw std::invalid_argument("build_hankel: signal dimension varies");
        cols.col(static_cast<Eigen::Index>(t)) = signal[t];
    }
    return build_hankel(cols, depth);
}

bool is_persistently_exciting(const Mat& signal_columns, Eigen::Index order,
                              std::string* diagnostic, double rel_tol) {
    const Eigen::Index T = signal_columns.cols();
    const Eigen::Index n = signal_columns.rows();
    if (order < 1) throw std::invalid_argument("is_persistently_exciting: order must be >= 1");
    if (T < order) {
        if (diagnostic) *diagnostic = "signal shorter than the requested order";
        return false;
    }
    if (T < (n + 1) * order - 1) {
        if (diagnostic)
            *diagnostic = "signal too short: T < (n+1)L-1, rank deficiency is structural";
        return false;
    }
    auto h = build_hankel(signal_columns, order);
    const auto rank = numerical_rank(h.matrix, rel_tol);
    if (diagnostic)
        *diagnostic = "rank " + std::to_string(rank) + " of required " + std::to_string(n * order);
    return rank == n * order;
}

bool is_persistently_exciting(const std::vector<Vec>& signal, Eigen::Index order,
                              std::string* diagnostic, double rel_tol) {
    if (signal.empty()) {
        if (diagnostic) *diagnostic = "empty signal";
        return false;
    }
    Mat cols(signal.front().size(), static_cast<Eigen::Index>(signal.size()));
    for (std::size_t t = 0; t < signal.size(); ++t) cols.col(static_cast<Eigen::Index>(t)) = signal[t];
    return is_persistently_exciting(cols, order, diagnostic, rel_tol);
}

}  // namespace ddn::data
