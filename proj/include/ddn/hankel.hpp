#pragma once

#include "ddn/types.hpp"

namespace ddn::data {

/// Block-Hankel matrix of a vector signal: block (i,j) = signal(i+j),
/// shape (n*L) x (T-L+1).
struct HankelMatrix {
    Eigen::Index signal_dim = 0;
    Eigen::Index depth = 0;
    Mat matrix;

    Eigen::Index columns() const { return matrix.cols(); }
};

HankelMatrix build_hankel(const std::vector<Vec>& signal, Eigen::Index depth);
HankelMatrix build_hankel(const Mat& signal_columns, Eigen::Index depth);

/// rank(H_L) == n*L at a relative singular-value tolerance. Signals that are
/// too short for the definition (T < (n+1)L - 1) return false rather than
/// throwing; `diagnostic`, when given, explains the verdict.
bool is_persistently_exciting(const std::vector<Vec>& signal, Eigen::Index order,
                              std::string* diagnostic = nullptr, double rel_tol = 1e-10);
bool is_persistently_exciting(const Mat& signal_columns, Eigen::Index order,
                              std::string* diagnostic = nullptr, double rel_tol = 1e-10);

}  // namespace ddn::data
