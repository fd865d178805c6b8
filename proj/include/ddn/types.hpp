#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Deterministic engine used everywhere; seeds are mandatory so runs are
// bit-reproducible.
using Rng = std::mt19937_64;

inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// Numerical rank with a relative singular-value threshold sigma_min/sigma_max.
inline Eigen::Index numerical_rank(const Mat& m, double rel_tol = 1e-10) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) <= 0.0) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++r;
    return r;
}

inline bool has_full_row_rank(const Mat& m, double rel_tol = 1e-10) {
    return numerical_rank(m, rel_tol) == m.rows();
}

inline bool has_full_column_rank(const Mat& m, double rel_tol = 1e-10) {
    return numerical_rank(m, rel_tol) == m.cols();
}

// Moore-Penrose pseudo-inverse via complete orthogonal decomposition.
inline Mat pinv(const Mat& m, double rel_tol = 1e-10) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(m);
    cod.setThreshold(rel_tol);
    return cod.pseudoInverse();
}

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// Column-major vectorisation, matching vec(AXB) = (B^T (x) A) vec(X).
inline Vec vectorize(const Mat& m) {
    return Eigen::Map<const Vec>(m.data(), m.size());
}

inline Mat unvectorize(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("unvectorize: size mismatch");
    return Eigen::Map<const Mat>(v.data(), rows, cols);
}

// Uniform draw from the infinity-ball of the given radius.
inline Vec uniform_ball_inf(Rng& rng, Eigen::Index dim, double radius) {
    std::uniform_real_distribution<double> dist(-radius, radius);
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = dist(rng);
    return v;
}

// Uniform draw from the Euclidean ball of the given radius.
inline Vec uniform_ball_2(Rng& rng, Eigen::Index dim, double radius) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
    double norm = v.norm();
    if (norm == 0.0) return Vec::Zero(dim);
    double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(dim));
    return v * (r / norm);
}

}  // namespace ddn
