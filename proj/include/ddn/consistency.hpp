#pragma once

#include "ddn/noise.hpp"
#include "ddn/trajectory.hpp"

namespace ddn::data {

/// Set of systems [A B] consistent with input-state data under a quadratic
/// noise bound. Membership of a candidate Z = [A B]^T reads
///   Z^T A_blk Z + Z^T B_blk + B_blk^T Z + C_blk >= 0,
/// with the blocks cut out of Theta = [-X; -U; X_+ | 0; 0; B_w] P_d (.)^T.
class QmiConsistencySet {
  public:
    QmiConsistencySet(Eigen::Index state_dim, Eigen::Index input_dim, Mat theta);

    Eigen::Index n() const { return n_; }
    Eigen::Index m() const { return m_; }
    const Mat& theta() const { return theta_; }
    Mat A_blk() const { return theta_.topLeftCorner(n_ + m_, n_ + m_); }
    Mat B_blk() const { return theta_.topRightCorner(n_ + m_, n_); }
    Mat C_blk() const { return theta_.bottomRightCorner(n_, n_); }

    bool contains(const Mat& candidate_ab, double tol = 1e-8) const;

    /// Ellipsoid centre in [A B] form (least-squares system when A_blk < 0).
    Mat center() const;

    /// Deterministic members in [A B] form: centre, axis extremes and random
    /// boundary points. All returned matrices satisfy the membership QMI.
    std::vector<Mat> sample_members(int count, std::uint64_t seed) const;

  private:
    Eigen::Index n_, m_;
    Mat theta_;
};

QmiConsistencySet qmi_consistency_set(const DataBatch& batch, const QuadraticNoiseModel& noise,
                                      const Mat& B_w);

bool qmi_membership(const QmiConsistencySet& set, const Mat& candidate_ab, double tol = 1e-8);

/// Vertex-represented matrix polytope; convex-combination closure implied.
struct MatrixPolytope {
    std::vector<Mat> vertices;

    explicit MatrixPolytope(std::vector<Mat> verts);
    Eigen::Index rows() const { return vertices.front().rows(); }
    Eigen::Index cols() const { return vertices.front().cols(); }
};

struct PolytopicSets {
    MatrixPolytope Mz;  // vertices [B A], gamma_w * T of them
    MatrixPolytope Mc;  // vertices C, gamma_v * T of them (empty Y -> single 0-vertex set absent)
};

/// Vertex-polytope consistency sets from input-state-output data.
/// Requires [U; X] and X of full row rank and Y present when the measurement
/// polytope is requested.
PolytopicSets polytopic_consistency_set(const DataBatch& batch, const PolytopicNoiseModel& noise);

/// Convex-combination feasibility decided by nonnegative least squares;
/// true iff some convex weight vector reproduces the candidate to tol.
bool polytope_membership(const MatrixPolytope& poly, const Mat& candidate, double tol = 1e-8);

/// min ||A beta - b|| s.t. beta >= 0 (Lawson-Hanson). Returns the minimiser.
Vec nnls(const Mat& A, const Vec& b, double tol = 1e-12, int max_iter = 0);

}  // namespace ddn::data
