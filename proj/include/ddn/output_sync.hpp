#pragma once

#include "ddn/consistency.hpp"
#include "ddn/graph.hpp"
#include "ddn/lmi.hpp"

namespace ddn::dist {

/// Leader internal model: x0+ = S x0, y0 = H x0, with unit-circle
/// non-repeated poles.
struct LeaderModel {
    Mat S;
    Mat H;

    LeaderModel(Mat S_, Mat H_);
    Eigen::Index dim() const { return S.rows(); }

    static LeaderModel planar_rotation(double angle, Mat H);
};

struct OreSolution {
    Mat Pi;      // n_i x n0
    Mat Gamma;   // m_i x n0
    double residual = 0.0;  // sum of squared Frobenius residuals at optimum
    bool rank_deficient = false;
};

/// Relaxed output regulator equations over all polytope vertices. The
/// default aggregation is the sum of squared Frobenius residuals (one
/// linear solve); `max_aggregation` instead minimises the worst vertex
/// residual through an epigraph program.
OreSolution ore_relax_solve(const data::MatrixPolytope& Mz, const data::MatrixPolytope& Mc,
                            const Mat& S, const Mat& H, bool max_aggregation = false);

/// Conservative outer bounds on the regulation errors: max over vertices of
/// ||Mz [Gamma; Pi] - Pi S|| and ||Mc Pi - H|| (spectral norms).
std::pair<double, double> ore_error_bound(const data::MatrixPolytope& Mz,
                                          const data::MatrixPolytope& Mc, const Mat& Pi,
                                          const Mat& Gamma, const Mat& S, const Mat& H);

struct SyncGainResult {
    lmi::SdpStatus status = lmi::SdpStatus::Infeasible;
    Mat K;  // m x n
    Mat M;  // T x n certificate variable
    std::string message;

    bool ok() const { return status == lmi::SdpStatus::Feasible; }
};

/// Vertex-robust stabilising gain: finds M with X M symmetric positive
/// definite and [[XM, Om_k M],[.., XM]] > 0 for every concatenated noise
/// vertex, then K = U M (X M)^{-1}; verifies the spectral radius on every
/// vertex system of Mz.
SyncGainResult sync_gain_design(const data::DataBatch& batch,
                                const std::vector<Mat>& noise_vertex_mats,
                                const data::MatrixPolytope& Mz);

/// Concatenated per-slot process noise vertices (the same construction the
/// polytopic consistency set uses).
std::vector<Mat> concatenated_process_vertices(const data::PolytopicNoiseModel& noise,
                                               Eigen::Index T);

/// Observer gain F with I_N (x) S - ((I_N + D + P)^{-1} Lambda) (x) F Schur
/// stable; scans F = alpha S first, then F = alpha S + beta I.
Mat observer_gain_design(const Mat& S, const CommGraph& graph);

/// One distributed-observer update for agent i.
Vec observer_step(const std::vector<Vec>& eta, const Vec& leader_state, const CommGraph& graph,
                  Eigen::Index i, const Mat& S, const Mat& F);

/// u_i = K_i (x_i - Pi_i eta_i) + Gamma_i eta_i.
Vec sync_controller_step(const Vec& x_i, const Vec& eta_i, const Mat& K_i, const Mat& Pi_i,
                         const Mat& Gamma_i);

/// Everything one follower carries through an output-synchronisation run.
struct HeteroAgent {
    Mat A, B, C;  // simulation ground truth
    data::DataBatch batch;
    data::MatrixPolytope Mz{std::vector<Mat>{Mat::Zero(1, 1)}};
    data::MatrixPolytope Mc{std::vector<Mat>{Mat::Zero(1, 1)}};
    Mat Pi, Gamma, K;
    Vec eta;  // observer state

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index input_dim() const { return B.cols(); }
};

}  // namespace ddn::dist
