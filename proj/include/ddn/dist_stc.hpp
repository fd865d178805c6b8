#pragma once

#include "ddn/graph.hpp"
#include "ddn/lifted.hpp"
#include "ddn/lmi.hpp"

#include <optional>

namespace ddn::dist {

/// Triggering certificate for one agent at depth set.s: eps is the tracking
/// error at the last trigger, z the combined measurement held there; the
/// certificate must survive a margin of m_slack times the squared held
/// direction.
bool dist_trigger_certified(const data::LiftedDataSet& set, const Vec& eps, const Vec& z,
                            const Mat& K, const Mat& phi, double sigma, double m_slack = 1e-4,
                            double tol = 1e-9);

/// Largest consecutively certified s in [1, s_max], floored at 1; the lifted
/// sets are built on the tracking-error data. A Lyapunov pair additionally
/// certifies contraction of every error jump.
Eigen::Index dist_sts_evaluate(const std::vector<data::LiftedDataSet>& family, const Vec& eps,
                               const Vec& z, const Mat& K, const Mat& phi, double sigma,
                               double m_slack = 1e-4, double tol = 1e-9,
                               const Mat* lyapunov = nullptr, double decay = 1.0);

struct DistStcDesign {
    lmi::SdpStatus status = lmi::SdpStatus::Infeasible;
    Mat K;    // m x n shared follower gain
    Mat phi;  // n x n triggering matrix
    Mat lyapunov;  // shared certificate matrix in error coordinates
    double decay = 1.0;
    double beta = 0.0;
    std::string message;

    bool ok() const { return status == lmi::SdpStatus::Feasible; }
};

/// Joint per-agent LMIs with shared variables (P, phi_bar, G, K_G, beta);
/// requires a spanning tree and depth-1 error-data sets, one per follower.
/// Without an explicit descriptor scalar a small grid is scanned.
DistStcDesign dist_stc_design(const std::vector<data::LiftedDataSet>& agent_sets,
                              const CommGraph& graph, double sigma,
                              std::optional<double> eps_scalar = std::nullopt);

}  // namespace ddn::dist
