#pragma once

#include "ddn/consistency.hpp"
#include "ddn/hankel.hpp"
#include "ddn/qp.hpp"

#include <functional>

namespace ddn::aperiodic {

enum class NormTag { Inf, Two };

/// Bound on the open-loop growth ||A^s|| used by the triggering formulas.
using RhoOracle = std::function<double(Eigen::Index s)>;

/// Configuration of the MPC-based self-triggered controllers. The state
/// variant uses {L, lambda_g, lambda_h, v_bar, Q, sigma}; the output variant
/// additionally needs {R, P, r, eps, eta_obs, K_terminal} and the input box.
struct StcMpcConfig {
    Eigen::Index L = 2;
    double lambda_g = 1.0;
    double lambda_h = 1.0;
    double v_bar = 0.0;
    Mat Q;            // state/output weight, positive definite
    Mat R;            // input weight (output case)
    Mat P;            // terminal weight on the extended state (output case)
    double r = 1.0;   // terminal set radius
    double eps = 1.0; // terminal tightening, must satisfy the r-eps inequality
    double sigma = 0.5;  // in (0,1)
    Eigen::Index eta_obs = 1;
    Vec u_min, u_max;    // empty = unconstrained
    Mat K_terminal;      // terminal gain on the extended state (output case)
    double h_uxi_pinv_norm = 0.0;  // ||H_{u xi}^\ddag||, see hankel_uxi_pinv_norm

    void validate_state(Eigen::Index state_dim) const;
    void validate_output(Eigen::Index input_dim, Eigen::Index output_dim) const;
};

struct StcStateSolution {
    qp::QpStatus status = qp::QpStatus::NumericalFailure;
    Mat x_pred;  // n x L, predictions \bar x_0 .. \bar x_{L-1}
    Vec g;
    Vec h;       // empty when v_bar = 0
    double cost = std::numeric_limits<double>::quiet_NaN();

    bool ok() const { return status == qp::QpStatus::Optimal; }
};

/// Hankel-constrained prediction under a held input: minimises
/// sum ||xbar_i||_Q^2 + (lambda_h / v_bar) ||h||^2 + lambda_g v_bar ||g||^2
/// subject to H_L(u) g = 1_L (x) u_held, H_L(zeta) g = xbar + h and
/// xbar_0 = zeta. v_bar = 0 removes the slack (h = 0) and picks the
/// minimum-norm g.
StcStateSolution stc_mpc_state_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hz,
                                     const Vec& zeta, const Vec& u_held, const StcMpcConfig& cfg);

/// Largest s in [1, L-1] with
///   ||xbar_s - zeta||_inf + ||h_s||_inf + rho(s)(v + v||g||_1 + ||h_0||_inf)
///     + v||g||_1 <= sigma ||zeta||_inf,
/// floored at 1; zeta = 0 returns L-1 (system at rest).
Eigen::Index stc_next_trigger_state(const StcStateSolution& sol, const Vec& zeta,
                                    const RhoOracle& rho, const StcMpcConfig& cfg);

/// xi(t) = [u_{[t-eta, t-1]}; y_{[t-eta, t-1]}], histories ordered oldest first.
Vec build_extended_state(const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist);

struct StcOutputSolution {
    qp::QpStatus status = qp::QpStatus::NumericalFailure;
    Mat u_pred;  // m x (L+eta), block i stores index i-eta
    Mat y_pred;  // p x (L+eta)
    Vec g;
    Vec h;       // p(L+eta) slack, empty when v_bar = 0
    Vec xi_L;    // predicted extended state at step L
    double cost = std::numeric_limits<double>::quiet_NaN();

    bool ok() const { return status == qp::QpStatus::Optimal; }
};

/// Output-feedback predictive program with initialization from the last eta
/// input/output pairs, terminal ball constraint on the extended state and
/// input box constraints.
StcOutputSolution stc_mpc_output_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hy,
                                       const std::vector<Vec>& u_hist, const std::vector<Vec>& y_hist,
                                       const StcMpcConfig& cfg);

/// min{ s_hat, s_check, L-1 } per the inter-triggering bound, each sup taken
/// over the consecutive satisfier chain starting at s = 1; floors at 1.
Eigen::Index stc_next_trigger_output(const StcOutputSolution& sol, const StcMpcConfig& cfg,
                                     const RhoOracle& rho);

/// ||H_{u xi}^\ddag|| where H_{u xi} stacks the depth-(L+eta) input Hankel
/// over the extended-state sample row; inputs are the raw data columns.
double hankel_uxi_pinv_norm(const Mat& u_cols, const Mat& y_cols, Eigen::Index L,
                            Eigen::Index eta);

/// Upper bound on ||A^s|| over the consistency set: max over deterministic
/// member samples, inflated by 5 percent.
double rho_overapprox(const data::QmiConsistencySet& set, Eigen::Index s, NormTag norm,
                      int samples = 256, std::uint64_t seed = 1);
double rho_overapprox(const std::vector<Mat>& a_members, Eigen::Index s, NormTag norm);

/// Numeric screening of the terminal ingredients on sampled extended-state
/// systems (invariance and decrease on the terminal ball boundary).
bool check_terminal_ingredients(const StcMpcConfig& cfg,
                                const std::vector<std::pair<Mat, Mat>>& sampled_AB,
                                const Mat& C_ext, const Mat& D_ext, int boundary_samples = 64,
                                std::uint64_t seed = 7);

}  // namespace ddn::aperiodic
