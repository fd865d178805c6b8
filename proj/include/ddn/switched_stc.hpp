#pragma once

#include "ddn/lifted.hpp"
#include "ddn/lmi.hpp"

#include <optional>

namespace ddn::aperiodic {

/// Self-triggered rule over the switched lifting: the next transmission is
/// the largest s in [1, s_max] whose data-based certificate is feasible.
struct SwitchedStcDesign {
    Eigen::Index s_max = 2;  // >= 2
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double alpha = 1.0;      // descriptor scalar used by the design LMI
    Mat K;                   // m x n
    Mat omega;               // n x n positive definite

    void validate() const;
};

/// Existence of gamma > 0 with Qt - gamma * Gt >= 0, decided on a log grid
/// with golden-section refinement (the form is affine in gamma).
bool sts_gamma_feasible(const Mat& q_tilde, const Mat& g_tilde, double* gamma_best = nullptr,
                        double tol = 1e-9);

/// Exact scalar-multiplier certificate over the lifted set: feasibility of
/// some gamma > 0 proving, for every member Z of the set,
///   (Z' xi)' M11 (Z' xi) + 2 (Z' xi)' m12 + c0 >= 0.
/// The quadratic is vectorised in Z, so the test is one affine eigenvalue
/// line search of size (n q + 1).
bool sts_member_certificate(const data::LiftedDataSet& set, const Vec& xi, const Mat& M11,
                            const Vec& m12, double c0, double tol = 1e-9);

/// Triggering-condition certificate at depth set.s for the held gain K.
bool sts_trigger_certified(const data::LiftedDataSet& set, const Vec& x, const Mat& K,
                           const Mat& omega, double sigma1, double sigma2, double tol = 1e-9);

/// Jump contraction V(x(tk+s)) <= mu V(x(tk)) over the whole set.
bool sts_contraction_certified(const data::LiftedDataSet& set, const Vec& x, const Mat& K,
                               const Mat& lyapunov, double mu, double tol = 1e-9);

/// Largest consecutively-certified lift depth, floored at 1. When a
/// Lyapunov pair (lyapunov, decay) is supplied, each depth additionally
/// certifies the jump contraction V(x(tk+s)) <= decay^s V(x(tk)) over the
/// whole set, keeping the closed loop geometric.
Eigen::Index sts_switched_evaluate(const Vec& x, const std::vector<data::LiftedDataSet>& family,
                                   const Mat& K, const Mat& omega, double sigma1, double sigma2,
                                   double tol = 1e-9, const Mat* lyapunov = nullptr,
                                   double decay = 1.0);

struct SwitchedDesignResult {
    lmi::SdpStatus status = lmi::SdpStatus::Infeasible;
    Mat K;
    Mat omega;
    Mat lyapunov;             // certificate matrix mapped to state coordinates
    double decay = 1.0;       // certified per-step contraction of the loop
    double alpha_used = 0.0;
    double multiplier = 0.0;  // S-procedure scalar of the certificate
    std::string message;

    bool ok() const { return status == lmi::SdpStatus::Feasible; }
};

/// Gain/triggering-matrix co-design from the depth-1 set. When alpha is not
/// given a small grid is scanned; `decay` tightens the Lyapunov block to
/// V+ <= decay * V, certifying a geometric rate under the rule.
SwitchedDesignResult stc_switched_design(const data::LiftedDataSet& set_s1, double sigma1,
                                         double sigma2,
                                         std::optional<double> alpha = std::nullopt,
                                         double decay = 1.0);

/// Scans the alpha grid and bisects the decay rate, returning the design
/// with the smallest certified rate.
SwitchedDesignResult stc_switched_design_fast(const data::LiftedDataSet& set_s1, double sigma1,
                                              double sigma2, double decay_floor = 0.7);

}  // namespace ddn::aperiodic
