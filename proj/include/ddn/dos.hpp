#pragma once

#include "ddn/hankel.hpp"
#include "ddn/qp.hpp"

#include <cstdint>
#include <optional>

namespace ddn::resilient {

/// Frequency/duration budget of a denial-of-service attacker.
struct DoSModel {
    double kappa_f = 0.0;  // >= 0
    double nu_f = 2.0;     // >= 2
    double kappa_d = 0.0;  // >= 0
    double nu_d = 1.0;     // >= 1

    DoSModel() = default;
    DoSModel(double kf, double nf, double kd, double nd);

    bool resilient() const { return 1.0 / nu_f + 1.0 / nu_d < 1.0; }
};

/// Binary attack indicator k(t) with the derived onset sequence d(t)
/// (d(t) = 1 iff k(t) = 1 and k(t-1) = 0) and success times {t : k(t) = 0}.
struct DoSTrace {
    std::vector<std::uint8_t> k;

    std::vector<std::uint8_t> onsets() const;
    std::vector<Eigen::Index> success_times() const;
    Eigen::Index max_success_gap() const;  // includes the gap to the first success
};

/// Exhaustive O(len^2) interval check of both budgets.
bool dos_trace_check(const DoSTrace& trace, const DoSModel& model);

/// T0 = (kappa_d + kappa_f) / (1 - 1/nu_d - 1/nu_f) + 1; admissible traces
/// have first success by T0 - 1 and successive gaps at most T0.
double dos_max_gap_bound(const DoSModel& model);

/// Seeded adversary: aggressiveness 1 greedily saturates both budgets, 0 is
/// silent; every generated trace passes dos_trace_check by construction.
DoSTrace dos_trace_generate(const DoSModel& model, Eigen::Index length, std::uint64_t seed,
                            double aggressiveness);

struct DosMpcWeights {
    Mat R1;  // input cost
    Mat R2;  // state/output cost
    double lambda_g = 1.0;
    double lambda_h = 1.0;
    Vec u_min, u_max;  // empty = unconstrained
};

struct DosMpcSolution {
    qp::QpStatus status = qp::QpStatus::NumericalFailure;
    Mat u_plan;  // m x (L+1), column j is prediction index j-1
    Mat x_plan;  // n x (L+1)
    double cost = std::numeric_limits<double>::quiet_NaN();

    bool ok() const { return status == qp::QpStatus::Optimal; }
};

/// Predictive program with the (-1)-slot pinned to the latest measured
/// input-state pair and the terminal slot pinned to zero; depth L+1 Hankels.
DosMpcSolution dos_mpc_state_solve(const data::HankelMatrix& Hu, const data::HankelMatrix& Hx,
                                   const Vec& u_prev, const Vec& x_prev, double w_bar,
                                   const DosMpcWeights& weights);

struct DosMpcOutputSolution {
    qp::QpStatus status = qp::QpStatus::NumericalFailure;
    Mat u_plan;  // m x (L+eta), column j is prediction index j-eta
    Mat y_plan;  // p x (L+eta)
    double cost = std::numeric_limits<double>::quiet_NaN();

    bool ok() const { return status == qp::QpStatus::Optimal; }
};

/// Output-feedback variant: eta-long initialization window and eta-long
/// terminal zero window; requires L >= eta.
DosMpcOutputSolution dos_mpc_output_solve(const data::HankelMatrix& Hu,
                                          const data::HankelMatrix& Hy,
                                          const std::vector<Vec>& u_hist,
                                          const std::vector<Vec>& y_hist, double w_bar,
                                          const DosMpcWeights& weights, Eigen::Index eta);

/// Controller state machine: re-plans at every successful transmission, plays
/// the stored plan during attacks and falls back to zero input beyond the
/// plan horizon.
class DosResilientController {
  public:
    DosResilientController(data::HankelMatrix Hu, data::HankelMatrix Hx, double w_bar,
                           DosMpcWeights weights);

    /// One control decision. `received_state` is the measurement when the
    /// sensor-to-controller channel was not blocked at time t.
    Vec step(Eigen::Index t, const std::optional<Vec>& received_state);

    bool plan_active() const { return has_plan_; }
    qp::QpStatus last_status() const { return last_status_; }

  private:
    data::HankelMatrix Hu_, Hx_;
    double w_bar_;
    DosMpcWeights weights_;
    Eigen::Index L_;

    bool has_plan_ = false;
    Mat u_plan_;
    Eigen::Index plan_base_ = 0;  // plan column 1 applies at this time
    bool has_pair_ = false;
    Vec u_last_, x_last_;
    Eigen::Index pair_time_ = -1;
    qp::QpStatus last_status_ = qp::QpStatus::Optimal;
};

}  // namespace ddn::resilient
