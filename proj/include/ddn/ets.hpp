#pragma once

#include "ddn/types.hpp"

namespace ddn::aperiodic {

/// Periodic dynamic event-triggered sampling: every h steps the rule
///   rho = sigma1 x'Wx + sigma2 xk'Wxk - e'We,  e = x - x_last_tx
/// is evaluated, a transmission fires when eta + theta*rho < 0, and the
/// dynamic variable follows eta+ = (1 - lambda) eta + rho.
struct EtsConfig {
    Eigen::Index h = 1;       // sampling interval, within [h_low, h_high]
    Eigen::Index h_low = 1;
    Eigen::Index h_high = 1;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    Mat omega;                // positive definite triggering weight
    double theta = 1.0;       // > 0
    double lambda = 0.5;      // > 0 and 1 - lambda - 1/theta >= 0
    double eta0 = 0.0;        // >= 0

    EtsConfig() = default;
    EtsConfig(Eigen::Index h_, Eigen::Index h_lo, Eigen::Index h_hi, double s1, double s2,
              Mat omega_, double theta_, double lambda_, double eta0_);
};

struct EtsStep {
    bool transmit = false;
    double eta_next = 0.0;
    double rho = 0.0;
};

/// One leak step of the dynamic variable.
inline double eta_update(double eta, double lambda, double rho) {
    return eta - lambda * eta + rho;
}

EtsStep ets_step(const Vec& x_sampled, const Vec& x_last_tx, double eta, const EtsConfig& cfg);

}  // namespace ddn::aperiodic
