#include "ddn/ets.hpp"

namespace ddn::aperiodic {

EtsConfig::EtsConfig(Eigen::Index h_, Eigen::Index h_lo, Eigen::Index h_hi, double s1, double s2,
                     Mat omega_, double theta_, double lambda_, double eta0_)
    : h(h_), h_low(h_lo), h_high(h_hi), sigma1(s1), sigma2(s2), omega(std::move(omega_)),
      theta(theta_), lambda(lambda_), eta0(eta0_) {
    if (h_low < 1 || h < h_low || h > h_high)
        throw std::invalid_argument("ets: sampling interval outside [h_low, h_high]");
    if (sigma1 < 0.0 || sigma2 < 0.0) throw std::invalid_argument("ets: sigma weights must be >= 0");
    if (theta <= 0.0) throw std::invalid_argument("ets: theta must be > 0");
    if (lambda <= 0.0) throw std::invalid_argument("ets: lambda must be > 0");
    if (1.0 - lambda - 1.0 / theta < 0.0)
        throw std::invalid_argument("ets: need 1 - lambda - 1/theta >= 0");
    if (eta0 < 0.0) throw std::invalid_argument("ets: eta(0) must be >= 0");
    if (omega.rows() != omega.cols() || omega.rows() == 0 || min_eigenvalue(omega) <= 0.0)
        throw std::invalid_argument("ets: triggering matrix must be positive definite");
}

EtsStep ets_step(const Vec& x_sampled, const Vec& x_last_tx, double eta, const EtsConfig& cfg) {
    if (x_sampled.size() != cfg.omega.rows() || x_last_tx.size() != cfg.omega.rows())
        throw std::invalid_argument("ets: state dimension mismatch");
    Vec e = x_sampled - x_last_tx;
    EtsStep step;
    step.rho = cfg.sigma1 * x_sampled.dot(cfg.omega * x_sampled) +
               cfg.sigma2 * x_last_tx.dot(cfg.omega * x_last_tx) - e.dot(cfg.omega * e);
    step.transmit = eta + cfg.theta * step.rho < 0.0;
    step.eta_next = eta_update(eta, cfg.lambda, step.rho);
    return step;
}

}  // namespace ddn::aperiodic
