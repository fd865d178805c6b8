#pragma once

#include "ddn/lmi.hpp"
#include "ddn/trajectory.hpp"

#include <cstdint>
#include <optional>

namespace ddn::resilient {

/// One actuator-channel combination: 0/1 selection matrix D_a and the
/// channels it attacks. Index 0 is the empty combination (no attack).
struct ChannelCombination {
    int index = 0;
    std::vector<int> channels;  // 1-based channel ids
    Mat Da;                     // m x m diagonal 0/1
};

/// All 2^m combinations ordered by cardinality then lexicographically.
std::vector<ChannelCombination> fdi_channel_combinations(Eigen::Index m);

/// Switched false-data-injection attacker: per-mode gains within the power
/// ball ||D_a K_a|| <= phi and a dwell-constrained switching signal.
struct FdiModel {
    Eigen::Index m = 1;    // actuator channels
    Eigen::Index n = 1;    // state dimension
    double phi = 0.0;      // power bound
    Eigen::Index kappa = 0;  // chatter allowance
    Eigen::Index tau = 2;    // average dwell, >= 2
    std::vector<ChannelCombination> combos;
    std::vector<Mat> gains;  // K_a per mode, m x n

    FdiModel() = default;
    FdiModel(Eigen::Index m_, Eigen::Index n_, double phi_, Eigen::Index kappa_, Eigen::Index tau_,
             std::vector<Mat> gains_);

    /// Random gains projected onto the power ball by singular-value clipping.
    static FdiModel random(Eigen::Index m, Eigen::Index n, double phi, Eigen::Index kappa,
                           Eigen::Index tau, std::uint64_t seed);

    Mat attack_matrix(int mode) const;  // D_a^j K_a^j
    std::size_t mode_count() const { return combos.size(); }
};

/// Dwell-admissible switching signal: N_sigma(t1,t2) <= kappa + (t2-t1)/tau
/// over every window; aggressiveness scales the switching appetite.
std::vector<int> fdi_switch_signal(const FdiModel& model, Eigen::Index length, std::uint64_t seed,
                                   double aggressiveness);

bool fdi_switch_signal_check(const std::vector<int>& sigma, Eigen::Index kappa, Eigen::Index tau);

/// Matrix ellipsoid {Z : Z'AZ + Z'B + B'Z + C <= 0} over Z in R^{(n+m) x n}.
struct MatrixEllipsoid {
    Mat A, B, C;

    bool contains(const Mat& Z, double tol = 1e-8) const;
    Mat center() const;  // -A^{-1} B (requires A > 0)
};

/// Consistency ellipsoid of the healthy system from offline data.
MatrixEllipsoid fdi_offline_healthy(const data::DataBatch& batch, double w_bar);

/// Ball around the offline centre enlarged to cover every attacked subsystem:
/// radius lambda_min(A)^{-1/2} ||(B'A^{-1}B - C)^{1/2}|| + phi * b_norm_bound.
MatrixEllipsoid fdi_offline_set(const data::DataBatch& batch, double w_bar, double phi,
                                double b_norm_bound);

/// One-shot ellipsoid from the latest transition (x_p(t-1), u_o(t-1), x_p(t)).
MatrixEllipsoid fdi_online_ellipsoid(const Vec& x_prev, const Vec& u_prev, const Vec& x_now,
                                     double w_bar);

struct FdiGainResult {
    lmi::SdpStatus status = lmi::SdpStatus::NumericalFailure;
    Mat K;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double certificate_residual = 0.0;
    std::string message;

    bool ok() const { return status == lmi::SdpStatus::Feasible; }
};

/// Online gain from the intersection of the one-shot ellipsoid and the
/// offline ball; minimises tr(P) + tr(L) + eps_reg ||Q|| <= gamma.
FdiGainResult fdi_gain_sdp(const MatrixEllipsoid& online, const MatrixEllipsoid& offline_ball,
                           double eps_reg = 1e-3);

/// Attacker side of the loop: precomputed dwell-admissible schedule plus the
/// per-mode injection u_a = D_a K_a x_p.
class FdiAttacker {
  public:
    FdiAttacker(FdiModel model, Eigen::Index horizon, std::uint64_t seed, double aggressiveness);

    int mode_at(Eigen::Index t) const { return sigma_.at(static_cast<std::size_t>(t)); }
    Vec inject(Eigen::Index t, const Vec& x_p) const;
    const std::vector<int>& schedule() const { return sigma_; }
    const FdiModel& model() const { return model_; }

  private:
    FdiModel model_;
    std::vector<int> sigma_;
};

/// Defender side: re-designs the gain at every step from the latest
/// transition; keeps the previous gain when the program fails.
class FdiOnlineController {
  public:
    FdiOnlineController(MatrixEllipsoid offline_ball, double w_bar, Eigen::Index n, Eigen::Index m,
                        double eps_reg = 1e-3);

    Vec step(Eigen::Index t, const Vec& x_p);
    const Mat& gain() const { return K_; }
    lmi::SdpStatus last_status() const { return last_status_; }
    const MatrixEllipsoid& last_online_set() const { return online_; }

  private:
    MatrixEllipsoid offline_;
    double w_bar_;
    double eps_reg_;
    Mat K_;
    Vec x_prev_, u_prev_;
    bool primed_ = false;
    lmi::SdpStatus last_status_ = lmi::SdpStatus::Feasible;
    MatrixEllipsoid online_;
};

}  // namespace ddn::resilient
