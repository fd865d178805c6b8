#pragma once

#include "ddn/scenario.hpp"

#include <map>

namespace ddn::sim {

enum class RunStatus { Completed, Aborted };

/// Per-step closed-loop logs; columns indexed by time.
struct SimResult {
    RunStatus status = RunStatus::Completed;
    std::string message;
    Mat x_log;        // plant (or stacked agent+leader) states
    Mat u_log;        // applied plant inputs (post attack, pre delay)
    Mat y_log;        // outputs when present, else 0 x horizon
    Mat err_log;      // regulation/tracking errors driving the metrics
    Mat w_log;        // process noise draws
    std::vector<std::uint8_t> trigger;
    std::vector<std::uint8_t> dos;
    std::vector<int> fdi_mode;
    std::vector<int> solver_flag;  // per-step synthesis/solve status (0 ok)
    Vec eta_log;                   // dynamic ETS variable (zero elsewhere)

    Eigen::Index horizon() const { return x_log.cols(); }
};

struct Metrics {
    std::optional<Eigen::Index> settling_time;  // 1e-3 band on the error norm
    double max_state_norm = 0.0;
    Eigen::Index trigger_count = 0;
    double mean_inter_event = 0.0;
    Eigen::Index max_inter_event = 0;
    std::optional<double> l2_gain;  // sum ||err||^2 / sum ||w||^2, noisy runs only
    Eigen::Index dos_steps = 0;
    Eigen::Index dos_max_gap = 0;
    Eigen::Index fdi_switches = 0;
    double final_error_norm = 0.0;
};

/// Deterministic closed-loop rollout of one scenario (data collection,
/// synthesis where the controller requires it, then the network-affected
/// loop). Synthesis failures abort with partial logs unless the controller
/// defines a fallback.
SimResult simulate(const Scenario& scenario);

Metrics metrics(const SimResult& result);

/// Gains and triggering matrices produced by the scenario's synthesis stage,
/// for writing to disk; empty for controllers without a synthesis step.
std::map<std::string, Mat> synthesize(const Scenario& scenario);

/// Largest constant input delay in [lo, hi] keeping the loop stable
/// (final error norm <= 1e-3 of the initial); nullopt when even `lo` fails.
std::optional<Eigen::Index> empirical_maub(const Scenario& scenario, Eigen::Index lo,
                                           Eigen::Index hi);

void write_result_csv(const SimResult& result, std::ostream& out);
SimResult read_result_csv(std::istream& in);
void write_metrics_json(const Metrics& m, std::ostream& out);

}  // namespace ddn::sim
