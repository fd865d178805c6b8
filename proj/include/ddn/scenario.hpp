#pragma once

#include "ddn/dos.hpp"
#include "ddn/ets.hpp"
#include "ddn/fdi.hpp"
#include "ddn/graph.hpp"
#include "ddn/output_sync.hpp"
#include "ddn/stc_mpc.hpp"

#include <iosfwd>
#include <variant>

namespace ddn::sim {

/// Ground-truth plant used for data generation and closed-loop rollout.
struct PlantSpec {
    Mat A, B;
    std::optional<Mat> C;
    Mat B_w;  // empty = identity
    Vec x0;
    double w_bar = 0.0;  // process noise bound, inf-ball draws
    double v_bar = 0.0;  // measurement noise bound (output channels)

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }
    Mat effective_Bw() const { return B_w.size() ? B_w : Mat(Mat::Identity(n(), n())); }
};

/// Offline experiment: excitation radius, optional damping feedback that
/// keeps unstable records bounded, horizon, seed and its own noise draw
/// (negative inherits the plant's online noise bound).
struct DataSpec {
    Eigen::Index T = 30;
    double excitation = 1.0;
    double damping = 0.0;
    double w_bar = -1.0;
    std::uint64_t seed = 1;
};

struct StaticGainSpec {
    Mat K;
};

struct EtsSpec {
    Mat K;
    aperiodic::EtsConfig cfg;
};

struct StcStateSpec {
    Mat K;  // held feedback gain
    aperiodic::StcMpcConfig cfg;
    int rho_samples = 256;
};

struct StcOutputSpec {
    aperiodic::StcMpcConfig cfg;
};

struct SwitchedStcSpec {
    Eigen::Index s_max = 3;
    double sigma1 = 0.05;
    double sigma2 = 0.05;
    std::optional<double> alpha;
    double lift_growth = 0.0;  // per-step growth bound; <= 0 derives it from data
};

struct DosMpcStateSpec {
    Eigen::Index L = 6;
    resilient::DosMpcWeights weights;
};

struct FdiOnlineSpec {
    double eps_reg = 1e-3;
    double b_norm_bound = 0.0;  // 0 = derive from the true plant
};

struct DistStcSpec {
    Mat adjacency;
    Vec pinning;
    double sigma = 0.05;
    Eigen::Index s_max = 3;
    std::optional<double> eps_scalar;
    double lift_growth = 0.0;  // <= 0 derives the bound from data
};

struct SyncAgentSpec {
    Mat A, B, C;
    Vec x0;
};

struct OutputSyncSpec {
    Mat adjacency;
    Vec pinning;
    Mat S, H;  // leader internal model
    Vec leader_x0;
    std::vector<SyncAgentSpec> agents;
    double noise_vertex = 1e-6;  // polytope half-width used for the data sets
};

using ControllerSpec = std::variant<StaticGainSpec, EtsSpec, StcStateSpec, StcOutputSpec,
                                    SwitchedStcSpec, DosMpcStateSpec, FdiOnlineSpec, DistStcSpec,
                                    OutputSyncSpec>;

struct FdiNetworkSpec {
    double phi = 0.1;
    Eigen::Index kappa = 1;
    Eigen::Index tau = 10;
    std::uint64_t seed = 1;
    double aggressiveness = 0.3;
};

struct NetworkSpec {
    Eigen::Index delay = 0;                  // constant input delay
    std::vector<Eigen::Index> delay_seq;     // overrides `delay` when nonempty
    std::optional<resilient::DoSModel> dos;
    double dos_aggressiveness = 1.0;
    std::uint64_t dos_seed = 1;
    std::optional<FdiNetworkSpec> fdi;

    Eigen::Index delay_at(Eigen::Index t) const {
        if (delay_seq.empty()) return delay;
        return delay_seq[static_cast<std::size_t>(t % static_cast<Eigen::Index>(delay_seq.size()))];
    }
    Eigen::Index max_delay() const {
        Eigen::Index d = delay;
        for (auto v : delay_seq) d = std::max(d, v);
        return d;
    }
};

struct Scenario {
    std::string id = "scenario";
    PlantSpec plant;
    DataSpec data;
    ControllerSpec controller;
    NetworkSpec network;
    Eigen::Index horizon = 500;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Versioned JSON config with sections plant/data/controller/network/run;
/// unknown keys are rejected with a path diagnostic.
Scenario scenario_from_json(std::istream& in);
Scenario scenario_from_json_file(const std::string& path);

}  // namespace ddn::sim
