#include "ddn/simulate.hpp"

#include "ddn/dist_stc.hpp"
#include "ddn/switched_stc.hpp"

#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ddn::sim {

namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ull;

double data_noise_bound(const PlantSpec& plant, const DataSpec& spec) {
    return spec.w_bar >= 0.0 ? spec.w_bar : plant.w_bar;
}

data::Trajectory collect_trajectory(const PlantSpec& plant, const DataSpec& spec,
                                    Eigen::Index extra = 0) {
    Rng rng(spec.seed);
    data::Trajectory tr;
    Vec x = Vec::Zero(plant.n());
    Mat Bw = plant.effective_Bw();
    const double wb = data_noise_bound(plant, spec);
    const Eigen::Index T = spec.T + extra;
    for (Eigen::Index t = 0; t < T; ++t) {
        Vec u = uniform_ball_inf(rng, plant.m(), spec.excitation);
        if (spec.damping > 0.0) u -= spec.damping * (plant.B.transpose() * x);
        Vec w = wb > 0.0 ? uniform_ball_inf(rng, Bw.cols(), wb) : Vec(Vec::Zero(Bw.cols()));
        tr.u.push_back(u);
        tr.x.push_back(x);
        if (plant.C) {
            Vec v = plant.v_bar > 0.0 ? uniform_ball_inf(rng, plant.C->rows(), plant.v_bar)
                                      : Vec(Vec::Zero(plant.C->rows()));
            tr.y.push_back(*plant.C * x + v);
        }
        x = plant.A * x + plant.B * u + Bw * w;
    }
    tr.x.push_back(x);
    return tr;
}

// The pointwise quadratic bound is a 2-norm condition; inf-ball draws of
// radius w fit inside the 2-ball of radius w*sqrt(dim).
double two_norm_bound(double inf_bound, Eigen::Index dim) {
    return inf_bound * std::sqrt(static_cast<double>(dim));
}

struct Logger {
    explicit Logger(Eigen::Index horizon, Eigen::Index nx, Eigen::Index nu, Eigen::Index ny,
                    Eigen::Index nerr, Eigen::Index nw) {
        r.x_log = Mat::Zero(nx, horizon);
        r.u_log = Mat::Zero(nu, horizon);
        r.y_log = Mat::Zero(std::max<Eigen::Index>(ny, 0), horizon);
        r.err_log = Mat::Zero(nerr, horizon);
        r.w_log = Mat::Zero(nw, horizon);
        r.trigger.assign(static_cast<std::size_t>(horizon), 0);
        r.dos.assign(static_cast<std::size_t>(horizon), 0);
        r.fdi_mode.assign(static_cast<std::size_t>(horizon), 0);
        r.solver_flag.assign(static_cast<std::size_t>(horizon), 0);
        r.eta_log = Vec::Zero(horizon);
    }
    SimResult r;
};

// Input-channel delay buffer: the plant receives the command issued
// delay_at(t) steps ago (zero before the loop started).
struct DelayLine {
    explicit DelayLine(Eigen::Index max_delay, Eigen::Index dim)
        : buffer(static_cast<std::size_t>(max_delay) + 1, Vec::Zero(dim)) {}

    Vec apply(const Vec& cmd, Eigen::Index d) {
        buffer.push_front(cmd);
        buffer.pop_back();
        return buffer[static_cast<std::size_t>(std::min<Eigen::Index>(
            d, static_cast<Eigen::Index>(buffer.size()) - 1))];
    }
    std::deque<Vec> buffer;
};

struct NoiseStream {
    NoiseStream(std::uint64_t seed, double bound, Eigen::Index dim)
        : rng(seed ^ kNoiseStream), bound_(bound), dim_(dim) {}
    Vec draw() { return bound_ > 0.0 ? uniform_ball_inf(rng, dim_, bound_) : Vec(Vec::Zero(dim_)); }
    Rng rng;
    double bound_;
    Eigen::Index dim_;
};

std::vector<std::uint8_t> make_dos_bits(const Scenario& sc) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(sc.horizon), 0);
    if (sc.network.dos) {
        auto trace = resilient::dos_trace_generate(*sc.network.dos, sc.horizon,
                                                   sc.network.dos_seed,
                                                   sc.network.dos_aggressiveness);
        bits = trace.k;
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Single-plant loop shared by the gain/trigger style controllers. The
// `decide` callback returns the commanded input given (t, state measurement
// when the channel is open).
template <typename Decide>
SimResult run_single_plant(const Scenario& sc, Decide&& decide, Eigen::Index ny = 0) {
    const auto& plant = sc.plant;
    Mat Bw = plant.effective_Bw();
    Logger log(sc.horizon, plant.n(), plant.m(), ny, plant.n(), Bw.cols());
    auto dos_bits = make_dos_bits(sc);
    NoiseStream wstream(sc.seed, plant.w_bar, Bw.cols());
    DelayLine delay(sc.network.max_delay(), plant.m());

    std::optional<resilient::FdiAttacker> attacker;
    if (sc.network.fdi) {
        auto model = resilient::FdiModel::random(plant.m(), plant.n(), sc.network.fdi->phi,
                                                 sc.network.fdi->kappa, sc.network.fdi->tau,
                                                 sc.network.fdi->seed);
        attacker.emplace(std::move(model), sc.horizon, sc.network.fdi->seed + 1,
                         sc.network.fdi->aggressiveness);
    }

    Vec x = plant.x0;
    for (Eigen::Index t = 0; t < sc.horizon; ++t) {
        bool blocked = dos_bits[static_cast<std::size_t>(t)] != 0;
        Vec w = wstream.draw();
        std::optional<Vec> meas = blocked ? std::nullopt : std::optional<Vec>(x);
        Vec u_cmd = decide(t, x, meas, log.r);
        Vec u_applied = delay.apply(u_cmd, sc.network.delay_at(t));
        if (attacker) {
            log.r.fdi_mode[static_cast<std::size_t>(t)] = attacker->mode_at(t);
            u_applied = u_applied + attacker->inject(t, x);
        }
        log.r.x_log.col(t) = x;
        log.r.err_log.col(t) = x;
        log.r.u_log.col(t) = u_applied;
        log.r.w_log.col(t) = w;
        log.r.dos[static_cast<std::size_t>(t)] = blocked ? 1 : 0;
        if (ny > 0 && plant.C) log.r.y_log.col(t) = *plant.C * x;
        x = plant.A * x + plant.B * u_applied + Bw * w;
    }
    return log.r;
}

// ---------------------------------------------------------------------------
// Controller preparations

struct SwitchedPrepared {
    std::vector<data::LiftedDataSet> family;
    aperiodic::SwitchedDesignResult design;
};

SwitchedPrepared prepare_switched(const Scenario& sc, const SwitchedStcSpec& spec) {
    SwitchedPrepared out;
    auto tr = collect_trajectory(sc.plant, sc.data, spec.s_max - 1);
    Mat Bw = sc.plant.effective_Bw();
    double w2 = two_norm_bound(data_noise_bound(sc.plant, sc.data), Bw.cols());
    Eigen::JacobiSVD<Mat> svd(Bw);
    double bw_norm = svd.singularValues().size() ? svd.singularValues()(0) : 1.0;
    double growth = spec.lift_growth;
    if (growth <= 0.0) {
        // Bound the one-step operator norm from the data itself.
        auto batch = data::collect_data_matrices(tr);
        auto set = data::qmi_consistency_set(
            batch, data::QuadraticNoiseModel::pointwise(batch.T(), Bw.cols(), w2), Bw);
        growth = aperiodic::rho_overapprox(set, 1, aperiodic::NormTag::Two, 128, sc.seed);
    }
    out.family = data::lifted_family(
        tr, spec.s_max,
        [&](Eigen::Index s, Eigen::Index T) {
            return data::lifted_pointwise_noise(T, sc.plant.n(), Bw.cols(), s, w2, growth,
                                                bw_norm);
        },
        Bw);
    if (spec.alpha)
        out.design = aperiodic::stc_switched_design(out.family.front(), spec.sigma1, spec.sigma2,
                                                    spec.alpha);
    else
        out.design = aperiodic::stc_switched_design_fast(out.family.front(), spec.sigma1,
                                                         spec.sigma2);
    return out;
}

struct StcStatePrepared {
    data::HankelMatrix Hu, Hz;
    std::vector<double> rho;  // rho[s] bounds ||A^s||_inf, index 0 unused
};

StcStatePrepared prepare_stc_state(const Scenario& sc, const StcStateSpec& spec) {
    StcStatePrepared out;
    auto tr = collect_trajectory(sc.plant, sc.data);
    Mat u_cols(sc.plant.m(), tr.horizon());
    Mat z_cols(sc.plant.n(), tr.horizon());
    for (Eigen::Index t = 0; t < tr.horizon(); ++t) {
        u_cols.col(t) = tr.u[static_cast<std::size_t>(t)];
        z_cols.col(t) = tr.x[static_cast<std::size_t>(t)];
    }
    out.Hu = data::build_hankel(u_cols, spec.cfg.L);
    out.Hz = data::build_hankel(z_cols, spec.cfg.L);

    auto batch = data::collect_data_matrices(tr);
    Mat Bw = sc.plant.effective_Bw();
    double w2 = std::max(two_norm_bound(data_noise_bound(sc.plant, sc.data), Bw.cols()),
                         two_norm_bound(sc.plant.v_bar, sc.plant.n()) * 3.0 + 1e-9);
    auto noise = data::QuadraticNoiseModel::pointwise(batch.T(), Bw.cols(), w2);
    auto set = data::qmi_consistency_set(batch, noise, Bw);
    out.rho.assign(static_cast<std::size_t>(spec.cfg.L) + 1, 1.0);
    for (Eigen::Index s = 1; s <= spec.cfg.L; ++s)
        out.rho[static_cast<std::size_t>(s)] =
            aperiodic::rho_overapprox(set, s, aperiodic::NormTag::Inf, spec.rho_samples, sc.seed);
    return out;
}

struct StcOutputPrepared {
    data::HankelMatrix Hu, Hy;
    std::vector<double> rho;
    aperiodic::StcMpcConfig cfg;  // with the pinv norm filled in
};

StcOutputPrepared prepare_stc_output(const Scenario& sc, const StcOutputSpec& spec) {
    if (!sc.plant.C) throw std::invalid_argument("sim: output STC needs an output matrix");
    StcOutputPrepared out;
    out.cfg = spec.cfg;
    const Eigen::Index eta = spec.cfg.eta_obs;
    auto tr = collect_trajectory(sc.plant, sc.data);
    Mat u_cols(sc.plant.m(), tr.horizon());
    Mat y_cols(sc.plant.C->rows(), tr.horizon());
    for (Eigen::Index t = 0; t < tr.horizon(); ++t) {
        u_cols.col(t) = tr.u[static_cast<std::size_t>(t)];
        y_cols.col(t) = tr.y[static_cast<std::size_t>(t)];
    }
    out.Hu = data::build_hankel(u_cols, spec.cfg.L + eta);
    out.Hy = data::build_hankel(y_cols, spec.cfg.L + eta);
    out.cfg.h_uxi_pinv_norm = aperiodic::hankel_uxi_pinv_norm(u_cols, y_cols, spec.cfg.L, eta);

    // Extended-state growth bound from the extended-state data record.
    const Eigen::Index n_xi = (sc.plant.m() + sc.plant.C->rows()) * eta;
    data::Trajectory ext;
    for (Eigen::Index t = eta; t < tr.horizon(); ++t) {
        std::vector<Vec> uh, yh;
        for (Eigen::Index i = t - eta; i < t; ++i) {
            uh.push_back(tr.u[static_cast<std::size_t>(i)]);
            yh.push_back(tr.y[static_cast<std::size_t>(i)]);
        }
        ext.u.push_back(tr.u[static_cast<std::size_t>(t)]);
        ext.x.push_back(aperiodic::build_extended_state(uh, yh));
    }
    {
        std::vector<Vec> uh, yh;
        for (Eigen::Index i = tr.horizon() - eta; i < tr.horizon(); ++i) {
            uh.push_back(tr.u[static_cast<std::size_t>(i)]);
            yh.push_back(tr.y[static_cast<std::size_t>(i)]);
        }
        ext.x.push_back(aperiodic::build_extended_state(uh, yh));
    }
    auto ext_batch = data::collect_data_matrices(ext);
    double v2 = std::max(two_norm_bound(sc.plant.v_bar, n_xi), 1e-8);
    auto noise = data::QuadraticNoiseModel::pointwise(ext_batch.T(), n_xi, 3.0 * v2);
    out.rho.assign(static_cast<std::size_t>(spec.cfg.L + eta) + 1, 1.0);
    try {
        auto set = data::qmi_consistency_set(ext_batch, noise, Mat::Identity(n_xi, n_xi));
        for (Eigen::Index s = 1; s <= spec.cfg.L + eta; ++s)
            out.rho[static_cast<std::size_t>(s)] =
                aperiodic::rho_overapprox(set, s, aperiodic::NormTag::Two, 128, sc.seed);
    } catch (const std::exception&) {
        // Degenerate extended data: fall back to a geometric guess from the
        // one-step fit.
        Mat UX(ext_batch.m() + ext_batch.n(), ext_batch.T());
        UX.topRows(ext_batch.m()) = ext_batch.U;
        UX.bottomRows(ext_batch.n()) = ext_batch.X;
        Mat AB = ext_batch.Xp * pinv(UX);
        double base = lmi::spectral_radius(AB.rightCols(ext_batch.n())) + 0.1;
        for (Eigen::Index s = 1; s <= spec.cfg.L + eta; ++s)
            out.rho[static_cast<std::size_t>(s)] = std::pow(base, static_cast<double>(s));
    }
    return out;
}

struct DistPrepared {
    dist::CommGraph graph;
    std::vector<std::vector<data::LiftedDataSet>> families;
    dist::DistStcDesign design;
    std::vector<Vec> follower_x0;
};

DistPrepared prepare_dist(const Scenario& sc, const DistStcSpec& spec) {
    DistPrepared out;
    out.graph = dist::graph_analyze(spec.adjacency, spec.pinning);
    if (!out.graph.spanning_tree) throw std::invalid_argument("sim: graph needs a spanning tree");
    const Eigen::Index N = out.graph.followers();
    Mat Bw = sc.plant.effective_Bw();
    double w2 = two_norm_bound(data_noise_bound(sc.plant, sc.data), Bw.cols());
    std::vector<data::LiftedDataSet> s1;
    for (Eigen::Index i = 0; i < N; ++i) {
        DataSpec ds = sc.data;
        ds.seed = sc.data.seed + static_cast<std::uint64_t>(i) * 7919;
        PlantSpec agent = sc.plant;  // error dynamics share (A, B)
        auto tr = collect_trajectory(agent, ds, spec.s_max - 1);
        double growth = spec.lift_growth;
        if (growth <= 0.0) {
            auto batch = data::collect_data_matrices(tr);
            auto set = data::qmi_consistency_set(
                batch, data::QuadraticNoiseModel::pointwise(batch.T(), Bw.cols(), w2), Bw);
            growth = aperiodic::rho_overapprox(set, 1, aperiodic::NormTag::Two, 128, sc.seed);
        }
        auto fam = data::lifted_family(
            tr, spec.s_max,
            [&](Eigen::Index s, Eigen::Index T) {
                return data::lifted_pointwise_noise(T, sc.plant.n(), Bw.cols(), s, w2, growth,
                                                    1.0);
            },
            Bw);
        s1.push_back(fam.front());
        out.families.push_back(std::move(fam));
    }
    out.design = dist::dist_stc_design(s1, out.graph, spec.sigma, spec.eps_scalar);

    Rng rng(sc.seed ^ 0xabcdefull);
    for (Eigen::Index i = 0; i < N; ++i)
        out.follower_x0.push_back(sc.plant.x0 + uniform_ball_inf(rng, sc.plant.n(), 1.0));
    return out;
}

struct SyncPrepared {
    dist::CommGraph graph;
    dist::LeaderModel leader{Mat::Identity(1, 1), Mat::Identity(1, 1)};
    Mat F;
    std::vector<dist::HeteroAgent> agents;
    std::vector<std::pair<double, double>> bounds;  // per-agent ore error bounds
};

SyncPrepared prepare_sync(const Scenario& sc, const OutputSyncSpec& spec) {
    SyncPrepared out;
    out.graph = dist::graph_analyze(spec.adjacency, spec.pinning);
    out.leader = dist::LeaderModel(spec.S, spec.H);
    out.F = dist::observer_gain_design(spec.S, out.graph);
    const Eigen::Index n0 = spec.S.rows();

    std::uint64_t agent_seed = sc.data.seed;
    for (const auto& aspec : spec.agents) {
        dist::HeteroAgent agent;
        agent.A = aspec.A;
        agent.B = aspec.B;
        agent.C = aspec.C;
        PlantSpec plant;
        plant.A = aspec.A;
        plant.B = aspec.B;
        plant.C = aspec.C;
        plant.x0 = Vec::Zero(aspec.A.rows());
        plant.w_bar = sc.plant.w_bar;
        plant.v_bar = sc.plant.v_bar;
        DataSpec ds = sc.data;
        ds.seed = agent_seed;
        agent_seed += 7919;
        ds.damping = std::max(ds.damping, 0.2);
        auto tr = collect_trajectory(plant, ds);
        agent.batch = data::collect_data_matrices(tr);

        data::PolytopicNoiseModel noise(
            data::PolytopicNoiseModel::box_vertices(aspec.A.rows(), spec.noise_vertex),
            data::PolytopicNoiseModel::box_vertices(aspec.C.rows(), spec.noise_vertex));
        auto sets = data::polytopic_consistency_set(agent.batch, noise);
        agent.Mz = sets.Mz;
        agent.Mc = sets.Mc;

        auto ore = dist::ore_relax_solve(agent.Mz, agent.Mc, spec.S, spec.H);
        agent.Pi = ore.Pi;
        agent.Gamma = ore.Gamma;
        out.bounds.push_back(
            dist::ore_error_bound(agent.Mz, agent.Mc, agent.Pi, agent.Gamma, spec.S, spec.H));

        auto verts = dist::concatenated_process_vertices(noise, agent.batch.T());
        auto gain = dist::sync_gain_design(agent.batch, verts, agent.Mz);
        if (!gain.ok())
            throw std::runtime_error("sim: stabilising gain synthesis failed for an agent");
        agent.K = gain.K;
        agent.eta = Vec::Zero(n0);
        out.agents.push_back(std::move(agent));
    }
    if (out.agents.size() != static_cast<std::size_t>(out.graph.followers()))
        throw std::invalid_argument("sim: agent count must match the graph");
    for (std::size_t i = 0; i < out.agents.size(); ++i)
        out.agents[i].eta = Vec::Zero(n0);
    return out;
}

SimResult aborted(const std::string& why) {
    SimResult r;
    r.status = RunStatus::Aborted;
    r.message = why;
    r.x_log = Mat::Zero(0, 0);
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------

SimResult simulate(const Scenario& sc) {
    sc.validate();
    const auto& plant = sc.plant;

    if (std::holds_alternative<StaticGainSpec>(sc.controller)) {
        const auto& spec = std::get<StaticGainSpec>(sc.controller);
        Vec x_rx = Vec::Zero(plant.n());
        return run_single_plant(sc, [&](Eigen::Index t, const Vec&, const std::optional<Vec>& meas,
                                        SimResult& r) {
            if (meas) {
                x_rx = *meas;
                r.trigger[static_cast<std::size_t>(t)] = 1;
            }
            return Vec(spec.K * x_rx);
        });
    }

    if (std::holds_alternative<EtsSpec>(sc.controller)) {
        const auto& spec = std::get<EtsSpec>(sc.controller);
        Vec x_held = plant.x0;
        double eta = spec.cfg.eta0;
        return run_single_plant(sc, [&](Eigen::Index t, const Vec& x,
                                        const std::optional<Vec>& meas, SimResult& r) {
            if (t % spec.cfg.h == 0) {
                auto step = aperiodic::ets_step(x, x_held, eta, spec.cfg);
                eta = step.eta_next;
                if (step.transmit && meas) {
                    x_held = *meas;
                    r.trigger[static_cast<std::size_t>(t)] = 1;
                }
            }
            r.eta_log(t) = eta;
            return Vec(spec.K * x_held);
        });
    }

    if (std::holds_alternative<StcStateSpec>(sc.controller)) {
        const auto& spec = std::get<StcStateSpec>(sc.controller);
        StcStatePrepared prep;
        try {
            prep = prepare_stc_state(sc, spec);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        NoiseStream vstream(sc.seed + 17, plant.v_bar, plant.n());
        auto rho = [&](Eigen::Index s) { return prep.rho[static_cast<std::size_t>(s)]; };
        Vec u_held = Vec::Zero(plant.m());
        Eigen::Index next_trig = 0;
        return run_single_plant(sc, [&](Eigen::Index t, const Vec&,
                                        const std::optional<Vec>& meas, SimResult& r) {
            if (t >= next_trig) {
                if (meas) {
                    Vec zeta = *meas + vstream.draw();
                    u_held = spec.K * zeta;
                    auto sol = aperiodic::stc_mpc_state_solve(prep.Hu, prep.Hz, zeta, u_held,
                                                              spec.cfg);
                    if (sol.ok()) {
                        Eigen::Index s = aperiodic::stc_next_trigger_state(sol, zeta, rho, spec.cfg);
                        next_trig = t + std::min<Eigen::Index>(s, spec.cfg.L - 1);
                    } else {
                        r.solver_flag[static_cast<std::size_t>(t)] = 1;
                        next_trig = t + 1;
                    }
                    r.trigger[static_cast<std::size_t>(t)] = 1;
                } else {
                    next_trig = t + 1;  // blocked transmission, retry
                }
            }
            return u_held;
        });
    }

    if (std::holds_alternative<StcOutputSpec>(sc.controller)) {
        const auto& spec = std::get<StcOutputSpec>(sc.controller);
        StcOutputPrepared prep;
        try {
            prep = prepare_stc_output(sc, spec);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        const Eigen::Index eta_obs = prep.cfg.eta_obs;
        const Eigen::Index p = plant.C->rows();
        NoiseStream vstream(sc.seed + 17, plant.v_bar, p);
        std::deque<Vec> u_hist, y_hist;
        Mat plan = Mat::Zero(plant.m(), 0);
        Eigen::Index plan_base = 0, next_trig = eta_obs;
        auto rho = [&](Eigen::Index s) { return prep.rho[static_cast<std::size_t>(s)]; };
        return run_single_plant(
            sc,
            [&](Eigen::Index t, const Vec& x, const std::optional<Vec>& meas, SimResult& r) {
                Vec y = *plant.C * x + vstream.draw();
                r.y_log.col(t) = y;
                Vec u = Vec::Zero(plant.m());
                if (t >= next_trig && meas) {
                    std::vector<Vec> uh(u_hist.begin(), u_hist.end());
                    std::vector<Vec> yh(y_hist.begin(), y_hist.end());
                    auto sol = aperiodic::stc_mpc_output_solve(prep.Hu, prep.Hy, uh, yh, prep.cfg);
                    if (sol.ok()) {
                        plan = sol.u_pred.rightCols(prep.cfg.L);
                        plan_base = t;
                        Eigen::Index s = aperiodic::stc_next_trigger_output(sol, prep.cfg, rho);
                        next_trig = t + s;
                    } else {
                        r.solver_flag[static_cast<std::size_t>(t)] = 1;
                        plan = Mat::Zero(plant.m(), 1);  // hold zero fallback
                        plan_base = t;
                        next_trig = t + 1;
                    }
                    r.trigger[static_cast<std::size_t>(t)] = 1;
                } else if (t >= next_trig) {
                    next_trig = t + 1;
                }
                if (plan.cols() > 0) {
                    Eigen::Index col = t - plan_base;
                    u = col < plan.cols() ? Vec(plan.col(col)) : Vec(Vec::Zero(plant.m()));
                }
                u_hist.push_back(u);
                y_hist.push_back(y);
                while (static_cast<Eigen::Index>(u_hist.size()) > eta_obs) u_hist.pop_front();
                while (static_cast<Eigen::Index>(y_hist.size()) > eta_obs) y_hist.pop_front();
                return u;
            },
            p);
    }

    if (std::holds_alternative<SwitchedStcSpec>(sc.controller)) {
        const auto& spec = std::get<SwitchedStcSpec>(sc.controller);
        SwitchedPrepared prep;
        try {
            prep = prepare_switched(sc, spec);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        if (!prep.design.ok()) return aborted("switched design infeasible: " + prep.design.message);
        Vec x_held = Vec::Zero(plant.n());
        Vec u_held = Vec::Zero(plant.m());
        Eigen::Index next_trig = 0;
        return run_single_plant(sc, [&](Eigen::Index t, const Vec&,
                                        const std::optional<Vec>& meas, SimResult& r) {
            if (t >= next_trig) {
                if (meas) {
                    x_held = *meas;
                    u_held = prep.design.K * x_held;
                    Eigen::Index s = aperiodic::sts_switched_evaluate(
                        x_held, prep.family, prep.design.K, prep.design.omega, spec.sigma1,
                        spec.sigma2, 1e-9, &prep.design.lyapunov, prep.design.decay);
                    next_trig = t + s;
                    r.trigger[static_cast<std::size_t>(t)] = 1;
                } else {
                    next_trig = t + 1;
                }
            }
            return u_held;
        });
    }

    if (std::holds_alternative<DosMpcStateSpec>(sc.controller)) {
        const auto& spec = std::get<DosMpcStateSpec>(sc.controller);
        data::HankelMatrix Hu, Hx;
        try {
            auto tr = collect_trajectory(plant, sc.data);
            Mat u_cols(plant.m(), tr.horizon());
            Mat x_cols(plant.n(), tr.horizon());
            for (Eigen::Index t = 0; t < tr.horizon(); ++t) {
                u_cols.col(t) = tr.u[static_cast<std::size_t>(t)];
                x_cols.col(t) = tr.x[static_cast<std::size_t>(t)];
            }
            Hu = data::build_hankel(u_cols, spec.L + 1);
            Hx = data::build_hankel(x_cols, spec.L + 1);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        double w2 = std::max(two_norm_bound(plant.w_bar, plant.effective_Bw().cols()),
                             two_norm_bound(data_noise_bound(plant, sc.data),
                                            plant.effective_Bw().cols()));
        resilient::DosResilientController ctrl(Hu, Hx, w2, spec.weights);
        return run_single_plant(sc, [&](Eigen::Index t, const Vec&,
                                        const std::optional<Vec>& meas, SimResult& r) {
            Vec u = ctrl.step(t, meas);
            if (meas) r.trigger[static_cast<std::size_t>(t)] = 1;
            if (ctrl.last_status() != qp::QpStatus::Optimal)
                r.solver_flag[static_cast<std::size_t>(t)] = 1;
            return u;
        });
    }

    if (std::holds_alternative<FdiOnlineSpec>(sc.controller)) {
        const auto& spec = std::get<FdiOnlineSpec>(sc.controller);
        resilient::MatrixEllipsoid ball;
        double w2 = std::max(two_norm_bound(plant.w_bar, plant.effective_Bw().cols()),
                             two_norm_bound(data_noise_bound(plant, sc.data),
                                            plant.effective_Bw().cols()));
        try {
            auto tr = collect_trajectory(plant, sc.data);
            auto batch = data::collect_data_matrices(tr);
            double bnorm = spec.b_norm_bound;
            if (bnorm <= 0.0) {
                Eigen::JacobiSVD<Mat> svd(plant.B);
                bnorm = 1.1 * svd.singularValues()(0);
            }
            double phi = sc.network.fdi ? sc.network.fdi->phi : 0.0;
            ball = resilient::fdi_offline_set(batch, w2, phi, bnorm);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        resilient::FdiOnlineController ctrl(ball, w2, plant.n(), plant.m(), spec.eps_reg);
        return run_single_plant(sc, [&](Eigen::Index t, const Vec& x, const std::optional<Vec>&,
                                        SimResult& r) {
            Vec u = ctrl.step(t, x);  // state channel is ideal in this mode
            r.trigger[static_cast<std::size_t>(t)] = 1;
            if (ctrl.last_status() != lmi::SdpStatus::Feasible)
                r.solver_flag[static_cast<std::size_t>(t)] = 1;
            return u;
        });
    }

    if (std::holds_alternative<DistStcSpec>(sc.controller)) {
        const auto& spec = std::get<DistStcSpec>(sc.controller);
        DistPrepared prep;
        try {
            prep = prepare_dist(sc, spec);
        } catch (const std::exception& e) {
            return aborted(e.what());
        }
        if (!prep.design.ok())
            return aborted("distributed design infeasible: " + prep.design.message);
        const Eigen::Index N = prep.graph.followers();
        const Eigen::Index n = plant.n();
        Mat Bw = plant.effective_Bw();
        Logger log(sc.horizon, (N + 1) * n, N * plant.m(), 0, N * n, N * Bw.cols());
        NoiseStream wstream(sc.seed, plant.w_bar, Bw.cols() * N);

        Vec x0 = plant.x0;
        std::vector<Vec> x = prep.follower_x0;
        std::vector<Eigen::Index> next_trig(static_cast<std::size_t>(N), 0);
        std::vector<Vec> z_held(static_cast<std::size_t>(N), Vec::Zero(n));
        std::vector<Vec> eps_held(static_cast<std::size_t>(N), Vec::Zero(n));
        for (Eigen::Index t = 0; t < sc.horizon; ++t) {
            bool any = false;
            for (Eigen::Index i = 0; i < N; ++i) {
                if (t == next_trig[static_cast<std::size_t>(i)]) {
                    z_held[static_cast<std::size_t>(i)] =
                        dist::combined_measurement(x, x0, prep.graph, i);
                    eps_held[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - x0;
                    Eigen::Index s = dist::dist_sts_evaluate(
                        prep.families[static_cast<std::size_t>(i)],
                        eps_held[static_cast<std::size_t>(i)], z_held[static_cast<std::size_t>(i)],
                        prep.design.K, prep.design.phi, spec.sigma, 1e-4, 1e-9,
                        &prep.design.lyapunov, prep.design.decay);
                    next_trig[static_cast<std::size_t>(i)] = t + s;
                    any = true;
                }
            }
            Vec w = wstream.draw();
            for (Eigen::Index i = 0; i < N; ++i) {
                Vec u = prep.design.K * z_held[static_cast<std::size_t>(i)];
                log.r.u_log.col(t).segment(i * plant.m(), plant.m()) = u;
                log.r.x_log.col(t).segment(i * n, n) = x[static_cast<std::size_t>(i)];
                log.r.err_log.col(t).segment(i * n, n) = x[static_cast<std::size_t>(i)] - x0;
            }
            log.r.x_log.col(t).segment(N * n, n) = x0;
            log.r.w_log.col(t) = w;
            log.r.trigger[static_cast<std::size_t>(t)] = any ? 1 : 0;
            std::vector<Vec> xn = x;
            for (Eigen::Index i = 0; i < N; ++i)
                xn[static_cast<std::size_t>(i)] =
                    plant.A * x[static_cast<std::size_t>(i)] +
                    plant.B * (prep.design.K * z_held[static_cast<std::size_t>(i)]) +
                    Bw * w.segment(i * Bw.cols(), Bw.cols());
            x = xn;
            x0 = plant.A * x0;
        }
        return log.r;
    }

    const auto& spec = std::get<OutputSyncSpec>(sc.controller);
    SyncPrepared prep;
    try {
        prep = prepare_sync(sc, spec);
    } catch (const std::exception& e) {
        return aborted(e.what());
    }
    const Eigen::Index N = prep.graph.followers();
    const Eigen::Index p = spec.H.rows();
    Eigen::Index total_n = spec.S.rows();
    Eigen::Index total_m = 0;
    for (const auto& a : prep.agents) {
        total_n += a.state_dim();
        total_m += a.input_dim();
    }
    Logger log(sc.horizon, total_n, total_m, (N + 1) * p, N * p, 1);

    Vec x0 = spec.leader_x0;
    std::vector<Vec> x;
    for (const auto& aspec : spec.agents) x.push_back(aspec.x0);
    for (Eigen::Index t = 0; t < sc.horizon; ++t) {
        Vec y0 = spec.H * x0;
        std::vector<Vec> eta_now;
        for (const auto& a : prep.agents) eta_now.push_back(a.eta);

        Eigen::Index xoff = 0, uoff = 0;
        for (Eigen::Index i = 0; i < N; ++i) {
            auto& agent = prep.agents[static_cast<std::size_t>(i)];
            Vec y = agent.C * x[static_cast<std::size_t>(i)];
            log.r.y_log.col(t).segment(i * p, p) = y;
            log.r.err_log.col(t).segment(i * p, p) = y - y0;
            Vec u = dist::sync_controller_step(x[static_cast<std::size_t>(i)], agent.eta, agent.K,
                                               agent.Pi, agent.Gamma);
            log.r.u_log.col(t).segment(uoff, agent.input_dim()) = u;
            log.r.x_log.col(t).segment(xoff, agent.state_dim()) = x[static_cast<std::size_t>(i)];
            xoff += agent.state_dim();
            uoff += agent.input_dim();
            x[static_cast<std::size_t>(i)] = agent.A * x[static_cast<std::size_t>(i)] + agent.B * u;
        }
        log.r.x_log.col(t).segment(xoff, spec.S.rows()) = x0;
        log.r.y_log.col(t).segment(N * p, p) = y0;
        log.r.trigger[static_cast<std::size_t>(t)] = 1;

        for (Eigen::Index i = 0; i < N; ++i)
            prep.agents[static_cast<std::size_t>(i)].eta =
                dist::observer_step(eta_now, x0, prep.graph, i, spec.S, prep.F);
        x0 = spec.S * x0;
    }
    return log.r;
}

// ---------------------------------------------------------------------------

Metrics metrics(const SimResult& result) {
    Metrics m;
    const Eigen::Index H = result.horizon();
    if (H == 0) return m;
    double err0 = result.err_log.col(0).norm();
    double band = 1e-3 * std::max(err0, 1e-300);
    for (Eigen::Index t = H - 1; t >= 0; --t) {
        if (result.err_log.col(t).norm() > band) {
            m.settling_time = (t + 1 < H) ? std::optional<Eigen::Index>(t + 1) : std::nullopt;
            break;
        }
        if (t == 0) m.settling_time = 0;
    }
    for (Eigen::Index t = 0; t < H; ++t)
        m.max_state_norm = std::max(m.max_state_norm, result.x_log.col(t).norm());
    m.final_error_norm = result.err_log.col(H - 1).norm();

    std::vector<Eigen::Index> trig_times;
    for (Eigen::Index t = 0; t < H; ++t)
        if (result.trigger[static_cast<std::size_t>(t)]) trig_times.push_back(t);
    m.trigger_count = static_cast<Eigen::Index>(trig_times.size());
    if (trig_times.size() > 1) {
        Eigen::Index total = 0;
        for (std::size_t i = 1; i < trig_times.size(); ++i) {
            Eigen::Index gap = trig_times[i] - trig_times[i - 1];
            total += gap;
            m.max_inter_event = std::max(m.max_inter_event, gap);
        }
        m.mean_inter_event =
            static_cast<double>(total) / static_cast<double>(trig_times.size() - 1);
    }

    double wsq = result.w_log.squaredNorm();
    if (wsq > 0.0) m.l2_gain = result.err_log.squaredNorm() / wsq;

    Eigen::Index last_ok = -1;
    for (Eigen::Index t = 0; t < H; ++t) {
        if (result.dos[static_cast<std::size_t>(t)]) {
            ++m.dos_steps;
        } else {
            m.dos_max_gap = std::max(m.dos_max_gap, t - last_ok);
            last_ok = t;
        }
    }
    for (Eigen::Index t = 1; t < H; ++t)
        if (result.fdi_mode[static_cast<std::size_t>(t)] !=
            result.fdi_mode[static_cast<std::size_t>(t) - 1])
            ++m.fdi_switches;
    return m;
}

std::map<std::string, Mat> synthesize(const Scenario& sc) {
    std::map<std::string, Mat> artifacts;
    if (std::holds_alternative<SwitchedStcSpec>(sc.controller)) {
        auto prep = prepare_switched(sc, std::get<SwitchedStcSpec>(sc.controller));
        if (!prep.design.ok())
            throw std::domain_error("synthesis infeasible: " + prep.design.message);
        artifacts["K"] = prep.design.K;
        artifacts["Omega"] = prep.design.omega;
        artifacts["alpha"] = Mat::Constant(1, 1, prep.design.alpha_used);
    } else if (std::holds_alternative<DistStcSpec>(sc.controller)) {
        auto prep = prepare_dist(sc, std::get<DistStcSpec>(sc.controller));
        if (!prep.design.ok())
            throw std::domain_error("synthesis infeasible: " + prep.design.message);
        artifacts["K"] = prep.design.K;
        artifacts["Phi"] = prep.design.phi;
    } else if (std::holds_alternative<OutputSyncSpec>(sc.controller)) {
        const auto& spec = std::get<OutputSyncSpec>(sc.controller);
        auto prep = prepare_sync(sc, spec);
        artifacts["F"] = prep.F;
        for (std::size_t i = 0; i < prep.agents.size(); ++i) {
            auto tag = std::to_string(i);
            artifacts["K_" + tag] = prep.agents[i].K;
            artifacts["Pi_" + tag] = prep.agents[i].Pi;
            artifacts["Gamma_" + tag] = prep.agents[i].Gamma;
            Mat extras(1, 3);
            extras << prep.bounds[i].first, prep.bounds[i].second,
                lmi::spectral_radius(prep.agents[i].A + prep.agents[i].B * prep.agents[i].K);
            artifacts["residual_bounds_" + tag] = extras;
        }
    } else {
        throw std::invalid_argument("synthesize: controller has no synthesis stage");
    }
    return artifacts;
}

std::optional<Eigen::Index> empirical_maub(const Scenario& scenario, Eigen::Index lo,
                                           Eigen::Index hi) {
    if (lo > hi) throw std::invalid_argument("maub: empty search range");
    auto stable_at = [&](Eigen::Index d) {
        Scenario sc = scenario;
        sc.network.delay = d;
        sc.network.delay_seq.clear();
        auto r = simulate(sc);
        if (r.status != RunStatus::Completed || r.horizon() == 0) return false;
        double e0 = r.err_log.col(0).norm();
        return r.err_log.col(r.horizon() - 1).norm() <= 1e-3 * std::max(e0, 1e-300);
    };
    if (!stable_at(lo)) return std::nullopt;
    Eigen::Index good = lo, bad = hi + 1;
    while (bad - good > 1) {
        Eigen::Index mid = good + (bad - good) / 2;
        if (stable_at(mid))
            good = mid;
        else
            bad = mid;
    }
    return good;
}

// ---------------------------------------------------------------------------
// CSV / JSON emission

void write_result_csv(const SimResult& result, std::ostream& out) {
    const Eigen::Index H = result.horizon();
    out << "step";
    for (Eigen::Index i = 0; i < result.x_log.rows(); ++i) out << ",x_" << i;
    for (Eigen::Index i = 0; i < result.u_log.rows(); ++i) out << ",u_" << i;
    for (Eigen::Index i = 0; i < result.y_log.rows(); ++i) out << ",y_" << i;
    for (Eigen::Index i = 0; i < result.err_log.rows(); ++i) out << ",err_" << i;
    for (Eigen::Index i = 0; i < result.w_log.rows(); ++i) out << ",w_" << i;
    out << ",trigger,dos,fdi_mode,solver,eta\n";
    out << std::setprecision(17);
    for (Eigen::Index t = 0; t < H; ++t) {
        out << t;
        for (Eigen::Index i = 0; i < result.x_log.rows(); ++i) out << "," << result.x_log(i, t);
        for (Eigen::Index i = 0; i < result.u_log.rows(); ++i) out << "," << result.u_log(i, t);
        for (Eigen::Index i = 0; i < result.y_log.rows(); ++i) out << "," << result.y_log(i, t);
        for (Eigen::Index i = 0; i < result.err_log.rows(); ++i) out << "," << result.err_log(i, t);
        for (Eigen::Index i = 0; i < result.w_log.rows(); ++i) out << "," << result.w_log(i, t);
        out << "," << static_cast<int>(result.trigger[static_cast<std::size_t>(t)]) << ","
            << static_cast<int>(result.dos[static_cast<std::size_t>(t)]) << ","
            << result.fdi_mode[static_cast<std::size_t>(t)] << ","
            << result.solver_flag[static_cast<std::size_t>(t)] << "," << result.eta_log(t) << "\n";
    }
}

SimResult read_result_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("result csv: empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto count_prefix = [&](const std::string& prefix) {
        Eigen::Index c = 0;
        for (const auto& h : header)
            if (h.rfind(prefix, 0) == 0) ++c;
        return c;
    };
    const Eigen::Index nx = count_prefix("x_"), nu = count_prefix("u_"), ny = count_prefix("y_"),
                       ne = count_prefix("err_"), nw = count_prefix("w_");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != header.size()) throw std::runtime_error("result csv: ragged row");
        rows.push_back(std::move(row));
    }
    const auto H = static_cast<Eigen::Index>(rows.size());
    SimResult r;
    r.x_log = Mat::Zero(nx, H);
    r.u_log = Mat::Zero(nu, H);
    r.y_log = Mat::Zero(ny, H);
    r.err_log = Mat::Zero(ne, H);
    r.w_log = Mat::Zero(nw, H);
    r.trigger.assign(static_cast<std::size_t>(H), 0);
    r.dos.assign(static_cast<std::size_t>(H), 0);
    r.fdi_mode.assign(static_cast<std::size_t>(H), 0);
    r.solver_flag.assign(static_cast<std::size_t>(H), 0);
    r.eta_log = Vec::Zero(H);
    for (Eigen::Index t = 0; t < H; ++t) {
        const auto& row = rows[static_cast<std::size_t>(t)];
        std::size_t c = 1;
        for (Eigen::Index i = 0; i < nx; ++i) r.x_log(i, t) = row[c++];
        for (Eigen::Index i = 0; i < nu; ++i) r.u_log(i, t) = row[c++];
        for (Eigen::Index i = 0; i < ny; ++i) r.y_log(i, t) = row[c++];
        for (Eigen::Index i = 0; i < ne; ++i) r.err_log(i, t) = row[c++];
        for (Eigen::Index i = 0; i < nw; ++i) r.w_log(i, t) = row[c++];
        r.trigger[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(row[c++]);
        r.dos[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(row[c++]);
        r.fdi_mode[static_cast<std::size_t>(t)] = static_cast<int>(row[c++]);
        r.solver_flag[static_cast<std::size_t>(t)] = static_cast<int>(row[c++]);
        r.eta_log(t) = row[c++];
    }
    return r;
}

void write_metrics_json(const Metrics& m, std::ostream& out) {
    out << std::setprecision(17) << "{\n";
    out << "  \"settling_time\": " << (m.settling_time ? std::to_string(*m.settling_time) : "null")
        << ",\n";
    out << "  \"max_state_norm\": " << m.max_state_norm << ",\n";
    out << "  \"trigger_count\": " << m.trigger_count << ",\n";
    out << "  \"mean_inter_event\": " << m.mean_inter_event << ",\n";
    out << "  \"max_inter_event\": " << m.max_inter_event << ",\n";
    out << "  \"l2_gain\": " << (m.l2_gain ? std::to_string(*m.l2_gain) : "null") << ",\n";
    out << "  \"dos_steps\": " << m.dos_steps << ",\n";
    out << "  \"dos_max_gap\": " << m.dos_max_gap << ",\n";
    out << "  \"fdi_switches\": " << m.fdi_switches << ",\n";
    out << "  \"final_error_norm\": " << m.final_error_norm << "\n";
    out << "}\n";
}

}  // namespace ddn::sim
