#include "ddn/scenario.hpp"

#include <json.hpp>

#include <fstream>

namespace ddn::sim {

using nlohmann::json;

void Scenario::validate() const {
    if (horizon < 1) throw std::invalid_argument("scenario: horizon must be >= 1");
    const bool is_mas = std::holds_alternative<DistStcSpec>(controller) ||
                        std::holds_alternative<OutputSyncSpec>(controller);
    if (!is_mas) {
        if (plant.A.rows() != plant.A.cols()) throw std::invalid_argument("scenario: A must be square");
        if (plant.B.rows() != plant.A.rows()) throw std::invalid_argument("scenario: B row mismatch");
        if (plant.x0.size() != plant.A.rows()) throw std::invalid_argument("scenario: x0 dimension mismatch");
        if (plant.C && plant.C->cols() != plant.A.rows())
            throw std::invalid_argument("scenario: C column mismatch");
    }
    if (std::holds_alternative<FdiOnlineSpec>(controller)) {
        if (network.max_delay() > 0)
            throw std::invalid_argument("scenario: the online FDI loop assumes a delay-free channel");
        if (network.dos)
            throw std::invalid_argument("scenario: the online FDI loop assumes an unblocked state channel");
    }
    if (is_mas && (network.dos || network.fdi || network.max_delay() > 0))
        throw std::invalid_argument("scenario: network effects are not modelled for multi-agent runs");
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error("config " + path + ": " + what);
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) fail(path, "unknown key '" + it.key() + "'");
    }
}

Mat parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array()) {
        // Flat array reads as a single row.
        Mat m(1, rows);
        for (Eigen::Index i = 0; i < rows; ++i) m(0, i) = j[static_cast<std::size_t>(i)].get<double>();
        return m;
    }
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            fail(path, "ragged matrix rows");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

Vec parse_vector(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

PlantSpec parse_plant(const json& j) {
    reject_unknown(j, "plant", {"A", "B", "C", "Bw", "x0", "w_bar", "v_bar"});
    PlantSpec p;
    if (!j.contains("A") || !j.contains("B")) fail("plant", "A and B are required");
    p.A = parse_matrix(j["A"], "plant.A");
    p.B = parse_matrix(j["B"], "plant.B");
    if (j.contains("C")) p.C = parse_matrix(j["C"], "plant.C");
    if (j.contains("Bw")) p.B_w = parse_matrix(j["Bw"], "plant.Bw");
    p.x0 = j.contains("x0") ? parse_vector(j["x0"], "plant.x0") : Vec(Vec::Zero(p.A.rows()));
    p.w_bar = j.value("w_bar", 0.0);
    p.v_bar = j.value("v_bar", 0.0);
    return p;
}

DataSpec parse_data(const json& j) {
    reject_unknown(j, "data", {"T", "excitation", "damping", "w_bar", "seed"});
    DataSpec d;
    d.T = j.value("T", 30);
    d.excitation = j.value("excitation", 1.0);
    d.damping = j.value("damping", 0.0);
    d.w_bar = j.value("w_bar", -1.0);
    d.seed = j.value("seed", 1u);
    return d;
}

ControllerSpec parse_controller(const json& j) {
    if (!j.contains("type")) fail("controller", "missing 'type'");
    const std::string type = j["type"].get<std::string>();

    if (type == "static_gain") {
        reject_unknown(j, "controller", {"type", "K"});
        StaticGainSpec s;
        s.K = parse_matrix(j.at("K"), "controller.K");
        return s;
    }
    if (type == "ets") {
        reject_unknown(j, "controller",
                       {"type", "K", "omega", "h", "sigma1", "sigma2", "theta", "lambda", "eta0"});
        EtsSpec s;
        s.K = parse_matrix(j.at("K"), "controller.K");
        Mat omega = parse_matrix(j.at("omega"), "controller.omega");
        Eigen::Index h = j.value("h", 1);
        s.cfg = aperiodic::EtsConfig(h, 1, std::max<Eigen::Index>(h, 1), j.value("sigma1", 0.0),
                                     j.value("sigma2", 0.0), omega, j.value("theta", 2.0),
                                     j.value("lambda", 0.25), j.value("eta0", 0.0));
        return s;
    }
    if (type == "stc_mpc_state") {
        reject_unknown(j, "controller", {"type", "K", "L", "lambda_g", "lambda_h", "v_bar", "Q",
                                         "sigma", "rho_samples"});
        StcStateSpec s;
        s.K = parse_matrix(j.at("K"), "controller.K");
        s.cfg.L = j.value("L", 4);
        s.cfg.lambda_g = j.value("lambda_g", 1.0);
        s.cfg.lambda_h = j.value("lambda_h", 1.0);
        s.cfg.v_bar = j.value("v_bar", 0.0);
        s.cfg.Q = parse_matrix(j.at("Q"), "controller.Q");
        s.cfg.sigma = j.value("sigma", 0.5);
        s.rho_samples = j.value("rho_samples", 256);
        return s;
    }
    if (type == "stc_mpc_output") {
        reject_unknown(j, "controller",
                       {"type", "L", "eta_obs", "lambda_g", "lambda_h", "v_bar", "Q", "R", "P",
                        "K_terminal", "r", "eps", "sigma", "u_min", "u_max"});
        StcOutputSpec s;
        s.cfg.L = j.value("L", 4);
        s.cfg.eta_obs = j.value("eta_obs", 1);
        s.cfg.lambda_g = j.value("lambda_g", 1.0);
        s.cfg.lambda_h = j.value("lambda_h", 1.0);
        s.cfg.v_bar = j.value("v_bar", 0.0);
        s.cfg.Q = parse_matrix(j.at("Q"), "controller.Q");
        s.cfg.R = parse_matrix(j.at("R"), "controller.R");
        s.cfg.P = parse_matrix(j.at("P"), "controller.P");
        s.cfg.K_terminal = parse_matrix(j.at("K_terminal"), "controller.K_terminal");
        s.cfg.r = j.value("r", 1.0);
        s.cfg.eps = j.value("eps", 1.0);
        s.cfg.sigma = j.value("sigma", 0.5);
        if (j.contains("u_min")) s.cfg.u_min = parse_vector(j["u_min"], "controller.u_min");
        if (j.contains("u_max")) s.cfg.u_max = parse_vector(j["u_max"], "controller.u_max");
        return s;
    }
    if (type == "switched_stc") {
        reject_unknown(j, "controller",
                       {"type", "s_max", "sigma1", "sigma2", "alpha", "lift_growth"});
        SwitchedStcSpec s;
        s.s_max = j.value("s_max", 3);
        s.sigma1 = j.value("sigma1", 0.05);
        s.sigma2 = j.value("sigma2", 0.05);
        if (j.contains("alpha")) s.alpha = j["alpha"].get<double>();
        s.lift_growth = j.value("lift_growth", 0.0);
        return s;
    }
    if (type == "dos_mpc_state") {
        reject_unknown(j, "controller",
                       {"type", "L", "R1", "R2", "lambda_g", "lambda_h", "u_min", "u_max"});
        DosMpcStateSpec s;
        s.L = j.value("L", 6);
        s.weights.R1 = parse_matrix(j.at("R1"), "controller.R1");
        s.weights.R2 = parse_matrix(j.at("R2"), "controller.R2");
        s.weights.lambda_g = j.value("lambda_g", 1.0);
        s.weights.lambda_h = j.value("lambda_h", 1.0);
        if (j.contains("u_min")) s.weights.u_min = parse_vector(j["u_min"], "controller.u_min");
        if (j.contains("u_max")) s.weights.u_max = parse_vector(j["u_max"], "controller.u_max");
        return s;
    }
    if (type == "fdi_online") {
        reject_unknown(j, "controller", {"type", "eps_reg", "b_norm_bound"});
        FdiOnlineSpec s;
        s.eps_reg = j.value("eps_reg", 1e-3);
        s.b_norm_bound = j.value("b_norm_bound", 0.0);
        return s;
    }
    if (type == "dist_stc") {
        reject_unknown(j, "controller",
                       {"type", "adjacency", "pinning", "sigma", "s_max", "eps_scalar",
                        "lift_growth"});
        DistStcSpec s;
        s.adjacency = parse_matrix(j.at("adjacency"), "controller.adjacency");
        s.pinning = parse_vector(j.at("pinning"), "controller.pinning");
        s.sigma = j.value("sigma", 0.05);
        s.s_max = j.value("s_max", 3);
        if (j.contains("eps_scalar")) s.eps_scalar = j["eps_scalar"].get<double>();
        s.lift_growth = j.value("lift_growth", 0.0);
        return s;
    }
    if (type == "output_sync") {
        reject_unknown(j, "controller",
                       {"type", "adjacency", "pinning", "S", "H", "leader_x0", "agents",
                        "noise_vertex"});
        OutputSyncSpec s;
        s.adjacency = parse_matrix(j.at("adjacency"), "controller.adjacency");
        s.pinning = parse_vector(j.at("pinning"), "controller.pinning");
        s.S = parse_matrix(j.at("S"), "controller.S");
        s.H = parse_matrix(j.at("H"), "controller.H");
        s.leader_x0 = parse_vector(j.at("leader_x0"), "controller.leader_x0");
        s.noise_vertex = j.value("noise_vertex", 1e-6);
        if (!j.contains("agents") || !j["agents"].is_array())
            fail("controller.agents", "expected an array of agents");
        for (std::size_t i = 0; i < j["agents"].size(); ++i) {
            const auto& ja = j["agents"][i];
            std::string path = "controller.agents[" + std::to_string(i) + "]";
            reject_unknown(ja, path, {"A", "B", "C", "x0"});
            SyncAgentSpec a;
            a.A = parse_matrix(ja.at("A"), path + ".A");
            a.B = parse_matrix(ja.at("B"), path + ".B");
            a.C = parse_matrix(ja.at("C"), path + ".C");
            a.x0 = ja.contains("x0") ? parse_vector(ja["x0"], path + ".x0")
                                     : Vec(Vec::Zero(a.A.rows()));
            s.agents.push_back(std::move(a));
        }
        return s;
    }
    fail("controller.type", "unknown controller '" + type + "'");
}

NetworkSpec parse_network(const json& j) {
    reject_unknown(j, "network", {"delay", "delay_seq", "dos", "fdi"});
    NetworkSpec n;
    n.delay = j.value("delay", 0);
    if (j.contains("delay_seq"))
        for (const auto& v : j["delay_seq"]) n.delay_seq.push_back(v.get<Eigen::Index>());
    if (j.contains("dos")) {
        const auto& jd = j["dos"];
        reject_unknown(jd, "network.dos",
                       {"kappa_f", "nu_f", "kappa_d", "nu_d", "aggressiveness", "seed"});
        n.dos = resilient::DoSModel(jd.value("kappa_f", 0.0), jd.value("nu_f", 2.0),
                                    jd.value("kappa_d", 0.0), jd.value("nu_d", 1.0));
        n.dos_aggressiveness = jd.value("aggressiveness", 1.0);
        n.dos_seed = jd.value("seed", 1u);
    }
    if (j.contains("fdi")) {
        const auto& jf = j["fdi"];
        reject_unknown(jf, "network.fdi", {"phi", "kappa", "tau", "seed", "aggressiveness"});
        FdiNetworkSpec f;
        f.phi = jf.value("phi", 0.1);
        f.kappa = jf.value("kappa", 1);
        f.tau = jf.value("tau", 10);
        f.seed = jf.value("seed", 1u);
        f.aggressiveness = jf.value("aggressiveness", 0.3);
        n.fdi = f;
    }
    return n;
}

}  // namespace

Scenario scenario_from_json(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    reject_unknown(j, "$", {"version", "plant", "data", "controller", "network", "run"});
    if (!j.contains("version") || j["version"].get<int>() != 1)
        fail("$.version", "expected version 1");
    if (!j.contains("controller")) fail("$", "missing controller section");

    Scenario sc;
    sc.controller = parse_controller(j["controller"]);
    if (j.contains("plant")) {
        sc.plant = parse_plant(j["plant"]);
    } else if (std::holds_alternative<OutputSyncSpec>(sc.controller)) {
        // Output synchronization carries its plants per agent.
        sc.plant.A = Mat::Identity(1, 1);
        sc.plant.B = Mat::Identity(1, 1);
        sc.plant.x0 = Vec::Zero(1);
    } else {
        fail("$", "missing plant section");
    }
    if (j.contains("data")) sc.data = parse_data(j["data"]);
    if (j.contains("network")) sc.network = parse_network(j["network"]);
    if (j.contains("run")) {
        const auto& jr = j["run"];
        reject_unknown(jr, "run", {"horizon", "seed", "id"});
        sc.horizon = jr.value("horizon", 500);
        sc.seed = jr.value("seed", 1u);
        sc.id = jr.value("id", std::string("scenario"));
    }
    sc.validate();
    return sc;
}

Scenario scenario_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return scenario_from_json(in);
}

}  // namespace ddn::sim
