#include "ddn/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace ddn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolverFailure = 3;

void write_matrix_csv(const Mat& m, const fs::path& path) {
    std::ofstream out(path);
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << "\n";
    }
}

int cmd_synth(const std::string& config, const std::string& out_dir, double tol) {
    sim::Scenario sc;
    try {
        sc = sim::scenario_from_json_file(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::map<std::string, Mat> artifacts;
    try {
        artifacts = sim::synthesize(sc);
    } catch (const std::domain_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolverFailure;
    }
    fs::create_directories(out_dir);
    nlohmann::json cert;
    cert["scenario"] = sc.id;
    cert["artifacts"] = nlohmann::json::array();
    for (const auto& [name, mat] : artifacts) {
        auto file = fs::path(out_dir) / (sc.id + "." + name + ".csv");
        write_matrix_csv(mat, file);
        cert["artifacts"].push_back(name);
        // Triggering matrices must come out positive definite.
        if ((name == "Omega" || name == "Phi") && min_eigenvalue(mat) < tol) {
            std::cerr << "error: designed " << name << " is not positive definite\n";
            return kExitSolverFailure;
        }
    }
    cert["status"] = "feasible";
    std::ofstream certf(fs::path(out_dir) / (sc.id + ".certificates.json"));
    certf << cert.dump(2) << "\n";
    std::cout << "wrote " << artifacts.size() << " artifacts to " << out_dir << "\n";
    return kExitOk;
}

int run_one_simulation(const std::string& config, const std::string& out_dir,
                       std::optional<std::uint64_t> seed, std::mutex& io) {
    sim::Scenario sc;
    try {
        sc = sim::scenario_from_json_file(config);
    } catch (const std::exception& e) {
        std::scoped_lock lk(io);
        std::cerr << "error: " << config << ": " << e.what() << "\n";
        return kExitUsage;
    }
    if (seed) sc.seed = *seed;
    sim::SimResult result;
    try {
        result = sim::simulate(sc);
    } catch (const std::exception& e) {
        std::scoped_lock lk(io);
        std::cerr << "error: " << config << ": " << e.what() << "\n";
        return kExitSolverFailure;
    }
    if (result.status != sim::RunStatus::Completed) {
        std::scoped_lock lk(io);
        std::cerr << "aborted: " << config << ": " << result.message << "\n";
        return kExitSolverFailure;
    }
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / (sc.id + ".csv"));
        sim::write_result_csv(result, csv);
    }
    {
        std::ofstream mj(fs::path(out_dir) / (sc.id + ".metrics.json"));
        sim::write_metrics_json(sim::metrics(result), mj);
    }
    std::scoped_lock lk(io);
    std::cout << sc.id << ": " << result.horizon() << " steps, final error "
              << sim::metrics(result).final_error_norm << "\n";
    return kExitOk;
}

int cmd_simulate(const std::vector<std::string>& configs, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, int jobs) {
    std::mutex io;
    std::vector<int> codes(configs.size(), kExitOk);
    if (jobs <= 1 || configs.size() <= 1) {
        for (std::size_t i = 0; i < configs.size(); ++i)
            codes[i] = run_one_simulation(configs[i], out_dir, seed, io);
    } else {
        std::size_t next = 0;
        std::mutex qmx;
        auto worker = [&]() {
            for (;;) {
                std::size_t i;
                {
                    std::scoped_lock lk(qmx);
                    if (next >= configs.size()) return;
                    i = next++;
                }
                codes[i] = run_one_simulation(configs[i], out_dir, seed, io);
            }
        };
        std::vector<std::thread> pool;
        for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    int worst = kExitOk;
    for (int c : codes) worst = std::max(worst, c);
    return worst;
}

int cmd_attack_gen(const std::string& type, Eigen::Index length, std::uint64_t seed,
                   double aggressiveness, const std::string& out_file, double kf, double nf,
                   double kd, double nd, Eigen::Index m, double phi, Eigen::Index kappa,
                   Eigen::Index tau) {
    std::ofstream out(out_file);
    if (!out) {
        std::cerr << "error: cannot open '" << out_file << "'\n";
        return kExitUsage;
    }
    try {
        if (type == "dos") {
            resilient::DoSModel model(kf, nf, kd, nd);
            auto trace = resilient::dos_trace_generate(model, length, seed, aggressiveness);
            out << "t,dos\n";
            for (Eigen::Index t = 0; t < length; ++t)
                out << t << "," << static_cast<int>(trace.k[static_cast<std::size_t>(t)]) << "\n";
        } else if (type == "fdi") {
            auto model = resilient::FdiModel::random(m, 1, phi, kappa, tau, seed);
            auto sigma = resilient::fdi_switch_signal(model, length, seed + 1, aggressiveness);
            out << "t,fdi_mode\n";
            for (Eigen::Index t = 0; t < length; ++t)
                out << t << "," << sigma[static_cast<std::size_t>(t)] << "\n";
        } else {
            std::cerr << "error: unknown attack type '" << type << "'\n";
            return kExitUsage;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::cout << "wrote " << out_file << "\n";
    return kExitOk;
}

int cmd_report(const std::string& dir, const std::string& out_file) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        if (name.size() > 13 && name.substr(name.size() - 13) == ".metrics.json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::ofstream out(out_file);
    out << "scenario,settling_time,max_state_norm,trigger_count,mean_inter_event,max_inter_event,"
           "l2_gain,dos_steps,dos_max_gap,fdi_switches,final_error_norm\n";
    for (const auto& f : files) {
        std::ifstream in(f);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const std::exception& e) {
            std::cerr << "error: " << f << ": " << e.what() << "\n";
            return kExitUsage;
        }
        auto name = f.filename().string();
        name = name.substr(0, name.size() - 13);
        auto cell = [&](const char* key) {
            return j[key].is_null() ? std::string("") : j[key].dump();
        };
        out << name << "," << cell("settling_time") << "," << cell("max_state_norm") << ","
            << cell("trigger_count") << "," << cell("mean_inter_event") << ","
            << cell("max_inter_event") << "," << cell("l2_gain") << "," << cell("dos_steps") << ","
            << cell("dos_max_gap") << "," << cell("fdi_switches") << ","
            << cell("final_error_norm") << "\n";
    }
    std::cout << "aggregated " << files.size() << " runs into " << out_file << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"data-driven networked control toolbox"};
    app.require_subcommand(1);

    std::string out_dir = "out";
    std::string config;
    std::vector<std::string> configs;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto* synth = app.add_subcommand("synth", "synthesise gains from a scenario config");
    synth->add_option("config", config, "scenario JSON")->required();
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--tol", tol, "certification tolerance");

    auto* simcmd = app.add_subcommand("simulate", "run closed-loop scenarios");
    simcmd->add_option("configs", configs, "scenario JSON files")->required();
    simcmd->add_option("--out", out_dir, "output directory");
    std::uint64_t seed_val = 0;
    auto* seed_opt = simcmd->add_option("--seed", seed_val, "override the run seed");
    simcmd->add_option("--jobs", jobs, "parallel scenarios");

    auto* atk = app.add_subcommand("attack-gen", "generate admissible attack schedules");
    std::string atk_type = "dos", atk_out = "attack.csv";
    Eigen::Index length = 100, atk_m = 1, atk_kappa = 1, atk_tau = 10;
    std::uint64_t atk_seed = 1;
    double aggressiveness = 1.0, kf = 1.0, nf = 4.0, kd = 1.0, nd = 4.0, phi = 0.1;
    atk->add_option("--type", atk_type, "dos | fdi");
    atk->add_option("--length", length, "schedule length");
    atk->add_option("--seed", atk_seed, "rng seed");
    atk->add_option("--aggressiveness", aggressiveness, "0..1");
    atk->add_option("--out", atk_out, "output CSV");
    atk->add_option("--kappa-f", kf, "DoS frequency allowance");
    atk->add_option("--nu-f", nf, "DoS frequency rate");
    atk->add_option("--kappa-d", kd, "DoS duration allowance");
    atk->add_option("--nu-d", nd, "DoS duration rate");
    atk->add_option("--channels", atk_m, "FDI actuator channels");
    atk->add_option("--phi", phi, "FDI power bound");
    atk->add_option("--kappa", atk_kappa, "FDI chatter bound");
    atk->add_option("--tau", atk_tau, "FDI dwell parameter");

    auto* rep = app.add_subcommand("report", "aggregate metrics JSONs into one CSV");
    std::string rep_dir, rep_out = "report.csv";
    rep->add_option("dir", rep_dir, "results directory")->required();
    rep->add_option("--out", rep_out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (*seed_opt) seed = seed_val;
    if (synth->parsed()) return cmd_synth(config, out_dir, tol);
    if (simcmd->parsed()) return cmd_simulate(configs, out_dir, seed, jobs);
    if (atk->parsed())
        return cmd_attack_gen(atk_type, length, atk_seed, aggressiveness, atk_out, kf, nf, kd, nd,
                              atk_m, phi, atk_kappa, atk_tau);
    if (rep->parsed()) return cmd_report(rep_dir, rep_out);
    return kExitUsage;
}
