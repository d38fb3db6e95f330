#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ambient/cases.hpp"
#include "ambient/errors.hpp"
#include "ambient/experiment.hpp"

namespace fs = std::filesystem;
using namespace ambient;

namespace {

fs::path default_out_dir() {
    if (const char* env = std::getenv("AMBIENT_OUT_DIR"); env && *env) return env;
    return "out";
}

// Flags shared by the subcommands. Values only override the config file when
// given on the command line.
struct CommonFlags {
    std::string config_path;
    std::string case_name;
    double duration = 0, dt = 0, rate = 0, window = 0, burn_in = 0, sigma_meas = 0;
    std::string noise_at, method, b_sign;
    std::uint64_t seed = 0;
    std::string out;

    CLI::Option* o_case = nullptr;
    CLI::Option* o_duration = nullptr;
    CLI::Option* o_dt = nullptr;
    CLI::Option* o_rate = nullptr;
    CLI::Option* o_window = nullptr;
    CLI::Option* o_burn_in = nullptr;
    CLI::Option* o_sigma = nullptr;
    CLI::Option* o_noise_at = nullptr;
    CLI::Option* o_method = nullptr;
    CLI::Option* o_b_sign = nullptr;
    CLI::Option* o_seed = nullptr;

    void attach(CLI::App* app, bool with_seed) {
        app->add_option("--config", config_path, "JSON experiment config (flags override it)");
        o_case = app->add_option("--case", case_name, "wscc9, ieee39 or a case JSON file");
        o_duration = app->add_option("--duration", duration, "simulated time, s");
        o_dt = app->add_option("--dt", dt, "integration step, s");
        o_rate = app->add_option("--rate", rate, "PMU reports per second");
        o_window = app->add_option("--window", window, "estimation window, s");
        o_burn_in = app->add_option("--burn-in", burn_in, "samples discarded at the start, s");
        o_sigma = app->add_option("--sigma-meas", sigma_meas, "measurement noise std, pu");
        o_noise_at = app->add_option("--noise-at", noise_at, "phasor or derived");
        o_method = app->add_option("--method", method, "matrix-inverse or diagonal");
        o_b_sign = app->add_option("--b-sign", b_sign, "consumption or imaginary-part");
        if (with_seed) o_seed = app->add_option("--seed", seed, "random seed");
        app->add_option("--out", out, "output directory (default $AMBIENT_OUT_DIR or ./out)");
    }

    ExperimentConfig resolve(ExperimentConfig base) const {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config '" + config_path + "'");
            nlohmann::json j;
            try {
                in >> j;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config '" + config_path + "': " + e.what());
            }
            base = ExperimentConfig::from_json(j);
        }
        if (o_case->count()) base.case_name = case_name;
        if (o_duration->count()) base.duration = duration;
        if (o_dt->count()) base.dt = dt;
        if (o_rate->count()) base.rate = rate;
        if (o_window->count()) base.window = window;
        if (o_burn_in->count()) base.burn_in = burn_in;
        if (o_sigma->count()) base.sigma_meas = sigma_meas;
        if (o_noise_at->count()) base.noise_at = noise_injection_from_string(noise_at);
        if (o_method->count()) base.method = estimation_method_from_string(method);
        if (o_b_sign->count()) {
            if (b_sign == "consumption") base.sign = SusceptanceSign::consumption;
            else if (b_sign == "imaginary-part") base.sign = SusceptanceSign::imaginary_part;
            else throw ConfigError("unknown --b-sign '" + b_sign + "'");
        }
        if (o_seed && o_seed->count()) base.seed = seed;
        return base;
    }

    [[nodiscard]] fs::path out_dir() const { return out.empty() ? default_out_dir() : fs::path(out); }
};

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir, int trajectory_stride) {
    if (!(cfg.duration >= 0.0)) throw ConfigError("duration must be >= 0");
    if (!(cfg.sigma_meas >= 0.0)) throw ConfigError("sigma-meas must be >= 0");
    const int per_report = cfg.steps_per_report();
    if (trajectory_stride <= 0) trajectory_stride = per_report;
    if (per_report % trajectory_stride != 0) {
        throw ConfigError("--trajectory-stride " + std::to_string(trajectory_stride) +
                          " must divide the steps per report (" + std::to_string(per_report) + ")");
    }
    if (cfg.duration == 0.0) {
        std::cerr << "warning: duration is 0, the trajectory holds only the initial equilibrium\n";
    }

    const NetworkModel model(resolve_case(cfg.case_name));
    SimulationOptions sim;
    sim.duration = cfg.duration;
    sim.dt = cfg.dt;
    sim.seed = cfg.seed;
    sim.record_stride = trajectory_stride;
    const Trajectory traj = simulate(model, sim);

    PhasorStream stream = sample_phasors(traj, model.network_case().monitored_buses, cfg.rate);
    if (cfg.noise_at == NoiseInjection::phasor) {
        stream = add_noise(std::move(stream), cfg.sigma_meas, cfg.seed);
    } else if (cfg.sigma_meas > 0.0) {
        std::cerr << "warning: --noise-at derived applies at estimation; phasors are written noiseless\n";
    }

    const fs::path traj_path = out_dir / "trajectory.csv";
    const fs::path phasor_path = out_dir / "phasors.csv";
    write_trajectory_csv(traj, traj_path);
    write_phasor_csv(stream, phasor_path);

    std::printf("case %s: %d buses, %zu dynamic loads, seed %llu\n", traj.case_id.c_str(),
                traj.bus_count, traj.load_buses.size(), static_cast<unsigned long long>(cfg.seed));
    std::printf("simulated %g s at dt %g s, %zu trajectory rows, %lld phasor reports at %g/s\n",
                traj.duration(), cfg.dt, traj.states.size(), static_cast<long long>(stream.size()),
                cfg.rate);
    std::printf("wrote %s\nwrote %s\n", traj_path.string().c_str(), phasor_path.string().c_str());
    return 0;
}

int cmd_estimate(const std::string& phasor_file, ExperimentConfig cfg, bool case_given,
                 bool seed_given, bool no_truth, const fs::path& out_dir) {
    const PhasorStream stream = read_phasor_csv(phasor_file);
    if (!seed_given) cfg.seed = stream.seed;
    if (!case_given) {
        if (stream.case_id.empty()) {
            throw ConfigError("phasor file names no case; pass --case for the static load data");
        }
        cfg.case_name = stream.case_id;
    }
    if (!(cfg.window >= 0.0) || !(cfg.burn_in >= 0.0)) throw ConfigError("window and burn-in must be >= 0");
    const NetworkCase c = resolve_case(cfg.case_name);
    const auto chars = LoadStaticCharacteristics::from_case(c, stream.buses);
    const EstimationResult result = estimate_from_phasors(stream, chars, cfg);

    std::optional<TruthValues> truth;
    if (!no_truth) truth = truth_for(c, stream.buses);
    std::cout << format_estimation_table(result, truth);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    const fs::path path = out_dir / "estimate.csv";
    write_estimation_csv(result, truth, path);
    std::printf("wrote %s\n", path.string().c_str());
    return 0;
}

int cmd_bench(const std::string& table_name, ExperimentConfig overrides, bool case_given,
              std::size_t seeds, std::uint64_t first_seed, unsigned threads, const fs::path& out_dir) {
    const BenchTable table = bench_table_from_string(table_name);
    if (!case_given) overrides.case_name = bench_config(table).case_name;
    if (seeds == 0) throw ConfigError("--seeds must be >= 1");
    const BenchReport report = run_bench(table, seed_range(first_seed, seeds), overrides, threads);
    std::cout << format_bench_table(report);
    const std::string stem = std::string("bench_") + to_string(table);
    const fs::path rows = out_dir / (stem + "_rows.csv");
    const fs::path summary = out_dir / (stem + "_summary.csv");
    write_bench_csv(report, rows, summary);
    std::printf("wrote %s\nwrote %s\n", rows.string().c_str(), summary.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ambient-data estimation of load time constants from PMU phasors"};
    app.require_subcommand(1);

    CommonFlags sim_flags;
    int trajectory_stride = 0;
    auto* sim = app.add_subcommand("simulate", "simulate a case and write trajectory and phasor CSVs");
    sim_flags.attach(sim, true);
    sim->add_option("--trajectory-stride", trajectory_stride,
                    "integration steps per trajectory row (default: one row per PMU report)");

    CommonFlags est_flags;
    std::string phasor_file;
    bool no_truth = false;
    auto* est = app.add_subcommand("estimate", "estimate load time constants from a phasor CSV");
    est->add_option("phasors", phasor_file, "phasor CSV written by simulate")->required();
    est_flags.attach(est, true);
    est->add_flag("--no-truth", no_truth, "omit the true-value and error columns");

    CommonFlags bench_flags;
    std::string table_name;
    std::size_t seeds = 20;
    std::uint64_t first_seed = 1;
    unsigned threads = 0;
    auto* bench = app.add_subcommand("bench", "run a table end to end over a seed sweep");
    bench->add_option("table", table_name, "t1, t2 or t3")->required();
    bench_flags.attach(bench, false);
    bench->add_option("--seeds", seeds, "number of seeds");
    bench->add_option("--first-seed", first_seed, "first seed of the sweep");
    bench->add_option("--threads", threads, "worker threads (0 = hardware concurrency)");

    std::string export_name, export_path;
    auto* exp = app.add_subcommand("export-case", "write a built-in case as JSON");
    exp->add_option("case", export_name, "wscc9 or ieee39")->required();
    exp->add_option("--out", export_path, "destination file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) {
            return cmd_simulate(sim_flags.resolve({}), sim_flags.out_dir(), trajectory_stride);
        }
        if (*est) {
            const bool case_given = est_flags.o_case->count() > 0 || !est_flags.config_path.empty();
            const bool seed_given = est_flags.o_seed->count() > 0;
            return cmd_estimate(phasor_file, est_flags.resolve({}), case_given, seed_given, no_truth,
                                est_flags.out_dir());
        }
        if (*bench) {
            const BenchTable table = bench_table_from_string(table_name);
            const bool case_given = bench_flags.o_case->count() > 0 || !bench_flags.config_path.empty();
            return cmd_bench(table_name, bench_flags.resolve(bench_config(table)), case_given, seeds,
                             first_seed, threads, bench_flags.out_dir());
        }
        if (*exp) {
            save_case(resolve_case(export_name), export_path);
            std::printf("wrote %s\n", export_path.c_str());
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
