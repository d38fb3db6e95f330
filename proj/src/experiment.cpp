#include "ambient/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "ambient/cases.hpp"
#include "ambient/errors.hpp"
#include "text_io.hpp"

namespace ambient {

const char* to_string(NoiseInjection n) { return n == NoiseInjection::phasor ? "phasor" : "derived"; }

NoiseInjection noise_injection_from_string(const std::string& s) {
    if (s == "phasor") return NoiseInjection::phasor;
    if (s == "derived") return NoiseInjection::derived;
    throw ConfigError("unknown noise injection point '" + s + "' (use phasor or derived)");
}

int ExperimentConfig::steps_per_report() const {
    if (!(dt > 0.0) || !(rate > 0.0)) throw ConfigError("dt and rate must be positive");
    const double ratio = 1.0 / (dt * rate);
    const auto steps = std::llround(ratio);
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
        throw ConfigError("rate " + detail::format_double(rate) +
                          " must evenly divide the integration rate 1/dt = " +
                          detail::format_double(1.0 / dt));
    }
    return static_cast<int>(steps);
}

void ExperimentConfig::validate() const {
    if (!(duration >= 0.0)) throw ConfigError("duration must be >= 0");
    if (!(window >= 0.0) || !(burn_in >= 0.0)) throw ConfigError("window and burn-in must be >= 0");
    if (window + burn_in > duration + 1e-9) {
        throw ConfigError("window + burn-in (" + detail::format_double(window + burn_in) +
                          " s) exceeds duration (" + detail::format_double(duration) + " s)");
    }
    if (!(sigma_meas >= 0.0)) throw ConfigError("sigma-meas must be >= 0");
    (void)steps_per_report();
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.case_name = j.value("case", c.case_name);
        c.duration = j.value("duration", c.duration);
        c.dt = j.value("dt", c.dt);
        c.rate = j.value("rate", c.rate);
        c.window = j.value("window", c.window);
        c.burn_in = j.value("burn_in", c.burn_in);
        c.sigma_meas = j.value("sigma_meas", c.sigma_meas);
        c.seed = j.value("seed", c.seed);
        if (j.contains("noise_at")) c.noise_at = noise_injection_from_string(j.at("noise_at"));
        if (j.contains("method")) c.method = estimation_method_from_string(j.at("method"));
        if (j.contains("b_sign")) {
            const std::string s = j.at("b_sign");
            if (s == "consumption") c.sign = SusceptanceSign::consumption;
            else if (s == "imaginary-part") c.sign = SusceptanceSign::imaginary_part;
            else throw ConfigError("unknown b_sign '" + s + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"case", case_name},
            {"duration", duration},
            {"dt", dt},
            {"rate", rate},
            {"window", window},
            {"burn_in", burn_in},
            {"sigma_meas", sigma_meas},
            {"noise_at", to_string(noise_at)},
            {"seed", seed},
            {"method", to_string(method)},
            {"b_sign", sign == SusceptanceSign::consumption ? "consumption" : "imaginary-part"}};
}

PhasorStream synthesize_phasors(const NetworkModel& model, const ExperimentConfig& config) {
    SimulationOptions sim;
    sim.duration = config.duration;
    sim.dt = config.dt;
    sim.seed = config.seed;
    sim.record_stride = config.steps_per_report();
    const Trajectory traj = simulate(model, sim);
    PhasorStream stream = sample_phasors(traj, model.network_case().monitored_buses, config.rate);
    if (config.noise_at == NoiseInjection::phasor) {
        stream = add_noise(std::move(stream), config.sigma_meas, config.seed);
    }
    return stream;
}

EstimationResult estimate_from_phasors(const PhasorStream& stream,
                                       const LoadStaticCharacteristics& chars,
                                       const ExperimentConfig& config) {
    AdmittanceSeries series = recover_admittance(stream, config.sign);
    if (config.noise_at == NoiseInjection::derived) {
        series = add_noise(std::move(series), config.sigma_meas, config.seed);
    }
    const AdmittanceSeries windowed = select_window(series, config.burn_in, config.window);
    const SampleStatistics stats = compute_sample_statistics(windowed);
    EstimationResult result = estimate_time_constants(stats, chars, config.method);
    result.buses = stream.buses;
    return result;
}

TruthValues truth_for(const NetworkCase& c, const std::vector<int>& buses) {
    TruthValues t{Eigen::VectorXd(static_cast<Eigen::Index>(buses.size())),
                  Eigen::VectorXd(static_cast<Eigen::Index>(buses.size()))};
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const auto& load = c.load_at(buses[k]);
        t.tau_g(static_cast<Eigen::Index>(k)) = load.tau_g;
        t.tau_b(static_cast<Eigen::Index>(k)) = load.tau_b;
    }
    return t;
}

BenchTable bench_table_from_string(const std::string& s) {
    if (s == "t1") return BenchTable::t1;
    if (s == "t2") return BenchTable::t2;
    if (s == "t3") return BenchTable::t3;
    throw ConfigError("unknown bench table '" + s + "' (use t1, t2 or t3)");
}

const char* to_string(BenchTable t) {
    switch (t) {
        case BenchTable::t1: return "t1";
        case BenchTable::t2: return "t2";
        case BenchTable::t3: return "t3";
    }
    return "?";
}

ExperimentConfig bench_config(BenchTable table) {
    ExperimentConfig c;
    c.case_name = table == BenchTable::t3 ? "ieee39" : "wscc9";
    c.sigma_meas = table == BenchTable::t2 ? 1e-3 : 0.0;
    return c;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::nan("");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) seeds[i] = first + i;
    return seeds;
}

const BenchLoadSummary& BenchReport::load(int bus, char channel) const {
    for (const auto& l : loads) {
        if (l.bus == bus && l.channel == channel) return l;
    }
    throw ConfigError("bench report has no load at bus " + std::to_string(bus));
}

BenchReport run_bench(BenchTable table, const std::vector<std::uint64_t>& seeds,
                      const ExperimentConfig& config, unsigned threads) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const NetworkModel model(resolve_case(config.case_name));
    const NetworkCase& c = model.network_case();
    const auto chars = LoadStaticCharacteristics::from_case(c, c.monitored_buses);
    const TruthValues truth = truth_for(c, c.monitored_buses);

    BenchReport report;
    report.table = table;
    report.config = config;
    report.seeds = seeds;
    report.results.resize(seeds.size());

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, seeds.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            try {
                ExperimentConfig cfg = config;
                cfg.seed = seeds[i];
                const PhasorStream stream = synthesize_phasors(model, cfg);
                report.results[i] = estimate_from_phasors(stream, chars, cfg);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    const std::string msg =
                        "bench " + std::string(to_string(table)) + ", seed " + std::to_string(seeds[i]) + ": " + e.what();
                    if (dynamic_cast<const ConfigError*>(&e)) {
                        failure = std::make_exception_ptr(ConfigError(msg));
                    } else {
                        failure = std::make_exception_ptr(NumericalError(msg));
                    }
                }
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const auto m = static_cast<Eigen::Index>(c.monitored_buses.size());
    std::vector<double> medians;
    for (const char channel : {'g', 'b'}) {
        for (Eigen::Index k = 0; k < m; ++k) {
            const double actual = channel == 'g' ? truth.tau_g(k) : truth.tau_b(k);
            std::vector<double> errors, estimates;
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                const auto& res = report.results[s];
                const double est = channel == 'g' ? res.tau_g_hat(k) : res.tau_b_hat(k);
                const double err = percent_error(actual, est);
                report.rows.push_back({seeds[s], c.monitored_buses[static_cast<std::size_t>(k)],
                                       channel, actual, est, err});
                errors.push_back(err);
                estimates.push_back(est);
            }
            BenchLoadSummary summary;
            summary.bus = c.monitored_buses[static_cast<std::size_t>(k)];
            summary.channel = channel;
            summary.actual = actual;
            summary.median_estimate = median(estimates);
            summary.median_error_pct = median(errors);
            summary.max_error_pct = *std::max_element(errors.begin(), errors.end());
            medians.push_back(summary.median_error_pct);
            report.loads.push_back(summary);
        }
    }
    report.grand_median_error_pct = median(medians);
    report.max_median_error_pct = *std::max_element(medians.begin(), medians.end());
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

void write_bench_csv(const BenchReport& report, const std::filesystem::path& rows_path,
                     const std::filesystem::path& summary_path) {
    using detail::format_double;
    {
        auto out = detail::open_output(rows_path);
        out << "seed,bus,channel,tau_true,tau_hat,err_pct\n";
        for (const auto& r : report.rows) {
            out << r.seed << ',' << r.bus << ',' << r.channel << ',' << format_double(r.actual) << ','
                << format_double(r.estimate) << ',' << format_double(r.error_pct) << '\n';
        }
    }
    auto out = detail::open_output(summary_path);
    out << "bus,channel,tau_true,median_tau_hat,median_err_pct,max_err_pct\n";
    for (const auto& l : report.loads) {
        out << l.bus << ',' << l.channel << ',' << format_double(l.actual) << ','
            << format_double(l.median_estimate) << ',' << format_double(l.median_error_pct) << ','
            << format_double(l.max_error_pct) << '\n';
    }
}

std::string format_bench_table(const BenchReport& report) {
    std::string out;
    char line[200];
    std::snprintf(line, sizeof(line), "bench %s: case %s, sigma_meas %g, %zu seeds, window %g s\n",
                  to_string(report.table), report.config.case_name.c_str(),
                  report.config.sigma_meas, report.seeds.size(), report.config.window);
    out += line;
    std::snprintf(line, sizeof(line), "%-10s %12s %18s %14s %12s\n", "", "actual (s)",
                  "median est. (s)", "median error", "max error");
    out += line;
    for (const auto& l : report.loads) {
        const std::string name = std::string("tau_") + l.channel + std::to_string(l.bus);
        std::snprintf(line, sizeof(line), "%-10s %12.4f %18.4f %13.2f%% %11.2f%%\n", name.c_str(),
                      l.actual, l.median_estimate, l.median_error_pct, l.max_error_pct);
        out += line;
    }
    std::snprintf(line, sizeof(line), "grand median error %.2f%%, worst per-load median %.2f%%, %.1f s\n",
                  report.grand_median_error_pct, report.max_median_error_pct,
                  report.runtime_seconds);
    out += line;
    return out;
}

}  // namespace ambient
