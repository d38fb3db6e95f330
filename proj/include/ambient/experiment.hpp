#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ambient/dynamics.hpp"
#include "ambient/estimator.hpp"
#include "ambient/pmu.hpp"

namespace ambient {

// Where measurement noise enters: on the rectangular phasor components, or
// directly on the recovered g, b and |V|.
enum class NoiseInjection { phasor, derived };

const char* to_string(NoiseInjection n);
NoiseInjection noise_injection_from_string(const std::string& s);

struct ExperimentConfig {
    std::string case_name = "wscc9";
    double duration = 1050.0;
    double dt = 0.01;
    double rate = 20.0;
    double window = 1000.0;
    double burn_in = 50.0;
    double sigma_meas = 0.0;
    NoiseInjection noise_at = NoiseInjection::phasor;
    std::uint64_t seed = 1;
    EstimationMethod method = EstimationMethod::matrix_inverse;
    SusceptanceSign sign = SusceptanceSign::consumption;

    // Throws ConfigError.
    void validate() const;
    // Integration steps per PMU report.
    [[nodiscard]] int steps_per_report() const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
};

// Simulates the case and returns the monitored buses' phasors at the report
// rate, with phasor-level noise applied when configured.
PhasorStream synthesize_phasors(const NetworkModel& model, const ExperimentConfig& config);

// Admittance recovery, optional derived-level noise, burn-in and window
// selection, then the closed-form estimate.
EstimationResult estimate_from_phasors(const PhasorStream& stream,
                                       const LoadStaticCharacteristics& chars,
                                       const ExperimentConfig& config);

TruthValues truth_for(const NetworkCase& c, const std::vector<int>& buses);

enum class BenchTable { t1, t2, t3 };

BenchTable bench_table_from_string(const std::string& s);
const char* to_string(BenchTable t);

// t1: 9-bus noiseless, t2: 9-bus with 1e-3 phasor noise, t3: 39-bus noiseless.
ExperimentConfig bench_config(BenchTable table);

struct BenchRow {
    std::uint64_t seed = 0;
    int bus = 0;
    char channel = 'g';
    double actual = 0.0;
    double estimate = 0.0;
    double error_pct = 0.0;
};

struct BenchLoadSummary {
    int bus = 0;
    char channel = 'g';
    double actual = 0.0;
    double median_estimate = 0.0;
    double median_error_pct = 0.0;
    double max_error_pct = 0.0;
};

struct BenchReport {
    BenchTable table = BenchTable::t1;
    ExperimentConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<EstimationResult> results;  // one per seed, in seed order
    std::vector<BenchRow> rows;
    std::vector<BenchLoadSummary> loads;
    double grand_median_error_pct = 0.0;  // median over loads of per-load medians
    double max_median_error_pct = 0.0;
    double runtime_seconds = 0.0;

    [[nodiscard]] const BenchLoadSummary& load(int bus, char channel) const;
};

double median(std::vector<double> values);

// Runs the full pipeline for every seed (concurrently when threads > 1) and
// aggregates. Results are ordered by seed regardless of completion order.
BenchReport run_bench(BenchTable table, const std::vector<std::uint64_t>& seeds,
                      const ExperimentConfig& config, unsigned threads = 0);

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

void write_bench_csv(const BenchReport& report, const std::filesystem::path& rows_path,
                     const std::filesystem::path& summary_path);
std::string format_bench_table(const BenchReport& report);

}  // namespace ambient
