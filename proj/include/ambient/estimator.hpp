#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambient/dynamics.hpp"
#include "ambient/network_case.hpp"
#include "ambient/pmu.hpp"

namespace ambient {

// Prior-known static behaviour of the monitored loads, one entry per load.
struct LoadStaticCharacteristics {
    Eigen::VectorXd p_s;
    Eigen::VectorXd q_s;
    Eigen::VectorXd sigma_p;
    Eigen::VectorXd sigma_q;

    // Picks the dynamic loads at `buses`, in that order.
    static LoadStaticCharacteristics from_case(const NetworkCase& c, const std::vector<int>& buses);
    void validate() const;
};

struct SampleStatistics {
    Eigen::VectorXd v_bar;  // diagonal of V-bar
    Eigen::MatrixXd q_gg;
    Eigen::MatrixXd q_bb;
    Eigen::Index n = 0;
    double window = 0.0;
};

enum class EstimationMethod { matrix_inverse, diagonal_reciprocal };

const char* to_string(EstimationMethod m);
EstimationMethod estimation_method_from_string(const std::string& s);

struct EstimationDiagnostics {
    // ||offdiag(M)||_F^2 / ||M||_F^2
    double offdiag_energy_qgg = 0.0;
    double offdiag_energy_qbb = 0.0;
    double offdiag_energy_tg = 0.0;
    double offdiag_energy_tb = 0.0;
    double condition_qgg = 0.0;
    double condition_qbb = 0.0;
};

struct EstimationResult {
    std::vector<int> buses;
    Eigen::VectorXd tau_g_hat;
    Eigen::VectorXd tau_b_hat;
    std::vector<bool> valid_g;
    std::vector<bool> valid_b;
    std::vector<std::string> warnings;
    EstimationMethod method = EstimationMethod::matrix_inverse;
    SampleStatistics stats;
    EstimationDiagnostics diagnostics;

    [[nodiscard]] bool all_valid() const;
};

Eigen::VectorXd sample_mean_voltage(const AdmittanceSeries& series);

// Samples with burn_in <= t < burn_in + window (window <= 0 means to the end).
AdmittanceSeries select_window(const AdmittanceSeries& series, double burn_in, double window);

// V-bar, Q_gg and Q_bb over the whole series.
SampleStatistics compute_sample_statistics(const AdmittanceSeries& series);

// matrix_inverse:      T_g = 1/2 (P_s)^2 (Sigma_p)^2 Vbar^-2 Q_gg^-1, tau_g = diag(T_g)
// diagonal_reciprocal: tau_g,k = (P_s,k sigma_p,k)^2 / (2 Vbar_k^2 Q_gg(k,k))
// and likewise for tau_b. Throws NumericalError when the matrix-inverse method
// meets a covariance with condition number above 1e12. Non-positive or
// non-finite estimates are kept but flagged invalid.
EstimationResult estimate_time_constants(const SampleStatistics& stats,
                                         const LoadStaticCharacteristics& chars,
                                         EstimationMethod method = EstimationMethod::matrix_inverse);

// Stationary covariance of (g, b) under the diagonal linearization:
// C_gg = 1/2 T_g^-1 (P_s)^2 (Sigma_p)^2 V^-2, C_bb alike, C_gb = 0.
Eigen::MatrixXd analytic_load_covariance(const Eigen::VectorXd& tau_g,
                                         const Eigen::VectorXd& tau_b,
                                         const LoadStaticCharacteristics& chars,
                                         const Eigen::VectorXd& v);

enum class Linearization { approximate, exact };

// Linear OU model of the load states x = (g, b): dx = A x dt + B dW.
struct LinearizedLoadSystem {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Linearization variant = Linearization::approximate;
};

// approximate: A = blockdiag(-T_g^-1 V^2, -T_b^-1 V^2).
// exact: A = -blockdiag(T_g, T_b)^-1 d(P, Q)/d(g, b) by central differences
// through the algebraic network solve, machine angles held fixed.
// B = blockdiag(T_g^-1 P_s Sigma_p, T_b^-1 Q_s Sigma_q) in both variants.
LinearizedLoadSystem build_linearized_system(const NetworkModel& model,
                                             const SystemState& equilibrium,
                                             Linearization variant);

struct TruthValues {
    Eigen::VectorXd tau_g;
    Eigen::VectorXd tau_b;
};

// Relative error in percent of the actual value.
double percent_error(double actual, double estimate);

// `bus,tau_g_true,tau_g_hat,err_g_pct,tau_b_true,tau_b_hat,err_b_pct`; the
// truth columns are dropped when `truth` is empty.
void write_estimation_csv(const EstimationResult& result, const std::optional<TruthValues>& truth,
                          const std::filesystem::path& path);
std::string format_estimation_table(const EstimationResult& result,
                                    const std::optional<TruthValues>& truth);

}  // namespace ambient
