#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambient/grid.hpp"
#include "ambient/network_case.hpp"
#include "ambient/random.hpp"

namespace ambient {

// Differential states (delta, omega per machine; g, b per dynamic load) and
// algebraic states (v, theta per bus).
struct SystemState {
    Eigen::VectorXd delta;
    Eigen::VectorXd omega;
    Eigen::VectorXd g;
    Eigen::VectorXd b;
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
    double t = 0.0;
};

// Everything the integrator needs, derived once from a case and its power
// flow. Immutable after construction and safe to share between threads.
class NetworkModel {
public:
    explicit NetworkModel(NetworkCase c, const PowerFlowOptions& pf = {});

    [[nodiscard]] const NetworkCase& network_case() const { return case_; }
    [[nodiscard]] const PowerFlowSolution& power_flow() const { return power_flow_; }
    [[nodiscard]] const SystemState& equilibrium() const { return equilibrium_; }

    [[nodiscard]] Eigen::Index bus_count() const { return ybus_.rows(); }
    [[nodiscard]] Eigen::Index generator_count() const { return inertia_.size(); }
    [[nodiscard]] Eigen::Index load_count() const { return tau_g_.size(); }

    // 0-based bus positions.
    [[nodiscard]] const std::vector<Eigen::Index>& generator_positions() const { return gen_pos_; }
    [[nodiscard]] const std::vector<Eigen::Index>& load_positions() const { return load_pos_; }

    [[nodiscard]] const Eigen::VectorXd& inertia() const { return inertia_; }
    [[nodiscard]] const Eigen::VectorXd& damping() const { return damping_; }
    [[nodiscard]] const Eigen::VectorXd& x_d_prime() const { return x_d_prime_; }
    [[nodiscard]] const Eigen::VectorXd& mechanical_power() const { return p_m_; }
    [[nodiscard]] const Eigen::VectorXd& emf() const { return emf_; }
    [[nodiscard]] const Eigen::VectorXd& tau_g() const { return tau_g_; }
    [[nodiscard]] const Eigen::VectorXd& tau_b() const { return tau_b_; }
    [[nodiscard]] const Eigen::VectorXd& p_s() const { return p_s_; }
    [[nodiscard]] const Eigen::VectorXd& q_s() const { return q_s_; }
    [[nodiscard]] const Eigen::VectorXd& sigma_p() const { return sigma_p_; }
    [[nodiscard]] const Eigen::VectorXd& sigma_q() const { return sigma_q_; }

    [[nodiscard]] const Eigen::MatrixXcd& ybus() const { return ybus_; }
    // Static-load admittances plus machine admittances 1/(j x'd), per bus.
    [[nodiscard]] const Eigen::VectorXcd& fixed_shunt() const { return fixed_shunt_; }

    // Network current residual F(V) = (Ybus + shunts + loads) V - I_source.
    [[nodiscard]] Eigen::VectorXcd current_residual(const SystemState& s,
                                                    const Eigen::VectorXcd& v) const;
    // Applies the inverse of dF/dV for the load admittances in `s`.
    [[nodiscard]] Eigen::VectorXcd solve_jacobian(const SystemState& s,
                                                  const Eigen::VectorXcd& rhs) const;

private:
    NetworkCase case_;
    PowerFlowSolution power_flow_;
    SystemState equilibrium_;

    std::vector<Eigen::Index> gen_pos_;
    std::vector<Eigen::Index> load_pos_;
    Eigen::VectorXd inertia_, damping_, x_d_prime_, p_m_, emf_;
    Eigen::VectorXd tau_g_, tau_b_, p_s_, q_s_, sigma_p_, sigma_q_;

    Eigen::MatrixXcd ybus_;
    Eigen::VectorXcd fixed_shunt_;
    // Inverse of the network matrix with loads at their equilibrium
    // admittance; load deviations enter through an m x m capacitance system.
    Eigen::MatrixXcd z_base_;
    Eigen::MatrixXcd z_loads_;       // columns of z_base_ at load buses
    Eigen::MatrixXcd z_load_block_;  // rows and columns at load buses
    Eigen::VectorXcd y_load_base_;
};

struct GeneratorRates {
    Eigen::VectorXd d_delta;
    Eigen::VectorXd d_omega;
};

struct LoadRates {
    Eigen::VectorXd dg;
    Eigen::VectorXd db;
};

// Electrical output of each classical machine for the current algebraic state.
Eigen::VectorXd generator_electrical_power(const SystemState& s, const NetworkModel& model);

// Swing equations: d(delta)/dt = omega, M d(omega)/dt = P_m - P_e - D omega.
GeneratorRates generator_derivatives(const SystemState& s, const NetworkModel& model,
                                     const Eigen::VectorXd& p_electrical);

// Deterministic load recovery: dg/dt = -(g V^2 - P_s)/tau_g, likewise for b.
LoadRates load_drift(const SystemState& s, const NetworkModel& model);

// Independent standard-normal sources for every load and channel.
class LoadNoise {
public:
    LoadNoise(std::uint64_t seed, Eigen::Index load_count);
    double active(Eigen::Index k) { return active_[static_cast<std::size_t>(k)](); }
    double reactive(Eigen::Index k) { return reactive_[static_cast<std::size_t>(k)](); }

private:
    std::vector<GaussianStream> active_;
    std::vector<GaussianStream> reactive_;
};

// Euler-Maruyama diffusion increment (P_s sigma_p / tau_g) sqrt(dt) z.
LoadRates load_noise_increment(const NetworkModel& model, double dt, LoadNoise& noise);

struct AlgebraicOptions {
    double tolerance = 1e-10;
    int max_iterations = 10;
    double min_voltage = 0.3;
};

struct AlgebraicSolution {
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Largest bus power mismatch |V_k conj(F_k)| for the state's own (v, theta).
double network_mismatch(const SystemState& s, const NetworkModel& model);

// Newton solve of the network balance for fixed (delta, g, b), warm-started
// from the state's (v, theta). Throws NumericalError on non-convergence or
// when any voltage falls below min_voltage.
AlgebraicSolution solve_algebraic(const SystemState& s, const NetworkModel& model,
                                  const AlgebraicOptions& options = {});

// One semi-explicit step: omega by forward Euler, delta with the updated
// omega, (g, b) by Euler-Maruyama, then the algebraic solve.
SystemState step(const SystemState& s, const NetworkModel& model, double dt, LoadNoise& noise,
                 const AlgebraicOptions& options = {});

struct SimulationOptions {
    double duration = 1050.0;
    double dt = 0.01;
    std::uint64_t seed = 1;
    int record_stride = 1;  // keep every k-th step
    AlgebraicOptions algebraic;
};

struct Trajectory {
    std::vector<SystemState> states;
    double dt = 0.0;  // spacing of recorded states
    std::uint64_t seed = 0;
    std::string case_id;
    std::vector<int> generator_buses;
    std::vector<int> load_buses;
    int bus_count = 0;

    [[nodiscard]] double duration() const { return states.empty() ? 0.0 : states.back().t; }
};

// Integrates from the power-flow equilibrium. State i is recorded at
// t = i * dt exactly. Deterministic for a given seed.
Trajectory simulate(const NetworkModel& model, const SimulationOptions& options);

// Long-format CSV `t,bus,var,value` plus a JSON sidecar at `<path>.meta.json`.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace ambient
