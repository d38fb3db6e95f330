#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ambient/network_case.hpp"

namespace ambient {

// Nodal admittance Y = G + jB.
struct AdmittanceMatrix {
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;

    [[nodiscard]] Eigen::Index size() const { return G.rows(); }
    [[nodiscard]] Eigen::MatrixXcd complex() const;
};

// Ids must be contiguous 1..N. Parallel branches are summed. A bus with no
// incident branch is rejected unless it is the only bus.
AdmittanceMatrix build_ybus(std::span<const Bus> buses, std::span<const Branch> branches);

struct BusInjections {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

// Net power injected into the network at every bus (generation convention).
// A load's consumption is the negation.
BusInjections bus_injections(const Eigen::VectorXd& v, const Eigen::VectorXd& theta,
                             const AdmittanceMatrix& y);

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 50;
    bool flat_start = true;
};

struct PowerFlowSolution {
    Eigen::VectorXd v;
    Eigen::VectorXd theta;
    Eigen::VectorXd p_injection;
    Eigen::VectorXd q_injection;
    int iterations = 0;
    double max_mismatch = 0.0;

    // Classical-machine operating point, one entry per case generator.
    Eigen::VectorXd machine_angle;
    Eigen::VectorXd machine_emf;
    Eigen::VectorXd mechanical_power;
};

// Scheduled net injections: generator p_m minus static and dynamic demand.
// Reactive entries are meaningful only at load buses.
BusInjections scheduled_injections(const NetworkCase& c);

// Newton-Raphson in polar coordinates. Slack holds V and angle, generator
// buses hold P and V, everything else holds P and Q. Throws NumericalError on
// a singular Jacobian or when max_iterations is exhausted.
PowerFlowSolution solve_power_flow(const NetworkCase& c, const PowerFlowOptions& options = {});

// Sum of branch I^2 R losses plus bus-shunt conductance losses.
double real_power_losses(const NetworkCase& c, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& theta);

}  // namespace ambient
