#pragma once

#include <string>
#include <vector>

namespace ambient {

enum class BusKind { slack, generator, load_dynamic, load_static };

// Static description of a bus. Voltage magnitude is the setpoint for slack and
// generator buses and the initial guess elsewhere.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::load_static;
    std::string label;
    double voltage_magnitude = 1.0;
    double initial_angle = 0.0;
    double p_load = 0.0;   // constant-impedance static demand, pu
    double q_load = 0.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;

    bool operator==(const Bus&) const = default;
};

// Pi-model branch. Series admittance is g + jb; shunt_susceptance is the total
// line charging, split evenly between the ends. An off-nominal tap sits on the
// from side.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double series_conductance = 0.0;
    double series_susceptance = 0.0;
    double shunt_susceptance = 0.0;
    double tap = 1.0;

    bool operator==(const Branch&) const = default;

    // Convenience for tabulated r, x data.
    static Branch from_impedance(int from, int to, double r, double x, double charging = 0.0,
                                 double tap = 1.0);
};

// Classical machine: EMF behind transient reactance. p_m is the scheduled
// mechanical power (ignored for the slack machine, whose output comes from
// the power flow).
struct GeneratorParams {
    int bus = 0;
    double inertia = 0.0;   // M, pu*s^2/rad
    double damping = 0.0;   // D, pu*s/rad
    double x_d_prime = 0.0;
    double p_m = 0.0;

    bool operator==(const GeneratorParams&) const = default;
};

// First-order recovery load with Gaussian perturbation of its steady-state demand.
struct DynamicLoadParams {
    int bus = 0;
    double tau_g = 1.0;
    double tau_b = 1.0;
    double p_s = 0.0;
    double q_s = 0.0;
    double sigma_p = 0.0;
    double sigma_q = 0.0;

    bool operator==(const DynamicLoadParams&) const = default;
};

struct NetworkCase {
    std::string name;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<GeneratorParams> generators;
    std::vector<DynamicLoadParams> dynamic_loads;
    std::vector<int> monitored_buses;

    bool operator==(const NetworkCase&) const = default;

    [[nodiscard]] int bus_count() const { return static_cast<int>(buses.size()); }
    [[nodiscard]] int load_count() const { return static_cast<int>(dynamic_loads.size()); }
    [[nodiscard]] const DynamicLoadParams& load_at(int bus) const;
};

const char* to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& s);

}  // namespace ambient
