#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ambient/network_case.hpp"

namespace ambient {

// WSCC 3-machine 9-bus system. Loads A, B, C (canonical buses 5, 6, 8) are
// dynamic and renumbered 1-3; generator terminals (canonical 1-3) become 7-9.
NetworkCase builtin_wscc9();

// IEEE 39-bus New England system. The ten dynamic loads sit on the first ten
// canonical buses whose scheduled |P| and |Q| both reach 0.1 pu
// (1, 4, 7, 8, 15, 16, 18, 20, 21, 23), renumbered 1-10. Generators keep ids
// 30-39. Bus labels carry the canonical numbers.
NetworkCase builtin_ieee39();

// One dynamic load fed from a near-ideal source, so |V| stays close to 1.
NetworkCase builtin_stiff_bus(double tau_g, double tau_b);

// "wscc9" or "ieee39" resolve to built-ins, anything else is read as a file.
NetworkCase resolve_case(const std::string& name_or_path);

// Steady-state noise intensity such that (P_s sigma)^2 = 0.0025 pu^2.
double noise_intensity_for(double steady_state_demand);

// Structural checks. Throws ConfigError naming the offending element.
void validate_case(const NetworkCase& c);

// Power flow convergence and stability of the exact load linearization.
// Throws NumericalError.
void validate_case_numerics(const NetworkCase& c);

nlohmann::json case_to_json(const NetworkCase& c);
NetworkCase case_from_json(const nlohmann::json& j);

// load_case validates structure and numerics.
NetworkCase load_case(const std::filesystem::path& path);
void save_case(const NetworkCase& c, const std::filesystem::path& path);

}  // namespace ambient
