#include "ambient/cases.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "ambient/dynamics.hpp"
#include "ambient/errors.hpp"
#include "ambient/estimator.hpp"
#include "ambient/lyapunov.hpp"
#include "text_io.hpp"

namespace ambient {

namespace {

constexpr double kSystemFrequency = 60.0;
constexpr double kNoiseProduct = 0.05;  // P_s * sigma_p, so the square is 0.0025
// Uniform damping-to-inertia ratio (1/s) for every machine.
constexpr double kDampingRatio = 2.0;

double inertia_from_h(double h) { return 2.0 * h / (2.0 * std::numbers::pi * kSystemFrequency); }

GeneratorParams machine(int bus, double h, double x_d_prime, double p_m) {
    const double m = inertia_from_h(h);
    return GeneratorParams{bus, m, kDampingRatio * m, x_d_prime, p_m};
}

DynamicLoadParams dynamic_load(int bus, double tau_g, double tau_b, double p, double q) {
    return DynamicLoadParams{bus, tau_g, tau_b, p, q, noise_intensity_for(p), noise_intensity_for(q)};
}

}  // namespace

double noise_intensity_for(double steady_state_demand) {
    return kNoiseProduct / std::abs(steady_state_demand);
}

NetworkCase builtin_wscc9() {
    NetworkCase c;
    c.name = "wscc9";
    // id: label (canonical bus), kind, |V| setpoint
    const std::array<std::pair<const char*, BusKind>, 9> layout{{
        {"5", BusKind::load_dynamic},
        {"6", BusKind::load_dynamic},
        {"8", BusKind::load_dynamic},
        {"4", BusKind::load_static},
        {"7", BusKind::load_static},
        {"9", BusKind::load_static},
        {"1", BusKind::slack},
        {"2", BusKind::generator},
        {"3", BusKind::generator},
    }};
    const std::array<double, 9> v_set{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.04, 1.025, 1.025};
    for (int i = 0; i < 9; ++i) {
        Bus bus;
        bus.id = i + 1;
        bus.label = layout[static_cast<std::size_t>(i)].first;
        bus.kind = layout[static_cast<std::size_t>(i)].second;
        bus.voltage_magnitude = v_set[static_cast<std::size_t>(i)];
        c.buses.push_back(bus);
    }
    c.branches = {
        Branch::from_impedance(7, 4, 0.0, 0.0576),
        Branch::from_impedance(8, 5, 0.0, 0.0625),
        Branch::from_impedance(9, 6, 0.0, 0.0586),
        Branch::from_impedance(4, 1, 0.010, 0.085, 0.176),
        Branch::from_impedance(4, 2, 0.017, 0.092, 0.158),
        Branch::from_impedance(1, 5, 0.032, 0.161, 0.306),
        Branch::from_impedance(2, 6, 0.039, 0.170, 0.358),
        Branch::from_impedance(5, 3, 0.0085, 0.072, 0.149),
        Branch::from_impedance(3, 6, 0.0119, 0.1008, 0.209),
    };
    c.generators = {
        machine(7, 23.64, 0.0608, 0.0),
        machine(8, 6.40, 0.1198, 1.63),
        machine(9, 3.01, 0.1813, 0.85),
    };
    c.dynamic_loads = {
        dynamic_load(1, 1.0, 5.0, 1.25, 0.50),
        dynamic_load(2, 3.0, 7.0, 0.90, 0.30),
        dynamic_load(3, 0.2, 0.8, 1.00, 0.35),
    };
    c.monitored_buses = {1, 2, 3};
    return c;
}

NetworkCase builtin_ieee39() {
    // Canonical New England loads (MW, MVAr); buses not listed carry no load.
    const std::map<int, std::pair<double, double>> loads{
        {1, {97.6, 44.2}},    {3, {322.0, 2.4}},    {4, {500.0, 184.0}},  {7, {233.8, 84.0}},
        {8, {522.0, 176.6}},  {9, {6.5, -66.6}},    {12, {8.53, 88.0}},   {15, {320.0, 153.0}},
        {16, {329.0, 32.3}},  {18, {158.0, 30.0}},  {20, {680.0, 103.0}}, {21, {274.0, 115.0}},
        {23, {247.5, 84.6}},  {24, {308.6, -92.2}}, {25, {224.0, 47.2}},  {26, {139.0, 17.0}},
        {27, {281.0, 75.5}},  {28, {206.0, 27.6}},  {29, {283.5, 26.9}},  {31, {9.2, 4.6}},
        {39, {1104.0, 250.0}},
    };
    const std::array<int, 10> dynamic{1, 4, 7, 8, 15, 16, 18, 20, 21, 23};

    std::vector<int> order(dynamic.begin(), dynamic.end());
    for (int b = 1; b <= 29; ++b) {
        if (std::find(dynamic.begin(), dynamic.end(), b) == dynamic.end()) order.push_back(b);
    }
    for (int b = 30; b <= 39; ++b) order.push_back(b);
    std::map<int, int> id_of;
    for (std::size_t i = 0; i < order.size(); ++i) id_of[order[i]] = static_cast<int>(i) + 1;

    // Machines: canonical bus, H (s, 100 MVA base), x'd, P (MW), |V| setpoint.
    struct RawGen {
        int bus;
        double h, xd, pg, vg;
    };
    const std::array<RawGen, 10> gens{{
        {30, 42.0, 0.031, 250.0, 1.0499},
        {31, 30.3, 0.0697, 0.0, 0.982},
        {32, 35.8, 0.0531, 650.0, 0.9841},
        {33, 28.6, 0.0436, 632.0, 0.9972},
        {34, 26.0, 0.132, 508.0, 1.0123},
        {35, 34.8, 0.05, 650.0, 1.0494},
        {36, 26.4, 0.049, 560.0, 1.0636},
        {37, 24.3, 0.057, 540.0, 1.0275},
        {38, 34.5, 0.057, 830.0, 1.0265},
        {39, 500.0, 0.006, 1000.0, 1.03},
    }};

    NetworkCase c;
    c.name = "ieee39";
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int canonical = order[i];
        Bus bus;
        bus.id = static_cast<int>(i) + 1;
        bus.label = std::to_string(canonical);
        if (i < dynamic.size()) {
            bus.kind = BusKind::load_dynamic;
        } else if (canonical == 31) {
            bus.kind = BusKind::slack;
        } else if (canonical >= 30) {
            bus.kind = BusKind::generator;
        } else {
            bus.kind = BusKind::load_static;
        }
        if (bus.kind != BusKind::load_dynamic) {
            if (const auto it = loads.find(canonical); it != loads.end()) {
                bus.p_load = it->second.first / 100.0;
                bus.q_load = it->second.second / 100.0;
            }
        }
        for (const auto& g : gens) {
            if (g.bus == canonical) bus.voltage_magnitude = g.vg;
        }
        c.buses.push_back(bus);
    }

    struct RawBranch {
        int f, t;
        double r, x, b, tap;
    };
    const std::array<RawBranch, 46> branches{{
        {1, 2, 0.0035, 0.0411, 0.6987, 1.0},   {1, 39, 0.001, 0.025, 0.75, 1.0},
        {2, 3, 0.0013, 0.0151, 0.2572, 1.0},   {2, 25, 0.007, 0.0086, 0.146, 1.0},
        {2, 30, 0.0, 0.0181, 0.0, 1.025},      {3, 4, 0.0013, 0.0213, 0.2214, 1.0},
        {3, 18, 0.0011, 0.0133, 0.2138, 1.0},  {4, 5, 0.0008, 0.0128, 0.1342, 1.0},
        {4, 14, 0.0008, 0.0129, 0.1382, 1.0},  {5, 6, 0.0002, 0.0026, 0.0434, 1.0},
        {5, 8, 0.0008, 0.0112, 0.1476, 1.0},   {6, 7, 0.0006, 0.0092, 0.113, 1.0},
        {6, 11, 0.0007, 0.0082, 0.1389, 1.0},  {6, 31, 0.0, 0.025, 0.0, 1.07},
        {7, 8, 0.0004, 0.0046, 0.078, 1.0},    {8, 9, 0.0023, 0.0363, 0.3804, 1.0},
        {9, 39, 0.001, 0.025, 1.2, 1.0},       {10, 11, 0.0004, 0.0043, 0.0729, 1.0},
        {10, 13, 0.0004, 0.0043, 0.0729, 1.0}, {10, 32, 0.0, 0.02, 0.0, 1.07},
        {12, 11, 0.0016, 0.0435, 0.0, 1.006},  {12, 13, 0.0016, 0.0435, 0.0, 1.006},
        {13, 14, 0.0009, 0.0101, 0.1723, 1.0}, {14, 15, 0.0018, 0.0217, 0.366, 1.0},
        {15, 16, 0.0009, 0.0094, 0.171, 1.0},  {16, 17, 0.0007, 0.0089, 0.1342, 1.0},
        {16, 19, 0.0016, 0.0195, 0.304, 1.0},  {16, 21, 0.0008, 0.0135, 0.2548, 1.0},
        {16, 24, 0.0003, 0.0059, 0.068, 1.0},  {17, 18, 0.0007, 0.0082, 0.1319, 1.0},
        {17, 27, 0.0013, 0.0173, 0.3216, 1.0}, {19, 20, 0.0007, 0.0138, 0.0, 1.06},
        {19, 33, 0.0007, 0.0142, 0.0, 1.07},   {20, 34, 0.0009, 0.018, 0.0, 1.009},
        {21, 22, 0.0008, 0.014, 0.2565, 1.0},  {22, 23, 0.0006, 0.0096, 0.1846, 1.0},
        {22, 35, 0.0, 0.0143, 0.0, 1.025},     {23, 24, 0.0022, 0.035, 0.361, 1.0},
        {23, 36, 0.0005, 0.0272, 0.0, 1.0},    {25, 26, 0.0032, 0.0323, 0.531, 1.0},
        {25, 37, 0.0006, 0.0232, 0.0, 1.025},  {26, 27, 0.0014, 0.0147, 0.2396, 1.0},
        {26, 28, 0.0043, 0.0474, 0.7802, 1.0}, {26, 29, 0.0057, 0.0625, 1.029, 1.0},
        {28, 29, 0.0014, 0.0151, 0.249, 1.0},  {29, 38, 0.0008, 0.0156, 0.0, 1.025},
    }};
    for (const auto& br : branches) {
        c.branches.push_back(
            Branch::from_impedance(id_of.at(br.f), id_of.at(br.t), br.r, br.x, br.b, br.tap));
    }

    for (const auto& g : gens) {
        c.generators.push_back(machine(id_of.at(g.bus), g.h, g.xd, g.pg / 100.0));
    }

    for (std::size_t k = 0; k < dynamic.size(); ++k) {
        const auto& pq = loads.at(dynamic[k]);
        const double tau_g = 0.1 + 0.5 * static_cast<double>(k);
        const double tau_b = 0.5 + 0.5 * static_cast<double>(k);
        c.dynamic_loads.push_back(dynamic_load(static_cast<int>(k) + 1, tau_g, tau_b,
                                               pq.first / 100.0, pq.second / 100.0));
        c.monitored_buses.push_back(static_cast<int>(k) + 1);
    }
    return c;
}

NetworkCase builtin_stiff_bus(double tau_g, double tau_b) {
    NetworkCase c;
    c.name = "stiff-bus";
    Bus load;
    load.id = 1;
    load.label = "load";
    load.kind = BusKind::load_dynamic;
    Bus source;
    source.id = 2;
    source.label = "source";
    source.kind = BusKind::slack;
    c.buses = {load, source};
    c.branches = {Branch::from_impedance(2, 1, 0.0, 1e-3)};
    c.generators = {GeneratorParams{2, 100.0, 200.0, 1e-3, 0.0}};
    c.dynamic_loads = {dynamic_load(1, tau_g, tau_b, 1.0, 0.5)};
    c.monitored_buses = {1};
    return c;
}

NetworkCase resolve_case(const std::string& name_or_path) {
    if (name_or_path == "wscc9") return builtin_wscc9();
    if (name_or_path == "ieee39") return builtin_ieee39();
    if (!std::filesystem::exists(name_or_path)) {
        throw ConfigError("case not found: '" + name_or_path + "'");
    }
    return load_case(name_or_path);
}

void validate_case(const NetworkCase& c) {
    const int n = c.bus_count();
    if (n == 0) throw ConfigError("case '" + c.name + "' has no buses");
    int slack = 0;
    std::map<int, int> generators_at;
    for (int i = 0; i < n; ++i) {
        const Bus& bus = c.buses[static_cast<std::size_t>(i)];
        if (bus.id != i + 1) {
            throw ConfigError("buses: ids must be contiguous 1..N in order (position " +
                              std::to_string(i + 1) + " has id " + std::to_string(bus.id) + ")");
        }
        if (bus.kind == BusKind::slack) ++slack;
        if (!(bus.voltage_magnitude > 0.0)) {
            throw ConfigError("bus " + std::to_string(bus.id) + ": voltage_magnitude must be > 0");
        }
    }
    if (slack != 1) {
        throw ConfigError("case '" + c.name + "' must have exactly one slack bus, found " +
                          std::to_string(slack));
    }
    for (const auto& br : c.branches) {
        if (br.from_bus < 1 || br.from_bus > n || br.to_bus < 1 || br.to_bus > n ||
            br.from_bus == br.to_bus) {
            throw ConfigError("branch " + std::to_string(br.from_bus) + "-" +
                              std::to_string(br.to_bus) + ": invalid endpoints");
        }
    }
    for (const auto& gen : c.generators) {
        const std::string who = "generator at bus " + std::to_string(gen.bus);
        if (gen.bus < 1 || gen.bus > n) throw ConfigError(who + ": bus does not exist");
        const BusKind kind = c.buses[static_cast<std::size_t>(gen.bus - 1)].kind;
        if (kind != BusKind::slack && kind != BusKind::generator) {
            throw ConfigError(who + ": bus kind must be slack or generator");
        }
        if (++generators_at[gen.bus] > 1) throw ConfigError(who + ": more than one machine");
        if (!(gen.inertia > 0.0)) throw ConfigError(who + ": inertia must be > 0");
        if (!(gen.damping >= 0.0)) throw ConfigError(who + ": damping must be >= 0");
        if (!(gen.x_d_prime > 0.0)) throw ConfigError(who + ": x_d_prime must be > 0");
    }
    for (const auto& bus : c.buses) {
        if ((bus.kind == BusKind::slack || bus.kind == BusKind::generator) &&
            generators_at.count(bus.id) == 0) {
            throw ConfigError("bus " + std::to_string(bus.id) + " is a " + to_string(bus.kind) +
                              " bus without a generator");
        }
    }

    int expected_id = 1;
    for (const auto& load : c.dynamic_loads) {
        const std::string who = "dynamic load at bus " + std::to_string(load.bus);
        if (load.bus < 1 || load.bus > n) throw ConfigError(who + ": bus does not exist");
        const BusKind kind = c.buses[static_cast<std::size_t>(load.bus - 1)].kind;
        if (kind == BusKind::slack || kind == BusKind::generator) {
            throw ConfigError(who + ": load placed on a generator bus");
        }
        if (kind != BusKind::load_dynamic) throw ConfigError(who + ": bus kind must be load-dynamic");
        if (load.bus != expected_id++) {
            throw ConfigError(who + ": dynamic loads must occupy buses 1..m in order");
        }
        if (!(load.tau_g > 0.0)) throw ConfigError(who + ": tau_g must be > 0");
        if (!(load.tau_b > 0.0)) throw ConfigError(who + ": tau_b must be > 0");
        if (!(load.sigma_p >= 0.0)) throw ConfigError(who + ": sigma_p must be >= 0");
        if (!(load.sigma_q >= 0.0)) throw ConfigError(who + ": sigma_q must be >= 0");
    }
    int dynamic_buses = 0;
    for (const auto& bus : c.buses) dynamic_buses += bus.kind == BusKind::load_dynamic ? 1 : 0;
    if (dynamic_buses != c.load_count()) {
        throw ConfigError("case '" + c.name + "': every load-dynamic bus needs exactly one dynamic load");
    }
    std::set<int> seen;
    for (const int bus : c.monitored_buses) {
        if (bus < 1 || bus > c.load_count()) {
            throw ConfigError("monitored bus " + std::to_string(bus) + " has no dynamic load");
        }
        if (!seen.insert(bus).second) {
            throw ConfigError("monitored bus " + std::to_string(bus) + " listed twice");
        }
    }
}

void validate_case_numerics(const NetworkCase& c) {
    const NetworkModel model(c);
    const auto sys = build_linearized_system(model, model.equilibrium(), Linearization::exact);
    if (!is_hurwitz(sys.a)) {
        throw NumericalError("case '" + c.name + "': exact load linearization is not stable");
    }
}

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T optional_field(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? field<T>(j, key, where) : fallback;
}

const nlohmann::json& array_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) {
        throw ConfigError(std::string("case file: missing array '") + key + "'");
    }
    return j.at(key);
}

}  // namespace

nlohmann::json case_to_json(const NetworkCase& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["buses"] = nlohmann::json::array();
    for (const auto& b : c.buses) {
        j["buses"].push_back({{"id", b.id},
                              {"kind", to_string(b.kind)},
                              {"label", b.label},
                              {"voltage_magnitude", b.voltage_magnitude},
                              {"initial_angle", b.initial_angle},
                              {"p_load", b.p_load},
                              {"q_load", b.q_load},
                              {"g_shunt", b.g_shunt},
                              {"b_shunt", b.b_shunt}});
    }
    j["branches"] = nlohmann::json::array();
    for (const auto& br : c.branches) {
        j["branches"].push_back({{"from", br.from_bus},
                                 {"to", br.to_bus},
                                 {"series_conductance", br.series_conductance},
                                 {"series_susceptance", br.series_susceptance},
                                 {"shunt_susceptance", br.shunt_susceptance},
                                 {"tap", br.tap}});
    }
    j["generators"] = nlohmann::json::array();
    for (const auto& g : c.generators) {
        j["generators"].push_back({{"bus", g.bus},
                                   {"inertia", g.inertia},
                                   {"damping", g.damping},
                                   {"x_d_prime", g.x_d_prime},
                                   {"p_m", g.p_m}});
    }
    j["dynamic_loads"] = nlohmann::json::array();
    for (const auto& l : c.dynamic_loads) {
        j["dynamic_loads"].push_back({{"bus", l.bus},
                                      {"tau_g", l.tau_g},
                                      {"tau_b", l.tau_b},
                                      {"p_s", l.p_s},
                                      {"q_s", l.q_s},
                                      {"sigma_p", l.sigma_p},
                                      {"sigma_q", l.sigma_q}});
    }
    j["monitored"] = c.monitored_buses;
    return j;
}

NetworkCase case_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("case file: top level must be an object");
    NetworkCase c;
    c.name = optional_field<std::string>(j, "name", "unnamed", "case");
    for (const auto& jb : array_field(j, "buses")) {
        const std::string where = "bus " + (jb.contains("id") ? jb["id"].dump() : std::string("?"));
        Bus b;
        b.id = field<int>(jb, "id", where);
        b.kind = bus_kind_from_string(field<std::string>(jb, "kind", where));
        b.label = optional_field<std::string>(jb, "label", "", where);
        b.voltage_magnitude = optional_field<double>(jb, "voltage_magnitude", 1.0, where);
        b.initial_angle = optional_field<double>(jb, "initial_angle", 0.0, where);
        b.p_load = optional_field<double>(jb, "p_load", 0.0, where);
        b.q_load = optional_field<double>(jb, "q_load", 0.0, where);
        b.g_shunt = optional_field<double>(jb, "g_shunt", 0.0, where);
        b.b_shunt = optional_field<double>(jb, "b_shunt", 0.0, where);
        c.buses.push_back(b);
    }
    for (const auto& jb : array_field(j, "branches")) {
        const std::string where = "branch";
        Branch br;
        br.from_bus = field<int>(jb, "from", where);
        br.to_bus = field<int>(jb, "to", where);
        const std::string named = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        br.series_conductance = field<double>(jb, "series_conductance", named);
        br.series_susceptance = field<double>(jb, "series_susceptance", named);
        br.shunt_susceptance = optional_field<double>(jb, "shunt_susceptance", 0.0, named);
        br.tap = optional_field<double>(jb, "tap", 1.0, named);
        c.branches.push_back(br);
    }
    for (const auto& jg : array_field(j, "generators")) {
        GeneratorParams g;
        g.bus = field<int>(jg, "bus", "generator");
        const std::string where = "generator at bus " + std::to_string(g.bus);
        g.inertia = field<double>(jg, "inertia", where);
        g.damping = field<double>(jg, "damping", where);
        g.x_d_prime = field<double>(jg, "x_d_prime", where);
        g.p_m = optional_field<double>(jg, "p_m", 0.0, where);
        c.generators.push_back(g);
    }
    for (const auto& jl : array_field(j, "dynamic_loads")) {
        DynamicLoadParams l;
        l.bus = field<int>(jl, "bus", "dynamic load");
        const std::string where = "dynamic load at bus " + std::to_string(l.bus);
        l.tau_g = field<double>(jl, "tau_g", where);
        l.tau_b = field<double>(jl, "tau_b", where);
        l.p_s = field<double>(jl, "p_s", where);
        l.q_s = field<double>(jl, "q_s", where);
        l.sigma_p = field<double>(jl, "sigma_p", where);
        l.sigma_q = field<double>(jl, "sigma_q", where);
        c.dynamic_loads.push_back(l);
    }
    if (j.contains("monitored")) {
        c.monitored_buses = field<std::vector<int>>(j, "monitored", "case");
    } else {
        for (const auto& l : c.dynamic_loads) c.monitored_buses.push_back(l.bus);
    }
    validate_case(c);
    return c;
}

NetworkCase load_case(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("case file '" + path.string() + "': " + e.what());
    }
    NetworkCase c = case_from_json(j);
    validate_case_numerics(c);
    return c;
}

void save_case(const NetworkCase& c, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << case_to_json(c).dump(2) << '\n';
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace ambient
