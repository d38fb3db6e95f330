#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "ambient/dynamics.hpp"
#include "ambient/errors.hpp"
#include "text_io.hpp"

namespace ambient {

using detail::format_double;

namespace {

std::filesystem::path sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "t,bus,var,value\n";
    auto row = [&](const std::string& t, int bus, const char* var, double value) {
        out << t << ',' << bus << ',' << var << ',' << format_double(value) << '\n';
    };
    for (const auto& s : traj.states) {
        const std::string t = format_double(s.t);
        for (std::size_t k = 0; k < traj.generator_buses.size(); ++k) {
            row(t, traj.generator_buses[k], "delta", s.delta(static_cast<Eigen::Index>(k)));
            row(t, traj.generator_buses[k], "omega", s.omega(static_cast<Eigen::Index>(k)));
        }
        for (std::size_t k = 0; k < traj.load_buses.size(); ++k) {
            row(t, traj.load_buses[k], "g", s.g(static_cast<Eigen::Index>(k)));
            row(t, traj.load_buses[k], "b", s.b(static_cast<Eigen::Index>(k)));
        }
        for (int i = 0; i < traj.bus_count; ++i) {
            row(t, i + 1, "V", s.v(i));
            row(t, i + 1, "theta", s.theta(i));
        }
    }
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");

    nlohmann::json meta;
    meta["case"] = traj.case_id;
    meta["dt"] = traj.dt;
    meta["seed"] = traj.seed;
    meta["duration"] = traj.duration();
    meta["generator_buses"] = traj.generator_buses;
    meta["load_buses"] = traj.load_buses;
    meta["bus_count"] = traj.bus_count;
    auto meta_out = detail::open_output(sidecar(path));
    meta_out << meta.dump(2) << '\n';
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    Trajectory traj;
    {
        auto meta_in = detail::open_input(sidecar(path));
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(meta_in);
            traj.case_id = meta.at("case").get<std::string>();
            traj.dt = meta.at("dt").get<double>();
            traj.seed = meta.at("seed").get<std::uint64_t>();
            traj.generator_buses = meta.at("generator_buses").get<std::vector<int>>();
            traj.load_buses = meta.at("load_buses").get<std::vector<int>>();
            traj.bus_count = meta.at("bus_count").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("trajectory metadata '" + sidecar(path).string() + "': " + e.what());
        }
    }
    std::map<int, Eigen::Index> gen_index;
    std::map<int, Eigen::Index> load_index;
    for (std::size_t k = 0; k < traj.generator_buses.size(); ++k)
        gen_index[traj.generator_buses[k]] = static_cast<Eigen::Index>(k);
    for (std::size_t k = 0; k < traj.load_buses.size(); ++k)
        load_index[traj.load_buses[k]] = static_cast<Eigen::Index>(k);

    const auto ng = static_cast<Eigen::Index>(traj.generator_buses.size());
    const auto m = static_cast<Eigen::Index>(traj.load_buses.size());
    auto blank_state = [&](double t) {
        SystemState s;
        s.delta = Eigen::VectorXd::Constant(ng, std::nan(""));
        s.omega = Eigen::VectorXd::Constant(ng, std::nan(""));
        s.g = Eigen::VectorXd::Constant(m, std::nan(""));
        s.b = Eigen::VectorXd::Constant(m, std::nan(""));
        s.v = Eigen::VectorXd::Constant(traj.bus_count, std::nan(""));
        s.theta = Eigen::VectorXd::Constant(traj.bus_count, std::nan(""));
        s.t = t;
        return s;
    };

    auto in = detail::open_input(path);
    std::string line;
    std::getline(in, line);
    detail::strip_cr(line);
    if (line != "t,bus,var,value") {
        throw ConfigError("'" + path.string() + "': expected header t,bus,var,value");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(line_no);
        const auto f = detail::split(line);
        if (f.size() != 4) throw ConfigError(ctx + ": expected 4 fields");
        const double t = detail::parse_double(f[0], ctx);
        const int bus = static_cast<int>(detail::parse_int(f[1], ctx));
        const double value = detail::parse_double(f[3], ctx);
        if (traj.states.empty() || traj.states.back().t != t) traj.states.push_back(blank_state(t));
        SystemState& s = traj.states.back();
        const std::string_view var = f[2];
        auto lookup = [&](const std::map<int, Eigen::Index>& idx) {
            const auto it = idx.find(bus);
            if (it == idx.end()) throw ConfigError(ctx + ": unexpected bus for " + std::string(var));
            return it->second;
        };
        if (var == "delta") {
            s.delta(lookup(gen_index)) = value;
        } else if (var == "omega") {
            s.omega(lookup(gen_index)) = value;
        } else if (var == "g") {
            s.g(lookup(load_index)) = value;
        } else if (var == "b") {
            s.b(lookup(load_index)) = value;
        } else if (var == "V" || var == "theta") {
            if (bus < 1 || bus > traj.bus_count) throw ConfigError(ctx + ": bus out of range");
            (var == "V" ? s.v : s.theta)(bus - 1) = value;
        } else {
            throw ConfigError(ctx + ": unknown variable '" + std::string(var) + "'");
        }
    }
    for (const auto& s : traj.states) {
        if (s.delta.hasNaN() || s.omega.hasNaN() || s.g.hasNaN() || s.b.hasNaN() ||
            s.v.hasNaN() || s.theta.hasNaN()) {
            throw ConfigError("'" + path.string() + "': incomplete record at t = " +
                              format_double(s.t));
        }
    }
    return traj;
}

}  // namespace ambient
