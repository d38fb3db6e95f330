#include "ambient/pmu.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "ambient/errors.hpp"
#include "ambient/random.hpp"
#include "text_io.hpp"

namespace ambient {

using Eigen::Index;
using cplx = std::complex<double>;

PhasorStream sample_phasors(const Trajectory& traj, std::span<const int> buses, double rate) {
    if (!(rate > 0.0) || !(traj.dt > 0.0)) {
        throw ConfigError("sample_phasors: rate and trajectory spacing must be positive");
    }
    const double ratio = 1.0 / (traj.dt * rate);
    const auto stride = static_cast<long long>(std::llround(ratio));
    if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio) {
        throw ConfigError("sample_phasors: rate " + detail::format_double(rate) +
                          " does not evenly divide the trajectory sampling rate " +
                          detail::format_double(1.0 / traj.dt));
    }

    std::vector<Index> cols;
    for (const int bus : buses) {
        const auto it = std::find(traj.load_buses.begin(), traj.load_buses.end(), bus);
        if (it == traj.load_buses.end()) {
            throw ConfigError("sample_phasors: bus " + std::to_string(bus) +
                              " is not a dynamic-load bus");
        }
        cols.push_back(static_cast<Index>(it - traj.load_buses.begin()));
    }

    PhasorStream out;
    out.buses.assign(buses.begin(), buses.end());
    out.rate = rate;
    out.case_id = traj.case_id;
    out.seed = traj.seed;
    const auto total = static_cast<long long>(traj.states.size());
    const Index rows = total == 0 ? 0 : static_cast<Index>((total - 1) / stride + 1);
    const auto nb = static_cast<Index>(cols.size());
    out.v.resize(rows, nb);
    out.i.resize(rows, nb);
    out.t.reserve(static_cast<std::size_t>(rows));
    for (Index r = 0; r < rows; ++r) {
        const SystemState& s = traj.states[static_cast<std::size_t>(r * stride)];
        out.t.push_back(s.t);
        for (Index c = 0; c < nb; ++c) {
            const Index k = cols[static_cast<std::size_t>(c)];
            const int bus = out.buses[static_cast<std::size_t>(c)];
            const cplx v = std::polar(s.v(bus - 1), s.theta(bus - 1));
            out.v(r, c) = v;
            out.i(r, c) = cplx(s.g(k), -s.b(k)) * v;
        }
    }
    return out;
}

PhasorStream add_noise(PhasorStream stream, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("add_noise: sigma must be non-negative");
    if (sigma == 0.0) return stream;
    for (Index c = 0; c < stream.v.cols(); ++c) {
        const auto base = static_cast<std::uint64_t>(stream.buses[static_cast<std::size_t>(c)]) * 4;
        GaussianStream v_re(seed, StreamDomain::phasor_measurement, base);
        GaussianStream v_im(seed, StreamDomain::phasor_measurement, base + 1);
        GaussianStream i_re(seed, StreamDomain::phasor_measurement, base + 2);
        GaussianStream i_im(seed, StreamDomain::phasor_measurement, base + 3);
        for (Index r = 0; r < stream.v.rows(); ++r) {
            stream.v(r, c) += cplx(sigma * v_re(), sigma * v_im());
            stream.i(r, c) += cplx(sigma * i_re(), sigma * i_im());
        }
    }
    return stream;
}

AdmittanceSeries add_noise(AdmittanceSeries series, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("add_noise: sigma must be non-negative");
    if (sigma == 0.0) return series;
    for (Index c = 0; c < series.g.cols(); ++c) {
        const auto base = static_cast<std::uint64_t>(series.buses[static_cast<std::size_t>(c)]) * 3;
        GaussianStream ng(seed, StreamDomain::derived_measurement, base);
        GaussianStream nb(seed, StreamDomain::derived_measurement, base + 1);
        GaussianStream nv(seed, StreamDomain::derived_measurement, base + 2);
        for (Index r = 0; r < series.g.rows(); ++r) {
            series.g(r, c) += sigma * ng();
            series.b(r, c) += sigma * nb();
            series.v_mag(r, c) += sigma * nv();
        }
    }
    return series;
}

AdmittanceSeries recover_admittance(const PhasorStream& stream, SusceptanceSign sign) {
    AdmittanceSeries out;
    out.t = stream.t;
    out.buses = stream.buses;
    const Index rows = stream.v.rows();
    const Index cols = stream.v.cols();
    out.g.resize(rows, cols);
    out.b.resize(rows, cols);
    out.v_mag.resize(rows, cols);
    const double b_sign = sign == SusceptanceSign::consumption ? -1.0 : 1.0;
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) {
            const cplx v = stream.v(r, c);
            const double mag = std::abs(v);
            if (!(mag >= 1e-6)) {
                throw ConfigError("degenerate voltage at bus " +
                                  std::to_string(stream.buses[static_cast<std::size_t>(c)]) +
                                  ", t = " + detail::format_double(stream.t[static_cast<std::size_t>(r)]));
            }
            const cplx ratio = stream.i(r, c) / v;
            out.g(r, c) = ratio.real();
            out.b(r, c) = b_sign * ratio.imag();
            out.v_mag(r, c) = mag;
        }
    }
    return out;
}

void write_phasor_csv(const PhasorStream& stream, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "# rate=" << detail::format_double(stream.rate) << " case=" << stream.case_id
        << " seed=" << stream.seed << '\n';
    out << "t,bus,V_re,V_im,I_re,I_im\n";
    for (Index r = 0; r < stream.size(); ++r) {
        const std::string t = detail::format_double(stream.t[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < stream.v.cols(); ++c) {
            out << t << ',' << stream.buses[static_cast<std::size_t>(c)] << ','
                << detail::format_double(stream.v(r, c).real()) << ','
                << detail::format_double(stream.v(r, c).imag()) << ','
                << detail::format_double(stream.i(r, c).real()) << ','
                << detail::format_double(stream.i(r, c).imag()) << '\n';
        }
    }
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

PhasorStream read_phasor_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    PhasorStream stream;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw ConfigError("'" + path.string() + "': missing '# rate=... case=... seed=...' line");
    }
    detail::strip_cr(line);
    {
        std::istringstream meta(line.substr(2));
        std::string token;
        bool have_rate = false;
        while (meta >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "rate") {
                stream.rate = detail::parse_double(value, path.string() + ": rate");
                have_rate = true;
            } else if (key == "case") {
                stream.case_id = value;
            } else if (key == "seed") {
                stream.seed = static_cast<std::uint64_t>(std::stoull(value));
            }
        }
        if (!have_rate) throw ConfigError("'" + path.string() + "': metadata lacks rate");
    }
    std::getline(in, line);
    detail::strip_cr(line);
    if (line != "t,bus,V_re,V_im,I_re,I_im") {
        throw ConfigError("'" + path.string() + "': expected header t,bus,V_re,V_im,I_re,I_im");
    }

    std::vector<std::vector<cplx>> v_rows, i_rows;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const std::string ctx = path.string() + ":" + std::to_string(line_no);
        const auto f = detail::split(line);
        if (f.size() != 6) throw ConfigError(ctx + ": expected 6 fields");
        const double t = detail::parse_double(f[0], ctx);
        const int bus = static_cast<int>(detail::parse_int(f[1], ctx));
        const cplx v(detail::parse_double(f[2], ctx), detail::parse_double(f[3], ctx));
        const cplx i(detail::parse_double(f[4], ctx), detail::parse_double(f[5], ctx));
        if (stream.t.empty() || stream.t.back() != t) {
            if (!stream.t.empty() && t <= stream.t.back()) {
                throw ConfigError(ctx + ": timestamps must increase");
            }
            stream.t.push_back(t);
            v_rows.emplace_back();
            i_rows.emplace_back();
        }
        // The first timestamp defines the bus layout.
        auto& vr = v_rows.back();
        if (stream.t.size() == 1) {
            stream.buses.push_back(bus);
        } else if (vr.size() >= stream.buses.size() || stream.buses[vr.size()] != bus) {
            throw ConfigError(ctx + ": bus " + std::to_string(bus) +
                              " out of order or missing at this timestamp");
        }
        vr.push_back(v);
        i_rows.back().push_back(i);
    }
    const auto rows = static_cast<Index>(stream.t.size());
    const auto cols = static_cast<Index>(stream.buses.size());
    stream.v.resize(rows, cols);
    stream.i.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        if (static_cast<Index>(v_rows[static_cast<std::size_t>(r)].size()) != cols) {
            throw ConfigError("'" + path.string() + "': not all monitored buses present at t = " +
                              detail::format_double(stream.t[static_cast<std::size_t>(r)]));
        }
        for (Index c = 0; c < cols; ++c) {
            stream.v(r, c) = v_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            stream.i(r, c) = i_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    return stream;
}

}  // namespace ambient
