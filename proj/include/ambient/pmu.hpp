#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambient/dynamics.hpp"

namespace ambient {

struct PhasorRecord {
    double t = 0.0;
    int bus = 0;
    std::complex<double> v;
    std::complex<double> i;  // load current, consumption direction
};

// Rows are report instants, columns are monitored buses.
struct PhasorStream {
    std::vector<double> t;
    std::vector<int> buses;
    Eigen::MatrixXcd v;
    Eigen::MatrixXcd i;
    double rate = 0.0;
    std::string case_id;
    std::uint64_t seed = 0;

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(t.size()); }
    [[nodiscard]] PhasorRecord record(Eigen::Index row, Eigen::Index col) const {
        return {t[static_cast<std::size_t>(row)], buses[static_cast<std::size_t>(col)], v(row, col),
                i(row, col)};
    }
};

struct AdmittanceSeries {
    std::vector<double> t;
    std::vector<int> buses;
    Eigen::MatrixXd g;
    Eigen::MatrixXd b;
    Eigen::MatrixXd v_mag;

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(t.size()); }
};

// How the susceptance is read off I/V. `consumption` keeps Q = b V^2 with
// b > 0 for inductive demand (b = -Im{I/V}); `imaginary_part` takes
// b = Im{I/V} literally.
enum class SusceptanceSign { consumption, imaginary_part };

// Decimates the trajectory to `rate` reports per second. Load current is
// I = (g - jb) V so that V conj(I) = (g + jb)|V|^2.
PhasorStream sample_phasors(const Trajectory& traj, std::span<const int> buses, double rate);

// Independent N(0, sigma^2) on the real and imaginary parts of V and I.
PhasorStream add_noise(PhasorStream stream, double sigma, std::uint64_t seed);

// Independent N(0, sigma^2) directly on g, b and |V|.
AdmittanceSeries add_noise(AdmittanceSeries series, double sigma, std::uint64_t seed);

// g = Re{I/V}, b = -Im{I/V} (consumption sign), |V|. Throws ConfigError for
// |V| < 1e-6 pu.
AdmittanceSeries recover_admittance(const PhasorStream& stream,
                                    SusceptanceSign sign = SusceptanceSign::consumption);

// `# rate=<r> case=<id> seed=<s>`, then `t,bus,V_re,V_im,I_re,I_im`.
void write_phasor_csv(const PhasorStream& stream, const std::filesystem::path& path);
PhasorStream read_phasor_csv(const std::filesystem::path& path);

}  // namespace ambient
