#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ambient {

// Counter-based Gaussian streams. Every stream is keyed by (seed, domain,
// index) and draws SplitMix64 outputs at key + counter * golden gamma, so a
// stream's values depend only on its key and position. Normals come from
// Box-Muller over 53-bit uniforms, which keeps results identical on any
// platform with IEEE doubles and a correctly rounded libm.

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

enum class StreamDomain : std::uint64_t {
    load_active = 1,
    load_reactive = 2,
    phasor_measurement = 3,
    derived_measurement = 4,
};

inline constexpr std::uint64_t derive_stream_key(std::uint64_t seed, StreamDomain domain,
                                                 std::uint64_t index) {
    std::uint64_t k = splitmix64_mix(seed + kGoldenGamma);
    k = splitmix64_mix(k ^ (static_cast<std::uint64_t>(domain) * 0xd1b54a32d192ed03ULL));
    return splitmix64_mix(k + (index + 1) * kGoldenGamma);
}

class GaussianStream {
public:
    GaussianStream() = default;
    explicit GaussianStream(std::uint64_t key) : key_(key) {}
    GaussianStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index)
        : key_(derive_stream_key(seed, domain, index)) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        const std::uint64_t bits = splitmix64_mix(key_ + (++counter_) * kGoldenGamma);
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    [[nodiscard]] std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ambient
