#pragma once

#include <cstdint>

#include "ktube/vec.hpp"

namespace ktube {

// Counter-based splittable random stream (splitmix64 core).
// Streams are keyed by (seed, tag, index), so any worker can reconstruct
// the exact stream of any trajectory independent of scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9E3779B97F4A7C15ULL)) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
        Rng r(0);
        r.state_ = mix(mix(seed) ^ mix(tag * 0xD1342543DE82EF95ULL + index));
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1].
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal();

    std::uint64_t poisson(double mean);

    // Uniform on the unit sphere S^{dim-1} in R^dim.
    Vec unit_sphere(int dim);

    // Uniform in the closed unit ball of R^dim.
    Vec unit_ball(int dim);

private:
    std::uint64_t state_;
};

// Stream tags used across the project (arbitrary fixed constants).
namespace stream_tag {
inline constexpr std::uint64_t kTubePhase = 0x7065;
inline constexpr std::uint64_t kKnotWindow = 0x6b57;
inline constexpr std::uint64_t kTrajectory = 0x7452;
inline constexpr std::uint64_t kStartPoint = 0x5350;
inline constexpr std::uint64_t kBootstrap = 0x4253;
inline constexpr std::uint64_t kSampler = 0x534d;
}  // namespace stream_tag

}  // namespace ktube
