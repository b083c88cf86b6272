#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ktube/cosine.hpp"
#include "ktube/ray.hpp"
#include "ktube/rng.hpp"
#include "ktube/tube.hpp"

namespace ktube {

// Straight flight between consecutive boundary hits.
struct Chord {
    BoundaryPoint from, to;
    double length = 0.0;
    double horiz = 0.0;  // (to - from) . e
};

// Hit chain xi_0..xi_N with cumulative flight times tau_0 = 0 .. tau_N.
// The continuous-time path interpolates the hits at unit speed.
struct Trajectory {
    std::vector<BoundaryPoint> hits;
    std::vector<double> tau;
    std::uint64_t anomalies = 0;

    std::size_t steps() const { return hits.empty() ? 0 : hits.size() - 1; }
};

struct StepResult {
    BoundaryPoint next;
    Chord chord;
    std::uint64_t anomalies = 0;
};

// One boundary-walk step: cosine-law direction, exact cast, re-sampling on
// grazes / overlong casts / non-regular landings (at most 64 retries).
StepResult krw_step(const TubeModel& tube, const BoundaryPoint& from, Rng& rng);

// n steps of krw_step from `start` (n = 0 yields the single-hit trajectory).
Trajectory krw_trajectory(const TubeModel& tube, const BoundaryPoint& start, std::uint64_t n,
                          Rng& rng);

// Continue an existing trajectory by n more steps on the same stream.
void extend_trajectory(const TubeModel& tube, Trajectory& traj, std::uint64_t n, Rng& rng);

// Position and motion direction at time t in [0, tau_N).
std::pair<Vec, Vec> ksb_position(const Trajectory& traj, double t);

// n(t) = max{n : tau_n <= t}; requires 0 <= t < tau_N.
std::size_t hits_up_to(const Trajectory& traj, double t);

// Default initial point: surface-measure uniform over the slab [-1/2, 1/2].
BoundaryPoint default_start(const TubeModel& tube, std::uint64_t seed, std::uint64_t index);

}  // namespace ktube
