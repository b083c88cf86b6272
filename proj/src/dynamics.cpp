#include "ktube/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "ktube/errors.hpp"

namespace ktube {

StepResult krw_step(const TubeModel& tube, const BoundaryPoint& from, Rng& rng) {
    StepResult out;
    for (int attempt = 0; attempt < 64; ++attempt) {
        DirectionSample dir = sample_cosine(from.normal, rng);
        RayHit hit = next_hit_from(tube, from.position, dir.direction);
        if (hit.anomaly != RayAnomaly::None || !hit.hit.regular) {
            ++out.anomalies;
            continue;
        }
        out.next = hit.hit;
        out.chord.from = from;
        out.chord.to = hit.hit;
        out.chord.length = hit.flight_length;
        out.chord.horiz = hit.hit.alpha - from.alpha;
        return out;
    }
    throw StuckPoint("krw_step failed 64 times from alpha = " + std::to_string(from.alpha));
}

Trajectory krw_trajectory(const TubeModel& tube, const BoundaryPoint& start, std::uint64_t n,
                          Rng& rng) {
    Trajectory traj;
    traj.hits.reserve(n + 1);
    traj.tau.reserve(n + 1);
    traj.hits.push_back(start);
    traj.tau.push_back(0.0);
    extend_trajectory(tube, traj, n, rng);
    return traj;
}

void extend_trajectory(const TubeModel& tube, Trajectory& traj, std::uint64_t n, Rng& rng) {
    for (std::uint64_t i = 0; i < n; ++i) {
        StepResult s = krw_step(tube, traj.hits.back(), rng);
        traj.anomalies += s.anomalies;
        traj.tau.push_back(traj.tau.back() + s.chord.length);
        traj.hits.push_back(std::move(s.next));
    }
}

std::pair<Vec, Vec> ksb_position(const Trajectory& traj, double t) {
    if (t < 0.0 || traj.tau.empty() || t >= traj.tau.back())
        throw OutOfRange("time outside the trajectory span");
    std::size_t n = hits_up_to(traj, t);
    const Vec& a = traj.hits[n].position;
    const Vec& b = traj.hits[n + 1].position;
    double seg = traj.tau[n + 1] - traj.tau[n];
    Vec dir = (b - a) * (1.0 / seg);
    return {a + (t - traj.tau[n]) * dir, dir};
}

std::size_t hits_up_to(const Trajectory& traj, double t) {
    if (t < 0.0 || traj.tau.empty() || t >= traj.tau.back())
        throw OutOfRange("time outside the trajectory span");
    auto it = std::upper_bound(traj.tau.begin(), traj.tau.end(), t);
    return static_cast<std::size_t>(it - traj.tau.begin()) - 1;
}

BoundaryPoint default_start(const TubeModel& tube, std::uint64_t seed, std::uint64_t index) {
    Rng rng = Rng::stream(seed, stream_tag::kStartPoint, index);
    return tube.sample_boundary_uniform(-0.5, 0.5, rng);
}

}  // namespace ktube
