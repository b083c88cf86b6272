#pragma once

#include "ktube/tube.hpp"
#include "ktube/vec.hpp"

namespace ktube {

enum class RayAnomaly { None, MaxLengthExceeded, KnotGraze };

struct RayHit {
    BoundaryPoint hit;
    double flight_length = 0.0;
    RayAnomaly anomaly = RayAnomaly::None;
};

// Next boundary hit along the ray x + t v, t > hit_exclusion.
// Validates that x lies in the closed tube and that boundary starts point
// inward; throws NotInterior otherwise.
RayHit next_hit(const TubeModel& tube, const Vec& x, const Vec& v);

// Trusted variant used by the dynamics loop: skips the start validation.
RayHit next_hit_from(const TubeModel& tube, const Vec& x, const Vec& v);

}  // namespace ktube
