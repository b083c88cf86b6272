#pragma once

#include "ktube/rng.hpp"
#include "ktube/tube.hpp"
#include "ktube/vec.hpp"

namespace ktube {

// Normalizer of the cosine reflection density on the half-sphere:
// gamma_d = Gamma((d+1)/2) / pi^((d-1)/2) = 1 / vol(B^{d-1}).
double gamma_d(int d);

struct DirectionSample {
    Vec direction;     // unit vector, direction . normal > 0
    double cos_theta;  // direction . normal
};

// Draw an outgoing direction with density gamma_d (h . normal) on the
// half-sphere at `normal`: sample uniformly in the unit ball of the tangent
// hyperplane and lift to the hemisphere (Malley's construction).
DirectionSample sample_cosine(const Vec& normal, Rng& rng);

// Transition density of the boundary walk between two boundary points:
//   K(x,y) = gamma_d ((y-x).n(x)) ((x-y).n(y)) / |x-y|^{d+1}
// when both points are regular and mutually visible, else 0.
double eval_kernel(const TubeModel& tube, const BoundaryPoint& x, const BoundaryPoint& y);

// Orthonormal basis of the hyperplane orthogonal to unit vector n
// (Householder construction; deterministic).
void tangent_basis(const Vec& n, Vec* basis /* n.dim()-1 entries */);

}  // namespace ktube
