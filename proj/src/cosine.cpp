#include "ktube/cosine.hpp"

#include <cmath>

#include "ktube/errors.hpp"
#include "ktube/ray.hpp"

namespace ktube {

double gamma_d(int d) {
    if (d < 2) throw InvalidParams("constraint violated: d >= 2");
    return std::tgamma(0.5 * (d + 1)) / std::pow(M_PI, 0.5 * (d - 1));
}

void tangent_basis(const Vec& n, Vec* basis) {
    // Householder reflection Q mapping e_last -> -sign(n_last) n; its other
    // columns form an orthonormal basis of the tangent hyperplane.
    int d = n.dim();
    double s = n[d - 1] >= 0.0 ? 1.0 : -1.0;
    Vec w = n;
    w[d - 1] += s;
    double wn2 = w.norm2();
    for (int k = 0; k < d - 1; ++k) {
        Vec col(d);
        col[k] = 1.0;
        double proj = 2.0 * w[k] / wn2;
        for (int i = 0; i < d; ++i) col[i] -= proj * w[i];
        basis[k] = col;
    }
}

DirectionSample sample_cosine(const Vec& normal, Rng& rng) {
    int d = normal.dim();
    Vec w = rng.unit_ball(d - 1);
    double w2 = w.norm2();
    if (w2 >= 1.0) w2 = 1.0;
    double height = std::sqrt(1.0 - w2);

    Vec basis[kMaxDim - 1];
    tangent_basis(normal, basis);

    Vec dir = height * normal;
    for (int k = 0; k < d - 1; ++k) dir += w[k] * basis[k];

    DirectionSample s;
    s.direction = dir;
    s.cos_theta = height;
    return s;
}

double eval_kernel(const TubeModel& tube, const BoundaryPoint& x, const BoundaryPoint& y) {
    if (!x.regular || !y.regular) return 0.0;
    Vec diff = y.position - x.position;
    double dist = diff.norm();
    if (dist <= 0.0) throw InvalidParams("eval_kernel requires x != y");
    double out_cos = diff.dot(x.normal) / dist;
    double in_cos = -diff.dot(y.normal) / dist;
    if (out_cos <= 0.0 || in_cos <= 0.0) return 0.0;

    // Visibility: the cast from x toward y must land at y.
    Vec v = diff * (1.0 / dist);
    RayHit hit = next_hit_from(tube, x.position, v);
    if (hit.anomaly == RayAnomaly::MaxLengthExceeded) return 0.0;
    if (distance(hit.hit.position, y.position) > 1e-6 * dist) return 0.0;

    int d = tube.dimension();
    return gamma_d(d) * out_cos * in_cos / std::pow(dist, d - 1);
}

}  // namespace ktube
