#include "ktube/rng.hpp"

#include <cmath>

namespace ktube {

double Rng::normal() {
    // Box-Muller; one variate per call keeps streams position-independent.
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

std::uint64_t Rng::poisson(double mean) {
    // Knuth multiplication; means here stay modest (knot windows).
    double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
        p *= uniform_open();
        if (p < limit) break;
        ++k;
    } while (k < 100000);
    return k;
}

Vec Rng::unit_sphere(int dim) {
    Vec v(dim);
    double n2;
    do {
        for (int i = 0; i < dim; ++i) v[i] = normal();
        n2 = v.norm2();
    } while (n2 < 1e-300);
    v *= 1.0 / std::sqrt(n2);
    return v;
}

Vec Rng::unit_ball(int dim) {
    Vec v = unit_sphere(dim);
    double r = std::pow(uniform_open(), 1.0 / dim);
    v *= r;
    return v;
}

}  // namespace ktube
