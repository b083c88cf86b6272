#include <doctest.h>

#include <cmath>

#include "ktube/cosine.hpp"
#include "ktube/errors.hpp"
#include "ktube/quadrature.hpp"
#include "ktube/rng.hpp"
#include "ktube/stats.hpp"

using namespace ktube;
using nlohmann::json;

TEST_CASE("gamma_d closed forms and quadrature cross-check") {
    CHECK(gamma_d(2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(gamma_d(3) == doctest::Approx(1.0 / M_PI).epsilon(1e-14));
    CHECK(gamma_d(4) == doctest::Approx(3.0 / (4.0 * M_PI)).epsilon(1e-14));
    // 1/gamma_d = |S^{d-2}| \int_0^{pi/2} cos t sin^{d-2} t dt
    for (int d = 2; d <= 8; ++d) {
        double flux = unit_sphere_area(d - 1) *
                      integrate([d](double t) { return std::cos(t) * std::pow(std::sin(t), d - 2); },
                                0.0, M_PI / 2, 1e-12, 1e-12);
        CHECK(gamma_d(d) * flux == doctest::Approx(1.0).epsilon(1e-10));
        // exact identity: gamma_d * vol(B^{d-1}) = 1
        CHECK(gamma_d(d) * unit_ball_volume(d - 1) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("cosine sampler: d=3 polar angle has sin^2 uniform") {
    Rng rng = Rng::stream(2024, stream_tag::kSampler);
    Vec n(3);
    n[0] = 0.6;
    n[1] = 0.8;
    n = n.normalized();
    int count = 100000;
    std::vector<double> u;
    u.reserve(count);
    for (int i = 0; i < count; ++i) {
        DirectionSample s = sample_cosine(n, rng);
        CHECK(s.cos_theta > 0.0);
        CHECK(std::fabs(s.direction.norm() - 1.0) < 1e-12);
        CHECK(std::fabs(s.direction.dot(n) - s.cos_theta) < 1e-12);
        u.push_back(1.0 - s.cos_theta * s.cos_theta);  // sin^2(theta)
    }
    CHECK(ks_statistic_uniform(u) < ks_threshold(count));
}

TEST_CASE("cosine sampler: d=2 mean cosine is pi/4") {
    Rng rng = Rng::stream(55, stream_tag::kSampler);
    Vec n(2);
    n[1] = 1.0;
    MomentAccumulator acc;
    int count = 1000000;
    for (int i = 0; i < count; ++i) acc.add(sample_cosine(n, rng).cos_theta);
    CHECK(std::fabs(acc.mean() - M_PI / 4.0) < 3.0 * acc.std_error_of_mean());
}

TEST_CASE("kernel closed form on the strip") {
    TubeModel t = TubeModel::build(Family::StraightCylinder, 2, json{{"width", 1.0}}, 7);
    Vec x(2), y(2);
    x[1] = -0.5;
    for (double s : {0.0, 0.5, 1.0, 2.0}) {
        y[0] = s;
        y[1] = 0.5;
        double k = eval_kernel(t, t.boundary_point_at(x), t.boundary_point_at(y));
        CHECK(k == doctest::Approx(0.5 * std::pow(1.0 + s * s, -1.5)).epsilon(1e-12));
    }
}

TEST_CASE("kernel symmetry on random visible pairs") {
    TubeModel rc = TubeModel::build(Family::RotationalCosine, 3,
                                    json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 11);
    Rng rng = Rng::stream(31, stream_tag::kSampler);
    int checked = 0;
    while (checked < 2000) {
        BoundaryPoint a = rc.sample_boundary_uniform(-4.0, 4.0, rng);
        BoundaryPoint b = rc.sample_boundary_uniform(-4.0, 4.0, rng);
        if (distance(a.position, b.position) < 1e-6) continue;
        double kab = eval_kernel(rc, a, b);
        double kba = eval_kernel(rc, b, a);
        CHECK(std::fabs(kab - kba) <= 1e-12 * (1.0 + std::fabs(kab)));
        ++checked;
    }
}

TEST_CASE("kernel rejects coincident points") {
    TubeModel t = TubeModel::build(Family::StraightCylinder, 2, json{{"width", 1.0}}, 7);
    Vec x(2);
    x[1] = -0.5;
    BoundaryPoint bp = t.boundary_point_at(x);
    CHECK_THROWS_AS(eval_kernel(t, bp, bp), InvalidParams);
}

TEST_CASE("kernel vanishes for occluded pairs") {
    TubeModel t = TubeModel::build(Family::RotationalCosine, 3,
                                   json{{"base_radius", 2.0}, {"amplitude", 1.9}}, 13);
    double phi = t.to_json().at("realized").at("phase").get<double>();
    double peak = -phi;
    Vec x(3), y(3);
    x[0] = peak;
    x[1] = 3.9;
    y[0] = peak + 2 * M_PI;
    y[1] = 3.9;
    double k = eval_kernel(t, t.boundary_point_at(x), t.boundary_point_at(y));
    CHECK(k == 0.0);
}

TEST_CASE("kernel normalization on the cylinder") {
    // \int K(x, .) dnu = 1; parameterize y = (alpha, cos w, sin w), dnu = rho dw dalpha.
    TubeModel t = TubeModel::build(Family::StraightCylinder, 3, json{{"radius", 1.0}}, 7);
    Vec x(3);
    x[1] = 1.0;
    BoundaryPoint bx = t.boundary_point_at(x);
    auto inner = [&](double alpha) {
        return integrate(
            [&](double w) {
                Vec y(3);
                y[0] = alpha;
                y[1] = std::cos(w);
                y[2] = std::sin(w);
                if (distance(y, x) < 1e-12) return 0.0;
                return eval_kernel(t, bx, t.boundary_point_at(y));
            },
            1e-6, 2 * M_PI - 1e-6, 1e-10, 1e-8);
    };
    // visibility makes the integrand smooth; integrate alpha symmetrically
    double total = integrate(inner, -60.0, 60.0, 1e-7, 1e-7);
    CHECK(total == doctest::Approx(1.0).epsilon(2e-3));
}
