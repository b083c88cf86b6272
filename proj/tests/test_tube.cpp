#include <doctest.h>

#include <cmath>

#include "ktube/errors.hpp"
#include "ktube/rng.hpp"
#include "ktube/stats.hpp"
#include "ktube/tube.hpp"

using namespace ktube;
using nlohmann::json;

namespace {

TubeModel cylinder3(double rho = 1.0, std::uint64_t seed = 7) {
    return TubeModel::build(Family::StraightCylinder, 3, json{{"radius", rho}}, seed);
}

// Fixed-grid Simpson, independent of the adaptive integrator under test.
template <class F>
double simpson_oracle(F f, double a, double b, int n = 20000) {
    double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("straight cylinder membership") {
    TubeModel t = cylinder3();
    Vec in(3);
    in[0] = 5;
    in[1] = 0.5;
    CHECK(t.contains(in));
    Vec on(3);
    on[0] = 5;
    on[1] = 1.0;
    CHECK_FALSE(t.contains(on));  // boundary is not interior
}

TEST_CASE("cosine strip realizes the shifted band") {
    TubeModel t = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 99);
    double phi = t.to_json().at("realized").at("phase").get<double>();
    for (double a : {-3.0, 0.0, 1.7, 12.0}) {
        double low = std::cos(a + phi);
        Vec mid(2);
        mid[0] = a;
        mid[1] = low + 0.5;
        CHECK(t.contains(mid));
        Vec out(2);
        out[0] = a;
        out[1] = low - 0.1;
        CHECK_FALSE(t.contains(out));
        Vec on(2);
        on[0] = a;
        on[1] = low;
        CHECK_FALSE(t.contains(on));
    }
}

TEST_CASE("boundary point on a cylinder") {
    TubeModel t = cylinder3();
    Vec x(3);
    x[0] = 0;
    x[1] = 1.0;
    BoundaryPoint bp = t.boundary_point_at(x);
    CHECK(bp.normal[0] == doctest::Approx(0.0));
    CHECK(bp.normal[1] == doctest::Approx(-1.0));
    CHECK(bp.normal[2] == doctest::Approx(0.0));
    CHECK(bp.kappa == doctest::Approx(1.0));
    CHECK(bp.regular);

    Vec off(3);
    off[0] = 0;
    off[1] = 0.9;
    CHECK_THROWS_AS(t.boundary_point_at(off), NotOnBoundary);
}

TEST_CASE("rotational cosine kappa at the profile peak is 1") {
    TubeModel t = TubeModel::build(Family::RotationalCosine, 2,
                                   json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 3);
    double phi = t.to_json().at("realized").at("phase").get<double>();
    double peak = -phi;  // R'(peak) = 0, R = 3
    Vec x(2);
    x[0] = peak;
    x[1] = 3.0;
    BoundaryPoint bp = t.boundary_point_at(x);
    CHECK(bp.kappa == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("piecewise-linear kappa matches a finite-difference normal") {
    TubeModel t = TubeModel::build(
        Family::RotationalPoissonKnot, 3, json{{"rate", 1.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 3);
    // Probe the interior of several linear segments.
    const Profile& p = t.radial();
    for (double a0 : {-20.0, -3.0, 0.4, 7.7, 31.0}) {
        double m = p.deriv(a0);
        double R = p.value(a0);
        Vec x(3);
        x[0] = a0;
        x[1] = R;
        BoundaryPoint bp = t.boundary_point_at(x);
        double kappa_expected = 1.0 / std::sqrt(1.0 + m * m);
        CHECK(bp.kappa == doctest::Approx(kappa_expected).epsilon(1e-9));

        // Finite-difference gradient of F(x) = |Ux| - R(x.e).
        double h = 1e-6;
        auto F = [&](double al, double u) { return u - p.value(al); };
        double ga = (F(a0 + h, R) - F(a0 - h, R)) / (2 * h);
        double gu = 1.0;
        double norm = std::sqrt(ga * ga + gu * gu);
        CHECK(bp.normal[0] == doctest::Approx(-ga / norm).epsilon(1e-5));
        CHECK(bp.normal[1] == doctest::Approx(-gu / norm).epsilon(1e-5));
    }
}

TEST_CASE("sections: closed forms") {
    SectionInfo s = cylinder3().section_slice(0.0);
    CHECK(s.volume == doctest::Approx(M_PI));
    CHECK(s.boundary_measure == doctest::Approx(2 * M_PI));

    TubeModel strip = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 5);
    for (double a : {0.0, 2.0, -11.0}) {
        CHECK(strip.section_slice(a).volume == doctest::Approx(1.0));
        CHECK(strip.section_slice(a).boundary_measure == doctest::Approx(2.0));
    }

    TubeModel rc = TubeModel::build(Family::RotationalCosine, 3,
                                    json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 17);
    double phi = rc.to_json().at("realized").at("phase").get<double>();
    CHECK(rc.section_slice(M_PI - phi).volume == doctest::Approx(M_PI));
}

TEST_CASE("slab surface area") {
    CHECK(cylinder3().slab_surface_area(0.0, 1.0) == doctest::Approx(2 * M_PI).epsilon(1e-12));

    TubeModel strip2 =
        TubeModel::build(Family::StraightCylinder, 2, json{{"width", 1.0}}, 1);
    CHECK(strip2.slab_surface_area(0.0, 10.0) == doctest::Approx(20.0).epsilon(1e-12));

    TubeModel cs = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 9);
    double oracle = 2.0 * simpson_oracle([](double a) { return std::sqrt(1 + std::sin(a) * std::sin(a)); },
                                         0.0, 2 * M_PI);
    CHECK(cs.slab_surface_area(0.0, 2 * M_PI) == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("disintegration: slab area equals kappa-weighted section measure") {
    TubeModel rc = TubeModel::build(Family::RotationalCosine, 3,
                                    json{{"base_radius", 2.0}, {"amplitude", 0.7}}, 23);
    const Profile& p = rc.radial();
    auto integrand = [&](double a) {
        double dR = p.deriv(a);
        return rc.section_slice(a).boundary_measure * std::sqrt(1.0 + dR * dR);
    };
    double a = -2.3, b = 5.9;
    double oracle = simpson_oracle(integrand, a, b, 40000);
    CHECK(rc.slab_surface_area(a, b) == doctest::Approx(oracle).epsilon(1e-6));

    TubeModel pk = TubeModel::build(
        Family::RotationalPoissonKnot, 3, json{{"rate", 1.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 8);
    const Profile& q = pk.radial();
    auto integrand2 = [&](double al) {
        double dR = q.deriv(al);
        return pk.section_slice(al).boundary_measure * std::sqrt(1.0 + dR * dR);
    };
    double o2 = simpson_oracle(integrand2, a, b, 200000);
    CHECK(pk.slab_surface_area(a, b) == doctest::Approx(o2).epsilon(2e-5));
}

TEST_CASE("stationarity: ensemble mean section matches spatial mean") {
    // RotationalCosine d=3: |w_0| = pi (r0 + a cos phi)^2; spatial mean over a
    // period is pi (r0^2 + a^2/2).
    double r0 = 2.0, amp = 1.0;
    MomentAccumulator acc;
    for (std::uint64_t seed = 0; seed < 256; ++seed) {
        TubeModel t = TubeModel::build(Family::RotationalCosine, 3,
                                       json{{"base_radius", r0}, {"amplitude", amp}}, seed);
        acc.add(t.section_slice(0.0).volume);
    }
    double spatial = M_PI * (r0 * r0 + 0.5 * amp * amp);
    double se = acc.std_error_of_mean();
    CHECK(std::fabs(acc.mean() - spatial) < 3.0 * se);
}

TEST_CASE("build is a pure function of spec and seed") {
    json params = {{"rate", 1.0}, {"r_min", 0.5}, {"r_max", 1.5}};
    TubeModel a = TubeModel::build(Family::RotationalPoissonKnot, 3, params, 3);
    TubeModel b = TubeModel::build(Family::RotationalPoissonKnot, 3, params, 3);
    CHECK(a.to_json().dump() == b.to_json().dump());
    // Identical profiles over a window queried in different orders.
    for (double al = -100.0; al <= 100.0; al += 0.37)
        CHECK(a.radial().value(al) == b.radial().value(-al < al ? al : al));
    for (double al = 100.0; al >= -100.0; al -= 0.53)
        CHECK(a.radial().value(al) == b.radial().value(al));
}

TEST_CASE("invalid parameters are rejected with the constraint named") {
    CHECK_THROWS_AS(TubeModel::build(Family::StraightCylinder, 3, json{{"radius", -1.0}}, 1),
                    InvalidParams);
    CHECK_THROWS_AS(TubeModel::build(Family::RotationalCosine, 3,
                                     json{{"base_radius", 1.0}, {"amplitude", 1.5}}, 1),
                    InvalidParams);
    CHECK_THROWS_AS(
        TubeModel::build(Family::RotationalPoissonKnot, 3,
                         json{{"rate", -2.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 1),
        InvalidParams);
    CHECK_THROWS_AS(TubeModel::build(Family::CosineStrip2D, 3, json{{"width", 1.0}}, 1),
                    InvalidParams);
    CHECK_THROWS_AS(
        TubeModel::build(Family::NestedPair, 3,
                         json{{"outer", {{"family", "StraightCylinder"}, {"params", {{"radius", 1.0}}}}},
                              {"inner_radius", 1.0}},
                         1),
        InvalidParams);
    try {
        TubeModel::build(Family::RotationalPoissonKnot, 3,
                         json{{"rate", -2.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 1);
    } catch (const InvalidParams& e) {
        CHECK(std::string(e.what()).find("rate") != std::string::npos);
    }
}

TEST_CASE("json round trip") {
    json spec = {{"family", "RotationalCosine"},
                 {"dimension", 3},
                 {"params", {{"base_radius", 2.0}, {"amplitude", 1.0}}},
                 {"seed", 77}};
    TubeModel t = TubeModel::from_json(spec);
    CHECK(t.family() == Family::RotationalCosine);
    CHECK(t.dimension() == 3);
    json unknown = spec;
    unknown["extra"] = 1;
    CHECK_THROWS_AS(TubeModel::from_json(unknown), InvalidParams);
}

TEST_CASE("boundary sampling: marginals and normals") {
    // Cylinder: alpha uniform, angle uniform.
    TubeModel t = cylinder3();
    Rng rng = Rng::stream(4, stream_tag::kSampler);
    int n = 100000;
    std::vector<double> alpha_u, angle_u;
    for (int i = 0; i < n; ++i) {
        BoundaryPoint bp = t.sample_boundary_uniform(-2.0, 3.0, rng);
        alpha_u.push_back((bp.alpha + 2.0) / 5.0);
        angle_u.push_back((std::atan2(bp.position[2], bp.position[1]) + M_PI) / (2 * M_PI));
        // interior on the normal side, exterior on the other
        CHECK(t.contains(bp.position + 1e-6 * bp.normal));
        CHECK_FALSE(t.contains(bp.position - 1e-6 * bp.normal));
    }
    CHECK(ks_statistic_uniform(alpha_u) < ks_threshold(n));
    CHECK(ks_statistic_uniform(angle_u) < ks_threshold(n));
}

TEST_CASE("boundary sampling: strip density follows arc length") {
    TubeModel t = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 21);
    double phi = t.to_json().at("realized").at("phase").get<double>();
    Rng rng = Rng::stream(5, stream_tag::kSampler);
    int n = 200000;
    int bins = 40;
    Histogram hist(0.0, 2 * M_PI, bins);
    for (int i = 0; i < n; ++i) {
        BoundaryPoint bp = t.sample_boundary_uniform(0.0, 2 * M_PI, rng);
        double s = std::fmod(bp.alpha + phi, 2 * M_PI);
        if (s < 0) s += 2 * M_PI;
        hist.add(s);
        CHECK(t.contains(bp.position + 1e-6 * bp.normal));
        CHECK_FALSE(t.contains(bp.position - 1e-6 * bp.normal));
    }
    auto dens = [](double s) { return std::sqrt(1.0 + std::sin(s) * std::sin(s)); };
    double total = simpson_oracle(dens, 0.0, 2 * M_PI);
    std::vector<double> expected(bins);
    for (int b = 0; b < bins; ++b) {
        double a0 = 2 * M_PI * b / bins, a1 = 2 * M_PI * (b + 1) / bins;
        expected[b] = simpson_oracle(dens, a0, a1, 200) / total;
    }
    double chi2 = chi2_statistic(hist.counts, expected, hist.total_in_range());
    CHECK(chi2 < chi2_quantile(0.999, bins - 1));
}

TEST_CASE("boundary points within knot tolerance are flagged non-regular") {
    TubeModel t = TubeModel::build(
        Family::RotationalPoissonKnot, 3, json{{"rate", 1.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 3);
    auto table = t.radial().knot_process()->ensure(-20.0, 20.0);
    const Knot& k = table->knots[table->segment(0.0) + 1];
    Vec at_knot(3);
    at_knot[0] = k.alpha;
    at_knot[1] = k.radius;
    CHECK_FALSE(t.boundary_point_at(at_knot).regular);
    Vec mid(3);
    double a_mid = 0.5 * (k.alpha + table->knots[table->segment(k.alpha + 1e-6) + 1].alpha);
    mid[0] = a_mid;
    mid[1] = t.radial().value(a_mid);
    CHECK(t.boundary_point_at(mid).regular);
}

TEST_CASE("poisson knot tube: lazy window extension is consistent") {
    TubeModel t = TubeModel::build(
        Family::RotationalPoissonKnot, 3, json{{"rate", 2.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 12);
    // Sample values near the origin, then far away, then near again.
    double v1 = t.radial().value(0.3);
    double far = t.radial().value(4000.0);
    double v2 = t.radial().value(0.3);
    CHECK(v1 == v2);
    CHECK(far >= 0.5);
    CHECK(far <= 1.5);
    // Values stay within bounds everywhere.
    for (double a = -300; a < 300; a += 0.21) {
        double r = t.radial().value(a);
        CHECK(r >= 0.5);
        CHECK(r <= 1.5);
    }
}

TEST_CASE("mean section volume") {
    TubeModel rc = TubeModel::build(Family::RotationalCosine, 3,
                                    json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 31);
    double expected = M_PI * (4.0 + 0.5);
    CHECK(rc.mean_section_volume(0.0, 2 * M_PI * 100) == doctest::Approx(expected).epsilon(1e-6));
}
