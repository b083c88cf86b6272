#include <doctest.h>

#include <cmath>

#include "ktube/errors.hpp"
#include "ktube/estimators.hpp"

using namespace ktube;
using nlohmann::json;

namespace {

Ensemble ens_of(TubeModel tube, std::uint64_t seed, int n, std::uint64_t steps,
                std::uint64_t burn = 0, int workers = 2) {
    return Ensemble{std::move(tube), seed, n, steps, burn, workers, nullptr};
}

TubeModel cyl(int d, double rho, std::uint64_t seed = 7) {
    return TubeModel::build(Family::StraightCylinder, d, json{{"radius", rho}}, seed);
}

TubeModel strip_w1(std::uint64_t seed = 7) {
    return TubeModel::build(Family::StraightCylinder, 2, json{{"width", 1.0}}, seed);
}

}  // namespace

TEST_CASE("chord constant: C_2 = pi, C_3 = 4") {
    CHECK(chord_constant(2) == doctest::Approx(M_PI).epsilon(1e-14));
    CHECK(chord_constant(3) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("predicted rate closed forms") {
    CHECK(predicted_rate(cyl(3, 1.0), -50.0, 50.0) == doctest::Approx(0.5).epsilon(1e-12));
    // strip of width r: mean chord pi r / 2, rate 2/(pi r)
    CHECK(predicted_rate(strip_w1(), -50.0, 50.0) == doctest::Approx(2.0 / M_PI).epsilon(1e-12));
    TubeModel strip2 = TubeModel::build(Family::StraightCylinder, 2, json{{"width", 2.0}}, 3);
    CHECK(predicted_rate(strip2, -50.0, 50.0) == doctest::Approx(1.0 / M_PI).epsilon(1e-12));
    CHECK(mean_chord_analytic(cyl(3, 1.0), -50.0, 50.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("b quadrature: closed form, scaling, divergence") {
    // d=3, rho=1: the boundary-kernel route gives exactly 8/3.
    BQuadrature b1 = b_quadrature(cyl(3, 1.0));
    CHECK_FALSE(b1.divergent);
    CHECK(b1.value == doctest::Approx(8.0 / 3.0).epsilon(1e-8));
    BQuadrature b2 = b_quadrature(cyl(3, 2.0));
    CHECK(b2.value == doctest::Approx(4.0 * b1.value).epsilon(1e-5));
    CHECK(b_quadrature(strip_w1()).divergent);
    BQuadrature b4 = b_quadrature(cyl(4, 1.0));
    CHECK_FALSE(b4.divergent);
    CHECK(b4.value > 0.0);
    CHECK(std::isfinite(b4.value));
    CHECK_THROWS_AS(b_quadrature(TubeModel::build(Family::RotationalCosine, 3,
                                                  json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 1)),
                    InvalidParams);
}

TEST_CASE("b quadrature matches Monte Carlo at d=4") {
    Ensemble e = ens_of(cyl(4, 1.0), 21, 100, 2000);
    DriftMoments dm = drift_and_moments(e, {1e9});
    const Estimate& m2 = dm.truncated_m2[0].second;
    double b = b_quadrature(cyl(4, 1.0)).value;
    CHECK(std::fabs(m2.value - b) < 3.0 * m2.std_error);
}

TEST_CASE("mean chord: strip pi/2 and cylinder 2") {
    Ensemble es = ens_of(strip_w1(), 31, 100, 1200, 100);
    Estimate ms = estimate_mean_chord(es);
    CHECK(std::fabs(ms.value - M_PI / 2) < 3.0 * ms.std_error);

    Ensemble ec = ens_of(cyl(3, 1.0), 32, 100, 1200, 100);
    Estimate mc = estimate_mean_chord(ec);
    CHECK(std::fabs(mc.value - 2.0) < 3.0 * mc.std_error);

    CHECK_THROWS_AS(estimate_mean_chord(ens_of(cyl(3, 1.0), 1, 2, 100)), InsufficientData);
}

TEST_CASE("sigma2 via variance growth matches the quadrature oracle") {
    Ensemble e = ens_of(cyl(3, 1.0), 41, 400, 4200, 50);
    VarianceGrowth vg = estimate_sigma2(e);
    CHECK_FALSE(vg.slope.divergent);
    double b = b_quadrature(cyl(3, 1.0)).value;  // = sigma^2 here
    CHECK(std::fabs(vg.slope.value - b) < 3.0 * vg.slope.std_error);
    CHECK(vg.slope.std_error > 0.0);

    CHECK_THROWS_AS(estimate_sigma2(ens_of(cyl(3, 1.0), 1, 50, 4200, 50)), InsufficientData);
    CHECK_THROWS_AS(estimate_sigma2(ens_of(cyl(3, 1.0), 1, 400, 120, 64)), InsufficientData);
}

TEST_CASE("sigma2 flags divergence on the 2D strip but not in d >= 3") {
    Ensemble e = ens_of(strip_w1(), 43, 200, 8300, 50);
    VarianceGrowth vg = estimate_sigma2(e);
    CHECK(vg.trunc_gap > 0.10);
    CHECK(vg.slope.divergent);

    Ensemble e3 = ens_of(cyl(3, 1.0), 44, 150, 1500, 50);
    CHECK_FALSE(estimate_sigma2(e3).slope.divergent);
}

TEST_CASE("time-change identity on the cylinder") {
    Ensemble e = ens_of(cyl(3, 1.0), 47, 300, 1500, 100);
    double t = 800.0;
    TimeVariance tv = estimate_sigma_hat2(e, t);
    Estimate rate = estimate_rate(e, t);
    VarianceGrowth vg = estimate_sigma2(e);
    CHECK(std::fabs(rate.value - 0.5) < 4.0 * rate.std_error);
    CHECK(std::fabs(tv.mean.value) < 4.0 * tv.mean.std_error);
    double lhs = tv.sigma_hat2.value;
    double rhs = vg.slope.value * rate.value;
    double se = std::sqrt(tv.sigma_hat2.std_error * tv.sigma_hat2.std_error +
                          rate.value * rate.value * vg.slope.std_error * vg.slope.std_error +
                          vg.slope.value * vg.slope.value * rate.std_error * rate.std_error);
    CHECK(std::fabs(lhs - rhs) < 3.0 * se);
    CHECK_THROWS_AS(estimate_sigma_hat2(e, 1e7), OutOfRange);
}

TEST_CASE("drift vanishes and the 2D truncated moment diverges logarithmically") {
    Ensemble e = ens_of(strip_w1(), 53, 120, 2000, 100);
    DriftMoments dm = drift_and_moments(e, {10.0, 100.0, 1000.0});
    CHECK(std::fabs(dm.drift.value) < 4.0 * dm.drift.std_error);
    // log-divergent: each decade of truncation adds a comparable amount
    double m10 = dm.truncated_m2[0].second.value;
    double m100 = dm.truncated_m2[1].second.value;
    double m1000 = dm.truncated_m2[2].second.value;
    CHECK(m100 > m10 * 1.2);
    CHECK(m1000 > m100 * 1.1);
}

TEST_CASE("2D strip tail survival matches 1 - x/sqrt(1+x^2)") {
    Ensemble e = ens_of(strip_w1(), 59, 100, 1100, 100);
    auto pts = tail_survival(e, {0.0, 0.5, 1.0, 2.0, 5.0});
    CHECK(pts[0].survival.value == doctest::Approx(1.0));
    for (size_t k = 1; k < pts.size(); ++k) {
        double x = pts[k].x;
        double theory = 1.0 - x / std::sqrt(1.0 + x * x);
        CHECK(pts[k].wilson_lo <= theory);
        CHECK(theory <= pts[k].wilson_hi);
    }
}

TEST_CASE("d=4 tail slope is at most -2.8") {
    Ensemble e = ens_of(cyl(4, 1.0), 61, 100, 4000, 100);
    auto pts = tail_survival(e, {2.0, 2.83, 4.0, 5.66, 8.0, 11.3, 16.0, 20.0});
    double slope = survival_loglog_slope(pts);
    CHECK(slope <= -2.8);
}

TEST_CASE("induced chords on nested cylinders (2,1)") {
    json params = {{"outer", {{"family", "StraightCylinder"}, {"params", {{"radius", 2.0}}}}},
                   {"inner_radius", 1.0}};
    TubeModel nested = TubeModel::build(Family::NestedPair, 3, params, 67);
    Ensemble e = ens_of(nested, 71, 200, 600, 100);
    InducedChordStats st = induced_chord_stats(e);
    CHECK(st.crossings > 10000);
    // <P[I]>_Q = |dS| / Z = 2 pi / 4 pi = 1/2
    CHECK(std::fabs(st.intersect_freq.value - 0.5) < 4.0 * st.intersect_freq.std_error);
    CHECK(st.ks_position < st.ks_gate);
    CHECK(st.ks_direction < st.ks_gate);

    CHECK_THROWS_AS(induced_chord_stats(ens_of(cyl(3, 1.0), 1, 10, 10)), GeometryError);
}

TEST_CASE("invariant histogram: cylinder angles and strip alphas") {
    Ensemble ec = ens_of(cyl(3, 1.0), 73, 30, 30500, 500);
    HitHistogramResult hc = invariant_histogram(ec, 20, 16);
    CHECK(hc.dof == 19);
    CHECK(hc.pass);

    TubeModel cs = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 79);
    Ensemble es = ens_of(cs, 83, 30, 30500, 500);
    HitHistogramResult hs = invariant_histogram(es, 40, 16);
    CHECK(hs.dof == 39);
    CHECK(hs.pass);

    TubeModel rc = TubeModel::build(Family::RotationalCosine, 3,
                                    json{{"base_radius", 2.0}, {"amplitude", 1.0}}, 89);
    Ensemble er = ens_of(rc, 97, 30, 30500, 500);
    HitHistogramResult hr = invariant_histogram(er, 40, 16);
    CHECK(hr.pass);

    TubeModel pk = TubeModel::build(
        Family::RotationalPoissonKnot, 3, json{{"rate", 1.0}, {"r_min", 0.5}, {"r_max", 1.5}}, 1);
    CHECK_THROWS_AS(invariant_histogram(ens_of(pk, 1, 30, 1000000), 20), GeometryError);
}

TEST_CASE("hit histogram on a stored trajectory agrees with the streaming one") {
    TubeModel t = cyl(3, 1.0);
    Rng rng = Rng::stream(5, stream_tag::kTrajectory, 0);
    Trajectory traj = krw_trajectory(t, default_start(t, 5, 0), 200000, rng);
    HitHistogramResult h = hit_histogram(t, traj, 20, 100);
    CHECK(h.pass);
}

TEST_CASE("normality of rescaled strip endpoints (bounded chords)") {
    // CosineStrip2D has bounded jumps, so all endpoint moments are finite.
    TubeModel cs = TubeModel::build(Family::CosineStrip2D, 2, json{{"width", 1.0}}, 103);
    Ensemble e = ens_of(cs, 101, 10000, 4160, 64);
    auto rows = endpoint_displacements(e, {1024, 4096});
    std::vector<double> scaled;
    for (double x : rows[1]) scaled.push_back(x / 64.0);
    NormalityReport rep = normality_check(scaled);
    CHECK(std::fabs(rep.skewness) < 3.0 * rep.skew_se);
    CHECK(std::fabs(rep.ex_kurtosis) < 3.0 * rep.kurt_se);

    // diffusive scaling: variance ratio between spans 4096 and 1024 is 4
    MomentAccumulator v1, v4;
    for (double x : rows[0]) v1.add(x);
    for (double x : rows[1]) v4.add(x);
    double ratio = v4.sample_variance() / v1.sample_variance();
    double relvar = (v1.excess_kurtosis() + 2.0) / v1.count() + (v4.excess_kurtosis() + 2.0) / v4.count();
    double se_ratio = ratio * std::sqrt(relvar);
    CHECK(std::fabs(ratio - 4.0) < 4.0 * se_ratio);

    CHECK_THROWS_AS(normality_check(std::vector<double>(100, 0.0)), InsufficientData);
}

TEST_CASE("worker count does not change results") {
    for (int workers : {1, 3, 8}) {
        Ensemble e = ens_of(cyl(3, 1.0), 131, 64, 500, 50, workers);
        Estimate m = estimate_mean_chord(e);
        static double ref_value = 0.0, ref_se = 0.0;
        if (workers == 1) {
            ref_value = m.value;
            ref_se = m.std_error;
        } else {
            CHECK(m.value == ref_value);
            CHECK(m.std_error == ref_se);
        }
    }
}

TEST_CASE("diffusivity report bundles the identities") {
    Ensemble e = ens_of(cyl(3, 1.0), 137, 150, 1500, 100);
    DiffusivityReport rep = diffusivity_report(e, 700.0);
    CHECK(rep.z_const == doctest::Approx(2 * M_PI).epsilon(1e-9));
    CHECK(rep.mean_section == doctest::Approx(M_PI).epsilon(1e-9));
    CHECK(rep.predicted_rate_value == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::fabs(rep.rate_n_over_t.value - 0.5) < 4.0 * rep.rate_n_over_t.std_error);
    CHECK(rep.sigma_hat2_from_rate_product ==
          doctest::Approx(rep.sigma2_discrete.slope.value * rep.rate_n_over_t.value));
}
