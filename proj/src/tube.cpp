#include "ktube/tube.hpp"

#include <cmath>

#include "ktube/errors.hpp"
#include "ktube/quadrature.hpp"

namespace ktube {

namespace {
constexpr double kTwoPi = 6.283185307179586476925287;

double require_positive(const nlohmann::json& params, const std::string& key) {
    if (!params.contains(key)) throw InvalidParams("missing param: " + key);
    double v = params.at(key).get<double>();
    if (!(v > 0.0)) throw InvalidParams("constraint violated: " + key + " > 0");
    return v;
}

// Adaptive quadrature aliased on exactly periodic integrands sampled at
// period multiples; integrate one period and scale instead.
double integrate_periodic(const std::function<double(double)>& f, double a, double b,
                          double period, double abs_tol) {
    double span = b - a;
    if (span <= 2.0 * period) return integrate(f, a, b, abs_tol, 1e-12);
    double k = std::floor(span / period);
    double one = integrate(f, a, a + period, abs_tol, 1e-12);
    return k * one + integrate(f, a + k * period, b, abs_tol, 1e-12);
}

// Exact integral of R(alpha)^p over [a, b] for a piecewise-linear profile.
double integrate_pl_power(const KnotTable& table, double a, double b, int p) {
    double total = 0.0;
    std::size_t i = table.segment(a);
    double cur = a;
    while (cur < b) {
        double seg_end = std::min(b, table.knots[i + 1].alpha);
        double m = (table.knots[i + 1].radius - table.knots[i].radius) /
                   (table.knots[i + 1].alpha - table.knots[i].alpha);
        double R0 = table.value(cur);
        double R1 = table.value(seg_end);
        if (p == 0) {
            total += seg_end - cur;
        } else if (m == 0.0) {
            total += std::pow(R0, p) * (seg_end - cur);
        } else {
            total += (std::pow(R1, p + 1) - std::pow(R0, p + 1)) / ((p + 1) * m);
        }
        cur = seg_end;
        ++i;
    }
    return total;
}
}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::StraightCylinder: return "StraightCylinder";
        case Family::CosineStrip2D: return "CosineStrip2D";
        case Family::RotationalCosine: return "RotationalCosine";
        case Family::RotationalPoissonKnot: return "RotationalPoissonKnot";
        case Family::NestedPair: return "NestedPair";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "StraightCylinder") return Family::StraightCylinder;
    if (name == "CosineStrip2D") return Family::CosineStrip2D;
    if (name == "RotationalCosine") return Family::RotationalCosine;
    if (name == "RotationalPoissonKnot") return Family::RotationalPoissonKnot;
    if (name == "NestedPair") return Family::NestedPair;
    throw InvalidParams("unknown family: " + name);
}

double unit_ball_volume(int k) {
    if (k == 0) return 1.0;
    return std::pow(M_PI, 0.5 * k) / std::tgamma(0.5 * k + 1.0);
}

double unit_sphere_area(int k) {
    // Area of S^{k-1} in R^k; S^0 = two points.
    if (k == 1) return 2.0;
    return 2.0 * std::pow(M_PI, 0.5 * k) / std::tgamma(0.5 * k);
}

TubeModel TubeModel::build(Family family, int dimension, const nlohmann::json& params,
                           std::uint64_t seed) {
    if (dimension < 2 || dimension > kMaxDim)
        throw InvalidParams("constraint violated: 2 <= dimension <= 8");

    TubeModel t;
    t.family_ = family;
    t.d_ = dimension;
    t.seed_ = seed;
    t.params_ = params;
    t.phase_ = kTwoPi * Rng::stream(seed, stream_tag::kTubePhase).uniform();

    auto as_strip = [&](const Profile& radius_profile) {
        t.kind_ = GeomKind::Strip;
        t.lower_ = WallCurve{radius_profile, -1.0, 0.0};
        t.upper_ = WallCurve{radius_profile, +1.0, 0.0};
    };

    switch (family) {
        case Family::StraightCylinder: {
            double radius;
            if (dimension == 2 && params.contains("width"))
                radius = 0.5 * require_positive(params, "width");
            else
                radius = require_positive(params, "radius");
            Profile p = Profile::constant(radius);
            if (dimension == 2) {
                as_strip(p);
            } else {
                t.kind_ = GeomKind::Rotational;
                t.radial_ = p;
            }
            t.m_hat_ = radius;
            break;
        }
        case Family::CosineStrip2D: {
            if (dimension != 2) throw InvalidParams("constraint violated: CosineStrip2D needs d = 2");
            double width = require_positive(params, "width");
            double amp = params.value("amplitude", 1.0);
            if (!(amp > 0.0)) throw InvalidParams("constraint violated: amplitude > 0");
            Profile base = Profile::cosine(0.0, amp, t.phase_);
            t.kind_ = GeomKind::Strip;
            t.lower_ = WallCurve{base, 1.0, 0.0};
            t.upper_ = WallCurve{base, 1.0, width};
            t.m_hat_ = amp + width;
            break;
        }
        case Family::RotationalCosine: {
            double r0 = require_positive(params, "base_radius");
            double amp = params.value("amplitude", 0.0);
            if (!(amp >= 0.0)) throw InvalidParams("constraint violated: amplitude >= 0");
            if (!(amp < r0)) throw InvalidParams("constraint violated: amplitude < base_radius");
            Profile p = Profile::cosine(r0, amp, t.phase_);
            if (dimension == 2) {
                as_strip(p);
            } else {
                t.kind_ = GeomKind::Rotational;
                t.radial_ = p;
            }
            t.m_hat_ = r0 + amp;
            break;
        }
        case Family::RotationalPoissonKnot: {
            double rate = require_positive(params, "rate");
            double r_min = require_positive(params, "r_min");
            double r_max = require_positive(params, "r_max");
            if (!(r_min < r_max)) throw InvalidParams("constraint violated: r_min < r_max");
            Profile p = Profile::poisson_knots(seed, rate, r_min, r_max);
            if (dimension == 2) {
                as_strip(p);
            } else {
                t.kind_ = GeomKind::Rotational;
                t.radial_ = p;
            }
            t.m_hat_ = r_max;
            break;
        }
        case Family::NestedPair: {
            if (!params.contains("outer")) throw InvalidParams("missing param: outer");
            const auto& outer = params.at("outer");
            Family of = family_from_name(outer.at("family").get<std::string>());
            if (of == Family::NestedPair || of == Family::CosineStrip2D)
                throw InvalidParams("constraint violated: NestedPair outer must be rotational");
            TubeModel base = TubeModel::build(of, dimension, outer.at("params"), seed);
            double inner = require_positive(params, "inner_radius");
            double outer_min = base.kind_ == GeomKind::Rotational
                                   ? base.radial_.min_value()
                                   : base.upper_.profile.min_value();  // symmetric strip half-width
            if (!(inner < outer_min))
                throw InvalidParams("constraint violated: inner_radius < min outer radius");
            t.kind_ = base.kind_;
            t.radial_ = base.radial_;
            t.lower_ = base.lower_;
            t.upper_ = base.upper_;
            t.m_hat_ = base.m_hat_;
            t.inner_radius_ = inner;
            break;
        }
    }
    return t;
}

TubeModel TubeModel::from_json(const nlohmann::json& spec) {
    for (auto it = spec.begin(); it != spec.end(); ++it) {
        const std::string& k = it.key();
        if (k != "family" && k != "dimension" && k != "params" && k != "seed")
            throw InvalidParams("unknown tube spec key: " + k);
    }
    if (!spec.contains("seed")) throw InvalidParams("missing param: seed");
    return build(family_from_name(spec.at("family").get<std::string>()),
                 spec.at("dimension").get<int>(),
                 spec.value("params", nlohmann::json::object()),
                 spec.at("seed").get<std::uint64_t>());
}

nlohmann::json TubeModel::to_json() const {
    return nlohmann::json{{"family", family_name(family_)},
                          {"dimension", d_},
                          {"params", params_},
                          {"seed", seed_},
                          {"realized", {{"phase", phase_}}}};
}

bool TubeModel::contains(const Vec& x) const {
    double a = x.axial();
    if (kind_ == GeomKind::Rotational) {
        double r2 = x.transverse_norm2();
        double R = radial_.value(a);
        return r2 < R * R;
    }
    double u = x[1];
    return lower_.value(a) < u && u < upper_.value(a);
}

BoundaryPoint TubeModel::boundary_point_at(const Vec& x) const {
    BoundaryPoint bp;
    bp.position = x;
    bp.alpha = x.axial();
    double tol = boundary_tol();

    if (kind_ == GeomKind::Rotational) {
        double r = x.transverse_norm();
        double R = radial_.value(bp.alpha);
        if (std::fabs(r - R) > tol) throw NotOnBoundary("point is not on the tube boundary");
        double dR = radial_.deriv(bp.alpha);
        double denom = std::sqrt(1.0 + dR * dR);
        bp.normal = Vec(d_);
        bp.section_normal = Vec(d_);
        bp.normal[0] = dR / denom;
        for (int i = 1; i < d_; ++i) {
            double ui = x[i] / r;
            bp.normal[i] = -ui / denom;
            bp.section_normal[i] = -ui;
        }
        bp.kappa = 1.0 / denom;
    } else {
        double u = x[1];
        double lo = lower_.value(bp.alpha);
        double up = upper_.value(bp.alpha);
        bp.normal = Vec(2);
        bp.section_normal = Vec(2);
        double slope;
        if (std::fabs(u - lo) <= tol) {
            bp.wall = 0;
            slope = lower_.deriv(bp.alpha);
            double denom = std::sqrt(1.0 + slope * slope);
            bp.normal[0] = -slope / denom;
            bp.normal[1] = 1.0 / denom;
            bp.section_normal[1] = 1.0;
            bp.kappa = 1.0 / denom;
        } else if (std::fabs(up - u) <= tol) {
            bp.wall = 1;
            slope = upper_.deriv(bp.alpha);
            double denom = std::sqrt(1.0 + slope * slope);
            bp.normal[0] = slope / denom;
            bp.normal[1] = -1.0 / denom;
            bp.section_normal[1] = -1.0;
            bp.kappa = 1.0 / denom;
        } else {
            throw NotOnBoundary("point is not on the strip boundary");
        }
    }

    bp.regular = true;
    const Profile& prof = kind_ == GeomKind::Rotational ? radial_ : lower_.profile;
    if (prof.kind() == ProfileKind::PiecewiseLinear) {
        auto table = prof.knot_process()->ensure(bp.alpha - 1.0, bp.alpha + 1.0);
        std::size_t i = table->segment(bp.alpha);
        if (std::fabs(bp.alpha - table->knots[i].alpha) < knot_tol ||
            std::fabs(table->knots[i + 1].alpha - bp.alpha) < knot_tol)
            bp.regular = false;
    }
    if (std::fabs(std::fabs(bp.normal[0]) - 1.0) < 1e-12) bp.regular = false;
    return bp;
}

SectionInfo TubeModel::section_slice(double alpha) const {
    SectionInfo s;
    s.alpha = alpha;
    if (kind_ == GeomKind::Rotational) {
        double R = radial_.value(alpha);
        s.volume = unit_ball_volume(d_ - 1) * std::pow(R, d_ - 1);
        s.boundary_measure = unit_sphere_area(d_ - 1) * std::pow(R, d_ - 2);
    } else {
        s.volume = upper_.value(alpha) - lower_.value(alpha);
        s.boundary_measure = 2.0;  // counting measure on the two wall points
    }
    return s;
}

double TubeModel::slab_surface_area(double a, double b) const {
    if (!(a < b)) throw InvalidParams("constraint violated: a < b");
    if (kind_ == GeomKind::Rotational) {
        double shell = unit_sphere_area(d_ - 1);
        switch (radial_.kind()) {
            case ProfileKind::Constant: {
                double R = radial_.value(0.0);
                return shell * std::pow(R, d_ - 2) * (b - a);
            }
            case ProfileKind::PiecewiseLinear: {
                // Exact frustum areas per linear segment.
                auto table = radial_.knot_process()->ensure(a, b);
                double total = 0.0;
                std::size_t i = table->segment(a);
                double cur = a;
                while (cur < b) {
                    double seg_end = std::min(b, table->knots[i + 1].alpha);
                    double m = (table->knots[i + 1].radius - table->knots[i].radius) /
                               (table->knots[i + 1].alpha - table->knots[i].alpha);
                    double R0 = table->value(cur);
                    double R1 = table->value(seg_end);
                    double slant = std::sqrt(1.0 + m * m);
                    double integral;  // of R^{d-2} over [cur, seg_end]
                    if (d_ == 3) {
                        integral = 0.5 * (R0 + R1) * (seg_end - cur);
                    } else if (m == 0.0) {
                        integral = std::pow(R0, d_ - 2) * (seg_end - cur);
                    } else {
                        integral = (std::pow(R1, d_ - 1) - std::pow(R0, d_ - 1)) / ((d_ - 1) * m);
                    }
                    total += shell * slant * integral;
                    cur = seg_end;
                    ++i;
                }
                return total;
            }
            case ProfileKind::Cosine: {
                auto f = [&](double t) {
                    double R = radial_.value(t);
                    double dR = radial_.deriv(t);
                    return shell * std::pow(R, d_ - 2) * std::sqrt(1.0 + dR * dR);
                };
                return integrate_periodic(f, a, b, radial_.period(), 1e-9);
            }
        }
        return 0.0;
    }
    // Strip: each wall contributes its arc length.
    double total = 0.0;
    for (const WallCurve* w : {&lower_, &upper_}) {
        switch (w->profile.kind()) {
            case ProfileKind::Constant:
                total += b - a;
                break;
            case ProfileKind::PiecewiseLinear: {
                auto table = w->profile.knot_process()->ensure(a, b);
                std::size_t i = table->segment(a);
                double cur = a;
                while (cur < b) {
                    double seg_end = std::min(b, table->knots[i + 1].alpha);
                    double m = w->scale * (table->knots[i + 1].radius - table->knots[i].radius) /
                               (table->knots[i + 1].alpha - table->knots[i].alpha);
                    total += std::sqrt(1.0 + m * m) * (seg_end - cur);
                    cur = seg_end;
                    ++i;
                }
                break;
            }
            case ProfileKind::Cosine: {
                auto f = [&](double t) {
                    double s = w->deriv(t);
                    return std::sqrt(1.0 + s * s);
                };
                total += integrate_periodic(f, a, b, w->profile.period(), 1e-9);
                break;
            }
        }
    }
    return total;
}

BoundaryPoint TubeModel::sample_boundary_uniform(double a, double b, Rng& rng) const {
    if (!(a < b)) throw InvalidParams("constraint violated: a < b");
    if (kind_ == GeomKind::Rotational) {
        double slope_max = radial_.max_abs_slope();
        double bound = std::pow(radial_.max_value(), d_ - 2) * std::sqrt(1.0 + slope_max * slope_max);
        for (int it = 0; it < 1000000; ++it) {
            double alpha = rng.uniform(a, b);
            double R = radial_.value(alpha);
            double dR = radial_.deriv(alpha);
            double dens = std::pow(R, d_ - 2) * std::sqrt(1.0 + dR * dR);
            if (rng.uniform() * bound <= dens) {
                Vec dir = rng.unit_sphere(d_ - 1);
                Vec pos(d_);
                pos[0] = alpha;
                for (int i = 1; i < d_; ++i) pos[i] = R * dir[i - 1];
                return boundary_point_at(pos);
            }
        }
        throw GeometryError("boundary sampling rejection did not terminate");
    }
    double s_lo = lower_.max_abs_slope();
    double s_up = upper_.max_abs_slope();
    double bound = std::sqrt(1.0 + std::max(s_lo, s_up) * std::max(s_lo, s_up));
    for (int it = 0; it < 1000000; ++it) {
        double alpha = rng.uniform(a, b);
        bool up = rng.uniform() < 0.5;
        const WallCurve& w = up ? upper_ : lower_;
        double slope = w.deriv(alpha);
        double dens = std::sqrt(1.0 + slope * slope);
        if (rng.uniform() * bound <= dens) {
            Vec pos(2);
            pos[0] = alpha;
            pos[1] = w.value(alpha);
            return boundary_point_at(pos);
        }
    }
    throw GeometryError("boundary sampling rejection did not terminate");
}

double TubeModel::mean_section_volume(double a, double b) const {
    if (!(a < b)) throw InvalidParams("constraint violated: a < b");
    const Profile& prof = kind_ == GeomKind::Rotational ? radial_ : lower_.profile;
    switch (prof.kind()) {
        case ProfileKind::Constant:
            return section_slice(0.0).volume;
        case ProfileKind::Cosine: {
            auto f = [&](double t) { return section_slice(t).volume; };
            return integrate_periodic(f, a, b, prof.period(), 1e-9) / (b - a);
        }
        case ProfileKind::PiecewiseLinear: {
            auto table = prof.knot_process()->ensure(a, b);
            if (kind_ == GeomKind::Rotational)
                return unit_ball_volume(d_ - 1) * integrate_pl_power(*table, a, b, d_ - 1) / (b - a);
            return 2.0 * integrate_pl_power(*table, a, b, 1) / (b - a);
        }
    }
    return section_slice(0.0).volume;
}

}  // namespace ktube
