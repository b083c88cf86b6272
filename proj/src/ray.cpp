#include "ktube/ray.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "ktube/errors.hpp"
#include "ktube/quadrature.hpp"

namespace ktube {

namespace {

constexpr double kNoRoot = std::numeric_limits<double>::infinity();

// Roots of a t^2 + b t + c, ascending. Near-double roots (separation below
// 1e-12) are tangencies and reported as no-crossing.
struct QuadRoots {
    double r0 = kNoRoot, r1 = kNoRoot;
    int n = 0;
};

QuadRoots solve_quadratic(double a, double b, double c) {
    QuadRoots out;
    if (std::fabs(a) < 1e-300) {
        if (std::fabs(b) < 1e-300) return out;
        out.r0 = -c / b;
        out.n = 1;
        return out;
    }
    double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) return out;
    double sq = std::sqrt(disc);
    if (sq < 1e-12 * std::fabs(a)) return out;  // tangency
    double q = -0.5 * (b + (b >= 0 ? sq : -sq));
    double x0 = q / a;
    double x1 = (q != 0.0) ? c / q : -b / a - x0;
    if (x0 > x1) std::swap(x0, x1);
    out.r0 = x0;
    out.r1 = x1;
    out.n = 2;
    return out;
}

// First root of a smooth f on [t0, t1] with |f''| <= m2, starting from
// f(t0) < 0. Marches by the certified Taylor step
//   f(t+s) <= f(t) + f'(t) s + m2 s^2 / 2,
// which cannot skip a sign change; near a crossing it hunts a bracket and
// polishes with Brent. Excursions shallower than the tolerance band
// (micro-grazes) are deliberately skipped.
template <class F, class DF>
std::optional<double> march_first_root(const F& f, const DF& df, double m2, double t0, double t1) {
    constexpr double kAtol = 1e-7;
    constexpr double kSpanCap = 3e-5;
    double t = t0;
    double fa = f(t);
    if (fa >= 0.0) return t;
    long evals = 0;
    auto bracketed = [&](double a, double b) {
        return brent_root([&](double x) { return f(x); }, a, b, 1e-14);
    };
    while (t < t1 && evals < 2000000) {
        double d = df(t);
        double s = 0.999 * (-d + std::sqrt(d * d - 2.0 * m2 * fa)) / m2;
        if (s > kAtol) {
            double tn = std::min(t + s, t1);
            double fn = f(tn);
            ++evals;
            if (fn >= 0.0) return bracketed(t, tn);
            t = tn;
            fa = fn;
            continue;
        }
        // Crossing (or graze apex) just ahead.
        double span = 4.0 * kAtol;
        for (;;) {
            double tn = std::min(t + span, t1);
            double fn = f(tn);
            ++evals;
            if (fn >= 0.0) return bracketed(t, tn);
            if (fn < fa || span >= kSpanCap || tn >= t1) {
                t = tn;
                fa = fn;
                break;
            }
            span *= 2.0;
        }
        if (t >= t1) break;
    }
    return std::nullopt;
}

struct CastResult {
    double t = kNoRoot;
    bool graze = false;
    bool degenerate_start = false;
};

// ---- rotational tubes (d >= 3) ------------------------------------------

CastResult cast_rotational(const TubeModel& tube, const Vec& x, const Vec& v) {
    const Profile& prof = tube.radial();
    const int d = tube.dimension();
    const double eps = tube.hit_exclusion();
    const double lmax = tube.max_flight();

    double u2 = 0.0, uv = 0.0, v2 = 0.0;
    for (int i = 1; i < d; ++i) {
        u2 += x[i] * x[i];
        uv += x[i] * v[i];
        v2 += v[i] * v[i];
    }
    double va = v[0];
    double a0 = x[0];
    auto qval = [&](double t) { return u2 + 2.0 * t * uv + t * t * v2; };

    // Radius constant along the ray: a single exact quadratic.
    if (prof.kind() == ProfileKind::Constant ||
        (prof.kind() == ProfileKind::Cosine && std::fabs(va) < 1e-300)) {
        if (v2 < 1e-300) return {};  // axis-parallel, never reaches the wall
        double R = prof.value(a0);
        QuadRoots roots = solve_quadratic(v2, 2.0 * uv, u2 - R * R);
        CastResult c;
        for (double r : {roots.r0, roots.r1})
            if (r > eps && r < c.t) c.t = r;
        if (c.t > lmax) return {};
        return c;
    }

    if (prof.kind() == ProfileKind::Cosine) {
        // March window: beyond the outer envelope ||u(t)|| = R_max the ray has
        // certainly crossed the wall, so a bracket is guaranteed inside.
        double rmax = prof.max_value();
        double cap = lmax;
        if (v2 > 0.0) {
            QuadRoots env = solve_quadratic(v2, 2.0 * uv, u2 - rmax * rmax * 1.0000001);
            if (env.n == 2 && env.r1 > 0.0) cap = std::min(lmax, env.r1 + 1e-9);
        }
        double m2 = 2.0 * v2 + prof.sq_curvature_bound() * va * va;
        if (m2 <= 0.0) m2 = 1e-12;
        auto f = [&](double t) {
            double R = prof.value(a0 + t * va);
            return qval(t) - R * R;
        };
        auto dfdt = [&](double t) {
            double al = a0 + t * va;
            return 2.0 * (uv + t * v2) - 2.0 * prof.value(al) * prof.deriv(al) * va;
        };
        auto r = march_first_root(f, dfdt, m2, eps, cap);
        if (!r) return {};
        CastResult c;
        c.t = *r;
        c.degenerate_start = (*r <= eps);
        return c;
    }

    // Piecewise-linear profile: exact quadratic per knot segment.
    const PoissonKnotProcess* proc = prof.knot_process();
    double cap = lmax;
    if (v2 > 0.0) {
        double rmax = proc->r_max();
        QuadRoots env = solve_quadratic(v2, 2.0 * uv, u2 - rmax * rmax * 1.0000001);
        if (env.n == 2 && env.r1 > 0.0) cap = std::min(lmax, env.r1 + 1e-9);
    }
    double reach = std::fabs(va) * cap + 1.0;
    auto table = proc->ensure(a0 - reach, a0 + reach);

    auto solve_cell = [&](std::size_t seg, double tl, double th) -> CastResult {
        const Knot& k0 = table->knots[seg];
        const Knot& k1 = table->knots[seg + 1];
        double m = (k1.radius - k0.radius) / (k1.alpha - k0.alpha);
        double p = k0.radius + m * (a0 - k0.alpha);
        double q = m * va;
        QuadRoots roots = solve_quadratic(v2 - q * q, 2.0 * (uv - p * q), u2 - p * p);
        CastResult c;
        double lo = std::max(tl, eps);
        for (double r : {roots.r0, roots.r1}) {
            if (r >= lo && r <= th && r < c.t) c.t = r;
        }
        if (c.t < kNoRoot) {
            double ah = a0 + c.t * va;
            if (std::fabs(ah - k0.alpha) < TubeModel::knot_tol ||
                std::fabs(k1.alpha - ah) < TubeModel::knot_tol)
                c.graze = true;
        }
        return c;
    };

    if (std::fabs(va) < 1e-300) {
        std::size_t seg = table->segment(a0);
        return solve_cell(seg, eps, cap);
    }

    int dir = va > 0 ? 1 : -1;
    std::ptrdiff_t seg = static_cast<std::ptrdiff_t>(table->segment(a0));
    double t_cursor = 0.0;
    while (t_cursor < cap) {
        if (seg < 0 || seg + 1 >= static_cast<std::ptrdiff_t>(table->knots.size())) {
            double na = a0 + (dir > 0 ? 1.0 : -1.0) * (std::fabs(va) * cap + 2.0);
            table = proc->ensure(std::min(a0, na) - 1.0, std::max(a0, na) + 1.0);
            seg = static_cast<std::ptrdiff_t>(table->segment(a0 + t_cursor * va));
            continue;
        }
        double a_lo = table->knots[seg].alpha;
        double a_hi = table->knots[seg + 1].alpha;
        double t_in = dir > 0 ? (a_lo - a0) / va : (a_hi - a0) / va;
        double t_out = dir > 0 ? (a_hi - a0) / va : (a_lo - a0) / va;
        t_in = std::max(t_in, 0.0);
        if (t_in > cap) break;
        CastResult c = solve_cell(static_cast<std::size_t>(seg), t_in, std::min(t_out, cap));
        if (c.t < kNoRoot) return c;
        t_cursor = t_out;
        seg += dir;
    }
    return {};
}

// ---- 2D strips ------------------------------------------------------------

struct WallContext {
    const WallCurve* wall;
    int index;  // 0 lower, 1 upper
    double sign;  // f = sign * (wall(alpha) - u); inside has f < 0
};

CastResult cast_strip(const TubeModel& tube, const Vec& x, const Vec& v) {
    const double eps = tube.hit_exclusion();
    const double lmax = tube.max_flight();
    double a0 = x[0], u0 = x[1];
    double va = v[0], vu = v[1];

    const WallCurve& lo = tube.lower_wall();
    const WallCurve& up = tube.upper_wall();

    auto kind = lo.profile.kind();  // both walls share the profile kind

    CastResult best;

    auto consider = [&](double t) {
        if (t > eps && t < best.t && t <= lmax) {
            best.t = t;
            best.graze = false;
        }
    };

    if (kind == ProfileKind::Constant) {
        if (std::fabs(vu) < 1e-300) return {};
        consider((lo.value(0.0) - u0) / vu);
        consider((up.value(0.0) - u0) / vu);
        return best;
    }

    if (kind == ProfileKind::Cosine) {
        // f_low = low(a) - u  (negative inside), f_up = u - up(a).
        auto march_wall = [&](const WallCurve& w, bool is_lower) -> std::optional<double> {
            double v1 = w.scale * w.profile.min_value() + w.offset;
            double v2 = w.scale * w.profile.max_value() + w.offset;
            double lo_v = std::min(v1, v2);
            double hi_v = std::max(v1, v2);
            double cap = lmax;
            if (is_lower) {
                // hit when u(t) = wall(t); wall values in [lo_v, hi_v], u above.
                if (vu > 0.0) {
                    if (u0 >= hi_v) return std::nullopt;
                    cap = std::min(cap, (hi_v - u0) / vu + 1e-9);
                } else if (vu < 0.0) {
                    cap = std::min(cap, (lo_v - u0) / vu + 1e-9);
                } else if (u0 <= lo_v || u0 >= hi_v) {
                    return std::nullopt;
                }
            } else {
                if (vu < 0.0) {
                    if (u0 <= lo_v) return std::nullopt;
                    cap = std::min(cap, (lo_v - u0) / vu + 1e-9);
                } else if (vu > 0.0) {
                    cap = std::min(cap, (hi_v - u0) / vu + 1e-9);
                } else if (u0 <= lo_v || u0 >= hi_v) {
                    return std::nullopt;
                }
            }
            double sgn = is_lower ? 1.0 : -1.0;
            auto f = [&](double t) { return sgn * (w.value(a0 + t * va) - (u0 + t * vu)); };
            if (std::fabs(va) < 1e-300) {
                // Wall height fixed along the ray: linear crossing.
                double c = w.value(a0);
                double t = (c - u0) / (std::fabs(vu) < 1e-300 ? 1e-300 : vu);
                if (t > eps && t <= cap) return t;
                return std::nullopt;
            }
            double m2 = w.curvature_bound() * va * va;
            if (m2 <= 0.0) m2 = 1e-12;
            auto dfdt = [&](double t) { return sgn * (w.deriv(a0 + t * va) * va - vu); };
            return march_first_root(f, dfdt, m2, eps, cap);
        };
        if (auto r = march_wall(lo, true)) consider(*r);
        if (auto r = march_wall(up, false)) consider(*r);
        return best;
    }

    // Piecewise-linear strip walls (symmetric +-R(alpha)).
    const PoissonKnotProcess* proc = lo.profile.knot_process();
    double cap = lmax;
    if (std::fabs(vu) > 0.0) {
        double exit_lo = (-proc->r_max() - u0) / vu;
        double exit_hi = (proc->r_max() - u0) / vu;
        double cand = std::max(exit_lo, exit_hi);
        if (cand > 0.0) cap = std::min(cap, cand + 1e-9);
    }
    double reach = std::fabs(va) * cap + 1.0;
    auto table = proc->ensure(a0 - reach, a0 + reach);

    auto solve_cell = [&](std::size_t seg, double tl, double th) -> CastResult {
        const Knot& k0 = table->knots[seg];
        const Knot& k1 = table->knots[seg + 1];
        double m = (k1.radius - k0.radius) / (k1.alpha - k0.alpha);
        double p = k0.radius + m * (a0 - k0.alpha);  // R(alpha(t)) = p + q t
        double q = m * va;
        CastResult c;
        double lo_t = std::max(tl, eps);
        // lower wall: u0 + t vu = -(p + q t); upper wall: u0 + t vu = p + q t
        double den_l = vu + q;
        if (std::fabs(den_l) > 1e-300) {
            double t = -(u0 + p) / den_l;
            if (t >= lo_t && t <= th && t < c.t) c.t = t;
        }
        double den_u = vu - q;
        if (std::fabs(den_u) > 1e-300) {
            double t = (p - u0) / den_u;
            if (t >= lo_t && t <= th && t < c.t) c.t = t;
        }
        if (c.t < kNoRoot) {
            double ah = a0 + c.t * va;
            if (std::fabs(ah - k0.alpha) < TubeModel::knot_tol ||
                std::fabs(k1.alpha - ah) < TubeModel::knot_tol)
                c.graze = true;
        }
        return c;
    };

    if (std::fabs(va) < 1e-300) {
        std::size_t seg = table->segment(a0);
        return solve_cell(seg, eps, cap);
    }
    int dir = va > 0 ? 1 : -1;
    std::ptrdiff_t seg = static_cast<std::ptrdiff_t>(table->segment(a0));
    double t_cursor = 0.0;
    while (t_cursor < cap) {
        if (seg < 0 || seg + 1 >= static_cast<std::ptrdiff_t>(table->knots.size())) {
            double na = a0 + (dir > 0 ? 1.0 : -1.0) * (std::fabs(va) * cap + 2.0);
            table = proc->ensure(std::min(a0, na) - 1.0, std::max(a0, na) + 1.0);
            seg = static_cast<std::ptrdiff_t>(table->segment(a0 + t_cursor * va));
            continue;
        }
        double a_lo = table->knots[seg].alpha;
        double a_hi = table->knots[seg + 1].alpha;
        double t_in = dir > 0 ? (a_lo - a0) / va : (a_hi - a0) / va;
        double t_out = dir > 0 ? (a_hi - a0) / va : (a_lo - a0) / va;
        t_in = std::max(t_in, 0.0);
        if (t_in > cap) break;
        CastResult c = solve_cell(static_cast<std::size_t>(seg), t_in, std::min(t_out, cap));
        if (c.t < kNoRoot) return c;
        t_cursor = t_out;
        seg += dir;
    }
    return {};
}

}  // namespace

RayHit next_hit_from(const TubeModel& tube, const Vec& x, const Vec& v) {
    CastResult cr = tube.geom_kind() == GeomKind::Rotational ? cast_rotational(tube, x, v)
                                                             : cast_strip(tube, x, v);
    RayHit out;
    if (cr.t == kNoRoot || cr.t > tube.max_flight()) {
        out.anomaly = RayAnomaly::MaxLengthExceeded;
        out.flight_length = tube.max_flight();
        return out;
    }
    if (cr.degenerate_start) {
        out.anomaly = RayAnomaly::KnotGraze;
        out.flight_length = cr.t;
        return out;
    }

    // Snap the hit exactly onto the surface before building the point.
    Vec pos = x + cr.t * v;
    if (tube.geom_kind() == GeomKind::Rotational) {
        double R = tube.radial().value(pos[0]);
        double r = pos.transverse_norm();
        if (r > 0.0) {
            double scale = R / r;
            for (int i = 1; i < tube.dimension(); ++i) pos[i] *= scale;
        }
    } else {
        double lo_gap = std::fabs(pos[1] - tube.lower_wall().value(pos[0]));
        double hi_gap = std::fabs(tube.upper_wall().value(pos[0]) - pos[1]);
        pos[1] = lo_gap <= hi_gap ? tube.lower_wall().value(pos[0])
                                  : tube.upper_wall().value(pos[0]);
    }
    out.hit = tube.boundary_point_at(pos);
    out.flight_length = distance(pos, x);
    if (cr.graze) out.anomaly = RayAnomaly::KnotGraze;
    return out;
}

RayHit next_hit(const TubeModel& tube, const Vec& x, const Vec& v) {
    if (x.dim() != tube.dimension() || v.dim() != tube.dimension())
        throw NotInterior("dimension mismatch");
    if (std::fabs(v.norm2() - 1.0) > 2.5e-12) throw NotInterior("direction must be a unit vector");
    if (!tube.contains(x)) {
        BoundaryPoint bp;
        try {
            bp = tube.boundary_point_at(x);
        } catch (const NotOnBoundary&) {
            throw NotInterior("ray start is outside the closed tube");
        }
        if (v.dot(bp.normal) <= 0.0)
            throw NotInterior("boundary start must point into the tube");
    }
    return next_hit_from(tube, x, v);
}

}  // namespace ktube
