#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ktube/profile.hpp"
#include "ktube/rng.hpp"
#include "ktube/vec.hpp"

namespace ktube {

enum class Family {
    StraightCylinder,
    CosineStrip2D,
    RotationalCosine,
    RotationalPoissonKnot,
    NestedPair,
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Point on the tube boundary with its inward normal data.
struct BoundaryPoint {
    Vec position;        // in R^d
    double alpha = 0.0;  // = position . e
    Vec normal;          // full inward normal, unit
    Vec section_normal;  // inward normal of the section, axial component 0
    double kappa = 1.0;  // normal . section_normal, in (0,1]
    bool regular = true;
    int wall = -1;  // 2D strips: 0 = lower, 1 = upper; rotational: -1
};

struct SectionInfo {
    double alpha = 0.0;
    double volume = 0.0;            // (d-1)-volume of the section
    double boundary_measure = 0.0;  // (d-2)-measure of its boundary (2 in d=2)
};

// One wall of a 2D strip: u = scale * profile(alpha) + offset.
struct WallCurve {
    Profile profile;
    double scale = 1.0;
    double offset = 0.0;

    double value(double a) const { return scale * profile.value(a) + offset; }
    double deriv(double a) const { return scale * profile.deriv(a); }
    double max_abs_slope() const { return std::abs(scale) * profile.max_abs_slope(); }
    double curvature_bound() const { return std::abs(scale) * profile.curvature_bound(); }
};

enum class GeomKind { Rotational, Strip };

// Immutable realization of a random tube. Cheap to copy (profiles share
// their knot tables); all queries are const and thread-safe.
class TubeModel {
public:
    static TubeModel build(Family family, int dimension, const nlohmann::json& params,
                           std::uint64_t seed);
    static TubeModel from_json(const nlohmann::json& spec);
    nlohmann::json to_json() const;

    Family family() const { return family_; }
    int dimension() const { return d_; }
    std::uint64_t seed() const { return seed_; }
    double m_hat() const { return m_hat_; }

    GeomKind geom_kind() const { return kind_; }
    const Profile& radial() const { return radial_; }
    const WallCurve& lower_wall() const { return lower_; }
    const WallCurve& upper_wall() const { return upper_; }

    bool has_inner_cylinder() const { return inner_radius_ > 0.0; }
    double inner_radius() const { return inner_radius_; }

    // Numerical contract constants.
    double boundary_tol() const { return 1e-9 * m_hat_; }
    double hit_exclusion() const { return 1e-9 * m_hat_; }
    double max_flight() const { return 1e6 * m_hat_; }
    static constexpr double knot_tol = 1e-9;

    bool contains(const Vec& x) const;
    BoundaryPoint boundary_point_at(const Vec& x) const;  // throws NotOnBoundary
    SectionInfo section_slice(double alpha) const;
    double slab_surface_area(double a, double b) const;
    BoundaryPoint sample_boundary_uniform(double a, double b, Rng& rng) const;

    // Mean section volume over [a, b] (quadrature for smooth profiles).
    double mean_section_volume(double a, double b) const;

private:
    Family family_ = Family::StraightCylinder;
    int d_ = 3;
    std::uint64_t seed_ = 0;
    GeomKind kind_ = GeomKind::Rotational;
    Profile radial_;
    WallCurve lower_, upper_;
    double m_hat_ = 1.0;
    double inner_radius_ = 0.0;
    double phase_ = 0.0;
    nlohmann::json params_;
};

// Volume of the unit ball in R^k and area of the unit sphere S^{k-1}.
double unit_ball_volume(int k);
double unit_sphere_area(int k);

}  // namespace ktube
