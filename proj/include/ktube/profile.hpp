#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "ktube/rng.hpp"

namespace ktube {

struct Knot {
    double alpha;
    double radius;
};

// Materialized piecewise-linear profile over [lo, hi] with at least one knot
// on each side of the range. Immutable once built.
struct KnotTable {
    double lo = 0.0, hi = 0.0;
    std::vector<Knot> knots;

    // Index of the segment [knots[i], knots[i+1]] containing alpha.
    std::size_t segment(double alpha) const;
    double value(double alpha) const;
    double deriv(double alpha) const;
};

// Stationary knot process: homogeneous Poisson positions with i.i.d. radii,
// hard-core thinned (Matern I) so segment slopes stay bounded. Knots are
// generated per fixed window from a counter-based stream keyed by the window
// index, so any materialized range is consistent with any other.
class PoissonKnotProcess {
public:
    PoissonKnotProcess(std::uint64_t seed, double rate, double r_min, double r_max);

    // Returns a table covering at least [lo, hi]; extends lazily and
    // thread-safely. The returned snapshot stays valid for the caller.
    std::shared_ptr<const KnotTable> ensure(double lo, double hi) const;

    double rate() const { return rate_; }
    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    double hard_core_gap() const { return gap_; }
    double max_abs_slope() const { return (r_max_ - r_min_) / gap_; }

private:
    std::vector<Knot> raw_window(long long w) const;
    std::shared_ptr<const KnotTable> build(double lo, double hi) const;

    std::uint64_t seed_;
    double rate_, r_min_, r_max_;
    double window_len_;
    double gap_;
    mutable std::mutex mutex_;
    mutable std::shared_ptr<const KnotTable> table_;
};

enum class ProfileKind { Constant, Cosine, PiecewiseLinear };

// Radius profile R(alpha) of a tube of revolution (also reused as the wall
// curve of 2D strips). Non-virtual tagged union: the ray caster specializes
// per kind.
class Profile {
public:
    static Profile constant(double r);
    static Profile cosine(double base, double amplitude, double phase);
    static Profile poisson_knots(std::uint64_t seed, double rate, double r_min, double r_max);

    ProfileKind kind() const { return kind_; }

    double value(double alpha) const;
    double deriv(double alpha) const;

    double min_value() const;
    double max_value() const;
    double max_abs_slope() const;

    // sup |c''| of the curve itself (smooth kinds).
    double curvature_bound() const;
    // sup |(R^2)''| (smooth kinds), used by the rotational ray caster.
    double sq_curvature_bound() const;

    bool periodic() const { return kind_ == ProfileKind::Cosine; }
    double period() const { return 6.283185307179586476925287; }
    double phase() const { return phase_; }
    double base() const { return base_; }
    double amplitude() const { return amp_; }

    const PoissonKnotProcess* knot_process() const { return knots_.get(); }

private:
    ProfileKind kind_ = ProfileKind::Constant;
    double base_ = 1.0, amp_ = 0.0, phase_ = 0.0;
    std::shared_ptr<const PoissonKnotProcess> knots_;
};

}  // namespace ktube
