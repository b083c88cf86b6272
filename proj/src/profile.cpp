#include "ktube/profile.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "ktube/errors.hpp"

namespace ktube {

std::size_t KnotTable::segment(double alpha) const {
    // upper_bound over knot positions; callers guarantee alpha in [lo, hi].
    auto it = std::upper_bound(knots.begin(), knots.end(), alpha,
                               [](double a, const Knot& k) { return a < k.alpha; });
    std::size_t idx = static_cast<std::size_t>(it - knots.begin());
    if (idx == 0) return 0;
    if (idx >= knots.size()) return knots.size() - 2;
    return idx - 1;
}

double KnotTable::value(double alpha) const {
    std::size_t i = segment(alpha);
    const Knot& a = knots[i];
    const Knot& b = knots[i + 1];
    double t = (alpha - a.alpha) / (b.alpha - a.alpha);
    return a.radius + t * (b.radius - a.radius);
}

double KnotTable::deriv(double alpha) const {
    std::size_t i = segment(alpha);
    const Knot& a = knots[i];
    const Knot& b = knots[i + 1];
    return (b.radius - a.radius) / (b.alpha - a.alpha);
}

PoissonKnotProcess::PoissonKnotProcess(std::uint64_t seed, double rate, double r_min, double r_max)
    : seed_(seed), rate_(rate), r_min_(r_min), r_max_(r_max) {
    window_len_ = std::max(8.0, 8.0 / rate_);
    gap_ = 0.1 / rate_;
}

std::vector<Knot> PoissonKnotProcess::raw_window(long long w) const {
    // Zigzag-encode the signed window index into the stream key.
    std::uint64_t idx = w >= 0 ? 2ULL * static_cast<std::uint64_t>(w)
                               : 2ULL * static_cast<std::uint64_t>(-(w + 1)) + 1ULL;
    Rng rng = Rng::stream(seed_, stream_tag::kKnotWindow, idx);
    double lo = static_cast<double>(w) * window_len_;
    std::uint64_t n = rng.poisson(rate_ * window_len_);
    std::vector<Knot> out;
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        double a = lo + window_len_ * rng.uniform();
        double r = r_min_ + (r_max_ - r_min_) * rng.uniform();
        out.push_back({a, r});
    }
    std::sort(out.begin(), out.end(), [](const Knot& a, const Knot& b) { return a.alpha < b.alpha; });
    return out;
}

std::shared_ptr<const KnotTable> PoissonKnotProcess::build(double lo, double hi) const {
    // Collect raw knots with margin so hard-core thinning decisions near the
    // range edges see all their neighbours, then ensure one surviving knot
    // beyond each end for interpolation.
    double margin = window_len_;
    std::vector<Knot> raw;
    long long w0 = static_cast<long long>(std::floor((lo - margin) / window_len_));
    long long w1 = static_cast<long long>(std::floor((hi + margin) / window_len_));
    for (long long w = w0; w <= w1; ++w) {
        auto part = raw_window(w);
        raw.insert(raw.end(), part.begin(), part.end());
    }
    auto thin = [&](const std::vector<Knot>& in) {
        std::vector<Knot> out;
        out.reserve(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
            bool crowded = (i > 0 && in[i].alpha - in[i - 1].alpha < gap_) ||
                           (i + 1 < in.size() && in[i + 1].alpha - in[i].alpha < gap_);
            if (!crowded) out.push_back(in[i]);
        }
        return out;
    };
    std::vector<Knot> kept = thin(raw);

    // Extend outward until the kept set brackets [lo, hi].
    while (kept.empty() || kept.front().alpha > lo) {
        --w0;
        auto part = raw_window(w0);
        raw.insert(raw.begin(), part.begin(), part.end());
        kept = thin(raw);
        if (w0 < -(1LL << 40)) throw GeometryError("knot window extension ran away (left)");
    }
    while (kept.back().alpha < hi) {
        ++w1;
        auto part = raw_window(w1);
        raw.insert(raw.end(), part.begin(), part.end());
        kept = thin(raw);
        if (w1 > (1LL << 40)) throw GeometryError("knot window extension ran away (right)");
    }

    auto table = std::make_shared<KnotTable>();
    table->lo = lo;
    table->hi = hi;
    table->knots = std::move(kept);
    return table;
}

std::shared_ptr<const KnotTable> PoissonKnotProcess::ensure(double lo, double hi) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!table_ || table_->lo > lo || table_->hi < hi) {
        double nlo = lo, nhi = hi;
        if (table_) {
            // Grow geometrically to amortize repeated extensions.
            double span = std::max(table_->hi - table_->lo, hi - lo);
            nlo = std::min(lo, table_->lo - span);
            nhi = std::max(hi, table_->hi + span);
        }
        table_ = build(nlo, nhi);
    }
    return table_;
}

Profile Profile::constant(double r) {
    Profile p;
    p.kind_ = ProfileKind::Constant;
    p.base_ = r;
    return p;
}

Profile Profile::cosine(double base, double amplitude, double phase) {
    Profile p;
    p.kind_ = ProfileKind::Cosine;
    p.base_ = base;
    p.amp_ = amplitude;
    p.phase_ = phase;
    return p;
}

Profile Profile::poisson_knots(std::uint64_t seed, double rate, double r_min, double r_max) {
    Profile p;
    p.kind_ = ProfileKind::PiecewiseLinear;
    p.knots_ = std::make_shared<PoissonKnotProcess>(seed, rate, r_min, r_max);
    p.base_ = 0.5 * (r_min + r_max);
    return p;
}

double Profile::value(double alpha) const {
    switch (kind_) {
        case ProfileKind::Constant:
            return base_;
        case ProfileKind::Cosine:
            return base_ + amp_ * std::cos(alpha + phase_);
        case ProfileKind::PiecewiseLinear:
            return knots_->ensure(alpha, alpha)->value(alpha);
    }
    return base_;
}

double Profile::deriv(double alpha) const {
    switch (kind_) {
        case ProfileKind::Constant:
            return 0.0;
        case ProfileKind::Cosine:
            return -amp_ * std::sin(alpha + phase_);
        case ProfileKind::PiecewiseLinear:
            return knots_->ensure(alpha, alpha)->deriv(alpha);
    }
    return 0.0;
}

double Profile::min_value() const {
    switch (kind_) {
        case ProfileKind::Constant:
            return base_;
        case ProfileKind::Cosine:
            return base_ - amp_;
        case ProfileKind::PiecewiseLinear:
            return knots_->r_min();
    }
    return base_;
}

double Profile::max_value() const {
    switch (kind_) {
        case ProfileKind::Constant:
            return base_;
        case ProfileKind::Cosine:
            return base_ + amp_;
        case ProfileKind::PiecewiseLinear:
            return knots_->r_max();
    }
    return base_;
}

double Profile::max_abs_slope() const {
    switch (kind_) {
        case ProfileKind::Constant:
            return 0.0;
        case ProfileKind::Cosine:
            return amp_;
        case ProfileKind::PiecewiseLinear:
            return knots_->max_abs_slope();
    }
    return 0.0;
}

double Profile::curvature_bound() const {
    switch (kind_) {
        case ProfileKind::Constant:
            return 0.0;
        case ProfileKind::Cosine:
            return amp_;
        case ProfileKind::PiecewiseLinear:
            return 0.0;  // linear segments; handled exactly, never by bound
    }
    return 0.0;
}

double Profile::sq_curvature_bound() const {
    // |(R^2)''| = |2 R'^2 + 2 R R''|
    switch (kind_) {
        case ProfileKind::Constant:
            return 0.0;
        case ProfileKind::Cosine:
            return 2.0 * amp_ * amp_ + 2.0 * (base_ + amp_) * amp_;
        case ProfileKind::PiecewiseLinear:
            return 0.0;
    }
    return 0.0;
}

}  // namespace ktube
