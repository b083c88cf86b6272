#include "ktube/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "ktube/cosine.hpp"
#include "ktube/errors.hpp"
#include "ktube/quadrature.hpp"

namespace ktube {

namespace {
constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kWilsonZ = 3.2905;  // two-sided 99.9 percent

double column_variance(const std::vector<double>& flat, const std::vector<int>& rows, int cols,
                       int j) {
    double s = 0.0, s2 = 0.0;
    for (int r : rows) {
        double x = flat[static_cast<size_t>(r) * cols + j];
        s += x;
        s2 += x * x;
    }
    double n = static_cast<double>(rows.size());
    return (s2 - s * s / n) / (n - 1.0);
}

std::vector<std::uint64_t> dyadic_checkpoints(std::uint64_t burn, std::uint64_t steps) {
    std::vector<std::uint64_t> m;
    for (std::uint64_t v = 64; burn + v <= steps; v *= 2) m.push_back(v);
    return m;
}

}  // namespace

void parallel_trajectories(int n_trajectories, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, workers);
    if (workers == 1) {
        for (int i = 0; i < n_trajectories; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            long long lo = static_cast<long long>(n_trajectories) * w / workers;
            long long hi = static_cast<long long>(n_trajectories) * (w + 1) / workers;
            try {
                for (long long i = lo; i < hi; ++i) fn(static_cast<int>(i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t stream_chords(const Ensemble& ens, int index,
                            const std::function<void(std::uint64_t, const Chord&)>& fn) {
    Rng rng = Rng::stream(ens.seed, stream_tag::kTrajectory, static_cast<std::uint64_t>(index));
    BoundaryPoint cur = default_start(ens.tube, ens.seed, static_cast<std::uint64_t>(index));
    std::uint64_t anomalies = 0;
    for (std::uint64_t s = 0; s < ens.steps; ++s) {
        StepResult st = krw_step(ens.tube, cur, rng);
        anomalies += st.anomalies;
        fn(s, st.chord);
        cur = st.next;
    }
    if (ens.anomaly_counter) ens.anomaly_counter->fetch_add(anomalies);
    return anomalies;
}

double chord_constant(int d) {
    return std::sqrt(M_PI) * std::tgamma(0.5 * (d + 1)) * d / std::tgamma(0.5 * d + 1.0);
}

double predicted_rate(const TubeModel& tube, double a, double b) {
    double z = tube.slab_surface_area(a, b) / (b - a);
    double ms = tube.mean_section_volume(a, b);
    return z / (chord_constant(tube.dimension()) * ms);
}

double mean_chord_analytic(const TubeModel& tube, double a, double b) {
    return 1.0 / predicted_rate(tube, a, b);
}

BQuadrature b_quadrature(const TubeModel& cylinder) {
    if (cylinder.geom_kind() == GeomKind::Strip) {
        if (cylinder.lower_wall().profile.kind() != ProfileKind::Constant)
            throw InvalidParams("b_quadrature requires a straight cylinder");
        return {0.0, true};  // d = 2: infinite second moment
    }
    if (cylinder.radial().kind() != ProfileKind::Constant)
        throw InvalidParams("b_quadrature requires a straight cylinder");
    int d = cylinder.dimension();
    double rho = cylinder.radial().value(0.0);
    // The hemisphere average of (flight * e-component)^2 reduces, via the
    // exact direction->boundary change of variables and the closed-form
    // axial integral, to a single smooth quadrature over the transverse
    // angle between the start and landing radii:
    //   b = gamma_d rho^2 W_d 2^{(2-d)/2} |S^{d-3}|
    //       * int_0^pi (1 - cos t)^{(6-d)/2} sin^{d-3} t dt,
    //   W_d = Gamma(3/2) Gamma((d-2)/2) / Gamma((d+1)/2).
    double wd = std::tgamma(1.5) * std::tgamma(0.5 * (d - 2)) / std::tgamma(0.5 * (d + 1));
    double shell = unit_sphere_area(d - 2);
    double integral = integrate(
        [d](double t) {
            return std::pow(1.0 - std::cos(t), 0.5 * (6 - d)) * std::pow(std::sin(t), d - 3);
        },
        0.0, M_PI, 1e-12, 1e-9);
    double value =
        gamma_d(d) * rho * rho * wd * std::pow(2.0, 0.5 * (2 - d)) * shell * integral;
    return {value, false};
}

VarianceGrowth estimate_sigma2(const Ensemble& ens) {
    if (ens.n_trajectories < 100) throw InsufficientData("need at least 100 trajectories");
    if (ens.steps < 2 * ens.burn_in) throw InsufficientData("need steps >= 2 * burn_in");
    std::vector<std::uint64_t> cps = dyadic_checkpoints(ens.burn_in, ens.steps);
    if (cps.size() < 2) throw InsufficientData("trajectories too short for dyadic checkpoints");
    const int J = static_cast<int>(cps.size());
    const int N = ens.n_trajectories;

    std::vector<double> flat(static_cast<size_t>(N) * J, 0.0);
    const double diam = 2.0 * ens.tube.m_hat();
    const double c_lo = 32.0 * diam, c_hi = 256.0 * diam;
    std::vector<double> m2_lo(N, 0.0), m2_hi(N, 0.0);
    std::vector<std::uint64_t> chord_count(N, 0);
    parallel_trajectories(N, ens.workers, [&](int i) {
        double alpha_burn = 0.0;
        int next_cp = 0;
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            std::uint64_t k = s + 1;  // index of the landing hit
            if (ens.burn_in == 0 && s == 0) alpha_burn = c.from.alpha;
            if (k == ens.burn_in) alpha_burn = c.to.alpha;
            if (next_cp < J && k == ens.burn_in + cps[next_cp]) {
                flat[static_cast<size_t>(i) * J + next_cp] = c.to.alpha - alpha_burn;
                ++next_cp;
            }
            if (s >= ens.burn_in) {
                double h = std::fabs(c.horiz);
                ++chord_count[i];
                if (h <= c_lo) m2_lo[i] += h * h;
                if (h <= c_hi) m2_hi[i] += h * h;
            }
        });
    });

    std::vector<int> all_rows(N);
    for (int i = 0; i < N; ++i) all_rows[i] = i;

    // Weights 1/m^2: under linear growth Var(V_hat_j) ~ V_j^2 ~ m_j^2, and
    // unlike 1/V_hat^2 they do not couple to the estimates (which would bias
    // the slope low for heavy-tailed displacements).
    std::vector<double> vars(J), ms(J), ws(J);
    for (int j = 0; j < J; ++j) {
        vars[j] = column_variance(flat, all_rows, J, j);
        ms[j] = static_cast<double>(cps[j]);
        ws[j] = 1.0 / (ms[j] * ms[j]);
    }
    double slope = wls_slope_through_origin(ms, vars, ws);

    // Relative slope change between the two halves of the checkpoint range.
    int half = J / 2;
    std::vector<double> m_lo(ms.begin(), ms.begin() + half), v_lo(vars.begin(), vars.begin() + half),
        w_lo(ws.begin(), ws.begin() + half);
    std::vector<double> m_hi(ms.begin() + half, ms.end()), v_hi(vars.begin() + half, vars.end()),
        w_hi(ws.begin() + half, ws.end());
    double s_lo = wls_slope_through_origin(m_lo, v_lo, w_lo);
    double s_hi = wls_slope_through_origin(m_hi, v_hi, w_hi);
    double drift = slope > 0 ? (s_hi - s_lo) / slope : 0.0;

    // Trajectory-level bootstrap of the slope.
    Rng boot = Rng::stream(ens.seed, stream_tag::kBootstrap, 0x5132);
    MomentAccumulator slopes;
    std::vector<int> rows(N);
    std::vector<double> bvars(J);
    for (int b = 0; b < 200; ++b) {
        for (int i = 0; i < N; ++i) rows[i] = static_cast<int>(boot.next_u64() % N);
        for (int j = 0; j < J; ++j) bvars[j] = column_variance(flat, rows, J, j);
        slopes.add(wls_slope_through_origin(ms, bvars, ws));
    }

    double sum_lo = 0.0, sum_hi = 0.0;
    std::uint64_t chords = 0;
    for (int i = 0; i < N; ++i) {
        sum_lo += m2_lo[i];
        sum_hi += m2_hi[i];
        chords += chord_count[i];
    }
    double gap = sum_hi > 0.0 ? (sum_hi - sum_lo) / sum_hi : 0.0;

    VarianceGrowth out;
    out.checkpoints = ms;
    out.variances = vars;
    out.drift = drift;
    out.trunc_gap = gap;
    out.slope.value = slope;
    out.slope.std_error = std::sqrt(slopes.variance());
    out.slope.n = static_cast<std::uint64_t>(N);
    out.slope.method = "variance-growth-wls+bootstrap";
    out.slope.divergent = gap > 0.10;
    return out;
}

TimeVariance estimate_sigma_hat2(const Ensemble& ens, double t) {
    if (ens.n_trajectories < 2) throw InsufficientData("need at least 2 trajectories");
    const int N = ens.n_trajectories;
    std::vector<double> xt(N, 0.0);
    std::vector<char> ok(N, 0);
    parallel_trajectories(N, ens.workers, [&](int i) {
        double tau = 0.0;
        stream_chords(ens, i, [&](std::uint64_t, const Chord& c) {
            double tau_next = tau + c.length;
            if (!ok[i] && tau_next > t) {
                xt[i] = c.from.alpha + (t - tau) * (c.horiz / c.length);
                ok[i] = 1;
            }
            tau = tau_next;
        });
    });
    for (int i = 0; i < N; ++i)
        if (!ok[i]) throw OutOfRange("t exceeds a trajectory flight horizon");

    MomentAccumulator acc;
    for (double x : xt) acc.add(x);
    TimeVariance out;
    out.sigma_hat2.value = acc.sample_variance() / t;
    out.sigma_hat2.n = static_cast<std::uint64_t>(N);
    out.sigma_hat2.method = "endpoint-variance/t+bootstrap";
    Rng boot = Rng::stream(ens.seed, stream_tag::kBootstrap, 0x5348);
    MomentAccumulator bs;
    for (int b = 0; b < 200; ++b) {
        double s = 0, s2 = 0;
        for (int i = 0; i < N; ++i) {
            double x = xt[boot.next_u64() % N];
            s += x;
            s2 += x * x;
        }
        bs.add((s2 - s * s / N) / (N - 1.0) / t);
    }
    out.sigma_hat2.std_error = std::sqrt(bs.variance());
    out.mean.value = acc.mean();
    out.mean.std_error = acc.std_error_of_mean();
    out.mean.n = static_cast<std::uint64_t>(N);
    out.mean.method = "ensemble-mean";
    return out;
}

Estimate estimate_rate(const Ensemble& ens, double t) {
    const int N = ens.n_trajectories;
    std::vector<double> rates(N, 0.0);
    std::vector<char> ok(N, 0);
    parallel_trajectories(N, ens.workers, [&](int i) {
        double tau = 0.0;
        std::uint64_t hits = 0;
        stream_chords(ens, i, [&](std::uint64_t, const Chord& c) {
            tau += c.length;
            if (tau <= t) ++hits;
            if (tau > t) ok[i] = 1;
        });
        rates[i] = static_cast<double>(hits) / t;
    });
    for (int i = 0; i < N; ++i)
        if (!ok[i]) throw OutOfRange("t exceeds a trajectory flight horizon");
    MomentAccumulator acc;
    for (double r : rates) acc.add(r);
    Estimate out;
    out.value = acc.mean();
    out.std_error = acc.std_error_of_mean();
    out.n = static_cast<std::uint64_t>(N);
    out.method = "hit-rate";
    return out;
}

Estimate estimate_mean_chord(const Ensemble& ens) {
    if (ens.steps <= ens.burn_in ||
        static_cast<double>(ens.steps - ens.burn_in) * ens.n_trajectories < 1e4)
        throw InsufficientData("need at least 1e4 post-burn-in chords");
    const int N = ens.n_trajectories;
    std::vector<BatchMeans> per(N, BatchMeans(1000));
    parallel_trajectories(N, ens.workers, [&](int i) {
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            if (s >= ens.burn_in) per[i].add(c.length);
        });
    });
    BatchMeans all(1000);
    for (const auto& bm : per) all.merge(bm);
    Estimate out;
    out.value = all.mean();
    out.std_error = all.std_error();
    out.n = all.count();
    out.method = "batch-means";
    return out;
}

DriftMoments drift_and_moments(const Ensemble& ens, const std::vector<double>& truncations) {
    if (ens.steps <= ens.burn_in ||
        static_cast<double>(ens.steps - ens.burn_in) * ens.n_trajectories < 1e4)
        throw InsufficientData("need at least 1e4 post-burn-in chords");
    const int N = ens.n_trajectories;
    const int C = static_cast<int>(truncations.size());
    std::vector<BatchMeans> drift(N, BatchMeans(1000));
    std::vector<std::vector<BatchMeans>> trunc(N, std::vector<BatchMeans>(C, BatchMeans(1000)));
    parallel_trajectories(N, ens.workers, [&](int i) {
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            if (s < ens.burn_in) return;
            drift[i].add(c.horiz);
            for (int k = 0; k < C; ++k)
                trunc[i][k].add(std::fabs(c.horiz) <= truncations[k] ? c.horiz * c.horiz : 0.0);
        });
    });
    DriftMoments out;
    BatchMeans d(1000);
    for (const auto& bm : drift) d.merge(bm);
    out.drift = {d.mean(), d.std_error(), d.count(), "batch-means", false};
    for (int k = 0; k < C; ++k) {
        BatchMeans m(1000);
        for (int i = 0; i < N; ++i) m.merge(trunc[i][k]);
        out.truncated_m2.push_back(
            {truncations[k], Estimate{m.mean(), m.std_error(), m.count(), "batch-means", false}});
    }
    return out;
}

std::vector<SurvivalPoint> tail_survival(const Ensemble& ens, const std::vector<double>& xs) {
    if (static_cast<double>(ens.steps - ens.burn_in) * ens.n_trajectories < 1e5)
        throw InsufficientData("need at least 1e5 chords");
    const int N = ens.n_trajectories;
    const int X = static_cast<int>(xs.size());
    std::vector<std::vector<std::uint64_t>> counts(N, std::vector<std::uint64_t>(X, 0));
    std::vector<std::uint64_t> totals(N, 0);
    parallel_trajectories(N, ens.workers, [&](int i) {
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            if (s < ens.burn_in) return;
            ++totals[i];
            double h = std::fabs(c.horiz);
            for (int k = 0; k < X; ++k)
                if (h > xs[k]) ++counts[i][k];
        });
    });
    std::vector<SurvivalPoint> out(X);
    for (int k = 0; k < X; ++k) {
        std::uint64_t hits = 0, total = 0;
        MomentAccumulator per_traj;
        for (int i = 0; i < N; ++i) {
            hits += counts[i][k];
            total += totals[i];
            per_traj.add(static_cast<double>(counts[i][k]) / static_cast<double>(totals[i]));
        }
        out[k].x = xs[k];
        out[k].survival.value = static_cast<double>(hits) / static_cast<double>(total);
        out[k].survival.std_error =
            N > 1 ? per_traj.std_error_of_mean()
                  : std::sqrt(out[k].survival.value * (1 - out[k].survival.value) / total);
        out[k].survival.n = total;
        out[k].survival.method = "empirical-survival";
        WilsonInterval w = wilson_interval(hits, total, kWilsonZ);
        out[k].wilson_lo = w.lo;
        out[k].wilson_hi = w.hi;
    }
    return out;
}

double survival_loglog_slope(const std::vector<SurvivalPoint>& pts) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& p : pts) {
        if (p.survival.value <= 0.0) continue;
        double lx = std::log(p.x), ly = std::log(p.survival.value);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

InducedChordStats induced_chord_stats(const Ensemble& ens) {
    const TubeModel& tube = ens.tube;
    if (!tube.has_inner_cylinder() || tube.geom_kind() != GeomKind::Rotational)
        throw GeometryError("induced-chord statistics need a nested pair with d >= 3");
    const int N = ens.n_trajectories;
    const int d = tube.dimension();
    const double rin = tube.inner_radius();

    struct Slot {
        std::vector<double> pos_u, dir_u;
        std::uint64_t crossings = 0, chords = 0;
    };
    std::vector<Slot> slots(N);
    parallel_trajectories(N, ens.workers, [&](int i) {
        Slot& sl = slots[i];
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            if (s < ens.burn_in) return;
            ++sl.chords;
            // First crossing of the inner cylinder |U p| = rin along the chord.
            double a = 0, b = 0, q0 = 0;
            for (int k = 1; k < d; ++k) {
                double du = c.to.position[k] - c.from.position[k];
                a += du * du;
                b += 2.0 * c.from.position[k] * du;
                q0 += c.from.position[k] * c.from.position[k];
            }
            if (a < 1e-300) return;
            double disc = b * b - 4.0 * a * (q0 - rin * rin);
            if (disc <= 0.0) return;
            double sq = std::sqrt(disc);
            double s0 = (-b - sq) / (2.0 * a);  // first crossing from outside
            if (s0 < 0.0 || s0 > 1.0) return;
            ++sl.crossings;
            Vec p = c.from.position + s0 * (c.to.position - c.from.position);
            double theta = std::atan2(p[2], p[1]);
            sl.pos_u.push_back((theta + M_PI) / kTwoPi);
            double cosy = 0.0;
            for (int k = 1; k < d; ++k) cosy -= (c.to.position[k] - c.from.position[k]) * p[k];
            cosy /= rin * c.length;
            if (cosy < 0.0) cosy = 0.0;
            if (cosy > 1.0) cosy = 1.0;
            sl.dir_u.push_back(std::pow(1.0 - cosy * cosy, 0.5 * (d - 1)));
        });
    });

    InducedChordStats out;
    std::vector<double> pos, dir;
    MomentAccumulator freq;
    std::uint64_t crossings = 0, chords = 0;
    for (const auto& sl : slots) {
        pos.insert(pos.end(), sl.pos_u.begin(), sl.pos_u.end());
        dir.insert(dir.end(), sl.dir_u.begin(), sl.dir_u.end());
        crossings += sl.crossings;
        chords += sl.chords;
        if (sl.chords > 0)
            freq.add(static_cast<double>(sl.crossings) / static_cast<double>(sl.chords));
    }
    out.crossings = crossings;
    out.intersect_freq.value = chords ? static_cast<double>(crossings) / chords : 0.0;
    out.intersect_freq.std_error = freq.count() > 1 ? freq.std_error_of_mean() : 0.0;
    out.intersect_freq.n = chords;
    out.intersect_freq.method = "crossing-frequency";
    out.ks_position = ks_statistic_uniform(std::move(pos));
    out.ks_direction = ks_statistic_uniform(std::move(dir));
    out.ks_gate = ks_threshold(std::max<std::uint64_t>(1, crossings));
    return out;
}

namespace {

// Shared binning for hit histograms: intrinsic phase coordinate for periodic
// profiles, hit angle for cylinders, wall index for constant strips.
struct HitBinner {
    enum class Mode { Angle, Phase, Wall } mode;
    double phase = 0.0;
    int bins = 0;
    std::vector<double> expected;

    static HitBinner make(const TubeModel& tube, int bins) {
        HitBinner hb;
        hb.bins = bins;
        const Profile& prof = tube.geom_kind() == GeomKind::Rotational
                                  ? tube.radial()
                                  : tube.lower_wall().profile;
        if (prof.kind() == ProfileKind::PiecewiseLinear)
            throw GeometryError("invariant histogram needs a periodic-family tube");
        if (prof.kind() == ProfileKind::Constant) {
            if (tube.geom_kind() == GeomKind::Rotational) {
                hb.mode = Mode::Angle;
                hb.expected.assign(bins, 1.0 / bins);
            } else {
                hb.mode = Mode::Wall;
                hb.bins = 2;
                hb.expected.assign(2, 0.5);
            }
            return hb;
        }
        hb.mode = Mode::Phase;
        hb.phase = prof.phase();
        hb.expected.resize(bins);
        double total = 0.0;
        auto dens = [&](double s) {
            if (tube.geom_kind() == GeomKind::Rotational) {
                double R = prof.base() + prof.amplitude() * std::cos(s);
                double dR = -prof.amplitude() * std::sin(s);
                return std::pow(R, tube.dimension() - 2) * std::sqrt(1.0 + dR * dR);
            }
            double sl = tube.lower_wall().deriv(s - hb.phase);
            double su = tube.upper_wall().deriv(s - hb.phase);
            return std::sqrt(1.0 + sl * sl) + std::sqrt(1.0 + su * su);
        };
        for (int b = 0; b < bins; ++b) {
            double s0 = kTwoPi * b / bins, s1 = kTwoPi * (b + 1) / bins;
            hb.expected[b] = integrate(dens, s0, s1, 1e-12, 1e-10);
            total += hb.expected[b];
        }
        for (auto& e : hb.expected) e /= total;
        return hb;
    }

    int bin_of(const BoundaryPoint& bp) const {
        switch (mode) {
            case Mode::Angle: {
                double th = std::atan2(bp.position[2], bp.position[1]);
                int b = static_cast<int>((th + M_PI) / kTwoPi * bins);
                return std::clamp(b, 0, bins - 1);
            }
            case Mode::Phase: {
                double s = std::fmod(bp.alpha + phase, kTwoPi);
                if (s < 0) s += kTwoPi;
                int b = static_cast<int>(s / kTwoPi * bins);
                return std::clamp(b, 0, bins - 1);
            }
            case Mode::Wall:
                return bp.wall == 1 ? 1 : 0;
        }
        return 0;
    }
};

HitHistogramResult finish_histogram(const HitBinner& hb, std::vector<std::uint64_t> counts,
                                    std::uint64_t total) {
    HitHistogramResult out;
    out.observed = std::move(counts);
    out.expected_mass = hb.expected;
    out.chi2 = chi2_statistic(out.observed, out.expected_mass, total);
    out.dof = static_cast<int>(out.expected_mass.size()) - 1;
    out.quantile999 = chi2_quantile(0.999, out.dof);
    out.pass = out.chi2 < out.quantile999;
    return out;
}

}  // namespace

HitHistogramResult invariant_histogram(const Ensemble& ens, int bins, std::uint64_t stride) {
    if (stride == 0) stride = 1;
    if (static_cast<double>(ens.steps - ens.burn_in) * ens.n_trajectories / double(stride) < 5e4)
        throw InsufficientData("need at least 5e4 recorded post-burn-in hits");
    HitBinner hb = HitBinner::make(ens.tube, bins);
    const int N = ens.n_trajectories;
    std::vector<std::vector<std::uint64_t>> counts(N,
                                                   std::vector<std::uint64_t>(hb.bins, 0));
    parallel_trajectories(N, ens.workers, [&](int i) {
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            if (s < ens.burn_in || (s - ens.burn_in) % stride) return;
            ++counts[i][static_cast<size_t>(hb.bin_of(c.to))];
        });
    });
    std::vector<std::uint64_t> total(hb.bins, 0);
    std::uint64_t n = 0;
    for (const auto& row : counts)
        for (int b = 0; b < hb.bins; ++b) {
            total[b] += row[b];
            n += row[b];
        }
    return finish_histogram(hb, std::move(total), n);
}

HitHistogramResult hit_histogram(const TubeModel& tube, const Trajectory& traj, int bins,
                                 std::uint64_t burn_in, std::uint64_t stride) {
    if (stride == 0) stride = 1;
    if (traj.hits.size() <= burn_in + 1) throw InsufficientData("trajectory shorter than burn-in");
    HitBinner hb = HitBinner::make(tube, bins);
    std::vector<std::uint64_t> counts(hb.bins, 0);
    std::uint64_t n = 0;
    for (std::size_t k = burn_in + 1; k < traj.hits.size(); k += stride) {
        ++counts[static_cast<size_t>(hb.bin_of(traj.hits[k]))];
        ++n;
    }
    return finish_histogram(hb, std::move(counts), n);
}

NormalityReport normality_check(std::span<const double> samples) {
    if (samples.size() < 10000) throw InsufficientData("need at least 1e4 endpoint samples");
    MomentAccumulator acc;
    for (double x : samples) acc.add(x);
    NormalityReport out;
    out.n = samples.size();
    double n = static_cast<double>(samples.size());
    out.skewness = acc.skewness();
    out.skew_se = std::sqrt(6.0 / n);
    out.ex_kurtosis = acc.excess_kurtosis();
    out.kurt_se = std::sqrt(24.0 / n);
    double mu = acc.mean();
    double sd = std::sqrt(acc.variance());
    std::vector<double> u;
    u.reserve(samples.size());
    for (double x : samples) u.push_back(normal_cdf((x - mu) / sd));
    out.ks_fitted = ks_statistic_uniform(std::move(u));
    return out;
}

std::vector<std::vector<double>> endpoint_displacements(const Ensemble& ens,
                                                        const std::vector<std::uint64_t>& spans) {
    for (std::uint64_t sp : spans)
        if (ens.burn_in + sp > ens.steps)
            throw InsufficientData("span exceeds trajectory length after burn-in");
    const int N = ens.n_trajectories;
    const int S = static_cast<int>(spans.size());
    std::vector<std::vector<double>> out(S, std::vector<double>(N, 0.0));
    parallel_trajectories(N, ens.workers, [&](int i) {
        double alpha_burn = 0.0;
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            std::uint64_t k = s + 1;
            if (ens.burn_in == 0 && s == 0) alpha_burn = c.from.alpha;
            if (k == ens.burn_in) alpha_burn = c.to.alpha;
            for (int j = 0; j < S; ++j)
                if (k == ens.burn_in + spans[j]) out[j][i] = c.to.alpha - alpha_burn;
        });
    });
    return out;
}

DiffusivityReport diffusivity_report(const Ensemble& ens, double t_horizon) {
    DiffusivityReport rep;
    rep.t_horizon = t_horizon;

    // Analytic window: >= 1000 characteristic lengths of the profile.
    const Profile& prof = ens.tube.geom_kind() == GeomKind::Rotational
                              ? ens.tube.radial()
                              : ens.tube.lower_wall().profile;
    double charlen = 1.0;
    if (prof.kind() == ProfileKind::Cosine) charlen = prof.period();
    if (prof.kind() == ProfileKind::PiecewiseLinear) charlen = 1.0 / prof.knot_process()->rate();
    double half_window = 500.0 * std::max(charlen, 1.0);
    rep.z_const = ens.tube.slab_surface_area(-half_window, half_window) / (2.0 * half_window);
    rep.mean_section = ens.tube.mean_section_volume(-half_window, half_window);
    rep.predicted_rate_value = predicted_rate(ens.tube, -half_window, half_window);

    VarianceGrowth vg = estimate_sigma2(ens);
    rep.sigma2_discrete = vg;
    TimeVariance tv = estimate_sigma_hat2(ens, t_horizon);
    rep.sigma_hat2_time = tv.sigma_hat2;
    rep.mean_x_t = tv.mean;
    rep.rate_n_over_t = estimate_rate(ens, t_horizon);
    rep.mean_chord = estimate_mean_chord(ens);

    rep.sigma_hat2_from_rate_product = vg.slope.value * rep.rate_n_over_t.value;
    rep.sigma_hat_linear_reading =
        std::sqrt(std::max(0.0, vg.slope.value)) * rep.rate_n_over_t.value;
    return rep;
}

}  // namespace ktube
