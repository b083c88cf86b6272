#include "ktube/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "ktube/cosine.hpp"
#include "ktube/errors.hpp"
#include "ktube/quadrature.hpp"

namespace ktube {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One per-statistic CSV with the shared header.
class StatCsv {
public:
    explicit StatCsv(std::uint64_t seed) : seed_(seed) {
        buf_ = "statistic,param,value,std_error,n,seed\n";
    }
    void row(const std::string& stat, const std::string& param, double value, double se,
             std::uint64_t n) {
        buf_ += stat + "," + param + "," + num17(value) + "," + num17(se) + "," +
                std::to_string(n) + "," + std::to_string(seed_) + "\n";
    }
    void row(const std::string& stat, double value) { row(stat, "", value, 0.0, 0); }
    void estimate(const std::string& stat, const Estimate& e, const std::string& param = "") {
        buf_ += stat + "," + param + "," + num17(e.value) + "," + num17(e.std_error) + "," +
                std::to_string(e.n) + "," + std::to_string(seed_) + "\n";
    }
    const std::string& str() const { return buf_; }

private:
    std::uint64_t seed_;
    std::string buf_;
};

double get_positive(const json& doc, const char* key, double fallback, bool required) {
    if (!doc.contains(key)) {
        if (required) throw ConfigError(key, "required field missing");
        return fallback;
    }
    double v = doc.at(key).get<double>();
    if (!(v > 0.0)) throw ConfigError(key, "must be positive");
    return v;
}

const std::set<std::string> kExperiments = {
    "simulate",       "diffusivity",    "chord-stats", "tails",
    "induced-chords", "invariant-hist", "cosine-test", "kernel-check"};

const std::set<std::string> kKeys = {
    "tube",       "experiment", "n_trajectories", "steps_per_trajectory",
    "burn_in",    "t_horizon",  "seed",           "workers",
    "output_dir", "gate",       "dump_trajectories", "tail_xs",
    "truncations", "bins",      "n_samples"};

}  // namespace

std::string fnv1a64_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_config(const json& doc) {
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!kKeys.count(it.key())) throw ConfigError(it.key(), "unknown key");

    RunConfig cfg;
    if (!doc.contains("experiment")) throw ConfigError("experiment", "required field missing");
    cfg.experiment = doc.at("experiment").get<std::string>();
    if (!kExperiments.count(cfg.experiment))
        throw ConfigError("experiment", "unknown experiment " + cfg.experiment);

    if (!doc.contains("seed")) throw ConfigError("seed", "required field missing");
    cfg.seed = doc.at("seed").get<std::uint64_t>();

    if (!doc.contains("tube")) throw ConfigError("tube", "required field missing");
    cfg.tube_spec = doc.at("tube");
    try {
        TubeModel::from_json(cfg.tube_spec);
    } catch (const InvalidParams& e) {
        throw ConfigError("tube", e.what());
    }

    if (!doc.contains("output_dir")) throw ConfigError("output_dir", "required field missing");
    cfg.output_dir = doc.at("output_dir").get<std::string>();

    cfg.workers = static_cast<int>(get_positive(doc, "workers", 1, false));
    cfg.gate = doc.value("gate", false);
    cfg.dump_trajectories = doc.value("dump_trajectories", false);
    if (doc.contains("burn_in")) {
        double b = doc.at("burn_in").get<double>();
        if (b < 0) throw ConfigError("burn_in", "must be nonnegative");
        cfg.burn_in = static_cast<std::uint64_t>(b);
    }
    if (doc.contains("bins")) {
        int b = doc.at("bins").get<int>();
        if (b < 2) throw ConfigError("bins", "must be at least 2");
        cfg.bins = b;
    }
    if (doc.contains("tail_xs")) {
        cfg.tail_xs = doc.at("tail_xs").get<std::vector<double>>();
        if (cfg.tail_xs.empty()) throw ConfigError("tail_xs", "must be nonempty");
    }
    if (doc.contains("truncations")) {
        cfg.truncations = doc.at("truncations").get<std::vector<double>>();
        if (cfg.truncations.empty()) throw ConfigError("truncations", "must be nonempty");
    }
    if (doc.contains("n_samples"))
        cfg.n_samples = static_cast<std::uint64_t>(get_positive(doc, "n_samples", 0, false));

    bool needs_ensemble = cfg.experiment != "cosine-test" && cfg.experiment != "kernel-check";
    if (needs_ensemble) {
        cfg.n_trajectories =
            static_cast<int>(get_positive(doc, "n_trajectories", 0, true));
        cfg.steps_per_trajectory =
            static_cast<std::uint64_t>(get_positive(doc, "steps_per_trajectory", 0, true));
    }
    if (cfg.experiment == "diffusivity")
        cfg.t_horizon = get_positive(doc, "t_horizon", 0, true);
    if (cfg.experiment == "induced-chords" &&
        cfg.tube_spec.value("family", "") != "NestedPair")
        throw ConfigError("tube", "induced-chords needs a NestedPair tube");
    return cfg;
}

RunConfig load_config(const std::string& path, const json& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config", "cannot open " + path);
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError("config", e.what());
        }
    }
    for (auto it = overrides.begin(); it != overrides.end(); ++it) doc[it.key()] = it.value();
    if (!doc.contains("output_dir")) {
        const char* env = std::getenv("KTUBE_OUTPUT_DIR");
        if (env && *env) doc["output_dir"] = env;
    }
    return parse_config(doc);
}

json RunManifest::to_json() const {
    json files_j = json::array();
    for (const auto& f : files)
        files_j.push_back({{"name", f.name}, {"fnv1a64", f.fnv1a64}, {"bytes", f.bytes}});
    return json{{"version", version},       {"config", config_echo}, {"files", files_j},
                {"anomalies", anomalies},   {"wall_clock_s", wall_clock_s},
                {"verdicts", verdicts},     {"all_pass", all_pass}};
}

namespace {

struct ExperimentOutput {
    std::vector<std::pair<std::string, std::string>> files;  // name -> bytes
    std::map<std::string, bool> verdicts;
};

json config_echo(const RunConfig& cfg) {
    return json{{"tube", cfg.tube_spec},
                {"experiment", cfg.experiment},
                {"n_trajectories", cfg.n_trajectories},
                {"steps_per_trajectory", cfg.steps_per_trajectory},
                {"burn_in", cfg.burn_in},
                {"t_horizon", cfg.t_horizon},
                {"seed", cfg.seed},
                {"workers", cfg.workers},
                {"output_dir", cfg.output_dir},
                {"gate", cfg.gate},
                {"dump_trajectories", cfg.dump_trajectories},
                {"tail_xs", cfg.tail_xs},
                {"truncations", cfg.truncations},
                {"bins", cfg.bins},
                {"n_samples", cfg.n_samples}};
}

bool within(double value, double target, double tol) { return std::fabs(value - target) <= tol; }

// Characteristic analytic window for ergodic averages: >= 1000 profile
// features on each side.
std::pair<double, double> analytic_window(const TubeModel& tube) {
    const Profile& prof =
        tube.geom_kind() == GeomKind::Rotational ? tube.radial() : tube.lower_wall().profile;
    double charlen = 1.0;
    if (prof.kind() == ProfileKind::Cosine) charlen = prof.period();
    if (prof.kind() == ProfileKind::PiecewiseLinear) charlen = 1.0 / prof.knot_process()->rate();
    double half = 500.0 * std::max(charlen, 1.0);
    return {-half, half};
}

void run_diffusivity(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    DiffusivityReport rep = diffusivity_report(ens, cfg.t_horizon);

    StatCsv csv(cfg.seed);
    csv.estimate("sigma2_discrete", rep.sigma2_discrete.slope);
    csv.estimate("sigma_hat2_time", rep.sigma_hat2_time);
    csv.estimate("rate_n_over_t", rep.rate_n_over_t);
    csv.estimate("mean_chord", rep.mean_chord);
    csv.estimate("mean_x_t", rep.mean_x_t);
    csv.row("predicted_rate", rep.predicted_rate_value);
    csv.row("z_const", rep.z_const);
    csv.row("mean_section", rep.mean_section);
    csv.row("sigma_hat2_from_rate_product", rep.sigma_hat2_from_rate_product);
    csv.row("sigma_hat_linear_reading", rep.sigma_hat_linear_reading);
    csv.row("sigma2_trunc_gap", rep.sigma2_discrete.trunc_gap);
    csv.row("sigma2_slope_drift", rep.sigma2_discrete.drift);
    for (size_t j = 0; j < rep.sigma2_discrete.checkpoints.size(); ++j)
        csv.row("var_at_checkpoint", num17(rep.sigma2_discrete.checkpoints[j]),
                rep.sigma2_discrete.variances[j], 0.0, ens.n_trajectories);
    out.files.push_back({"diffusivity.csv", csv.str()});

    json jr{{"sigma2_discrete",
             {{"value", rep.sigma2_discrete.slope.value},
              {"std_error", rep.sigma2_discrete.slope.std_error},
              {"divergent", rep.sigma2_discrete.slope.divergent},
              {"trunc_gap", rep.sigma2_discrete.trunc_gap},
              {"slope_drift", rep.sigma2_discrete.drift},
              {"checkpoints", rep.sigma2_discrete.checkpoints},
              {"variances", rep.sigma2_discrete.variances}}},
            {"sigma_hat2_time",
             {{"value", rep.sigma_hat2_time.value}, {"std_error", rep.sigma_hat2_time.std_error}}},
            {"rate_n_over_t",
             {{"value", rep.rate_n_over_t.value}, {"std_error", rep.rate_n_over_t.std_error}}},
            {"mean_chord", {{"value", rep.mean_chord.value}, {"std_error", rep.mean_chord.std_error}}},
            {"predicted_rate", rep.predicted_rate_value},
            {"z_const", rep.z_const},
            {"mean_section", rep.mean_section},
            {"t_horizon", rep.t_horizon},
            {"sigma_hat2_from_rate_product", rep.sigma_hat2_from_rate_product},
            {"sigma_hat_linear_reading", rep.sigma_hat_linear_reading}};
    out.files.push_back({"diffusivity.json", jr.dump(2) + "\n"});

    double rate_se = rep.rate_n_over_t.std_error;
    out.verdicts["rate_matches_prediction"] =
        within(rep.rate_n_over_t.value, rep.predicted_rate_value, 3.0 * rate_se);
    double id_se = std::sqrt(
        rep.sigma_hat2_time.std_error * rep.sigma_hat2_time.std_error +
        std::pow(rep.rate_n_over_t.value * rep.sigma2_discrete.slope.std_error, 2) +
        std::pow(rep.sigma2_discrete.slope.value * rate_se, 2));
    out.verdicts["time_change_identity"] =
        within(rep.sigma_hat2_time.value, rep.sigma_hat2_from_rate_product, 3.0 * id_se);
    double cons = rep.mean_chord.value * rep.rate_n_over_t.value;
    double cons_se = std::sqrt(std::pow(rep.rate_n_over_t.value * rep.mean_chord.std_error, 2) +
                               std::pow(rep.mean_chord.value * rate_se, 2));
    out.verdicts["mean_chord_rate_consistency"] = within(cons, 1.0, 3.0 * cons_se);
    if (ens.tube.geom_kind() == GeomKind::Rotational &&
        ens.tube.radial().kind() == ProfileKind::Constant) {
        BQuadrature b = b_quadrature(ens.tube);
        out.verdicts["sigma2_matches_quadrature"] =
            !b.divergent && within(rep.sigma2_discrete.slope.value, b.value,
                                   3.0 * rep.sigma2_discrete.slope.std_error);
    }
}

void run_chord_stats(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    Estimate mean_chord = estimate_mean_chord(ens);
    DriftMoments dm = drift_and_moments(ens, cfg.truncations);
    auto [wa, wb] = analytic_window(ens.tube);
    double analytic = mean_chord_analytic(ens.tube, wa, wb);

    StatCsv csv(cfg.seed);
    csv.estimate("mean_chord", mean_chord);
    csv.row("mean_chord_analytic", analytic);
    csv.estimate("drift", dm.drift);
    for (const auto& [c, est] : dm.truncated_m2) csv.estimate("truncated_m2", est, num17(c));
    out.files.push_back({"chord_stats.csv", csv.str()});

    out.verdicts["mean_chord_matches_analytic"] =
        within(mean_chord.value, analytic, 3.0 * mean_chord.std_error);
    out.verdicts["drift_null"] = std::fabs(dm.drift.value) <= 3.0 * dm.drift.std_error;
}

void run_tails(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    auto pts = tail_survival(ens, cfg.tail_xs);
    DriftMoments dm = drift_and_moments(ens, cfg.truncations);
    double slope = survival_loglog_slope(pts);

    StatCsv csv(cfg.seed);
    for (const auto& p : pts) {
        csv.estimate("survival", p.survival, num17(p.x));
        csv.row("wilson_lo", num17(p.x), p.wilson_lo, 0.0, p.survival.n);
        csv.row("wilson_hi", num17(p.x), p.wilson_hi, 0.0, p.survival.n);
    }
    csv.row("loglog_slope", slope);
    for (const auto& [c, est] : dm.truncated_m2) csv.estimate("truncated_m2", est, num17(c));

    const TubeModel& tube = ens.tube;
    int d = tube.dimension();
    bool straight_strip = tube.geom_kind() == GeomKind::Strip &&
                          tube.lower_wall().profile.kind() == ProfileKind::Constant;
    if (straight_strip) {
        double w = tube.section_slice(0.0).volume;
        for (const auto& p : pts) {
            double theory = 1.0 - p.x / std::sqrt(w * w + p.x * p.x);
            out.verdicts["wilson_covers_x=" + num17(p.x)] =
                p.wilson_lo <= theory && theory <= p.wilson_hi;
        }
    }
    // truncated-moment convergence: relative gap between the last two
    // truncations below 1 percent
    if (dm.truncated_m2.size() >= 2) {
        const auto& last = dm.truncated_m2.back().second;
        const auto& prev = dm.truncated_m2[dm.truncated_m2.size() - 2].second;
        double gap = last.value > 0 ? (last.value - prev.value) / last.value : 0.0;
        csv.row("truncation_gap", gap);
        if (d == 2 && straight_strip)
            out.verdicts["truncated_m2_diverges"] = gap >= 0.01;
        else if (d >= 4)
            out.verdicts["truncated_m2_converges"] = gap < 0.01;
    }
    if (d >= 3) out.verdicts["tail_slope_bound"] = slope <= -(d - 1) + 0.2;
    out.files.push_back({"tails.csv", csv.str()});
}

void run_induced(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    InducedChordStats st = induced_chord_stats(ens);
    auto [wa, wb] = analytic_window(ens.tube);
    double z = ens.tube.slab_surface_area(wa, wb) / (wb - wa);
    int d = ens.tube.dimension();
    double inner_perimeter =
        unit_sphere_area(d - 1) * std::pow(ens.tube.inner_radius(), d - 2);
    double freq_theory = inner_perimeter / z;

    StatCsv csv(cfg.seed);
    csv.estimate("intersect_freq", st.intersect_freq);
    csv.row("intersect_freq_theory", freq_theory);
    csv.row("ks_position", "", st.ks_position, 0.0, st.crossings);
    csv.row("ks_direction", "", st.ks_direction, 0.0, st.crossings);
    csv.row("ks_gate", st.ks_gate);
    out.files.push_back({"induced_chords.csv", csv.str()});

    out.verdicts["intersect_freq_matches"] =
        within(st.intersect_freq.value, freq_theory, 3.0 * st.intersect_freq.std_error);
    out.verdicts["position_uniform_ks"] = st.ks_position < st.ks_gate;
    out.verdicts["direction_cosine_ks"] = st.ks_direction < st.ks_gate;
}

void run_invariant_hist(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    int bins = cfg.bins;
    if (bins == 0) {
        bool angle_mode = ens.tube.geom_kind() == GeomKind::Rotational &&
                          ens.tube.radial().kind() == ProfileKind::Constant;
        bins = angle_mode ? 20 : 40;
    }
    HitHistogramResult h = invariant_histogram(ens, bins);

    StatCsv csv(cfg.seed);
    csv.row("chi2", h.chi2);
    csv.row("dof", double(h.dof));
    csv.row("quantile_0999", h.quantile999);
    std::uint64_t total = 0;
    for (auto c : h.observed) total += c;
    for (size_t b = 0; b < h.observed.size(); ++b)
        csv.row("bin", std::to_string(b), double(h.observed[b]),
                h.expected_mass[b] * double(total), total);
    out.files.push_back({"invariant_hist.csv", csv.str()});
    out.verdicts["chi2_below_0999"] = h.pass;
}

void run_cosine_test(const RunConfig& cfg, ExperimentOutput& out) {
    TubeModel tube = TubeModel::from_json(cfg.tube_spec);
    int d = tube.dimension();
    Rng rng = Rng::stream(cfg.seed, stream_tag::kSampler, 0xC05);
    Vec normal = Vec::axis(d, d - 1);

    StatCsv csv(cfg.seed);
    if (d >= 3) {
        std::vector<double> u;
        u.reserve(cfg.n_samples);
        for (std::uint64_t i = 0; i < cfg.n_samples; ++i) {
            DirectionSample s = sample_cosine(normal, rng);
            u.push_back(std::pow(1.0 - s.cos_theta * s.cos_theta, 0.5 * (d - 1)));
        }
        double ks = ks_statistic_uniform(std::move(u));
        double gate = ks_threshold(cfg.n_samples);
        csv.row("ks_polar", "", ks, 0.0, cfg.n_samples);
        csv.row("ks_gate", gate);
        out.verdicts["cosine_polar_ks"] = ks < gate;
    } else {
        MomentAccumulator acc;
        for (std::uint64_t i = 0; i < cfg.n_samples; ++i)
            acc.add(sample_cosine(normal, rng).cos_theta);
        csv.row("mean_cos", "", acc.mean(), acc.std_error_of_mean(), cfg.n_samples);
        csv.row("mean_cos_theory", M_PI / 4.0);
        out.verdicts["mean_cos_pi4"] =
            within(acc.mean(), M_PI / 4.0, 3.0 * acc.std_error_of_mean());
    }
    out.files.push_back({"cosine_test.csv", csv.str()});
}

void run_kernel_check(const RunConfig& cfg, ExperimentOutput& out) {
    TubeModel tube = TubeModel::from_json(cfg.tube_spec);
    int d = tube.dimension();
    Rng rng = Rng::stream(cfg.seed, stream_tag::kSampler, 0x4b43);

    // Symmetry over random boundary pairs.
    double max_err = 0.0;
    std::uint64_t pairs = std::min<std::uint64_t>(cfg.n_samples, 100000);
    for (std::uint64_t i = 0; i < pairs; ++i) {
        BoundaryPoint a = tube.sample_boundary_uniform(-4.0, 4.0, rng);
        BoundaryPoint b = tube.sample_boundary_uniform(-4.0, 4.0, rng);
        if (distance(a.position, b.position) < 1e-9) continue;
        double kab = eval_kernel(tube, a, b);
        double kba = eval_kernel(tube, b, a);
        max_err = std::max(max_err, std::fabs(kab - kba) / (1.0 + std::fabs(kab)));
    }

    StatCsv csv(cfg.seed);
    csv.row("symmetry_max_rel_err", "", max_err, 0.0, pairs);
    out.verdicts["kernel_symmetry"] = max_err <= 1e-12;

    bool cylinder = tube.geom_kind() == GeomKind::Rotational &&
                    tube.radial().kind() == ProfileKind::Constant && d == 3;
    if (cylinder) {
        double rho = tube.radial().value(0.0);
        Vec x0(3);
        x0[1] = rho;
        BoundaryPoint bx = tube.boundary_point_at(x0);
        auto marginal = [&](double alpha) {
            return integrate(
                [&](double w) {
                    Vec y(3);
                    y[0] = alpha;
                    y[1] = rho * std::cos(w);
                    y[2] = rho * std::sin(w);
                    if (distance(y, x0) < 1e-12) return 0.0;
                    return rho * eval_kernel(tube, bx, tube.boundary_point_at(y));
                },
                1e-7, 2 * M_PI - 1e-7, 1e-9, 1e-8);
        };
        double norm = integrate(marginal, -80.0 * rho, 80.0 * rho, 1e-7, 1e-7);
        csv.row("normalization", norm);
        out.verdicts["kernel_normalization"] = std::fabs(norm - 1.0) <= 1e-3;

        // Landing histogram of one boundary-walk step from x0 against the
        // kernel marginal: 48 interior bins + 2 tails, chi-square on 50.
        const int interior = 48;
        double window = 4.0 * rho;
        Histogram hist(-window, window, interior);
        for (std::uint64_t i = 0; i < cfg.n_samples; ++i) {
            Rng step_rng = Rng::stream(cfg.seed, stream_tag::kTrajectory, i);
            StepResult s = krw_step(tube, bx, step_rng);
            hist.add(s.chord.horiz);
        }
        std::vector<double> expected(interior + 2, 0.0);
        for (int b = 0; b < interior; ++b) {
            double a0 = -window + 2 * window * b / interior;
            double a1 = -window + 2 * window * (b + 1) / interior;
            expected[b + 1] = integrate(marginal, a0, a1, 1e-8, 1e-7);
        }
        expected[0] = integrate(marginal, -80.0 * rho, -window, 1e-8, 1e-7);
        expected[interior + 1] = integrate(marginal, window, 80.0 * rho, 1e-8, 1e-7);
        double mass = 0.0;
        for (double e : expected) mass += e;
        for (double& e : expected) e /= mass;
        std::vector<std::uint64_t> observed(interior + 2, 0);
        observed[0] = hist.underflow;
        observed[interior + 1] = hist.overflow;
        for (int b = 0; b < interior; ++b) observed[b + 1] = hist.counts[b];
        double chi2 = chi2_statistic(observed, expected, cfg.n_samples);
        double q = chi2_quantile(0.999, interior + 1);
        csv.row("landing_chi2", "", chi2, 0.0, cfg.n_samples);
        csv.row("landing_chi2_dof", double(interior + 1));
        csv.row("landing_chi2_gate", q);
        out.verdicts["landing_matches_kernel"] = chi2 < q;
    }
    out.files.push_back({"kernel_check.csv", csv.str()});
}

void run_simulate(const RunConfig& cfg, const Ensemble& ens, ExperimentOutput& out) {
    const int N = ens.n_trajectories;
    struct Slot {
        double final_alpha = 0.0, tau = 0.0;
        std::string dump;
    };
    std::vector<Slot> slots(N);
    parallel_trajectories(N, ens.workers, [&](int i) {
        Slot& sl = slots[i];
        if (cfg.dump_trajectories) {
            sl.dump.reserve(ens.steps * 48);
        }
        double tau = 0.0;
        stream_chords(ens, i, [&](std::uint64_t s, const Chord& c) {
            tau += c.length;
            sl.final_alpha = c.to.alpha;
            sl.tau = tau;
            if (cfg.dump_trajectories) {
                if (s == 0)
                    sl.dump += std::to_string(i) + ",0," + num17(c.from.alpha) + ",0,0,0\n";
                sl.dump += std::to_string(i) + "," + std::to_string(s + 1) + "," +
                           num17(c.to.alpha) + "," + num17(tau) + "," + num17(c.horiz) + "," +
                           num17(c.length) + "\n";
            }
        });
    });

    StatCsv csv(cfg.seed);
    MomentAccumulator alpha_acc, tau_acc;
    for (const auto& sl : slots) {
        alpha_acc.add(sl.final_alpha);
        tau_acc.add(sl.tau);
    }
    csv.row("final_alpha_mean", "", alpha_acc.mean(), alpha_acc.std_error_of_mean(), N);
    csv.row("final_alpha_var", "", alpha_acc.sample_variance(), 0.0, N);
    csv.row("tau_mean", "", tau_acc.mean(), tau_acc.std_error_of_mean(), N);
    out.files.push_back({"simulate.csv", csv.str()});

    if (cfg.dump_trajectories) {
        std::string dump = "traj,n,alpha,tau,horiz,length\n";
        for (const auto& sl : slots) dump += sl.dump;
        out.files.push_back({"trajectories.csv", dump});
    }
}

}  // namespace

RunManifest run(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    TubeModel tube = TubeModel::from_json(cfg.tube_spec);
    std::atomic<std::uint64_t> anomalies{0};
    Ensemble ens{tube,        cfg.seed,    cfg.n_trajectories, cfg.steps_per_trajectory,
                 cfg.burn_in, cfg.workers, &anomalies};

    ExperimentOutput out;
    if (cfg.experiment == "diffusivity")
        run_diffusivity(cfg, ens, out);
    else if (cfg.experiment == "chord-stats")
        run_chord_stats(cfg, ens, out);
    else if (cfg.experiment == "tails")
        run_tails(cfg, ens, out);
    else if (cfg.experiment == "induced-chords")
        run_induced(cfg, ens, out);
    else if (cfg.experiment == "invariant-hist")
        run_invariant_hist(cfg, ens, out);
    else if (cfg.experiment == "cosine-test")
        run_cosine_test(cfg, out);
    else if (cfg.experiment == "kernel-check")
        run_kernel_check(cfg, out);
    else if (cfg.experiment == "simulate")
        run_simulate(cfg, ens, out);
    else
        throw ConfigError("experiment", "unknown experiment " + cfg.experiment);

    fs::create_directories(cfg.output_dir);
    RunManifest man;
    man.version = kVersion;
    man.config_echo = config_echo(cfg);
    man.anomalies = anomalies.load();
    man.verdicts = out.verdicts;
    for (const auto& [v, pass] : out.verdicts)
        if (!pass) man.all_pass = false;
    for (const auto& [name, bytes] : out.files) {
        fs::path p = fs::path(cfg.output_dir) / name;
        std::ofstream f(p, std::ios::binary);
        f << bytes;
        man.files.push_back({name, fnv1a64_hex(bytes), bytes.size()});
    }
    man.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream mf(fs::path(cfg.output_dir) / "manifest.json", std::ios::binary);
    mf << man.to_json().dump(2) << "\n";
    return man;
}

}  // namespace ktube
