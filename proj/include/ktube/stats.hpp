#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ktube {

// A statistic with its uncertainty. `divergent` marks estimates that failed
// to stabilize (used for quantities that are infinite in theory).
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;
    std::string method;
    bool divergent = false;
};

// Streaming central moments up to order 4 with associative merge
// (Chan/Pebay update formulas). Safe to fold across workers in any grouping.
class MomentAccumulator {
public:
    void add(double x);
    void merge(const MomentAccumulator& o);

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;         // population variance (denominator n)
    double sample_variance() const;  // denominator n-1
    double std_error_of_mean() const;
    double skewness() const;
    double excess_kurtosis() const;
    double fourth_central_moment() const { return n_ ? m4_ / static_cast<double>(n_) : 0.0; }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

// Batch-means accumulator for autocorrelated in-trajectory streams.
// Completed batches feed a MomentAccumulator of batch means; the merge
// concatenates partial batches only when batch boundaries align (we merge
// per-trajectory accumulators whose partial tails are discarded).
class BatchMeans {
public:
    explicit BatchMeans(std::uint64_t batch_size = 1000) : batch_(batch_size) {}

    void add(double x);
    void merge(const BatchMeans& o);

    std::uint64_t count() const { return total_n_; }
    double mean() const { return total_n_ ? total_sum_ / static_cast<double>(total_n_) : 0.0; }
    double std_error() const;
    std::uint64_t batches() const { return batch_stats_.count(); }

private:
    std::uint64_t batch_;
    std::uint64_t in_batch_ = 0;
    double batch_sum_ = 0.0;
    double total_sum_ = 0.0;
    std::uint64_t total_n_ = 0;
    MomentAccumulator batch_stats_;
};

struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<std::uint64_t> counts;
    std::uint64_t underflow = 0, overflow = 0;

    Histogram() = default;
    Histogram(double lo, double hi, int bins) : lo(lo), hi(hi), counts(bins, 0) {}
    void add(double x);
    void merge(const Histogram& o);
    std::uint64_t total_in_range() const;
};

// Kolmogorov-Smirnov statistic of samples against U(0,1); samples are
// transformed by the model CDF before the call. Sorts a copy.
double ks_statistic_uniform(std::vector<double> u);

// Decision threshold used throughout: D < 1.95/sqrt(n) (asymptotic p ~ 0.001).
double ks_threshold(std::uint64_t n);

double normal_cdf(double x);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

double chi2_cdf(double x, double dof);
double chi2_quantile(double p, double dof);

// Pearson chi-square against expected bin masses (probabilities, must sum
// to ~1 over the included bins).
double chi2_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected_mass,
                      std::uint64_t total);

struct WilsonInterval {
    double lo = 0.0, hi = 1.0;
};
WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n, double z);

// Weighted least squares slope of y against x through the origin.
double wls_slope_through_origin(std::span<const double> x, std::span<const double> y,
                                std::span<const double> w);

}  // namespace ktube
