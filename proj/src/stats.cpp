#include "ktube/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ktube {

void MomentAccumulator::add(double x) {
    std::uint64_t n1 = n_;
    ++n_;
    double n = static_cast<double>(n_);
    double delta = x - mean_;
    double delta_n = delta / n;
    double delta_n2 = delta_n * delta_n;
    double term1 = delta * delta_n * static_cast<double>(n1);
    m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
    m2_ += term1;
    mean_ += delta_n;
}

void MomentAccumulator::merge(const MomentAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    double na = static_cast<double>(n_);
    double nb = static_cast<double>(o.n_);
    double n = na + nb;
    double delta = o.mean_ - mean_;
    double d2 = delta * delta;
    double m2 = m2_ + o.m2_ + d2 * na * nb / n;
    double m3 = m3_ + o.m3_ + delta * d2 * na * nb * (na - nb) / (n * n) +
                3.0 * delta * (na * o.m2_ - nb * m2_) / n;
    double m4 = m4_ + o.m4_ +
                d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                4.0 * delta * (na * o.m3_ - nb * m3_) / n;
    mean_ += delta * nb / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += o.n_;
}

double MomentAccumulator::variance() const {
    return n_ ? m2_ / static_cast<double>(n_) : 0.0;
}

double MomentAccumulator::sample_variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double MomentAccumulator::std_error_of_mean() const {
    return n_ > 1 ? std::sqrt(sample_variance() / static_cast<double>(n_)) : 0.0;
}

double MomentAccumulator::skewness() const {
    if (n_ < 2 || m2_ <= 0.0) return 0.0;
    double n = static_cast<double>(n_);
    return std::sqrt(n) * m3_ / std::pow(m2_, 1.5);
}

double MomentAccumulator::excess_kurtosis() const {
    if (n_ < 2 || m2_ <= 0.0) return 0.0;
    double n = static_cast<double>(n_);
    return n * m4_ / (m2_ * m2_) - 3.0;
}

void BatchMeans::add(double x) {
    total_sum_ += x;
    ++total_n_;
    batch_sum_ += x;
    if (++in_batch_ == batch_) {
        batch_stats_.add(batch_sum_ / static_cast<double>(batch_));
        batch_sum_ = 0.0;
        in_batch_ = 0;
    }
}

void BatchMeans::merge(const BatchMeans& o) {
    // Partial tail batches of the other side are dropped from the error
    // estimate but kept in the mean; trajectories are batched independently.
    total_sum_ += o.total_sum_;
    total_n_ += o.total_n_;
    batch_stats_.merge(o.batch_stats_);
}

double BatchMeans::std_error() const {
    std::uint64_t b = batch_stats_.count();
    if (b < 2) return std::numeric_limits<double>::infinity();
    return std::sqrt(batch_stats_.sample_variance() / static_cast<double>(b));
}

void Histogram::add(double x) {
    if (x < lo) {
        ++underflow;
        return;
    }
    if (x >= hi) {
        ++overflow;
        return;
    }
    auto bins = counts.size();
    auto idx = static_cast<size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
    if (idx >= bins) idx = bins - 1;
    ++counts[idx];
}

void Histogram::merge(const Histogram& o) {
    underflow += o.underflow;
    overflow += o.overflow;
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
}

std::uint64_t Histogram::total_in_range() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

double ks_statistic_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    double n = static_cast<double>(u.size());
    double d = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        double hi = (static_cast<double>(i) + 1.0) / n - u[i];
        double lo = u[i] - static_cast<double>(i) / n;
        d = std::max(d, std::max(hi, lo));
    }
    return d;
}

double ks_threshold(std::uint64_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_cdf(double x, double dof) { return gamma_p(0.5 * dof, 0.5 * x); }

double chi2_quantile(double p, double dof) {
    double lo = 0.0;
    double hi = dof + 20.0 * std::sqrt(dof) + 20.0;
    while (chi2_cdf(hi, dof) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, dof) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-10 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

double chi2_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected_mass,
                      std::uint64_t total) {
    double chi2 = 0.0;
    double tot = static_cast<double>(total);
    for (size_t i = 0; i < observed.size(); ++i) {
        double e = expected_mass[i] * tot;
        if (e <= 0.0) continue;
        double d = static_cast<double>(observed[i]) - e;
        chi2 += d * d / e;
    }
    return chi2;
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double wls_slope_through_origin(std::span<const double> x, std::span<const double> y,
                                std::span<const double> w) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += w[i] * x[i] * y[i];
        den += w[i] * x[i] * x[i];
    }
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace ktube
