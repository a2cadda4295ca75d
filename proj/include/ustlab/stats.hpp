#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ustlab/errors.hpp"
#include "ustlab/rng.hpp"

namespace ustlab {

class Ecdf {
public:
    explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples))
    {
        if (sorted_.empty()) throw EmptySample("Ecdf needs at least one sample");
        std::sort(sorted_.begin(), sorted_.end());
    }

    std::size_t n() const { return sorted_.size(); }
    const std::vector<double>& sorted_samples() const { return sorted_; }

    /// Fraction of samples <= x.
    double operator()(double x) const
    {
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

    /// Empirical p-quantile (lower, type 1).
    double quantile(double p) const
    {
        require(p >= 0.0 && p <= 1.0, "quantile: p must be in [0, 1]");
        const double pos = std::ceil(p * static_cast<double>(sorted_.size()));
        const auto i = static_cast<std::size_t>(std::max(1.0, pos)) - 1;
        return sorted_[std::min(i, sorted_.size() - 1)];
    }

private:
    std::vector<double> sorted_;
};

enum class KsMode { one_sample_vs_cdf, two_sample };

struct KsReport {
    double statistic = 0.0;
    std::size_t n_samples = 0;
    std::size_t m_samples = 0;
    KsMode mode = KsMode::one_sample_vs_cdf;

    /// Asymptotic Kolmogorov p-value with effective size n_e and the
    /// (sqrt(n_e) + 0.12 + 0.11 / sqrt(n_e)) correction.
    double p_value() const;
};

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_q(double lambda)
{
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double KsReport::p_value() const
{
    const double ne = mode == KsMode::two_sample
                          ? static_cast<double>(n_samples) * m_samples / static_cast<double>(n_samples + m_samples)
                          : static_cast<double>(n_samples);
    const double r = std::sqrt(ne);
    return kolmogorov_q((r + 0.12 + 0.11 / r) * statistic);
}

inline KsReport ks_one_sample(const Ecdf& e, const std::function<double(double)>& cdf)
{
    const auto& x = e.sorted_samples();
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        // Gap just below the jump (before any ties at x[i]) and at the jump.
        std::size_t lo = i;
        while (lo > 0 && x[lo - 1] == x[i]) --lo;
        d = std::max({d, f - static_cast<double>(lo) / n, static_cast<double>(i + 1) / n - f});
    }
    return {std::clamp(d, 0.0, 1.0), x.size(), 0, KsMode::one_sample_vs_cdf};
}

inline KsReport ks_two_sample(const Ecdf& a, const Ecdf& b)
{
    const auto& x = a.sorted_samples();
    const auto& y = b.sorted_samples();
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    return {d, x.size(), y.size(), KsMode::two_sample};
}

struct ChiSquareReport {
    double stat = 0.0;
    std::size_t dof = 0;
    double pvalue = 1.0;
};

/// Pearson chi-square against equal cell probabilities.
inline ChiSquareReport chi_square_uniform(std::span<const std::uint64_t> counts)
{
    require(counts.size() >= 2, "chi_square_uniform: need at least two cells");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0.0) throw EmptySample("chi_square_uniform: no observations");
    const double expected = total / static_cast<double>(counts.size());
    ChiSquareReport r;
    for (auto c : counts) {
        const double diff = static_cast<double>(c) - expected;
        r.stat += diff * diff / expected;
    }
    r.dof = counts.size() - 1;
    r.pvalue = boost::math::gamma_q(0.5 * static_cast<double>(r.dof), 0.5 * r.stat);
    return r;
}

/// Total variation distance between two distributions on the same finite set.
inline double tv_finite(std::span<const double> p, std::span<const double> q)
{
    require(p.size() == q.size(), "tv_finite: supports differ in size");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

struct SummaryStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

inline SummaryStats summarize(std::span<const double> x)
{
    if (x.empty()) throw EmptySample("summarize: no samples");
    SummaryStats s;
    s.n = x.size();
    s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : x) ss += (v - s.mean) * (v - s.mean);
        s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
    }
    return s;
}

struct BootstrapCi {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double std_error = 0.0;
};

/// Percentile bootstrap for a statistic of a sample.
inline BootstrapCi bootstrap(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                             std::size_t resamples, RngStream& rng, double level = 0.95)
{
    if (x.empty()) throw EmptySample("bootstrap: no samples");
    require(resamples >= 2, "bootstrap: need at least two resamples");
    BootstrapCi ci;
    ci.estimate = stat(x);
    std::vector<double> draw(x.size());
    std::vector<double> values(resamples);
    for (auto& v : values) {
        for (auto& d : draw) d = x[rng.below(x.size())];
        v = stat(draw);
    }
    const auto spread = summarize(values);
    ci.std_error = spread.std_error * std::sqrt(static_cast<double>(resamples));
    const Ecdf e(values);
    ci.lower = e.quantile((1.0 - level) / 2.0);
    ci.upper = e.quantile(1.0 - (1.0 - level) / 2.0);
    return ci;
}

inline double quantile(std::span<const double> x, double p) { return Ecdf({x.begin(), x.end()}).quantile(p); }

} // namespace ustlab
