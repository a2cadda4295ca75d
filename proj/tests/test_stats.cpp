#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ustlab/stats.hpp"

using namespace ustlab;

TEST(Ks, IdenticalSamplesGiveZero)
{
    const std::vector<double> x{0.3, 1.2, 5.0, 2.2};
    EXPECT_EQ(ks_two_sample(Ecdf(x), Ecdf(x)).statistic, 0.0);
}

TEST(Ks, SingleSampleAgainstUniform)
{
    const auto r = ks_one_sample(Ecdf({0.5}), [](double x) { return std::clamp(x, 0.0, 1.0); });
    EXPECT_DOUBLE_EQ(r.statistic, 0.5);
}

TEST(Ks, UniformSampleWithinDkw)
{
    RngStream rng(1, 0);
    std::vector<double> x(100000);
    for (auto& v : x) v = rng.uniform();
    const auto r = ks_one_sample(Ecdf(x), [](double v) { return std::clamp(v, 0.0, 1.0); });
    EXPECT_LT(r.statistic, 0.01);
    EXPECT_GT(r.p_value(), 1e-3);
}

TEST(Ks, TwoSampleAgainstBruteForce)
{
    RngStream rng(2, 0);
    std::vector<double> a(40), b(25);
    for (auto& v : a) v = std::floor(rng.uniform() * 10);
    for (auto& v : b) v = std::floor(rng.uniform() * 10 + 1);
    const Ecdf ea(a), eb(b);
    double brute = 0;
    for (double x : a) brute = std::max(brute, std::abs(ea(x) - eb(x)));
    for (double x : b) brute = std::max(brute, std::abs(ea(x) - eb(x)));
    EXPECT_DOUBLE_EQ(ks_two_sample(ea, eb).statistic, brute);
}

TEST(Ks, InvariantUnderMonotoneTransform)
{
    RngStream rng(3, 0);
    std::vector<double> a(300), b(200);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + 0.2;
    const double d = ks_two_sample(Ecdf(a), Ecdf(b)).statistic;
    for (auto& v : a) v = std::exp(v);
    for (auto& v : b) v = std::exp(v);
    EXPECT_DOUBLE_EQ(ks_two_sample(Ecdf(a), Ecdf(b)).statistic, d);
}

TEST(Ks, EmptySample) { EXPECT_THROW(Ecdf({}), EmptySample); }

TEST(ChiSquare, EqualCounts)
{
    const std::vector<std::uint64_t> c{10, 10, 10, 10};
    const auto r = chi_square_uniform(c);
    EXPECT_EQ(r.stat, 0.0);
    EXPECT_EQ(r.dof, 3u);
    EXPECT_NEAR(r.pvalue, 1.0, 1e-12);
}

TEST(ChiSquare, KnownPValue)
{
    // stat = 4 with one degree of freedom: p = erfc(sqrt(2)).
    const std::vector<std::uint64_t> c{30, 10};
    const auto r = chi_square_uniform(c);
    EXPECT_DOUBLE_EQ(r.stat, 10.0);
    EXPECT_NEAR(r.pvalue, std::erfc(std::sqrt(5.0)), 1e-12);
}

TEST(Tv, Basics)
{
    const std::vector<double> p{0.2, 0.3, 0.5}, dx{1, 0, 0}, dy{0, 1, 0};
    EXPECT_EQ(tv_finite(p, p), 0.0);
    EXPECT_EQ(tv_finite(dx, dy), 1.0);
}

TEST(Tv, EqualsMaxOverSubsets)
{
    RngStream rng(4, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.below(10);
        std::vector<double> p(n), q(n), r(n);
        double sp = 0, sq = 0, sr = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sp += p[i] = rng.uniform();
            sq += q[i] = rng.uniform();
            sr += r[i] = rng.uniform();
        }
        for (std::size_t i = 0; i < n; ++i) p[i] /= sp, q[i] /= sq, r[i] /= sr;
        double best = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            double d = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (mask >> i & 1) d += p[i] - q[i];
            best = std::max(best, std::abs(d));
        }
        EXPECT_NEAR(tv_finite(p, q), best, 1e-12);
        EXPECT_DOUBLE_EQ(tv_finite(p, q), tv_finite(q, p));
        EXPECT_LE(tv_finite(p, r), tv_finite(p, q) + tv_finite(q, r) + 1e-15);
    }
}

TEST(Quantile, Basics)
{
    const Ecdf e({5, 1, 4, 2, 3});
    EXPECT_EQ(e.quantile(0.0), 1);
    EXPECT_EQ(e.quantile(0.5), 3);
    EXPECT_EQ(e.quantile(0.9), 5);
    EXPECT_EQ(e.quantile(1.0), 5);
    EXPECT_DOUBLE_EQ(e(3.5), 0.6);
}

TEST(Bootstrap, MeanCiCoversTruth)
{
    RngStream rng(5, 0);
    std::vector<double> x(400);
    for (auto& v : x) v = rng.normal();
    RngStream boot(5, 1);
    const auto ci = bootstrap(x, [](std::span<const double> s) { return summarize(s).mean; }, 2000, boot);
    EXPECT_LT(ci.lower, ci.estimate);
    EXPECT_GT(ci.upper, ci.estimate);
    EXPECT_NEAR(ci.std_error, 1.0 / 20, 0.01);
    EXPECT_LT(ci.lower, 0.0 + 3 * ci.std_error);
}

TEST(Kolmogorov, KnownValue)
{
    // Q(1.36) ~ 0.0494 (the classical 5% critical value).
    EXPECT_NEAR(kolmogorov_q(1.36), 0.0494, 5e-4);
    EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}
