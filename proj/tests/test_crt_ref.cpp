#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "ustlab/crt_ref.hpp"
#include "ustlab/stats.hpp"

using namespace ustlab;

namespace {

/// 2 max_{s<=t} (e_s + e_t - 2 min_[s,t] e) / sqrt(2N) by direct scan.
double scan_diameter(const DiscreteExcursion& e)
{
    const std::size_t len = e.heights.size();
    int best = 0;
    for (std::size_t s = 0; s < len; ++s) {
        int low = e.heights[s];
        for (std::size_t t = s; t < len; ++t) {
            low = std::min(low, e.heights[t]);
            best = std::max(best, e.heights[s] + e.heights[t] - 2 * low);
        }
    }
    return 2.0 * best / std::sqrt(2.0 * e.half_length);
}

std::size_t catalan(std::size_t n)
{
    std::size_t c = 1;
    for (std::size_t i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
    return c;
}

} // namespace

TEST(Szekeres, NearZeroIsNegligible) { EXPECT_LT(szekeres_pdf(0.05), 1e-10); }

TEST(Szekeres, IntegratesToOne)
{
    const double mass = integrate([](double y) { return szekeres_pdf(y); }, 1e-9, 20.0);
    EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(Szekeres, MeanIsKnownConstant)
{
    // E[diameter] = (4/3) sqrt(2 pi) for the CRT coded by 2e.
    const double mean = integrate([](double y) { return y * szekeres_pdf(y); }, 1e-9, 20.0);
    EXPECT_NEAR(mean, 4.0 / 3.0 * std::sqrt(2 * std::numbers::pi), 1e-8);
}

TEST(Szekeres, TruncationStable)
{
    EXPECT_NEAR(szekeres_pdf(1.0, 50), szekeres_pdf(1.0, 100), 1e-12);
    EXPECT_NEAR(szekeres_pdf(6.0, 50), szekeres_pdf(6.0, 100), 1e-12);
}

TEST(Szekeres, NonConvergence)
{
    EXPECT_THROW(szekeres_pdf(8.0, 2), NonConvergence);
    EXPECT_THROW(szekeres_pdf(-1.0), PreconditionViolated);
}

TEST(Szekeres, CdfShapeAndTable)
{
    const SzekeresTable table;
    double prev = 0.0;
    for (double y = 0.25; y <= 12.0; y += 0.25) {
        const double c = szekeres_cdf(y);
        EXPECT_GE(c, prev);
        EXPECT_NEAR(table(y + 0.013), szekeres_cdf(y + 0.013), 1e-9);
        prev = c;
    }
    EXPECT_EQ(szekeres_cdf(0.0), 0.0);
    EXPECT_NEAR(szekeres_cdf(25.0), 1.0, 1e-9);
    EXPECT_NEAR(szekeres_cdf(4.0) - szekeres_cdf(2.0),
                integrate([](double y) { return szekeres_pdf(y); }, 2.0, 4.0), 1e-10);
}

TEST(Excursion, UnitLength)
{
    RngStream rng(1, 0);
    const auto e = sample_excursion(1, rng);
    EXPECT_EQ(e.heights, (std::vector<std::int32_t>{0, 1, 0}));
    EXPECT_DOUBLE_EQ(excursion_height(e), std::sqrt(2.0));
}

TEST(Excursion, UniformOverDyckPaths)
{
    RngStream rng(2, 0);
    for (std::uint32_t n = 2; n <= 4; ++n) {
        std::map<std::vector<std::int32_t>, std::uint64_t> freq;
        const int samples = 20000;
        for (int i = 0; i < samples; ++i) {
            const auto e = sample_excursion(n, rng);
            ASSERT_TRUE(e.valid());
            ++freq[e.heights];
        }
        ASSERT_EQ(freq.size(), catalan(n));
        std::vector<std::uint64_t> counts;
        for (const auto& [path, c] : freq) counts.push_back(c);
        EXPECT_GT(chi_square_uniform(counts).pvalue, 1e-3) << n;
        if (n == 2) {
            const double se = std::sqrt(0.25 / samples);
            for (auto c : counts) EXPECT_NEAR(static_cast<double>(c) / samples, 0.5, 3 * se);
        }
    }
}

TEST(Excursion, InvariantsAtScale)
{
    RngStream rng(3, 0);
    for (int i = 0; i < 20; ++i) EXPECT_TRUE(sample_excursion(5000, rng).valid());
}

TEST(CrtDiameter, MatchesScanOracle)
{
    RngStream rng(4, 0);
    for (std::uint32_t n : {1u, 2u, 3u, 7u, 40u, 200u})
        for (int i = 0; i < 10; ++i) {
            const auto e = sample_excursion(n, rng);
            EXPECT_NEAR(excursion_diameter(e), scan_diameter(e), 1e-12);
        }
}

TEST(CrtDiameter, HandEvaluatedLengthTwo)
{
    // (0,1,2,1,0): a path of two edges, diameter 2. (0,1,0,1,0): a cherry, diameter 2.
    const DiscreteExcursion tall{{0, 1, 2, 1, 0}, 2}, flat{{0, 1, 0, 1, 0}, 2};
    EXPECT_DOUBLE_EQ(excursion_diameter(tall), 2.0 * 2 / 2.0);
    EXPECT_DOUBLE_EQ(excursion_diameter(flat), 2.0 * 2 / 2.0);
    EXPECT_DOUBLE_EQ(excursion_height(tall), 2.0 * 2 / 2.0);
    EXPECT_DOUBLE_EQ(excursion_height(flat), 2.0 * 1 / 2.0);
}

TEST(CrtDiameter, HeightSandwich)
{
    RngStream rng(5, 0);
    for (int i = 0; i < 200; ++i) {
        const auto e = sample_excursion(500, rng);
        const double d = excursion_diameter(e), h = excursion_height(e);
        EXPECT_LE(h, d + 1e-12);
        EXPECT_LE(d, 2 * h + 1e-12);
    }
}

TEST(CrtFdd, ZeroAndFourPoint)
{
    RngStream rng(6, 0);
    const auto e = sample_excursion(300, rng);
    EXPECT_EQ(excursion_distance(e, 17, 17), 0.0);
    for (int i = 0; i < 50; ++i) EXPECT_LE(tree_metric_defect(crt_fdd_sample(300, 5, rng)), 1e-12);
}

TEST(CrtFdd, MeanStableAcrossSeedsAndRayleigh)
{
    const std::uint32_t n = 2000;
    std::vector<SummaryStats> runs;
    for (std::uint64_t seed : {10u, 11u}) {
        RngStream rng(seed, 0);
        std::vector<double> d;
        for (int i = 0; i < 20000; ++i) d.push_back(crt_fdd_sample(n, 2, rng).distances[0]);
        runs.push_back(summarize(d));
    }
    EXPECT_NEAR(runs[0].mean, runs[1].mean, 3 * std::hypot(runs[0].std_error, runs[1].std_error));
    // Rayleigh mean, allowing the lattice offset (measured near 1.3 / sqrt N for N in [500, 32000]).
    EXPECT_NEAR(runs[0].mean, std::sqrt(std::numbers::pi / 2), 3 * runs[0].std_error + 2.0 / std::sqrt(n));
}
