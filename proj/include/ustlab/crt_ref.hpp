#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ustlab/errors.hpp"
#include "ustlab/rng.hpp"
#include "ustlab/tree_metrics.hpp"
#include "ustlab/wilson.hpp"

namespace ustlab {

// CRT references. The CRT is coded by two times the standard Brownian
// excursion; the discrete surrogate is a uniform Dyck path of length 2N with
// e-hat(t) = e(floor(2Nt)) / sqrt(2N).

/// Density of the CRT diameter,
///   f(y) = sqrt(2 pi)/3 sum_{n>=1} e^{-b} [ 64/y^4 (4b^4 - 36b^3 + 75b^2 - 30b)
///                                         + 16/y^2 (2b^3 - 5b^2) ],
/// b = 8 (pi n / y)^2.
inline double szekeres_pdf(double y, int terms = 60)
{
    require(y > 0.0, "szekeres_pdf: y must be positive");
    require(terms >= 1, "szekeres_pdf: terms must be >= 1");
    const double y2 = y * y;
    const double c4 = 64.0 / (y2 * y2);
    const double c2 = 16.0 / y2;
    double sum = 0.0;
    double largest = 0.0;
    for (int n = 1; n <= terms; ++n) {
        const double a = std::numbers::pi * n / y;
        const double b = 8.0 * a * a;
        const double b2 = b * b;
        const double poly = c4 * (4.0 * b2 * b2 - 36.0 * b2 * b + 75.0 * b2 - 30.0 * b) + c2 * (2.0 * b2 * b - 5.0 * b2);
        const double term = std::exp(-b) * poly;
        sum += term;
        largest = std::max(largest, std::abs(term));
        // e^{-b} b^4 peaks at b = 4; past it the terms only shrink.
        if (b > 4.0 && std::abs(term) <= 1e-14 * std::max(std::abs(sum), largest))
            return std::sqrt(2.0 * std::numbers::pi) / 3.0 * sum;
    }
    throw NonConvergence("szekeres_pdf: series not converged at y = " + std::to_string(y) + " with " +
                         std::to_string(terms) + " terms");
}

namespace detail {

inline double szekeres_pdf_or_zero(double y) { return y <= 0.0 ? 0.0 : szekeres_pdf(y, 200); }

template <class F>
double adaptive_simpson(F&& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

} // namespace detail

/// Integral of f over [a, b] by adaptive Simpson on unit panels.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-12)
{
    if (b <= a) return 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil(b - a)));
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + i * h;
        const double hi = lo + h;
        const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
        const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::adaptive_simpson(f, lo, hi, fa, fm, fb, whole, tol / panels, 40);
    }
    return total;
}

/// Upper end of the CDF quadrature; the density beyond it is below 1e-30.
inline constexpr double kSzekeresCutoff = 30.0;

/// P(diameter <= y), by quadrature of the density from 0.
inline double szekeres_cdf(double y, double tol = 1e-11)
{
    if (y <= 0.0) return 0.0;
    const double v = integrate(detail::szekeres_pdf_or_zero, 0.0, std::min(y, kSzekeresCutoff), tol);
    return std::clamp(v, 0.0, 1.0);
}

/// Szekeres CDF tabulated on a fine grid for repeated evaluation
/// (cumulative quadrature plus cubic Hermite interpolation).
class SzekeresTable {
public:
    explicit SzekeresTable(double step = 1.0 / 256.0) : step_(step)
    {
        const auto cells = static_cast<std::size_t>(std::ceil(kSzekeresCutoff / step_));
        cdf_.resize(cells + 1);
        pdf_.resize(cells + 1);
        cdf_[0] = 0.0;
        pdf_[0] = 0.0;
        for (std::size_t i = 1; i <= cells; ++i) {
            const double lo = (i - 1) * step_, hi = i * step_;
            cdf_[i] = cdf_[i - 1] + integrate(detail::szekeres_pdf_or_zero, lo, hi, 1e-14);
            pdf_[i] = detail::szekeres_pdf_or_zero(hi);
        }
    }

    double operator()(double y) const
    {
        if (y <= 0.0) return 0.0;
        const double pos = y / step_;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= cdf_.size()) return std::min(1.0, cdf_.back());
        const double s = pos - static_cast<double>(i);
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        const double v = h00 * cdf_[i] + h10 * step_ * pdf_[i] + h01 * cdf_[i + 1] + h11 * step_ * pdf_[i + 1];
        return std::clamp(v, 0.0, 1.0);
    }

private:
    double step_;
    std::vector<double> cdf_;
    std::vector<double> pdf_;
};

// ---------------------------------------------------------------------------
// Dyck paths
// ---------------------------------------------------------------------------

/// Heights e_0..e_{2N} of a nonnegative +-1 excursion.
struct DiscreteExcursion {
    std::vector<std::int32_t> heights;
    std::uint32_t half_length = 0;

    bool valid() const
    {
        if (heights.size() != 2 * static_cast<std::size_t>(half_length) + 1) return false;
        if (heights.front() != 0 || heights.back() != 0) return false;
        for (std::size_t t = 0; t + 1 < heights.size(); ++t)
            if (heights[t] < 0 || std::abs(heights[t + 1] - heights[t]) != 1) return false;
        return true;
    }
};

/// Uniform Dyck path of length 2N. Cycle lemma: of the 2N+1 rotations of a
/// uniform arrangement of N up and N+1 down steps, exactly one (the one
/// starting after the first minimum) keeps every proper prefix >= 0; dropping
/// its final down step gives a uniform Dyck path.
inline DiscreteExcursion sample_excursion(std::uint32_t half_length, RngStream& rng)
{
    require(half_length >= 1, "sample_excursion: N must be >= 1");
    const std::size_t len = 2 * static_cast<std::size_t>(half_length) + 1;
    std::vector<std::int8_t> steps(len);
    std::size_t ups_left = half_length;
    for (std::size_t i = 0; i < len; ++i) {
        const bool up = rng.below(len - i) < ups_left;
        steps[i] = up ? 1 : -1;
        ups_left -= up ? 1 : 0;
    }
    std::int64_t h = 0, lowest = 0;
    std::size_t argmin = 0; // index of the first step after the first minimum
    for (std::size_t i = 0; i < len; ++i) {
        h += steps[i];
        if (h < lowest) {
            lowest = h;
            argmin = i + 1;
        }
    }
    DiscreteExcursion e;
    e.half_length = half_length;
    e.heights.resize(len);
    e.heights[0] = 0;
    for (std::size_t i = 1; i < len; ++i) e.heights[i] = e.heights[i - 1] + steps[(argmin + i - 1) % len];
    return e;
}

/// Plane tree whose contour is the excursion (N + 1 vertices, root 0).
inline Tree excursion_tree(const DiscreteExcursion& e)
{
    Tree t;
    t.root = 0;
    t.parent.assign(static_cast<std::size_t>(e.half_length) + 1, 0);
    Vertex cur = 0;
    Vertex next = 1;
    for (std::size_t i = 1; i < e.heights.size(); ++i) {
        if (e.heights[i] > e.heights[i - 1]) {
            t.parent[next] = cur;
            cur = next++;
        } else {
            cur = t.parent[cur];
        }
    }
    return t;
}

/// 2 sup_{s<t} (e-hat_s + e-hat_t - 2 min_[s,t] e-hat), via the coded tree.
inline double excursion_diameter(const DiscreteExcursion& e)
{
    const TreeGraph tg(excursion_tree(e));
    return 2.0 * diameter(tg) / std::sqrt(2.0 * e.half_length);
}

inline double excursion_height(const DiscreteExcursion& e)
{
    return 2.0 * *std::max_element(e.heights.begin(), e.heights.end()) / std::sqrt(2.0 * e.half_length);
}

inline double crt_diameter_sample(std::uint32_t half_length, RngStream& rng)
{
    return excursion_diameter(sample_excursion(half_length, rng));
}

inline double crt_height_sample(std::uint32_t half_length, RngStream& rng)
{
    return excursion_height(sample_excursion(half_length, rng));
}

/// Coded distance 2 (e-hat_s + e-hat_t - 2 min_[s,t] e-hat) between lattice times.
inline double excursion_distance(const DiscreteExcursion& e, std::size_t s, std::size_t t)
{
    if (s > t) std::swap(s, t);
    const std::int32_t low = *std::min_element(e.heights.begin() + static_cast<std::ptrdiff_t>(s),
                                               e.heights.begin() + static_cast<std::ptrdiff_t>(t) + 1);
    return 2.0 * (e.heights[s] + e.heights[t] - 2 * low) / std::sqrt(2.0 * e.half_length);
}

/// Distances between m uniform points of the CRT surrogate.
inline DistanceMatrixSample crt_fdd_sample(std::uint32_t half_length, std::size_t m, RngStream& rng)
{
    require(m >= 2, "crt_fdd_sample: m must be >= 2");
    const auto e = sample_excursion(half_length, rng);
    const std::size_t len = 2 * static_cast<std::size_t>(half_length);
    std::vector<std::size_t> times(m);
    for (auto& t : times) t = static_cast<std::size_t>(std::floor(rng.uniform() * static_cast<double>(len)));
    DistanceMatrixSample out;
    out.m = m;
    out.distances.resize(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            out.distances[DistanceMatrixSample::index(m, i, j)] = excursion_distance(e, times[i], times[j]);
    return out;
}

} // namespace ustlab
