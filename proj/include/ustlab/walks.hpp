#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ustlab/errors.hpp"
#include "ustlab/graphs.hpp"
#include "ustlab/rng.hpp"

namespace ustlab {

/// Largest vertex count for dense exact computations (n x n kernels).
inline constexpr std::size_t kDefaultExactCap = 4096;

enum class StopReason { hit_target, geometric_kill, fixed_steps, step_budget };

/// A lazy walk trajectory X_0..X_L. Consecutive entries are equal (hold) or
/// adjacent.
struct WalkPath {
    std::vector<Vertex> vertices;
    StopReason stop_reason = StopReason::hit_target;

    /// Number of steps L.
    std::size_t length() const { return vertices.empty() ? 0 : vertices.size() - 1; }
};

/// Loop erasure Y of a walk together with the times lambda_i at which the
/// walk contributes Y_i (erased[i] == walk[lambda[i]]).
struct ErasedWalk {
    std::vector<Vertex> erased;
    std::vector<std::size_t> lambda;
    std::size_t raw_len = 0;
};

struct HitSet {
    const VertexSet* set;
};
/// Kill with a geometric total lifetime of the given mean: the walk is killed
/// at time T - 1 where T >= 1 is geometric, so it has mean vertices `mean`.
struct GeometricKill {
    double mean;
};
struct FixedSteps {
    std::uint64_t count;
};

struct StopRule {
    std::variant<HitSet, GeometricKill, FixedSteps> rule;
    std::uint64_t budget = 1'000'000'000;

    static StopRule hit(const VertexSet& s) { return {HitSet{&s}}; }
    static StopRule geometric(double mean) { return {GeometricKill{mean}}; }
    static StopRule steps(std::uint64_t t) { return {FixedSteps{t}}; }
};

/// Runs the lazy walk from `start` until the stop rule fires.
inline WalkPath lazy_walk(const GraphHandle& g, Vertex start, const StopRule& stop, RngStream& rng)
{
    require(start < g.vertex_count(), "lazy_walk: start out of range");
    WalkPath w;
    w.vertices.push_back(start);
    Vertex cur = start;

    if (const auto* hs = std::get_if<HitSet>(&stop.rule)) {
        require(hs->set != nullptr && !hs->set->empty(), "lazy_walk: hit set must be nonempty");
        const VertexSet& target = *hs->set;
        std::uint64_t steps = 0;
        while (!target.contains(cur)) {
            if (steps == stop.budget) {
                w.stop_reason = StopReason::step_budget;
                return w;
            }
            cur = g.lazy_step(cur, rng);
            w.vertices.push_back(cur);
            ++steps;
        }
        w.stop_reason = StopReason::hit_target;
        return w;
    }

    std::uint64_t total;
    StopReason reason;
    if (const auto* gk = std::get_if<GeometricKill>(&stop.rule)) {
        require(gk->mean > 1.0, "lazy_walk: geometric mean must exceed 1");
        total = rng.geometric(gk->mean) - 1;
        reason = StopReason::geometric_kill;
    } else {
        total = std::get<FixedSteps>(stop.rule).count;
        reason = StopReason::fixed_steps;
    }
    if (total > stop.budget) {
        total = stop.budget;
        reason = StopReason::step_budget;
    }
    w.vertices.reserve(static_cast<std::size_t>(total) + 1);
    for (std::uint64_t s = 0; s < total; ++s) {
        cur = g.lazy_step(cur, rng);
        w.vertices.push_back(cur);
    }
    w.stop_reason = reason;
    return w;
}

/// Loop erasure via last visits: lambda_0 = 0 and
/// lambda_i = 1 + max{t : X_t = Y_{i-1}}, stopping once lambda_i > L.
inline ErasedWalk loop_erase(std::span<const Vertex> walk)
{
    require(!walk.empty(), "loop_erase: empty walk");
    std::unordered_map<Vertex, std::size_t> last;
    last.reserve(walk.size());
    for (std::size_t t = 0; t < walk.size(); ++t) last[walk[t]] = t;

    ErasedWalk out;
    out.raw_len = walk.size() - 1;
    std::size_t lambda = 0;
    while (lambda <= out.raw_len) {
        const Vertex y = walk[lambda];
        out.erased.push_back(y);
        out.lambda.push_back(lambda);
        lambda = 1 + last[y];
    }
    return out;
}

inline ErasedWalk loop_erase(const WalkPath& w) { return loop_erase(std::span<const Vertex>(w.vertices)); }

// ---------------------------------------------------------------------------
// Exact small-graph kernels
// ---------------------------------------------------------------------------

/// Dense p_t(x, y) for the lazy walk.
struct HeatKernel {
    std::uint64_t t = 0;
    std::size_t n = 0;
    std::vector<double> p; // row-major

    double at(Vertex x, Vertex y) const { return p[static_cast<std::size_t>(x) * n + y]; }
    std::span<const double> row(Vertex x) const { return {p.data() + static_cast<std::size_t>(x) * n, n}; }
};

namespace detail {

/// out = dist * P (one step of the lazy walk applied to a row vector).
inline void push_forward(const GraphHandle& g, std::span<const double> dist, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    for (Vertex x = 0; x < dist.size(); ++x) {
        const double m = dist[x];
        if (m == 0.0) continue;
        g.for_each_transition(x, [&](Vertex y, double p) { out[y] += m * p; });
    }
}

inline void check_exact_size(const GraphHandle& g, std::size_t cap)
{
    if (g.vertex_count() > cap)
        throw GraphTooLarge(g.family_tag() + " has " + std::to_string(g.vertex_count()) + " vertices, cap is " +
                            std::to_string(cap));
}

} // namespace detail

/// Advances a dense heat kernel one step at a time.
class HeatKernelStepper {
public:
    explicit HeatKernelStepper(const GraphHandle& g, std::size_t cap = kDefaultExactCap) : g_(&g)
    {
        detail::check_exact_size(g, cap);
        k_.n = g.vertex_count();
        k_.p.assign(k_.n * k_.n, 0.0);
        for (std::size_t x = 0; x < k_.n; ++x) k_.p[x * k_.n + x] = 1.0;
        scratch_.resize(k_.n * k_.n);
    }

    const HeatKernel& kernel() const { return k_; }

    void step()
    {
        const std::size_t n = k_.n;
        for (std::size_t x = 0; x < n; ++x)
            detail::push_forward(*g_, std::span<const double>(k_.p.data() + x * n, n),
                                 std::span<double>(scratch_.data() + x * n, n));
        k_.p.swap(scratch_);
        ++k_.t;
    }

private:
    const GraphHandle* g_;
    HeatKernel k_;
    std::vector<double> scratch_;
};

inline HeatKernel heat_kernel(const GraphHandle& g, std::uint64_t t, std::size_t cap = kDefaultExactCap)
{
    HeatKernelStepper s(g, cap);
    for (std::uint64_t i = 0; i < t; ++i) s.step();
    return s.kernel();
}

/// max_{x,y} |n p_t(x,y) - 1| for a regular graph.
inline double uniform_deviation(const HeatKernel& k)
{
    const double n = static_cast<double>(k.n);
    double worst = 0.0;
    for (double v : k.p) worst = std::max(worst, std::abs(n * v - 1.0));
    return worst;
}

/// Smallest t with max_{x,y} |n p_t(x,y) - 1| <= 1/2.
inline std::uint64_t mixing_time(const GraphHandle& g, std::size_t cap = kDefaultExactCap,
                                 std::uint64_t ceiling = 1'000'000)
{
    require(!g.sun() && g.is_regular(), "mixing_time: needs a regular graph without sun");
    HeatKernelStepper s(g, cap);
    while (uniform_deviation(s.kernel()) > 0.5) {
        if (s.kernel().t >= ceiling) throw NoConvergence("mixing_time exceeded ceiling on " + g.family_tag());
        s.step();
    }
    return s.kernel().t;
}

/// Distribution of X_t started from x (exact, by propagation).
inline std::vector<double> distribution_at(const GraphHandle& g, Vertex x, std::uint64_t t,
                                           std::size_t cap = kDefaultExactCap)
{
    detail::check_exact_size(g, cap);
    const std::size_t n = g.vertex_count();
    require(x < n, "distribution_at: vertex out of range");
    std::vector<double> cur(n, 0.0), next(n);
    cur[x] = 1.0;
    for (std::uint64_t i = 0; i < t; ++i) {
        detail::push_forward(g, cur, next);
        cur.swap(next);
    }
    return cur;
}

/// d_TV(p_t(x, .), uniform) on a regular graph.
inline double tv_distance_check(const GraphHandle& g, Vertex x, std::uint64_t t, std::size_t cap = kDefaultExactCap)
{
    require(!g.sun() && g.is_regular(), "tv_distance_check: needs a regular graph without sun");
    const auto dist = distribution_at(g, x, t, cap);
    const double u = 1.0 / static_cast<double>(dist.size());
    double s = 0.0;
    for (double p : dist) s += std::abs(p - u);
    return 0.5 * s;
}

} // namespace ustlab
