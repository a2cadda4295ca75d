#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ustlab/errors.hpp"
#include "ustlab/rng.hpp"

namespace ustlab {

using Vertex = std::uint32_t;

// ---------------------------------------------------------------------------
// Graph families
// ---------------------------------------------------------------------------

struct TorusSpec {
    std::uint32_t side = 3;
    std::uint32_t dim = 1;
};

struct HypercubeSpec {
    std::uint32_t dim = 1;
};

/// Random regular graph, the stand-in for transitive expanders. Not
/// vertex transitive.
struct RandomRegularSpec {
    std::uint32_t n = 4;
    std::uint32_t degree = 3;
    std::uint64_t seed = 0;
};

struct CompleteSpec {
    std::uint32_t n = 2;
};

struct FamilySpec;

/// Three graphs hung off the outer vertices of a 3-star.
struct CompositeStarSpec {
    std::vector<FamilySpec> parts;
    std::array<double, 3> masses{1.0 / 3, 1.0 / 3, 1.0 / 3};
};

struct FamilySpec {
    std::variant<TorusSpec, HypercubeSpec, RandomRegularSpec, CompleteSpec, CompositeStarSpec> variant;

    FamilySpec() : variant(CompleteSpec{}) {}
    FamilySpec(TorusSpec s) : variant(s) {}
    FamilySpec(HypercubeSpec s) : variant(s) {}
    FamilySpec(RandomRegularSpec s) : variant(s) {}
    FamilySpec(CompleteSpec s) : variant(s) {}
    FamilySpec(CompositeStarSpec s) : variant(std::move(s)) {}
};

inline FamilySpec torus(std::uint32_t side, std::uint32_t dim) { return TorusSpec{side, dim}; }
inline FamilySpec hypercube(std::uint32_t dim) { return HypercubeSpec{dim}; }
inline FamilySpec complete(std::uint32_t n) { return CompleteSpec{n}; }
inline FamilySpec random_regular(std::uint32_t n, std::uint32_t degree, std::uint64_t seed)
{
    return RandomRegularSpec{n, degree, seed};
}

// ---------------------------------------------------------------------------
// Vertex sets
// ---------------------------------------------------------------------------

/// Membership mask plus insertion-ordered item list over a fixed universe.
class VertexSet {
public:
    VertexSet() = default;
    explicit VertexSet(std::size_t universe) : mask_(universe, 0) {}
    VertexSet(std::size_t universe, std::span<const Vertex> items) : mask_(universe, 0)
    {
        for (Vertex v : items) insert(v);
    }
    VertexSet(std::size_t universe, std::initializer_list<Vertex> items) : mask_(universe, 0)
    {
        for (Vertex v : items) insert(v);
    }

    bool insert(Vertex v)
    {
        if (mask_[v]) return false;
        mask_[v] = 1;
        items_.push_back(v);
        return true;
    }
    void erase(Vertex v)
    {
        if (!mask_[v]) return;
        mask_[v] = 0;
        items_.erase(std::find(items_.begin(), items_.end(), v));
    }
    bool contains(Vertex v) const { return v < mask_.size() && mask_[v] != 0; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    std::size_t universe() const { return mask_.size(); }
    const std::vector<Vertex>& items() const { return items_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    friend VertexSet set_union(const VertexSet& a, const VertexSet& b)
    {
        VertexSet out = a;
        for (Vertex v : b.items_) out.insert(v);
        return out;
    }
    friend VertexSet set_difference(const VertexSet& a, const VertexSet& b)
    {
        VertexSet out(a.universe());
        for (Vertex v : a.items_)
            if (!b.contains(v)) out.insert(v);
        return out;
    }

private:
    std::vector<std::uint8_t> mask_;
    std::vector<Vertex> items_;
};

// ---------------------------------------------------------------------------
// GraphHandle
// ---------------------------------------------------------------------------

/// Sun vertex of the augmented graph: reachable from every base vertex with
/// the same one-step probability.
struct Sun {
    Vertex id;
    double jump_prob;
};

/// Immutable graph with a neighbor oracle and the lazy-walk kernel.
///
/// Torus, hypercube and complete graphs compute neighbors from the vertex
/// index; other families store CSR adjacency. Copies share the adjacency.
class GraphHandle {
public:
    enum class Kind { torus, hypercube, complete, adjacency };

    struct Adjacency {
        std::vector<std::uint64_t> offsets;
        std::vector<Vertex> targets;
    };

    Kind kind() const { return kind_; }
    /// Number of base vertices (ids 0..n-1).
    std::size_t n() const { return n_; }
    /// Base vertices plus the sun, if any.
    std::size_t vertex_count() const { return n_ + (sun_ ? 1 : 0); }
    /// Common degree of a regular base graph; maximum degree otherwise.
    std::uint32_t degree() const { return degree_; }
    bool is_regular() const { return regular_; }
    bool is_transitive() const { return kind_ != Kind::adjacency; }
    const std::optional<Sun>& sun() const { return sun_; }
    const std::string& family_tag() const { return tag_; }

    /// Base-graph degree of v (the sun is not counted).
    std::uint32_t degree(Vertex v) const
    {
        if (kind_ != Kind::adjacency) return degree_;
        return static_cast<std::uint32_t>(adj_->offsets[v + 1] - adj_->offsets[v]);
    }

    /// i-th base neighbor of base vertex v, 0 <= i < degree(v).
    Vertex neighbor(Vertex v, std::uint32_t i) const
    {
        switch (kind_) {
        case Kind::complete:
            return i < v ? i : i + 1;
        case Kind::hypercube:
            return v ^ (Vertex{1} << i);
        case Kind::torus: {
            const std::uint32_t axis = i >> 1;
            const std::uint64_t stride = strides_[axis];
            const auto c = static_cast<std::uint32_t>((v / stride) % side_);
            std::uint32_t c2;
            if ((i & 1) == 0)
                c2 = (c + 1 == side_) ? 0 : c + 1;
            else
                c2 = (c == 0) ? side_ - 1 : c - 1;
            return static_cast<Vertex>(static_cast<std::int64_t>(v) +
                                       (static_cast<std::int64_t>(c2) - static_cast<std::int64_t>(c)) *
                                           static_cast<std::int64_t>(stride));
        }
        case Kind::adjacency:
            return adj_->targets[adj_->offsets[v] + i];
        }
        return v;
    }

    template <class F>
    void for_each_neighbor(Vertex v, F&& f) const
    {
        const std::uint32_t d = degree(v);
        for (std::uint32_t i = 0; i < d; ++i) f(neighbor(v, i));
    }

    bool has_edge(Vertex u, Vertex v) const
    {
        if (u >= n_ || v >= n_) return false;
        bool found = false;
        for_each_neighbor(u, [&](Vertex w) { found = found || w == v; });
        return found;
    }

    /// Base edges as (u, v) pairs with u < v, one entry per parallel copy.
    std::vector<std::pair<Vertex, Vertex>> edges() const
    {
        std::vector<std::pair<Vertex, Vertex>> out;
        for (Vertex u = 0; u < n_; ++u)
            for_each_neighbor(u, [&](Vertex w) {
                if (u < w) out.emplace_back(u, w);
            });
        return out;
    }

    // -- lazy kernel ------------------------------------------------------

    /// Holding probability of the lazy kernel at v.
    double hold_prob(Vertex v) const
    {
        if (sun_ && v != sun_->id) return std::min(0.5, 1.0 - sun_->jump_prob);
        return 0.5;
    }

    /// One step of the lazy walk: hold 1/2, jump to the sun with probability
    /// jump_prob, otherwise a uniform base neighbor.
    Vertex lazy_step(Vertex v, RngStream& rng) const
    {
        if (!sun_) {
            if (rng.next() & 1) return v;
            return neighbor(v, static_cast<std::uint32_t>(rng.below(degree(v))));
        }
        const double u = rng.uniform();
        const double hold = hold_prob(v);
        if (u < hold) return v;
        if (v == sun_->id) return static_cast<Vertex>(rng.below(n_));
        if (u < hold + sun_->jump_prob) return sun_->id;
        return neighbor(v, static_cast<std::uint32_t>(rng.below(degree(v))));
    }

    /// Lazy step on the base graph, ignoring the sun.
    Vertex base_lazy_step(Vertex v, RngStream& rng) const
    {
        if (rng.next() & 1) return v;
        return neighbor(v, static_cast<std::uint32_t>(rng.below(degree(v))));
    }

    /// The lazy kernel conditioned on leaving v. Holds are loops of length
    /// zero for loop erasure, so Wilson's algorithm can skip them.
    Vertex move_step(Vertex v, RngStream& rng) const
    {
        if (!sun_) return neighbor(v, static_cast<std::uint32_t>(rng.below(degree(v))));
        if (v == sun_->id) return static_cast<Vertex>(rng.below(n_));
        const double p_sun = sun_->jump_prob / (1.0 - hold_prob(v));
        if (rng.uniform() < p_sun) return sun_->id;
        return neighbor(v, static_cast<std::uint32_t>(rng.below(degree(v))));
    }

    /// Calls f(target, probability) for every transition of the lazy kernel
    /// out of v, including the hold. Parallel edges produce repeated targets.
    template <class F>
    void for_each_transition(Vertex v, F&& f) const
    {
        const double hold = hold_prob(v);
        f(v, hold);
        if (sun_ && v == sun_->id) {
            const double p = (1.0 - hold) / static_cast<double>(n_);
            for (Vertex w = 0; w < n_; ++w) f(w, p);
            return;
        }
        double rest = 1.0 - hold;
        if (sun_) {
            f(sun_->id, sun_->jump_prob);
            rest -= sun_->jump_prob;
        }
        const std::uint32_t d = degree(v);
        const double p = rest / static_cast<double>(d);
        for (std::uint32_t i = 0; i < d; ++i) f(neighbor(v, i), p);
    }

private:
    friend GraphHandle build(const FamilySpec& spec);
    friend GraphHandle add_sun(const GraphHandle& g, double zeta);
    friend GraphHandle composite_star(const FamilySpec&, const FamilySpec&, const FamilySpec&,
                                      const std::array<double, 3>&);
    friend GraphHandle graph_from_adjacency(std::vector<std::vector<Vertex>> lists, std::string tag);

    Kind kind_ = Kind::complete;
    std::size_t n_ = 0;
    std::uint32_t degree_ = 0;
    bool regular_ = true;
    std::uint32_t side_ = 0;
    std::vector<std::uint64_t> strides_;
    std::shared_ptr<const Adjacency> adj_;
    std::optional<Sun> sun_;
    std::string tag_;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Graph from explicit neighbor lists (symmetry is the caller's contract).
inline GraphHandle graph_from_adjacency(std::vector<std::vector<Vertex>> lists, std::string tag)
{
    GraphHandle g;
    g.kind_ = GraphHandle::Kind::adjacency;
    g.n_ = lists.size();
    auto adj = std::make_shared<GraphHandle::Adjacency>();
    adj->offsets.reserve(lists.size() + 1);
    adj->offsets.push_back(0);
    std::uint32_t dmin = lists.empty() ? 0 : static_cast<std::uint32_t>(lists[0].size());
    std::uint32_t dmax = 0;
    for (auto& l : lists) {
        adj->targets.insert(adj->targets.end(), l.begin(), l.end());
        adj->offsets.push_back(adj->targets.size());
        dmin = std::min(dmin, static_cast<std::uint32_t>(l.size()));
        dmax = std::max(dmax, static_cast<std::uint32_t>(l.size()));
    }
    g.adj_ = std::move(adj);
    g.degree_ = dmax;
    g.regular_ = dmin == dmax;
    g.tag_ = std::move(tag);
    return g;
}

namespace detail {

inline std::vector<std::vector<Vertex>> configuration_model(std::uint32_t n, std::uint32_t deg, RngStream& rng)
{
    // Sequential pairing: draw a random partner among unpaired stubs, reject
    // loops and repeated edges, restart from scratch when stuck.
    const std::size_t stubs = static_cast<std::size_t>(n) * deg;
    for (;;) {
        std::vector<Vertex> pool(stubs);
        for (std::size_t i = 0; i < stubs; ++i) pool[i] = static_cast<Vertex>(i / deg);
        std::vector<std::vector<Vertex>> lists(n);
        bool stuck = false;
        while (!pool.empty() && !stuck) {
            const std::size_t ia = rng.below(pool.size());
            std::swap(pool[ia], pool.back());
            const Vertex a = pool.back();
            pool.pop_back();
            bool paired = false;
            for (int attempt = 0; attempt < 64 && !pool.empty(); ++attempt) {
                const std::size_t ib = rng.below(pool.size());
                const Vertex b = pool[ib];
                if (b == a || std::find(lists[a].begin(), lists[a].end(), b) != lists[a].end()) continue;
                std::swap(pool[ib], pool.back());
                pool.pop_back();
                lists[a].push_back(b);
                lists[b].push_back(a);
                paired = true;
                break;
            }
            stuck = !paired;
        }
        if (!stuck) return lists;
    }
}

inline bool connected(const std::vector<std::vector<Vertex>>& lists)
{
    if (lists.empty()) return true;
    std::vector<std::uint8_t> seen(lists.size(), 0);
    std::vector<Vertex> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const Vertex v = stack.back();
        stack.pop_back();
        for (Vertex w : lists[v])
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
    }
    return count == lists.size();
}

} // namespace detail

inline GraphHandle build(const FamilySpec& spec);

/// Disjoint union of three graphs plus a 4-vertex star; each outer star vertex
/// is joined by one edge to vertex 0 of its sub-graph. The result is not
/// regular: `degree()` reports the maximum degree.
inline GraphHandle composite_star(const FamilySpec& a, const FamilySpec& b, const FamilySpec& c,
                                  const std::array<double, 3>& masses)
{
    double total = 0.0;
    for (double m : masses) {
        if (!(m > 0.0)) throw InvalidFamilyParams("composite_star: every mass must be positive (empty sub-graph)");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidFamilyParams("composite_star: masses must sum to 1");

    const std::array<GraphHandle, 3> parts{build(a), build(b), build(c)};
    std::size_t total_n = 4;
    for (const auto& p : parts) total_n += p.n();
    if (total_n > (std::size_t{1} << 31)) throw InvalidFamilyParams("composite_star: too many vertices");

    std::vector<std::vector<Vertex>> lists(total_n);
    Vertex offset = 0;
    const Vertex center = static_cast<Vertex>(total_n - 4);
    std::string tag = "composite_star(";
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& p = parts[j];
        for (Vertex v = 0; v < p.n(); ++v)
            p.for_each_neighbor(v, [&](Vertex w) { lists[offset + v].push_back(offset + w); });
        const Vertex outer = center + 1 + static_cast<Vertex>(j);
        lists[center].push_back(outer);
        lists[outer].push_back(center);
        lists[outer].push_back(offset);
        lists[offset].push_back(outer);
        tag += p.family_tag() + (j < 2 ? "," : ")");
        offset += static_cast<Vertex>(p.n());
    }
    return graph_from_adjacency(std::move(lists), tag);
}

/// Builds a connected graph of the requested family.
inline GraphHandle build(const FamilySpec& spec)
{
    return std::visit(
        [](const auto& s) -> GraphHandle {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, TorusSpec>) {
                if (s.side < 3) throw InvalidFamilyParams("torus side must be >= 3");
                if (s.dim < 1) throw InvalidFamilyParams("torus dimension must be >= 1");
                const double size = std::pow(static_cast<double>(s.side), static_cast<double>(s.dim));
                if (size > 2147483647.0) throw InvalidFamilyParams("torus too large");
                GraphHandle g;
                g.kind_ = GraphHandle::Kind::torus;
                g.side_ = s.side;
                std::uint64_t stride = 1;
                for (std::uint32_t a = 0; a < s.dim; ++a) {
                    g.strides_.push_back(stride);
                    stride *= s.side;
                }
                g.n_ = stride;
                g.degree_ = 2 * s.dim;
                g.tag_ = "torus(" + std::to_string(s.side) + "," + std::to_string(s.dim) + ")";
                return g;
            } else if constexpr (std::is_same_v<S, HypercubeSpec>) {
                if (s.dim < 1 || s.dim > 30) throw InvalidFamilyParams("hypercube dimension must be in [1, 30]");
                GraphHandle g;
                g.kind_ = GraphHandle::Kind::hypercube;
                g.n_ = std::size_t{1} << s.dim;
                g.degree_ = s.dim;
                g.tag_ = "hypercube(" + std::to_string(s.dim) + ")";
                return g;
            } else if constexpr (std::is_same_v<S, CompleteSpec>) {
                if (s.n < 2) throw InvalidFamilyParams("complete graph needs n >= 2");
                GraphHandle g;
                g.kind_ = GraphHandle::Kind::complete;
                g.n_ = s.n;
                g.degree_ = s.n - 1;
                g.tag_ = "complete(" + std::to_string(s.n) + ")";
                return g;
            } else if constexpr (std::is_same_v<S, RandomRegularSpec>) {
                if (s.n < 2) throw InvalidFamilyParams("random_regular needs n >= 2");
                if ((static_cast<std::uint64_t>(s.n) * s.degree) % 2 != 0)
                    throw InvalidFamilyParams("random_regular needs n*degree even");
                if (s.degree < 2 || s.degree >= s.n)
                    throw InvalidFamilyParams("random_regular needs 2 <= degree < n");
                RngStream rng(s.seed, 0x7265677261706873ULL);
                for (int attempt = 0; attempt < 10000; ++attempt) {
                    auto lists = detail::configuration_model(s.n, s.degree, rng);
                    if (!detail::connected(lists)) continue;
                    return graph_from_adjacency(std::move(lists), "random_regular(" + std::to_string(s.n) + "," +
                                                                      std::to_string(s.degree) + "," +
                                                                      std::to_string(s.seed) + ")");
                }
                throw InvalidFamilyParams("random_regular: no connected sample found");
            } else {
                if (s.parts.size() != 3) throw InvalidFamilyParams("composite_star needs exactly three parts");
                return composite_star(s.parts[0], s.parts[1], s.parts[2], s.masses);
            }
        },
        spec.variant);
}

/// Adds the sun vertex (id n) reachable from every base vertex with
/// per-step probability zeta / sqrt(n).
inline GraphHandle add_sun(const GraphHandle& g, double zeta)
{
    if (g.sun_) throw SunAlreadyPresent(g.tag_);
    if (!(zeta > 0.0)) throw InvalidZeta("zeta must be positive");
    const double jump = zeta / std::sqrt(static_cast<double>(g.n_));
    if (!(jump < 1.0)) throw InvalidZeta("zeta / sqrt(n) must be < 1");
    GraphHandle out = g;
    out.sun_ = Sun{static_cast<Vertex>(g.n_), jump};
    out.tag_ = g.tag_ + "+sun(" + std::to_string(zeta) + ")";
    return out;
}

/// Dirichlet(1/2, 1/2, 1/2) masses, the branch-point split of the CRT.
inline std::array<double, 3> dirichlet_half_masses(RngStream& rng)
{
    std::array<double, 3> g{rng.gamma(0.5), rng.gamma(0.5), rng.gamma(0.5)};
    const double s = g[0] + g[1] + g[2];
    return {g[0] / s, g[1] / s, g[2] / s};
}

/// Torus of dimension d on roughly mass * n vertices: side floor((mass n)^(1/d)).
inline FamilySpec torus_for_mass(double n, std::uint32_t dim, double mass)
{
    const double side = std::floor(std::pow(mass * n, 1.0 / dim) + 1e-9);
    if (side < 3.0) throw InvalidFamilyParams("torus_for_mass: side below 3");
    return TorusSpec{static_cast<std::uint32_t>(side), dim};
}

/// Composite star whose three tori carry the given masses of ~n vertices.
inline GraphHandle composite_star_scaled(double n, std::uint32_t dim, const std::array<double, 3>& masses)
{
    return composite_star(torus_for_mass(n, dim, masses[0]), torus_for_mass(n, dim, masses[1]),
                          torus_for_mass(n, dim, masses[2]), masses);
}

} // namespace ustlab
