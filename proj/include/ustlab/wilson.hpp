#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ustlab/errors.hpp"
#include "ustlab/graphs.hpp"
#include "ustlab/rng.hpp"
#include "ustlab/walks.hpp"

namespace ustlab {

/// Rooted spanning tree stored as a parent map; parent[root] == root.
struct Tree {
    std::vector<Vertex> parent;
    Vertex root = 0;

    std::size_t n() const { return parent.size(); }
    friend bool operator==(const Tree&, const Tree&) = default;
};

/// Checks the tree invariants: one root, acyclic parent pointers reaching
/// the root, and (when g is given) only graph edges.
inline bool is_valid_tree(const Tree& t, const GraphHandle* g = nullptr)
{
    const std::size_t n = t.n();
    if (n == 0 || t.root >= n || t.parent[t.root] != t.root) return false;
    if (g && g->vertex_count() != n) return false;
    // 0 = unknown, 1 = on current chain, 2 = reaches root
    std::vector<std::uint8_t> state(n, 0);
    state[t.root] = 2;
    std::vector<Vertex> chain;
    for (Vertex v = 0; v < n; ++v) {
        Vertex u = v;
        chain.clear();
        while (state[u] == 0) {
            if (t.parent[u] >= n || t.parent[u] == u) return false;
            state[u] = 1;
            chain.push_back(u);
            u = t.parent[u];
        }
        if (state[u] == 1) return false;
        for (Vertex w : chain) state[w] = 2;
    }
    if (g) {
        const auto sun = g->sun();
        for (Vertex v = 0; v < n; ++v) {
            if (v == t.root) continue;
            const Vertex p = t.parent[v];
            const bool sun_edge = sun && (v == sun->id || p == sun->id);
            if (!sun_edge && !g->has_edge(v, p)) return false;
        }
    }
    return true;
}

/// Canonical undirected edge list (u < v), sorted.
inline std::vector<std::pair<Vertex, Vertex>> tree_edges(const Tree& t)
{
    std::vector<std::pair<Vertex, Vertex>> e;
    e.reserve(t.n());
    for (Vertex v = 0; v < t.n(); ++v)
        if (v != t.root) e.emplace_back(std::min(v, t.parent[v]), std::max(v, t.parent[v]));
    std::sort(e.begin(), e.end());
    return e;
}

// ---------------------------------------------------------------------------
// Serialization: header "n root", then one "child parent" line per non-root.
// ---------------------------------------------------------------------------

inline void write_tree(std::ostream& os, const Tree& t)
{
    os << t.n() << ' ' << t.root << '\n';
    for (Vertex v = 0; v < t.n(); ++v)
        if (v != t.root) os << v << ' ' << t.parent[v] << '\n';
}

inline Tree read_tree(std::istream& is)
{
    std::size_t n = 0;
    Vertex root = 0;
    if (!(is >> n >> root)) throw ConfigError("tree: missing 'n root' header");
    if (n == 0 || root >= n) throw ConfigError("tree: bad header");
    Tree t;
    t.root = root;
    t.parent.assign(n, static_cast<Vertex>(n));
    t.parent[root] = root;
    std::uint64_t child = 0;
    std::uint64_t par = 0;
    std::size_t lines = 0;
    while (is >> child >> par) {
        if (child >= n || par >= n || child == root || t.parent[child] != n)
            throw ConfigError("tree: bad or duplicate line " + std::to_string(child) + " " + std::to_string(par));
        t.parent[child] = static_cast<Vertex>(par);
        ++lines;
    }
    if (lines + 1 != n) throw ConfigError("tree: expected n-1 edge lines");
    if (!is_valid_tree(t)) throw ConfigError("tree: parent map is not a tree");
    return t;
}

inline std::string to_string(const Tree& t)
{
    std::ostringstream os;
    write_tree(os, t);
    return os.str();
}

// ---------------------------------------------------------------------------
// Wilson's algorithm
// ---------------------------------------------------------------------------

struct IndexOrder {};
struct RandomOrder {};
/// Order in which Wilson's algorithm starts its branches.
using VertexOrder = std::variant<IndexOrder, RandomOrder, std::vector<Vertex>>;

/// Path between two terminals (or the empty path when the sun intervened).
struct BranchSample {
    std::vector<Vertex> path;
    bool hit_sun = false;
    std::uint64_t raw_steps = 0;
};

/// Wilson sampler with reusable work arrays (next pointer + in-tree flags).
class WilsonSampler {
public:
    /// Samples UST(g) rooted at `root`. Walks use the kernel conditioned on
    /// moving; the erased holds cannot change the tree.
    Tree sample(const GraphHandle& g, Vertex root, RngStream& rng, const VertexOrder& order = IndexOrder{})
    {
        const std::size_t n = g.vertex_count();
        require(root < n, "sample_ust: root out of range");
        prepare(n);
        in_tree_[root] = 1;
        next_[root] = root;
        steps_ = 0;

        auto grow = [&](Vertex start) {
            Vertex u = start;
            while (!in_tree_[u]) {
                next_[u] = g.move_step(u, rng);
                u = next_[u];
                ++steps_;
            }
            u = start;
            while (!in_tree_[u]) {
                in_tree_[u] = 1;
                u = next_[u];
            }
        };

        if (std::holds_alternative<IndexOrder>(order)) {
            for (Vertex v = 0; v < n; ++v) grow(v);
        } else if (std::holds_alternative<RandomOrder>(order)) {
            order_.resize(n);
            for (Vertex v = 0; v < n; ++v) order_[v] = v;
            shuffle(order_, rng);
            for (Vertex v : order_) grow(v);
        } else {
            const auto& fixed = std::get<std::vector<Vertex>>(order);
            for (Vertex v : fixed) {
                require(v < n, "sample_ust: order entry out of range");
                grow(v);
            }
            for (Vertex v = 0; v < n; ++v) grow(v);
        }
        return Tree{std::vector<Vertex>(next_.begin(), next_.begin() + static_cast<std::ptrdiff_t>(n)), root};
    }

    /// Loop-erased walk from u to v: the u-v path of UST(g).
    BranchSample two_point_path(const GraphHandle& g, Vertex u, Vertex v, RngStream& rng)
    {
        const std::size_t n = g.vertex_count();
        require(u < n && v < n && u != v, "two_point_path: need distinct vertices in range");
        prepare(n);
        BranchSample out;
        Vertex cur = u;
        while (cur != v) {
            next_[cur] = g.move_step(cur, rng);
            cur = next_[cur];
            ++out.raw_steps;
        }
        for (cur = u; cur != v; cur = next_[cur]) out.path.push_back(cur);
        out.path.push_back(v);
        return out;
    }

    /// Number of walk moves made by the last sample().
    std::uint64_t last_steps() const { return steps_; }

private:
    void prepare(std::size_t n)
    {
        if (next_.size() < n) {
            next_.resize(n);
            in_tree_.resize(n);
        }
        std::fill(in_tree_.begin(), in_tree_.begin() + static_cast<std::ptrdiff_t>(n), 0);
    }

    std::vector<Vertex> next_;
    std::vector<std::uint8_t> in_tree_;
    std::vector<Vertex> order_;
    std::uint64_t steps_ = 0;
};

inline Tree sample_ust(const GraphHandle& g, Vertex root, RngStream& rng, const VertexOrder& order = IndexOrder{})
{
    WilsonSampler s;
    return s.sample(g, root, rng, order);
}

inline BranchSample two_point_path(const GraphHandle& g, Vertex u, Vertex v, RngStream& rng)
{
    WilsonSampler s;
    return s.two_point_path(g, u, v, rng);
}

/// Loop-erased lazy walk from x stopped on hitting `target`, with its
/// lambda-times.
inline ErasedWalk branch_to_set(const GraphHandle& g, Vertex x, const VertexSet& target, RngStream& rng)
{
    require(!target.empty(), "branch_to_set: empty target");
    return loop_erase(lazy_walk(g, x, StopRule::hit(target), rng));
}

/// Coupled u-v path on the sunny graph, sampled without building the tree:
/// X runs T-1 lazy steps from u, X' runs from v until T' steps or until it
/// meets LE(X), T and T' independent geometrics of mean 1/jump_prob. The
/// result is the u-v path in LE(X) + LE(X'), or hit_sun when X' was killed
/// first.
inline BranchSample sunny_branch(const GraphHandle& g, Vertex u, Vertex v, RngStream& rng)
{
    require(g.sun().has_value(), "sunny_branch: graph has no sun");
    require(u < g.n() && v < g.n(), "sunny_branch: terminals must be base vertices");
    const double mean = 1.0 / g.sun()->jump_prob;
    BranchSample out;

    // X: T - 1 steps from u.
    const std::uint64_t t1 = rng.geometric(mean) - 1;
    std::vector<Vertex> x{u};
    x.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(t1, 1u << 24)) + 1);
    Vertex cur = u;
    for (std::uint64_t s = 0; s < t1; ++s) {
        cur = g.base_lazy_step(cur, rng);
        x.push_back(cur);
    }
    out.raw_steps += t1;
    const ErasedWalk le = loop_erase(x);

    std::unordered_map<Vertex, std::size_t> index_on_le;
    index_on_le.reserve(le.erased.size() * 2);
    for (std::size_t i = 0; i < le.erased.size(); ++i) index_on_le.emplace(le.erased[i], i);

    // X': from v, at most T' steps, stopped on hitting LE(X).
    const std::uint64_t t2 = rng.geometric(mean);
    std::vector<Vertex> xp{v};
    cur = v;
    std::uint64_t steps = 0;
    auto hit = index_on_le.find(cur);
    while (hit == index_on_le.end() && steps < t2) {
        cur = g.base_lazy_step(cur, rng);
        xp.push_back(cur);
        ++steps;
        hit = index_on_le.find(cur);
    }
    out.raw_steps += steps;
    if (hit == index_on_le.end()) {
        out.hit_sun = true;
        return out;
    }
    const ErasedWalk lep = loop_erase(xp); // ends at the meeting vertex
    const std::size_t meet = hit->second;
    out.path.assign(le.erased.begin(), le.erased.begin() + static_cast<std::ptrdiff_t>(meet) + 1);
    // LE(X') runs v -> meeting vertex; append it reversed, skipping the meeting vertex.
    for (std::size_t i = lep.erased.size() - 1; i-- > 0;) out.path.push_back(lep.erased[i]);
    return out;
}

} // namespace ustlab
