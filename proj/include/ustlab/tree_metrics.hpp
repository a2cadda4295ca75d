#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ustlab/errors.hpp"
#include "ustlab/rng.hpp"
#include "ustlab/wilson.hpp"

namespace ustlab {

/// Undirected CSR adjacency of a Tree, for metric queries.
class TreeGraph {
public:
    explicit TreeGraph(const Tree& t) : n_(t.n())
    {
        std::vector<std::uint32_t> deg(n_, 0);
        for (Vertex v = 0; v < n_; ++v)
            if (v != t.root) {
                ++deg[v];
                ++deg[t.parent[v]];
            }
        offsets_.assign(n_ + 1, 0);
        for (std::size_t v = 0; v < n_; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
        targets_.resize(offsets_[n_]);
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (Vertex v = 0; v < n_; ++v)
            if (v != t.root) {
                const Vertex p = t.parent[v];
                targets_[fill[v]++] = p;
                targets_[fill[p]++] = v;
            }
    }

    std::size_t n() const { return n_; }
    std::span<const Vertex> neighbors(Vertex v) const
    {
        return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t degree(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }

private:
    std::size_t n_;
    std::vector<std::size_t> offsets_;
    std::vector<Vertex> targets_;
};

/// Tree distances from v to every vertex (BFS).
inline std::vector<std::int32_t> distances_from(const TreeGraph& t, Vertex v)
{
    std::vector<std::int32_t> dist(t.n(), -1);
    std::vector<Vertex> queue;
    queue.reserve(t.n());
    queue.push_back(v);
    dist[v] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const Vertex u = queue[head];
        for (Vertex w : t.neighbors(u))
            if (dist[w] < 0) {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
    }
    return dist;
}

/// Longest path from v.
inline std::int32_t height(const TreeGraph& t, Vertex v)
{
    const auto d = distances_from(t, v);
    return *std::max_element(d.begin(), d.end());
}

/// Exact diameter by double sweep (exact on trees).
inline std::int32_t diameter(const TreeGraph& t)
{
    const auto d0 = distances_from(t, 0);
    const auto far = static_cast<Vertex>(std::max_element(d0.begin(), d0.end()) - d0.begin());
    return height(t, far);
}

/// |{u : d(v, u) <= r}|, by BFS truncated at radius r.
inline std::size_t ball_volume(const TreeGraph& t, Vertex v, std::int64_t r)
{
    require(r >= 0, "ball_volume: negative radius");
    std::vector<Vertex> queue{v};
    std::vector<std::int32_t> depth{0};
    // Trees: track the BFS parent instead of a visited array.
    std::vector<Vertex> from{v};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        if (depth[head] >= r) continue;
        const Vertex u = queue[head];
        for (Vertex w : t.neighbors(u))
            if (head == 0 || w != from[head]) {
                queue.push_back(w);
                depth.push_back(depth[head] + 1);
                from.push_back(u);
            }
    }
    return queue.size();
}

/// Ball volumes |B(v, r)| for every vertex, by centroid decomposition in
/// O(n log n).
inline std::vector<std::size_t> all_ball_volumes(const TreeGraph& t, std::int64_t r)
{
    require(r >= 0, "all_ball_volumes: negative radius");
    const std::size_t n = t.n();
    std::vector<std::size_t> vol(n, 0);
    std::vector<std::uint8_t> removed(n, 0);
    std::vector<std::uint32_t> sub(n, 0);
    std::vector<Vertex> par(n, 0);
    std::vector<Vertex> order;
    std::vector<std::int32_t> depth(n, 0);
    std::vector<std::size_t> all_count;
    std::vector<std::size_t> branch_count;
    std::vector<Vertex> pending{0};
    std::vector<Vertex> bfs;
    std::vector<Vertex> branch_members;

    auto prefix = [](std::vector<std::size_t>& c, std::int64_t q) -> std::size_t {
        if (q < 0) return 0;
        const auto idx = static_cast<std::size_t>(std::min<std::int64_t>(q, static_cast<std::int64_t>(c.size()) - 1));
        return c[idx];
    };

    while (!pending.empty()) {
        const Vertex start = pending.back();
        pending.pop_back();

        // Subtree sizes of the current component, rooted at start.
        order.clear();
        order.push_back(start);
        par[start] = start;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const Vertex u = order[i];
            for (Vertex w : t.neighbors(u))
                if (!removed[w] && w != par[u]) {
                    par[w] = u;
                    order.push_back(w);
                }
        }
        const std::size_t total = order.size();
        for (std::size_t i = total; i-- > 0;) {
            const Vertex u = order[i];
            sub[u] = 1;
            for (Vertex w : t.neighbors(u))
                if (!removed[w] && w != par[u]) sub[u] += sub[w];
        }
        Vertex centroid = start;
        for (Vertex u : order) {
            std::size_t biggest = total - sub[u];
            for (Vertex w : t.neighbors(u))
                if (!removed[w] && w != par[u]) biggest = std::max<std::size_t>(biggest, sub[w]);
            if (2 * biggest <= total) {
                centroid = u;
                break;
            }
        }

        // Depth counts over the whole component, seen from the centroid.
        all_count.assign(1, 1);
        depth[centroid] = 0;
        struct Branch {
            std::size_t begin, end;
        };
        std::vector<Branch> branches;
        branch_members.clear();
        for (Vertex b : t.neighbors(centroid)) {
            if (removed[b]) continue;
            const std::size_t begin = branch_members.size();
            branch_members.push_back(b);
            par[b] = centroid;
            depth[b] = 1;
            for (std::size_t i = begin; i < branch_members.size(); ++i) {
                const Vertex u = branch_members[i];
                if (static_cast<std::size_t>(depth[u]) >= all_count.size()) all_count.resize(depth[u] + 1, 0);
                ++all_count[depth[u]];
                for (Vertex w : t.neighbors(u))
                    if (!removed[w] && w != par[u]) {
                        par[w] = u;
                        depth[w] = depth[u] + 1;
                        branch_members.push_back(w);
                    }
            }
            branches.push_back({begin, branch_members.size()});
        }
        for (std::size_t d = 1; d < all_count.size(); ++d) all_count[d] += all_count[d - 1];

        vol[centroid] += prefix(all_count, r);
        for (const auto& br : branches) {
            // BFS order: the last member has the largest depth.
            const auto max_depth = static_cast<std::size_t>(depth[branch_members[br.end - 1]]);
            branch_count.assign(max_depth + 1, 0);
            for (std::size_t i = br.begin; i < br.end; ++i) ++branch_count[depth[branch_members[i]]];
            for (std::size_t d = 1; d < branch_count.size(); ++d) branch_count[d] += branch_count[d - 1];
            for (std::size_t i = br.begin; i < br.end; ++i) {
                const Vertex u = branch_members[i];
                const std::int64_t q = r - depth[u];
                vol[u] += prefix(all_count, q) - prefix(branch_count, q);
            }
        }

        removed[centroid] = 1;
        for (Vertex b : t.neighbors(centroid))
            if (!removed[b]) pending.push_back(b);
    }
    return vol;
}

/// Lower-mass statistic max_v n / |B(v, floor(c sqrt n))|.
struct LowerMassReport {
    double c = 0.0;
    std::int64_t radius = 0;
    double stat = 1.0;
    std::size_t min_volume = 0;
    Vertex argmin = 0;
};

inline LowerMassReport lower_mass(const TreeGraph& t, double c)
{
    require(c > 0.0, "lower_mass: c must be positive");
    LowerMassReport rep;
    rep.c = c;
    rep.radius = static_cast<std::int64_t>(std::floor(c * std::sqrt(static_cast<double>(t.n()))));
    const auto vol = all_ball_volumes(t, rep.radius);
    const auto it = std::min_element(vol.begin(), vol.end());
    rep.min_volume = *it;
    rep.argmin = static_cast<Vertex>(it - vol.begin());
    rep.stat = static_cast<double>(t.n()) / static_cast<double>(rep.min_volume);
    return rep;
}

/// Pairwise distances between m sampled points, divided by `scale`.
struct DistanceMatrixSample {
    std::size_t m = 0;
    std::vector<double> distances; // (0,1), (0,2), ..., (0,m-1), (1,2), ...
    double scale = 1.0;

    static std::size_t index(std::size_t m, std::size_t i, std::size_t j)
    {
        if (i > j) std::swap(i, j);
        return i * m - i * (i + 1) / 2 + (j - i - 1);
    }
    double at(std::size_t i, std::size_t j) const { return i == j ? 0.0 : distances[index(m, i, j)]; }
};

/// Largest violation of the triangle inequality and of the four-point
/// condition (the two largest of the three pair sums must agree).
inline double tree_metric_defect(const DistanceMatrixSample& s)
{
    double worst = 0.0;
    const std::size_t m = s.m;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k) {
                worst = std::max(worst, s.at(i, j) - s.at(i, k) - s.at(k, j));
                for (std::size_t l = 0; l < m; ++l) {
                    double sums[3] = {s.at(i, j) + s.at(k, l), s.at(i, k) + s.at(j, l), s.at(i, l) + s.at(j, k)};
                    std::sort(sums, sums + 3);
                    worst = std::max(worst, sums[2] - sums[1]);
                }
            }
    return worst;
}

/// m i.i.d. uniform vertices and their tree distances over `scale`.
inline DistanceMatrixSample fdd_sample(const TreeGraph& t, std::size_t m, double scale, RngStream& rng)
{
    require(m >= 2, "fdd_sample: m must be >= 2");
    require(scale > 0.0, "fdd_sample: scale must be positive");
    std::vector<Vertex> pts(m);
    for (auto& p : pts) p = static_cast<Vertex>(rng.below(t.n()));
    DistanceMatrixSample out;
    out.m = m;
    out.scale = scale;
    out.distances.resize(m * (m - 1) / 2);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto d = distances_from(t, pts[i]);
        for (std::size_t j = i + 1; j < m; ++j)
            out.distances[DistanceMatrixSample::index(m, i, j)] = static_cast<double>(d[pts[j]]) / scale;
    }
    return out;
}

/// Rescaled distance-from-start of a simple random walk on a tree, recorded
/// on a grid of rescaled times.
struct SrwTrajectory {
    std::vector<double> times;
    std::vector<double> distances;
    std::uint64_t steps = 0;
};

/// Runs ceil(time_scale * horizon) SRW steps; grid point j sits at rescaled
/// time j * horizon / grid_points.
inline SrwTrajectory srw_on_tree(const TreeGraph& t, Vertex start, double horizon, double time_scale,
                                 double space_scale, RngStream& rng, std::size_t grid_points = 100)
{
    require(horizon >= 0.0 && time_scale > 0.0 && space_scale > 0.0, "srw_on_tree: bad scales");
    require(grid_points >= 1, "srw_on_tree: need at least one grid interval");
    const auto dist = distances_from(t, start);
    SrwTrajectory out;
    out.steps = static_cast<std::uint64_t>(std::ceil(time_scale * horizon));
    Vertex cur = start;
    std::uint64_t done = 0;
    for (std::size_t j = 0; j <= grid_points; ++j) {
        const double tj = horizon * static_cast<double>(j) / static_cast<double>(grid_points);
        const auto target = j == grid_points
                                ? out.steps
                                : std::min(out.steps, static_cast<std::uint64_t>(std::floor(time_scale * tj)));
        for (; done < target; ++done) {
            const auto nb = t.neighbors(cur);
            if (nb.empty()) continue;
            cur = nb[rng.below(nb.size())];
        }
        out.times.push_back(tj);
        out.distances.push_back(static_cast<double>(dist[cur]) / space_scale);
    }
    return out;
}

/// H(r) = number of vertices at distance r from root.
inline std::vector<std::size_t> height_profile(const TreeGraph& t, Vertex root)
{
    const auto d = distances_from(t, root);
    std::vector<std::size_t> h(static_cast<std::size_t>(*std::max_element(d.begin(), d.end())) + 1, 0);
    for (auto x : d) ++h[static_cast<std::size_t>(x)];
    return h;
}

} // namespace ustlab
