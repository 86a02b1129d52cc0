#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "closest_point.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    struct AssignedSample
    {
        Vec3 position;
        double abs_value = 0.0;
        int sign = 1;
        std::size_t node = 0;
    };

    namespace detail
    {
        inline std::uint64_t splitmix64(std::uint64_t x)
        {
            x += 0x9e3779b97f4a7c15ull;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
            return x ^ (x >> 31);
        }

        /// Uniform integer in [0, n) by rejection; identical on every standard library.
        inline std::uint64_t bounded(std::mt19937_64 & rng, std::uint64_t n)
        {
            const std::uint64_t threshold = (0 - n) % n;
            for (;;)
            {
                const std::uint64_t r = rng();
                if (r >= threshold) return r % n;
            }
        }

        inline double unit_uniform(std::mt19937_64 & rng)
        {
            return static_cast<double>(rng() >> 11) * 0x1.0p-53;
        }
    } // namespace detail

    /**
     * Node indices used in one outer iteration: the narrow band (if any),
     * then a uniform subset without replacement when the band exceeds
     * batch_size. Returned in ascending order.
     */
    inline std::vector<std::size_t> select_batch(const SdfGrid & grid, std::size_t batch_size,
                                                 std::optional<double> narrow_band, std::uint64_t seed, int iteration)
    {
        if (batch_size < 1)
            throw PreconditionError("select_batch: batch size must be >= 1");
        std::vector<std::size_t> candidates;
        candidates.reserve(grid.node_count());
        const double band = narrow_band ? *narrow_band * grid.cell_diagonal() : 0.0;
        for (std::size_t n = 0; n < grid.node_count(); ++n)
        {
            if (!narrow_band || std::abs(grid.value(n)) <= band) candidates.push_back(n);
        }
        if (candidates.size() <= batch_size) return candidates;

        std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(iteration))));
        for (std::size_t i = 0; i < batch_size; ++i)
        {
            const std::size_t j = i + detail::bounded(rng, candidates.size() - i);
            std::swap(candidates[i], candidates[j]);
        }
        candidates.resize(batch_size);
        std::ranges::sort(candidates);
        return candidates;
    }

    struct Assignment
    {
        std::vector<std::vector<AssignedSample>> per_cell;
        std::vector<std::size_t> dropped;
        std::size_t assigned = 0;
        double mean_residual = 0.0; // mean of | |s| - d(u, mesh) | over the whole batch
    };

    /// Owner of a closest point: the triangle corner (= cell) carrying the largest barycentric weight.
    inline int owning_vertex(const std::array<int, 3> & tri, const std::array<double, 3> & bary)
    {
        int best = 0;
        for (int c = 1; c < 3; ++c)
        {
            if (bary[c] > bary[best] || (bary[c] == bary[best] && tri[c] < tri[best])) best = c;
        }
        return tri[best];
    }

    enum class Ownership
    {
        Barycentric, // triangle corner with the largest barycentric weight
        Containment, // interesting cell whose box contains the closest point, else Barycentric
    };

    /// Interesting cell whose box contains p, or -1.
    inline int containing_cell(const SdfGrid & grid, const SurfaceTopology & topo, const Vec3 & p)
    {
        const Index3 cd = grid.cell_dims();
        CellId c;
        for (int a = 0; a < 3; ++a)
        {
            const double f = std::floor((p[a] - grid.origin()[a]) / grid.spacing());
            if (!(f >= 0.0 && f < cd[a])) return -1;
            (a == 0 ? c.i : a == 1 ? c.j : c.k) = static_cast<int>(f);
        }
        return topo.cell_index(c);
    }

    /// Per triangle, bit c set when the edge opposite corner c is used by no other triangle.
    inline std::vector<std::uint8_t> open_edge_masks(const TriMesh & m, std::vector<char> & open_vertex)
    {
        std::unordered_map<std::uint64_t, int> uses;
        auto key = [](int a, int b) {
            if (a > b) std::swap(a, b);
            return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
        };
        for (const auto & t : m.triangles)
        {
            for (int c = 0; c < 3; ++c) ++uses[key(t[(c + 1) % 3], t[(c + 2) % 3])];
        }
        std::vector<std::uint8_t> masks(m.triangles.size(), 0);
        open_vertex.assign(m.vertices.size(), 0);
        for (std::size_t i = 0; i < m.triangles.size(); ++i)
        {
            const auto & t = m.triangles[i];
            for (int c = 0; c < 3; ++c)
            {
                const int a = t[(c + 1) % 3], b = t[(c + 2) % 3];
                if (uses[key(a, b)] != 1) continue;
                masks[i] |= static_cast<std::uint8_t>(1u << c);
                open_vertex[a] = open_vertex[b] = 1;
            }
        }
        return masks;
    }

    /**
     * Assigns each batch node to the cell owning its closest point on the
     * global mesh. `global` must index its vertices by interesting-cell
     * index. Nodes farther from the mesh than cell diagonal + |s| are
     * dropped, and so are nodes whose closest point lies on an open
     * boundary of the mesh (where the surface leaves the grid).
     */
    inline Assignment assign_samples(std::span<const std::size_t> batch, const SdfGrid & grid, const TriMesh & global,
                                     const ClosestPointIndex & index, std::size_t num_cells, int threads = 0,
                                     Ownership rule = Ownership::Barycentric, const SurfaceTopology * topo = nullptr)
    {
        if (rule == Ownership::Containment && !topo)
            throw PreconditionError("assign_samples: containment ownership needs the surface topology");
        struct Hit
        {
            int cell;
            double distance;
            bool on_open_boundary;
        };
        std::vector<char> open_vertex;
        const std::vector<std::uint8_t> open_edges = open_edge_masks(global, open_vertex);
        std::vector<Hit> hits(batch.size());
        parallel_for(batch.size(), threads, [&](std::size_t i) {
            const ClosestHit h = index.closest_point(grid.node_position(batch[i]));
            int cell = -1;
            if (rule == Ownership::Containment) cell = containing_cell(grid, *topo, h.point);
            if (cell < 0) cell = owning_vertex(global.triangles[h.triangle], h.barycentric);
            bool open = false;
            int zeros = 0;
            for (int c = 0; c < 3; ++c)
            {
                if (h.barycentric[c] != 0.0) continue;
                ++zeros;
                open = open || (open_edges[h.triangle] >> c & 1u);
            }
            if (zeros == 2)
            {
                for (int c = 0; c < 3; ++c)
                {
                    if (h.barycentric[c] != 0.0) open = open || open_vertex[global.triangles[h.triangle][c]];
                }
            }
            hits[i] = {cell, h.distance(), open};
        });

        Assignment out;
        out.per_cell.resize(num_cells);
        const double diag = grid.cell_diagonal();
        double residual = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i)
        {
            const std::size_t node = batch[i];
            const double s = grid.value(node);
            residual += std::abs(std::abs(s) - hits[i].distance);
            if (hits[i].on_open_boundary || hits[i].distance > diag + std::abs(s))
            {
                out.dropped.push_back(node);
                continue;
            }
            out.per_cell[hits[i].cell].push_back({grid.node_position(node), std::abs(s), s < 0.0 ? -1 : 1, node});
            ++out.assigned;
        }
        out.mean_residual = batch.empty() ? 0.0 : residual / static_cast<double>(batch.size());
        return out;
    }
} // namespace sdfdc
