#pragma once

/**
 * Global quad mesh assembly and the per-cell local meshes used by the
 * vertex optimizer.
 *
 * A local mesh is a triangle fan around the cell vertex x (always vertex 0).
 * For every interesting edge of the cell it holds up to two triangles
 * joining x, the edge's Hermite point and the points where the global
 * mesh's quad edges leaving x cross the neighbouring cells' shared faces.
 */

#include <array>
#include <span>
#include <vector>

#include "hermite.hpp"
#include "mesh.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    /// One quad per interior interesting edge, counterclockwise as seen from the positive endpoint.
    inline QuadMesh build_global_mesh(const SdfGrid & grid, const SurfaceTopology & topo, std::span<const Vec3> cell_vertices)
    {
        if (cell_vertices.size() != topo.cells.size())
            throw ConsistencyError("build_global_mesh: " + std::to_string(topo.cells.size()) + " interesting cells but " +
                                   std::to_string(cell_vertices.size()) + " vertices");
        QuadMesh m;
        m.vertices.assign(cell_vertices.begin(), cell_vertices.end());
        for (std::size_t e = 0; e < topo.edges.size(); ++e)
        {
            if (!topo.is_interior(static_cast<int>(e))) continue;
            const auto & r = topo.edge_rings[e];
            if (grid.sign_value(topo.edges[e].tip()) > 0.0)
                m.quads.push_back({r[0], r[1], r[2], r[3]});
            else
                m.quads.push_back({r[0], r[3], r[2], r[1]});
            m.quad_edges.push_back(topo.edges[e]);
        }
        return m;
    }

    struct FaceIntersection
    {
        Vec3 point;
        int edge = -1;          // index into SurfaceTopology::edges (the relevant Hermite point's edge)
        CellId cell;
        bool quad_forward = true; // crossing toward the next vertex of the quad's winding
    };

    namespace detail
    {
        /// Crossing of segment (xi, xj) with the face plane shared by two face-adjacent cells.
        inline Vec3 shared_face_crossing(const SdfGrid & grid, const CellId & ci, const CellId & cj, const Vec3 & xi,
                                         const Vec3 & xj)
        {
            int axis = 0;
            while (axis < 2 && ci[axis] == cj[axis]) ++axis;
            const double plane = grid.origin()[axis] + grid.spacing() * std::max(ci[axis], cj[axis]);
            const double fi = xi[axis] - plane;
            const double fj = xj[axis] - plane;
            Vec3 p;
            if (fi * fj <= 0.0 && fi != fj)
            {
                const double t = fi / (fi - fj);
                p = xi + t * (xj - xi);
            }
            else
            {
                // both ends on one side: the vertex left its cell
                p = 0.5 * (xi + xj);
            }
            p[axis] = plane;
            return p;
        }
    } // namespace detail

    /// Face intersection points spawned by every interesting edge of `cell` (two per interior edge).
    inline std::vector<FaceIntersection> compute_face_intersections(const SdfGrid & grid, const SurfaceTopology & topo,
                                                                    int cell, std::span<const Vec3> cell_vertices)
    {
        std::vector<FaceIntersection> out;
        const CellId & ci = topo.cells[cell];
        for (int e : topo.cell_edges[cell])
        {
            const auto & ring = topo.edge_rings[e];
            int m = 0;
            while (ring[m] != cell) ++m;
            const bool ring_is_quad_order = grid.sign_value(topo.edges[e].tip()) > 0.0;
            for (int step : {1, 3})
            {
                const int nb = ring[(m + step) % 4];
                if (nb < 0) continue;
                const Vec3 p = detail::shared_face_crossing(grid, ci, topo.cells[nb], cell_vertices[cell], cell_vertices[nb]);
                out.push_back({p, e, ci, (step == 1) == ring_is_quad_order});
            }
        }
        return out;
    }

    /// The x-independent part of a local mesh: each triangle is (x, tail[0], tail[1]).
    struct LocalFrame
    {
        std::vector<std::array<Vec3, 2>> tails;
    };

    inline LocalFrame make_local_frame(std::span<const FaceIntersection> fis, std::span<const HermiteSample> hermite)
    {
        LocalFrame frame;
        std::size_t i = 0;
        while (i < fis.size())
        {
            const int e = fis[i].edge;
            const FaceIntersection * forward = nullptr;
            const FaceIntersection * backward = nullptr;
            for (; i < fis.size() && fis[i].edge == e; ++i)
            {
                (fis[i].quad_forward ? forward : backward) = &fis[i];
            }
            const Vec3 & h = hermite[e].point;
            if (forward) frame.tails.push_back({forward->point, h});
            if (backward) frame.tails.push_back({h, backward->point});
        }
        return frame;
    }

    inline TriMesh build_local_mesh(const Vec3 & x, const LocalFrame & frame)
    {
        TriMesh m;
        m.vertices.reserve(1 + 2 * frame.tails.size());
        m.vertices.push_back(x);
        for (const auto & [a, b] : frame.tails)
        {
            const int ia = static_cast<int>(m.vertices.size());
            m.vertices.push_back(a);
            m.vertices.push_back(b);
            m.triangles.push_back({0, ia, ia + 1});
        }
        return m;
    }

    /// Local mesh for a cell vertex x from its face intersections (grouped by edge) and the Hermite data.
    inline TriMesh build_local_mesh(const Vec3 & x, std::span<const FaceIntersection> fis, std::span<const HermiteSample> hermite)
    {
        return build_local_mesh(x, make_local_frame(fis, hermite));
    }
} // namespace sdfdc
