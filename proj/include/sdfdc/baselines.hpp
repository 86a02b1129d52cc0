#pragma once

/**
 * Reference reconstructors: marching cubes, and single-shot dual contouring
 * from estimated or exact Hermite data.
 */

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "contour_mesh.hpp"
#include "hermite.hpp"
#include "marching_cubes_tables.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    namespace detail
    {
        inline constexpr int mc_corner_offset[8][3] = {
            {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
        inline constexpr int mc_edge_corners[12][2] = {
            {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    } // namespace detail

    /// Table-driven marching cubes; one shared vertex per crossed grid edge, no ambiguity decider.
    inline TriMesh marching_cubes(const SdfGrid & grid, double isovalue = 0.0)
    {
        TriMesh mesh;
        const Index3 cd = grid.cell_dims();
        std::unordered_map<std::size_t, int> edge_vertex;
        auto level = [&](const Index3 & n) {
            // zero-snapping keeps the vertex set equal to the interesting edges at isovalue 0
            return isovalue == 0.0 ? grid.sign_value(n) : grid.value(n) - isovalue;
        };
        auto vertex_on = [&](const Index3 & na, const Index3 & nb) {
            int axis = 0;
            while (na[axis] == nb[axis]) ++axis;
            const Index3 & base = na[axis] < nb[axis] ? na : nb;
            const EdgeId edge {base, static_cast<Axis>(axis)};
            const std::size_t key = grid.edge_key(edge);
            if (const auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
            Vec3 p;
            if (isovalue == 0.0)
            {
                p = estimate_hermite_point(grid, edge);
            }
            else
            {
                const double sa = level(na), sb = level(nb);
                const double t = sa / (sa - sb);
                p = grid.node_position(na) + t * (grid.node_position(nb) - grid.node_position(na));
            }
            const int id = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(p);
            edge_vertex.emplace(key, id);
            return id;
        };

        for (int k = 0; k < cd[2]; ++k)
        {
            for (int j = 0; j < cd[1]; ++j)
            {
                for (int i = 0; i < cd[0]; ++i)
                {
                    std::array<Index3, 8> nodes;
                    int cube = 0;
                    for (int c = 0; c < 8; ++c)
                    {
                        nodes[c] = {i + detail::mc_corner_offset[c][0], j + detail::mc_corner_offset[c][1],
                                    k + detail::mc_corner_offset[c][2]};
                        if (level(nodes[c]) < 0.0) cube |= 1 << c;
                    }
                    const signed char * row = detail::mc_triangles[cube];
                    for (int t = 0; row[t] != -1; t += 3)
                    {
                        std::array<int, 3> tri;
                        for (int c = 0; c < 3; ++c)
                        {
                            const auto & ec = detail::mc_edge_corners[row[t + c]];
                            tri[c] = vertex_on(nodes[ec[0]], nodes[ec[1]]);
                        }
                        // the table winds toward the negative side; flip to face outward
                        mesh.triangles.push_back({tri[0], tri[2], tri[1]});
                    }
                }
            }
        }
        return mesh;
    }

    /**
     * Minimizer of sum_e (n_e . (x - h_e))^2 with eigen-directions whose
     * weight falls below rel_cutoff * largest resolved toward `centroid`.
     */
    inline Vec3 solve_qef(std::span<const HermitePlane> planes, const Vec3 & centroid, double rel_cutoff)
    {
        Mat3 a = Mat3::Zero();
        Vec3 b = Vec3::Zero();
        for (const HermitePlane & p : planes)
        {
            a.noalias() += p.normal * p.normal.transpose();
            b += p.normal * p.normal.dot(p.point - centroid);
        }
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
        const double top = eig.eigenvalues().maxCoeff();
        Vec3 x = centroid;
        if (!(top > 0.0)) return x;
        for (int i = 0; i < 3; ++i)
        {
            const double lambda = eig.eigenvalues()[i];
            if (lambda <= rel_cutoff * top || lambda <= 0.0) continue;
            const Vec3 v = eig.eigenvectors().col(i);
            x += v * (v.dot(b) / lambda);
        }
        return x;
    }

    /// Classic dual contouring over the given Hermite data (one QEF per interesting cell).
    inline QuadMesh dual_contour(const SdfGrid & grid, const SurfaceTopology & topo, std::span<const HermiteSample> hermite,
                                 double reg = 0.05, int threads = 0)
    {
        if (!(reg >= 0.0))
            throw PreconditionError("dual_contour: regularizer must be >= 0");
        const std::vector<Vec3> centroids = cell_centroids(topo, hermite);
        std::vector<Vec3> vertices(topo.cells.size());
        parallel_for(topo.cells.size(), threads, [&](std::size_t c) {
            std::vector<HermitePlane> planes;
            for (int e : topo.cell_edges[c]) planes.push_back({hermite[e].point, hermite[e].normal});
            vertices[c] = solve_qef(planes, centroids[c], reg);
        });
        return build_global_mesh(grid, topo, vertices);
    }

    inline QuadMesh dc_estimated(const SdfGrid & grid, double reg = 0.05, int threads = 0)
    {
        const SurfaceTopology topo = find_surface_topology(grid);
        if (topo.edges.empty()) return {};
        return dual_contour(grid, topo, estimate_hermite_data(grid, topo), reg, threads);
    }

    struct AnalyticSdf
    {
        std::function<double(const Vec3 &)> value;
        std::function<Vec3(const Vec3 &)> gradient; // optional; central differences when empty

        Vec3 normal(const Vec3 & p) const
        {
            Vec3 g;
            if (gradient)
            {
                g = gradient(p);
            }
            else
            {
                constexpr double h = 1e-6;
                for (int a = 0; a < 3; ++a)
                {
                    Vec3 d = Vec3::Zero();
                    d[a] = h;
                    g[a] = (value(p + d) - value(p - d)) / (2.0 * h);
                }
            }
            const double len = g.norm();
            if (!(len > 1e-12))
                throw DegenerateError("analytic sdf: vanishing gradient");
            return g / len;
        }
    };

    /// Zero crossing of the analytic field on a grid edge by 50 bisection steps.
    inline Vec3 bisect_edge(const AnalyticSdf & sdf, const SdfGrid & grid, const EdgeId & edge, int steps = 50)
    {
        auto [a, b] = grid.edge_endpoints(edge);
        const bool a_in = sdf.value(a) <= 0.0;
        const bool b_in = sdf.value(b) <= 0.0;
        if (a_in == b_in || a_in != (grid.sign_value(edge.base) < 0.0))
            throw ConsistencyError("dc_exact: analytic sdf does not bracket a zero on an interesting edge");
        for (int s = 0; s < steps; ++s)
        {
            const Vec3 m = 0.5 * (a + b);
            if ((sdf.value(m) <= 0.0) == a_in) a = m;
            else b = m;
        }
        return 0.5 * (a + b);
    }

    inline QuadMesh dc_exact(const AnalyticSdf & sdf, const SdfGrid & grid, double reg = 0.05, int threads = 0)
    {
        const SurfaceTopology topo = find_surface_topology(grid);
        if (topo.edges.empty()) return {};
        std::vector<HermiteSample> hermite(topo.edges.size());
        for (std::size_t e = 0; e < topo.edges.size(); ++e)
        {
            const Vec3 p = bisect_edge(sdf, grid, topo.edges[e]);
            hermite[e] = {topo.edges[e], p, sdf.normal(p)};
        }
        return dual_contour(grid, topo, hermite, reg, threads);
    }
} // namespace sdfdc
