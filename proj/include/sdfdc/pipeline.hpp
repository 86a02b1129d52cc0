#pragma once

/**
 * Iterative dual contouring of sampled signed distances.
 *
 * Basic usage:
 * @code
 *   sdfdc::SdfGrid grid = sdfdc::load_grid("shape.sdfg");
 *   sdfdc::ReconstructionConfig config;
 *   config.seed = 7;
 *   sdfdc::QuadMesh mesh = sdfdc::reconstruct(grid, config);
 *   sdfdc::save_obj(mesh, "shape.obj");
 * @endcode
 */

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cell_optimizer.hpp"
#include "closest_point.hpp"
#include "contour_mesh.hpp"
#include "hermite.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "sample_assignment.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    struct ReconstructionConfig
    {
        double w_hermite = 0.02;          // Hermite energy weight
        double update_weight = 0.2;       // Hermite update blend, in [0, 1]
        double mu = 0.1;                  // proximal weight of each inner step
        std::optional<double> tolerance;  // inner/outer step threshold; default 1e-4 * spacing
        int max_outer = 100;
        int max_inner = 100;
        std::size_t batch_size = 200000;
        std::optional<double> narrow_band; // in cell diagonals
        std::uint64_t seed = 0;
        bool normalize_hermite_by_count = true; // distance energy averaged over the cell's samples
        bool pseudo_sdf_interior = false;  // ignore negative samples in the distance energy
        bool early_exit = true;
        Ownership ownership = Ownership::Barycentric;
        int threads = 0;                   // 0 = all cores

        void validate() const
        {
            if (!(w_hermite >= 0.0) || !(mu > 0.0))
                throw PreconditionError("config: w_hermite must be >= 0 and mu > 0");
            if (!(update_weight >= 0.0 && update_weight <= 1.0))
                throw PreconditionError("config: update weight must lie in [0, 1]");
            if (max_outer < 0 || max_inner < 1)
                throw PreconditionError("config: iteration caps out of range");
            if (batch_size < 1)
                throw PreconditionError("config: batch size must be >= 1");
            if (tolerance && !(*tolerance >= 0.0))
                throw PreconditionError("config: tolerance must be >= 0");
            if (narrow_band && !(*narrow_band > 0.0))
                throw PreconditionError("config: narrow band must be positive");
            if (threads < 0)
                throw PreconditionError("config: threads must be >= 0");
        }

        double resolved_tolerance(const SdfGrid & grid) const
        {
            return tolerance ? *tolerance : 1e-4 * grid.spacing();
        }
    };

    struct ReconstructionState
    {
        SurfaceTopology topology;
        std::vector<HermiteSample> hermite; // aligned with topology.edges
        std::vector<Vec3> vertices;         // aligned with topology.cells
    };

    struct IterationStats
    {
        int iteration = 0;
        double mean_residual = 0.0;
        double hermite_delta = 0.0;
        double converged_fraction = 0.0;
        double seconds = 0.0;
        std::size_t assigned_samples = 0;
        double max_displacement = 0.0;
    };

    struct ReconstructionResult
    {
        QuadMesh mesh;
        std::vector<IterationStats> trace;
    };

    /// Estimated Hermite data for every interesting edge.
    inline std::vector<HermiteSample> estimate_hermite_data(const SdfGrid & grid, const SurfaceTopology & topo)
    {
        std::vector<HermiteSample> hermite(topo.edges.size());
        std::vector<CellId> incident;
        for (std::size_t e = 0; e < topo.edges.size(); ++e)
        {
            const EdgeId & edge = topo.edges[e];
            const Vec3 h = estimate_hermite_point(grid, edge);
            incident.clear();
            for (int c : topo.incident_cells(static_cast<int>(e))) incident.push_back(topo.cells[c]);
            Vec3 n;
            try
            {
                n = estimate_hermite_normal(grid, edge, h, incident);
            }
            catch (const DegenerateError &)
            {
                n = fallback_hermite_normal(grid, edge, h);
            }
            hermite[e] = {edge, h, n};
        }
        return hermite;
    }

    /// Mean of the Hermite points on each cell's interesting edges.
    inline std::vector<Vec3> cell_centroids(const SurfaceTopology & topo, std::span<const HermiteSample> hermite)
    {
        std::vector<Vec3> out(topo.cells.size(), Vec3::Zero());
        for (std::size_t c = 0; c < topo.cells.size(); ++c)
        {
            for (int e : topo.cell_edges[c]) out[c] += hermite[e].point;
            out[c] /= static_cast<double>(topo.cell_edges[c].size());
        }
        return out;
    }

    inline ReconstructionState initialize(const SdfGrid & grid)
    {
        ReconstructionState state;
        state.topology = find_surface_topology(grid);
        if (state.topology.edges.empty())
            throw EmptySurfaceError("grid has no sign change; nothing to reconstruct");
        state.hermite = estimate_hermite_data(grid, state.topology);
        state.vertices = cell_centroids(state.topology, state.hermite);
        return state;
    }

    /**
     * One outer iteration: global mesh, sample assignment, per-cell inner
     * loops and (unless `update_hermite_data` is false) the Hermite update.
     */
    inline IterationStats run_outer_iteration(const SdfGrid & grid, const ReconstructionConfig & config,
                                              ReconstructionState & state, int iteration, bool update_hermite_data = true)
    {
        const auto t0 = std::chrono::steady_clock::now();
        const SurfaceTopology & topo = state.topology;
        const std::size_t num_cells = topo.cells.size();
        IterationStats stats;
        stats.iteration = iteration;

        const QuadMesh global = build_global_mesh(grid, topo, state.vertices);
        std::vector<std::vector<AssignedSample>> samples(num_cells);
        if (!global.empty())
        {
            const TriMesh tris = triangulate_quads(global);
            const ClosestPointIndex index(tris);
            const auto batch = select_batch(grid, config.batch_size, config.narrow_band, config.seed, iteration);
            Assignment assignment = assign_samples(batch, grid, tris, index, num_cells, config.threads, config.ownership, &topo);
            stats.mean_residual = assignment.mean_residual;
            samples = std::move(assignment.per_cell);
            if (config.pseudo_sdf_interior)
            {
                for (auto & list : samples)
                {
                    std::erase_if(list, [](const AssignedSample & s) { return s.sign < 0; });
                }
            }
            for (const auto & list : samples) stats.assigned_samples += list.size();
        }

        InnerOptions inner;
        inner.w_hermite = config.w_hermite;
        inner.mu = config.mu;
        inner.tolerance = config.resolved_tolerance(grid);
        inner.max_iterations = config.max_inner;

        std::vector<Vec3> next(num_cells);
        std::vector<char> converged(num_cells, 0);
        parallel_for(num_cells, config.threads, [&](std::size_t c) {
            const auto fis = compute_face_intersections(grid, topo, static_cast<int>(c), state.vertices);
            const LocalFrame frame = make_local_frame(fis, state.hermite);
            std::vector<HermitePlane> planes;
            planes.reserve(topo.cell_edges[c].size());
            for (int e : topo.cell_edges[c]) planes.push_back({state.hermite[e].point, state.hermite[e].normal});
            InnerOptions opts = inner;
            if (config.normalize_hermite_by_count && !samples[c].empty())
                opts.distance_weight = 1.0 / static_cast<double>(samples[c].size());
            const InnerResult r = optimize_cell(frame, state.vertices[c], samples[c], planes, opts);
            next[c] = r.x;
            converged[c] = r.converged ? 1 : 0;
        });

        std::size_t converged_count = 0;
        for (std::size_t c = 0; c < num_cells; ++c)
        {
            stats.max_displacement = std::max(stats.max_displacement, (next[c] - state.vertices[c]).norm());
            converged_count += converged[c];
        }
        stats.converged_fraction = num_cells ? static_cast<double>(converged_count) / static_cast<double>(num_cells) : 1.0;
        state.vertices = std::move(next);

        if (update_hermite_data)
        {
            std::vector<double> delta(topo.edges.size(), 0.0);
            parallel_for(topo.edges.size(), config.threads, [&](std::size_t e) {
                std::array<Vec3, 4> pts;
                int n = 0;
                for (int c : topo.edge_rings[e])
                {
                    if (c >= 0) pts[n++] = state.vertices[c];
                }
                const auto [a, b] = grid.edge_endpoints(topo.edges[e]);
                const HermiteSample updated =
                    update_hermite(state.hermite[e], a, b, std::span<const Vec3>(pts.data(), n), config.update_weight);
                delta[e] = (updated.point - state.hermite[e].point).norm();
                state.hermite[e] = updated;
            });
            double sum = 0.0;
            for (double d : delta)
            {
                sum += d;
                stats.max_displacement = std::max(stats.max_displacement, d);
            }
            stats.hermite_delta = delta.empty() ? 0.0 : sum / static_cast<double>(delta.size());
        }

        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return stats;
    }

    inline ReconstructionResult reconstruct_with_trace(const SdfGrid & grid, const ReconstructionConfig & config)
    {
        config.validate();
        ReconstructionState state = initialize(grid);
        ReconstructionResult result;
        const double tol = config.resolved_tolerance(grid);
        for (int k = 0; k < config.max_outer; ++k)
        {
            const bool last = k + 1 == config.max_outer;
            result.trace.push_back(run_outer_iteration(grid, config, state, k, !last));
            if (config.early_exit && result.trace.back().max_displacement < tol) break;
        }
        result.mesh = build_global_mesh(grid, state.topology, state.vertices);
        return result;
    }

    inline QuadMesh reconstruct(const SdfGrid & grid, const ReconstructionConfig & config)
    {
        return reconstruct_with_trace(grid, config).mesh;
    }
} // namespace sdfdc
