#pragma once

/**
 * Hermite data (edge point + surface normal) estimated from grid values and
 * refined from the current cell vertices.
 */

#include <cmath>
#include <span>

#include <Eigen/Eigenvalues>

#include "sdf_grid.hpp"
#include "types.hpp"

namespace sdfdc
{
    struct HermiteSample
    {
        EdgeId edge;
        Vec3 point = Vec3::Zero();
        Vec3 normal = Vec3::UnitX();
    };

    /// Root of the linear interpolant of the two endpoint values along the edge.
    inline Vec3 estimate_hermite_point(const SdfGrid & grid, const EdgeId & edge)
    {
        if (!grid.valid_edge(edge) || !is_interesting(grid, edge))
            throw PreconditionError("estimate_hermite_point: edge has no sign change");
        const double sa = std::abs(grid.sign_value(edge.base));
        const double sb = std::abs(grid.sign_value(edge.tip()));
        const double t = sa / (sa + sb);
        const auto [ua, ub] = grid.edge_endpoints(edge);
        return (1.0 - t) * ua + t * ub;
    }

    /// Normalized sum of the trilinear gradients of every incident cell, evaluated at h.
    inline Vec3 estimate_hermite_normal(const SdfGrid & grid, const EdgeId & /*edge*/, const Vec3 & h,
                                        std::span<const CellId> incident_cells)
    {
        if (incident_cells.empty())
            throw PreconditionError("estimate_hermite_normal: no incident cells");
        Vec3 sum = Vec3::Zero();
        for (const CellId & c : incident_cells)
        {
            sum += trilinear_gradient(grid, c, h);
        }
        const double len = sum.norm();
        if (len < 1e-12)
            throw DegenerateError("estimate_hermite_normal: vanishing gradient on edge");
        return sum / len;
    }

    /// Central-difference gradient at the edge node nearest to h (one-sided on the grid border).
    inline Vec3 fallback_hermite_normal(const SdfGrid & grid, const EdgeId & edge, const Vec3 & h)
    {
        const auto [ua, ub] = grid.edge_endpoints(edge);
        const Index3 node = (h - ua).squaredNorm() <= (h - ub).squaredNorm() ? edge.base : edge.tip();
        Vec3 g;
        for (int a = 0; a < 3; ++a)
        {
            Index3 lo = node, hi = node;
            if (lo[a] > 0) --lo[a];
            if (hi[a] + 1 < grid.dims()[a]) ++hi[a];
            g[a] = (grid.value(hi) - grid.value(lo)) / (grid.spacing() * (hi[a] - lo[a]));
        }
        if (g.norm() < 1e-12)
        {
            // last resort: the edge direction, pointing from the negative to the positive end
            g = (ub - ua) * (grid.sign_value(edge.tip()) > 0.0 ? 1.0 : -1.0);
        }
        return g.normalized();
    }

    struct PlaneFit
    {
        Vec3 normal;
        Vec3 centroid;
    };

    /// Least-squares plane through the points (smallest-eigenvalue eigenvector of their covariance).
    inline PlaneFit fit_plane_pca(std::span<const Vec3> points)
    {
        if (points.empty())
            throw DegenerateError("fit_plane_pca: no points");
        Vec3 centroid = Vec3::Zero();
        for (const Vec3 & p : points) centroid += p;
        centroid /= static_cast<double>(points.size());

        Mat3 cov = Mat3::Zero();
        for (const Vec3 & p : points)
        {
            const Vec3 d = p - centroid;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(points.size());

        const double spread = cov.trace();
        if (!(spread > 0.0))
            throw DegenerateError("fit_plane_pca: coincident points");
        const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        const Vec3 & evals = eig.eigenvalues(); // ascending
        if (evals[1] < 1e-12 * spread)
            throw DegenerateError("fit_plane_pca: collinear points");
        return {eig.eigenvectors().col(0).normalized(), centroid};
    }

    /**
     * One refinement step of an edge's Hermite sample from the vertices of
     * the cells around it: fit a plane, intersect it with the edge line
     * (clamped to the segment), and blend with weight w_u.
     */
    inline HermiteSample update_hermite(const HermiteSample & prev, const Vec3 & edge_start, const Vec3 & edge_end,
                                        std::span<const Vec3> quad_vertices, double w_u)
    {
        PlaneFit fit;
        try
        {
            fit = fit_plane_pca(quad_vertices);
        }
        catch (const DegenerateError &)
        {
            return prev;
        }
        Vec3 n = fit.normal;
        if (n.dot(prev.normal) < 0.0) n = -n;

        HermiteSample next = prev;
        const Vec3 dir = edge_end - edge_start;
        const double len = dir.norm();
        const Vec3 unit = dir / len;
        const double denom = n.dot(unit);
        if (std::abs(denom) >= 1e-8)
        {
            const double t = std::clamp(n.dot(fit.centroid - edge_start) / denom, 0.0, len);
            const Vec3 y = edge_start + t * unit;
            next.point = prev.point + w_u * (y - prev.point);
        }
        next.normal = (n + w_u * prev.normal).normalized();
        return next;
    }
} // namespace sdfdc
