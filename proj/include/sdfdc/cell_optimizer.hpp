#pragma once

/**
 * Inner loop of the per-cell vertex optimization.
 *
 * Each assigned sample (u, |s|) is read as a sphere the local mesh should
 * touch. With t the closest local-mesh point to u and q the closest point
 * on the sphere, the distance mismatch is linearized as ((t - q) . d)^2,
 * d = (t - u)/|t - u|. Since every local triangle is (x, v1, v2), t is
 * affine in x through its barycentric weight alpha on x, and one step
 * minimizes
 *
 *   sum_j (alpha_j d_j . x - r_j)^2 + w_H sum_e (n_e . (x - h_e))^2 + mu |x - x_prev|^2
 *
 * exactly through its 3x3 normal equations.
 */

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "closest_point.hpp"
#include "contour_mesh.hpp"
#include "sample_assignment.hpp"

namespace sdfdc
{
    struct LinearTerm
    {
        double alpha = 0.0;
        Vec3 direction = Vec3::UnitX();
        double rhs = 0.0;
    };

    struct HermitePlane
    {
        Vec3 point;
        Vec3 normal;
    };

    struct SphereContact
    {
        Vec3 point;     // q
        Vec3 direction; // d, unit, from u toward q
    };

    /// Closest point to t on the sphere of radius s_abs around u; nullopt when t sits on u.
    inline std::optional<SphereContact> sphere_closest_point(const Vec3 & u, double s_abs, const Vec3 & t)
    {
        const Vec3 diff = t - u;
        const double len = diff.norm();
        if (len < 1e-12 * s_abs || (len < 1e-15 && s_abs < 1e-15)) return std::nullopt;
        const Vec3 d = diff / len;
        return SphereContact {u + s_abs * d, d};
    }

    namespace detail
    {
        inline void append_term(std::vector<LinearTerm> & terms, const AssignedSample & s, const Vec3 & t, double alpha,
                                const Vec3 & fixed_part)
        {
            const auto contact = sphere_closest_point(s.position, s.abs_value, t);
            if (!contact) return;
            const Vec3 & d = contact->direction;
            terms.push_back({alpha, d, d.dot(contact->point - fixed_part)});
        }
    } // namespace detail

    /// Linear terms against an explicit local mesh whose vertex 0 is the cell vertex.
    inline std::vector<LinearTerm> linearize_terms(const TriMesh & local, std::span<const AssignedSample> samples)
    {
        std::vector<LinearTerm> terms;
        terms.reserve(samples.size());
        if (local.triangles.empty()) return terms;
        for (const AssignedSample & s : samples)
        {
            TriangleHit best;
            std::size_t best_tri = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < local.triangles.size(); ++t)
            {
                const TriangleHit h = closest_point_on_triangle(s.position, local.corner(t, 0), local.corner(t, 1), local.corner(t, 2));
                const double d2 = (h.point - s.position).squaredNorm();
                if (d2 < best_d2)
                {
                    best = h;
                    best_tri = t;
                    best_d2 = d2;
                }
            }
            double alpha = 0.0;
            Vec3 fixed_part = Vec3::Zero();
            for (int c = 0; c < 3; ++c)
            {
                const int v = local.triangles[best_tri][c];
                if (v == 0) alpha += best.barycentric[c];
                else fixed_part += best.barycentric[c] * local.vertices[v];
            }
            detail::append_term(terms, s, best.point, alpha, fixed_part);
        }
        return terms;
    }

    /// Same as above, against the fan (x, tail0, tail1) without materializing a mesh.
    inline void linearize_terms(const Vec3 & x, const LocalFrame & frame, std::span<const AssignedSample> samples,
                                std::vector<LinearTerm> & terms)
    {
        terms.clear();
        if (frame.tails.empty()) return;
        for (const AssignedSample & s : samples)
        {
            TriangleHit best;
            std::size_t best_tri = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < frame.tails.size(); ++t)
            {
                const TriangleHit h = closest_point_on_triangle(s.position, x, frame.tails[t][0], frame.tails[t][1]);
                const double d2 = (h.point - s.position).squaredNorm();
                if (d2 < best_d2)
                {
                    best = h;
                    best_tri = t;
                    best_d2 = d2;
                }
            }
            const Vec3 fixed_part = best.barycentric[1] * frame.tails[best_tri][0] + best.barycentric[2] * frame.tails[best_tri][1];
            detail::append_term(terms, s, best.point, best.barycentric[0], fixed_part);
        }
    }

    /// Value of the quadratic step objective at x.
    inline double inner_objective(std::span<const LinearTerm> terms, std::span<const HermitePlane> planes, const Vec3 & x,
                                  const Vec3 & x_prev, double w_H, double mu, double distance_weight = 1.0)
    {
        double e_d = 0.0;
        for (const LinearTerm & t : terms)
        {
            const double r = t.alpha * t.direction.dot(x) - t.rhs;
            e_d += r * r;
        }
        double e_h = 0.0;
        for (const HermitePlane & p : planes)
        {
            const double r = p.normal.dot(x - p.point);
            e_h += r * r;
        }
        return distance_weight * e_d + w_H * e_h + mu * (x - x_prev).squaredNorm();
    }

    /// Exact minimizer of inner_objective (requires mu > 0).
    inline Vec3 solve_inner_step(std::span<const LinearTerm> terms, std::span<const HermitePlane> planes, const Vec3 & x_prev,
                                 double w_H, double mu, double distance_weight = 1.0)
    {
        Mat3 lhs = mu * Mat3::Identity();
        Vec3 rhs = mu * x_prev;
        Mat3 dd = Mat3::Zero();
        Vec3 db = Vec3::Zero();
        for (const LinearTerm & t : terms)
        {
            const Vec3 a = t.alpha * t.direction;
            dd.noalias() += a * a.transpose();
            db += t.rhs * a;
        }
        lhs += distance_weight * dd;
        rhs += distance_weight * db;
        for (const HermitePlane & p : planes)
        {
            lhs.noalias() += w_H * p.normal * p.normal.transpose();
            rhs += w_H * p.normal.dot(p.point) * p.normal;
        }
        return lhs.ldlt().solve(rhs);
    }

    struct InnerOptions
    {
        double w_hermite = 0.02;
        double mu = 0.1;
        double tolerance = 1e-6;
        int max_iterations = 100;
        double distance_weight = 1.0;
    };

    struct InnerStep
    {
        Vec3 x = Vec3::Zero();
        double objective_before = 0.0; // step objective at the start point
        double objective_after = 0.0;  // and at the returned point
    };

    /// One linearize + solve from x. Returns x itself when rounding would raise the objective.
    inline InnerStep inner_step(const LocalFrame & frame, const Vec3 & x, std::span<const AssignedSample> samples,
                                std::span<const HermitePlane> planes, const InnerOptions & opts, std::vector<LinearTerm> & terms)
    {
        linearize_terms(x, frame, samples, terms);
        const Vec3 next = solve_inner_step(terms, planes, x, opts.w_hermite, opts.mu, opts.distance_weight);
        InnerStep step;
        step.objective_before = inner_objective(terms, planes, x, x, opts.w_hermite, opts.mu, opts.distance_weight);
        step.objective_after = inner_objective(terms, planes, next, x, opts.w_hermite, opts.mu, opts.distance_weight);
        if (next.allFinite() && step.objective_after <= step.objective_before)
        {
            step.x = next;
        }
        else
        {
            step.x = x;
            step.objective_after = step.objective_before;
        }
        return step;
    }

    struct InnerResult
    {
        Vec3 x = Vec3::Zero();
        int iterations = 0;
        bool converged = false;
        double final_step = 0.0;
    };

    /**
     * Repeats inner_step from x_start until the step drops to the
     * tolerance or the iteration cap is hit. x may leave its cell.
     */
    inline InnerResult optimize_cell(const LocalFrame & frame, const Vec3 & x_start, std::span<const AssignedSample> samples,
                                     std::span<const HermitePlane> planes, const InnerOptions & opts)
    {
        InnerResult result;
        result.x = x_start;
        std::vector<LinearTerm> terms;
        terms.reserve(samples.size());
        for (int r = 0; r < opts.max_iterations; ++r)
        {
            const InnerStep step = inner_step(frame, result.x, samples, planes, opts, terms);
            result.final_step = (step.x - result.x).norm();
            result.iterations = r + 1;
            result.x = step.x;
            if (result.final_step <= opts.tolerance)
            {
                result.converged = true;
                break;
            }
        }
        return result;
    }
} // namespace sdfdc
