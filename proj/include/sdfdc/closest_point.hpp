#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mesh.hpp"
#include "types.hpp"

namespace sdfdc
{
    struct TriangleHit
    {
        Vec3 point;
        std::array<double, 3> barycentric;
    };

    struct ClosestHit
    {
        Vec3 point = Vec3::Zero();
        int triangle = -1;
        std::array<double, 3> barycentric {0.0, 0.0, 0.0};
        double distance_sq = std::numeric_limits<double>::infinity();

        double distance() const { return std::sqrt(distance_sq); }
    };

    inline TriangleHit closest_point_on_segment(const Vec3 & p, const Vec3 & a, const Vec3 & b)
    {
        const Vec3 ab = b - a;
        const double len2 = ab.squaredNorm();
        double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return {a + t * ab, {1.0 - t, t, 0.0}};
    }

    /**
     * Exact closest point on triangle (a,b,c) with barycentric weights, by
     * Voronoi-region classification. Degenerate (collinear) triangles fall
     * back to the closest of their three edges.
     */
    inline TriangleHit closest_point_on_triangle(const Vec3 & p, const Vec3 & a, const Vec3 & b, const Vec3 & c)
    {
        const Vec3 ab = b - a;
        const Vec3 ac = c - a;
        const double scale = std::max({ab.squaredNorm(), ac.squaredNorm(), (c - b).squaredNorm()});
        if (ab.cross(ac).squaredNorm() <= 1e-24 * scale * scale)
        {
            TriangleHit best = closest_point_on_segment(p, a, b);
            TriangleHit h = closest_point_on_segment(p, a, c);
            if ((h.point - p).squaredNorm() < (best.point - p).squaredNorm())
                best = {h.point, {h.barycentric[0], 0.0, h.barycentric[1]}};
            h = closest_point_on_segment(p, b, c);
            if ((h.point - p).squaredNorm() < (best.point - p).squaredNorm())
                best = {h.point, {0.0, h.barycentric[0], h.barycentric[1]}};
            return best;
        }

        const Vec3 ap = p - a;
        const double d1 = ab.dot(ap);
        const double d2 = ac.dot(ap);
        if (d1 <= 0.0 && d2 <= 0.0) return {a, {1.0, 0.0, 0.0}};

        const Vec3 bp = p - b;
        const double d3 = ab.dot(bp);
        const double d4 = ac.dot(bp);
        if (d3 >= 0.0 && d4 <= d3) return {b, {0.0, 1.0, 0.0}};

        const double vc = d1 * d4 - d3 * d2;
        if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
        {
            const double v = d1 / (d1 - d3);
            return {a + v * ab, {1.0 - v, v, 0.0}};
        }

        const Vec3 cp = p - c;
        const double d5 = ab.dot(cp);
        const double d6 = ac.dot(cp);
        if (d6 >= 0.0 && d5 <= d6) return {c, {0.0, 0.0, 1.0}};

        const double vb = d5 * d2 - d1 * d6;
        if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
        {
            const double w = d2 / (d2 - d6);
            return {a + w * ac, {1.0 - w, 0.0, w}};
        }

        const double va = d3 * d6 - d5 * d4;
        if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        {
            const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return {b + w * (c - b), {0.0, 1.0 - w, w}};
        }

        const double denom = 1.0 / (va + vb + vc);
        const double v = vb * denom;
        const double w = vc * denom;
        return {a + ab * v + ac * w, {1.0 - v - w, v, w}};
    }

    /// Exact closest-point queries against a triangle mesh through an AABB tree.
    class ClosestPointIndex
    {
    public:
        explicit ClosestPointIndex(const TriMesh & mesh)
        {
            if (mesh.triangles.empty())
                throw DomainError("ClosestPointIndex: empty mesh");
            tris_.reserve(mesh.triangles.size());
            for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
            {
                tris_.push_back({mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2)});
            }
            order_.resize(tris_.size());
            std::iota(order_.begin(), order_.end(), 0);
            std::vector<Vec3> centroids(tris_.size());
            for (std::size_t t = 0; t < tris_.size(); ++t)
            {
                centroids[t] = (tris_[t][0] + tris_[t][1] + tris_[t][2]) / 3.0;
            }
            nodes_.reserve(2 * tris_.size() / leaf_size + 2);
            build(0, static_cast<int>(tris_.size()), centroids);
        }

        std::size_t num_triangles() const { return tris_.size(); }

        ClosestHit closest_point(const Vec3 & q) const
        {
            ClosestHit best;
            int stack[128];
            int top = 0;
            stack[top++] = 0;
            while (top > 0)
            {
                const Node & node = nodes_[stack[--top]];
                if (node.box.distance_sq(q) >= best.distance_sq) continue;
                if (node.count > 0)
                {
                    for (int i = node.first; i < node.first + node.count; ++i)
                    {
                        const int t = order_[i];
                        const auto & tri = tris_[t];
                        const TriangleHit h = closest_point_on_triangle(q, tri[0], tri[1], tri[2]);
                        const double d2 = (h.point - q).squaredNorm();
                        if (d2 < best.distance_sq || (d2 == best.distance_sq && t < best.triangle))
                        {
                            best = {h.point, t, h.barycentric, d2};
                        }
                    }
                    continue;
                }
                const double dl = nodes_[node.left].box.distance_sq(q);
                const double dr = nodes_[node.right].box.distance_sq(q);
                // push the farther child first so the nearer one is visited next
                if (dl <= dr)
                {
                    stack[top++] = node.right;
                    stack[top++] = node.left;
                }
                else
                {
                    stack[top++] = node.left;
                    stack[top++] = node.right;
                }
            }
            return best;
        }

        /// Calls visit(triangle_index, a, b, c) for every triangle whose box the ray may hit.
        template <class Visitor>
        void for_each_ray_candidate(const Vec3 & origin, const Vec3 & dir, Visitor && visit) const
        {
            const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
            int stack[128];
            int top = 0;
            stack[top++] = 0;
            while (top > 0)
            {
                const Node & node = nodes_[stack[--top]];
                if (!ray_hits_box(origin, inv, node.box)) continue;
                if (node.count > 0)
                {
                    for (int i = node.first; i < node.first + node.count; ++i)
                    {
                        const auto & tri = tris_[order_[i]];
                        visit(order_[i], tri[0], tri[1], tri[2]);
                    }
                    continue;
                }
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        }

    private:
        static constexpr int leaf_size = 4;

        struct Node
        {
            Aabb box;
            int left = -1;
            int right = -1;
            int first = 0;
            int count = 0;
        };

        static bool ray_hits_box(const Vec3 & o, const Vec3 & inv, const Aabb & box)
        {
            double tmin = 0.0;
            double tmax = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a)
            {
                double t0 = (box.min[a] - o[a]) * inv[a];
                double t1 = (box.max[a] - o[a]) * inv[a];
                if (std::isnan(t0) || std::isnan(t1))
                {
                    // ray parallel to and on the slab boundary
                    if (o[a] < box.min[a] || o[a] > box.max[a]) return false;
                    continue;
                }
                if (t0 > t1) std::swap(t0, t1);
                tmin = std::max(tmin, t0);
                tmax = std::min(tmax, t1);
                if (tmin > tmax) return false;
            }
            return true;
        }

        int build(int first, int last, const std::vector<Vec3> & centroids)
        {
            const int index = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            Aabb box;
            Aabb cbox;
            for (int i = first; i < last; ++i)
            {
                for (const Vec3 & v : tris_[order_[i]]) box.extend(v);
                cbox.extend(centroids[order_[i]]);
            }
            nodes_[index].box = box;
            if (last - first <= leaf_size)
            {
                nodes_[index].first = first;
                nodes_[index].count = last - first;
                return index;
            }
            int axis = 0;
            const Vec3 ext = cbox.extent();
            if (ext.y() > ext[axis]) axis = 1;
            if (ext.z() > ext[axis]) axis = 2;
            const int mid = (first + last) / 2;
            std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + last,
                             [&](int a, int b) {
                                 if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                                 return a < b;
                             });
            const int left = build(first, mid, centroids);
            const int right = build(mid, last, centroids);
            nodes_[index].left = left;
            nodes_[index].right = right;
            return index;
        }

        std::vector<std::array<Vec3, 3>> tris_;
        std::vector<int> order_;
        std::vector<Node> nodes_;
    };
} // namespace sdfdc
