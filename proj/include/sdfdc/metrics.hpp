#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "closest_point.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "sample_assignment.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    /// n area-uniform points on m; the same (m, n, seed) always yields the same points.
    inline std::vector<Vec3> sample_surface(const TriMesh & m, std::size_t n, std::uint64_t seed)
    {
        if (m.empty())
            throw PreconditionError("sample_surface: empty mesh");
        std::vector<double> cumulative(m.triangles.size());
        double total = 0.0;
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
        {
            total += triangle_area(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
            cumulative[t] = total;
        }
        if (!(total > 0.0))
            throw PreconditionError("sample_surface: mesh has zero area");
        std::mt19937_64 rng(detail::splitmix64(seed));
        std::vector<Vec3> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            const double r = detail::unit_uniform(rng) * total;
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
            const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
            const double su = std::sqrt(detail::unit_uniform(rng));
            const double v = detail::unit_uniform(rng);
            out.push_back((1.0 - su) * m.corner(t, 0) + su * (1.0 - v) * m.corner(t, 1) + su * v * m.corner(t, 2));
        }
        return out;
    }

    /// Distance from every point to the mesh behind `index`.
    inline std::vector<double> distances_to(const ClosestPointIndex & index, std::span<const Vec3> points, int threads = 0)
    {
        std::vector<double> d(points.size());
        parallel_for(points.size(), threads, [&](std::size_t i) { d[i] = index.closest_point(points[i]).distance(); });
        return d;
    }

    struct SurfaceDistances
    {
        std::vector<double> a_to_b;
        std::vector<double> b_to_a;

        double chamfer() const
        {
            return 0.5 * (mean(a_to_b) + mean(b_to_a));
        }

        double hausdorff() const
        {
            double h = 0.0;
            for (double d : a_to_b) h = std::max(h, d);
            for (double d : b_to_a) h = std::max(h, d);
            return h;
        }

    private:
        static double mean(const std::vector<double> & v)
        {
            double s = 0.0;
            for (double d : v) s += d;
            return v.empty() ? 0.0 : s / static_cast<double>(v.size());
        }
    };

    inline SurfaceDistances surface_distances(const TriMesh & a, const TriMesh & b, std::size_t n, std::uint64_t seed,
                                              int threads = 0)
    {
        if (a.empty() || b.empty())
            throw PreconditionError("metrics: both meshes must be non-empty");
        const ClosestPointIndex ia(a), ib(b);
        const auto pa = sample_surface(a, n, seed);
        const auto pb = sample_surface(b, n, seed);
        return {distances_to(ib, pa, threads), distances_to(ia, pb, threads)};
    }

    inline double chamfer(const TriMesh & a, const TriMesh & b, std::size_t n, std::uint64_t seed, int threads = 0)
    {
        return surface_distances(a, b, n, seed, threads).chamfer();
    }

    inline double hausdorff(const TriMesh & a, const TriMesh & b, std::size_t n, std::uint64_t seed, int threads = 0)
    {
        return surface_distances(a, b, n, seed, threads).hausdorff();
    }

    /// Static 3-d tree over points for nearest-neighbour distance queries.
    class PointTree
    {
    public:
        explicit PointTree(std::vector<Vec3> points) : points_(std::move(points))
        {
            if (!points_.empty()) build(0, points_.size(), 0);
        }

        bool empty() const { return points_.empty(); }

        double nearest_distance(const Vec3 & q) const
        {
            double best = std::numeric_limits<double>::infinity();
            if (!points_.empty()) search(0, points_.size(), 0, q, best);
            return std::sqrt(best);
        }

    private:
        void build(std::size_t lo, std::size_t hi, int axis)
        {
            if (hi - lo <= 1) return;
            const std::size_t mid = lo + (hi - lo) / 2;
            std::nth_element(points_.begin() + lo, points_.begin() + mid, points_.begin() + hi,
                             [axis](const Vec3 & p, const Vec3 & q) { return p[axis] < q[axis]; });
            build(lo, mid, (axis + 1) % 3);
            build(mid + 1, hi, (axis + 1) % 3);
        }

        void search(std::size_t lo, std::size_t hi, int axis, const Vec3 & q, double & best) const
        {
            if (lo >= hi) return;
            const std::size_t mid = lo + (hi - lo) / 2;
            const Vec3 & p = points_[mid];
            best = std::min(best, (p - q).squaredNorm());
            const double diff = q[axis] - p[axis];
            const int next = (axis + 1) % 3;
            if (diff < 0.0)
            {
                search(lo, mid, next, q, best);
                if (diff * diff < best) search(mid + 1, hi, next, q, best);
            }
            else
            {
                search(mid + 1, hi, next, q, best);
                if (diff * diff < best) search(lo, mid, next, q, best);
            }
        }

        std::vector<Vec3> points_;
    };

    struct Segment
    {
        Vec3 a;
        Vec3 b;
    };

    /// Mesh edges (after welding coincident vertices) shared by two faces whose normals differ by more than threshold.
    inline std::vector<Segment> sharp_edges(const TriMesh & m, double threshold_deg = 30.0)
    {
        std::map<std::array<double, 3>, int> weld;
        std::vector<int> canon(m.vertices.size());
        for (std::size_t v = 0; v < m.vertices.size(); ++v)
        {
            const Vec3 & p = m.vertices[v];
            canon[v] = weld.emplace(std::array<double, 3> {p.x(), p.y(), p.z()}, static_cast<int>(v)).first->second;
        }
        struct Incidence
        {
            int count = 0;
            Vec3 normals[2];
            bool degenerate = false;
        };
        std::map<std::pair<int, int>, Incidence> edges;
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
        {
            const Vec3 n = (m.corner(t, 1) - m.corner(t, 0)).cross(m.corner(t, 2) - m.corner(t, 0));
            const double len = n.norm();
            for (int c = 0; c < 3; ++c)
            {
                int u = canon[m.triangles[t][c]], v = canon[m.triangles[t][(c + 1) % 3]];
                if (u == v) continue;
                if (u > v) std::swap(u, v);
                Incidence & inc = edges[{u, v}];
                if (inc.count < 2)
                {
                    if (len > 0.0) inc.normals[inc.count] = n / len;
                    else inc.degenerate = true;
                }
                ++inc.count;
            }
        }
        const double cos_threshold = std::cos(threshold_deg * std::numbers::pi / 180.0);
        std::vector<Segment> out;
        for (const auto & [key, inc] : edges)
        {
            if (inc.count != 2 || inc.degenerate) continue;
            if (inc.normals[0].dot(inc.normals[1]) < cos_threshold)
                out.push_back({m.vertices[key.first], m.vertices[key.second]});
        }
        return out;
    }

    /// Points lying within `radius` of any segment.
    inline std::vector<Vec3> points_near_segments(std::span<const Vec3> points, std::span<const Segment> segments, double radius)
    {
        std::vector<Vec3> kept;
        if (segments.empty() || points.empty()) return kept;
        // segments are rasterized at step radius/2 into cells of 1.5 radius, so a 27-cell lookup cannot miss
        const double cell = 1.5 * radius;
        auto key_of = [cell](const Vec3 & p) {
            const auto c = (p / cell).array().floor().cast<std::int64_t>();
            return std::array<std::int64_t, 3> {c[0], c[1], c[2]};
        };
        struct KeyHash
        {
            std::size_t operator()(const std::array<std::int64_t, 3> & k) const
            {
                std::uint64_t h = detail::splitmix64(static_cast<std::uint64_t>(k[0]));
                h = detail::splitmix64(h ^ static_cast<std::uint64_t>(k[1]));
                return detail::splitmix64(h ^ static_cast<std::uint64_t>(k[2]));
            }
        };
        std::unordered_map<std::array<std::int64_t, 3>, std::vector<int>, KeyHash> buckets;
        for (std::size_t s = 0; s < segments.size(); ++s)
        {
            const Vec3 d = segments[s].b - segments[s].a;
            const int steps = std::max(1, static_cast<int>(std::ceil(d.norm() / (0.5 * radius))));
            for (int i = 0; i <= steps; ++i)
            {
                auto & list = buckets[key_of(segments[s].a + d * (static_cast<double>(i) / steps))];
                if (list.empty() || list.back() != static_cast<int>(s)) list.push_back(static_cast<int>(s));
            }
        }
        const double r2 = radius * radius;
        for (const Vec3 & p : points)
        {
            const auto k = key_of(p);
            bool near = false;
            for (int dz = -1; dz <= 1 && !near; ++dz)
            {
                for (int dy = -1; dy <= 1 && !near; ++dy)
                {
                    for (int dx = -1; dx <= 1 && !near; ++dx)
                    {
                        const auto it = buckets.find({k[0] + dx, k[1] + dy, k[2] + dz});
                        if (it == buckets.end()) continue;
                        for (int s : it->second)
                        {
                            const TriangleHit h = closest_point_on_segment(p, segments[s].a, segments[s].b);
                            if ((h.point - p).squaredNorm() <= r2)
                            {
                                near = true;
                                break;
                            }
                        }
                    }
                }
            }
            if (near) kept.push_back(p);
        }
        return kept;
    }

    struct EdgeChamferOptions
    {
        std::size_t samples = 200000;
        double threshold_deg = 30.0;
        std::optional<double> radius; // default 0.01 * diagonal of the joint bounding box
        std::uint64_t seed = 0;
        int threads = 0;
    };

    /**
     * Chamfer distance between the surface samples of a and b that lie near
     * sharp edges. If either side has no such samples the result is the
     * largest extent of the joint bounding box.
     */
    inline double edge_chamfer(const TriMesh & a, const TriMesh & b, const EdgeChamferOptions & opts = {})
    {
        if (a.empty() || b.empty())
            throw PreconditionError("edge_chamfer: both meshes must be non-empty");
        Aabb box = a.bounds();
        const Aabb bb = b.bounds();
        box.extend(bb.min);
        box.extend(bb.max);
        const double radius = opts.radius ? *opts.radius : 0.01 * box.extent().norm();
        if (!(radius > 0.0))
            throw PreconditionError("edge_chamfer: radius must be positive");

        const auto sa = sample_surface(a, opts.samples, opts.seed);
        const auto sb = sample_surface(b, opts.samples, opts.seed);
        const auto ea = sharp_edges(a, opts.threshold_deg);
        const auto eb = sharp_edges(b, opts.threshold_deg);
        std::vector<Vec3> ka = points_near_segments(sa, ea, radius);
        std::vector<Vec3> kb = points_near_segments(sb, eb, radius);
        if (ka.empty() || kb.empty()) return box.extent().maxCoeff();

        const PointTree ta(ka), tb(kb);
        std::vector<double> da(ka.size()), db(kb.size());
        parallel_for(ka.size(), opts.threads, [&](std::size_t i) { da[i] = tb.nearest_distance(ka[i]); });
        parallel_for(kb.size(), opts.threads, [&](std::size_t i) { db[i] = ta.nearest_distance(kb[i]); });
        double sum_a = 0.0, sum_b = 0.0;
        for (double d : da) sum_a += d;
        for (double d : db) sum_b += d;
        return 0.5 * (sum_a / static_cast<double>(da.size()) + sum_b / static_cast<double>(db.size()));
    }

    /// Mean over all grid nodes of (|s| - d(node, m))^2.
    inline double sdf_energy(const SdfGrid & grid, const TriMesh & m, int threads = 0)
    {
        if (m.empty())
            throw PreconditionError("sdf_energy: empty mesh");
        const ClosestPointIndex index(m);
        std::vector<double> terms(grid.node_count());
        parallel_for(terms.size(), threads, [&](std::size_t n) {
            const double r = std::abs(grid.value(n)) - index.closest_point(grid.node_position(n)).distance();
            terms[n] = r * r;
        });
        double sum = 0.0;
        for (double t : terms) sum += t;
        return sum / static_cast<double>(terms.size());
    }

    struct MetricReport
    {
        std::string shape;
        std::string method;
        int resolution = 0;
        double chamfer = 0.0;
        double hausdorff = 0.0;
        double edge_chamfer = 0.0;
        double sdf_energy = 0.0;
        std::size_t vertices = 0;
        double seconds = 0.0;
        std::size_t samples = 0;
        std::uint64_t seed = 0;
    };

    inline const char * metric_csv_header()
    {
        return "shape,method,resolution,chamfer,hausdorff,edge_chamfer,sdf_energy,vertices,seconds";
    }

    inline std::string metric_csv_row(const MetricReport & r)
    {
        std::ostringstream out;
        out.precision(17);
        out << r.shape << ',' << r.method << ',' << r.resolution << ',' << r.chamfer << ',' << r.hausdorff << ','
            << r.edge_chamfer << ',' << r.sdf_energy << ',' << r.vertices << ',' << r.seconds;
        return out.str();
    }

    struct MetricOptions
    {
        std::size_t samples = 200000;
        std::uint64_t seed = 0;
        std::optional<double> edge_radius;
        double dihedral_threshold_deg = 30.0;
        int threads = 0;
    };

    /// All four metrics of `mesh` against `reference`; sdf_energy only when a grid is given.
    inline MetricReport evaluate(const TriMesh & mesh, const TriMesh & reference, const SdfGrid * grid, const MetricOptions & opts)
    {
        MetricReport r;
        const SurfaceDistances sd = surface_distances(mesh, reference, opts.samples, opts.seed, opts.threads);
        r.chamfer = sd.chamfer();
        r.hausdorff = sd.hausdorff();
        EdgeChamferOptions eo;
        eo.samples = opts.samples;
        eo.seed = opts.seed;
        eo.threshold_deg = opts.dihedral_threshold_deg;
        eo.radius = opts.edge_radius;
        if (!eo.radius && grid) eo.radius = 0.5 * grid->spacing();
        eo.threads = opts.threads;
        r.edge_chamfer = edge_chamfer(mesh, reference, eo);
        r.sdf_energy = grid ? sdf_energy(*grid, mesh, opts.threads) : 0.0;
        r.vertices = mesh.vertices.size();
        r.samples = opts.samples;
        r.seed = opts.seed;
        return r;
    }
} // namespace sdfdc
