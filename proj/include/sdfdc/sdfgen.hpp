#pragma once

/**
 * Signed distance fixtures: analytic shapes, boolean combinations and
 * watertight triangle meshes, sampled onto SdfGrid lattices.
 *
 * Shape spec files hold one `key=value` per line; `operand:` opens a nested
 * spec whose lines are indented deeper than the `operand:` line. `#` starts
 * a comment.
 *
 *   kind=difference
 *   operand:
 *     kind=box
 *     center=0.5 0.5 0.5
 *     half_extents=0.3 0.3 0.3
 *   operand:
 *     kind=sphere
 *     center=0.5 0.5 0.9
 *     radius=0.25
 *
 * Keys: kind (sphere|box|rotated-box|union|intersection|difference|mesh),
 * center, radius, half_extents, axis, angle_deg, path, bounds (6 numbers).
 */

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "closest_point.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "sample_assignment.hpp"
#include "sdf_grid.hpp"

namespace sdfdc
{
    enum class ShapeKind { Sphere, Box, RotatedBox, Union, Intersection, Difference, Mesh };

    class MeshDistance;

    struct ShapeSpec
    {
        ShapeKind kind = ShapeKind::Sphere;
        Vec3 center = Vec3::Constant(0.5);
        double radius = 0.4;
        Vec3 half_extents = Vec3::Constant(0.3);
        Vec3 axis = Vec3::UnitZ();
        double angle_deg = 0.0;
        std::vector<ShapeSpec> operands;
        std::string mesh_path;
        std::shared_ptr<const MeshDistance> mesh;
        std::optional<Aabb> bounds;

        static ShapeSpec sphere(const Vec3 & c, double r)
        {
            ShapeSpec s;
            s.kind = ShapeKind::Sphere;
            s.center = c;
            s.radius = r;
            return s;
        }

        static ShapeSpec box(const Vec3 & c, const Vec3 & half)
        {
            ShapeSpec s;
            s.kind = ShapeKind::Box;
            s.center = c;
            s.half_extents = half;
            return s;
        }

        static ShapeSpec rotated_box(const Vec3 & c, const Vec3 & half, const Vec3 & axis, double angle_deg)
        {
            ShapeSpec s = box(c, half);
            s.kind = ShapeKind::RotatedBox;
            s.axis = axis;
            s.angle_deg = angle_deg;
            return s;
        }

        static ShapeSpec combine(ShapeKind kind, ShapeSpec a, ShapeSpec b)
        {
            ShapeSpec s;
            s.kind = kind;
            s.operands = {std::move(a), std::move(b)};
            return s;
        }

        /// World-to-local rotation of a rotated box.
        Mat3 inverse_rotation() const
        {
            return Eigen::AngleAxisd(angle_deg * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix().transpose();
        }

        void validate() const;
    };

    /// Signed distance to a watertight triangle mesh (unsigned distance from the tree, sign by ray parity).
    class MeshDistance
    {
    public:
        explicit MeshDistance(TriMesh mesh)
            : mesh_(std::move(mesh)), index_((check_watertight(mesh_), mesh_))
        {
            diagonal_ = mesh_.bounds().extent().norm();
        }

        const TriMesh & mesh() const { return mesh_; }

        double unsigned_distance(const Vec3 & p) const { return index_.closest_point(p).distance(); }

        /// True when p is inside by crossing parity; throws if every perturbed ray stays ambiguous.
        bool inside(const Vec3 & p) const
        {
            static const Vec3 directions[9] = {
                Vec3(1.0, 0.0, 0.0),       Vec3(1.0, 1e-7, 0.0),      Vec3(1.0, 0.0, 1e-7),
                Vec3(1.0, -1e-7, 2e-7),    Vec3(1.0, 3e-7, -1e-7),    Vec3(1.0, -2e-7, -3e-7),
                Vec3(1.0, 4e-7, 5e-7),     Vec3(1.0, -5e-7, 4e-7),    Vec3(1.0, 6e-7, -6e-7),
            };
            for (int attempt = 0; attempt < 9; ++attempt)
            {
                // the first attempt is axis-aligned; retries tilt the ray and nudge its origin
                const Vec3 origin = p + (attempt == 0 ? Vec3::Zero() : Vec3(0.0, 1e-7 * diagonal_ * attempt, -0.7e-7 * diagonal_ * attempt));
                const auto crossings = count_crossings(origin, directions[attempt]);
                if (crossings) return (*crossings % 2) == 1;
            }
            throw ConsistencyError("mesh_to_sdf: ray parity inconclusive after retries");
        }

        double signed_distance(const Vec3 & p) const
        {
            const double d = unsigned_distance(p);
            // on the surface every ray starts on a face; the sign is moot there
            if (d <= 1e-9 * diagonal_) return d;
            return inside(p) ? -d : d;
        }

    private:
        static void check_watertight(const TriMesh & m)
        {
            if (m.triangles.empty())
                throw DomainError("mesh_to_sdf: empty mesh");
            if (count_open_edges(m) != 0)
                throw DomainError("mesh_to_sdf: mesh is not watertight (open or non-manifold edges)");
        }

        /// Number of crossings, or nullopt if the ray grazes an edge or vertex.
        std::optional<int> count_crossings(const Vec3 & o, const Vec3 & dir) const
        {
            int count = 0;
            bool ambiguous = false;
            index_.for_each_ray_candidate(o, dir, [&](int, const Vec3 & a, const Vec3 & b, const Vec3 & c) {
                if (ambiguous) return;
                const Vec3 e1 = b - a;
                const Vec3 e2 = c - a;
                const Vec3 pv = dir.cross(e2);
                const double det = e1.dot(pv);
                const double scale = e1.norm() * e2.norm();
                if (std::abs(det) <= 1e-14 * scale)
                {
                    // ray parallel to the triangle plane: ambiguous only if it lies in it
                    const Vec3 n = e1.cross(e2);
                    if (std::abs(n.normalized().dot(o - a)) <= 1e-12 * diagonal_) ambiguous = true;
                    return;
                }
                const double inv = 1.0 / det;
                const Vec3 tv = o - a;
                const double u = tv.dot(pv) * inv;
                const Vec3 qv = tv.cross(e1);
                const double v = dir.dot(qv) * inv;
                const double t = e2.dot(qv) * inv;
                constexpr double eps = 1e-10;
                if (u < -eps || v < -eps || u + v > 1.0 + eps || t < -eps * diagonal_) return;
                if (u < eps || v < eps || u + v > 1.0 - eps || t < eps * diagonal_)
                {
                    ambiguous = true;
                    return;
                }
                ++count;
            });
            if (ambiguous) return std::nullopt;
            return count;
        }

        TriMesh mesh_;
        ClosestPointIndex index_;
        double diagonal_ = 1.0;
    };

    namespace detail
    {
        inline double box_sdf(const Vec3 & local, const Vec3 & half)
        {
            const Vec3 q = local.cwiseAbs() - half;
            return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
        }
    } // namespace detail

    inline double eval_sdf(const ShapeSpec & spec, const Vec3 & p)
    {
        switch (spec.kind)
        {
        case ShapeKind::Sphere: return (p - spec.center).norm() - spec.radius;
        case ShapeKind::Box: return detail::box_sdf(p - spec.center, spec.half_extents);
        case ShapeKind::RotatedBox: return detail::box_sdf(spec.inverse_rotation() * (p - spec.center), spec.half_extents);
        case ShapeKind::Union:
        {
            double v = std::numeric_limits<double>::infinity();
            for (const auto & o : spec.operands) v = std::min(v, eval_sdf(o, p));
            return v;
        }
        case ShapeKind::Intersection:
        {
            double v = -std::numeric_limits<double>::infinity();
            for (const auto & o : spec.operands) v = std::max(v, eval_sdf(o, p));
            return v;
        }
        case ShapeKind::Difference:
        {
            double v = eval_sdf(spec.operands.at(0), p);
            for (std::size_t i = 1; i < spec.operands.size(); ++i) v = std::max(v, -eval_sdf(spec.operands[i], p));
            return v;
        }
        case ShapeKind::Mesh:
            if (!spec.mesh)
                throw PreconditionError("eval_sdf: mesh shape not loaded");
            return spec.mesh->signed_distance(p);
        }
        return 0.0;
    }

    inline void ShapeSpec::validate() const
    {
        switch (kind)
        {
        case ShapeKind::Sphere:
            if (!(radius > 0.0)) throw DomainError("shape: sphere radius must be positive");
            break;
        case ShapeKind::Box:
        case ShapeKind::RotatedBox:
            if (!(half_extents.array() > 0.0).all()) throw DomainError("shape: box half extents must be positive");
            if (kind == ShapeKind::RotatedBox && !(axis.norm() > 0.0)) throw DomainError("shape: rotation axis must be non-zero");
            break;
        case ShapeKind::Union:
        case ShapeKind::Intersection:
        case ShapeKind::Difference:
            if (operands.size() < 2) throw DomainError("shape: boolean needs at least two operands");
            for (const auto & o : operands) o.validate();
            break;
        case ShapeKind::Mesh:
            if (!mesh) throw DomainError("shape: mesh shape has no mesh loaded");
            break;
        }
    }

    /// Node counts and bounds describing a uniform lattice.
    struct GridSampling
    {
        Index3 dims {32, 32, 32};
        Aabb bounds;

        static GridSampling unit_cube(int n)
        {
            GridSampling s;
            s.dims = {n, n, n};
            s.bounds.extend(Vec3::Zero());
            s.bounds.extend(Vec3::Ones());
            return s;
        }

        /// Spacing implied by bounds and dims; throws unless it is the same on all axes.
        double spacing() const
        {
            for (int a = 0; a < 3; ++a)
            {
                if (dims[a] < 2) throw DomainError("grid sampling: every dimension must be >= 2");
            }
            const Vec3 ext = bounds.extent();
            const double h = ext.x() / (dims[0] - 1);
            for (int a = 1; a < 3; ++a)
            {
                const double ha = ext[a] / (dims[a] - 1);
                if (std::abs(ha - h) > 1e-9 * h)
                    throw DomainError("grid sampling: bounds imply non-uniform spacing");
            }
            if (!(h > 0.0)) throw DomainError("grid sampling: empty bounds");
            return h;
        }
    };

    template <class Field>
    SdfGrid sample_field(Field && field, const GridSampling & sampling, int threads = 0)
    {
        const double h = sampling.spacing();
        const Index3 & d = sampling.dims;
        const std::size_t count = static_cast<std::size_t>(d[0]) * d[1] * d[2];
        std::vector<double> values(count);
        const Vec3 origin = sampling.bounds.min;
        parallel_for(count, threads, [&](std::size_t n) {
            const int i = static_cast<int>(n % d[0]);
            const int j = static_cast<int>((n / d[0]) % d[1]);
            const int k = static_cast<int>(n / (static_cast<std::size_t>(d[0]) * d[1]));
            values[n] = field(Vec3(origin + h * Vec3(i, j, k)));
        });
        return SdfGrid(d, origin, h, std::move(values));
    }

    inline SdfGrid sample_to_grid(const ShapeSpec & spec, const GridSampling & sampling, int threads = 0)
    {
        spec.validate();
        return sample_field([&](const Vec3 & p) { return eval_sdf(spec, p); }, sampling, threads);
    }

    inline SdfGrid mesh_to_sdf(const TriMesh & mesh, const GridSampling & sampling, int threads = 0)
    {
        const MeshDistance dist(mesh);
        (void)sampling.spacing();
        // parity failures are rare; evaluate serially when the mesh is small to keep errors catchable
        std::vector<double> values;
        const Index3 & d = sampling.dims;
        const double h = sampling.spacing();
        values.reserve(static_cast<std::size_t>(d[0]) * d[1] * d[2]);
        for (int k = 0; k < d[2]; ++k)
        {
            for (int j = 0; j < d[1]; ++j)
            {
                for (int i = 0; i < d[0]; ++i)
                {
                    values.push_back(dist.signed_distance(sampling.bounds.min + h * Vec3(i, j, k)));
                }
            }
        }
        (void)threads;
        return SdfGrid(d, sampling.bounds.min, h, std::move(values));
    }

    /// Closed triangle mesh of an axis-aligned or rotated box spec (12 outward-facing triangles).
    inline TriMesh box_mesh(const ShapeSpec & spec)
    {
        if (spec.kind != ShapeKind::Box && spec.kind != ShapeKind::RotatedBox)
            throw PreconditionError("box_mesh: spec is not a box");
        const Mat3 rot = spec.kind == ShapeKind::RotatedBox ? Mat3(spec.inverse_rotation().transpose()) : Mat3::Identity();
        TriMesh m;
        for (int c = 0; c < 8; ++c)
        {
            const Vec3 local((c & 1) ? spec.half_extents.x() : -spec.half_extents.x(),
                             (c & 2) ? spec.half_extents.y() : -spec.half_extents.y(),
                             (c & 4) ? spec.half_extents.z() : -spec.half_extents.z());
            m.vertices.push_back(spec.center + rot * local);
        }
        // corner index bits: x=1, y=2, z=4
        const int faces[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
        for (const auto & f : faces)
        {
            m.triangles.push_back({f[0], f[1], f[2]});
            m.triangles.push_back({f[0], f[2], f[3]});
        }
        return m;
    }

    /// Latitude-longitude triangulation of a sphere (closed, outward-facing).
    inline TriMesh sphere_mesh(const Vec3 & center, double radius, int rings = 64, int segments = 128)
    {
        TriMesh m;
        m.vertices.push_back(center + Vec3(0.0, 0.0, radius));
        for (int r = 1; r < rings; ++r)
        {
            const double theta = std::numbers::pi * r / rings;
            for (int s = 0; s < segments; ++s)
            {
                const double phi = 2.0 * std::numbers::pi * s / segments;
                m.vertices.push_back(center + radius * Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
            }
        }
        m.vertices.push_back(center - Vec3(0.0, 0.0, radius));
        const int south = static_cast<int>(m.vertices.size()) - 1;
        auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
        for (int s = 0; s < segments; ++s)
        {
            m.triangles.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
            m.triangles.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
        }
        for (int r = 1; r + 1 < rings; ++r)
        {
            for (int s = 0; s < segments; ++s)
            {
                const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
                const int c = ring_vertex(r + 1, s + 1), d = ring_vertex(r + 1, s);
                m.triangles.push_back({a, d, c});
                m.triangles.push_back({a, c, b});
            }
        }
        return m;
    }

    /// Adds uniform noise in [-eta, eta] to every value.
    inline SdfGrid add_uniform_noise(const SdfGrid & grid, double eta, std::uint64_t seed)
    {
        std::mt19937_64 rng(detail::splitmix64(seed));
        std::vector<double> values(grid.values().begin(), grid.values().end());
        for (double & v : values) v += eta * (2.0 * detail::unit_uniform(rng) - 1.0);
        return SdfGrid(grid.dims(), grid.origin(), grid.spacing(), std::move(values));
    }

    // ------------------------------------------------------------ spec files

    namespace detail
    {
        inline Vec3 parse_vec3(const std::string & value, const std::string & key)
        {
            std::istringstream in(value);
            Vec3 v;
            if (!(in >> v.x() >> v.y() >> v.z()))
                throw Error("shape spec: '" + key + "' needs three numbers");
            return v;
        }

        inline ShapeKind parse_kind(const std::string & s)
        {
            static const std::map<std::string, ShapeKind> kinds = {
                {"sphere", ShapeKind::Sphere},       {"box", ShapeKind::Box},
                {"rotated-box", ShapeKind::RotatedBox}, {"union", ShapeKind::Union},
                {"intersection", ShapeKind::Intersection}, {"difference", ShapeKind::Difference},
                {"mesh", ShapeKind::Mesh}};
            const auto it = kinds.find(s);
            if (it == kinds.end())
                throw Error("shape spec: unknown kind '" + s + "'");
            return it->second;
        }

        struct SpecLine
        {
            int indent;
            std::string text;
            int number;
        };

        inline ShapeSpec parse_spec_block(const std::vector<SpecLine> & lines, std::size_t & pos, int indent,
                                          const std::string & base_dir)
        {
            ShapeSpec spec;
            bool has_kind = false;
            while (pos < lines.size() && lines[pos].indent >= indent)
            {
                const SpecLine & line = lines[pos];
                if (line.indent > indent)
                    throw Error("shape spec: unexpected indentation on line " + std::to_string(line.number));
                ++pos;
                if (line.text == "operand:")
                {
                    if (pos >= lines.size() || lines[pos].indent <= indent)
                        throw Error("shape spec: empty operand on line " + std::to_string(line.number));
                    spec.operands.push_back(parse_spec_block(lines, pos, lines[pos].indent, base_dir));
                    continue;
                }
                const auto eq = line.text.find('=');
                if (eq == std::string::npos)
                    throw Error("shape spec: expected key=value on line " + std::to_string(line.number));
                const auto trim = [](std::string s) {
                    s.erase(0, std::min(s.size(), s.find_first_not_of(" \t")));
                    s.erase(s.find_last_not_of(" \t") + 1);
                    return s;
                };
                const std::string key = trim(line.text.substr(0, eq));
                const std::string value = trim(line.text.substr(eq + 1));
                if (key == "kind") { spec.kind = parse_kind(value); has_kind = true; }
                else if (key == "center") spec.center = parse_vec3(value, key);
                else if (key == "radius") spec.radius = std::stod(value);
                else if (key == "half_extents") spec.half_extents = parse_vec3(value, key);
                else if (key == "axis") spec.axis = parse_vec3(value, key);
                else if (key == "angle_deg") spec.angle_deg = std::stod(value);
                else if (key == "path") spec.mesh_path = value;
                else if (key == "bounds")
                {
                    std::istringstream in(value);
                    Vec3 lo, hi;
                    if (!(in >> lo.x() >> lo.y() >> lo.z() >> hi.x() >> hi.y() >> hi.z()))
                        throw Error("shape spec: 'bounds' needs six numbers");
                    Aabb b;
                    b.extend(lo);
                    b.extend(hi);
                    spec.bounds = b;
                }
                else throw Error("shape spec: unknown key '" + key + "' on line " + std::to_string(line.number));
            }
            if (!has_kind)
                throw Error("shape spec: missing kind");
            if (spec.kind == ShapeKind::Mesh)
            {
                const std::string path = (!spec.mesh_path.empty() && spec.mesh_path[0] != '/' && !base_dir.empty())
                                             ? base_dir + "/" + spec.mesh_path
                                             : spec.mesh_path;
                spec.mesh = std::make_shared<MeshDistance>(load_obj(path));
            }
            return spec;
        }
    } // namespace detail

    inline ShapeSpec parse_shape_spec(const std::string & text, const std::string & base_dir = "")
    {
        std::vector<detail::SpecLine> lines;
        std::istringstream in(text);
        std::string raw;
        int number = 0;
        while (std::getline(in, raw))
        {
            ++number;
            if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            const auto first = raw.find_first_not_of(" \t");
            if (first == std::string::npos) continue;
            const auto last = raw.find_last_not_of(" \t\r");
            lines.push_back({static_cast<int>(first), raw.substr(first, last - first + 1), number});
        }
        if (lines.empty())
            throw Error("shape spec: empty");
        std::size_t pos = 0;
        ShapeSpec spec = detail::parse_spec_block(lines, pos, lines[0].indent, base_dir);
        if (pos != lines.size())
            throw Error("shape spec: trailing lines from line " + std::to_string(lines[pos].number));
        spec.validate();
        return spec;
    }

    inline ShapeSpec load_shape_spec(const std::string & path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open shape spec '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        const auto slash = path.find_last_of('/');
        return parse_shape_spec(ss.str(), slash == std::string::npos ? "" : path.substr(0, slash));
    }
} // namespace sdfdc
