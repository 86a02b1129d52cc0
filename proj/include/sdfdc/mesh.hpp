#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sdf_grid.hpp"
#include "types.hpp"

namespace sdfdc
{
    struct QuadMesh
    {
        std::vector<Vec3> vertices;
        std::vector<std::array<int, 4>> quads;
        std::vector<EdgeId> quad_edges; // grid edge that spawned each quad

        std::size_t num_vertices() const { return vertices.size(); }
        std::size_t num_quads() const { return quads.size(); }
        bool empty() const { return quads.empty(); }
    };

    struct TriMesh
    {
        std::vector<Vec3> vertices;
        std::vector<std::array<int, 3>> triangles;
        std::vector<int> source_quad; // per triangle; empty when not derived from quads

        std::size_t num_vertices() const { return vertices.size(); }
        std::size_t num_triangles() const { return triangles.size(); }
        bool empty() const { return triangles.empty(); }

        Vec3 corner(std::size_t tri, int c) const { return vertices[triangles[tri][c]]; }

        Aabb bounds() const
        {
            Aabb b;
            for (const auto & t : triangles)
            {
                for (int v : t) b.extend(vertices[v]);
            }
            return b;
        }
    };

    /// Splits every quad (a,b,c,d) along its first diagonal into (a,b,c), (a,c,d).
    inline TriMesh triangulate_quads(const QuadMesh & q)
    {
        TriMesh t;
        t.vertices = q.vertices;
        t.triangles.reserve(2 * q.quads.size());
        t.source_quad.reserve(2 * q.quads.size());
        for (std::size_t i = 0; i < q.quads.size(); ++i)
        {
            const auto & [a, b, c, d] = q.quads[i];
            t.triangles.push_back({a, b, c});
            t.triangles.push_back({a, c, d});
            t.source_quad.push_back(static_cast<int>(i));
            t.source_quad.push_back(static_cast<int>(i));
        }
        return t;
    }

    inline double triangle_area(const Vec3 & a, const Vec3 & b, const Vec3 & c)
    {
        return 0.5 * (b - a).cross(c - a).norm();
    }

    inline double surface_area(const TriMesh & m)
    {
        double area = 0.0;
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
        {
            area += triangle_area(m.corner(t, 0), m.corner(t, 1), m.corner(t, 2));
        }
        return area;
    }

    inline double surface_area(const QuadMesh & m)
    {
        double area = 0.0;
        for (const auto & [a, b, c, d] : m.quads)
        {
            area += triangle_area(m.vertices[a], m.vertices[b], m.vertices[c]) +
                    triangle_area(m.vertices[a], m.vertices[c], m.vertices[d]);
        }
        return area;
    }

    /// Signed enclosed volume (positive for outward-facing closed meshes).
    inline double signed_volume(const TriMesh & m)
    {
        double v = 0.0;
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
        {
            v += m.corner(t, 0).dot(m.corner(t, 1).cross(m.corner(t, 2)));
        }
        return v / 6.0;
    }

    /// Number of undirected edges not shared by exactly two triangles.
    inline std::size_t count_open_edges(const TriMesh & m)
    {
        std::map<std::pair<int, int>, int> uses;
        for (const auto & t : m.triangles)
        {
            for (int e = 0; e < 3; ++e)
            {
                int a = t[e], b = t[(e + 1) % 3];
                if (a > b) std::swap(a, b);
                ++uses[{a, b}];
            }
        }
        return static_cast<std::size_t>(std::ranges::count_if(uses, [](const auto & kv) { return kv.second != 2; }));
    }

    // ---------------------------------------------------------------- OBJ

    namespace detail
    {
        inline void write_obj_vertices(std::ostream & out, const std::vector<Vec3> & vertices)
        {
            char buf[128];
            for (const Vec3 & v : vertices)
            {
                const int n = std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
                out.write(buf, n);
            }
        }
    } // namespace detail

    inline void write_obj(std::ostream & out, const QuadMesh & m)
    {
        detail::write_obj_vertices(out, m.vertices);
        for (const auto & [a, b, c, d] : m.quads)
        {
            out << "f " << a + 1 << ' ' << b + 1 << ' ' << c + 1 << ' ' << d + 1 << '\n';
        }
    }

    inline void write_obj(std::ostream & out, const TriMesh & m)
    {
        detail::write_obj_vertices(out, m.vertices);
        for (const auto & [a, b, c] : m.triangles)
        {
            out << "f " << a + 1 << ' ' << b + 1 << ' ' << c + 1 << '\n';
        }
    }

    template <class Mesh>
    std::string to_obj_string(const Mesh & m)
    {
        std::ostringstream out;
        write_obj(out, m);
        return out.str();
    }

    template <class Mesh>
    void save_obj(const Mesh & m, const std::string & path)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write OBJ file '" + path + "'");
        write_obj(out, m);
    }

    /// Reads vertices and faces; polygons are fan-triangulated, other records ignored.
    inline TriMesh read_obj(std::istream & in)
    {
        TriMesh m;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            std::istringstream ls(line);
            std::string tag;
            ls >> tag;
            if (tag == "v")
            {
                Vec3 p;
                if (!(ls >> p.x() >> p.y() >> p.z()))
                    throw Error("OBJ: malformed vertex on line " + std::to_string(line_no));
                m.vertices.push_back(p);
            }
            else if (tag == "f")
            {
                std::vector<int> poly;
                std::string tok;
                while (ls >> tok)
                {
                    // "a", "a/b", "a//c" and "a/b/c" all start with the position index
                    const int idx = std::stoi(tok.substr(0, tok.find('/')));
                    poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(m.vertices.size()) + idx);
                }
                if (poly.size() < 3)
                    throw Error("OBJ: face with fewer than 3 vertices on line " + std::to_string(line_no));
                for (std::size_t i = 1; i + 1 < poly.size(); ++i)
                {
                    m.triangles.push_back({poly[0], poly[i], poly[i + 1]});
                }
            }
        }
        for (const auto & t : m.triangles)
        {
            for (int v : t)
            {
                if (v < 0 || v >= static_cast<int>(m.vertices.size()))
                    throw Error("OBJ: face index out of range");
            }
        }
        return m;
    }

    inline TriMesh load_obj(const std::string & path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error("cannot open OBJ file '" + path + "'");
        return read_obj(in);
    }
} // namespace sdfdc
