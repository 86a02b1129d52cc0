#pragma once

/**
 * Uniform signed distance grid: storage, indexing, trilinear interpolation,
 * sign-change (interesting edge / cell) detection and SDFG file I/O.
 *
 * Node (i,j,k) lives at flat index i + nx*(j + ny*k) and at world position
 * origin + spacing*(i,j,k). Values are negative inside the surface.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "types.hpp"

namespace sdfdc
{
    using Index3 = std::array<int, 3>;

    enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

    inline int axis_index(Axis a) { return static_cast<int>(a); }

    struct CellId
    {
        int i = 0;
        int j = 0;
        int k = 0;

        int operator[](int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }

        friend bool operator==(const CellId &, const CellId &) = default;

        // Ordered like the flat cell index (k slowest).
        friend std::strong_ordering operator<=>(const CellId & a, const CellId & b)
        {
            if (auto c = a.k <=> b.k; c != 0) return c;
            if (auto c = a.j <=> b.j; c != 0) return c;
            return a.i <=> b.i;
        }
    };

    struct EdgeId
    {
        Index3 base {0, 0, 0};
        Axis axis = Axis::X;

        Index3 tip() const
        {
            Index3 t = base;
            ++t[axis_index(axis)];
            return t;
        }

        friend bool operator==(const EdgeId &, const EdgeId &) = default;

        // Lexicographic in (axis, k, j, i).
        friend std::strong_ordering operator<=>(const EdgeId & a, const EdgeId & b)
        {
            if (auto c = a.axis <=> b.axis; c != 0) return c;
            if (auto c = a.base[2] <=> b.base[2]; c != 0) return c;
            if (auto c = a.base[1] <=> b.base[1]; c != 0) return c;
            return a.base[0] <=> b.base[0];
        }
    };

    class SdfGrid
    {
    public:
        SdfGrid(Index3 dims, Vec3 origin, double spacing, std::vector<double> values)
            : dims_(dims), origin_(std::move(origin)), spacing_(spacing), values_(std::move(values))
        {
            for (int a = 0; a < 3; ++a)
            {
                if (dims_[a] < 2)
                    throw DomainError("SdfGrid: every axis needs at least 2 nodes");
            }
            if (!(spacing_ > 0.0) || !std::isfinite(spacing_))
                throw DomainError("SdfGrid: spacing must be positive and finite");
            if (!origin_.allFinite())
                throw DomainError("SdfGrid: origin must be finite");
            if (values_.size() != node_count())
                throw DomainError("SdfGrid: expected " + std::to_string(node_count()) + " values, got " +
                                  std::to_string(values_.size()));
            for (double v : values_)
            {
                if (!std::isfinite(v))
                    throw DomainError("SdfGrid: non-finite value");
            }
            const Vec3 extent(spacing_ * (dims_[0] - 1), spacing_ * (dims_[1] - 1), spacing_ * (dims_[2] - 1));
            zero_epsilon_ = 1e-12 * extent.norm();
        }

        const Index3 & dims() const { return dims_; }
        const Vec3 & origin() const { return origin_; }
        double spacing() const { return spacing_; }
        std::span<const double> values() const { return values_; }

        std::size_t node_count() const
        {
            return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
        }

        Index3 cell_dims() const { return {dims_[0] - 1, dims_[1] - 1, dims_[2] - 1}; }

        std::size_t cell_count() const
        {
            const Index3 c = cell_dims();
            return static_cast<std::size_t>(c[0]) * c[1] * c[2];
        }

        std::size_t flat_index(int i, int j, int k) const
        {
            return static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
        }

        std::size_t flat_index(const Index3 & n) const { return flat_index(n[0], n[1], n[2]); }

        Index3 node_coords(std::size_t flat) const
        {
            const auto nx = static_cast<std::size_t>(dims_[0]);
            const auto ny = static_cast<std::size_t>(dims_[1]);
            return {static_cast<int>(flat % nx), static_cast<int>((flat / nx) % ny), static_cast<int>(flat / (nx * ny))};
        }

        double value(std::size_t flat) const { return values_[flat]; }
        double value(const Index3 & n) const { return values_[flat_index(n)]; }

        /// Value used for every sign test: exact zeros count as inside.
        double sign_value(std::size_t flat) const
        {
            const double v = values_[flat];
            return v == 0.0 ? -zero_epsilon_ : v;
        }

        double sign_value(const Index3 & n) const { return sign_value(flat_index(n)); }

        double zero_epsilon() const { return zero_epsilon_; }

        Vec3 node_position(int i, int j, int k) const
        {
            return origin_ + spacing_ * Vec3(i, j, k);
        }

        Vec3 node_position(const Index3 & n) const { return node_position(n[0], n[1], n[2]); }
        Vec3 node_position(std::size_t flat) const { return node_position(node_coords(flat)); }

        /// Length of the whole grid's diagonal.
        double diagonal() const
        {
            return spacing_ * Vec3(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1).norm();
        }

        double cell_diagonal() const { return spacing_ * std::sqrt(3.0); }

        bool valid_cell(const CellId & c) const
        {
            const Index3 cd = cell_dims();
            return c.i >= 0 && c.j >= 0 && c.k >= 0 && c.i < cd[0] && c.j < cd[1] && c.k < cd[2];
        }

        bool valid_edge(const EdgeId & e) const
        {
            for (int a = 0; a < 3; ++a)
            {
                if (e.base[a] < 0 || e.base[a] >= dims_[a]) return false;
            }
            return e.base[axis_index(e.axis)] + 1 < dims_[axis_index(e.axis)];
        }

        std::size_t cell_flat(const CellId & c) const
        {
            const Index3 cd = cell_dims();
            return static_cast<std::size_t>(c.i) +
                   static_cast<std::size_t>(cd[0]) * (static_cast<std::size_t>(c.j) + static_cast<std::size_t>(cd[1]) * c.k);
        }

        std::size_t edge_key(const EdgeId & e) const
        {
            return static_cast<std::size_t>(axis_index(e.axis)) * node_count() + flat_index(e.base);
        }

        std::pair<Vec3, Vec3> edge_endpoints(const EdgeId & e) const
        {
            return {node_position(e.base), node_position(e.tip())};
        }

        Vec3 cell_min_corner(const CellId & c) const { return node_position(c.i, c.j, c.k); }

        Aabb cell_box(const CellId & c) const
        {
            Aabb b;
            b.extend(cell_min_corner(c));
            b.extend(Vec3(cell_min_corner(c) + Vec3::Constant(spacing_)));
            return b;
        }

        Aabb bounds() const
        {
            Aabb b;
            b.extend(origin_);
            b.extend(node_position(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1));
            return b;
        }

        friend bool operator==(const SdfGrid & a, const SdfGrid & b)
        {
            return a.dims_ == b.dims_ && a.origin_ == b.origin_ && a.spacing_ == b.spacing_ && a.values_ == b.values_;
        }

    private:
        Index3 dims_;
        Vec3 origin_;
        double spacing_;
        std::vector<double> values_;
        double zero_epsilon_ = 0.0;
    };

    namespace detail
    {
        /// Parametric coordinates of p inside the cell, validated against the box.
        inline Vec3 cell_local(const SdfGrid & grid, const CellId & cell, const Vec3 & p)
        {
            if (!grid.valid_cell(cell))
                throw DomainError("trilinear: cell outside grid");
            const Vec3 local = (p - grid.cell_min_corner(cell)) / grid.spacing();
            constexpr double tol = 1e-9;
            if ((local.array() < -tol).any() || (local.array() > 1.0 + tol).any())
                throw DomainError("trilinear: point outside cell box");
            return local;
        }

        inline std::array<double, 8> cell_corner_values(const SdfGrid & grid, const CellId & c)
        {
            std::array<double, 8> v {};
            for (int corner = 0; corner < 8; ++corner)
            {
                v[corner] = grid.value(Index3 {c.i + (corner & 1), c.j + ((corner >> 1) & 1), c.k + ((corner >> 2) & 1)});
            }
            return v;
        }
    } // namespace detail

    /// Trilinear blend of the 8 corner values of `cell` at world point p.
    inline double trilinear_value(const SdfGrid & grid, const CellId & cell, const Vec3 & p)
    {
        const Vec3 u = detail::cell_local(grid, cell, p);
        const auto v = detail::cell_corner_values(grid, cell);
        double result = 0.0;
        for (int corner = 0; corner < 8; ++corner)
        {
            const double wx = (corner & 1) ? u.x() : 1.0 - u.x();
            const double wy = (corner & 2) ? u.y() : 1.0 - u.y();
            const double wz = (corner & 4) ? u.z() : 1.0 - u.z();
            result += wx * wy * wz * v[corner];
        }
        return result;
    }

    /// Analytic gradient of the trilinear blend, in world units.
    inline Vec3 trilinear_gradient(const SdfGrid & grid, const CellId & cell, const Vec3 & p)
    {
        const Vec3 u = detail::cell_local(grid, cell, p);
        const auto v = detail::cell_corner_values(grid, cell);
        Vec3 g = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner)
        {
            const bool bx = corner & 1, by = corner & 2, bz = corner & 4;
            const double wx = bx ? u.x() : 1.0 - u.x();
            const double wy = by ? u.y() : 1.0 - u.y();
            const double wz = bz ? u.z() : 1.0 - u.z();
            const double dx = bx ? 1.0 : -1.0;
            const double dy = by ? 1.0 : -1.0;
            const double dz = bz ? 1.0 : -1.0;
            g += v[corner] * Vec3(dx * wy * wz, wx * dy * wz, wx * wy * dz);
        }
        return g / grid.spacing();
    }

    inline bool is_interesting(const SdfGrid & grid, const EdgeId & e)
    {
        return grid.sign_value(e.base) * grid.sign_value(e.tip()) < 0.0;
    }

    /// All sign-changing grid edges, ordered by (axis, k, j, i).
    inline std::vector<EdgeId> find_interesting_edges(const SdfGrid & grid)
    {
        std::vector<EdgeId> edges;
        const Index3 & d = grid.dims();
        for (int a = 0; a < 3; ++a)
        {
            for (int k = 0; k < d[2]; ++k)
            {
                for (int j = 0; j < d[1]; ++j)
                {
                    for (int i = 0; i < d[0]; ++i)
                    {
                        EdgeId e {{i, j, k}, static_cast<Axis>(a)};
                        if (e.base[a] + 1 >= d[a]) continue;
                        if (is_interesting(grid, e)) edges.push_back(e);
                    }
                }
            }
        }
        return edges;
    }

    /**
     * Incidence between interesting edges and interesting cells.
     *
     * edge_rings[e] lists the (up to) four cells around edge e in the cyclic
     * order (-1,-1), (0,-1), (0,0), (-1,0) over the two axes following the
     * edge axis; -1 marks a cell outside the grid. Walking the ring in this
     * order turns counterclockwise about the +axis direction.
     */
    struct SurfaceTopology
    {
        std::vector<EdgeId> edges;
        std::vector<CellId> cells;
        std::vector<std::array<int, 4>> edge_rings;
        std::vector<std::vector<int>> cell_edges;

        int cell_index(const CellId & c) const
        {
            const auto it = lookup.find(key(c));
            return it == lookup.end() ? -1 : it->second;
        }

        std::vector<int> incident_cells(int edge) const
        {
            std::vector<int> out;
            for (int c : edge_rings[edge])
            {
                if (c >= 0) out.push_back(c);
            }
            return out;
        }

        bool is_interior(int edge) const
        {
            return std::ranges::all_of(edge_rings[edge], [](int c) { return c >= 0; });
        }

        std::unordered_map<std::uint64_t, int> lookup;

        static std::uint64_t key(const CellId & c)
        {
            return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.k)) << 42) |
                   (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.j)) << 21) |
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.i));
        }
    };

    /// Cells around edge e in ring order, each paired with whether it lies inside the grid.
    inline std::array<std::pair<CellId, bool>, 4> edge_ring_cells(const SdfGrid & grid, const EdgeId & e)
    {
        constexpr int offsets[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};
        const int a = axis_index(e.axis);
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        std::array<std::pair<CellId, bool>, 4> ring;
        for (int r = 0; r < 4; ++r)
        {
            Index3 idx = e.base;
            idx[b] += offsets[r][0];
            idx[c] += offsets[r][1];
            const CellId cell {idx[0], idx[1], idx[2]};
            ring[r] = {cell, grid.valid_cell(cell)};
        }
        return ring;
    }

    /// The 12 edges of a cell (4 per axis).
    inline std::array<EdgeId, 12> cell_edges_of(const CellId & c)
    {
        std::array<EdgeId, 12> out;
        int n = 0;
        for (int a = 0; a < 3; ++a)
        {
            const int b = (a + 1) % 3;
            const int d = (a + 2) % 3;
            for (int s = 0; s < 4; ++s)
            {
                Index3 base {c.i, c.j, c.k};
                base[b] += s & 1;
                base[d] += (s >> 1) & 1;
                out[n++] = EdgeId {base, static_cast<Axis>(a)};
            }
        }
        return out;
    }

    inline SurfaceTopology find_interesting_cells(const SdfGrid & grid, std::span<const EdgeId> edges)
    {
        SurfaceTopology topo;
        topo.edges.assign(edges.begin(), edges.end());

        std::vector<CellId> cells;
        for (const EdgeId & e : edges)
        {
            for (const auto & [cell, valid] : edge_ring_cells(grid, e))
            {
                if (valid) cells.push_back(cell);
            }
        }
        std::ranges::sort(cells);
        const auto [first, last] = std::ranges::unique(cells);
        cells.erase(first, last);
        topo.cells = std::move(cells);
        topo.lookup.reserve(topo.cells.size());
        for (int i = 0; i < static_cast<int>(topo.cells.size()); ++i)
        {
            topo.lookup.emplace(SurfaceTopology::key(topo.cells[i]), i);
        }

        topo.edge_rings.resize(edges.size());
        topo.cell_edges.resize(topo.cells.size());
        for (int e = 0; e < static_cast<int>(edges.size()); ++e)
        {
            const auto ring = edge_ring_cells(grid, edges[e]);
            for (int r = 0; r < 4; ++r)
            {
                const int ci = ring[r].second ? topo.cell_index(ring[r].first) : -1;
                topo.edge_rings[e][r] = ci;
                if (ci >= 0) topo.cell_edges[ci].push_back(e);
            }
        }
        return topo;
    }

    inline SurfaceTopology find_surface_topology(const SdfGrid & grid)
    {
        const auto edges = find_interesting_edges(grid);
        return find_interesting_cells(grid, edges);
    }

    // ---------------------------------------------------------------- I/O

    enum class GridFormat { Text, Binary };

    namespace detail
    {
        inline void append_number(std::string & out, double v)
        {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof(buf), v);
            out.append(buf, res.ptr);
        }

        inline void append_number(std::string & out, int v)
        {
            char buf[32];
            const auto res = std::to_chars(buf, buf + sizeof(buf), v);
            out.append(buf, res.ptr);
        }

        inline void store_le(char * dst, double v)
        {
            auto bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b)
            {
                dst[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
            }
        }

        inline double load_le(const char * src)
        {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
            {
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(src[b])) << (8 * b);
            }
            return std::bit_cast<double>(bits);
        }

        inline bool is_space(char c)
        {
            return c == ' ' || c == '\t' || c == '\n' || c == '\r';
        }

        /// Reads one whitespace-delimited token starting at pos; returns its [begin,end).
        inline std::pair<std::size_t, std::size_t> next_token(std::string_view s, std::size_t pos, bool stop_at_newline)
        {
            while (pos < s.size() && is_space(s[pos]) && !(stop_at_newline && s[pos] == '\n')) ++pos;
            std::size_t end = pos;
            while (end < s.size() && !is_space(s[end])) ++end;
            return {pos, end};
        }

        template <class T>
        T parse_number(std::string_view s, std::size_t begin, std::size_t end, const char * what)
        {
            T v {};
            const auto res = std::from_chars(s.data() + begin, s.data() + end, v);
            if (res.ec != std::errc() || res.ptr != s.data() + end || begin == end)
                throw ParseError(std::string("SDFG: malformed ") + what, begin);
            return v;
        }
    } // namespace detail

    /// Serializes the grid in the SDFG format.
    inline std::string serialize_grid(const SdfGrid & grid, GridFormat format)
    {
        std::string out = "SDFG ";
        out += format == GridFormat::Binary ? "bin" : "text";
        for (int a = 0; a < 3; ++a)
        {
            out += ' ';
            detail::append_number(out, grid.dims()[a]);
        }
        for (int a = 0; a < 3; ++a)
        {
            out += ' ';
            detail::append_number(out, grid.origin()[a]);
        }
        out += ' ';
        detail::append_number(out, grid.spacing());
        out += '\n';

        const auto values = grid.values();
        if (format == GridFormat::Binary)
        {
            const std::size_t header = out.size();
            out.resize(header + 8 * values.size());
            for (std::size_t i = 0; i < values.size(); ++i)
            {
                detail::store_le(out.data() + header + 8 * i, values[i]);
            }
        }
        else
        {
            const auto nx = static_cast<std::size_t>(grid.dims()[0]);
            for (std::size_t i = 0; i < values.size(); ++i)
            {
                detail::append_number(out, values[i]);
                out += (i + 1) % nx == 0 ? '\n' : ' ';
            }
        }
        return out;
    }

    inline SdfGrid parse_grid(std::string_view bytes)
    {
        using detail::next_token;
        const std::size_t newline = bytes.find('\n');
        if (newline == std::string_view::npos)
            throw ParseError("SDFG: missing header line", 0);

        const std::string_view header = bytes.substr(0, newline);
        std::size_t pos = 0;
        auto [b0, e0] = next_token(header, pos, true);
        if (header.substr(b0, e0 - b0) != "SDFG")
            throw ParseError("SDFG: bad magic", b0);
        auto [b1, e1] = next_token(header, e0, true);
        const std::string_view kind = header.substr(b1, e1 - b1);
        GridFormat format;
        if (kind == "bin") format = GridFormat::Binary;
        else if (kind == "text") format = GridFormat::Text;
        else throw ParseError("SDFG: unknown variant '" + std::string(kind) + "'", b1);

        pos = e1;
        Index3 dims {};
        for (int a = 0; a < 3; ++a)
        {
            auto [b, e] = next_token(header, pos, true);
            dims[a] = detail::parse_number<int>(header, b, e, "dimension");
            if (dims[a] < 2)
                throw ParseError("SDFG: every dimension must be >= 2", b);
            pos = e;
        }
        Vec3 origin;
        for (int a = 0; a < 3; ++a)
        {
            auto [b, e] = next_token(header, pos, true);
            origin[a] = detail::parse_number<double>(header, b, e, "origin");
            if (!std::isfinite(origin[a]))
                throw ParseError("SDFG: non-finite origin", b);
            pos = e;
        }
        double spacing = 0.0;
        {
            auto [b, e] = next_token(header, pos, true);
            spacing = detail::parse_number<double>(header, b, e, "spacing");
            if (!(spacing > 0.0) || !std::isfinite(spacing))
                throw ParseError("SDFG: spacing must be positive", b);
            pos = e;
            auto [bx, ex] = next_token(header, pos, true);
            if (bx != ex)
                throw ParseError("SDFG: unexpected header field (anisotropic spacing is not supported)", bx);
        }

        const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
        std::vector<double> values(count);
        const std::size_t body = newline + 1;
        if (format == GridFormat::Binary)
        {
            const std::size_t available = bytes.size() - body;
            if (available != 8 * count)
                throw ParseError("SDFG: value count mismatch, expected " + std::to_string(count) + " values, found " +
                                     std::to_string(available / 8) + (available % 8 ? " plus a partial value" : ""),
                                 body + std::min(available, 8 * count));
            for (std::size_t i = 0; i < count; ++i)
            {
                values[i] = detail::load_le(bytes.data() + body + 8 * i);
                if (!std::isfinite(values[i]))
                    throw ParseError("SDFG: non-finite value", body + 8 * i);
            }
        }
        else
        {
            pos = body;
            for (std::size_t i = 0; i < count; ++i)
            {
                auto [b, e] = next_token(bytes, pos, false);
                if (b == e)
                    throw ParseError("SDFG: value count mismatch, expected " + std::to_string(count) + " values, found " +
                                         std::to_string(i),
                                     b);
                values[i] = detail::parse_number<double>(bytes, b, e, "value");
                if (!std::isfinite(values[i]))
                    throw ParseError("SDFG: non-finite value", b);
                pos = e;
            }
            auto [b, e] = next_token(bytes, pos, false);
            if (b != e)
                throw ParseError("SDFG: value count mismatch, more than " + std::to_string(count) + " values", b);
        }
        return SdfGrid(dims, origin, spacing, std::move(values));
    }

    inline SdfGrid load_grid(const std::string & path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error("cannot open grid file '" + path + "'");
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse_grid(bytes);
    }

    inline void save_grid(const SdfGrid & grid, const std::string & path, GridFormat format = GridFormat::Binary)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write grid file '" + path + "'");
        const std::string bytes = serialize_grid(grid, format);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
} // namespace sdfdc
