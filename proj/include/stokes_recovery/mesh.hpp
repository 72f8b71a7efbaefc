#pragma once

// Quadrilateral meshes of planar domains with marked boundary edges:
// generators for the unit square and the square with a circular hole, a
// line-oriented text format, and boundary loop extraction.

#include "stokes_recovery/common.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stokes_rec {

struct BoundaryEdge {
    std::array<Index, 2> v{};
    int marker = 0;

    friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Ordered chain of boundary vertices sharing one marker. For closed loops the
/// successor of the last vertex is the first; the domain lies to the left of
/// the traversal direction, so the outward normal is (t_y, -t_x).
struct BoundaryComponent {
    int marker = 0;
    std::vector<Index> vertices;
    bool closed = true;
    double arc_length = 0.0;
    double signed_area = 0.0;  // of the enclosed polygon, closed loops only

    std::size_t edge_count() const { return closed ? vertices.size() : vertices.size() - 1; }
};

class Mesh {
public:
    int dim = 2;
    std::vector<Point> vertices;
    std::vector<std::array<Index, 4>> cells;
    std::vector<BoundaryEdge> boundary_edges;
    std::map<int, std::string> markers;

    Index num_vertices() const { return static_cast<Index>(vertices.size()); }
    Index num_cells() const { return static_cast<Index>(cells.size()); }

    double cell_signed_area(Index c) const {
        // shoelace formula; exact area of the bilinear cell
        const auto& cv = cells[static_cast<std::size_t>(c)];
        double a = 0.0;
        for (int i = 0; i < 4; ++i) {
            const Point p = vertices[static_cast<std::size_t>(cv[i])];
            const Point q = vertices[static_cast<std::size_t>(cv[(i + 1) % 4])];
            a += cross(p, q);
        }
        return 0.5 * a;
    }

    double area() const {
        double a = 0.0;
        for (Index c = 0; c < num_cells(); ++c) a += cell_signed_area(c);
        return a;
    }

    std::optional<int> marker_id(std::string_view name) const {
        for (const auto& [id, n] : markers)
            if (n == name) return id;
        return std::nullopt;
    }

    /// Throws MeshError naming the first violated invariant.
    void validate() const;

    friend bool operator==(const Mesh&, const Mesh&) = default;
};

namespace detail {

inline std::uint64_t edge_key(Index a, Index b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

/// Bilinear-corner check: the quad is valid when all four corner triangles
/// are positively oriented (which implies a positive Jacobian everywhere).
inline bool quad_is_ccw(const Mesh& m, Index c) {
    const auto& cv = m.cells[static_cast<std::size_t>(c)];
    for (int i = 0; i < 4; ++i) {
        const Point p0 = m.vertices[static_cast<std::size_t>(cv[(i + 3) % 4])];
        const Point p1 = m.vertices[static_cast<std::size_t>(cv[i])];
        const Point p2 = m.vertices[static_cast<std::size_t>(cv[(i + 1) % 4])];
        if (cross(p2 - p1, p0 - p1) <= 0.0) return false;
    }
    return true;
}

}  // namespace detail

inline void Mesh::validate() const {
    if (dim != 2) throw MeshError("only dim=2 meshes are supported (got " + std::to_string(dim) + ")");
    const Index nv = num_vertices();
    for (Index i = 0; i < nv; ++i) {
        const Point p = vertices[static_cast<std::size_t>(i)];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw MeshError("vertex " + std::to_string(i) + " has a non-finite coordinate");
    }
    std::vector<char> used(static_cast<std::size_t>(nv), 0);
    for (const auto& cv : cells)
        for (Index v : cv)
            if (v >= 0 && v < nv) used[static_cast<std::size_t>(v)] = 1;
    for (Index i = 0; i < nv; ++i)
        if (!used[static_cast<std::size_t>(i)]) throw MeshError("vertex " + std::to_string(i) + " belongs to no cell");
    std::unordered_map<std::uint64_t, int> edge_use;
    edge_use.reserve(cells.size() * 4);
    for (Index c = 0; c < num_cells(); ++c) {
        const auto& cv = cells[static_cast<std::size_t>(c)];
        for (int i = 0; i < 4; ++i) {
            if (cv[i] < 0 || cv[i] >= nv)
                throw MeshError("cell " + std::to_string(c) + " references missing vertex " + std::to_string(cv[i]));
            for (int j = 0; j < i; ++j)
                if (cv[i] == cv[j]) throw MeshError("cell " + std::to_string(c) + " has repeated vertices");
        }
        if (!detail::quad_is_ccw(*this, c))
            throw MeshError("cell " + std::to_string(c) + " is inverted or not counterclockwise");
        for (int i = 0; i < 4; ++i) ++edge_use[detail::edge_key(cv[i], cv[(i + 1) % 4])];
    }
    std::unordered_map<std::uint64_t, int> bnd_use;
    for (std::size_t e = 0; e < boundary_edges.size(); ++e) {
        const auto& be = boundary_edges[e];
        if (!markers.count(be.marker))
            throw MeshError("boundary edge " + std::to_string(e) + " has undeclared marker " + std::to_string(be.marker));
        const auto key = detail::edge_key(be.v[0], be.v[1]);
        auto it = edge_use.find(key);
        if (it == edge_use.end() || it->second != 1)
            throw MeshError("boundary edge " + std::to_string(e) + " (" + std::to_string(be.v[0]) + "," +
                            std::to_string(be.v[1]) + ") does not belong to exactly one cell");
        if (++bnd_use[key] > 1) throw MeshError("boundary edge " + std::to_string(e) + " is listed twice");
    }
    for (const auto& [key, count] : edge_use) {
        if (count > 2) throw MeshError("an interior edge is shared by more than two cells");
        if (count == 1 && !bnd_use.count(key)) {
            const auto a = static_cast<Index>(key >> 32);
            const auto b = static_cast<Index>(key & 0xffffffffu);
            throw MeshError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") lies on the boundary but carries no marker");
        }
    }
    // The union of boundary edges must close up: every boundary vertex has
    // exactly one outgoing and one incoming oriented boundary edge.
    std::unordered_map<Index, int> degree;
    for (const auto& be : boundary_edges) {
        ++degree[be.v[0]];
        ++degree[be.v[1]];
    }
    for (const auto& [v, d] : degree)
        if (d != 2) throw MeshError("boundary is not closed at vertex " + std::to_string(v));
}

/// Orients every boundary edge along the counterclockwise traversal of its
/// owning cell (domain on the left).
inline void orient_boundary_edges(Mesh& m) {
    std::unordered_map<std::uint64_t, std::array<Index, 2>> directed;
    directed.reserve(m.cells.size() * 4);
    for (const auto& cv : m.cells)
        for (int i = 0; i < 4; ++i) directed[detail::edge_key(cv[i], cv[(i + 1) % 4])] = {cv[i], cv[(i + 1) % 4]};
    for (auto& be : m.boundary_edges) {
        auto it = directed.find(detail::edge_key(be.v[0], be.v[1]));
        if (it != directed.end()) be.v = it->second;
    }
}

/// Drops vertices not referenced by any cell, renumbering the rest in order.
inline void remove_unused_vertices(Mesh& m) {
    std::vector<Index> remap(m.vertices.size(), -1);
    for (const auto& cv : m.cells)
        for (Index v : cv) remap[static_cast<std::size_t>(v)] = 0;
    std::vector<Point> kept;
    for (std::size_t i = 0; i < remap.size(); ++i)
        if (remap[i] == 0) {
            remap[i] = static_cast<Index>(kept.size());
            kept.push_back(m.vertices[i]);
        }
    m.vertices = std::move(kept);
    for (auto& cv : m.cells)
        for (auto& v : cv) v = remap[static_cast<std::size_t>(v)];
    for (auto& be : m.boundary_edges)
        for (auto& v : be.v) v = remap[static_cast<std::size_t>(v)];
}

/// Uniform mesh of (0,1)^2 with 2^n x 2^n square cells, vertices numbered
/// row by row, one boundary marker (id 1, "boundary").
inline Mesh generate_unit_square(int n) {
    if (n < 0) throw MeshError("refinement level must be nonnegative");
    const Index s = Index{1} << n;
    Mesh m;
    m.vertices.reserve(static_cast<std::size_t>((s + 1) * (s + 1)));
    for (Index j = 0; j <= s; ++j)
        for (Index i = 0; i <= s; ++i)
            m.vertices.push_back({static_cast<double>(i) / static_cast<double>(s),
                                  static_cast<double>(j) / static_cast<double>(s)});
    auto vid = [s](Index i, Index j) { return j * (s + 1) + i; };
    for (Index j = 0; j < s; ++j)
        for (Index i = 0; i < s; ++i) m.cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    for (Index i = 0; i < s; ++i) m.boundary_edges.push_back({{vid(i, 0), vid(i + 1, 0)}, 1});
    for (Index j = 0; j < s; ++j) m.boundary_edges.push_back({{vid(s, j), vid(s, j + 1)}, 1});
    for (Index i = s; i > 0; --i) m.boundary_edges.push_back({{vid(i, s), vid(i - 1, s)}, 1});
    for (Index j = s; j > 0; --j) m.boundary_edges.push_back({{vid(0, j), vid(0, j - 1)}, 1});
    m.markers[1] = "boundary";
    return m;
}

namespace detail {

/// A base-mesh edge curve: straight segment or circular arc.
struct EdgeCurve {
    Point a, b;
    bool arc = false;
    Point center;
    double radius = 0.0;
    double theta_a = 0.0, theta_b = 0.0;

    Point at(double t) const {
        if (!arc) return (1.0 - t) * a + t * b;
        const double th = (1.0 - t) * theta_a + t * theta_b;
        return {center.x + radius * std::cos(th), center.y + radius * std::sin(th)};
    }
};

}  // namespace detail

/// Quadrilateral mesh of the unit square minus the closed disc B(center,
/// radius). The 40-cell base mesh has a 4x4 outer frame, a 12-cell transition
/// ring and a 16-cell ring around the hole; each base cell is subdivided into
/// 2^n x 2^n cells by transfinite (Coons) interpolation, with the hole edges
/// following the circle, so the hole boundary is a polygon inscribed in it.
/// Markers: 1 "outer", 2 "hole". Cell count is 40 * 4^n.
inline Mesh generate_square_with_hole(int n, Point center, double radius) {
    if (n < 0) throw MeshError("refinement level must be nonnegative");
    const double wall = std::min({center.x, 1.0 - center.x, center.y, 1.0 - center.y});
    if (!(radius > 0.0) || !(wall > 0.0) || radius >= wall)
        throw MeshError("geometry infeasible: the hole must lie strictly inside the unit square");
    const double a = 0.5 * wall;  // half-size of the inner square
    if (radius >= 0.5 * a)
        throw MeshError("geometry infeasible: hole radius must be below a quarter of its distance to the boundary");

    // Base vertices.
    std::vector<Point> bv;
    const std::array<double, 5> xs{0.0, center.x - a, center.x, center.x + a, 1.0};
    const std::array<double, 5> ys{0.0, center.y - a, center.y, center.y + a, 1.0};
    auto grid = [](int i, int j) { return static_cast<Index>(j * 5 + i); };
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) bv.push_back({xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]});
    // Ring A (16 vertices) and hole (16 vertices), at angles k*pi/8.
    const double ra = 0.7 * a;
    const double rb = 0.6 * a;
    const Index ring0 = static_cast<Index>(bv.size());
    for (int k = 0; k < 16; ++k) {
        const double th = k * pi / 8.0;
        const double r = (k % 4 == 2) ? rb : ra;
        bv.push_back({center.x + r * std::cos(th), center.y + r * std::sin(th)});
    }
    const Index hole0 = static_cast<Index>(bv.size());
    for (int k = 0; k < 16; ++k) {
        const double th = k * pi / 8.0;
        bv.push_back({center.x + radius * std::cos(th), center.y + radius * std::sin(th)});
    }
    auto ring = [ring0](int k) { return ring0 + static_cast<Index>((k + 16) % 16); };
    auto hole = [hole0](int k) { return hole0 + static_cast<Index>((k + 16) % 16); };

    std::vector<std::array<Index, 4>> bc;
    // Outer frame: the 12 cells of the 4x4 grid around the central 2x2 block.
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
            if (i >= 1 && i <= 2 && j >= 1 && j <= 2) continue;
            bc.push_back({grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)});
        }
    // Inner square loop, counterclockwise starting at the right mid-side:
    // (mid, corner) pairs at angles 0, 45, 90, ... degrees.
    const std::array<Index, 8> sq{grid(3, 2), grid(3, 3), grid(2, 3), grid(1, 3),
                                  grid(1, 2), grid(1, 1), grid(2, 1), grid(3, 1)};
    for (int q = 0; q < 4; ++q) {
        const Index mid = sq[static_cast<std::size_t>(2 * q)];
        const Index corner = sq[static_cast<std::size_t>(2 * q + 1)];
        const Index next_mid = sq[static_cast<std::size_t>((2 * q + 2) % 8)];
        const int k = 4 * q;  // ring index under `mid`
        bc.push_back({ring(k), mid, corner, ring(k + 1)});
        bc.push_back({ring(k + 1), corner, ring(k + 3), ring(k + 2)});
        bc.push_back({ring(k + 3), corner, next_mid, ring(k + 4)});
    }
    for (int k = 0; k < 16; ++k) bc.push_back({hole(k), ring(k), ring(k + 1), hole(k + 1)});

    auto make_curve = [&](Index u, Index v) {
        detail::EdgeCurve c;
        c.a = bv[static_cast<std::size_t>(u)];
        c.b = bv[static_cast<std::size_t>(v)];
        if (u >= hole0 && v >= hole0) {
            c.arc = true;
            c.center = center;
            c.radius = radius;
            const int ku = static_cast<int>(u - hole0), kv = static_cast<int>(v - hole0);
            c.theta_a = ku * pi / 8.0;
            c.theta_b = kv * pi / 8.0;
            // take the short way around between consecutive hole vertices
            if (c.theta_b - c.theta_a > pi) c.theta_b -= 2.0 * pi;
            if (c.theta_a - c.theta_b > pi) c.theta_b += 2.0 * pi;
        }
        return c;
    };

    const Index s = Index{1} << n;
    Mesh m;
    m.vertices = bv;
    // Interior points of each base edge, keyed by the sorted vertex pair and
    // stored in the direction from the smaller to the larger vertex id.
    std::map<std::pair<Index, Index>, Index> edge_start;
    auto edge_point = [&](Index u, Index v, Index t) -> Index {
        // t in [0, s] measured from u towards v
        if (t == 0) return u;
        if (t == s) return v;
        const bool fwd = u < v;
        const auto key = fwd ? std::make_pair(u, v) : std::make_pair(v, u);
        auto it = edge_start.find(key);
        if (it == edge_start.end()) {
            const Index start = m.num_vertices();
            const auto curve = make_curve(key.first, key.second);
            for (Index i = 1; i < s; ++i)
                m.vertices.push_back(curve.at(static_cast<double>(i) / static_cast<double>(s)));
            it = edge_start.emplace(key, start).first;
        }
        return it->second + (fwd ? t - 1 : s - t - 1);
    };

    for (const auto& cv : bc) {
        const auto c_bottom = make_curve(cv[0], cv[1]);
        const auto c_right = make_curve(cv[1], cv[2]);
        const auto c_top = make_curve(cv[3], cv[2]);
        const auto c_left = make_curve(cv[0], cv[3]);
        const Point p00 = bv[static_cast<std::size_t>(cv[0])], p10 = bv[static_cast<std::size_t>(cv[1])];
        const Point p11 = bv[static_cast<std::size_t>(cv[2])], p01 = bv[static_cast<std::size_t>(cv[3])];
        std::vector<Index> local(static_cast<std::size_t>((s + 1) * (s + 1)));
        auto lid = [s](Index i, Index j) { return static_cast<std::size_t>(j * (s + 1) + i); };
        for (Index j = 0; j <= s; ++j)
            for (Index i = 0; i <= s; ++i) {
                Index g;
                if (j == 0) g = edge_point(cv[0], cv[1], i);
                else if (j == s) g = edge_point(cv[3], cv[2], i);
                else if (i == 0) g = edge_point(cv[0], cv[3], j);
                else if (i == s) g = edge_point(cv[1], cv[2], j);
                else {
                    const double xi = static_cast<double>(i) / static_cast<double>(s);
                    const double eta = static_cast<double>(j) / static_cast<double>(s);
                    const Point p = (1.0 - eta) * c_bottom.at(xi) + eta * c_top.at(xi) + (1.0 - xi) * c_left.at(eta) +
                                    xi * c_right.at(eta) -
                                    ((1.0 - xi) * (1.0 - eta) * p00 + xi * (1.0 - eta) * p10 + xi * eta * p11 +
                                     (1.0 - xi) * eta * p01);
                    g = m.num_vertices();
                    m.vertices.push_back(p);
                }
                local[lid(i, j)] = g;
            }
        for (Index j = 0; j < s; ++j)
            for (Index i = 0; i < s; ++i)
                m.cells.push_back({local[lid(i, j)], local[lid(i + 1, j)], local[lid(i + 1, j + 1)], local[lid(i, j + 1)]});
    }

    // Boundary edges: outer square sides and the hole polygon.
    auto add_base_boundary = [&](Index u, Index v, int marker) {
        for (Index t = 0; t < s; ++t) m.boundary_edges.push_back({{edge_point(u, v, t), edge_point(u, v, t + 1)}, marker});
    };
    for (int i = 0; i < 4; ++i) add_base_boundary(grid(i, 0), grid(i + 1, 0), 1);
    for (int j = 0; j < 4; ++j) add_base_boundary(grid(4, j), grid(4, j + 1), 1);
    for (int i = 4; i > 0; --i) add_base_boundary(grid(i, 4), grid(i - 1, 4), 1);
    for (int j = 4; j > 0; --j) add_base_boundary(grid(0, j), grid(0, j - 1), 1);
    for (int k = 16; k > 0; --k) add_base_boundary(hole(k), hole(k - 1), 2);
    m.markers[1] = "outer";
    m.markers[2] = "hole";
    remove_unused_vertices(m);  // the base grid's center point lies in the hole
    orient_boundary_edges(m);
    return m;
}

/// Extracts one component per connected chain of equally-marked boundary
/// edges. Closed loops are reported first in order: the loop with positive
/// enclosed area (outer boundary) first, then by ascending marker id; open
/// chains (a marker covering only part of a loop) follow by marker id.
inline std::vector<BoundaryComponent> boundary_loops(const Mesh& m) {
    std::map<int, std::vector<std::size_t>> by_marker;
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) by_marker[m.boundary_edges[e].marker].push_back(e);

    std::vector<BoundaryComponent> out;
    for (const auto& [marker, edges] : by_marker) {
        std::unordered_map<Index, std::size_t> from, to;
        for (auto e : edges) {
            from[m.boundary_edges[e].v[0]] = e;
            to[m.boundary_edges[e].v[1]] = e;
        }
        std::vector<char> used(m.boundary_edges.size(), 0);
        auto sorted = edges;
        std::sort(sorted.begin(), sorted.end(), [&](auto a, auto b) {
            return m.boundary_edges[a].v[0] < m.boundary_edges[b].v[0];
        });
        // Start open chains at their first edge (no predecessor).
        std::vector<std::size_t> starts;
        for (auto e : sorted)
            if (!to.count(m.boundary_edges[e].v[0])) starts.push_back(e);
        for (auto e : sorted) starts.push_back(e);
        for (auto e0 : starts) {
            if (used[e0]) continue;
            BoundaryComponent bc;
            bc.marker = marker;
            bc.closed = to.count(m.boundary_edges[e0].v[0]) > 0;
            std::size_t e = e0;
            while (true) {
                used[e] = 1;
                bc.vertices.push_back(m.boundary_edges[e].v[0]);
                const Index next = m.boundary_edges[e].v[1];
                auto it = from.find(next);
                if (it == from.end()) {
                    bc.vertices.push_back(next);
                    bc.closed = false;
                    break;
                }
                if (used[it->second]) break;
                e = it->second;
            }
            const std::size_t nv = bc.vertices.size();
            const std::size_t ne = bc.closed ? nv : nv - 1;
            for (std::size_t i = 0; i < ne; ++i) {
                const Point p = m.vertices[static_cast<std::size_t>(bc.vertices[i])];
                const Point q = m.vertices[static_cast<std::size_t>(bc.vertices[(i + 1) % nv])];
                bc.arc_length += norm(q - p);
                if (bc.closed) bc.signed_area += 0.5 * cross(p, q);
            }
            out.push_back(std::move(bc));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const BoundaryComponent& a, const BoundaryComponent& b) {
        auto rank = [](const BoundaryComponent& c) { return c.closed ? (c.signed_area > 0.0 ? 0 : 1) : 2; };
        if (rank(a) != rank(b)) return rank(a) < rank(b);
        return a.marker < b.marker;
    });
    return out;
}

// --- text format -----------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string export_mesh(const Mesh& m) {
    std::ostringstream os;
    os << "mesh " << m.dim << "\n";
    os << "vertices " << m.vertices.size() << "\n";
    for (const auto& p : m.vertices) os << format_double(p.x) << ' ' << format_double(p.y) << "\n";
    os << "cells " << m.cells.size() << "\n";
    for (const auto& c : m.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << "\n";
    os << "boundary " << m.boundary_edges.size() << "\n";
    for (const auto& e : m.boundary_edges) os << e.v[0] << ' ' << e.v[1] << ' ' << e.marker << "\n";
    os << "markers " << m.markers.size() << "\n";
    for (const auto& [id, name] : m.markers) os << id << ' ' << name << "\n";
    return os.str();
}

namespace detail {

class MeshReader {
public:
    explicit MeshReader(std::string_view text) : text_(text) {}

    /// Next non-empty, non-comment line split into tokens with their columns.
    bool next_line() {
        while (pos_ < text_.size()) {
            auto end = text_.find('\n', pos_);
            if (end == std::string_view::npos) end = text_.size();
            line_ = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
            ++line_no_;
            tokens_.clear();
            std::size_t i = 0;
            while (i < line_.size()) {
                while (i < line_.size() && std::isspace(static_cast<unsigned char>(line_[i]))) ++i;
                if (i >= line_.size()) break;
                std::size_t j = i;
                while (j < line_.size() && !std::isspace(static_cast<unsigned char>(line_[j]))) ++j;
                tokens_.push_back({line_.substr(i, j - i), i + 1});
                i = j;
            }
            if (tokens_.empty() || tokens_[0].text.front() == '#') continue;
            return true;
        }
        return false;
    }

    void require_line(const char* what) {
        if (!next_line()) fail(line_no_ + 1, 1, std::string("unexpected end of file, expected ") + what);
    }

    std::size_t count() const { return tokens_.size(); }

    void expect_tokens(std::size_t n) const {
        if (tokens_.size() != n)
            fail(line_no_, tokens_.empty() ? 1 : tokens_.back().column,
                 "expected " + std::to_string(n) + " fields, found " + std::to_string(tokens_.size()));
    }

    std::string_view word(std::size_t i) const { return tokens_[i].text; }

    template <class T>
    T number(std::size_t i) const {
        const auto& tok = tokens_[i];
        T value{};
        auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), value);
        if (ec != std::errc() || ptr != tok.text.data() + tok.text.size())
            fail(line_no_, tok.column, "cannot parse '" + std::string(tok.text) + "' as a number");
        return value;
    }

    std::size_t header(std::string_view keyword) {
        require_line(std::string(keyword).c_str());
        if (count() != 2 || word(0) != keyword)
            fail(line_no_, 1, "expected '" + std::string(keyword) + " <count>'");
        const auto n = number<long long>(1);
        if (n < 0) fail(line_no_, tokens_[1].column, "negative count");
        return static_cast<std::size_t>(n);
    }

    std::size_t line_no() const { return line_no_; }
    std::size_t column(std::size_t i) const { return tokens_[i].column; }
    std::string rest_from(std::size_t i) const {
        const auto start = tokens_[i].column - 1;
        auto s = line_.substr(start);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return std::string(s);
    }

    [[noreturn]] static void fail(std::size_t line, std::size_t col, const std::string& msg) {
        throw MeshError("parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
    }

private:
    struct Token {
        std::string_view text;
        std::size_t column;
    };
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
    std::string_view line_;
    std::vector<Token> tokens_;
};

}  // namespace detail

/// Parses the text mesh format and checks every Mesh invariant.
inline Mesh import_mesh(std::string_view text) {
    detail::MeshReader r(text);
    Mesh m;
    r.require_line("'mesh <dim>'");
    if (r.count() != 2 || r.word(0) != "mesh") detail::MeshReader::fail(r.line_no(), 1, "expected 'mesh <dim>'");
    m.dim = r.number<int>(1);
    if (m.dim != 2) detail::MeshReader::fail(r.line_no(), r.column(1), "only dimension 2 is supported");

    const auto nv = r.header("vertices");
    m.vertices.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        r.require_line("a vertex");
        r.expect_tokens(2);
        m.vertices[i] = {r.number<double>(0), r.number<double>(1)};
    }
    const auto nc = r.header("cells");
    m.cells.resize(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        r.require_line("a cell");
        r.expect_tokens(4);
        for (std::size_t k = 0; k < 4; ++k) {
            const auto v = r.number<long long>(k);
            if (v < 0 || static_cast<std::size_t>(v) >= nv)
                detail::MeshReader::fail(r.line_no(), r.column(k), "vertex index out of range");
            m.cells[i][k] = v;
        }
    }
    const auto ne = r.header("boundary");
    m.boundary_edges.resize(ne);
    for (std::size_t i = 0; i < ne; ++i) {
        r.require_line("a boundary edge");
        r.expect_tokens(3);
        for (std::size_t k = 0; k < 2; ++k) {
            const auto v = r.number<long long>(k);
            if (v < 0 || static_cast<std::size_t>(v) >= nv)
                detail::MeshReader::fail(r.line_no(), r.column(k), "vertex index out of range");
            m.boundary_edges[i].v[k] = v;
        }
        m.boundary_edges[i].marker = r.number<int>(2);
    }
    const auto nm = r.header("markers");
    for (std::size_t i = 0; i < nm; ++i) {
        r.require_line("a marker");
        if (r.count() < 2) detail::MeshReader::fail(r.line_no(), 1, "expected '<id> <name>'");
        m.markers[r.number<int>(0)] = r.rest_from(1);
    }
    if (r.next_line()) detail::MeshReader::fail(r.line_no(), 1, "trailing content after markers section");

    for (std::size_t c = 0; c < m.cells.size(); ++c)
        if (!detail::quad_is_ccw(m, static_cast<Index>(c)))
            throw MeshError("topology error: cell " + std::to_string(c) + " is inverted or clockwise");
    orient_boundary_edges(m);
    m.validate();
    return m;
}

}  // namespace stokes_rec
