#pragma once

// Taylor-Hood Q2/Q1 degrees of freedom. Velocity dofs are split into an
// interior block (nodes off the unknown boundary, including constrained
// known-boundary nodes) followed by the unknown-boundary block.

#include "stokes_recovery/element.hpp"
#include "stokes_recovery/mesh.hpp"

#include <numeric>
#include <set>

namespace stokes_rec {

enum class NodeKind : std::uint8_t { vertex = 0, edge = 1, center = 2 };

class DofLayout {
public:
    const Mesh* mesh = nullptr;
    int d = 2;
    std::set<int> unknown_markers;

    // Q2 nodes: vertices [0,V), edge midpoints [V,V+E), cell centers after.
    std::vector<Point> node_coords;
    std::vector<NodeKind> node_kind;
    std::vector<std::array<Index, 2>> edges;          // vertex pairs of edge nodes
    std::vector<std::array<Index, 9>> cell_nodes;     // 3x3 lattice per cell
    std::vector<std::array<Index, 4>> cell_edges;     // bottom, right, top, left

    Index N = 0;    // interior block size per component
    Index N_b = 0;  // unknown-boundary block size per component
    std::vector<Index> node_to_block;  // index inside its block
    std::vector<char> node_on_unknown;
    std::vector<char> node_constrained;  // on the known boundary
    std::vector<Index> interior_nodes;   // block index -> node
    std::vector<Index> boundary_nodes;

    Index num_nodes() const { return static_cast<Index>(node_coords.size()); }
    Index num_pressure() const { return mesh->num_vertices(); }
    Index num_velocity() const { return d * (N + N_b); }
    Index interior_size() const { return d * N; }
    Index boundary_size() const { return d * N_b; }
    Index total_size() const { return num_velocity() + num_pressure(); }

    /// Position of (node, component) in the full velocity vector laid out as
    /// [interior comp 0, interior comp 1, boundary comp 0, boundary comp 1].
    Index velocity_index(Index node, int comp) const {
        const Index k = node_to_block[static_cast<std::size_t>(node)];
        return node_on_unknown[static_cast<std::size_t>(node)] ? d * N + comp * N_b + k : comp * N + k;
    }

    bool is_constrained_index(Index vi) const {
        if (vi >= d * N) return false;
        return node_constrained[static_cast<std::size_t>(interior_nodes[static_cast<std::size_t>(vi % N)])] != 0;
    }

    std::array<Point, 4> cell_vertices(Index c) const {
        const auto& cv = mesh->cells[static_cast<std::size_t>(c)];
        return {mesh->vertices[static_cast<std::size_t>(cv[0])], mesh->vertices[static_cast<std::size_t>(cv[1])],
                mesh->vertices[static_cast<std::size_t>(cv[2])], mesh->vertices[static_cast<std::size_t>(cv[3])]};
    }

    Index edge_node(Index e) const { return mesh->num_vertices() + e; }
};

/// One boundary edge of the unknown boundary with its three Q2 trace nodes
/// (start, midpoint, end) mapped to boundary-block indices, or -1 where the
/// node is constrained (endpoints shared with the known boundary).
struct TraceSegment {
    std::array<Index, 3> nodes{};
    std::array<Index, 3> dof{};
    double length = 0.0;
    Point a, b;
    Index cell = -1;
    int side = -1;  // local side of `cell`: bottom, right, top, left
};

struct TraceMesh {
    std::vector<TraceSegment> segments;
    Index size = 0;

    double total_length() const {
        double s = 0.0;
        for (const auto& seg : segments) s += seg.length;
        return s;
    }
};

/// Builds the Taylor-Hood layout; every boundary edge carrying a marker from
/// `unknown_markers` belongs to the unknown boundary, the rest to the known one.
inline DofLayout build_layout(const Mesh& mesh, const std::set<int>& unknown_markers) {
    if (unknown_markers.empty()) throw MeshError("at least one unknown boundary marker is required");
    for (int mk : unknown_markers)
        if (!mesh.markers.count(mk)) throw MeshError("unknown boundary marker id " + std::to_string(mk));

    DofLayout L;
    L.mesh = &mesh;
    L.unknown_markers = unknown_markers;
    const Index V = mesh.num_vertices();

    std::unordered_map<std::uint64_t, Index> edge_id;
    edge_id.reserve(mesh.cells.size() * 2);
    L.cell_edges.resize(mesh.cells.size());
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
        const auto& cv = mesh.cells[c];
        for (int i = 0; i < 4; ++i) {
            const Index a = cv[i], b = cv[(i + 1) % 4];
            auto [it, inserted] = edge_id.emplace(detail::edge_key(a, b), static_cast<Index>(L.edges.size()));
            if (inserted) L.edges.push_back({std::min(a, b), std::max(a, b)});
            L.cell_edges[c][static_cast<std::size_t>(i)] = it->second;
        }
    }
    const Index E = static_cast<Index>(L.edges.size());
    const Index C = mesh.num_cells();
    L.node_coords.reserve(static_cast<std::size_t>(V + E + C));
    for (const auto& p : mesh.vertices) {
        L.node_coords.push_back(p);
        L.node_kind.push_back(NodeKind::vertex);
    }
    for (const auto& e : L.edges) {
        L.node_coords.push_back(0.5 * (mesh.vertices[static_cast<std::size_t>(e[0])] +
                                       mesh.vertices[static_cast<std::size_t>(e[1])]));
        L.node_kind.push_back(NodeKind::edge);
    }
    for (Index c = 0; c < C; ++c) {
        const auto v = L.cell_vertices(c);
        L.node_coords.push_back(0.25 * (v[0] + v[1] + v[2] + v[3]));
        L.node_kind.push_back(NodeKind::center);
    }
    L.cell_nodes.resize(static_cast<std::size_t>(C));
    for (Index c = 0; c < C; ++c) {
        const auto& cv = mesh.cells[static_cast<std::size_t>(c)];
        const auto& ce = L.cell_edges[static_cast<std::size_t>(c)];
        auto& n = L.cell_nodes[static_cast<std::size_t>(c)];
        n[q2_local(0, 0)] = cv[0];
        n[q2_local(2, 0)] = cv[1];
        n[q2_local(2, 2)] = cv[2];
        n[q2_local(0, 2)] = cv[3];
        n[q2_local(1, 0)] = V + ce[0];
        n[q2_local(2, 1)] = V + ce[1];
        n[q2_local(1, 2)] = V + ce[2];
        n[q2_local(0, 1)] = V + ce[3];
        n[q2_local(1, 1)] = V + E + c;
    }

    const Index nn = L.num_nodes();
    std::vector<char> on_unknown_edge(static_cast<std::size_t>(nn), 0), on_known(static_cast<std::size_t>(nn), 0);
    for (const auto& be : mesh.boundary_edges) {
        const Index e = edge_id.at(detail::edge_key(be.v[0], be.v[1]));
        auto& flag = unknown_markers.count(be.marker) ? on_unknown_edge : on_known;
        flag[static_cast<std::size_t>(be.v[0])] = 1;
        flag[static_cast<std::size_t>(be.v[1])] = 1;
        flag[static_cast<std::size_t>(V + e)] = 1;
    }
    L.node_on_unknown.assign(static_cast<std::size_t>(nn), 0);
    L.node_constrained = on_known;
    for (Index i = 0; i < nn; ++i)
        L.node_on_unknown[static_cast<std::size_t>(i)] = on_unknown_edge[static_cast<std::size_t>(i)] && !on_known[static_cast<std::size_t>(i)];

    std::vector<Index> order(static_cast<std::size_t>(nn));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        const Point pa = L.node_coords[static_cast<std::size_t>(a)], pb = L.node_coords[static_cast<std::size_t>(b)];
        if (pa.y != pb.y) return pa.y < pb.y;
        if (pa.x != pb.x) return pa.x < pb.x;
        const auto ka = L.node_kind[static_cast<std::size_t>(a)], kb = L.node_kind[static_cast<std::size_t>(b)];
        if (ka != kb) return ka < kb;
        return a < b;
    });
    L.node_to_block.assign(static_cast<std::size_t>(nn), -1);
    for (Index i : order) {
        auto& block = L.node_on_unknown[static_cast<std::size_t>(i)] ? L.boundary_nodes : L.interior_nodes;
        L.node_to_block[static_cast<std::size_t>(i)] = static_cast<Index>(block.size());
        block.push_back(i);
    }
    L.N = static_cast<Index>(L.interior_nodes.size());
    L.N_b = static_cast<Index>(L.boundary_nodes.size());
    return L;
}

inline TraceMesh trace_mesh(const DofLayout& L) {
    const Mesh& mesh = *L.mesh;
    std::unordered_map<std::uint64_t, std::pair<Index, int>> owner;
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        const auto& cv = mesh.cells[static_cast<std::size_t>(c)];
        for (int i = 0; i < 4; ++i) owner[detail::edge_key(cv[i], cv[(i + 1) % 4])] = {c, i};
    }
    TraceMesh T;
    T.size = L.N_b;
    for (const auto& comp : boundary_loops(mesh)) {
        if (!L.unknown_markers.count(comp.marker)) continue;
        const std::size_t nv = comp.vertices.size();
        for (std::size_t i = 0; i < comp.edge_count(); ++i) {
            TraceSegment s;
            const Index a = comp.vertices[i], b = comp.vertices[(i + 1) % nv];
            const auto [c, side] = owner.at(detail::edge_key(a, b));
            s.cell = c;
            s.side = side;
            const Index mid = L.cell_nodes[static_cast<std::size_t>(c)][static_cast<std::size_t>(
                side == 0 ? q2_local(1, 0) : side == 1 ? q2_local(2, 1) : side == 2 ? q2_local(1, 2) : q2_local(0, 1))];
            s.nodes = {a, mid, b};
            for (int k = 0; k < 3; ++k) {
                const Index node = s.nodes[static_cast<std::size_t>(k)];
                s.dof[static_cast<std::size_t>(k)] =
                    L.node_on_unknown[static_cast<std::size_t>(node)] ? L.node_to_block[static_cast<std::size_t>(node)] : -1;
            }
            s.a = mesh.vertices[static_cast<std::size_t>(a)];
            s.b = mesh.vertices[static_cast<std::size_t>(b)];
            s.length = norm(s.b - s.a);
            T.segments.push_back(s);
        }
    }
    return T;
}

/// Q2 nodal interpolation of a vector field into the full velocity layout.
template <class F>
Vector interpolate_velocity(const DofLayout& L, F&& u) {
    Vector v(L.num_velocity());
    for (Index i = 0; i < L.num_nodes(); ++i) {
        const auto val = u(L.node_coords[static_cast<std::size_t>(i)]);
        for (int c = 0; c < L.d; ++c) v[L.velocity_index(i, c)] = val[static_cast<std::size_t>(c)];
    }
    return v;
}

/// Q1 nodal interpolation of a scalar field (pressure dofs are vertex ids).
template <class F>
Vector interpolate_pressure(const DofLayout& L, F&& p) {
    Vector v(L.num_pressure());
    for (Index i = 0; i < L.num_pressure(); ++i) v[i] = p(L.mesh->vertices[static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace stokes_rec
