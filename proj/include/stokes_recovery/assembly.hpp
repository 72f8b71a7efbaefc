#pragma once

// Finite element matrices of the Stokes recovery problem. Everything is first
// assembled over the full velocity layout and then cut into the interior and
// unknown-boundary blocks used by the decoupled solver.

#include "stokes_recovery/femspace.hpp"

#include <ostream>

namespace stokes_rec {

struct OperatorBundle {
    const DofLayout* layout = nullptr;

    // Full-layout operators: k(.,.) on all velocity dofs and b(.,.).
    SparseMatrix K_full;
    SparseMatrix B_full;

    SparseMatrix K0;  // dN x dN, identity rows/cols at constrained dofs
    SparseMatrix Kb;  // dN x dN_b, constrained rows dropped
    SparseMatrix B0;  // Ntilde x dN, constrained columns dropped
    SparseMatrix Bb;  // Ntilde x dN_b
    Vector D;         // dN_b, b(phi_{N+i}, 1)
    SparseMatrix M;   // N_b x N_b boundary mass
    SparseMatrix L;   // N_b x N_b boundary stiffness
    Vector pressure_mass;  // integrals of the Q1 basis functions
};

namespace detail {

// 2 eps(phi_a e_c) : eps(phi_b e_e) = delta_ce grad a . grad b + d_e(phi_a) d_c(phi_b)
inline void viscous_cell(const DofLayout& L, Index c, const ReferenceTable& ref, std::vector<Triplet>& kt,
                         std::vector<Triplet>& bt, Vector& pmass) {
    const auto verts = L.cell_vertices(c);
    const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
    const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
    double ke[18][18] = {};
    double be[4][18] = {};
    for (std::size_t q = 0; q < ref.points.size(); ++q) {
        const auto mp = map_point(verts, ref.shapes[q]);
        const double w = ref.points[q].w * mp.det;
        for (int a = 0; a < 9; ++a) {
            const double ga[2] = {mp.q2_dx[a], mp.q2_dy[a]};
            for (int b = 0; b < 9; ++b) {
                const double gb[2] = {mp.q2_dx[b], mp.q2_dy[b]};
                const double gg = ga[0] * gb[0] + ga[1] * gb[1];
                for (int ci = 0; ci < 2; ++ci)
                    for (int ce = 0; ce < 2; ++ce)
                        ke[ci * 9 + a][ce * 9 + b] += w * ((ci == ce ? gg : 0.0) + ga[ce] * gb[ci]);
            }
            for (int i = 0; i < 4; ++i) {
                be[i][a] -= w * mp.q1[i] * ga[0];
                be[i][9 + a] -= w * mp.q1[i] * ga[1];
            }
        }
        for (int i = 0; i < 4; ++i) pmass[cv[i]] += w * mp.q1[i];
    }
    Index gi[18];
    for (int ci = 0; ci < 2; ++ci)
        for (int a = 0; a < 9; ++a) gi[ci * 9 + a] = L.velocity_index(nodes[static_cast<std::size_t>(a)], ci);
    for (int i = 0; i < 18; ++i)
        for (int j = 0; j < 18; ++j)
            if (ke[i][j] != 0.0) kt.emplace_back(gi[i], gi[j], ke[i][j]);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 18; ++j)
            if (be[i][j] != 0.0) bt.emplace_back(cv[i], gi[j], be[i][j]);
}

}  // namespace detail

/// Boundary mass and Laplace-Beltrami stiffness on the trace mesh (scalar,
/// one copy per velocity component), 3-point Gauss per segment.
inline void assemble_trace_matrices(const TraceMesh& T, SparseMatrix& M, SparseMatrix& Lmat) {
    const auto g = gauss_rule(3);
    std::vector<Triplet> mt, lt;
    for (const auto& s : T.segments) {
        const double h = s.length;
        if (!(h > 0.0)) throw Error("assembly", "degenerate boundary segment");
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const auto v = lagrange2(g.x[q]);
            const auto dv = lagrange2_d(g.x[q]);
            for (int i = 0; i < 3; ++i) {
                const Index di = s.dof[static_cast<std::size_t>(i)];
                if (di < 0) continue;
                for (int j = 0; j < 3; ++j) {
                    const Index dj = s.dof[static_cast<std::size_t>(j)];
                    if (dj < 0) continue;
                    mt.emplace_back(di, dj, g.w[q] * v[i] * v[j] * 0.5 * h);
                    lt.emplace_back(di, dj, g.w[q] * dv[i] * dv[j] * 2.0 / h);
                }
            }
        }
    }
    M.resize(T.size, T.size);
    Lmat.resize(T.size, T.size);
    M.setFromTriplets(mt.begin(), mt.end());
    Lmat.setFromTriplets(lt.begin(), lt.end());
}

inline OperatorBundle assemble_bundle(const DofLayout& L, const TraceMesh& T) {
    OperatorBundle ob;
    ob.layout = &L;
    const ReferenceTable ref(3);
    const Index nvel = L.num_velocity();
    const Index np = L.num_pressure();
    std::vector<Triplet> kt, bt;
    kt.reserve(static_cast<std::size_t>(L.mesh->num_cells()) * 324);
    bt.reserve(static_cast<std::size_t>(L.mesh->num_cells()) * 72);
    ob.pressure_mass = Vector::Zero(np);
    for (Index c = 0; c < L.mesh->num_cells(); ++c) detail::viscous_cell(L, c, ref, kt, bt, ob.pressure_mass);
    ob.K_full.resize(nvel, nvel);
    ob.K_full.setFromTriplets(kt.begin(), kt.end());
    ob.B_full.resize(np, nvel);
    ob.B_full.setFromTriplets(bt.begin(), bt.end());

    const Index dN = L.interior_size();
    const Index dNb = L.boundary_size();
    std::vector<char> constrained(static_cast<std::size_t>(dN));
    for (Index i = 0; i < dN; ++i) constrained[static_cast<std::size_t>(i)] = L.is_constrained_index(i);

    std::vector<Triplet> k0, kb, b0, bb;
    for (int col = 0; col < ob.K_full.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(ob.K_full, col); it; ++it) {
            const Index r = it.row(), cidx = it.col();
            if (r >= dN) continue;
            if (constrained[static_cast<std::size_t>(r)]) continue;
            if (cidx < dN) {
                if (!constrained[static_cast<std::size_t>(cidx)]) k0.emplace_back(r, cidx, it.value());
            } else {
                kb.emplace_back(r, cidx - dN, it.value());
            }
        }
    for (Index i = 0; i < dN; ++i)
        if (constrained[static_cast<std::size_t>(i)]) k0.emplace_back(i, i, 1.0);
    for (int col = 0; col < ob.B_full.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(ob.B_full, col); it; ++it) {
            const Index cidx = it.col();
            if (cidx < dN) {
                if (!constrained[static_cast<std::size_t>(cidx)]) b0.emplace_back(it.row(), cidx, it.value());
            } else {
                bb.emplace_back(it.row(), cidx - dN, it.value());
            }
        }
    ob.K0.resize(dN, dN);
    ob.K0.setFromTriplets(k0.begin(), k0.end());
    ob.Kb.resize(dN, dNb);
    ob.Kb.setFromTriplets(kb.begin(), kb.end());
    ob.B0.resize(np, dN);
    ob.B0.setFromTriplets(b0.begin(), b0.end());
    ob.Bb.resize(np, dNb);
    ob.Bb.setFromTriplets(bb.begin(), bb.end());
    ob.D = ob.Bb.transpose() * Vector::Ones(np);
    assemble_trace_matrices(T, ob.M, ob.L);
    return ob;
}

/// Load vector of a body force over the full velocity layout, 3x3 Gauss.
template <class F>
Vector assemble_body_load_full(const DofLayout& L, F&& f) {
    const ReferenceTable ref(3);
    Vector out = Vector::Zero(L.num_velocity());
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto verts = L.cell_vertices(c);
        const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < ref.points.size(); ++q) {
            const auto mp = map_point(verts, ref.shapes[q]);
            const auto fv = f(mp.x);
            if (!std::isfinite(fv[0]) || !std::isfinite(fv[1]))
                throw Error("assembly", "non-finite body force at (" + std::to_string(mp.x.x) + ", " +
                                            std::to_string(mp.x.y) + ")");
            const double w = ref.points[q].w * mp.det;
            for (int a = 0; a < 9; ++a)
                for (int ci = 0; ci < 2; ++ci)
                    out[L.velocity_index(nodes[static_cast<std::size_t>(a)], ci)] += w * mp.q2[a] * fv[static_cast<std::size_t>(ci)];
        }
    }
    return out;
}

/// Interior-block load (length dN) with constrained entries zeroed.
template <class F>
Vector assemble_body_load(const DofLayout& L, F&& f) {
    Vector full = assemble_body_load_full(L, std::forward<F>(f));
    Vector out = full.head(L.interior_size());
    for (Index i = 0; i < out.size(); ++i)
        if (L.is_constrained_index(i)) out[i] = 0.0;
    return out;
}

/// Coordinate-format dump: `matrix rows cols nnz` then `i j value` lines.
inline void dump_matrix(std::ostream& os, const SparseMatrix& A) {
    os << "matrix " << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << "\n";
    SparseMatrix R = A;  // column-major storage; emit in row order for readability
    Eigen::SparseMatrix<double, Eigen::RowMajor> rm = R;
    for (int r = 0; r < rm.outerSize(); ++r)
        for (decltype(rm)::InnerIterator it(rm, r); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << "\n";
}

}  // namespace stokes_rec
