#pragma once

// Reference-element machinery: Gauss rules, Q2/Q1 shape functions on
// [-1,1]^2 and the bilinear cell map.

#include "stokes_recovery/common.hpp"

#include <array>
#include <vector>

namespace stokes_rec {

struct GaussRule1D {
    std::vector<double> x;
    std::vector<double> w;
};

inline GaussRule1D gauss_rule(int npts) {
    switch (npts) {
        case 1: return {{0.0}, {2.0}};
        case 2: {
            const double a = 1.0 / std::sqrt(3.0);
            return {{-a, a}, {1.0, 1.0}};
        }
        case 3: {
            const double a = std::sqrt(0.6);
            return {{-a, 0.0, a}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
        }
        case 4: {
            const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
            const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
            const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
            const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
            return {{-b, -a, a, b}, {wb, wa, wa, wb}};
        }
        case 5: {
            const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
            const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
            const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
            const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
            return {{-b, -a, 0.0, a, b}, {wb, wa, 128.0 / 225.0, wa, wb}};
        }
        default: throw Error("quadrature", "unsupported Gauss rule size " + std::to_string(npts));
    }
}

struct QuadPoint2D {
    double xi, eta, w;
};

inline std::vector<QuadPoint2D> tensor_rule(int npts) {
    const auto g = gauss_rule(npts);
    std::vector<QuadPoint2D> q;
    for (std::size_t j = 0; j < g.x.size(); ++j)
        for (std::size_t i = 0; i < g.x.size(); ++i) q.push_back({g.x[i], g.x[j], g.w[i] * g.w[j]});
    return q;
}

// 1D quadratic Lagrange basis on the nodes -1, 0, 1.
inline std::array<double, 3> lagrange2(double t) { return {0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)}; }
inline std::array<double, 3> lagrange2_d(double t) { return {t - 0.5, -2.0 * t, t + 0.5}; }

/// Local Q2 node (a,b) in the 3x3 lattice, index a + 3b. Corners are
/// (0,0),(2,0),(2,2),(0,2) matching cell vertex order.
inline constexpr int q2_local(int a, int b) { return a + 3 * b; }

struct ShapeValues {
    std::array<double, 9> q2{};
    std::array<double, 9> q2_dxi{};
    std::array<double, 9> q2_deta{};
    std::array<double, 4> q1{};
    std::array<double, 4> q1_dxi{};
    std::array<double, 4> q1_deta{};
};

inline ShapeValues shape_values(double xi, double eta) {
    ShapeValues s;
    const auto lx = lagrange2(xi), ly = lagrange2(eta);
    const auto dx = lagrange2_d(xi), dy = lagrange2_d(eta);
    for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a) {
            const int k = q2_local(a, b);
            s.q2[k] = lx[a] * ly[b];
            s.q2_dxi[k] = dx[a] * ly[b];
            s.q2_deta[k] = lx[a] * dy[b];
        }
    constexpr std::array<double, 4> cx{-1.0, 1.0, 1.0, -1.0};
    constexpr std::array<double, 4> cy{-1.0, -1.0, 1.0, 1.0};
    for (int i = 0; i < 4; ++i) {
        s.q1[i] = 0.25 * (1.0 + cx[i] * xi) * (1.0 + cy[i] * eta);
        s.q1_dxi[i] = 0.25 * cx[i] * (1.0 + cy[i] * eta);
        s.q1_deta[i] = 0.25 * cy[i] * (1.0 + cx[i] * xi);
    }
    return s;
}

/// Bilinear map data at one reference point: physical position, Jacobian
/// determinant and physical gradients of all shape functions.
struct MappedPoint {
    Point x;
    double det = 0.0;
    std::array<double, 9> q2{};
    std::array<double, 9> q2_dx{};
    std::array<double, 9> q2_dy{};
    std::array<double, 4> q1{};
    std::array<double, 4> q1_dx{};
    std::array<double, 4> q1_dy{};
};

inline MappedPoint map_point(const std::array<Point, 4>& v, const ShapeValues& s) {
    MappedPoint m;
    double j11 = 0, j12 = 0, j21 = 0, j22 = 0;  // d(x,y)/d(xi,eta)
    for (int i = 0; i < 4; ++i) {
        m.x.x += s.q1[i] * v[i].x;
        m.x.y += s.q1[i] * v[i].y;
        j11 += s.q1_dxi[i] * v[i].x;
        j12 += s.q1_deta[i] * v[i].x;
        j21 += s.q1_dxi[i] * v[i].y;
        j22 += s.q1_deta[i] * v[i].y;
    }
    m.det = j11 * j22 - j12 * j21;
    if (!(m.det > 0.0)) throw Error("assembly", "non-positive cell Jacobian");
    const double i11 = j22 / m.det, i12 = -j12 / m.det, i21 = -j21 / m.det, i22 = j11 / m.det;
    // grad_x = J^{-T} grad_xi
    for (int k = 0; k < 9; ++k) {
        m.q2[k] = s.q2[k];
        m.q2_dx[k] = i11 * s.q2_dxi[k] + i21 * s.q2_deta[k];
        m.q2_dy[k] = i12 * s.q2_dxi[k] + i22 * s.q2_deta[k];
    }
    for (int k = 0; k < 4; ++k) {
        m.q1[k] = s.q1[k];
        m.q1_dx[k] = i11 * s.q1_dxi[k] + i21 * s.q1_deta[k];
        m.q1_dy[k] = i12 * s.q1_dxi[k] + i22 * s.q1_deta[k];
    }
    return m;
}

/// Shape values of a tensor rule, computed once and reused for every cell.
struct ReferenceTable {
    std::vector<QuadPoint2D> points;
    std::vector<ShapeValues> shapes;

    explicit ReferenceTable(int npts) : points(tensor_rule(npts)) {
        for (const auto& q : points) shapes.push_back(shape_values(q.xi, q.eta));
    }
};

}  // namespace stokes_rec
