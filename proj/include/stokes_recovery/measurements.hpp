#pragma once

// Gaussian local-average functionals
//   lambda_{z,i}(v, q) = 1/sqrt(2 pi r^2) int_Omega exp(-|x-z|^2 / (2 r^2)) psi_i(x) dx
// with psi = (v_1, v_2, q), integrated with a fixed 5x5 Gauss rule per cell
// for analytic fields, discrete fields and assembled vectors alike.

#include "stokes_recovery/femspace.hpp"

#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace stokes_rec {

inline constexpr int functional_quadrature_points = 5;

struct Functional {
    Point center;
    int component = 1;  // 1..d velocity, d+1 pressure
    double r = 0.1;

    bool is_pressure() const { return component == 3; }
    double prefactor() const { return 1.0 / std::sqrt(2.0 * pi * r * r); }
    double weight(Point x) const {
        const Point d = x - center;
        return prefactor() * std::exp(-dot(d, d) / (2.0 * r * r));
    }

    friend bool operator==(const Functional&, const Functional&) = default;
};

struct MeasurementSet {
    std::vector<Functional> functionals;
    std::optional<Vector> values;

    std::size_t size() const { return functionals.size(); }
};

/// Closed-form velocity/pressure pair.
struct AnalyticField {
    std::function<std::array<double, 2>(Point)> u;
    std::function<double(Point)> p;
};

/// Discrete Taylor-Hood field: velocity in the full layout, pressure stored as
/// a coefficient vector plus an extra constant added on evaluation.
struct DiscreteField {
    const DofLayout* layout = nullptr;
    Vector velocity;
    Vector pressure;
    double pressure_shift = 0.0;

    static DiscreteField zero(const DofLayout& L) {
        return {&L, Vector::Zero(L.num_velocity()), Vector::Zero(L.num_pressure()), 0.0};
    }
};

/// Physical quadrature points (position, weight * |J|) of the 5x5 rule on
/// every cell; reference shape values are shared across cells.
struct FunctionalQuadrature {
    ReferenceTable ref{functional_quadrature_points};
    std::vector<Point> x;
    std::vector<double> wdet;

    explicit FunctionalQuadrature(const DofLayout& L) {
        const std::size_t nq = ref.points.size();
        x.reserve(static_cast<std::size_t>(L.mesh->num_cells()) * nq);
        wdet.reserve(x.capacity());
        for (Index c = 0; c < L.mesh->num_cells(); ++c) {
            const auto v = L.cell_vertices(c);
            for (std::size_t q = 0; q < nq; ++q) {
                const auto mp = map_point(v, ref.shapes[q]);
                x.push_back(mp.x);
                wdet.push_back(ref.points[q].w * mp.det);
            }
        }
    }
    std::size_t per_cell() const { return ref.points.size(); }
};

/// Exact hole geometry for grid filtering.
struct Circle {
    Point center;
    double radius;
};

namespace detail {

inline bool inside_polygon(const Mesh& m, const std::vector<Index>& loop, Point p) {
    bool in = false;
    const std::size_t n = loop.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = m.vertices[static_cast<std::size_t>(loop[i])];
        const Point b = m.vertices[static_cast<std::size_t>(loop[j])];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

}  // namespace detail

/// Centers (i/(l+1), j/(l+1)), i inner. Points strictly inside one of the
/// given hole circles are dropped; without circles the mesh's hole loops
/// (clockwise closed boundary loops) are used as polygons.
inline std::vector<Point> gaussian_centers_grid(int l, const Mesh& mesh, const std::vector<Circle>& holes = {}) {
    if (l < 1) throw Error("measurements", "grid size must be at least 1");
    std::vector<std::vector<Index>> hole_loops;
    if (holes.empty())
        for (const auto& comp : boundary_loops(mesh))
            if (comp.closed && comp.signed_area < 0.0) hole_loops.push_back(comp.vertices);
    std::vector<Point> out;
    for (int j = 1; j <= l; ++j)
        for (int i = 1; i <= l; ++i) {
            const Point z{static_cast<double>(i) / (l + 1), static_cast<double>(j) / (l + 1)};
            bool drop = false;
            for (const auto& h : holes) drop = drop || norm(z - h.center) < h.radius;
            for (const auto& loop : hole_loops) drop = drop || detail::inside_polygon(mesh, loop, z);
            if (!drop) out.push_back(z);
        }
    return out;
}

/// Builds a set of velocity functionals (both components per center) followed
/// by pressure functionals, the ordering used throughout the experiments.
inline MeasurementSet make_measurement_set(const std::vector<Point>& velocity_centers,
                                           const std::vector<Point>& pressure_centers, double r = 0.1) {
    MeasurementSet s;
    for (int c = 1; c <= 2; ++c)
        for (const auto& z : velocity_centers) s.functionals.push_back({z, c, r});
    for (const auto& z : pressure_centers) s.functionals.push_back({z, 3, r});
    return s;
}

inline double apply_to_analytic(const Functional& f, const AnalyticField& field, const FunctionalQuadrature& Q) {
    double sum = 0.0;
    for (std::size_t q = 0; q < Q.x.size(); ++q) {
        const double g = f.weight(Q.x[q]);
        if (g == 0.0) continue;
        const double val = f.is_pressure() ? field.p(Q.x[q]) : field.u(Q.x[q])[static_cast<std::size_t>(f.component - 1)];
        if (!std::isfinite(val)) throw Error("measurements", "non-finite field value");
        sum += Q.wdet[q] * g * val;
    }
    return sum;
}

inline double apply_to_discrete(const Functional& f, const DiscreteField& field, const FunctionalQuadrature& Q) {
    const DofLayout& L = *field.layout;
    if (field.velocity.size() != L.num_velocity() || field.pressure.size() != L.num_pressure())
        throw Error("measurements", "field does not match the layout");
    const std::size_t nq = Q.per_cell();
    double sum = 0.0;
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
        const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = static_cast<std::size_t>(c) * nq + q;
            const double g = f.weight(Q.x[k]);
            if (g == 0.0) continue;
            const auto& sh = Q.ref.shapes[q];
            double val = 0.0;
            if (f.is_pressure()) {
                for (int i = 0; i < 4; ++i) val += sh.q1[i] * field.pressure[cv[i]];
                val += field.pressure_shift;
            } else {
                for (int a = 0; a < 9; ++a)
                    val += sh.q2[a] * field.velocity[L.velocity_index(nodes[static_cast<std::size_t>(a)], f.component - 1)];
            }
            sum += Q.wdet[k] * g * val;
        }
    }
    return sum;
}

/// lambda applied to every velocity basis function (full layout) and every
/// pressure basis function.
struct FullFunctionalVectors {
    Vector velocity;
    Vector pressure;
};

inline FullFunctionalVectors full_functional_vectors(const DofLayout& L, const Functional& f, const FunctionalQuadrature& Q) {
    FullFunctionalVectors out{Vector::Zero(L.num_velocity()), Vector::Zero(L.num_pressure())};
    const std::size_t nq = Q.per_cell();
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
        const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t k = static_cast<std::size_t>(c) * nq + q;
            const double g = f.weight(Q.x[k]) * Q.wdet[k];
            if (g == 0.0) continue;
            const auto& sh = Q.ref.shapes[q];
            if (f.is_pressure()) {
                for (int i = 0; i < 4; ++i) out.pressure[cv[i]] += g * sh.q1[i];
            } else {
                for (int a = 0; a < 9; ++a)
                    out.velocity[L.velocity_index(nodes[static_cast<std::size_t>(a)], f.component - 1)] += g * sh.q2[a];
            }
        }
    }
    return out;
}

/// lambda restricted to the solver blocks: F0 over the interior block with
/// constrained entries zeroed, Fb over the unknown-boundary block, G over Q1.
struct FunctionalVectors {
    Vector F0;
    Vector Fb;
    Vector G;
};

inline FunctionalVectors functional_vectors(const DofLayout& L, const Functional& f, const FunctionalQuadrature& Q) {
    auto full = full_functional_vectors(L, f, Q);
    FunctionalVectors out;
    out.F0 = full.velocity.head(L.interior_size());
    out.Fb = full.velocity.tail(L.boundary_size());
    for (Index i = 0; i < out.F0.size(); ++i)
        if (L.is_constrained_index(i)) out.F0[i] = 0.0;
    out.G = std::move(full.pressure);
    return out;
}

/// Evaluates every functional of the set on an analytic field in one sweep
/// over the quadrature points.
inline Vector measurement_vector(const MeasurementSet& set, const AnalyticField& field, const FunctionalQuadrature& Q) {
    Vector w = Vector::Zero(static_cast<Index>(set.size()));
    if (set.size() == 0) return w;
    bool need_u = false, need_p = false;
    for (const auto& f : set.functionals) (f.is_pressure() ? need_p : need_u) = true;
    for (std::size_t q = 0; q < Q.x.size(); ++q) {
        const Point x = Q.x[q];
        std::array<double, 2> u{0.0, 0.0};
        double p = 0.0;
        if (need_u) u = field.u(x);
        if (need_p) p = field.p(x);
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto& f = set.functionals[i];
            const double val = f.is_pressure() ? p : u[static_cast<std::size_t>(f.component - 1)];
            w[static_cast<Index>(i)] += Q.wdet[q] * f.weight(x) * val;
        }
    }
    return w;
}

inline Vector measurement_vector(const MeasurementSet& set, const DiscreteField& field, const FunctionalQuadrature& Q) {
    Vector w(static_cast<Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) w[static_cast<Index>(i)] = apply_to_discrete(set.functionals[i], field, Q);
    return w;
}

// --- CSV ---------------------------------------------------------------------

inline void write_measurements_csv(std::ostream& os, const MeasurementSet& set) {
    os << "kind,component,cx,cy,r,value\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& f = set.functionals[i];
        os << "gaussian," << f.component << ',' << format_double(f.center.x) << ',' << format_double(f.center.y) << ','
           << format_double(f.r) << ',';
        if (set.values) os << format_double((*set.values)[static_cast<Index>(i)]);
        os << "\n";
    }
}

inline MeasurementSet read_measurements_csv(std::istream& is) {
    MeasurementSet set;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    bool any_value = false, all_values = true;
    auto fail = [&](const std::string& msg) {
        throw Error("measurements", "CSV line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line.rfind("kind,component,cx,cy,r", 0) != 0) fail("unexpected header");
            continue;
        }
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (line.back() == ',') cols.emplace_back();
        if (cols.size() < 5 || cols.size() > 6) fail("expected 5 or 6 columns");
        if (cols[0] != "gaussian") fail("unsupported functional kind '" + cols[0] + "'");
        try {
            Functional f{{std::stod(cols[2]), std::stod(cols[3])}, std::stoi(cols[1]), std::stod(cols[4])};
            if (f.component < 1 || f.component > 3) fail("component must be 1, 2 or 3");
            if (!(f.r > 0.0)) fail("width must be positive");
            set.functionals.push_back(f);
            if (cols.size() == 6 && !cols[5].empty()) {
                values.push_back(std::stod(cols[5]));
                any_value = true;
            } else {
                values.push_back(0.0);
                all_values = false;
            }
        } catch (const std::logic_error&) {
            fail("cannot parse a number");
        }
    }
    if (any_value) {
        if (!all_values) throw Error("measurements", "CSV values must be given for all rows or none");
        set.values = Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
    }
    return set;
}

}  // namespace stokes_rec
