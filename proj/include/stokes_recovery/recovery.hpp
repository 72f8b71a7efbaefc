#pragma once

// Recovery pipeline: background solve with the body force, shift of the
// measurements, Gram matrix of the Riesz representers, regularized solve and
// assembly of the recovered field. Also the manufactured solutions, error
// norms and boundary quantities of interest used by the experiments.

#include "stokes_recovery/riesz.hpp"

#include <map>
#include <optional>
#include <variant>

namespace stokes_rec {

// --- manufactured solutions ---------------------------------------------------

struct ExactSolution {
    std::string name;
    std::function<std::array<double, 2>(Point)> u;
    std::function<std::array<double, 4>(Point)> grad_u;  // du1/dx, du1/dy, du2/dx, du2/dy
    std::function<double(Point)> p;
    std::function<std::array<double, 2>(Point)> f;
    std::optional<double> norm_u_h1;  // published values on the unit square
    std::optional<double> norm_p_l2;

    AnalyticField field() const { return {u, p}; }
};

inline ExactSolution exponential_solution() {
    ExactSolution s;
    s.name = "case1";
    s.u = [](Point x) -> std::array<double, 2> {
        const double e = std::exp(x.x);
        return {e * std::cos(x.y), -e * std::sin(x.y) + 2.0 * x.x * x.x};
    };
    s.grad_u = [](Point x) -> std::array<double, 4> {
        const double e = std::exp(x.x), c = std::cos(x.y), sn = std::sin(x.y);
        return {e * c, -e * sn, -e * sn + 4.0 * x.x, -e * c};
    };
    s.p = [](Point x) { return 2.0 * (2.0 * x.y - 1.0); };
    s.f = [](Point) -> std::array<double, 2> { return {0.0, 0.0}; };
    s.norm_u_h1 = 3.274;
    s.norm_p_l2 = 1.155;
    return s;
}

inline ExactSolution vortex_solution() {
    ExactSolution s;
    s.name = "case2";
    s.u = [](Point x) -> std::array<double, 2> {
        return {-std::cos(pi * x.x) * std::sin(pi * x.y), std::sin(pi * x.x) * std::cos(pi * x.y)};
    };
    s.grad_u = [](Point x) -> std::array<double, 4> {
        const double cx = std::cos(pi * x.x), sx = std::sin(pi * x.x), cy = std::cos(pi * x.y), sy = std::sin(pi * x.y);
        return {pi * sx * sy, -pi * cx * cy, pi * cx * cy, -pi * sx * sy};
    };
    s.p = [](Point x) { return -std::cos(2.0 * pi * x.x) - std::cos(2.0 * pi * x.y); };
    s.f = [](Point x) -> std::array<double, 2> {
        const double k = 2.0 * pi * pi;
        return {-k * std::cos(pi * x.x) * std::sin(pi * x.y) + 2.0 * pi * std::sin(2.0 * pi * x.x),
                k * std::sin(pi * x.x) * std::cos(pi * x.y) + 2.0 * pi * std::sin(2.0 * pi * x.y)};
    };
    s.norm_u_h1 = 3.220;
    s.norm_p_l2 = 1.0;
    return s;
}

/// u = (a - omega y, b + omega x), p = c.
inline ExactSolution rigid_solution(double a = 0.3, double b = -0.2, double omega = 0.5, double c = 0.7) {
    ExactSolution s;
    s.name = "rigid";
    s.u = [=](Point x) -> std::array<double, 2> { return {a - omega * x.y, b + omega * x.x}; };
    s.grad_u = [=](Point) -> std::array<double, 4> { return {0.0, -omega, omega, 0.0}; };
    s.p = [=](Point) { return c; };
    s.f = [](Point) -> std::array<double, 2> { return {0.0, 0.0}; };
    return s;
}

inline ExactSolution zero_solution() {
    ExactSolution s;
    s.name = "zero";
    s.u = [](Point) -> std::array<double, 2> { return {0.0, 0.0}; };
    s.grad_u = [](Point) -> std::array<double, 4> { return {0.0, 0.0, 0.0, 0.0}; };
    s.p = [](Point) { return 0.0; };
    s.f = [](Point) -> std::array<double, 2> { return {0.0, 0.0}; };
    return s;
}

inline std::vector<std::string> exact_solution_names() { return {"case1", "case2", "rigid", "zero"}; }

inline ExactSolution exact_solution(const std::string& name) {
    if (name == "case1") return exponential_solution();
    if (name == "case2") return vortex_solution();
    if (name == "rigid") return rigid_solution();
    if (name == "zero") return zero_solution();
    throw ConfigError("unknown exact solution '" + name + "'");
}

/// Largest deviation of f from -div(2 eps(u)) + grad p at x, with the
/// derivatives of grad u and p taken by fourth-order central differences.
inline double body_force_defect(const ExactSolution& s, Point x, double h = 1e-3) {
    auto d = [h](auto&& g, Point x0, Point dir) {
        const auto at = [&](double t) { return g(x0 + t * dir); };
        return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
    };
    const Point ex{1.0, 0.0}, ey{0.0, 1.0};
    auto g = [&](int i) { return [&s, i](Point y) { return s.grad_u(y)[static_cast<std::size_t>(i)]; }; };
    // (2 eps)_ij = d_j u_i + d_i u_j; grad_u index 2 i + j
    const double s11x = d(g(0), x, ex) * 2.0;
    const double s12y = d(g(1), x, ey) + d(g(2), x, ey);
    const double s21x = d(g(2), x, ex) + d(g(1), x, ex);
    const double s22y = d(g(3), x, ey) * 2.0;
    const double px = d(s.p, x, ex), py = d(s.p, x, ey);
    const auto f = s.f(x);
    return std::max(std::abs(f[0] - (-(s11x + s12y) + px)), std::abs(f[1] - (-(s21x + s22y) + py)));
}

// --- discretization ---------------------------------------------------------

/// Mesh, layout, trace mesh, assembled operators and the representer context,
/// kept together at a fixed address since they reference each other.
class Discretization {
public:
    Discretization(Mesh mesh, std::set<int> unknown_markers)
        : mesh_(std::move(mesh)),
          layout_(build_layout(mesh_, unknown_markers)),
          trace_(trace_mesh(layout_)),
          ops_(assemble_bundle(layout_, trace_)),
          ctx_(layout_, ops_) {}

    Discretization(const Discretization&) = delete;
    Discretization& operator=(const Discretization&) = delete;

    const Mesh& mesh() const { return mesh_; }
    const DofLayout& layout() const { return layout_; }
    const TraceMesh& trace() const { return trace_; }
    const OperatorBundle& ops() const { return ops_; }
    const RieszContext& context() const { return ctx_; }

    /// True when every boundary marker is unknown (Gamma_k empty).
    bool full_unknown() const {
        for (const auto& [id, name] : mesh_.markers)
            if (!layout_.unknown_markers.count(id)) {
                for (const auto& e : mesh_.boundary_edges)
                    if (e.marker == id) return false;
            }
        return true;
    }

    /// Representers are shared across sweep points with the same (s, k, tol).
    std::vector<RieszRepresenter> representers(const std::vector<Functional>& fs, double s, double k, double tol,
                                               int threads = thread_count()) const {
        std::vector<RieszRepresenter> out(fs.size());
        std::vector<std::size_t> missing;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            for (std::size_t i = 0; i < fs.size(); ++i) {
                auto it = cache_.find(key(fs[i], s, k, tol));
                if (it != cache_.end())
                    out[i] = it->second;
                else
                    missing.push_back(i);
            }
        }
        std::vector<Functional> todo;
        for (auto i : missing) todo.push_back(fs[i]);
        auto fresh = compute_representers(todo, ctx_, s, k, tol, threads);
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            cache_.emplace(key(todo[j], s, k, tol), fresh[j]);
            out[missing[j]] = std::move(fresh[j]);
        }
        return out;
    }

    template <class F>
    void for_each_cached(F&& f) const {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& [k, rep] : cache_) f(rep);
    }

    void clear_cache() const {
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.clear();
    }

private:
    using Key = std::tuple<double, double, int, double, double, double, double>;
    static Key key(const Functional& f, double s, double k, double tol) {
        return {f.center.x, f.center.y, f.component, f.r, s, k, tol};
    }

    Mesh mesh_;
    DofLayout layout_;
    TraceMesh trace_;
    OperatorBundle ops_;
    RieszContext ctx_;
    mutable std::mutex mutex_;
    mutable std::map<Key, RieszRepresenter> cache_;
};

// --- Stokes solves ------------------------------------------------------------

enum class DirichletPart { known, all };

using VectorFunction = std::function<std::array<double, 2>(Point)>;

/// Taylor-Hood solve of -div(2 eps(u)) + grad p = f, div u = 0 with u = g on
/// the chosen part of the boundary and the do-nothing condition elsewhere.
/// The pressure is mass-mean-free exactly when Dirichlet data covers the
/// whole boundary.
inline DiscreteField solve_stokes(const Discretization& D, const VectorFunction& f, const VectorFunction& g,
                                  DirichletPart part, double tol) {
    const DofLayout& L = D.layout();
    const OperatorBundle& ob = D.ops();
    const Index nv = L.num_velocity();
    std::vector<char> fixed(static_cast<std::size_t>(nv), 0);
    Vector gvec = Vector::Zero(nv);
    bool natural = false;
    for (Index i = 0; i < L.num_nodes(); ++i) {
        const bool known = L.node_constrained[static_cast<std::size_t>(i)];
        const bool unknown = L.node_on_unknown[static_cast<std::size_t>(i)];
        const bool dir = known || (part == DirichletPart::all && unknown);
        if (unknown && !dir) natural = true;
        if (!dir) continue;
        const auto val = g ? g(L.node_coords[static_cast<std::size_t>(i)]) : std::array<double, 2>{0.0, 0.0};
        for (int c = 0; c < L.d; ++c) {
            const Index vi = L.velocity_index(i, c);
            fixed[static_cast<std::size_t>(vi)] = 1;
            gvec[vi] = val[static_cast<std::size_t>(c)];
        }
    }
    std::vector<Index> free_of(static_cast<std::size_t>(nv), -1);
    Index nf = 0;
    for (Index i = 0; i < nv; ++i)
        if (!fixed[static_cast<std::size_t>(i)]) free_of[static_cast<std::size_t>(i)] = nf++;
    std::vector<Triplet> sel;
    sel.reserve(static_cast<std::size_t>(nf));
    for (Index i = 0; i < nv; ++i)
        if (free_of[static_cast<std::size_t>(i)] >= 0) sel.emplace_back(free_of[static_cast<std::size_t>(i)], i, 1.0);
    SparseMatrix P(nf, nv);
    P.setFromTriplets(sel.begin(), sel.end());

    const SparseMatrix Kff = P * ob.K_full * P.transpose();
    const SparseMatrix Bf = ob.B_full * P.transpose();
    Vector load = f ? assemble_body_load_full(L, f) : Vector::Zero(nv);
    const Vector rv = P * (load - ob.K_full * gvec);
    const Vector rp = -(ob.B_full * gvec);

    const Factorization K(Kff);
    const SchurSolver schur(K, Bf, ob.pressure_mass, !natural);
    auto r = schur.solve(rv, rp, tol);
    DiscreteField out = DiscreteField::zero(L);
    out.velocity = P.transpose() * r.u + gvec;
    out.pressure = std::move(r.p);
    return out;
}

/// (u_f, p_f): zero velocity on the whole boundary in the full-unknown case,
/// otherwise g on the known boundary and do-nothing on the unknown one.
inline DiscreteField solve_background(const Discretization& D, const VectorFunction& f, const VectorFunction& g_known,
                                      double tol) {
    try {
        if (D.full_unknown()) return solve_stokes(D, f, nullptr, DirichletPart::all, tol);
        return solve_stokes(D, f, g_known, DirichletPart::known, tol);
    } catch (const Error& e) {
        throw Error("background", e.what());
    }
}

// --- recovery -------------------------------------------------------------------

inline Vector shifted_measurements(const Vector& w, const DiscreteField& background, const MeasurementSet& set,
                                   const FunctionalQuadrature& Q) {
    if (w.size() != static_cast<Index>(set.size())) throw Error("recovery", "measurement vector length mismatch");
    return w - measurement_vector(set, background, Q);
}

/// g_ij = lambda_i(W_j, R0_j + Lambda_j).
inline Matrix gram(const std::vector<RieszRepresenter>& reps, const MeasurementSet& set, const RieszContext& ctx) {
    const Index m = static_cast<Index>(set.size());
    if (static_cast<Index>(reps.size()) != m) throw Error("recovery", "representer count does not match measurements");
    const DofLayout& L = ctx.layout();
    Matrix G(m, m);
    for (Index i = 0; i < m; ++i) {
        const auto fv = full_functional_vectors(L, set.functionals[static_cast<std::size_t>(i)], ctx.quadrature());
        const double mean_i = fv.pressure.sum();
        for (Index j = 0; j < m; ++j) {
            const auto& r = reps[static_cast<std::size_t>(j)];
            G(i, j) = fv.velocity.head(L.interior_size()).dot(r.W0) + fv.velocity.tail(L.boundary_size()).dot(r.Wb) +
                      fv.pressure.dot(r.R0) + r.Lambda * mean_i;
        }
    }
    return G;
}

struct RecoveryOptions {
    double s = 1.0;
    double k = 0.4;
    GramMode mode = GramMode::jacobi_threshold;
    double eps = 1e-10;
    double tol_background = 1e-9;   // s_tol^1
    double tol_representer = 1e-9;  // s_tol^2
    int threads = 0;                // 0: RECOVER_THREADS or hardware
};

struct GramReport {
    double cond_G = 1.0;         // plain Gram matrix
    double cond_GP = 1.0;        // Jacobi-scaled, before truncation
    double cond_truncated = 1.0; // matrix actually inverted
    Index rank = 0;
};

struct RecoveryErrors {
    double err_u = 0.0;
    double err_p = 0.0;
    double err = 0.0;
};

struct RecoveryResult {
    DiscreteField field;
    Vector alpha;
    Vector shifted;
    GramReport report;
    Vector residuals;  // lambda_i(u, p) - w_i
    std::optional<RecoveryErrors> errors;
};

/// Steps 2-5 of the algorithm given the background field and measurements.
inline RecoveryResult recover(const Discretization& D, const MeasurementSet& set, const Vector& w,
                              const DiscreteField& background, const RecoveryOptions& opt) {
    const auto& ctx = D.context();
    RecoveryResult res;
    res.shifted = shifted_measurements(w, background, set, ctx.quadrature());
    res.field = background;
    const Index m = static_cast<Index>(set.size());
    if (m == 0) {
        res.alpha = Vector(0);
        res.residuals = Vector(0);
        return res;
    }
    std::vector<RieszRepresenter> reps;
    try {
        reps = D.representers(set.functionals, opt.s, opt.k, opt.tol_representer,
                              opt.threads > 0 ? opt.threads : thread_count());
    } catch (const Error& e) {
        throw Error("representers", e.what());
    }
    const Matrix G = gram(reps, set, ctx);
    PinvResult solved;
    try {
        solved = pinv_solve(G, res.shifted, opt.mode, opt.eps);
        res.report.cond_G = condition_number(G);
        Vector dinv = G.diagonal().cwiseSqrt().cwiseInverse();
        res.report.cond_GP = condition_number(dinv.asDiagonal() * G * dinv.asDiagonal());
    } catch (const Error& e) {
        throw Error("gram", e.what());
    }
    res.alpha = solved.x;
    res.report.cond_truncated = solved.report.cond_kept;
    res.report.rank = solved.report.rank;

    const DofLayout& L = D.layout();
    for (Index j = 0; j < m; ++j) {
        const double a = res.alpha[j];
        const auto& r = reps[static_cast<std::size_t>(j)];
        res.field.velocity.head(L.interior_size()) += a * r.W0;
        res.field.velocity.tail(L.boundary_size()) += a * r.Wb;
        res.field.pressure += a * r.R0;
        res.field.pressure_shift += a * r.Lambda;
    }
    res.residuals = measurement_vector(set, res.field, ctx.quadrature()) - w;
    return res;
}

// --- norms and errors ----------------------------------------------------------

/// H1 velocity and L2 pressure norms of (u - u_h, p - p_h) with a 4x4 Gauss
/// rule per cell; either side may be absent (treated as zero).
inline RecoveryErrors field_errors(const DofLayout& L, const ExactSolution* exact, const DiscreteField* field) {
    const ReferenceTable ref(4);
    double eu = 0.0, ep = 0.0;
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto verts = L.cell_vertices(c);
        const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
        const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < ref.points.size(); ++q) {
            const auto mp = map_point(verts, ref.shapes[q]);
            const double w = ref.points[q].w * mp.det;
            std::array<double, 2> u{0.0, 0.0};
            std::array<double, 4> gu{0.0, 0.0, 0.0, 0.0};
            double p = 0.0;
            if (exact) {
                u = exact->u(mp.x);
                gu = exact->grad_u(mp.x);
                p = exact->p(mp.x);
            }
            if (field) {
                for (int a = 0; a < 9; ++a) {
                    const Index node = nodes[static_cast<std::size_t>(a)];
                    for (int ci = 0; ci < 2; ++ci) {
                        const double v = field->velocity[L.velocity_index(node, ci)];
                        u[static_cast<std::size_t>(ci)] -= mp.q2[a] * v;
                        gu[static_cast<std::size_t>(2 * ci)] -= mp.q2_dx[a] * v;
                        gu[static_cast<std::size_t>(2 * ci + 1)] -= mp.q2_dy[a] * v;
                    }
                }
                for (int i = 0; i < 4; ++i) p -= mp.q1[i] * field->pressure[cv[i]];
                p -= field->pressure_shift;
            }
            eu += w * (u[0] * u[0] + u[1] * u[1] + gu[0] * gu[0] + gu[1] * gu[1] + gu[2] * gu[2] + gu[3] * gu[3]);
            ep += w * p * p;
        }
    }
    RecoveryErrors e;
    e.err_u = std::sqrt(eu);
    e.err_p = std::sqrt(ep);
    e.err = std::hypot(e.err_u, e.err_p);
    return e;
}

inline RecoveryErrors recovery_errors(const ExactSolution& exact, const DiscreteField& field) {
    return field_errors(*field.layout, &exact, &field);
}

/// Mean of the discrete pressure over the domain.
inline double pressure_mean(const DiscreteField& field) {
    const DofLayout& L = *field.layout;
    const ReferenceTable ref(2);
    double integral = 0.0, area = 0.0;
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto verts = L.cell_vertices(c);
        const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < ref.points.size(); ++q) {
            const auto mp = map_point(verts, ref.shapes[q]);
            const double w = ref.points[q].w * mp.det;
            double p = field.pressure_shift;
            for (int i = 0; i < 4; ++i) p += mp.q1[i] * field.pressure[cv[i]];
            integral += w * p;
            area += w;
        }
    }
    return integral / area;
}

inline double exact_pressure_mean(const DofLayout& L, const ExactSolution& exact) {
    const ReferenceTable ref(4);
    double integral = 0.0, area = 0.0;
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto verts = L.cell_vertices(c);
        for (std::size_t q = 0; q < ref.points.size(); ++q) {
            const auto mp = map_point(verts, ref.shapes[q]);
            const double w = ref.points[q].w * mp.det;
            integral += w * exact.p(mp.x);
            area += w;
        }
    }
    return integral / area;
}

/// Interpolant of an exact solution (velocity Q2 nodal, pressure Q1 nodal).
inline DiscreteField interpolate(const DofLayout& L, const ExactSolution& exact) {
    DiscreteField out = DiscreteField::zero(L);
    out.velocity = interpolate_velocity(L, exact.u);
    out.pressure = interpolate_pressure(L, exact.p);
    return out;
}

// --- quantities of interest ---------------------------------------------------

/// (c_D, c_L) = -int_{marker} (2 eps(u) n - p n), 3-point Gauss per boundary
/// edge with eps(u) taken from the adjacent cell.
inline std::array<double, 2> drag_lift(const DiscreteField& field, int marker) {
    const DofLayout& L = *field.layout;
    const Mesh& mesh = *L.mesh;
    if (!mesh.markers.count(marker)) throw Error("qoi", "unknown boundary marker id " + std::to_string(marker));
    std::map<std::pair<Index, Index>, std::pair<Index, int>> side_of;
    for (Index c = 0; c < mesh.num_cells(); ++c) {
        const auto& cv = mesh.cells[static_cast<std::size_t>(c)];
        for (int s = 0; s < 4; ++s) side_of[{cv[s], cv[(s + 1) % 4]}] = {c, s};
    }
    const auto g = gauss_rule(3);
    std::array<double, 2> out{0.0, 0.0};
    for (const auto& e : mesh.boundary_edges) {
        if (e.marker != marker) continue;
        auto it = side_of.find({e.v[0], e.v[1]});
        if (it == side_of.end()) throw Error("qoi", "boundary edge without an adjacent cell");
        const auto [c, side] = it->second;
        const auto verts = L.cell_vertices(c);
        const auto& nodes = L.cell_nodes[static_cast<std::size_t>(c)];
        const auto& cv = mesh.cells[static_cast<std::size_t>(c)];
        const Point a = mesh.vertices[static_cast<std::size_t>(e.v[0])], b = mesh.vertices[static_cast<std::size_t>(e.v[1])];
        const double len = norm(b - a);
        const Point n{(b.y - a.y) / len, -(b.x - a.x) / len};
        for (std::size_t q = 0; q < g.x.size(); ++q) {
            const double t = g.x[q];
            double xi = 0.0, eta = 0.0;
            switch (side) {
                case 0: xi = t, eta = -1.0; break;
                case 1: xi = 1.0, eta = t; break;
                case 2: xi = -t, eta = 1.0; break;
                default: xi = -1.0, eta = -t; break;
            }
            const auto mp = map_point(verts, shape_values(xi, eta));
            double gu[4] = {0.0, 0.0, 0.0, 0.0};
            for (int k = 0; k < 9; ++k) {
                const Index node = nodes[static_cast<std::size_t>(k)];
                for (int ci = 0; ci < 2; ++ci) {
                    const double v = field.velocity[L.velocity_index(node, ci)];
                    gu[2 * ci] += mp.q2_dx[k] * v;
                    gu[2 * ci + 1] += mp.q2_dy[k] * v;
                }
            }
            double p = field.pressure_shift;
            for (int i = 0; i < 4; ++i) p += mp.q1[i] * field.pressure[cv[i]];
            const double s11 = 2.0 * gu[0], s12 = gu[1] + gu[2], s22 = 2.0 * gu[3];
            const double w = g.w[q] * 0.5 * len;
            out[0] -= w * (s11 * n.x + s12 * n.y - p * n.x);
            out[1] -= w * (s12 * n.x + s22 * n.y - p * n.y);
        }
    }
    return out;
}

struct DragLift {
    int marker = 0;
};

using QuantityOfInterest = std::variant<Functional, DragLift>;

inline std::vector<double> evaluate_qoi(const QuantityOfInterest& q, const DiscreteField& field,
                                        const FunctionalQuadrature& Q) {
    if (const auto* f = std::get_if<Functional>(&q)) return {apply_to_discrete(*f, field, Q)};
    const auto cd = drag_lift(field, std::get<DragLift>(q).marker);
    return {cd[0], cd[1]};
}

// --- field dump -------------------------------------------------------------------

/// `x,y,u1,u2,p` per Q2 node in node order, pressure interpolated bilinearly.
inline void write_field_csv(std::ostream& os, const DiscreteField& field) {
    const DofLayout& L = *field.layout;
    const Index V = L.mesh->num_vertices();
    const Index E = static_cast<Index>(L.edges.size());
    std::vector<double> pn(static_cast<std::size_t>(L.num_nodes()), 0.0);
    for (Index v = 0; v < V; ++v) pn[static_cast<std::size_t>(v)] = field.pressure[v];
    for (Index e = 0; e < E; ++e) {
        const auto& ed = L.edges[static_cast<std::size_t>(e)];
        pn[static_cast<std::size_t>(V + e)] = 0.5 * (field.pressure[ed[0]] + field.pressure[ed[1]]);
    }
    for (Index c = 0; c < L.mesh->num_cells(); ++c) {
        const auto& cv = L.mesh->cells[static_cast<std::size_t>(c)];
        const Index center = L.cell_nodes[static_cast<std::size_t>(c)][static_cast<std::size_t>(q2_local(1, 1))];
        pn[static_cast<std::size_t>(center)] =
            0.25 * (field.pressure[cv[0]] + field.pressure[cv[1]] + field.pressure[cv[2]] + field.pressure[cv[3]]);
    }
    os << "x,y,u1,u2,p\n";
    for (Index i = 0; i < L.num_nodes(); ++i) {
        const Point x = L.node_coords[static_cast<std::size_t>(i)];
        os << format_double(x.x) << ',' << format_double(x.y) << ',' << format_double(field.velocity[L.velocity_index(i, 0)])
           << ',' << format_double(field.velocity[L.velocity_index(i, 1)]) << ','
           << format_double(pn[static_cast<std::size_t>(i)] + field.pressure_shift) << "\n";
    }
}

}  // namespace stokes_rec
