#pragma once

// Riesz representers of measurement functionals in the constrained space of
// discrete Stokes solutions with H^s boundary traces, computed by three
// decoupled solves:
//   1. multipliers (Pi, P):  B0 K0^{-1} B0^T P = B0 K0^{-1} F0 - G,  K0 Pi = F0 - B0^T P
//   2. boundary trace W_b:   A_s W_b = F_b - K_b^T Pi - B_b^T P - gamma D,  D^T W_b = 0
//   3. interior lift:        B0 K0^{-1} B0^T R0 = (B_b - B0 K0^{-1} K_b) W_b,
//                            K0 W0 = -K_b W_b - B0^T R0
// plus the pressure mean constant Lambda = lambda(0, 1).

#include "stokes_recovery/assembly.hpp"
#include "stokes_recovery/linalg.hpp"
#include "stokes_recovery/measurements.hpp"

#include <Eigen/LU>

#include <atomic>
#include <cstdlib>
#include <map>
#include <thread>

namespace stokes_rec {

struct RieszRepresenter {
    Vector W0;  // interior velocity (dN)
    Vector Wb;  // unknown-boundary velocity (dN_b)
    Vector R0;  // mean-free pressure
    double Lambda = 0.0;
    Vector Pi;
    Vector P;
    double gamma = 0.0;
    Functional functional;
    double s = 1.0;
    double tol = 1e-9;

    Vector velocity() const {
        Vector v(W0.size() + Wb.size());
        v << W0, Wb;
        return v;
    }
};

inline int thread_count() {
    if (const char* env = std::getenv("RECOVER_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs f(i) for i in [0, n) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Everything shared by the representers of one layout: the assembled
/// bundle, the K0 factorization, the fractional inverses per (s, k) with
/// their cached A_s^{-1} D, and memoized Step-1 multipliers.
class RieszContext {
public:
    RieszContext(const DofLayout& L, const OperatorBundle& ob)
        : layout_(&L), ob_(&ob), quad_(L), K0_(ob.K0), schur_(K0_, ob.B0, ob.pressure_mass, true) {}

    const DofLayout& layout() const { return *layout_; }
    const OperatorBundle& bundle() const { return *ob_; }
    const FunctionalQuadrature& quadrature() const { return quad_; }
    const Factorization& K0() const { return K0_; }
    const SchurSolver& schur() const { return schur_; }

    /// A_s^{-1} applied componentwise to a boundary-block vector.
    Vector apply_As_inverse(double s, double k, const Vector& v) const {
        const auto& fi = fractional(s, k);
        const Index nb = layout_->N_b;
        Vector out(v.size());
        for (int c = 0; c < layout_->d; ++c) out.segment(c * nb, nb) = fi.inverse.apply(v.segment(c * nb, nb));
        return out;
    }

    /// Cached A_s^{-1} D and D^T A_s^{-1} D.
    std::pair<const Vector*, double> As_inverse_D(double s, double k) const {
        const auto& fi = fractional(s, k);
        std::call_once(fi.d_once, [&] {
            fi.AsD = apply_As_inverse(s, k, ob_->D);
            fi.DAsD = ob_->D.dot(fi.AsD);
        });
        return {&fi.AsD, fi.DAsD};
    }

    /// a_1(v, w) = v^T (M + L) w per component.
    double a1(const Vector& v, const Vector& w) const {
        const Index nb = layout_->N_b;
        double sum = 0.0;
        for (int c = 0; c < layout_->d; ++c) {
            const Vector x = v.segment(c * nb, nb);
            sum += x.dot(ob_->M * w.segment(c * nb, nb) + ob_->L * w.segment(c * nb, nb));
        }
        return sum;
    }

    std::pair<Vector, Vector> multipliers(const Functional& f, const FunctionalVectors& fv, double tol) const {
        const auto key = std::make_tuple(f.center.x, f.center.y, f.component, f.r, tol);
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            auto it = mult_cache_.find(key);
            if (it != mult_cache_.end()) return it->second;
        }
        auto r = schur_.solve(fv.F0, fv.G, tol);
        std::pair<Vector, Vector> out{std::move(r.u), std::move(r.p)};
        std::lock_guard<std::mutex> lock(cache_mutex_);
        mult_cache_.emplace(key, out);
        return out;
    }

private:
    struct Fractional {
        FractionalInverse inverse;
        mutable std::once_flag d_once;
        mutable Vector AsD;
        mutable double DAsD = 0.0;
        Fractional(const SparseMatrix& M, const SparseMatrix& L, double s, double k) : inverse(M, L, s, k) {}
    };

    const Fractional& fractional(double s, double k) const {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto& slot = fractional_[{s, k}];
        if (!slot) slot = std::make_unique<Fractional>(ob_->M, ob_->L, s, k);
        return *slot;
    }

    const DofLayout* layout_;
    const OperatorBundle* ob_;
    FunctionalQuadrature quad_;
    Factorization K0_;
    SchurSolver schur_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::pair<double, double>, std::unique_ptr<Fractional>> fractional_;
    mutable std::map<std::tuple<double, double, int, double, double>, std::pair<Vector, Vector>> mult_cache_;
};

inline double mean_constant(const FunctionalVectors& fv) { return fv.G.sum(); }

inline double mean_constant(const Functional& f, const RieszContext& ctx) {
    if (!f.is_pressure()) return 0.0;
    return mean_constant(functional_vectors(ctx.layout(), f, ctx.quadrature()));
}

inline std::pair<Vector, Vector> solve_multipliers(const RieszContext& ctx, const FunctionalVectors& fv, double tol) {
    auto r = ctx.schur().solve(fv.F0, fv.G, tol);
    return {std::move(r.u), std::move(r.p)};
}

inline std::pair<Vector, double> solve_boundary_trace(const RieszContext& ctx, const FunctionalVectors& fv,
                                                      const Vector& Pi, const Vector& P, double s, double k) {
    const auto& ob = ctx.bundle();
    const Vector rhs = fv.Fb - ob.Kb.transpose() * Pi - ob.Bb.transpose() * P;
    if (rhs.norm() == 0.0) return {Vector::Zero(rhs.size()), 0.0};
    const Vector u = ctx.apply_As_inverse(s, k, rhs);
    const auto [AsD, DAsD] = ctx.As_inverse_D(s, k);
    if (!(std::abs(DAsD) > 0.0)) throw Error("riesz", "degenerate compatibility scalar D^T A_s^{-1} D");
    const double gamma = ob.D.dot(u) / DAsD;
    return {u - gamma * (*AsD), gamma};
}

inline std::pair<Vector, Vector> lift_interior(const RieszContext& ctx, const Vector& Wb, double tol) {
    const auto& ob = ctx.bundle();
    if (Wb.norm() == 0.0) return {Vector::Zero(ob.K0.rows()), Vector::Zero(ob.B0.rows())};
    auto r = ctx.schur().solve(-(ob.Kb * Wb), -(ob.Bb * Wb), tol);
    return {std::move(r.u), std::move(r.p)};
}

inline RieszRepresenter compute_representer(const Functional& f, const RieszContext& ctx, double s, double k,
                                            double tol) {
    const auto fv = functional_vectors(ctx.layout(), f, ctx.quadrature());
    RieszRepresenter rep;
    rep.functional = f;
    rep.s = s;
    rep.tol = tol;
    rep.Lambda = mean_constant(fv);
    std::tie(rep.Pi, rep.P) = ctx.multipliers(f, fv, tol);
    std::tie(rep.Wb, rep.gamma) = solve_boundary_trace(ctx, fv, rep.Pi, rep.P, s, k);
    std::tie(rep.W0, rep.R0) = lift_interior(ctx, rep.Wb, tol);
    return rep;
}

/// Representers of every functional, in functional order.
inline std::vector<RieszRepresenter> compute_representers(const std::vector<Functional>& fs, const RieszContext& ctx,
                                                          double s, double k, double tol, int threads = thread_count()) {
    std::vector<RieszRepresenter> out(fs.size());
    parallel_for(fs.size(), threads, [&](std::size_t i) { out[i] = compute_representer(fs[i], ctx, s, k, tol); });
    return out;
}

/// Direct dense solve of the full discrete saddle system for s = 1, used to
/// validate the decoupled path. Unknowns [W0, Wb, R0, Pi, P, gamma, mu1, mu2],
/// where mu1, mu2 enforce mean-free testing of the two pressure equations and
/// the mean-free constraints m^T P = m^T R0 = 0 close the system.
inline RieszRepresenter monolithic_oracle(const Functional& f, const RieszContext& ctx, double* residual = nullptr) {
    const auto& L = ctx.layout();
    const auto& ob = ctx.bundle();
    if (L.total_size() > 4000) throw Error("riesz", "monolithic oracle is limited to small problems (n <= 3)");
    const auto fv = functional_vectors(L, f, ctx.quadrature());
    const Index n0 = L.interior_size(), nb = L.boundary_size(), np = L.num_pressure();
    const Index oW0 = 0, oWb = n0, oR0 = oWb + nb, oPi = oR0 + np, oP = oPi + n0, oG = oP + np, oM1 = oG + 1,
                oM2 = oM1 + 1, n = oM2 + 1;
    Matrix A = Matrix::Zero(n, n);
    Vector b = Vector::Zero(n);
    const Matrix K0 = ob.K0, Kb = ob.Kb, B0 = ob.B0, Bb = ob.Bb;
    Matrix A1 = Matrix::Zero(nb, nb);
    const Matrix ML = Matrix(ob.M) + Matrix(ob.L);
    for (int c = 0; c < L.d; ++c) A1.block(c * L.N_b, c * L.N_b, L.N_b, L.N_b) = ML;
    const Vector& m = ob.pressure_mass;

    // test with z in W_h: K0 W0 + Kb Wb + B0^T R0 = 0
    A.block(oW0, oW0, n0, n0) = K0;
    A.block(oW0, oWb, n0, nb) = Kb;
    A.block(oW0, oR0, n0, np) = B0.transpose();
    // test with v in V_b: A1 Wb + Kb^T Pi + Bb^T P + gamma D = Fb
    A.block(oWb, oWb, nb, nb) = A1;
    A.block(oWb, oPi, nb, n0) = Kb.transpose();
    A.block(oWb, oP, nb, np) = Bb.transpose();
    A.block(oWb, oG, nb, 1) = ob.D;
    b.segment(oWb, nb) = fv.Fb;
    // test with tau in Q_h: B0 W0 + Bb Wb + mu2 m = 0
    A.block(oR0, oW0, np, n0) = B0;
    A.block(oR0, oWb, np, nb) = Bb;
    A.block(oR0, oM2, np, 1) = m;
    // test with v in W_h: K0 Pi + B0^T P = F0
    A.block(oPi, oPi, n0, n0) = K0;
    A.block(oPi, oP, n0, np) = B0.transpose();
    b.segment(oPi, n0) = fv.F0;
    // test with q in Q_h: B0 Pi + mu1 m = G
    A.block(oP, oPi, np, n0) = B0;
    A.block(oP, oM1, np, 1) = m;
    b.segment(oP, np) = fv.G;
    // compatibility and mean constraints
    A.block(oG, oWb, 1, nb) = ob.D.transpose();
    A.block(oM1, oP, 1, np) = m.transpose();
    A.block(oM2, oR0, 1, np) = m.transpose();

    const Vector x = Eigen::PartialPivLU<Matrix>(A).solve(b);
    const double res = (A * x - b).norm() / std::max(b.norm(), 1e-300);
    if (!std::isfinite(res) || res > 1e-6) throw Error("riesz", "monolithic saddle system is singular");
    if (residual) *residual = res;
    RieszRepresenter rep;
    rep.functional = f;
    rep.s = 1.0;
    rep.tol = 0.0;
    rep.W0 = x.segment(oW0, n0);
    rep.Wb = x.segment(oWb, nb);
    rep.R0 = x.segment(oR0, np);
    rep.Pi = x.segment(oPi, n0);
    rep.P = x.segment(oP, np);
    rep.gamma = x[oG];
    rep.Lambda = mean_constant(fv);
    return rep;
}

}  // namespace stokes_rec
