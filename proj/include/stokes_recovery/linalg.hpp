#pragma once

// Linear algebra kernels: sparse factorizations, projected conjugate
// gradients, pressure Schur-complement solves, the sinc-quadrature
// fractional inverse and regularized Gram solves.

#include "stokes_recovery/common.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>

namespace stokes_rec {

/// Sparse symmetric factorization, reusable for many right-hand sides.
class Factorization {
public:
    Factorization() = default;

    explicit Factorization(const SparseMatrix& A) { compute(A); }

    void compute(const SparseMatrix& A) {
        if (A.rows() != A.cols()) throw LinalgError("factorize: matrix is not square");
        n_ = A.rows();
        solver_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
        solver_->compute(A);
        if (solver_->info() != Eigen::Success) throw LinalgError("factorize: numerical breakdown");
        double anorm = 0.0;
        for (int c = 0; c < A.outerSize(); ++c)
            for (SparseMatrix::InnerIterator it(A, c); it; ++it) anorm = std::max(anorm, std::abs(it.value()));
        const Vector d = solver_->vectorD();
        if (n_ > 0 && d.cwiseAbs().minCoeff() <= 1e-14 * anorm) throw LinalgError("factorize: singular matrix");
    }

    Vector solve(const Vector& b) const {
        if (!solver_) throw LinalgError("solve: matrix was never factorized");
        if (b.size() != n_) throw LinalgError("solve: right-hand side has the wrong length");
        return solver_->solve(b);
    }

    Index size() const { return n_; }
    bool symmetric() const { return true; }

private:
    Index n_ = 0;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> solver_;
};

inline Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

struct CgResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;  // final recursive residual norm
    std::vector<double> history;
};

using LinearOperator = std::function<Vector(const Vector&)>;
using Projector = std::function<void(Vector&)>;

/// Conjugate gradients for a symmetric positive (semi)definite operator,
/// stopping at ||r|| <= tol ||rhs||. With a projector, the rhs and every
/// search direction are projected onto its range.
inline CgResult cg_solve(const LinearOperator& apply, Vector rhs, double tol, int maxit,
                         const Projector& project = nullptr) {
    if (project) project(rhs);
    CgResult res;
    res.x = Vector::Zero(rhs.size());
    const double bnorm = rhs.norm();
    if (!std::isfinite(bnorm)) throw LinalgError("cg: non-finite right-hand side");
    res.history.push_back(bnorm);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    Vector r = rhs;
    Vector p = r;
    double rr = r.squaredNorm();
    for (int it = 1; it <= maxit; ++it) {
        Vector Ap = apply(p);
        if (project) project(Ap);
        const double pAp = p.dot(Ap);
        if (!std::isfinite(pAp)) throw LinalgError("cg: breakdown (non-finite curvature)");
        if (pAp <= 0.0) break;  // operator exhausted on this subspace
        const double alpha = rr / pAp;
        res.x += alpha * p;
        r -= alpha * Ap;
        const double rr_new = r.squaredNorm();
        res.iterations = it;
        res.residual = std::sqrt(rr_new);
        res.history.push_back(res.residual);
        if (res.residual <= tol * bnorm) {
            res.converged = true;
            return res;
        }
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    res.converged = res.residual <= tol * bnorm;
    return res;
}

/// Solver for the saddle system [[K, B^T], [B, 0]] [u; p] = [rv; rp] through
/// the pressure Schur complement B K^{-1} B^T.
///
/// With `mean_free` set, B^T annihilates constants and the pressure lives in
/// the mass-weighted mean-free space: the pressure equation is tested only
/// against mean-free q, so rp is corrected by a multiple of the mass weights,
/// CG runs projected against constants, and p is shifted to zero mean.
class SchurSolver {
public:
    SchurSolver(const Factorization& K, const SparseMatrix& B, const Vector& mass, bool mean_free)
        : K_(&K), B_(&B), mass_(mass), mean_free_(mean_free) {}

    struct Result {
        Vector u;
        Vector p;
        int iterations = 0;
    };

    Result solve(const Vector& rv, Vector rp, double tol, int maxit = 0) const {
        const Index np = B_->rows();
        if (maxit <= 0) maxit = static_cast<int>(std::max<Index>(200, 2 * np));
        if (mean_free_) rp -= mass_ * (rp.sum() / mass_.sum());
        const Vector Kr = K_->solve(rv);
        Vector rhs = (*B_) * Kr - rp;
        const LinearOperator S = [this](const Vector& q) -> Vector {
            return (*B_) * K_->solve(B_->transpose() * q);
        };
        Projector proj = nullptr;
        if (mean_free_) proj = [](Vector& v) { v.array() -= v.mean(); };
        Result out;
        if (rhs.norm() == 0.0 && rv.norm() == 0.0) {
            out.u = Vector::Zero(rv.size());
            out.p = Vector::Zero(np);
            return out;
        }
        auto cg = cg_solve(S, rhs, tol, maxit, proj);
        if (!cg.converged)
            throw LinalgError("Schur CG did not converge in " + std::to_string(cg.iterations) +
                              " iterations (relative residual " +
                              std::to_string(cg.residual / std::max(cg.history.front(), 1e-300)) + ")");
        out.p = std::move(cg.x);
        if (mean_free_) out.p.array() -= mass_.dot(out.p) / mass_.sum();
        out.u = K_->solve(rv - B_->transpose() * out.p);
        out.iterations = cg.iterations;
        return out;
    }

    bool mean_free() const { return mean_free_; }

private:
    const Factorization* K_;
    const SparseMatrix* B_;
    Vector mass_;
    bool mean_free_;
};

/// Sinc quadrature nodes for the fractional order t in (0,1) with spacing k:
/// y_l = k l for l = -M..N.
struct SincRule {
    double t = 0.5;
    double k = 0.4;
    int M = 0;
    int N = 0;

    SincRule() = default;
    SincRule(double t_, double k_) : t(t_), k(k_) {
        if (!(t > 0.0 && t < 1.0)) throw LinalgError("sinc rule needs 0 < t < 1");
        if (!(k > 0.0)) throw LinalgError("sinc spacing must be positive");
        M = static_cast<int>(std::ceil(pi * pi / (2.0 * (1.0 - t) * k * k)));
        N = static_cast<int>(std::ceil(pi * pi / (2.0 * t * k * k)));
    }

    int node_count() const { return M + N + 1; }
    double node(int l) const { return k * l; }
};

/// Applies A_s^{-1}, the inverse of the H^s(Gamma) Gram operator built from
/// the boundary mass M and stiffness L (A_1 = M + L), to scalar vectors.
/// Integer orders use exact solves, the fractional part the sinc sum
///   Q^{-t} = (k sin(pi t)/pi) sum_l e^{(1-t) y_l} ((e^{y_l}+1) M + L)^{-1}.
/// For s = m + t the composition is Q^{-t} M ((M+L)^{-1} M)^{m-1} (M+L)^{-1}.
class FractionalInverse {
public:
    FractionalInverse(SparseMatrix M, SparseMatrix L, double s, double k) : M_(std::move(M)), L_(std::move(L)), s_(s), k_(k) {
        if (!(s > 0.0)) throw LinalgError("fractional order must be positive");
        m_ = static_cast<int>(std::floor(s + 1e-12));
        const double t = s - m_;
        if (t > 1e-12) {
            rule_ = SincRule(t, k);
            nodes_.resize(static_cast<std::size_t>(rule_->node_count()));
            flags_ = std::make_unique<std::once_flag[]>(nodes_.size());
        }
        if (m_ > 0) A1_.compute(SparseMatrix(M_ + L_));
    }

    double order() const { return s_; }
    const std::optional<SincRule>& rule() const { return rule_; }

    /// Sinc sum Q^{-t} applied to rhs (a functional, i.e. tested vector).
    Vector sinc_apply(const Vector& rhs) const {
        const auto& r = *rule_;
        Vector out = Vector::Zero(rhs.size());
        for (int l = -r.M; l <= r.N; ++l) {
            const auto& f = node_factor(l);
            const double y = r.node(l);
            out += std::exp((1.0 - r.t) * y) * f.solve(rhs);
        }
        return (r.k * std::sin(pi * r.t) / pi) * out;
    }

    Vector apply(const Vector& rhs) const {
        if (m_ == 0) return sinc_apply(rhs);
        Vector x = A1_.solve(rhs);
        for (int i = 1; i < m_; ++i) x = A1_.solve(M_ * x);
        if (rule_) x = sinc_apply(M_ * x);
        return x;
    }

private:
    const Factorization& node_factor(int l) const {
        const auto idx = static_cast<std::size_t>(l + rule_->M);
        std::call_once(flags_[idx], [&] {
            const double e = std::exp(rule_->node(l)) + 1.0;
            nodes_[idx].compute(SparseMatrix(e * M_ + L_));
        });
        return nodes_[idx];
    }

    SparseMatrix M_, L_;
    double s_, k_;
    int m_ = 0;
    Factorization A1_;
    std::optional<SincRule> rule_;
    mutable std::vector<Factorization> nodes_;
    mutable std::unique_ptr<std::once_flag[]> flags_;
};

/// Convenience wrapper for single applications.
inline Vector fractional_inverse_apply(const SparseMatrix& M, const SparseMatrix& L, double s, double k,
                                       const Vector& rhs) {
    return FractionalInverse(M, L, s, k).apply(rhs);
}

inline double condition_number(const Matrix& A) {
    if (A.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(A);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

enum class GramMode { plain, jacobi, jacobi_threshold };

inline std::string to_string(GramMode m) {
    switch (m) {
        case GramMode::plain: return "plain";
        case GramMode::jacobi: return "jacobi";
        case GramMode::jacobi_threshold: return "jacobi_threshold";
    }
    return "?";
}

inline GramMode parse_gram_mode(const std::string& s) {
    if (s == "plain") return GramMode::plain;
    if (s == "jacobi") return GramMode::jacobi;
    if (s == "jacobi_threshold") return GramMode::jacobi_threshold;
    throw ConfigError("unknown Gram mode '" + s + "'");
}

struct PinvReport {
    double cond = 1.0;       // of the mode's matrix, before truncation
    double cond_kept = 1.0;  // sigma_max over the smallest kept singular value
    Index rank = 0;
};

struct PinvResult {
    Vector x;
    PinvReport report;
};

inline PinvResult pinv_solve(const Matrix& G, const Vector& rhs, GramMode mode, double eps = 0.0) {
    if (G.rows() != G.cols() || G.rows() != rhs.size()) throw LinalgError("pinv_solve: dimension mismatch");
    PinvResult out;
    const Index m = G.rows();
    if (m == 0) {
        out.x = Vector(0);
        return out;
    }
    // numerical rank at machine precision, for the untruncated modes
    auto numerical_rank = [m](const Vector& sv) {
        Index r = 0;
        for (Index i = 0; i < sv.size(); ++i)
            if (sv(i) > static_cast<double>(m) * std::numeric_limits<double>::epsilon() * sv(0)) ++r;
        return r;
    };
    // backslash-style solve: ill-conditioned systems are solved, not rejected
    auto lu_solve = [](const Matrix& A, const Vector& b) {
        Vector x = Eigen::PartialPivLU<Matrix>(A).solve(b);
        if (!x.allFinite()) throw LinalgError("pinv_solve: singular Gram matrix");
        return x;
    };
    if (mode == GramMode::plain) {
        Eigen::JacobiSVD<Matrix> svd(G);
        const auto& sv = svd.singularValues();
        out.x = lu_solve(G, rhs);
        out.report.cond = sv(m - 1) == 0.0 ? std::numeric_limits<double>::infinity() : sv(0) / sv(m - 1);
        out.report.rank = numerical_rank(sv);
        out.report.cond_kept = out.report.cond;
        return out;
    }
    Vector dinv(m);
    for (Index i = 0; i < m; ++i) {
        if (!(G(i, i) > 0.0)) throw LinalgError("pinv_solve: non-positive diagonal entry " + std::to_string(i));
        dinv[i] = 1.0 / std::sqrt(G(i, i));
    }
    const Matrix Gp = dinv.asDiagonal() * G * dinv.asDiagonal();
    const Vector b = dinv.cwiseProduct(rhs);
    Vector y;
    Eigen::JacobiSVD<Matrix> svd(Gp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    out.report.cond = sv(m - 1) == 0.0 ? std::numeric_limits<double>::infinity() : sv(0) / sv(m - 1);
    if (mode == GramMode::jacobi) {
        y = lu_solve(Gp, b);
        out.report.rank = numerical_rank(sv);
        out.report.cond_kept = out.report.cond;
    } else {
        const double cut = eps * sv(0);
        Vector ub = svd.matrixU().transpose() * b;
        Index rank = 0;
        for (Index i = 0; i < m; ++i) {
            if (sv(i) >= cut && sv(i) > 0.0) {
                ub[i] /= sv(i);
                ++rank;
            } else {
                ub[i] = 0.0;
            }
        }
        y = svd.matrixV() * ub;
        out.report.rank = rank;
        out.report.cond_kept = rank > 0 ? sv(0) / sv(rank - 1) : 1.0;
    }
    out.x = dinv.cwiseProduct(y);
    return out;
}

}  // namespace stokes_rec
