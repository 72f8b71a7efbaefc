#include "stokes_recovery/riesz.hpp"

#include <gtest/gtest.h>

using namespace stokes_rec;

namespace {

struct Problem {
    Mesh mesh;
    DofLayout layout;
    TraceMesh trace;
    OperatorBundle ob;
    std::unique_ptr<RieszContext> ctx;

    Problem(Mesh m, std::set<int> unknown) : mesh(std::move(m)) {
        layout = build_layout(mesh, unknown);
        trace = trace_mesh(layout);
        ob = assemble_bundle(layout, trace);
        ctx = std::make_unique<RieszContext>(layout, ob);
    }
};

double rel(const Vector& a, const Vector& b) {
    const double scale = std::max(b.norm(), 1e-30);
    return (a - b).norm() / scale;
}

std::vector<Functional> eight_functionals() {
    std::vector<Functional> fs;
    const std::vector<Point> zs{{0.3, 0.3}, {0.7, 0.35}, {0.4, 0.75}, {0.62, 0.6}};
    for (std::size_t i = 0; i < zs.size(); ++i) fs.push_back({zs[i], 1 + static_cast<int>(i % 2), 0.1});
    for (const auto& z : zs) fs.push_back({z, 3, 0.1});
    return fs;
}

// lambda_i(phi_j) through the assembled functional vectors.
double evaluate(const RieszContext& ctx, const Functional& fi, const RieszRepresenter& rj) {
    const auto v = full_functional_vectors(ctx.layout(), fi, ctx.quadrature());
    return v.velocity.dot(rj.velocity()) + v.pressure.dot(rj.R0) + rj.Lambda * v.pressure.sum();
}

}  // namespace

TEST(MeanConstant, Values) {
    Problem p(generate_unit_square(3), {1});
    EXPECT_EQ(mean_constant(Functional{{0.5, 0.5}, 1, 0.1}, *p.ctx), 0.0);
    const double want = std::sqrt(2.0 * pi) * 0.1 * std::pow(std::erf(0.5 / (0.1 * std::sqrt(2.0))), 2);
    EXPECT_NEAR(mean_constant(Functional{{0.5, 0.5}, 3, 0.1}, *p.ctx), want, 1e-8);
}

TEST(Steps, ZeroInputs) {
    Problem p(generate_unit_square(2), {1});
    FunctionalVectors fv{Vector::Zero(p.layout.interior_size()), Vector::Zero(p.layout.boundary_size()),
                         Vector::Zero(p.layout.num_pressure())};
    auto [Pi, P] = solve_multipliers(*p.ctx, fv, 1e-9);
    EXPECT_EQ(Pi.norm() + P.norm(), 0.0);
    auto [Wb, g] = solve_boundary_trace(*p.ctx, fv, Pi, P, 1.0, 0.4);
    EXPECT_EQ(Wb.norm(), 0.0);
    EXPECT_EQ(g, 0.0);
    auto [W0, R0] = lift_interior(*p.ctx, Wb, 1e-9);
    EXPECT_EQ(W0.norm() + R0.norm(), 0.0);
}

TEST(Steps, ManufacturedMultipliers) {
    Problem p(generate_unit_square(2), {1});
    Vector Pi = Vector::LinSpaced(p.layout.interior_size(), -1.0, 2.0).array().sin();
    Vector P = Vector::LinSpaced(p.layout.num_pressure(), 0.0, 3.0).array().cos();
    P.array() -= p.ob.pressure_mass.dot(P) / p.ob.pressure_mass.sum();
    const double tol = 1e-10;
    FunctionalVectors fv{p.ob.K0 * Pi + p.ob.B0.transpose() * P, Vector::Zero(p.layout.boundary_size()), p.ob.B0 * Pi};
    auto [Pi2, P2] = solve_multipliers(*p.ctx, fv, tol);
    EXPECT_LE(rel(Pi2, Pi), 1e3 * tol);
    EXPECT_LE(rel(P2, P), 1e3 * tol);
}

TEST(Steps, RigidMotionLift) {
    for (int n : {2, 3}) {
        Problem p(generate_unit_square(n), {1});
        auto rigid = [](Point x) { return std::array<double, 2>{0.4 - 1.3 * x.y, -0.7 + 1.3 * x.x}; };
        const Vector v = interpolate_velocity(p.layout, rigid);
        const Vector Wb = v.tail(p.layout.boundary_size());
        EXPECT_LE(std::abs(p.ob.D.dot(Wb)), 1e-13 * Wb.norm());
        const double tol = 1e-11;
        auto [W0, R0] = lift_interior(*p.ctx, Wb, tol);
        EXPECT_LE(rel(W0, v.head(p.layout.interior_size())), 10 * tol * 100);
        EXPECT_LE(R0.norm(), 1e-8);
    }
}

TEST(Oracle, AgreesWithDecoupledPath) {
    for (int n : {2, 3}) {
        Problem p(generate_unit_square(n), {1});
        for (const auto& f : eight_functionals()) {
            double res = 0.0;
            const auto o = monolithic_oracle(f, *p.ctx, &res);
            EXPECT_LE(res, 1e-10);
            const auto d = compute_representer(f, *p.ctx, 1.0, 0.4, 1e-13);
            EXPECT_LE(rel(d.Wb, o.Wb), 1e-8) << "n=" << n << " comp=" << f.component;
            EXPECT_LE(rel(d.W0, o.W0), 1e-8);
            EXPECT_LE(rel(d.R0, o.R0), 1e-8);
            EXPECT_LE(rel(d.Pi, o.Pi), 1e-8);
            EXPECT_LE(rel(d.P, o.P), 1e-8);
            EXPECT_NEAR(d.gamma, o.gamma, 1e-8 * std::max(1.0, std::abs(o.gamma)));
            EXPECT_EQ(d.Lambda, o.Lambda);
        }
    }
}

TEST(Oracle, PartialKnowledge) {
    Problem p(generate_square_with_hole(0, {0.5, 0.5}, 0.1), {2});
    for (const auto& f : eight_functionals()) {
        const auto o = monolithic_oracle(f, *p.ctx);
        const auto d = compute_representer(f, *p.ctx, 1.0, 0.4, 1e-13);
        EXPECT_LE(rel(d.Wb, o.Wb), 1e-8);
        EXPECT_LE(rel(d.W0, o.W0), 1e-8);
        EXPECT_LE(rel(d.R0, o.R0), 1e-8);
    }
}

TEST(Oracle, SizeGuard) {
    Problem p(generate_unit_square(5), {1});
    EXPECT_THROW(monolithic_oracle(Functional{{0.5, 0.5}, 1, 0.1}, *p.ctx), Error);
}

TEST(Representer, CompatibilityAndMeans) {
    Problem p(generate_unit_square(3), {1});
    for (double s : {0.6, 1.0, 1.4}) {
        for (const auto& f : eight_functionals()) {
            const auto r = compute_representer(f, *p.ctx, s, 0.4, 1e-9);
            EXPECT_LE(std::abs(p.ob.D.dot(r.Wb)), 1e-9 * r.Wb.norm());
            EXPECT_LE(std::abs(p.ob.pressure_mass.dot(r.R0)), 1e-12 * std::max(1.0, r.R0.norm()));
            EXPECT_LE(std::abs(p.ob.pressure_mass.dot(r.P)), 1e-12 * std::max(1.0, r.P.norm()));
            if (!f.is_pressure()) EXPECT_EQ(r.Lambda, 0.0);
        }
    }
}

TEST(Representer, DiagonalPositive) {
    Problem p(generate_unit_square(2), {1});
    const Functional f{{0.5, 0.5}, 3, 0.1};
    const auto r = compute_representer(f, *p.ctx, 1.0, 0.4, 1e-9);
    EXPECT_GT(evaluate(*p.ctx, f, r), r.Lambda * r.Lambda * 0.999);
}

TEST(Representer, ReproducingIdentityAndSymmetry) {
    Problem p(generate_unit_square(3), {1});
    std::vector<Functional> fs;
    const auto grid = gaussian_centers_grid(2, p.mesh);
    for (int c = 1; c <= 3; ++c)
        for (const auto& z : grid) fs.push_back({z, c, 0.1});
    ASSERT_EQ(fs.size(), 12u);
    const auto reps = compute_representers(fs, *p.ctx, 1.0, 0.4, 1e-10, 1);
    const std::size_t m = fs.size();
    Matrix G(m, m), A(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            G(i, j) = evaluate(*p.ctx, fs[i], reps[j]);
            A(i, j) = p.ctx->a1(reps[i].Wb, reps[j].Wb) + reps[i].Lambda * reps[j].Lambda;
        }
    const double scale = G.cwiseAbs().maxCoeff();
    EXPECT_LE((G - G.transpose()).cwiseAbs().maxCoeff(), 1e-7 * scale);
    EXPECT_LE((G - A).cwiseAbs().maxCoeff(), 1e-7 * scale);
}

TEST(Representer, ParallelMatchesSerial) {
    Problem p(generate_unit_square(2), {1});
    const auto fs = eight_functionals();
    const auto a = compute_representers(fs, *p.ctx, 0.6, 0.4, 1e-9, 1);
    RieszContext fresh(p.layout, p.ob);
    const auto b = compute_representers(fs, fresh, 0.6, 0.4, 1e-9, 3);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        EXPECT_EQ(a[i].Wb, b[i].Wb);
        EXPECT_EQ(a[i].W0, b[i].W0);
    }
}
