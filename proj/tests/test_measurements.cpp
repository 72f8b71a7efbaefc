#include "stokes_recovery/measurements.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace stokes_rec;

namespace {

// Separable closed form of the Gaussian integral of 1 over the unit square.
double gaussian_mass_unit_square(Point z, double r) {
    auto axis = [r](double c) {
        return 0.5 * (std::erf((1.0 - c) / (r * std::sqrt(2.0))) + std::erf(c / (r * std::sqrt(2.0))));
    };
    return std::sqrt(2.0 * pi) * r * axis(z.x) * axis(z.y);
}

AnalyticField constant_pressure(double c) {
    return {[](Point) { return std::array<double, 2>{0.0, 0.0}; }, [c](Point) { return c; }};
}

AnalyticField case1() {
    return {[](Point x) { return std::array<double, 2>{std::exp(x.x) * std::cos(x.y), -std::exp(x.x) * std::sin(x.y) + 2 * x.x * x.x}; },
            [](Point x) { return 2.0 * (2.0 * x.y - 1.0); }};
}

DiscreteField interpolant(const DofLayout& L, const AnalyticField& f) {
    return {&L, interpolate_velocity(L, f.u), interpolate_pressure(L, f.p), 0.0};
}

}  // namespace

TEST(Grid, Formula) {
    const auto sq = generate_unit_square(1);
    const auto g1 = gaussian_centers_grid(1, sq);
    ASSERT_EQ(g1.size(), 1u);
    EXPECT_EQ(g1[0], (Point{0.5, 0.5}));
    const auto g2 = gaussian_centers_grid(2, sq);
    ASSERT_EQ(g2.size(), 4u);
    EXPECT_NEAR(g2[1].x, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(g2[1].y, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(g2[2].x, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(g2[2].y, 2.0 / 3.0, 1e-15);
    EXPECT_EQ(gaussian_centers_grid(6, sq).size(), 36u);
    EXPECT_THROW(gaussian_centers_grid(0, sq), Error);
}

TEST(Grid, HoleFiltering) {
    const auto m = generate_square_with_hole(2, {0.5, 0.5}, 0.1);
    const auto exact = gaussian_centers_grid(5, m, {{{0.5, 0.5}, 0.1}});
    EXPECT_EQ(exact.size(), 24u);
    const auto poly = gaussian_centers_grid(5, m);
    EXPECT_EQ(poly.size(), 24u);
    for (const auto& z : exact) EXPECT_FALSE(z == (Point{0.5, 0.5}));
}

TEST(Analytic, ConstantPressureGaussianMass) {
    const auto m = generate_unit_square(4);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const Functional f{{0.5, 0.5}, 3, 0.1};
    const double want = gaussian_mass_unit_square({0.5, 0.5}, 0.1);
    EXPECT_NEAR(want, 0.25066, 1e-5);
    EXPECT_NEAR(apply_to_analytic(f, constant_pressure(1.0), Q), want, 1e-9);
    const Functional fu{{0.5, 0.5}, 1, 0.1};
    EXPECT_EQ(apply_to_analytic(fu, constant_pressure(1.0), Q), 0.0);
}

TEST(Analytic, Linearity) {
    const auto m = generate_unit_square(3);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const AnalyticField a = case1();
    const AnalyticField b{[](Point x) { return std::array<double, 2>{std::sin(3 * x.x), x.y * x.x}; },
                          [](Point x) { return std::cos(x.x + 2 * x.y); }};
    const AnalyticField c{[&](Point x) {
                              auto ua = a.u(x), ub = b.u(x);
                              return std::array<double, 2>{2.0 * ua[0] - 0.5 * ub[0], 2.0 * ua[1] - 0.5 * ub[1]};
                          },
                          [&](Point x) { return 2.0 * a.p(x) - 0.5 * b.p(x); }};
    for (int comp = 1; comp <= 3; ++comp) {
        const Functional f{{0.3, 0.7}, comp, 0.1};
        const double lhs = apply_to_analytic(f, c, Q);
        const double rhs = 2.0 * apply_to_analytic(f, a, Q) - 0.5 * apply_to_analytic(f, b, Q);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(Discrete, ConstantsAndZero) {
    const auto m = generate_unit_square(3);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const Functional f{{0.4, 0.6}, 3, 0.1};
    EXPECT_NEAR(apply_to_discrete(f, interpolant(L, constant_pressure(1.0)), Q),
                apply_to_analytic(f, constant_pressure(1.0), Q), 1e-14);
    EXPECT_EQ(apply_to_discrete(f, DiscreteField::zero(L), Q), 0.0);
}

TEST(Discrete, InterpolantCloseToAnalytic) {
    const auto m = generate_unit_square(6);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const auto field = case1();
    const auto d = interpolant(L, field);
    const auto grid = gaussian_centers_grid(6, m);
    const auto set = make_measurement_set(grid, grid);
    const Vector wa = measurement_vector(set, field, Q);
    const Vector wd = measurement_vector(set, d, Q);
    EXPECT_EQ(wa.size(), 108);
    EXPECT_LE((wa - wd).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Discrete, DualityWithAssembledVectors) {
    const auto m = generate_square_with_hole(1, {0.5, 0.5}, 0.1);
    const auto L = build_layout(m, {1, 2});
    const FunctionalQuadrature Q(L);
    std::mt19937 gen(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DiscreteField fld = DiscreteField::zero(L);
    for (Index i = 0; i < fld.velocity.size(); ++i) fld.velocity[i] = u(gen);
    for (Index i = 0; i < fld.pressure.size(); ++i) fld.pressure[i] = u(gen);
    for (int comp = 1; comp <= 3; ++comp) {
        const Functional f{{0.21, 0.77}, comp, 0.1};
        const auto fv = functional_vectors(L, f, Q);
        const double dual = fv.F0.dot(fld.velocity.head(L.interior_size())) +
                            fv.Fb.dot(fld.velocity.tail(L.boundary_size())) + fv.G.dot(fld.pressure);
        EXPECT_NEAR(apply_to_discrete(f, fld, Q), dual, 1e-13);
    }
}

TEST(Vectors, PartitionOfUnitySums) {
    const auto m = generate_unit_square(3);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const Functional fp{{0.5, 0.5}, 3, 0.1};
    const auto vp = functional_vectors(L, fp, Q);
    EXPECT_NEAR(vp.G.sum(), apply_to_analytic(fp, constant_pressure(1.0), Q), 1e-14);
    EXPECT_EQ(vp.F0.norm() + vp.Fb.norm(), 0.0);
    const Functional fu{{0.5, 0.5}, 1, 0.1};
    const auto vu = functional_vectors(L, fu, Q);
    EXPECT_EQ(vu.G.norm(), 0.0);
    EXPECT_NEAR(vu.F0.sum() + vu.Fb.sum(), gaussian_mass_unit_square({0.5, 0.5}, 0.1), 1e-9);
}

TEST(Set, ConstantPressureSymmetricGrid) {
    const auto m = generate_unit_square(4);
    const auto L = build_layout(m, {1});
    const FunctionalQuadrature Q(L);
    const auto set = make_measurement_set({}, gaussian_centers_grid(2, m));
    const Vector w = measurement_vector(set, constant_pressure(1.0), Q);
    ASSERT_EQ(w.size(), 4);
    for (Index i = 1; i < 4; ++i) EXPECT_NEAR(w[i], w[0], 1e-8);
    EXPECT_EQ(measurement_vector(MeasurementSet{}, constant_pressure(1.0), Q).size(), 0);
}

TEST(Csv, RoundTrip) {
    auto set = make_measurement_set({{0.25, 0.5}}, {{0.75, 0.125}});
    set.values = Vector::LinSpaced(3, 0.1, 0.3);
    std::stringstream ss;
    write_measurements_csv(ss, set);
    const auto back = read_measurements_csv(ss);
    EXPECT_EQ(back.functionals, set.functionals);
    ASSERT_TRUE(back.values.has_value());
    EXPECT_EQ(*back.values, *set.values);

    std::stringstream no_values("kind,component,cx,cy,r,value\ngaussian,3,0.5,0.5,0.1,\n");
    const auto nv = read_measurements_csv(no_values);
    EXPECT_EQ(nv.size(), 1u);
    EXPECT_FALSE(nv.values.has_value());
    std::stringstream bad("kind,component,cx,cy,r,value\ngaussian,9,0.5,0.5,0.1,\n");
    EXPECT_THROW(read_measurements_csv(bad), Error);
}
