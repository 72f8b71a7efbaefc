#include "stokes_recovery/mesh.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace stokes_rec;

TEST(UnitSquare, Counts) {
    const auto m0 = generate_unit_square(0);
    EXPECT_EQ(m0.num_cells(), 1);
    EXPECT_EQ(m0.num_vertices(), 4);
    const auto m2 = generate_unit_square(2);
    EXPECT_EQ(m2.num_cells(), 16);
    EXPECT_EQ(m2.num_vertices(), 25);
    EXPECT_EQ(m2.boundary_edges.size(), 16u);
    const auto m6 = generate_unit_square(6);
    EXPECT_EQ(m6.num_cells(), 4096);
    EXPECT_EQ(m6.num_vertices(), 4225);
    EXPECT_NO_THROW(m6.validate());
}

TEST(UnitSquare, AreaAndNesting) {
    for (int n = 0; n <= 5; ++n) EXPECT_NEAR(generate_unit_square(n).area(), 1.0, 1e-14);
    const auto coarse = generate_unit_square(3);
    const auto fine = generate_unit_square(4);
    std::set<std::pair<double, double>> pts;
    for (auto p : fine.vertices) pts.insert({p.x, p.y});
    for (auto p : coarse.vertices) EXPECT_TRUE(pts.count({p.x, p.y}));
}

TEST(UnitSquare, BoundaryLoop) {
    const auto loops = boundary_loops(generate_unit_square(2));
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_TRUE(loops[0].closed);
    EXPECT_EQ(loops[0].edge_count(), 16u);
    EXPECT_NEAR(loops[0].arc_length, 4.0, 1e-14);
    EXPECT_GT(loops[0].signed_area, 0.0);
}

TEST(SquareWithHole, PublishedCellCounts) {
    EXPECT_EQ(generate_square_with_hole(4, {0.5, 0.5}, 0.1).num_cells(), 10240);
    EXPECT_EQ(generate_square_with_hole(5, {0.5, 0.5}, 0.1).num_cells(), 40960);
}

TEST(SquareWithHole, ValidAndInscribed) {
    for (int n = 0; n <= 4; ++n) {
        const auto m = generate_square_with_hole(n, {0.5, 0.5}, 0.1);
        EXPECT_NO_THROW(m.validate()) << "n=" << n;
        EXPECT_EQ(m.num_cells(), 40 << (2 * n));
        for (Index c = 0; c < m.num_cells(); ++c) ASSERT_GT(m.cell_signed_area(c), 0.0);
        const auto loops = boundary_loops(m);
        ASSERT_EQ(loops.size(), 2u);
        EXPECT_EQ(loops[0].marker, 1);
        EXPECT_NEAR(loops[0].arc_length, 4.0, 1e-13);
        EXPECT_EQ(loops[1].marker, 2);
        EXPECT_LT(loops[1].signed_area, 0.0);  // hole traversed clockwise
        const double nloop = static_cast<double>(loops[1].edge_count());
        EXPECT_NEAR(loops[1].arc_length, 2.0 * nloop * 0.1 * std::sin(pi / nloop), 1e-12);
        for (auto v : loops[1].vertices) {
            const double d = norm(m.vertices[static_cast<std::size_t>(v)] - Point{0.5, 0.5});
            EXPECT_LE(d, 0.1 + 1e-14);
            EXPECT_GE(d, 0.1 * std::cos(pi / nloop) - 1e-14);
        }
    }
}

TEST(SquareWithHole, AreaDecreasesToDisc) {
    double prev = 2.0;
    const double target = 1.0 - pi * 0.01;
    for (int n = 0; n <= 5; ++n) {
        const double a = generate_square_with_hole(n, {0.5, 0.5}, 0.1).area();
        EXPECT_GT(a, target);
        EXPECT_LT(a, prev);
        prev = a;
    }
    EXPECT_NEAR(prev, target, 1e-4);
}

TEST(SquareWithHole, OffCenter) {
    const auto m = generate_square_with_hole(2, {0.3, 0.6}, 0.05);
    EXPECT_NO_THROW(m.validate());
    EXPECT_THROW(generate_square_with_hole(2, {0.5, 0.5}, 0.5), MeshError);
    EXPECT_THROW(generate_square_with_hole(2, {0.95, 0.5}, 0.1), MeshError);
}

TEST(MeshFormat, RoundTrip) {
    for (const auto& m : {generate_unit_square(2), generate_square_with_hole(1, {0.5, 0.5}, 0.1)}) {
        const auto back = import_mesh(export_mesh(m));
        EXPECT_EQ(back, m);
    }
}

TEST(MeshFormat, CommentsAccepted) {
    const std::string text =
        "# a single cell\nmesh 2\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n"
        "boundary 4\n0 1 1\n1 2 1\n# top\n2 3 1\n3 0 1\nmarkers 1\n1 wall\n";
    const auto m = import_mesh(text);
    EXPECT_EQ(m.num_cells(), 1);
    EXPECT_EQ(m.markers.at(1), "wall");
}

TEST(MeshFormat, ClockwiseCellNamed) {
    const std::string text =
        "mesh 2\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 3 2 1\n"
        "boundary 4\n0 1 1\n1 2 1\n2 3 1\n3 0 1\nmarkers 1\n1 wall\n";
    try {
        import_mesh(text);
        FAIL() << "expected a topology error";
    } catch (const MeshError& e) {
        EXPECT_NE(std::string(e.what()).find("cell 0"), std::string::npos);
    }
}

TEST(MeshFormat, ParseErrorLocation) {
    const std::string text = "mesh 2\nvertices 1\n0 zero\n";
    try {
        import_mesh(text);
        FAIL() << "expected a parse error";
    } catch (const MeshError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column 3"), std::string::npos) << msg;
    }
}

TEST(MeshFormat, OpenBoundaryRejected) {
    const std::string text =
        "mesh 2\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n"
        "boundary 3\n0 1 1\n1 2 1\n2 3 1\nmarkers 1\n1 wall\n";
    EXPECT_THROW(import_mesh(text), MeshError);
}

TEST(SquareWithHole, NoOrphanVertices) {
    const auto m = generate_square_with_hole(3, {0.5, 0.5}, 0.1);
    std::vector<char> used(m.vertices.size(), 0);
    for (const auto& c : m.cells)
        for (auto v : c) used[static_cast<std::size_t>(v)] = 1;
    for (char u : used) EXPECT_TRUE(u);
    // annulus: V - E + C = 0 and E = 2C + (boundary edges)/2, hence V = C + |hole loop|
    EXPECT_EQ(m.num_vertices(), m.num_cells() + 16 * 8);
}

TEST(MeshFormat, OrphanVertexRejected) {
    const std::string text =
        "mesh 2\nvertices 5\n0 0\n1 0\n1 1\n0 1\n5 5\ncells 1\n0 1 2 3\n"
        "boundary 4\n0 1 1\n1 2 1\n2 3 1\n3 0 1\nmarkers 1\n1 wall\n";
    EXPECT_THROW(import_mesh(text), MeshError);
}
