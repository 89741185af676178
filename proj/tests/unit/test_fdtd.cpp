#include <gtest/gtest.h>

#include "cohere/analytic_greens.hpp"
#include "cohere/fdtd.hpp"

using namespace cohere;

namespace {
FdtdConfig small_config() {
    FdtdConfig c;
    c.resolution = 8;
    c.box_half_extent = 1.0;
    c.pml_thickness = 0.5;
    return c;
}

VoxelGeometry with_atom(double z) {
    VoxelGeometry g;
    g.atom = {0.0, 0.0, z};
    return g;
}

double rel(const cplx& a, const cplx& b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }
} // namespace

TEST(Rasterize, BlockCoversTwoCellsPerSide) {
    FdtdConfig c;
    VoxelGeometry g = with_atom(0.5);
    g.blocks = {{0, 0, 0}};
    const MaterialGrid m = rasterize(g, c);
    ASSERT_EQ(m.map.cells, 72);
    int count = 0;
    for (double e : m.eps) count += (e == 3.0);
    EXPECT_EQ(count, 8);
    const Box b = g.region.block_box({0, 0, 0});
    const CellBox cb = m.map.cells_of(b.lo, b.hi);
    EXPECT_EQ(cb.size(), 8u);
    EXPECT_EQ(m.eps_at(cb.lo.i, cb.lo.j, cb.lo.k), 3.0);
}

TEST(Rasterize, BackplateDepthAndFootprint) {
    FdtdConfig c;
    VoxelGeometry g = with_atom(0.5);
    g.backplate = true;
    const MaterialGrid m = rasterize(g, c);
    std::size_t n = 0;
    for (auto p : m.pec) n += p;
    EXPECT_EQ(n, 36u * 36u * 6u);
    const int top = m.map.cell_floor(g.mirror_z());
    const int mid = m.map.nearest_node(0.0);
    EXPECT_TRUE(m.pec_at(mid, mid, top - 1));
    EXPECT_FALSE(m.pec_at(mid, mid, top));
    EXPECT_TRUE(m.pec_at(mid, mid, top - 6));
    EXPECT_FALSE(m.pec_at(mid, mid, top - 7));
}

TEST(Rasterize, AtomTouchingMaterialIsRejected) {
    FdtdConfig c;
    VoxelGeometry g = with_atom(0.0);
    g.blocks = {{8, 8, 0}}; // block spanning x, y in [-1/6, 0]
    // outside the block, but the nearest node is on its corner
    g.atom = {0.01, 0.01, 1.0 / 12.0 + 0.01};
    try {
        rasterize(g, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::geometry);
    }
}

TEST(Config, InvalidFdtdSettings) {
    FdtdConfig c;
    c.courant_factor = 0.7;
    EXPECT_THROW(c.validate(), Error);
    c = FdtdConfig{};
    c.resolution = 3;
    EXPECT_THROW(c.validate(), Error);
    c = FdtdConfig{};
    c.decay_threshold = 0.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Engine, ConductorKillsTangentialField) {
    const FdtdConfig c = small_config();
    VoxelGeometry g = with_atom(0.5);
    g.region.extent_x = g.region.extent_y = 1.0;
    g.halfspace = true;
    const MaterialGrid m = rasterize(g, c);
    FdtdEngine e(m, c);
    const double plate = m.map.node_coord(m.map.cell_floor(g.mirror_z()));
    const Vec3 atom = snap_to_node(g.atom, m.map);
    const auto r = e.run_point_source(atom, Axis::z, {{0.0, 0.0, plate}, {0.25, -0.125, plate}});
    for (const auto& p : r.probes) {
        EXPECT_EQ(std::abs(p[0]), 0.0);
        EXPECT_EQ(std::abs(p[1]), 0.0);
        EXPECT_GT(std::abs(p[2]), 1e-3);
    }
}

TEST(Engine, MirrorSymmetryBetweenXAndY) {
    const FdtdConfig c = small_config();
    FdtdEngine e(rasterize(VoxelGeometry{}, c), c);
    const Vec3 p{0.25, 0.375, -0.125}, q{0.375, 0.25, -0.125};
    const auto rx = e.run_point_source({0.0, 0.0, 0.0}, Axis::x, {p});
    const auto ry = e.run_point_source({0.0, 0.0, 0.0}, Axis::y, {q});
    EXPECT_LT(rel(rx.probes[0][0], ry.probes[0][1]), 1e-10);
    EXPECT_LT(rel(rx.probes[0][1], ry.probes[0][0]), 1e-10);
    EXPECT_LT(rel(rx.probes[0][2], ry.probes[0][2]), 1e-10);
}

TEST(Engine, Reciprocity) {
    // run long enough that spectral truncation stays below the tolerance
    FdtdConfig c = small_config();
    c.decay_threshold = 1e-9;
    VoxelGeometry g;
    g.region.extent_x = g.region.extent_y = 1.0;
    g.blocks = {{1, 2, 0}, {3, 3, 0}};
    g.atom = {0.0, 0.0, 0.5};
    FdtdEngine e(rasterize(g, c), c);
    const Vec3 a{0.0, 0.0, 0.5}, b{0.25, -0.375, -0.25};
    const auto ra = e.run_point_source(a, Axis::x, {b});
    const auto rb = e.run_point_source(b, Axis::z, {a});
    // G_zx(b, a) against G_xz(a, b)
    EXPECT_LT(rel(ra.probes[0][2], rb.probes[0][0]), 1e-4);
}

TEST(Engine, StableLongAfterTheSourceEnds) {
    const FdtdConfig c = small_config();
    FdtdEngine e(rasterize(VoxelGeometry{}, c), c);
    const auto r = e.run_point_source({0.0, 0.0, 0.0}, Axis::z, {});
    const double after = e.max_abs_e();
    e.step_free(10 * r.steps);
    EXPECT_LE(e.max_abs_e(), after * 1.01);
    EXPECT_TRUE(std::isfinite(e.max_abs_e()));
}

TEST(Engine, AbsorberReflectionIsSmall) {
    // the default absorber, with a box twice as large as reference
    FdtdConfig small;
    small.box_half_extent = 1.0;
    FdtdConfig big = small;
    big.box_half_extent = 2.0;
    const std::vector<Vec3> probes{{0.5, 0.0, 0.0}, {0.75, 0.0, 0.0}, {0.0, 0.5, 0.25}};
    FdtdEngine es(rasterize(VoxelGeometry{}, small), small);
    FdtdEngine eb(rasterize(VoxelGeometry{}, big), big);
    const auto rs = es.run_point_source({0.0, 0.0, 0.0}, Axis::z, probes);
    const auto rb = eb.run_point_source({0.0, 0.0, 0.0}, Axis::z, probes);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        double diff = 0.0, ref = 0.0;
        for (int i = 0; i < 3; ++i) {
            diff = std::max(diff, std::abs(rs.probes[p][i] - rb.probes[p][i]));
            ref = std::max(ref, std::abs(rb.probes[p][i]));
        }
        EXPECT_LT(diff, 1e-4 * ref) << "probe " << p;
    }
}

TEST(Engine, ThreadCountDoesNotChangeResults) {
    FdtdConfig one = small_config();
    FdtdConfig three = one;
    three.threads = 3;
    FdtdEngine e1(rasterize(VoxelGeometry{}, one), one);
    FdtdEngine e3(rasterize(VoxelGeometry{}, three), three);
    const Vec3 p{0.125, 0.25, 0.375};
    const auto r1 = e1.run_point_source({0.0, 0.0, 0.0}, Axis::y, {p});
    const auto r3 = e3.run_point_source({0.0, 0.0, 0.0}, Axis::y, {p});
    EXPECT_EQ(r1.steps, r3.steps);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(r1.probes[0][i], r3.probes[0][i]);
}

TEST(Engine, NonConvergenceIsReported) {
    FdtdConfig c = small_config();
    c.max_steps = 50;
    FdtdEngine e(rasterize(VoxelGeometry{}, c), c);
    try {
        e.run_point_source({0.0, 0.0, 0.0}, Axis::x, {});
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::convergence);
    }
}

TEST(Calibration, DeterministicAndResolutionStable) {
    FdtdConfig c12;
    c12.box_half_extent = 1.0;
    c12.pml_thickness = 0.5;
    FdtdConfig c24 = c12;
    c24.resolution = 24;
    const double f12 = calibrate(c12);
    EXPECT_EQ(calibrate(c12), f12);
    FdtdConfig threaded = c12;
    threaded.threads = 2;
    EXPECT_EQ(calibrate(threaded), f12);
    const double f24 = calibrate(c24);
    EXPECT_GT(f12, 0.0);
    EXPECT_LT(std::abs(f12 - f24) / f24, 0.05);
}

TEST(GreensField, MatchesAnalyticVacuumAwayFromTheSource) {
    FdtdConfig c;
    c.box_half_extent = 1.5;
    c.pml_thickness = 0.75;
    VoxelGeometry g;
    g.region.extent_x = g.region.extent_y = 1.0;
    g.atom = {0.0, 0.0, 0.5};
    const GreensField f = greens_field(g, c);
    EXPECT_EQ(f.cells, region_cells(g, f.map));
    ASSERT_EQ(f.values.size(), f.cells.size());

    // equal-point tensor after calibration is close to the vacuum value
    const ComplexMatrix3 im = f.at_atom.imag();
    EXPECT_NEAR(im.trace().real(), 3.0 * UnitsConvention::omega0 / (6.0 * pi), 1e-4);

    double worst = 0.0, ref = 0.0;
    for (int i = f.cells.lo.i; i < f.cells.hi.i; i += 3)
        for (int j = f.cells.lo.j; j < f.cells.hi.j; j += 3)
            for (int k = f.cells.lo.k; k < f.cells.hi.k; ++k) {
                const CellIndex cell{i, j, k};
                const ComplexMatrix3 a = vacuum_greens(f.map.cell_center(cell), f.atom, UnitsConvention::omega0);
                worst = std::max(worst, (f.at(cell) - a).max_abs());
                ref = std::max(ref, a.max_abs());
            }
    EXPECT_LT(worst, 0.15 * ref);
}
