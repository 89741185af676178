#include <gtest/gtest.h>

#include "cohere/optimizer.hpp"

using namespace cohere;

namespace {
OptimizationConfig coarse(Scenario s = Scenario::backplate, int iterations = 3) {
    OptimizationConfig c;
    c.scenario = s;
    c.rotation = s == Scenario::backplate ? Rotation::perpendicular : Rotation::parallel;
    c.max_iterations = iterations;
    c.fdtd.resolution = 8;
    c.fdtd.box_half_extent = 1.0;
    c.fdtd.pml_thickness = 0.5;
    c.region.extent_x = c.region.extent_y = 1.0;
    c.region.block_size = 0.25;
    return c;
}

void expect_same_records(const TraceRecord& a, const TraceRecord& b) {
    EXPECT_EQ(a.iteration, b.iteration);
    EXPECT_EQ(a.placed, b.placed);
    EXPECT_EQ(a.merit_max, b.merit_max);
    EXPECT_EQ(a.rho12, b.rho12);
    EXPECT_EQ(a.gamma1, b.gamma1);
    EXPECT_EQ(a.kappa12, b.kappa12);
}
} // namespace

TEST(Scenario, InitialGeometry) {
    OptimizationConfig c;
    const VoxelGeometry g = c.initial_geometry();
    EXPECT_TRUE(g.backplate);
    EXPECT_TRUE(g.blocks.empty());
    EXPECT_NEAR(UnitsConvention::zeta(g.atom[2] - g.mirror_z()), 0.7627, 5e-4);
    c.scenario = Scenario::freestanding;
    c.atom_zeta = 0.5;
    const VoxelGeometry f = c.initial_geometry();
    EXPECT_FALSE(f.backplate);
    EXPECT_NEAR(f.atom[2], 0.25, 1e-15);
    c.max_iterations = 0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Optimizer, SingleIterationTrace) {
    const OptimizationTrace t = run_optimization(coarse(Scenario::backplate, 1));
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].iteration, 1);
    EXPECT_TRUE(t.initial.blocks.empty());
    EXPECT_GT(t.records[0].gamma1, 0.0);
    EXPECT_LE(std::abs(t.records[0].rho12), 0.5);
    EXPECT_EQ(t.best_geometry().blocks.size(), 0u);
}

TEST(Optimizer, PlacesDistinctBlocksMonotonically) {
    std::vector<std::size_t> sizes;
    const OptimizationTrace t =
        run_optimization(coarse(Scenario::backplate, 4), std::nullopt,
                         [&](const TraceRecord&, const VoxelGeometry& g) { sizes.push_back(g.blocks.size()); });
    ASSERT_EQ(t.records.size(), 4u);
    std::set<BlockIndex> seen;
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_EQ(t.records[i].iteration, static_cast<int>(i) + 1);
        EXPECT_TRUE(seen.insert(t.records[i].placed).second);
        EXPECT_EQ(sizes[i], i + 1);
    }
    const VoxelGeometry g = t.geometry_at(4);
    EXPECT_EQ(g.blocks.size(), 3u);
}

TEST(Optimizer, DeterministicAndResumable) {
    const OptimizationConfig c = coarse(Scenario::freestanding, 3);
    std::vector<VoxelGeometry> after;
    const OptimizationTrace a =
        run_optimization(c, std::nullopt, [&](const TraceRecord&, const VoxelGeometry& g) { after.push_back(g); }, 1);
    const OptimizationTrace b = run_optimization(c);
    ASSERT_EQ(a.records.size(), 3u);
    ASSERT_EQ(b.records.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) expect_same_records(a.records[i], b.records[i]);
    EXPECT_EQ(a.snapshots.size(), 3u);
    EXPECT_EQ(geometry_hash(a.snapshots.at(2)), geometry_hash(after[1]));

    const OptimizationTrace r = run_optimization(c, Checkpoint{after[0], 1});
    ASSERT_EQ(r.records.size(), 2u);
    expect_same_records(r.records[0], a.records[1]);
    expect_same_records(r.records[1], a.records[2]);

    EXPECT_THROW(run_optimization(c, Checkpoint{after[0], 2}), Error);
}

TEST(Optimizer, StopsWhenTheRegionIsFull) {
    OptimizationConfig c = coarse(Scenario::backplate, 5);
    c.region.extent_x = c.region.extent_y = 0.5; // 2 x 2 blocks
    const OptimizationTrace t = run_optimization(c);
    EXPECT_EQ(t.records.size(), 4u);
    VoxelGeometry full = c.initial_geometry();
    for (const auto& b : c.region.all_blocks()) full.blocks.insert(b);
    try {
        iterate_once(full, c, 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::region_exhausted);
    }
}

TEST(SinglePass, FillsExactlyThePositiveMeritBlocks) {
    const OptimizationConfig c = coarse(Scenario::backplate, 1);
    const SinglePassResult s = single_pass(c);
    ASSERT_FALSE(s.merit.entries.empty());
    for (const auto& e : s.merit.entries) EXPECT_EQ(s.geometry.blocks.contains(e.block), e.value > 0.0);
    EXPECT_FALSE(s.geometry.blocks.empty());
    EXPECT_LT(s.geometry.blocks.size(), s.merit.entries.size());
    EXPECT_LE(std::abs(s.rho12), 0.5);
    const SinglePassResult again = single_pass(c);
    EXPECT_EQ(again.rho12, s.rho12);
}

TEST(Evaluate, SymmetrizesTheEqualPointTensor) {
    ComplexMatrix3 g = ComplexMatrix3::identity() * cplx(0.2, 1.0);
    g(1, 2) = cplx(0.0, 0.1);
    g(2, 1) = cplx(0.0, 0.3);
    const Evaluation e = evaluate(g, standard_dipoles(Rotation::perpendicular, 1.0, 1.0));
    // K_yz + K_zy = -i, averaged off-diagonal 0.2, N . A = 2
    EXPECT_NEAR(std::abs(e.rho12 - cplx(0.0, -0.1)), 0.0, 1e-15);
}
