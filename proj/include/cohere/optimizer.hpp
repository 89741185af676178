#pragma once

// Iterative block placement guided by the merit density, and the single-pass
// variant that fills every block with positive vacuum merit at once.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "cohere/adjoint.hpp"
#include "cohere/coherence.hpp"
#include "cohere/fdtd.hpp"
#include "cohere/geometry.hpp"

namespace cohere {

enum class Scenario { backplate, freestanding };

inline const char* to_string(Scenario s) { return s == Scenario::backplate ? "backplate" : "freestanding"; }

/// First antinode of the mirror-induced coherence, cached.
inline double first_antinode() {
    static const double z = antinodes(1).front();
    return z;
}

struct OptimizationConfig {
    Scenario scenario = Scenario::backplate;
    Rotation rotation = Rotation::perpendicular;
    /// Atom height in zeta: above the plate for the backplate scenario, above
    /// the region mid-plane when freestanding. Unset means the first antinode.
    std::optional<double> atom_zeta;
    int max_iterations = 20;
    double dipole_d = 1.0;
    double dipole_mu = 1.0;
    FdtdConfig fdtd;
    RegionSpec region;
    double backplate_depth = 0.5;
    double block_permittivity = 3.0;

    double zeta() const { return atom_zeta ? *atom_zeta : first_antinode(); }

    void validate() const {
        if (!(zeta() > 0.0)) throw Error(Errc::invalid_argument, "atom_zeta must be positive");
        if (max_iterations < 1) throw Error(Errc::invalid_argument, "max_iterations must be >= 1");
        if (region.nx() < 1 || region.ny() < 1 || region.layers < 1 || !(region.block_size > 0.0))
            throw Error(Errc::invalid_argument, "region must contain at least one block");
        if (!(block_permittivity >= 1.0)) throw Error(Errc::invalid_argument, "block permittivity must be >= 1");
        fdtd.validate();
    }

    DipolePair dipoles() const { return standard_dipoles(rotation, dipole_d, dipole_mu); }

    /// Empty region, plate if requested, atom on the z axis.
    VoxelGeometry initial_geometry() const {
        VoxelGeometry g;
        g.region = region;
        g.backplate = scenario == Scenario::backplate;
        g.backplate_depth = backplate_depth;
        g.block_permittivity = block_permittivity;
        const double h = UnitsConvention::length(zeta());
        const double base = g.backplate ? g.mirror_z() : region.center[2];
        g.atom = {region.center[0], region.center[1], base + h};
        return g;
    }
};

struct TraceRecord {
    int iteration = 0;
    BlockIndex placed;
    double merit_max = 0.0;
    cplx rho12 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    cplx kappa12 = 0.0;
    double wall_seconds = 0.0;
};

struct OptimizationTrace {
    VoxelGeometry initial;
    std::vector<TraceRecord> records;
    std::map<int, VoxelGeometry> snapshots;

    /// Index into `records` of the largest |rho_12| (earliest on ties).
    std::size_t best_index() const {
        if (records.empty()) throw Error(Errc::invalid_argument, "empty trace");
        std::size_t b = 0;
        for (std::size_t i = 1; i < records.size(); ++i)
            if (std::abs(records[i].rho12) > std::abs(records[b].rho12)) b = i;
        return b;
    }
    int best_iteration() const { return records[best_index()].iteration; }

    /// Geometry whose coherence was recorded at `iteration` (blocks placed before it).
    VoxelGeometry geometry_at(int iteration) const {
        VoxelGeometry g = initial;
        for (const auto& r : records)
            if (r.iteration < iteration) g.blocks.insert(r.placed);
        return g;
    }
    VoxelGeometry best_geometry() const { return geometry_at(best_iteration()); }
};

/// Im G at the atom with the antisymmetric discretization remainder removed;
/// a reciprocal medium has a symmetric equal-point tensor.
inline ComplexMatrix3 reciprocal_im(const ComplexMatrix3& g) {
    const ComplexMatrix3 a = g.imag();
    return 0.5 * (a + a.transpose());
}

struct Evaluation {
    cplx rho12 = 0.0;
    RateSet rates;
};

inline Evaluation evaluate(const ComplexMatrix3& g_at_atom, const DipolePair& pair) {
    const ComplexMatrix3 a = reciprocal_im(g_at_atom);
    return {steady_coherence(a, pair), rates_from_greens(a, pair)};
}

/// Blocks still free that do not contain the atom.
inline std::vector<BlockIndex> candidate_blocks(const VoxelGeometry& g) {
    std::vector<BlockIndex> v;
    for (const auto& b : g.free_blocks())
        if (!g.region.block_box(b).contains(g.atom)) v.push_back(b);
    return v;
}

struct IterationResult {
    VoxelGeometry geometry;
    TraceRecord record;
};

/// Simulate the current geometry, record its coherence, and place one block at
/// the merit maximum. A block is placed even if the best merit is negative.
inline IterationResult iterate_once(const VoxelGeometry& geometry, const OptimizationConfig& config,
                                    int iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto candidates = candidate_blocks(geometry);
    if (candidates.empty()) throw Error(Errc::region_exhausted, "every candidate block is occupied");
    const DipolePair pair = config.dipoles();
    const GreensField field = greens_field(geometry, config.fdtd);
    ComplexMatrix3 g_atom = field.at_atom;
    const Evaluation ev = evaluate(g_atom, pair);
    // the gradient wants a symmetric Im part; keep the real part as simulated
    const ComplexMatrix3 sym = g_atom.real() + I * reciprocal_im(g_atom);
    const MeritField merit = merit_field_over_region(field, sym, pair, geometry.region, candidates);
    const MeritEntry& best = merit.argmax();

    IterationResult out{geometry, {}};
    out.geometry.blocks.insert(best.block);
    auto& r = out.record;
    r.iteration = iteration;
    r.placed = best.block;
    r.merit_max = best.value;
    r.rho12 = ev.rho12;
    r.gamma1 = ev.rates.gamma1;
    r.gamma2 = ev.rates.gamma2;
    r.kappa12 = ev.rates.kappa12;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct Checkpoint {
    VoxelGeometry geometry;
    int iteration = 0; ///< iterations already completed
};

using IterationObserver = std::function<void(const TraceRecord&, const VoxelGeometry& after)>;

/// Run up to config.max_iterations placements (fewer if the region fills).
/// With a checkpoint, continues from its geometry; records carry absolute
/// iteration numbers. `snapshot_every` > 0 stores the geometry after every
/// that many iterations.
inline OptimizationTrace run_optimization(const OptimizationConfig& config,
                                          std::optional<Checkpoint> resume = std::nullopt,
                                          const IterationObserver& observer = {}, int snapshot_every = 0) {
    config.validate();
    OptimizationTrace trace;
    trace.initial = config.initial_geometry();
    VoxelGeometry g = trace.initial;
    int done = 0;
    if (resume) {
        g = resume->geometry;
        done = resume->iteration;
        if (g.blocks.size() != static_cast<std::size_t>(done))
            throw Error(Errc::invalid_argument, "checkpoint block count does not match its iteration counter");
        // records for the earlier iterations are not re-derived; the initial
        // geometry keeps the checkpoint's blocks so geometry_at stays correct
        trace.initial = g;
    }
    for (int it = done + 1; it <= config.max_iterations; ++it) {
        if (candidate_blocks(g).empty()) break;
        IterationResult step = iterate_once(g, config, it);
        g = std::move(step.geometry);
        trace.records.push_back(step.record);
        if (snapshot_every > 0 && it % snapshot_every == 0) trace.snapshots.emplace(it, g);
        if (observer) observer(step.record, g);
    }
    return trace;
}

struct SinglePassResult {
    VoxelGeometry geometry;
    MeritField merit;
    cplx rho12 = 0.0;
    RateSet rates;
};

/// Fill every candidate whose analytic vacuum block merit is positive, then
/// evaluate the coherence with one simulation.
inline SinglePassResult single_pass(const OptimizationConfig& config) {
    config.validate();
    SinglePassResult out;
    out.geometry = config.initial_geometry();
    const GridMap map = config.fdtd.grid_map();
    const Vec3 atom = snap_to_node(out.geometry.atom, map);
    const auto candidates = candidate_blocks(out.geometry);
    out.merit = vacuum_merit_field(config.region, candidates, map, atom, config.dipoles());
    for (const auto& e : out.merit.entries)
        if (e.value > 0.0) out.geometry.blocks.insert(e.block);
    const GreensField field = greens_field(out.geometry, config.fdtd, CellBox{});
    const Evaluation ev = evaluate(field.at_atom, config.dipoles());
    out.rho12 = ev.rho12;
    out.rates = ev.rates;
    return out;
}

} // namespace cohere
