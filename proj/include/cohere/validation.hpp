#pragma once

// Numerical error estimate from vacuum sampling, and the comparison of the
// FDTD mirror coherence against the closed form.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cohere/coherence.hpp"
#include "cohere/fdtd.hpp"
#include "cohere/optimizer.hpp"

namespace cohere {

struct ErrorBudget {
    int resolution = 0;
    double systematic = 0.0; ///< mean |rho_12|
    double random = 0.0;     ///< sample standard deviation of |rho_12|
    double total = 0.0;      ///< quadrature sum
    int n_samples = 0;

    static ErrorBudget from_samples(const std::vector<double>& v, int resolution) {
        ErrorBudget b;
        b.resolution = resolution;
        b.n_samples = static_cast<int>(v.size());
        if (v.empty()) return b;
        double s = 0.0;
        for (double x : v) s += x;
        b.systematic = s / static_cast<double>(v.size());
        if (v.size() > 1) {
            double ss = 0.0;
            for (double x : v) ss += (x - b.systematic) * (x - b.systematic);
            b.random = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
        b.total = std::sqrt(b.systematic * b.systematic + b.random * b.random);
        return b;
    }
};

/// Equal-point Green's tensor at a position.
using EqualPointEvaluator = std::function<ComplexMatrix3(const Vec3&)>;

struct SkippedSample {
    int index = 0;
    std::string reason;
};

struct VacuumProtocolResult {
    ErrorBudget budget;
    std::vector<Vec3> positions;      ///< all drawn positions, in draw order
    std::vector<double> samples;      ///< |rho_12| of the successful draws
    std::vector<double> running_total; ///< total error after each success
    std::vector<SkippedSample> skipped;

    /// Relative change of the running total between n1 and n2 successes.
    double drift(int n1, int n2) const {
        if (n1 < 2 || n2 > static_cast<int>(running_total.size()) || n1 >= n2)
            throw Error(Errc::invalid_argument, "drift needs 2 <= n1 < n2 <= successes");
        const double a = running_total[static_cast<std::size_t>(n1 - 1)];
        const double b = running_total[static_cast<std::size_t>(n2 - 1)];
        return std::abs(b - a) / b;
    }
};

/// Uniform draws inside the physical box, keeping 0.25 lambda from the absorber.
inline std::vector<Vec3> vacuum_sample_positions(const FdtdConfig& config, int n, std::uint64_t seed) {
    const double half = config.box_half_extent - 0.25 * UnitsConvention::lambda0;
    if (!(half > 0.0)) throw Error(Errc::invalid_argument, "box too small for vacuum sampling");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    std::vector<Vec3> v(static_cast<std::size_t>(n));
    for (auto& p : v)
        for (int a = 0; a < 3; ++a) p[a] = u(rng);
    return v;
}

/// FDTD evaluator on an empty grid; the source is not snapped.
inline EqualPointEvaluator fdtd_vacuum_evaluator(const FdtdConfig& config) {
    auto engine = std::make_shared<FdtdEngine>(rasterize(VoxelGeometry{}, config), config);
    return [engine](const Vec3& p) { return equal_point_greens(*engine, p); };
}

inline VacuumProtocolResult vacuum_error_protocol(const FdtdConfig& config, int n_samples, std::uint64_t seed,
                                                  EqualPointEvaluator evaluator = {}) {
    if (n_samples < 10) throw Error(Errc::protocol, "vacuum protocol needs at least 10 samples");
    config.validate();
    if (!evaluator) evaluator = fdtd_vacuum_evaluator(config);
    const DipolePair pair = standard_dipoles(Rotation::perpendicular, 1.0, 1.0);

    VacuumProtocolResult out;
    out.positions = vacuum_sample_positions(config, n_samples, seed);
    for (int i = 0; i < n_samples; ++i) {
        try {
            const ComplexMatrix3 g = evaluator(out.positions[static_cast<std::size_t>(i)]);
            out.samples.push_back(std::abs(steady_coherence(reciprocal_im(g), pair)));
        } catch (const Error& e) {
            out.skipped.push_back({i, e.what()});
            continue;
        }
        out.running_total.push_back(ErrorBudget::from_samples(out.samples, config.resolution).total);
    }
    if (out.samples.size() < 10)
        throw Error(Errc::protocol, "only " + std::to_string(out.samples.size()) +
                                        " vacuum samples succeeded; at least 10 are required");
    out.budget = ErrorBudget::from_samples(out.samples, config.resolution);
    return out;
}

struct BenchmarkRow {
    int resolution = 0;
    double zeta_requested = 0.0;
    double zeta = 0.0; ///< realized atom height above the conductor after snapping
    double fdtd = 0.0; ///< |rho_12|
    double analytic = 0.0;
    double difference = 0.0; ///< fdtd - analytic
    double total_error = 0.0;
    bool flagged = false;
};

/// Geometry for one benchmark point: conductor half-space below the region,
/// atom on the axis at height zeta (before snapping).
inline VoxelGeometry halfspace_geometry(double zeta) {
    VoxelGeometry g;
    g.halfspace = true;
    g.atom = {0.0, 0.0, g.mirror_z() + UnitsConvention::length(zeta)};
    return g;
}

/// Height of the conductor's top face as rasterized.
inline double rasterized_mirror(const VoxelGeometry& g, const GridMap& map) {
    return map.node_coord(map.cell_floor(g.mirror_z()));
}

inline BenchmarkRow reflector_point(const FdtdConfig& config, double zeta, double total_error) {
    if (!(zeta > 0.1)) throw Error(Errc::domain, "benchmark zeta must exceed 0.1");
    VoxelGeometry g = halfspace_geometry(zeta);
    const GridMap map = config.grid_map();
    g.atom[2] = rasterized_mirror(g, map) + UnitsConvention::length(zeta);
    const Vec3 atom = snap_to_node(g.atom, map);
    if (atom[2] >= config.box_half_extent)
        throw Error(Errc::domain, "benchmark zeta " + std::to_string(zeta) + " puts the atom outside the box");
    FdtdEngine engine(rasterize(g, config), config);
    const ComplexMatrix3 gm = equal_point_greens(engine, atom);
    const DipolePair pair = standard_dipoles(Rotation::perpendicular, 1.0, 1.0);

    BenchmarkRow r;
    r.resolution = config.resolution;
    r.zeta_requested = zeta;
    r.zeta = UnitsConvention::zeta(atom[2] - rasterized_mirror(g, map));
    r.fdtd = std::abs(steady_coherence(reciprocal_im(gm), pair));
    r.analytic = std::abs(reflector_coherence(r.zeta));
    r.difference = r.fdtd - r.analytic;
    r.total_error = total_error;
    r.flagged = std::abs(r.difference) > total_error;
    return r;
}

/// Every (resolution, zeta) pair; `totals` gives each resolution's error budget total.
inline std::vector<BenchmarkRow> reflector_benchmark(const FdtdConfig& base, const std::vector<int>& resolutions,
                                                     const std::vector<double>& zeta_grid,
                                                     const std::map<int, double>& totals) {
    std::vector<BenchmarkRow> rows;
    for (int res : resolutions) {
        const auto it = totals.find(res);
        if (it == totals.end())
            throw Error(Errc::missing_data, "no error budget for resolution " + std::to_string(res));
        FdtdConfig c = base;
        c.resolution = res;
        for (double z : zeta_grid) rows.push_back(reflector_point(c, z, it->second));
    }
    return rows;
}

/// zeta values in [lo, hi] that put the atom exactly on a node above the
/// rasterized conductor: multiples of 2 / resolution offset by the plate.
inline std::vector<double> node_zeta_grid(const FdtdConfig& config, double lo, double hi) {
    const VoxelGeometry g = halfspace_geometry(1.0);
    const GridMap map = config.grid_map();
    const double plate = rasterized_mirror(g, map);
    std::vector<double> out;
    for (int m = map.nearest_node(plate) + 1; m < map.cells; ++m) {
        const double z = UnitsConvention::zeta(map.node_coord(m) - plate);
        if (z > hi + 1e-9) break;
        if (z >= lo - 1e-9) out.push_back(z);
    }
    return out;
}

} // namespace cohere
