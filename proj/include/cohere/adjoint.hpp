#pragma once

// Gradient of |rho_12| with respect to the Green's tensor and the block
// placement merit built from it.

#include <span>
#include <vector>

#include "cohere/analytic_greens.hpp"
#include "cohere/coherence.hpp"
#include "cohere/geometry.hpp"
#include "cohere/greens_field.hpp"

namespace cohere {

struct CoherenceGradient {
    /// d|rho_12|/dG in the Wirtinger sense: delta|rho| ~ 2 Re[value . delta G].
    ComplexMatrix3 value;
    /// rho_12 was numerically zero and the phase-free direction was used.
    bool subgradient = false;
    cplx rho12 = 0.0;
};

/// Gradient of |rho_12| at Im G = im_g. Below |rho| = 1e-14 the |.| chain rule
/// is singular; the unit-phase direction d rho / dG is returned instead.
inline CoherenceGradient coherence_gradient(const ComplexMatrix3& im_g, const DipolePair& pair) {
    detail::require_symmetric(im_g);
    detail::require_passive(im_g);
    const double na = contract(pair.N(), im_g).real();
    if (!(na > 0.0))
        throw Error(Errc::degenerate_environment, "N . Im G must be positive (no decay channel)");
    const cplx ka = contract(pair.K(), im_g);
    const cplx rho = ka / na;
    // d rho / d(Im G)
    const ComplexMatrix3 d = (pair.K() * na - pair.N() * ka) / (na * na);
    const cplx half_over_i = 1.0 / (2.0 * I);

    CoherenceGradient g;
    g.rho12 = rho;
    const double mag = std::abs(rho);
    if (mag < 1e-14) {
        g.value = d * half_over_i;
        g.subgradient = true;
        return g;
    }
    ComplexMatrix3 re;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) re(i, j) = (std::conj(rho) * d(i, j)).real() / mag;
    g.value = re * half_over_i;
    return g;
}

/// delta F(r'') = Re[ grad . G^T(r'', r) G(r'', r) ] with positive prefactors dropped.
inline double merit_density(const CoherenceGradient& grad, const ComplexMatrix3& greens_col) {
    return contract(grad.value, greens_col.transpose() * greens_col).real();
}

inline double merit_density(const ComplexMatrix3& g_at_atom, const ComplexMatrix3& greens_col,
                            const DipolePair& pair) {
    return merit_density(coherence_gradient(g_at_atom.imag(), pair), greens_col);
}

struct ChiCoordinates {
    Vec3 zeta_pp{};
    double chi = 0.0;

    explicit ChiCoordinates(const Vec3& z) : zeta_pp(z), chi(pi * norm(z)) {}
};

/// The vacuum merit in chi and zeta'' for the perpendicular pair at the origin,
/// as a polynomial-trigonometric numerator without the chi^-8 envelope.
inline double vacuum_merit_polynomial(const Vec3& zeta_pp) {
    const ChiCoordinates c(zeta_pp);
    const double x = c.chi, x2 = x * x;
    const double p = x2 * x2 + x2 - 3.0;
    const double q = 2.0 * x * (x2 + 3.0);
    const double cs = std::cos(2.0 * x), sn = std::sin(2.0 * x);
    const double zy = zeta_pp[1], zz = zeta_pp[2];
    return 2.0 * (p * cs - q * sn) * zy * zz + (q * cs + p * sn) * (zz * zz - zy * zy);
}

/// Vacuum merit density including the chi^-8 fall-off, so it is proportional
/// to merit_density evaluated on the analytic free-space tensor.
inline double vacuum_merit_density(const Vec3& zeta_pp) {
    const ChiCoordinates c(zeta_pp);
    if (c.chi == 0.0) throw Error(Errc::domain, "vacuum merit is singular at the atom (chi = 0)");
    const double c2 = c.chi * c.chi, c4 = c2 * c2;
    return vacuum_merit_polynomial(zeta_pp) / (c4 * c4);
}

struct MeritEntry {
    BlockIndex block;
    Vec3 center_zeta{};
    double value = 0.0;
};

struct MeritField {
    std::vector<MeritEntry> entries;

    /// Highest merit; equal values resolve to the lowest block index.
    const MeritEntry& argmax() const {
        if (entries.empty()) throw Error(Errc::region_exhausted, "no free candidate block");
        const MeritEntry* best = &entries.front();
        for (const auto& e : entries)
            if (e.value > best->value || (e.value == best->value && e.block < best->block)) best = &e;
        return *best;
    }
};

namespace detail {
inline Vec3 to_zeta(const Vec3& p) {
    return {UnitsConvention::zeta(p[0]), UnitsConvention::zeta(p[1]), UnitsConvention::zeta(p[2])};
}

template <class CellMerit>
MeritField block_merits(const RegionSpec& region, std::span<const BlockIndex> candidates, const GridMap& map,
                        CellMerit&& cell_merit) {
    MeritField f;
    f.entries.reserve(candidates.size());
    for (const auto& b : candidates) {
        const Box box = region.block_box(b);
        const CellBox cells = map.cells_of(box.lo, box.hi);
        double sum = 0.0;
        for (int i = cells.lo.i; i < cells.hi.i; ++i)
            for (int j = cells.lo.j; j < cells.hi.j; ++j)
                for (int k = cells.lo.k; k < cells.hi.k; ++k) sum += cell_merit(CellIndex{i, j, k});
        f.entries.push_back({b, to_zeta(box.center()), sum});
    }
    return f;
}
} // namespace detail

/// Per-candidate merit, summed over the voxel centres of each block.
inline MeritField merit_field_over_region(const GreensField& field, const ComplexMatrix3& g_at_atom,
                                          const DipolePair& pair, const RegionSpec& region,
                                          std::span<const BlockIndex> candidates) {
    const CoherenceGradient grad = coherence_gradient(g_at_atom.imag(), pair);
    return detail::block_merits(region, candidates, field.map,
                                [&](const CellIndex& c) { return merit_density(grad, field.at(c)); });
}

inline MeritField merit_field_over_region(const GreensField& field, const ComplexMatrix3& g_at_atom,
                                          const DipolePair& pair, const RegionSpec& region) {
    const auto all = region.all_blocks();
    return merit_field_over_region(field, g_at_atom, pair, region, all);
}

/// Block merit from the analytic free-space tensor with the atom at `atom`
/// (length units), sampled at the same voxel centres as the FDTD field.
inline MeritField vacuum_merit_field(const RegionSpec& region, std::span<const BlockIndex> candidates,
                                     const GridMap& map, const Vec3& atom, const DipolePair& pair) {
    const double w = UnitsConvention::omega0;
    const CoherenceGradient grad = coherence_gradient(vacuum_im_greens_equal(w), pair);
    return detail::block_merits(region, candidates, map, [&](const CellIndex& c) {
        return merit_density(grad, vacuum_greens(map.cell_center(c), atom, w));
    });
}

} // namespace cohere
