#pragma once

// Candidate-block lattice of the optimization region and the voxel geometry
// handed to the FDTD engine.

#include <compare>
#include <cstdio>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cohere/core.hpp"

namespace cohere {

struct BlockIndex {
    int ix = 0, iy = 0, iz = 0;
    auto operator<=>(const BlockIndex&) const = default;
};

inline std::string to_string(const BlockIndex& b) {
    return "(" + std::to_string(b.ix) + "," + std::to_string(b.iy) + "," + std::to_string(b.iz) + ")";
}

/// Axis-aligned box in simulation length units, [lo, hi).
struct Box {
    Vec3 lo{};
    Vec3 hi{};
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool contains(const Vec3& p) const {
        for (int a = 0; a < 3; ++a)
            if (p[a] < lo[a] || p[a] >= hi[a]) return false;
        return true;
    }
};

/// The optimization slab, subdivided into cubic candidate blocks. Defaults
/// give a 3 x 3 wavelength square, one lambda/6 block deep, centred at the
/// origin.
struct RegionSpec {
    double extent_x = 3.0;
    double extent_y = 3.0;
    int layers = 1;
    double block_size = 1.0 / 6.0;
    Vec3 center{0.0, 0.0, 0.0};

    int nx() const { return static_cast<int>(std::lround(extent_x / block_size)); }
    int ny() const { return static_cast<int>(std::lround(extent_y / block_size)); }
    int nz() const { return layers; }
    std::size_t size() const { return static_cast<std::size_t>(nx()) * ny() * nz(); }

    bool contains(const BlockIndex& b) const {
        return b.ix >= 0 && b.ix < nx() && b.iy >= 0 && b.iy < ny() && b.iz >= 0 && b.iz < nz();
    }

    Box bounds() const {
        const Vec3 half{0.5 * nx() * block_size, 0.5 * ny() * block_size, 0.5 * nz() * block_size};
        return {center - half, center + half};
    }

    Box block_box(const BlockIndex& b) const {
        const Box r = bounds();
        const Vec3 lo{r.lo[0] + b.ix * block_size, r.lo[1] + b.iy * block_size, r.lo[2] + b.iz * block_size};
        return {lo, lo + Vec3{block_size, block_size, block_size}};
    }

    Vec3 block_center(const BlockIndex& b) const { return block_box(b).center(); }

    /// Candidate indices in lexicographic (ix, iy, iz) order.
    std::vector<BlockIndex> all_blocks() const {
        std::vector<BlockIndex> v;
        v.reserve(size());
        for (int i = 0; i < nx(); ++i)
            for (int j = 0; j < ny(); ++j)
                for (int k = 0; k < nz(); ++k) v.push_back({i, j, k});
        return v;
    }

    bool operator==(const RegionSpec&) const = default;
};

/// Discretized dielectric environment around the atom.
struct VoxelGeometry {
    RegionSpec region;
    /// Perfect-conductor slab under the region footprint, `backplate_depth` deep.
    bool backplate = false;
    double backplate_depth = 0.5;
    /// Perfect-conductor slab spanning the whole transverse grid (half-space
    /// proxy); its top face sits at the region's lower face.
    bool halfspace = false;
    std::set<BlockIndex> blocks;
    double block_permittivity = 3.0;
    /// Atom position in simulation length units.
    Vec3 atom{0.0, 0.0, 0.0};

    /// z of the mirror surface when a backplate or half-space is present.
    double mirror_z() const { return region.bounds().lo[2]; }

    Vec3 atom_zeta() const {
        return {UnitsConvention::zeta(atom[0]), UnitsConvention::zeta(atom[1]), UnitsConvention::zeta(atom[2])};
    }

    std::vector<BlockIndex> free_blocks() const {
        std::vector<BlockIndex> v;
        for (const auto& b : region.all_blocks())
            if (!blocks.contains(b)) v.push_back(b);
        return v;
    }

    void validate() const {
        for (const auto& b : blocks)
            if (!region.contains(b))
                throw Error(Errc::geometry, "block " + to_string(b) + " lies outside the region lattice");
        for (const auto& b : blocks)
            if (region.block_box(b).contains(atom))
                throw Error(Errc::geometry, "atom lies inside block " + to_string(b));
        if ((backplate || halfspace) && atom[2] <= mirror_z())
            throw Error(Errc::geometry, "atom lies inside the mirror");
    }
};

/// 64-bit FNV-1a over the canonical text form of a geometry.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

/// Stable text form used for hashing; the file formats in io.hpp carry the same information.
inline std::string canonical_text(const VoxelGeometry& g) {
    using detail::fmt_double;
    std::string s;
    s += "region " + fmt_double(g.region.extent_x) + " " + fmt_double(g.region.extent_y) + " " +
         std::to_string(g.region.layers) + " " + fmt_double(g.region.block_size) + " " +
         fmt_double(g.region.center[0]) + " " + fmt_double(g.region.center[1]) + " " +
         fmt_double(g.region.center[2]) + "\n";
    s += "backplate " + std::to_string(g.backplate) + " " + fmt_double(g.backplate_depth) + "\n";
    s += "halfspace " + std::to_string(g.halfspace) + "\n";
    s += "eps " + fmt_double(g.block_permittivity) + "\n";
    s += "atom " + fmt_double(g.atom[0]) + " " + fmt_double(g.atom[1]) + " " + fmt_double(g.atom[2]) + "\n";
    for (const auto& b : g.blocks) s += "block " + to_string(b) + "\n";
    return s;
}

inline std::uint64_t geometry_hash(const VoxelGeometry& g) { return fnv1a(canonical_text(g)); }

} // namespace cohere
