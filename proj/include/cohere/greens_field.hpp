#pragma once

// Uniform-grid bookkeeping shared by the FDTD engine and the merit evaluation,
// and the sampled Green's tensor G(r'', r_atom, omega0) it produces.

#include <cmath>
#include <compare>
#include <string>
#include <vector>

#include "cohere/core.hpp"

namespace cohere {

struct CellIndex {
    int i = 0, j = 0, k = 0;
    auto operator<=>(const CellIndex&) const = default;
};

inline std::string to_string(const CellIndex& c) {
    return "[" + std::to_string(c.i) + "," + std::to_string(c.j) + "," + std::to_string(c.k) + "]";
}

/// Half-open range of cells [lo, hi) along each axis.
struct CellBox {
    CellIndex lo;
    CellIndex hi;

    bool contains(const CellIndex& c) const {
        return c.i >= lo.i && c.i < hi.i && c.j >= lo.j && c.j < hi.j && c.k >= lo.k && c.k < hi.k;
    }
    int nx() const { return hi.i - lo.i; }
    int ny() const { return hi.j - lo.j; }
    int nz() const { return hi.k - lo.k; }
    std::size_t size() const {
        return nx() <= 0 || ny() <= 0 || nz() <= 0 ? 0 : static_cast<std::size_t>(nx()) * ny() * nz();
    }
    bool operator==(const CellBox&) const = default;
};

/// Maps simulation coordinates to cubic cells of side `spacing`. Node m sits at
/// coordinate (m - offset) * spacing; cell c spans [node c, node c + 1).
struct GridMap {
    double spacing = 1.0 / 12.0;
    int offset = 0;
    int cells = 0;

    double node_coord(int m) const { return (m - offset) * spacing; }
    /// Cell containing x; corners that land on a node within rounding go to the upper cell.
    int cell_floor(double x) const { return static_cast<int>(std::floor(x / spacing + 1e-9)) + offset; }
    int nearest_node(double x) const { return static_cast<int>(std::lround(x / spacing)) + offset; }

    Vec3 cell_center(const CellIndex& c) const {
        return {node_coord(c.i) + 0.5 * spacing, node_coord(c.j) + 0.5 * spacing, node_coord(c.k) + 0.5 * spacing};
    }
    Vec3 node_position(const CellIndex& m) const { return {node_coord(m.i), node_coord(m.j), node_coord(m.k)}; }

    /// Cells whose lower corner lies in [lo, hi), i.e. floor-snapped box.
    CellBox cells_of(const Vec3& lo, const Vec3& hi) const {
        return {{cell_floor(lo[0]), cell_floor(lo[1]), cell_floor(lo[2])},
                {cell_floor(hi[0]), cell_floor(hi[1]), cell_floor(hi[2])}};
    }

    bool operator==(const GridMap&) const = default;
};

/// G(r'', r_atom, omega0) at the centres of a box of cells, plus the equal-point
/// tensor at the atom. Column j holds the field from a source polarized along j.
struct GreensField {
    GridMap map;
    CellBox cells;
    std::vector<ComplexMatrix3> values;
    ComplexMatrix3 at_atom;
    Vec3 atom{};
    double calibration = 1.0;

    std::size_t offset_of(const CellIndex& c) const {
        return (static_cast<std::size_t>(c.i - cells.lo.i) * cells.ny() + (c.j - cells.lo.j)) * cells.nz() +
               (c.k - cells.lo.k);
    }

    bool covers(const CellIndex& c) const { return cells.contains(c) && offset_of(c) < values.size(); }

    const ComplexMatrix3& at(const CellIndex& c) const {
        if (!covers(c))
            throw Error(Errc::missing_data, "Green's field has no sample for voxel " + to_string(c));
        return values[offset_of(c)];
    }

    void scale(double factor) {
        for (auto& v : values) v *= factor;
        at_atom *= factor;
    }
};

} // namespace cohere
