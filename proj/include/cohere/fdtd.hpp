#pragma once

// Three-dimensional Yee-lattice FDTD solver with convolutional PML absorbers,
// used to extract the dyadic Green's tensor of an arbitrary voxel geometry.
//
// Units: lambda0 = c = eps0 = mu0 = 1. E lives on cell edges at integer time
// steps, H on cell faces at half steps. A point current source of moment s(t)
// is spread over the nearest edges of its component with trilinear weights and
// the field is read back with the same weights, so a source on a node drives
// the two edges either side of it. With running DFTs E(w) and S(w), the
// discrete equations are exactly Maxwell's at the effective frequency
// W = 2 sin(w dt / 2) / dt, giving G = E(w) / (i W S(w)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

#include "cohere/core.hpp"
#include "cohere/geometry.hpp"
#include "cohere/greens_field.hpp"

namespace cohere {

struct FdtdConfig {
    int resolution = 12;                ///< cells per vacuum wavelength
    double box_half_extent = 2.0;       ///< half side of the physical box
    double pml_thickness = 1.0;         ///< absorber thickness outside the box
    double courant_factor = 0.5;        ///< c dt / dx
    double source_center_freq = UnitsConvention::omega0;
    double source_fractional_bandwidth = 0.4;
    double decay_threshold = 1e-6;
    long max_steps = 20000;
    int threads = 1;                    ///< worker cap; results do not depend on it

    double spacing() const { return UnitsConvention::lambda0 / resolution; }
    double dt() const { return courant_factor * spacing() / UnitsConvention::c; }
    int box_cells() const { return static_cast<int>(std::lround(box_half_extent * resolution)); }
    int pml_cells() const { return static_cast<int>(std::lround(pml_thickness * resolution)); }
    int cells() const { return 2 * (box_cells() + pml_cells()); }

    GridMap grid_map() const { return {spacing(), box_cells() + pml_cells(), cells()}; }

    void validate() const {
        if (resolution < 4) throw Error(Errc::invalid_argument, "resolution must be >= 4");
        if (!(courant_factor > 0.0) || courant_factor > 1.0 / std::sqrt(3.0) + 1e-15)
            throw Error(Errc::invalid_argument, "courant_factor must lie in (0, 1/sqrt(3)]");
        if (!(box_half_extent > 0.0)) throw Error(Errc::invalid_argument, "box_half_extent must be positive");
        if (pml_cells() < 1) throw Error(Errc::invalid_argument, "pml must be at least one cell thick");
        if (!(source_fractional_bandwidth > 0.0))
            throw Error(Errc::invalid_argument, "source bandwidth must be positive");
        if (!(decay_threshold > 0.0 && decay_threshold < 1.0))
            throw Error(Errc::invalid_argument, "decay_threshold must lie in (0, 1)");
        if (max_steps < 1) throw Error(Errc::invalid_argument, "max_steps must be positive");
    }

    /// Fields that change the numerical result (everything except threads).
    auto physics_key() const {
        return std::make_tuple(resolution, box_half_extent, pml_thickness, courant_factor, source_center_freq,
                               source_fractional_bandwidth, decay_threshold, max_steps);
    }
};

// ---------------------------------------------------------------------------
// rasterization

/// Per-cell relative permittivity and perfect-conductor flags over the whole
/// grid (PML included), indexed [i][j][k] with k fastest.
struct MaterialGrid {
    GridMap map;
    std::vector<double> eps;
    std::vector<std::uint8_t> pec;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * map.cells + j) * map.cells + k;
    }
    double eps_at(int i, int j, int k) const { return eps[index(i, j, k)]; }
    bool pec_at(int i, int j, int k) const { return pec[index(i, j, k)] != 0; }
};

namespace detail {
inline void fill_cells(MaterialGrid& g, CellBox b, double eps, bool pec) {
    const int n = g.map.cells;
    b.lo = {std::max(b.lo.i, 0), std::max(b.lo.j, 0), std::max(b.lo.k, 0)};
    b.hi = {std::min(b.hi.i, n), std::min(b.hi.j, n), std::min(b.hi.k, n)};
    for (int i = b.lo.i; i < b.hi.i; ++i)
        for (int j = b.lo.j; j < b.hi.j; ++j)
            for (int k = b.lo.k; k < b.hi.k; ++k) {
                if (pec)
                    g.pec[g.index(i, j, k)] = 1;
                else
                    g.eps[g.index(i, j, k)] = eps;
            }
}
} // namespace detail

/// Snap the atom to the nearest grid node.
inline Vec3 snap_to_node(const Vec3& p, const GridMap& map) {
    return {map.node_coord(map.nearest_node(p[0])), map.node_coord(map.nearest_node(p[1])),
            map.node_coord(map.nearest_node(p[2]))};
}

inline MaterialGrid rasterize(const VoxelGeometry& geometry, const FdtdConfig& config) {
    config.validate();
    geometry.validate();
    MaterialGrid g;
    g.map = config.grid_map();
    const std::size_t total = static_cast<std::size_t>(g.map.cells) * g.map.cells * g.map.cells;
    g.eps.assign(total, 1.0);
    g.pec.assign(total, 0);

    const Box region = geometry.region.bounds();
    if (geometry.backplate) {
        const Vec3 lo{region.lo[0], region.lo[1], region.lo[2] - geometry.backplate_depth};
        const Vec3 hi{region.hi[0], region.hi[1], region.lo[2]};
        detail::fill_cells(g, g.map.cells_of(lo, hi), 1.0, true);
    }
    if (geometry.halfspace) {
        const int top = g.map.cell_floor(region.lo[2]);
        const int bottom = g.map.cell_floor(region.lo[2] - geometry.backplate_depth);
        detail::fill_cells(g, {{0, 0, bottom}, {g.map.cells, g.map.cells, top}}, 1.0, true);
    }
    for (const auto& b : geometry.blocks) {
        const Box bb = geometry.region.block_box(b);
        detail::fill_cells(g, g.map.cells_of(bb.lo, bb.hi), geometry.block_permittivity, false);
    }

    // the atom must sit on a node touching only vacuum cells
    const Vec3 a = snap_to_node(geometry.atom, g.map);
    const int ai = g.map.nearest_node(a[0]), aj = g.map.nearest_node(a[1]), ak = g.map.nearest_node(a[2]);
    for (int i = ai - 1; i <= ai; ++i)
        for (int j = aj - 1; j <= aj; ++j)
            for (int k = ak - 1; k <= ak; ++k) {
                if (i < 0 || j < 0 || k < 0 || i >= g.map.cells || j >= g.map.cells || k >= g.map.cells)
                    throw Error(Errc::geometry, "atom lies outside the grid");
                if (g.pec_at(i, j, k) || g.eps_at(i, j, k) != 1.0)
                    throw Error(Errc::geometry, "atom touches material after snapping to the grid");
            }
    return g;
}

// ---------------------------------------------------------------------------
// engine

enum class Axis { x = 0, y = 1, z = 2 };

/// A set of lattice sites with interpolation weights for one field component.
struct SiteWeights {
    std::vector<std::size_t> index;
    std::vector<double> weight;
};

/// Result of one point-source run. Values are normalized Green's-tensor
/// columns, E(w) / (i W S(w)), before calibration.
struct PointSourceResult {
    Axis axis = Axis::x;
    Vec3 source{};
    /// G column (3 components) at each requested probe point
    std::vector<Vec3c> probes;
    /// G column at the centres of the requested cell box (empty if none)
    CellBox sample_cells;
    std::vector<Vec3c> samples;
    long steps = 0;
    double residual = 0.0; ///< worst last-period max over peak among the decay monitors
};

class FdtdEngine {
public:
    FdtdEngine(const MaterialGrid& material, const FdtdConfig& config)
        : config_(config), map_(material.map), n_(material.map.cells), np_(n_ + 2) {
        config_.validate();
        stride_x_ = static_cast<std::size_t>(np_) * np_;
        stride_y_ = static_cast<std::size_t>(np_);
        const std::size_t total = stride_x_ * np_;
        for (auto* f : {&ex_, &ey_, &ez_, &hx_, &hy_, &hz_}) f->assign(total, 0.0);
        build_coefficients(material);
        build_pml();
    }

    const GridMap& map() const { return map_; }
    const FdtdConfig& config() const { return config_; }

    /// Trilinear weights of the lattice sites of one E component around p.
    SiteWeights weights(int component, const Vec3& p) const {
        double u[3];
        for (int a = 0; a < 3; ++a) u[a] = p[a] / map_.spacing + map_.offset - (a == component ? 0.5 : 0.0);
        int base[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
            double fl = std::floor(u[a]);
            f[a] = u[a] - fl;
            if (f[a] < 1e-12) f[a] = 0.0;
            if (f[a] > 1.0 - 1e-12) {
                f[a] = 0.0;
                fl += 1.0;
            }
            base[a] = static_cast<int>(fl);
        }
        SiteWeights w;
        for (int dx = 0; dx < 2; ++dx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dz = 0; dz < 2; ++dz) {
                    const double wt = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
                    if (wt == 0.0) continue;
                    const int i = base[0] + dx, j = base[1] + dy, k = base[2] + dz;
                    if (i < 0 || j < 0 || k < 0 || i > n_ || j > n_ || k > n_)
                        throw Error(Errc::invalid_argument, "point lies outside the grid");
                    w.index.push_back(idx(i, j, k));
                    w.weight.push_back(wt);
                }
        return w;
    }

    /// Drive a Gaussian-pulse current along `axis` at `source` and return the
    /// normalized field at the probes and at the centres of `sample_cells`.
    PointSourceResult run_point_source(const Vec3& source, Axis axis, const std::vector<Vec3>& probe_points,
                                       std::optional<CellBox> sample_cells = std::nullopt) {
        reset_fields();
        const int comp = static_cast<int>(axis);
        const double dt = config_.dt();
        const double omega = config_.source_center_freq;
        const double width = 1.0 / (config_.source_fractional_bandwidth * omega);
        const long half_span = static_cast<long>(std::ceil(6.0 * width / dt));
        const double t0 = (static_cast<double>(half_span) + 0.5) * dt;
        const long source_end = 2 * half_span + 1;

        const SiteWeights src = weights(comp, source);
        std::vector<double> src_coef(src.index.size());
        const auto& cmat = coef_index_[comp];
        for (std::size_t s = 0; s < src.index.size(); ++s) {
            const double c = coef_table_[cmat[src.index[s]]];
            if (c == 0.0) throw Error(Errc::geometry, "source sits on a perfect conductor");
            // c = dt / (eps dx); current density = weight * s(t) / dx^3
            src_coef[s] = c * map_.spacing * src.weight[s] / std::pow(map_.spacing, 3);
        }

        // probes: three components each
        std::vector<std::array<SiteWeights, 3>> probes;
        probes.reserve(probe_points.size());
        for (const auto& p : probe_points) probes.push_back({weights(0, p), weights(1, p), weights(2, p)});
        std::vector<Vec3c> probe_acc(probes.size(), Vec3c{});

        // DFT over the edge sites surrounding the sampled cells
        CellBox box{};
        if (sample_cells) {
            box = *sample_cells;
            box.lo = {std::max(box.lo.i, 0), std::max(box.lo.j, 0), std::max(box.lo.k, 0)};
            box.hi = {std::min(box.hi.i, n_), std::min(box.hi.j, n_), std::min(box.hi.k, n_)};
        }
        const bool sampling = box.size() > 0;
        const int sx = sampling ? box.nx() + 1 : 0, sy = sampling ? box.ny() + 1 : 0, sz = sampling ? box.nz() + 1 : 0;
        const std::size_t nsites = static_cast<std::size_t>(sx) * sy * sz;
        std::array<std::vector<cplx>, 3> dft;
        if (sampling)
            for (auto& d : dft) d.assign(nsites, cplx{});

        // decay monitors: the source component at the source, |E|^2 at every
        // probe, and the summed |E|^2 over the sampled box (read once per
        // period). Each must fall below the threshold relative to its own peak.
        const std::size_t n_mon = 1 + probes.size() + (sampling ? 1 : 0);
        std::vector<double> peak(n_mon, 0.0), window_max(n_mon, 0.0);
        double residual = 1.0;
        const long period = std::max<long>(1, std::lround(2.0 * pi / (omega * dt)));
        cplx s_hat = 0.0;

        long step = 0;
        bool converged = false;
        for (; step < config_.max_steps; ++step) {
            update_h();
            update_e();
            if (step < source_end) {
                const double ts = (static_cast<double>(step) + 0.5) * dt; // J lives at half steps
                const double tau = ts - t0;
                const double s = std::sin(omega * tau) * std::exp(-0.5 * tau * tau / (width * width));
                s_hat += s * std::exp(I * (omega * ts)) * dt;
                auto& field = component(comp);
                for (std::size_t q = 0; q < src.index.size(); ++q) field[src.index[q]] -= src_coef[q] * s;
            }
            // E now holds time (step + 1) dt
            const cplx phase = std::exp(I * (omega * (static_cast<double>(step) + 1.0) * dt)) * dt;
            const auto watch = [&](std::size_t m, double v) {
                peak[m] = std::max(peak[m], v);
                window_max[m] = std::max(window_max[m], v);
            };
            watch(0, std::pow(read(comp, src), 2));
            for (std::size_t p = 0; p < probes.size(); ++p) {
                double e2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double v = read(c, probes[p][c]);
                    probe_acc[p][c] += phase * v;
                    e2 += v * v;
                }
                watch(1 + p, e2);
            }
            if (sampling) accumulate_dft(dft, box, sx, sy, sz, phase);

            if ((step + 1) % period == 0) {
                if (sampling) watch(n_mon - 1, box_energy(box, sx, sy, sz));
                if (step >= source_end && peak[0] > 0.0) {
                    residual = 0.0;
                    for (std::size_t m = 0; m < n_mon; ++m)
                        if (peak[m] > 0.0) residual = std::max(residual, window_max[m] / peak[m]);
                    if (residual < config_.decay_threshold) {
                        ++step;
                        converged = true;
                        break;
                    }
                }
                std::fill(window_max.begin(), window_max.end(), 0.0);
            }
        }
        if (!converged)
            throw Error(Errc::convergence, "fields did not decay within " + std::to_string(config_.max_steps) +
                                               " steps (residual " + std::to_string(residual) + ")");

        const double big_omega = 2.0 * std::sin(0.5 * omega * dt) / dt;
        const cplx norm = 1.0 / (I * big_omega * s_hat);

        PointSourceResult r;
        r.axis = axis;
        r.source = source;
        r.steps = step;
        r.residual = residual;
        r.probes = probe_acc;
        for (auto& p : r.probes)
            for (auto& v : p) v *= norm;
        if (sampling) {
            r.sample_cells = box;
            r.samples.resize(box.size());
            // edge-to-centre interpolation: each component averages the four
            // parallel edges of the cell
            std::size_t o = 0;
            for (int i = 0; i < box.nx(); ++i)
                for (int j = 0; j < box.ny(); ++j)
                    for (int k = 0; k < box.nz(); ++k, ++o) {
                        auto at = [&](int c, int a, int b2, int d) {
                            return dft[c][(static_cast<std::size_t>(a) * sy + b2) * sz + d];
                        };
                        const cplx vx = 0.25 * (at(0, i, j, k) + at(0, i, j + 1, k) + at(0, i, j, k + 1) +
                                                at(0, i, j + 1, k + 1));
                        const cplx vy = 0.25 * (at(1, i, j, k) + at(1, i + 1, j, k) + at(1, i, j, k + 1) +
                                                at(1, i + 1, j, k + 1));
                        const cplx vz = 0.25 * (at(2, i, j, k) + at(2, i + 1, j, k) + at(2, i, j + 1, k) +
                                                at(2, i + 1, j + 1, k));
                        r.samples[o] = {vx * norm, vy * norm, vz * norm};
                    }
        }
        return r;
    }

    /// Largest |E| component over the grid (stability diagnostics).
    double max_abs_e() const {
        double m = 0.0;
        for (const auto* f : {&ex_, &ey_, &ez_})
            for (double v : *f) m = std::max(m, std::abs(v));
        return m;
    }

    /// Free evolution without sources, for stability checks after a run.
    void step_free(long steps) {
        for (long s = 0; s < steps; ++s) {
            update_h();
            update_e();
        }
    }

    /// Instantaneous component value at a point, using trilinear weights.
    double sample(int component, const Vec3& p) const { return read(component, weights(component, p)); }

private:
    std::size_t idx(int i, int j, int k) const {
        return static_cast<std::size_t>(i + 1) * stride_x_ + static_cast<std::size_t>(j + 1) * stride_y_ +
               static_cast<std::size_t>(k + 1);
    }

    std::vector<double>& component(int c) { return c == 0 ? ex_ : (c == 1 ? ey_ : ez_); }
    const std::vector<double>& component(int c) const { return c == 0 ? ex_ : (c == 1 ? ey_ : ez_); }

    double read(int c, const SiteWeights& w) const {
        const auto& f = component(c);
        double v = 0.0;
        for (std::size_t q = 0; q < w.index.size(); ++q) v += w.weight[q] * f[w.index[q]];
        return v;
    }

    void reset_fields() {
        for (auto* f : {&ex_, &ey_, &ez_, &hx_, &hy_, &hz_}) std::fill(f->begin(), f->end(), 0.0);
        for (auto& p : psi_) std::fill(p.begin(), p.end(), 0.0);
    }

    template <class F>
    void parallel_for(int begin, int end, F&& body) const {
        const int nthreads = std::max(1, std::min(config_.threads, end - begin));
        if (nthreads == 1) {
            for (int i = begin; i < end; ++i) body(i);
            return;
        }
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads - 1));
        const int chunk = (end - begin + nthreads - 1) / nthreads;
        for (int t = 1; t < nthreads; ++t) {
            const int lo = begin + t * chunk, hi = std::min(end, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([lo, hi, &body] {
                for (int i = lo; i < hi; ++i) body(i);
            });
        }
        for (int i = begin; i < std::min(end, begin + chunk); ++i) body(i);
    }

    // Edge permittivity is the mean of the four cells sharing the edge; an edge
    // touching a conductor cell, or lying on the outer wall, is pinned to zero.
    void build_coefficients(const MaterialGrid& m) {
        const double dt = config_.dt(), dx = map_.spacing;
        coef_table_ = {0.0};
        std::map<double, std::uint8_t> lut;
        auto code = [&](double eps) -> std::uint8_t {
            auto it = lut.find(eps);
            if (it != lut.end()) return it->second;
            if (coef_table_.size() >= 255) throw Error(Errc::geometry, "too many distinct permittivities");
            const auto c = static_cast<std::uint8_t>(coef_table_.size());
            coef_table_.push_back(dt / (eps * dx));
            lut.emplace(eps, c);
            return c;
        };
        const std::size_t total = stride_x_ * np_;
        for (auto& ci : coef_index_) ci.assign(total, 0);
        auto cell = [&](int i, int j, int k, bool& pec) -> double {
            if (i < 0 || j < 0 || k < 0 || i >= n_ || j >= n_ || k >= n_) return 0.0;
            if (m.pec_at(i, j, k)) pec = true;
            return m.eps_at(i, j, k);
        };
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i <= n_; ++i)
                for (int j = 0; j <= n_; ++j)
                    for (int k = 0; k <= n_; ++k) {
                        const int pos[3] = {i, j, k};
                        if (pos[c] == n_) continue; // no such edge
                        bool wall = false;
                        for (int a = 0; a < 3; ++a)
                            if (a != c && (pos[a] == 0 || pos[a] == n_)) wall = true;
                        if (wall) continue;
                        const int a1 = (c + 1) % 3, a2 = (c + 2) % 3;
                        bool pec = false;
                        double sum = 0.0;
                        for (int d1 = -1; d1 <= 0; ++d1)
                            for (int d2 = -1; d2 <= 0; ++d2) {
                                int q[3] = {i, j, k};
                                q[a1] += d1;
                                q[a2] += d2;
                                sum += cell(q[0], q[1], q[2], pec);
                            }
                        if (pec) continue;
                        coef_index_[c][idx(i, j, k)] = code(0.25 * sum);
                    }
        }
    }

    void build_pml() {
        const int p = config_.pml_cells();
        const double dt = config_.dt();
        const double sigma_max = 0.8 * 4.0 / map_.spacing; // polynomial order 3, eta = 1
        auto profile = [&](double pos, double& b, double& a) {
            double depth = 0.0;
            if (pos < p) depth = (p - pos) / p;
            if (pos > n_ - p) depth = (pos - (n_ - p)) / p;
            const double sigma = sigma_max * depth * depth * depth;
            b = std::exp(-sigma * dt);
            a = b - 1.0;
        };
        be_.assign(n_ + 1, 1.0);
        ae_.assign(n_ + 1, 0.0);
        bh_.assign(n_ + 1, 1.0);
        ah_.assign(n_ + 1, 0.0);
        for (int m = 0; m <= n_; ++m) {
            profile(m, be_[m], ae_[m]);
            profile(m + 0.5, bh_[m], ah_[m]);
        }
        pml_ = p;
        for (auto& ps : psi_) ps.assign(stride_x_ * np_, 0.0);
    }

    void update_h() {
        const double ch = config_.dt() / map_.spacing;
        const std::size_t sx = stride_x_, sy = stride_y_;
        double* hx = hx_.data();
        double* hy = hy_.data();
        double* hz = hz_.data();
        const double* ex = ex_.data();
        const double* ey = ey_.data();
        const double* ez = ez_.data();
        parallel_for(0, n_, [&](int i) {
            for (int j = 0; j < n_; ++j) {
                const std::size_t row = idx(i, j, 0);
                for (int k = 0; k < n_; ++k) {
                    const std::size_t o = row + k;
                    hx[o] -= ch * ((ez[o + sy] - ez[o]) - (ey[o + 1] - ey[o]));
                    hy[o] -= ch * ((ex[o + 1] - ex[o]) - (ez[o + sx] - ez[o]));
                    hz[o] -= ch * ((ey[o + sx] - ey[o]) - (ex[o + sy] - ex[o]));
                }
            }
        });
        // PML corrections, half-integer positions
        auto& p = psi_;
        const int lo_end = pml_, hi_begin = n_ - pml_;
        auto x_slab = [&](int i) {
            const double b = bh_[i], a = ah_[i];
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k) {
                    const std::size_t o = idx(i, j, k);
                    p[0][o] = b * p[0][o] + a * (ez[o + sx] - ez[o]); // Hy: -d/dx Ez
                    p[1][o] = b * p[1][o] + a * (ey[o + sx] - ey[o]); // Hz: +d/dx Ey
                    hy[o] += ch * p[0][o];
                    hz[o] -= ch * p[1][o];
                }
        };
        auto y_slab = [&](int i, int j) {
            const double b = bh_[j], a = ah_[j];
            for (int k = 0; k < n_; ++k) {
                const std::size_t o = idx(i, j, k);
                p[2][o] = b * p[2][o] + a * (ez[o + sy] - ez[o]); // Hx: +d/dy Ez
                p[3][o] = b * p[3][o] + a * (ex[o + sy] - ex[o]); // Hz: -d/dy Ex
                hx[o] -= ch * p[2][o];
                hz[o] += ch * p[3][o];
            }
        };
        auto z_slab = [&](int i, int j, int k) {
            const double b = bh_[k], a = ah_[k];
            const std::size_t o = idx(i, j, k);
            p[4][o] = b * p[4][o] + a * (ey[o + 1] - ey[o]); // Hx: -d/dz Ey
            p[5][o] = b * p[5][o] + a * (ex[o + 1] - ex[o]); // Hy: +d/dz Ex
            hx[o] += ch * p[4][o];
            hy[o] -= ch * p[5][o];
        };
        apply_slabs(lo_end, hi_begin, x_slab, y_slab, z_slab);
    }

    void update_e() {
        const std::size_t sx = stride_x_, sy = stride_y_;
        double* ex = ex_.data();
        double* ey = ey_.data();
        double* ez = ez_.data();
        const double* hx = hx_.data();
        const double* hy = hy_.data();
        const double* hz = hz_.data();
        const double* tab = coef_table_.data();
        const std::uint8_t* cx = coef_index_[0].data();
        const std::uint8_t* cy = coef_index_[1].data();
        const std::uint8_t* cz = coef_index_[2].data();
        parallel_for(0, n_ + 1, [&](int i) {
            for (int j = 0; j <= n_; ++j) {
                const std::size_t row = idx(i, j, 0);
                for (int k = 0; k <= n_; ++k) {
                    const std::size_t o = row + k;
                    ex[o] += tab[cx[o]] * ((hz[o] - hz[o - sy]) - (hy[o] - hy[o - 1]));
                    ey[o] += tab[cy[o]] * ((hx[o] - hx[o - 1]) - (hz[o] - hz[o - sx]));
                    ez[o] += tab[cz[o]] * ((hy[o] - hy[o - sx]) - (hx[o] - hx[o - sy]));
                }
            }
        });
        auto& p = psi_;
        auto x_slab = [&](int i) {
            const double b = be_[i], a = ae_[i];
            for (int j = 0; j <= n_; ++j)
                for (int k = 0; k <= n_; ++k) {
                    const std::size_t o = idx(i, j, k);
                    p[6][o] = b * p[6][o] + a * (hz[o] - hz[o - sx]); // Ey: -d/dx Hz
                    p[7][o] = b * p[7][o] + a * (hy[o] - hy[o - sx]); // Ez: +d/dx Hy
                    ey[o] -= tab[cy[o]] * p[6][o];
                    ez[o] += tab[cz[o]] * p[7][o];
                }
        };
        auto y_slab = [&](int i, int j) {
            const double b = be_[j], a = ae_[j];
            for (int k = 0; k <= n_; ++k) {
                const std::size_t o = idx(i, j, k);
                p[8][o] = b * p[8][o] + a * (hz[o] - hz[o - sy]); // Ex: +d/dy Hz
                p[9][o] = b * p[9][o] + a * (hx[o] - hx[o - sy]); // Ez: -d/dy Hx
                ex[o] += tab[cx[o]] * p[8][o];
                ez[o] -= tab[cz[o]] * p[9][o];
            }
        };
        auto z_slab = [&](int i, int j, int k) {
            const double b = be_[k], a = ae_[k];
            const std::size_t o = idx(i, j, k);
            p[10][o] = b * p[10][o] + a * (hy[o] - hy[o - 1]); // Ex: -d/dz Hy
            p[11][o] = b * p[11][o] + a * (hx[o] - hx[o - 1]); // Ey: +d/dz Hx
            ex[o] -= tab[cx[o]] * p[10][o];
            ey[o] += tab[cy[o]] * p[11][o];
        };
        apply_slabs(pml_, n_ - pml_ + 1, x_slab, y_slab, z_slab, true);
    }

    // Visit the absorber slabs: positions below lo_end or at/after hi_begin
    // along each axis. E positions are integer nodes (0..n), H positions
    // half-integers (0..n-1).
    template <class FX, class FY, class FZ>
    void apply_slabs(int lo_end, int hi_begin, FX&& fx, FY&& fy, FZ&& fz, bool nodes = false) {
        const int last = nodes ? n_ + 1 : n_;
        auto in_pml = [&](int m) { return m < lo_end || m >= hi_begin; };
        for (int i = 0; i < last; ++i)
            if (in_pml(i)) fx(i);
        parallel_for(0, last, [&](int i) {
            for (int j = 0; j < last; ++j)
                if (in_pml(j)) fy(i, j);
        });
        parallel_for(0, last, [&](int i) {
            for (int j = 0; j < last; ++j) {
                for (int k = 0; k < lo_end && k < last; ++k) fz(i, j, k);
                for (int k = std::max(hi_begin, 0); k < last; ++k) fz(i, j, k);
            }
        });
    }

    double box_energy(const CellBox& box, int sx, int sy, int sz) const {
        double e = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double* f = component(c).data();
            for (int i = 0; i < sx; ++i)
                for (int j = 0; j < sy; ++j) {
                    const std::size_t row = idx(box.lo.i + i, box.lo.j + j, box.lo.k);
                    for (int k = 0; k < sz; ++k) e += f[row + k] * f[row + k];
                }
        }
        return e;
    }

    void accumulate_dft(std::array<std::vector<cplx>, 3>& dft, const CellBox& box, int sx, int sy, int sz,
                        cplx phase) {
        for (int c = 0; c < 3; ++c) {
            const double* f = component(c).data();
            cplx* d = dft[c].data();
            for (int i = 0; i < sx; ++i)
                for (int j = 0; j < sy; ++j) {
                    const std::size_t src_row = idx(box.lo.i + i, box.lo.j + j, box.lo.k);
                    cplx* dst = d + (static_cast<std::size_t>(i) * sy + j) * sz;
                    for (int k = 0; k < sz; ++k) dst[k] += phase * f[src_row + k];
                }
        }
    }

    FdtdConfig config_;
    GridMap map_;
    int n_;
    int np_;
    int pml_ = 0;
    std::size_t stride_x_ = 0, stride_y_ = 0;
    std::vector<double> ex_, ey_, ez_, hx_, hy_, hz_;
    std::array<std::vector<std::uint8_t>, 3> coef_index_;
    std::vector<double> coef_table_;
    std::vector<double> be_, ae_, bh_, ah_;
    std::array<std::vector<double>, 12> psi_;
};

// ---------------------------------------------------------------------------
// Green's tensor assembly

/// Raw (uncalibrated) equal-point tensor at p: three runs, one per source axis.
inline ComplexMatrix3 equal_point_greens(FdtdEngine& engine, const Vec3& p) {
    ComplexMatrix3 g;
    for (int a = 0; a < 3; ++a) {
        const auto r = engine.run_point_source(p, static_cast<Axis>(a), {p});
        for (int i = 0; i < 3; ++i) g(i, a) = r.probes[0][i];
    }
    return g;
}

/// Real factor that maps the raw vacuum equal-point Im-trace at the grid
/// centre to 3 omega0 / (6 pi c). Cached per physics configuration.
inline double calibrate(const FdtdConfig& config) {
    static std::mutex mu;
    static std::map<decltype(config.physics_key()), double> cache;
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(config.physics_key()); it != cache.end()) return it->second;
    }
    FdtdEngine engine(rasterize(VoxelGeometry{}, config), config);
    const double tr = equal_point_greens(engine, {0.0, 0.0, 0.0}).imag().trace().real();
    if (!(tr > 0.0)) throw Error(Errc::numerical, "vacuum calibration produced a non-positive Im trace");
    const double factor = 3.0 * config.source_center_freq / (6.0 * pi * UnitsConvention::c) / tr;
    std::lock_guard lock(mu);
    cache.emplace(config.physics_key(), factor);
    return factor;
}

/// Cells covering the optimization region of a geometry.
inline CellBox region_cells(const VoxelGeometry& geometry, const GridMap& map) {
    const Box b = geometry.region.bounds();
    return map.cells_of(b.lo, b.hi);
}

/// G(r'', r_atom, omega0) at the centres of `cells` (default: the region) and
/// at the atom, with the vacuum calibration applied. The atom is snapped to
/// the nearest node.
inline GreensField greens_field(const VoxelGeometry& geometry, const FdtdConfig& config,
                                std::optional<CellBox> cells = std::nullopt) {
    const MaterialGrid material = rasterize(geometry, config);
    const CellBox box = cells ? *cells : region_cells(geometry, material.map);
    FdtdEngine engine(material, config);
    GreensField f;
    f.map = material.map;
    f.atom = snap_to_node(geometry.atom, material.map);
    f.values.assign(box.size(), ComplexMatrix3{});
    for (int a = 0; a < 3; ++a) {
        const auto r = engine.run_point_source(f.atom, static_cast<Axis>(a), {f.atom}, box);
        f.cells = r.sample_cells;
        for (int i = 0; i < 3; ++i) f.at_atom(i, a) = r.probes[0][i];
        for (std::size_t o = 0; o < r.samples.size(); ++o)
            for (int i = 0; i < 3; ++i) f.values[o](i, a) = r.samples[o][i];
    }
    f.values.resize(f.cells.size());
    f.calibration = calibrate(config);
    f.scale(f.calibration);
    return f;
}

} // namespace cohere
