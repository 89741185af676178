#pragma once

// Tab-separated text tables. Every file starts with '#' header lines:
// free-form "# key value" metadata, then "# columns: ..." and "# units: ...".
// Readers reject missing headers, wrong arity and non-numeric cells.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cohere/adjoint.hpp"
#include "cohere/fdtd.hpp"
#include "cohere/geometry.hpp"
#include "cohere/optimizer.hpp"
#include "cohere/validation.hpp"

namespace cohere {

struct Table {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::string> units;
    std::vector<std::vector<double>> rows;

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : meta)
            if (k == key) return v;
        throw Error(Errc::parse, "missing header field '" + key + "'");
    }
    bool has(const std::string& key) const {
        for (const auto& kv : meta)
            if (kv.first == key) return true;
        return false;
    }
};

namespace detail {

inline std::string fmt(double v) { return fmt_double(v); }

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

inline double parse_number(const std::string& tok, int line) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        // from_chars rejects "nan"/"inf" spellings on some libraries
        if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw Error(Errc::parse, "line " + std::to_string(line) + ": '" + tok + "' is not a number");
    }
    return v;
}

inline int parse_int(const std::string& tok, int line) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw Error(Errc::parse, "line " + std::to_string(line) + ": '" + tok + "' is not an integer");
    return v;
}

} // namespace detail

inline void write_table(std::ostream& os, const Table& t) {
    if (t.columns.size() != t.units.size()) throw Error(Errc::invalid_argument, "columns and units differ in length");
    for (const auto& [k, v] : t.meta) os << "# " << k << ' ' << v << '\n';
    os << "# columns:";
    for (const auto& c : t.columns) os << ' ' << c;
    os << "\n# units:";
    for (const auto& u : t.units) os << ' ' << u;
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << detail::fmt(r[i]);
        os << '\n';
    }
}

inline Table read_table(std::istream& is, const std::vector<std::string>& expected_columns) {
    Table t;
    bool have_cols = false, have_units = false;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (have_cols && have_units)
                throw Error(Errc::parse, "line " + std::to_string(n) + ": header line after data start");
            auto tok = detail::split_ws(line.substr(1));
            if (tok.empty()) continue;
            if (tok[0] == "columns:") {
                t.columns.assign(tok.begin() + 1, tok.end());
                have_cols = true;
            } else if (tok[0] == "units:") {
                t.units.assign(tok.begin() + 1, tok.end());
                have_units = true;
            } else {
                std::string rest;
                for (std::size_t i = 1; i < tok.size(); ++i) rest += (i > 1 ? " " : "") + tok[i];
                t.meta.emplace_back(tok[0], rest);
            }
            continue;
        }
        if (!have_cols || !have_units)
            throw Error(Errc::parse, "line " + std::to_string(n) + ": data before the columns/units header");
        const auto tok = detail::split_ws(line);
        if (tok.size() != t.columns.size())
            throw Error(Errc::parse, "line " + std::to_string(n) + ": expected " + std::to_string(t.columns.size()) +
                                         " fields, found " + std::to_string(tok.size()));
        std::vector<double> row;
        row.reserve(tok.size());
        for (const auto& s : tok) row.push_back(detail::parse_number(s, n));
        t.rows.push_back(std::move(row));
    }
    if (!have_cols || !have_units) throw Error(Errc::parse, "missing '# columns:' or '# units:' header");
    if (t.units.size() != t.columns.size()) throw Error(Errc::parse, "units header does not match columns");
    if (t.columns != expected_columns) {
        std::string want;
        for (const auto& c : expected_columns) want += " " + c;
        throw Error(Errc::parse, "unexpected columns; expected:" + want);
    }
    return t;
}

inline void save(const std::string& path, const Table& t) {
    std::ofstream f(path);
    if (!f) throw Error(Errc::io, "cannot open " + path + " for writing");
    write_table(f, t);
    if (!f) throw Error(Errc::io, "write failed: " + path);
}

inline Table load(const std::string& path, const std::vector<std::string>& columns) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::io, "cannot open " + path);
    return read_table(f, columns);
}

// ---------------------------------------------------------------------------
// geometry / checkpoint

inline const std::vector<std::string> geometry_columns{"ix", "iy", "iz", "zeta_x", "zeta_y", "zeta_z"};

struct GeometryFile {
    VoxelGeometry geometry;
    std::string scenario = "custom";
    double atom_zeta = 0.0;
    std::optional<int> iteration;
};

inline Table geometry_table(const GeometryFile& gf) {
    const auto& g = gf.geometry;
    using detail::fmt;
    Table t;
    t.meta = {{"format", "cohere-geometry 1"},
              {"scenario", gf.scenario},
              {"atom_zeta", fmt(gf.atom_zeta)},
              {"atom", fmt(g.atom[0]) + " " + fmt(g.atom[1]) + " " + fmt(g.atom[2])},
              {"region", fmt(g.region.extent_x) + " " + fmt(g.region.extent_y) + " " +
                             std::to_string(g.region.layers) + " " + fmt(g.region.block_size)},
              {"region_center", fmt(g.region.center[0]) + " " + fmt(g.region.center[1]) + " " +
                                    fmt(g.region.center[2])},
              {"backplate", std::to_string(int(g.backplate)) + " " + fmt(g.backplate_depth)},
              {"halfspace", std::to_string(int(g.halfspace))},
              {"permittivity", fmt(g.block_permittivity)},
              {"hash", std::to_string(geometry_hash(g))}};
    if (gf.iteration) t.meta.emplace_back("iteration", std::to_string(*gf.iteration));
    t.columns = geometry_columns;
    t.units = {"index", "index", "index", "zeta", "zeta", "zeta"};
    for (const auto& b : g.blocks) {
        const Vec3 c = g.region.block_center(b);
        t.rows.push_back({double(b.ix), double(b.iy), double(b.iz), UnitsConvention::zeta(c[0]),
                          UnitsConvention::zeta(c[1]), UnitsConvention::zeta(c[2])});
    }
    return t;
}

inline GeometryFile parse_geometry(const Table& t) {
    auto nums = [&](const std::string& key, std::size_t count) {
        const auto tok = detail::split_ws(t.get(key));
        if (tok.size() != count)
            throw Error(Errc::parse, "header '" + key + "' needs " + std::to_string(count) + " values");
        std::vector<double> v;
        for (const auto& s : tok) v.push_back(detail::parse_number(s, 0));
        return v;
    };
    if (t.get("format") != "cohere-geometry 1") throw Error(Errc::parse, "not a geometry file");
    GeometryFile gf;
    auto& g = gf.geometry;
    gf.scenario = t.get("scenario");
    gf.atom_zeta = nums("atom_zeta", 1)[0];
    const auto a = nums("atom", 3);
    g.atom = {a[0], a[1], a[2]};
    const auto r = nums("region", 4);
    g.region.extent_x = r[0];
    g.region.extent_y = r[1];
    g.region.layers = static_cast<int>(r[2]);
    if (double(g.region.layers) != r[2]) throw Error(Errc::parse, "region layer count must be an integer");
    g.region.block_size = r[3];
    const auto rc = nums("region_center", 3);
    g.region.center = {rc[0], rc[1], rc[2]};
    const auto bp = nums("backplate", 2);
    g.backplate = bp[0] != 0.0;
    g.backplate_depth = bp[1];
    g.halfspace = nums("halfspace", 1)[0] != 0.0;
    g.block_permittivity = nums("permittivity", 1)[0];
    if (t.has("iteration")) gf.iteration = detail::parse_int(t.get("iteration"), 0);
    for (const auto& row : t.rows) {
        BlockIndex b{static_cast<int>(row[0]), static_cast<int>(row[1]), static_cast<int>(row[2])};
        if (double(b.ix) != row[0] || double(b.iy) != row[1] || double(b.iz) != row[2])
            throw Error(Errc::parse, "block indices must be integers");
        if (!g.blocks.insert(b).second) throw Error(Errc::parse, "duplicate block " + to_string(b));
    }
    try {
        g.validate();
    } catch (const Error& e) {
        throw Error(Errc::parse, std::string("invalid geometry: ") + e.what());
    }
    if (t.has("hash") && t.get("hash") != std::to_string(geometry_hash(g)))
        throw Error(Errc::parse, "geometry hash mismatch");
    return gf;
}

inline void save_geometry(const std::string& path, const GeometryFile& gf) { save(path, geometry_table(gf)); }
inline GeometryFile load_geometry(const std::string& path) { return parse_geometry(load(path, geometry_columns)); }

// ---------------------------------------------------------------------------
// optimization trace

inline const std::vector<std::string> trace_columns{"iteration", "ix",      "iy",        "iz",
                                                    "merit_max", "re_rho12", "im_rho12", "abs_rho12",
                                                    "gamma1",    "gamma2",  "abs_kappa12", "wall_s"};

inline std::vector<double> trace_row(const TraceRecord& r) {
    return {double(r.iteration), double(r.placed.ix), double(r.placed.iy), double(r.placed.iz), r.merit_max,
            r.rho12.real(), r.rho12.imag(), std::abs(r.rho12), r.gamma1, r.gamma2, std::abs(r.kappa12),
            r.wall_seconds};
}

inline Table trace_table(const std::vector<TraceRecord>& records, const std::string& scenario) {
    Table t;
    t.meta = {{"format", "cohere-trace 1"}, {"scenario", scenario}};
    t.columns = trace_columns;
    t.units = {"-", "index", "index", "index", "arb", "-", "-", "-", "rate", "rate", "rate", "s"};
    for (const auto& r : records) t.rows.push_back(trace_row(r));
    return t;
}

inline std::vector<TraceRecord> parse_trace(const Table& t) {
    if (t.get("format") != "cohere-trace 1") throw Error(Errc::parse, "not a trace file");
    std::vector<TraceRecord> out;
    for (const auto& row : t.rows) {
        TraceRecord r;
        r.iteration = static_cast<int>(row[0]);
        r.placed = {static_cast<int>(row[1]), static_cast<int>(row[2]), static_cast<int>(row[3])};
        r.merit_max = row[4];
        r.rho12 = {row[5], row[6]};
        r.gamma1 = row[8];
        r.gamma2 = row[9];
        r.kappa12 = row[10];
        r.wall_seconds = row[11];
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// merit, budgets, benchmark

inline Table merit_table(const MeritField& f) {
    Table t;
    t.meta = {{"format", "cohere-merit 1"}};
    t.columns = {"ix", "iy", "iz", "zeta_x", "zeta_y", "zeta_z", "merit"};
    t.units = {"index", "index", "index", "zeta", "zeta", "zeta", "arb"};
    for (const auto& e : f.entries)
        t.rows.push_back({double(e.block.ix), double(e.block.iy), double(e.block.iz), e.center_zeta[0],
                          e.center_zeta[1], e.center_zeta[2], e.value});
    return t;
}

inline const std::vector<std::string> budget_columns{"resolution", "n_samples", "systematic", "random", "total"};

inline Table budget_table(const std::vector<ErrorBudget>& budgets, std::uint64_t seed) {
    Table t;
    t.meta = {{"format", "cohere-budget 1"}, {"seed", std::to_string(seed)}};
    t.columns = budget_columns;
    t.units = {"ppw", "-", "abs_rho12", "abs_rho12", "abs_rho12"};
    for (const auto& b : budgets)
        t.rows.push_back({double(b.resolution), double(b.n_samples), b.systematic, b.random, b.total});
    return t;
}

inline std::vector<ErrorBudget> parse_budgets(const Table& t) {
    std::vector<ErrorBudget> out;
    for (const auto& r : t.rows) {
        ErrorBudget b;
        b.resolution = static_cast<int>(r[0]);
        b.n_samples = static_cast<int>(r[1]);
        b.systematic = r[2];
        b.random = r[3];
        b.total = r[4];
        out.push_back(b);
    }
    return out;
}

inline Table samples_table(const VacuumProtocolResult& p) {
    Table t;
    t.meta = {{"format", "cohere-vacuum-samples 1"}, {"resolution", std::to_string(p.budget.resolution)},
              {"skipped", std::to_string(p.skipped.size())}};
    t.columns = {"sample", "abs_rho12", "running_total"};
    t.units = {"-", "-", "-"};
    for (std::size_t i = 0; i < p.samples.size(); ++i)
        t.rows.push_back({double(i + 1), p.samples[i], p.running_total[i]});
    return t;
}

inline const std::vector<std::string> benchmark_columns{
    "resolution", "zeta_requested", "zeta", "fdtd", "analytic", "difference", "total_error", "flagged"};

inline Table benchmark_table(const std::vector<BenchmarkRow>& rows) {
    Table t;
    t.meta = {{"format", "cohere-benchmark 1"}};
    t.columns = benchmark_columns;
    t.units = {"ppw", "zeta", "zeta", "abs_rho12", "abs_rho12", "abs_rho12", "abs_rho12", "bool"};
    for (const auto& r : rows)
        t.rows.push_back({double(r.resolution), r.zeta_requested, r.zeta, r.fdtd, r.analytic, r.difference,
                          r.total_error, r.flagged ? 1.0 : 0.0});
    return t;
}

// ---------------------------------------------------------------------------
// Green's field dump

inline Table greens_table(const GreensField& f, const FdtdConfig& config, const VoxelGeometry& g) {
    using detail::fmt;
    Table t;
    t.meta = {{"format", "cohere-greens 1"},
              {"resolution", std::to_string(config.resolution)},
              {"box_half_extent", fmt(config.box_half_extent)},
              {"pml_thickness", fmt(config.pml_thickness)},
              {"courant_factor", fmt(config.courant_factor)},
              {"calibration", fmt(f.calibration)},
              {"geometry_hash", std::to_string(geometry_hash(g))},
              {"atom", fmt(f.atom[0]) + " " + fmt(f.atom[1]) + " " + fmt(f.atom[2])}};
    std::string at;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) at += (at.empty() ? "" : " ") + fmt(f.at_atom(i, j).real()) + " " + fmt(f.at_atom(i, j).imag());
    t.meta.emplace_back("g_at_atom", at);
    t.columns = {"i", "j", "k", "x", "y", "z"};
    const char* ax = "xyz";
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            t.columns.push_back(std::string("re_g") + ax[i] + ax[j]);
            t.columns.push_back(std::string("im_g") + ax[i] + ax[j]);
        }
    t.units = {"cell", "cell", "cell", "lambda", "lambda", "lambda"};
    t.units.resize(t.columns.size(), "calibrated");
    for (int i = f.cells.lo.i; i < f.cells.hi.i; ++i)
        for (int j = f.cells.lo.j; j < f.cells.hi.j; ++j)
            for (int k = f.cells.lo.k; k < f.cells.hi.k; ++k) {
                const CellIndex c{i, j, k};
                const Vec3 p = f.map.cell_center(c);
                std::vector<double> row{double(i), double(j), double(k), p[0], p[1], p[2]};
                const auto& m = f.at(c);
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) {
                        row.push_back(m(a, b).real());
                        row.push_back(m(a, b).imag());
                    }
                t.rows.push_back(std::move(row));
            }
    return t;
}

} // namespace cohere
