// Command-line front end: analytic curves, inverse design, validation,
// antinode tables and Green's field dumps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cohere/adjoint.hpp"
#include "cohere/coherence.hpp"
#include "cohere/config.hpp"
#include "cohere/fdtd.hpp"
#include "cohere/io.hpp"
#include "cohere/optimizer.hpp"
#include "cohere/validation.hpp"

namespace fs = std::filesystem;
using namespace cohere;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    int threads = 0;
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const std::string& path, const Globals& g) {
    RunConfig rc = path.empty() ? RunConfig{} : load_run_config(path);
    if (g.threads > 0) rc.optimization.fdtd.threads = g.threads;
    if (g.seed) rc.validation.seed = *g.seed;
    return rc;
}

void emit(const std::string& out, const Table& t) {
    if (out.empty() || out == "-")
        write_table(std::cout, t);
    else
        save(out, t);
}

std::string geometry_scenario(const OptimizationConfig& o) {
    return std::string(to_string(o.scenario)) + "/" + to_string(o.rotation);
}

// ---------------------------------------------------------------------------

struct AnalyticArgs {
    std::string curve = "reflector";
    double zeta_min = 0.0, zeta_max = 3.0, step = 0.005, extent = 2.0;
    std::string output;
};

int cmd_analytic(const AnalyticArgs& a) {
    if (!(a.step > 0.0) || !(a.zeta_max > a.zeta_min)) throw UsageError("empty range: need zeta-max > zeta-min and step > 0");
    Table t;
    if (a.curve == "reflector") {
        if (a.zeta_min < 0.0) throw UsageError("zeta-min must be >= 0");
        t.meta = {{"format", "cohere-reflector 1"}, {"rotation", "perpendicular"}};
        t.columns = {"zeta", "rho12", "abs_rho12"};
        t.units = {"zeta", "-", "-"};
        const long n = std::lround(std::floor((a.zeta_max - a.zeta_min) / a.step + 1e-9));
        for (long i = 1; i <= n; ++i) {
            const double z = a.zeta_min + static_cast<double>(i) * a.step;
            const double r = reflector_coherence(z);
            t.rows.push_back({z, r, std::abs(r)});
        }
    } else if (a.curve == "merit") {
        if (!(a.extent > 0.0)) throw UsageError("extent must be positive");
        t.meta = {{"format", "cohere-merit-slices 1"}, {"planes", "0:zeta_x=0 1:zeta_y=0 2:zeta_z=0"}};
        t.columns = {"plane", "zeta_x", "zeta_y", "zeta_z", "merit"};
        t.units = {"-", "zeta", "zeta", "zeta", "arb"};
        const long n = std::lround(std::floor(a.extent / a.step + 1e-9));
        for (int plane = 0; plane < 3; ++plane)
            for (long i = -n; i <= n; ++i)
                for (long j = -n; j <= n; ++j) {
                    if (i == 0 && j == 0) continue;
                    const double u = static_cast<double>(i) * a.step, v = static_cast<double>(j) * a.step;
                    Vec3 z{};
                    const int au = plane == 0 ? 1 : 0, av = plane == 2 ? 1 : 2;
                    z[au] = u;
                    z[av] = v;
                    t.rows.push_back({double(plane), z[0], z[1], z[2], vacuum_merit_density(z)});
                }
    } else {
        throw UsageError("unknown curve '" + a.curve + "' (reflector or merit)");
    }
    emit(a.output, t);
    return 0;
}

// ---------------------------------------------------------------------------

struct OptimizeArgs {
    std::string config;
    bool single_pass = false;
    std::string resume;
    int iterations = 0;
    std::string out_dir;
};

int cmd_optimize(const OptimizeArgs& a, const Globals& g) {
    RunConfig rc = load_config(a.config, g);
    if (!a.out_dir.empty()) rc.output.directory = a.out_dir;
    if (a.iterations > 0) rc.optimization.max_iterations = a.iterations;
    if (!rc.output.directory.empty()) fs::create_directories(rc.output.directory);
    const auto& oc = rc.optimization;
    const std::string scenario = geometry_scenario(oc);

    if (a.single_pass) {
        const SinglePassResult r = single_pass(oc);
        save_geometry(rc.path(rc.output.geometry), {r.geometry, scenario, oc.zeta(), std::nullopt});
        Table t;
        t.meta = {{"format", "cohere-single-pass 1"}, {"scenario", scenario}};
        t.columns = {"blocks", "re_rho12", "im_rho12", "abs_rho12", "gamma1", "gamma2", "abs_kappa12"};
        t.units = {"-", "-", "-", "-", "rate", "rate", "rate"};
        t.rows.push_back({double(r.geometry.blocks.size()), r.rho12.real(), r.rho12.imag(), std::abs(r.rho12),
                          r.rates.gamma1, r.rates.gamma2, std::abs(r.rates.kappa12)});
        save(rc.path(rc.output.trace), t);
        std::printf("single pass: %zu blocks |rho12| %.6g\n", r.geometry.blocks.size(), std::abs(r.rho12));
        return 0;
    }

    std::optional<Checkpoint> resume;
    std::vector<TraceRecord> records;
    if (!a.resume.empty()) {
        const GeometryFile gf = load_geometry(a.resume);
        if (!gf.iteration) throw Error(Errc::parse, a.resume + ": not a checkpoint (no iteration field)");
        resume = Checkpoint{gf.geometry, *gf.iteration};
        const std::string trace_path = rc.path(rc.output.trace);
        if (fs::exists(trace_path))
            for (const auto& r : parse_trace(load(trace_path, trace_columns)))
                if (r.iteration <= *gf.iteration) records.push_back(r);
    }

    const int every = std::max(1, rc.output.checkpoint_every);
    auto observer = [&](const TraceRecord& r, const VoxelGeometry& after) {
        records.push_back(r);
        std::printf("iter %d block %s merit %.4g |rho12| %.6g gamma1 %.5g gamma2 %.5g\n", r.iteration,
                    to_string(r.placed).c_str(), r.merit_max, std::abs(r.rho12), r.gamma1, r.gamma2);
        std::fflush(stdout);
        save(rc.path(rc.output.trace), trace_table(records, scenario));
        if (r.iteration % every == 0)
            save_geometry(rc.path(rc.output.checkpoint), {after, scenario, oc.zeta(), r.iteration});
    };
    const OptimizationTrace trace = run_optimization(oc, resume, observer);
    if (records.empty()) throw Error(Errc::region_exhausted, "no iterations were run");

    // best over the whole (possibly resumed) history
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
        if (std::abs(records[i].rho12) > std::abs(records[best].rho12)) best = i;
    VoxelGeometry bg = oc.initial_geometry();
    for (const auto& r : records)
        if (r.iteration < records[best].iteration) bg.blocks.insert(r.placed);
    save_geometry(rc.path(rc.output.geometry), {bg, scenario, oc.zeta(), records[best].iteration});
    std::printf("best iteration %d |rho12| %.6g (%zu blocks)\n", records[best].iteration,
                std::abs(records[best].rho12), bg.blocks.size());
    (void)trace;
    return 0;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string config;
    std::vector<int> resolutions;
    int samples = 0;
    std::string out_dir;
};

int cmd_validate(const ValidateArgs& a, const Globals& g) {
    RunConfig rc = load_config(a.config, g);
    if (!a.out_dir.empty()) rc.output.directory = a.out_dir;
    if (!a.resolutions.empty()) rc.validation.resolutions = a.resolutions;
    if (a.samples > 0) rc.validation.samples = a.samples;
    const auto& v = rc.validation;
    if (v.samples < 10) throw Error(Errc::protocol, "vacuum protocol needs at least 10 samples");
    if (v.resolutions.empty()) throw UsageError("no resolutions given");
    if (!rc.output.directory.empty()) fs::create_directories(rc.output.directory);

    std::vector<ErrorBudget> budgets;
    std::map<int, double> totals;
    for (int res : v.resolutions) {
        FdtdConfig c = rc.optimization.fdtd;
        c.resolution = res;
        const auto p = vacuum_error_protocol(c, v.samples, v.seed);
        budgets.push_back(p.budget);
        totals[res] = p.budget.total;
        save(rc.path("vacuum_samples_" + std::to_string(res) + ".tsv"), samples_table(p));
        std::printf("budget %d ppw: systematic %.4g random %.4g total %.4g (%d samples, %zu skipped)\n", res,
                    p.budget.systematic, p.budget.random, p.budget.total, p.budget.n_samples, p.skipped.size());
        std::fflush(stdout);
    }
    save(rc.path("budget.tsv"), budget_table(budgets, v.seed));

    std::vector<BenchmarkRow> rows;
    for (int res : v.resolutions) {
        FdtdConfig c = rc.optimization.fdtd;
        c.resolution = res;
        for (double z : node_zeta_grid(c, v.zeta_min, v.zeta_max)) {
            rows.push_back(reflector_point(c, z, totals[res]));
            const auto& r = rows.back();
            std::printf("%d ppw zeta %.4f fdtd %.5f analytic %.5f diff %+.5f%s\n", res, r.zeta, r.fdtd, r.analytic,
                        r.difference, r.flagged ? "  FLAGGED" : "");
            std::fflush(stdout);
        }
    }
    save(rc.path("benchmark.tsv"), benchmark_table(rows));
    const int headline = v.resolutions.front();
    int flagged = 0;
    for (const auto& r : rows)
        if (r.resolution == headline && r.flagged) ++flagged;
    std::printf("%d flagged point(s) at %d ppw\n", flagged, headline);
    return flagged ? 1 : 0;
}

// ---------------------------------------------------------------------------

struct AntinodeArgs {
    int count = 5;
    bool optimize = false;
    std::string config;
    std::string output;
    std::string out_dir;
};

int cmd_antinodes(const AntinodeArgs& a, const Globals& g) {
    if (a.count < 1) throw UsageError("count must be >= 1");
    const auto z = antinodes(a.count);
    Table t;
    t.meta = {{"format", "cohere-antinodes 1"}};
    t.columns = {"n", "zeta_n", "half_n_plus_half", "relative_offset", "abs_rho12"};
    t.units = {"-", "zeta", "zeta", "-", "-"};
    for (int n = 1; n <= a.count; ++n) {
        const double zn = z[static_cast<std::size_t>(n - 1)], guess = 0.5 * (n + 0.5);
        t.rows.push_back({double(n), zn, guess, (zn - guess) / guess, std::abs(reflector_coherence(zn))});
    }
    emit(a.output, t);
    if (!a.optimize) return 0;

    // one optimization recipe per antinode
    RunConfig base = load_config(a.config, g);
    const std::string dir = a.out_dir.empty() ? "." : a.out_dir;
    fs::create_directories(dir);
    for (int n = 1; n <= a.count; ++n) {
        RunConfig rc = base;
        rc.optimization.atom_zeta = z[static_cast<std::size_t>(n - 1)];
        rc.output.directory = dir + "/antinode_" + std::to_string(n);
        const std::string path = dir + "/antinode_" + std::to_string(n) + ".json";
        std::ofstream f(path);
        if (!f) throw Error(Errc::io, "cannot write " + path);
        f << run_config_json(rc).dump(2) << '\n';
        std::fprintf(stderr, "scheduled: cohere optimize %s\n", path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct GreensArgs {
    std::string config;
    std::string geometry;
    std::string output;
};

int cmd_greens(const GreensArgs& a, const Globals& g) {
    const RunConfig rc = load_config(a.config, g);
    const VoxelGeometry geo =
        a.geometry.empty() ? rc.optimization.initial_geometry() : load_geometry(a.geometry).geometry;
    const GreensField f = greens_field(geo, rc.optimization.fdtd);
    emit(a.output, greens_table(f, rc.optimization.fdtd, geo));
    return 0;
}

int exit_code(Errc c) {
    switch (c) {
    case Errc::parse:
    case Errc::protocol:
        return 2;
    default:
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Environment-induced coherence: analytic curves, inverse design and FDTD validation"};
    app.require_subcommand(1);
    Globals globals;
    app.add_option("--threads", globals.threads, "worker threads for the FDTD engine (results do not change)")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", globals.seed, "seed for the vacuum sampling protocol");

    AnalyticArgs an;
    auto* c_an = app.add_subcommand("analytic", "closed-form reflector curve or vacuum merit slices");
    c_an->add_option("curve", an.curve, "reflector | merit")->capture_default_str();
    c_an->add_option("--zeta-min", an.zeta_min)->capture_default_str();
    c_an->add_option("--zeta-max", an.zeta_max)->capture_default_str();
    c_an->add_option("--step", an.step)->capture_default_str();
    c_an->add_option("--extent", an.extent, "half width of the merit slices in zeta")->capture_default_str();
    c_an->add_option("-o,--output", an.output, "output file (default stdout)");

    OptimizeArgs op;
    auto* c_op = app.add_subcommand("optimize", "iterative or single-pass block placement");
    c_op->add_option("config", op.config, "JSON run configuration");
    c_op->add_flag("--single-pass", op.single_pass, "fill every block with positive vacuum merit");
    c_op->add_option("--resume", op.resume, "checkpoint geometry file to continue from");
    c_op->add_option("--iterations", op.iterations, "override max_iterations")->check(CLI::PositiveNumber);
    c_op->add_option("--out-dir", op.out_dir, "override output directory");

    ValidateArgs va;
    auto* c_va = app.add_subcommand("validate", "vacuum error budget and reflector benchmark");
    c_va->add_option("config", va.config, "JSON run configuration");
    c_va->add_option("--resolutions", va.resolutions, "ppw values; the first is the headline")->delimiter(',');
    c_va->add_option("--samples", va.samples, "vacuum samples per resolution");
    c_va->add_option("--out-dir", va.out_dir, "override output directory");

    AntinodeArgs at;
    auto* c_at = app.add_subcommand("antinodes", "antinode positions of the mirror coherence");
    c_at->add_option("--count", at.count)->capture_default_str();
    c_at->add_flag("--optimize", at.optimize, "write one optimization config per antinode");
    c_at->add_option("--config", at.config, "base JSON configuration for --optimize");
    c_at->add_option("-o,--output", at.output, "output file (default stdout)");
    c_at->add_option("--out-dir", at.out_dir, "directory for scheduled configs");

    GreensArgs gr;
    auto* c_gr = app.add_subcommand("greens", "dump the calibrated Green's field over the region");
    c_gr->add_option("config", gr.config, "JSON run configuration");
    c_gr->add_option("--geometry", gr.geometry, "geometry file (default: the configured initial geometry)");
    c_gr->add_option("-o,--output", gr.output, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_an) return cmd_analytic(an);
        if (*c_op) return cmd_optimize(op, globals);
        if (*c_va) return cmd_validate(va, globals);
        if (*c_at) return cmd_antinodes(at, globals);
        if (*c_gr) return cmd_greens(gr, globals);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
