// Acceptance gate: one PASS/FAIL line per criterion. Optional arguments pick
// a subset of criteria by number; exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cohere/adjoint.hpp"
#include "cohere/analytic_greens.hpp"
#include "cohere/coherence.hpp"
#include "cohere/fdtd.hpp"
#include "cohere/optimizer.hpp"
#include "cohere/validation.hpp"

using namespace cohere;

namespace {

// tolerances
constexpr double surface_tol = 1e-6;
constexpr double first_antinode_expected = 0.7627;
constexpr double first_antinode_tol = 5e-4;
constexpr double antinode_rel_tol = 0.02;
constexpr double analytic_runtime_limit = 1.0;
constexpr double drift_limit = 0.10;
constexpr double gradient_rel_tol = 1e-4;
constexpr double merit_fit_rel_tol = 1e-10;
constexpr double master_tol = 1e-8;
constexpr double trace_tol = 1e-10;
constexpr int vacuum_samples = 50;
constexpr std::uint64_t vacuum_seed = 1;
constexpr int design_iterations = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const DipolePair perp = standard_dipoles(Rotation::perpendicular, 1.0, 1.0);

ComplexMatrix3 random_psd(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexMatrix3 b;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = n(rng);
    return b * b.transpose();
}

DipolePair random_pair(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    auto v = [&] { return Vec3c{cplx(n(rng), n(rng)), cplx(n(rng), n(rng)), cplx(n(rng), n(rng))}; };
    return DipolePair(v(), v());
}

// ---------------------------------------------------------------------------

std::optional<VacuumProtocolResult> vacuum_result;

const VacuumProtocolResult& vacuum() {
    if (!vacuum_result) {
        const auto t0 = Clock::now();
        vacuum_result = vacuum_error_protocol(FdtdConfig{}, vacuum_samples, vacuum_seed);
        const auto& b = vacuum_result->budget;
        std::printf("  vacuum budget at %d ppw, n=%d, seed %llu: systematic %.5f random %.5f total %.5f (%.0f s)\n",
                    b.resolution, b.n_samples, static_cast<unsigned long long>(vacuum_seed), b.systematic,
                    b.random, b.total, seconds_since(t0));
    }
    return *vacuum_result;
}

double total_error() { return vacuum().budget.total; }

// ---------------------------------------------------------------------------

void criterion1() {
    const auto t0 = Clock::now();
    const double surface = std::abs(reflector_coherence(1e-9));
    std::vector<double> curve;
    for (int i = 1; i <= 600; ++i) curve.push_back(reflector_coherence(0.005 * i));
    const auto z = antinodes(5);
    const double runtime = seconds_since(t0);

    bool ok = std::abs(surface - 0.5) <= surface_tol;
    ok = ok && std::abs(z[0] - first_antinode_expected) <= first_antinode_tol;
    double worst = 0.0;
    for (int n = 1; n <= 5; ++n) {
        const double guess = 0.5 * (n + 0.5);
        worst = std::max(worst, std::abs(z[n - 1] - guess) / guess);
    }
    ok = ok && worst <= antinode_rel_tol && runtime < analytic_runtime_limit;
    report(1, ok,
           fmt("|rho(0+)| = %.9f", surface) + fmt(", zeta_1 = %.5f", z[0]) +
               fmt(", worst antinode offset %.4f", worst) + fmt(", runtime %.4f s", runtime));
}

void criterion2() {
    bool null_ok = true;
    for (auto rot : {Rotation::perpendicular, Rotation::parallel})
        for (double s : {1e-9, 0.5, 1.0, 1e6})
            for (double d : {0.3, 1.0, 2.0})
                null_ok = null_ok &&
                          steady_coherence(ComplexMatrix3::identity() * s, standard_dipoles(rot, d, 1.0)) == cplx(0.0);
    const auto& v = vacuum();
    const double drift = v.drift(25, 50);
    report(2, null_ok && drift < drift_limit && v.skipped.empty(),
           std::string("analytic null ") + (null_ok ? "exact" : "broken") + fmt(", total %.5f", v.budget.total) +
               fmt(" (n=25: %.5f", v.running_total[24]) + fmt(", drift %.3f)", drift) +
               fmt(", skipped %.0f", double(v.skipped.size())));
}

void criterion3() {
    const double total = total_error();
    const auto t0 = Clock::now();
    const FdtdConfig c;
    const auto grid = node_zeta_grid(c, 0.3, 2.0);
    const auto rows = reflector_benchmark(c, {c.resolution}, grid, {{c.resolution, total}});
    int flagged = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
        std::printf("  zeta %.4f  fdtd %.5f  analytic %.5f  |diff| %.5f%s\n", r.zeta, r.fdtd, r.analytic,
                    std::abs(r.difference), r.flagged ? "  outside budget" : "");
        flagged += r.flagged;
        worst = std::max(worst, std::abs(r.difference));
    }
    report(3, flagged == 0,
           fmt("%.0f points", double(rows.size())) + fmt(", %.0f outside", double(flagged)) +
               fmt(" the total error %.5f", total) + fmt(", worst |diff| %.5f", worst) +
               fmt(" (%.0f s)", seconds_since(t0)));
}

void criterion4() {
    // full gradient over the six independent entries of a symmetric Im G
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const ComplexMatrix3 a = random_psd(rng);
        const DipolePair p = random_pair(rng);
        const ComplexMatrix3 re = (coherence_gradient(a, p).value * (2.0 * I)).real();
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                ComplexMatrix3 e;
                e(i, j) = 1.0;
                e(j, i) = 1.0;
                const double h = 1e-6 * a.max_abs();
                const double fd =
                    (std::abs(steady_coherence(a + e * h, p)) - std::abs(steady_coherence(a - e * h, p))) / (2.0 * h);
                const double an = contract(re, e).real();
                num += (fd - an) * (fd - an);
                den += an * an;
            }
        worst = std::max(worst, std::sqrt(num / den));
    }

    const CoherenceGradient grad = coherence_gradient(vacuum_im_greens_equal(UnitsConvention::omega0), perp);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> num, ref;
    while (num.size() < 1000) {
        const Vec3 z{u(rng), u(rng), u(rng)};
        if (norm(z) < 0.2) continue;
        const Vec3 r{UnitsConvention::length(z[0]), UnitsConvention::length(z[1]), UnitsConvention::length(z[2])};
        num.push_back(merit_density(grad, vacuum_greens(r, Vec3{}, UnitsConvention::omega0)));
        ref.push_back(vacuum_merit_density(z));
    }
    double sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
        sxy += num[i] * ref[i];
        syy += ref[i] * ref[i];
    }
    const double c = sxy / syy;
    double fit = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) fit = std::max(fit, std::abs(num[i] - c * ref[i]) / std::abs(num[i]));
    report(4, worst <= gradient_rel_tol && c > 0.0 && fit <= merit_fit_rel_tol,
           fmt("gradient rel. error %.2e", worst) + fmt(", merit constant %.6f", c) + fmt(", fit rel. error %.2e", fit));
}

double run_design(Scenario s, Rotation rot, double& initial) {
    OptimizationConfig c;
    c.scenario = s;
    c.rotation = rot;
    c.max_iterations = design_iterations;
    if (s == Scenario::freestanding) c.atom_zeta = first_antinode();
    const auto t0 = Clock::now();
    const OptimizationTrace t = run_optimization(c, std::nullopt, [](const TraceRecord& r, const VoxelGeometry&) {
        std::printf("    iter %2d  |rho12| %.5f  placed (%d,%d,%d)  merit %.4g\n", r.iteration, std::abs(r.rho12),
                    r.placed.ix, r.placed.iy, r.placed.iz, r.merit_max);
        std::fflush(stdout);
    });
    initial = std::abs(t.records.front().rho12);
    const double peak = std::abs(t.records[t.best_index()].rho12);
    std::printf("  %s/%s: %zu iterations, start %.5f, peak %.5f at iteration %d (%.0f s)\n", to_string(s),
                to_string(rot), t.records.size(), initial, peak, t.best_iteration(), seconds_since(t0));
    return peak;
}

void criterion5() {
    const double total = total_error();
    const double baseline = std::abs(reflector_coherence(first_antinode()));
    double start_b = 0.0, start_f = 0.0;
    const double peak_b = run_design(Scenario::backplate, Rotation::perpendicular, start_b);
    const double peak_f = run_design(Scenario::freestanding, Rotation::parallel, start_f);
    const bool ok_b = peak_b > baseline + total;
    const bool ok_f = peak_f >= 3.0 * total;
    report(5, ok_b && ok_f,
           fmt("backplate peak %.5f", peak_b) + fmt(" vs baseline + total %.5f", baseline + total) +
               (ok_b ? " ok" : " short") + fmt("; freestanding peak %.5f", peak_f) +
               fmt(" vs 3 x total %.5f", 3.0 * total) + (ok_f ? " ok" : " short"));
}

void criterion6() {
    std::mt19937_64 rng(6);
    double max_rho = 0.0, scale_dev = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const ComplexMatrix3 a = random_psd(rng);
        const DipolePair p = (t % 2) ? random_pair(rng) : perp;
        const cplx r = steady_coherence(a, p);
        max_rho = std::max(max_rho, std::abs(r));
        if (t % 10 == 0)
            for (double lam : {1e-6, 7.0, 1e8})
                scale_dev = std::max(scale_dev, std::abs(steady_coherence(a * lam, p) - r));
    }

    double master_dev = 0.0, trace_dev = 0.0;
    for (int t = 0; t < 5; ++t) {
        const ComplexMatrix3 a = random_psd(rng) * 0.5;
        const RateSet r = rates_from_greens(a, random_pair(rng));
        const double g = r.gamma1 + r.gamma2;
        const auto end = evolve_master(r, DensityMatrix3::excited(), 45.0 / g, std::min(0.02 / g, 0.01),
                                       UnitsConvention::omega0, [&](double, const ComplexMatrix3& m) {
                                           trace_dev = std::max(trace_dev, std::abs(m.trace() - 1.0));
                                       });
        master_dev = std::max(master_dev, std::abs(end.rho12() - r.kappa12 / g));
    }

    // reciprocity: G_xz(a, b) = G_zx(b, a) with a backplate and blocks present
    const double total = total_error();
    FdtdConfig c;
    VoxelGeometry geom;
    geom.backplate = true;
    geom.blocks = {{7, 9, 0}, {10, 12, 0}, {9, 6, 0}};
    geom.atom = {0.0, 0.0, 0.5};
    FdtdEngine engine(rasterize(geom, c), c);
    const Vec3 pa{0.0, 0.0, 0.5}, pb{1.0 / 3.0, -0.25, 0.25};
    const auto ra = engine.run_point_source(pa, Axis::x, {pb});
    const auto rb = engine.run_point_source(pb, Axis::z, {pa});
    const double recip = std::abs(ra.probes[0][2] - rb.probes[0][0]) / std::abs(ra.probes[0][2]);

    // determinism across thread counts
    FdtdConfig c2 = c;
    c2.threads = 2;
    FdtdEngine e1(rasterize(geom, c), c), e2(rasterize(geom, c2), c2);
    const ComplexMatrix3 g1 = equal_point_greens(e1, pa), g2 = equal_point_greens(e2, pa);
    bool bitwise = true;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) bitwise = bitwise && g1(i, j) == g2(i, j);

    const bool ok = max_rho <= 0.5 + 1e-12 && scale_dev <= 1e-12 && master_dev <= master_tol &&
                    trace_dev <= trace_tol && recip <= total && bitwise;
    report(6, ok,
           fmt("max |rho| %.6f", max_rho) + fmt(", scale dev %.1e", scale_dev) + fmt(", master dev %.1e", master_dev) +
               fmt(", trace dev %.1e", trace_dev) + fmt(", reciprocity rel. %.2e", recip) +
               fmt(" vs total %.5f", total) + (bitwise ? ", threads bitwise equal" : ", threads differ"));
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    const auto want = [&](int n) { return pick.empty() || pick.contains(n); };
    void (*const criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5, criterion6};
    for (int n = 1; n <= 6; ++n) {
        if (!want(n)) continue;
        try {
            criteria[n - 1]();
        } catch (const std::exception& e) {
            report(n, false, std::string("error: ") + e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}
