#pragma once

// Lambda-system observables: decay rates, cross coupling, the steady-state
// coherence rho_12, its closed form above a perfect mirror, and a direct
// integrator of the master equation used to cross-check the steady state.

#include <functional>
#include <string>
#include <vector>

#include "cohere/core.hpp"

namespace cohere {

/// Decay rates and cross coupling in reduced units (the common positive
/// prefactor 2 omega0^2 / (hbar eps0 c^2) is set to one).
struct RateSet {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    cplx kappa12 = 0.0;

    cplx kappa21() const { return std::conj(kappa12); }
    bool satisfies_cauchy_schwarz(double tol = 1e-12) const {
        return std::abs(kappa12) <= std::sqrt(gamma1 * gamma2) + tol;
    }
};

namespace detail {

inline void require_symmetric(const ComplexMatrix3& a) {
    const double scale = std::max(1.0, a.max_abs());
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-10 * scale)
                throw Error(Errc::invalid_argument, "Im G must be symmetric (reciprocal medium)");
}

inline void require_passive(const ComplexMatrix3& a) {
    // Hermitian part; for real symmetric input this is the matrix itself
    const ComplexMatrix3 h = 0.5 * (a + a.adjoint());
    const auto ev = hermitian_eigenvalues(h);
    const double tr = std::abs(h.trace().real());
    if (ev[0] < -1e-9 * tr)
        throw Error(Errc::non_physical_environment,
                    "Im G has negative eigenvalue " + std::to_string(ev[0]));
}

} // namespace detail

inline RateSet rates_from_greens(const ComplexMatrix3& im_g, const DipolePair& pair) {
    detail::require_symmetric(im_g);
    detail::require_passive(im_g);
    RateSet r;
    r.gamma1 = sandwich(pair.d(), im_g, pair.d()).real();
    r.gamma2 = sandwich(pair.mu(), im_g, pair.mu()).real();
    r.kappa12 = sandwich(pair.d(), im_g, pair.mu());
    return r;
}

/// rho_12 = (K . Im G) / (N . Im G).
inline cplx steady_coherence(const ComplexMatrix3& im_g, const DipolePair& pair) {
    detail::require_symmetric(im_g);
    detail::require_passive(im_g);
    const double total = contract(pair.N(), im_g).real();
    if (!(total > 0.0))
        throw Error(Errc::degenerate_environment, "N . Im G must be positive (no decay channel)");
    return contract(pair.K(), im_g) / total;
}

namespace detail {

/// Shape factor of rho_12 above a perfect reflector for perpendicular rotation, d = mu.
inline double reflector_shape(double zeta) {
    const double t = 2.0 * pi * zeta;
    if (zeta < 1e-3) {
        // series in t; direct evaluation loses digits to cancellation near the surface
        const double t2 = t * t, t4 = t2 * t2;
        return (-4.0 + 0.6 * t2 - t4 / 35.0) / (8.0 + 0.4 * t2 - t4 / 35.0);
    }
    const double s = std::sin(t), c = std::cos(t);
    const double num = 3.0 * t * c - 3.0 * (t * t + 1.0) * s;
    const double den = 8.0 * t * t * t - 6.0 * (t * t - 3.0) * s - 18.0 * t * c;
    return num / den;
}

} // namespace detail

/// Coherence induced by a perfect mirror at dimensionless height zeta, for
/// dipoles rotating perpendicular to the mirror with magnitudes d and mu.
inline double reflector_coherence(double zeta, double d = 1.0, double mu = 1.0) {
    if (!(zeta > 0.0)) throw Error(Errc::domain, "zeta must be positive");
    const double denom = mu * mu + d * d;
    if (denom == 0.0) return 0.0;
    return 2.0 * d * mu / denom * detail::reflector_shape(zeta);
}

/// First `count` local maxima of |reflector_coherence| above zeta = 0.05.
/// Peak n is bracketed around (n + 1/2)/2 and refined by bisection on a
/// central-difference derivative.
inline std::vector<double> antinodes(int count) {
    if (count < 1) throw Error(Errc::invalid_argument, "antinode count must be >= 1");
    constexpr double h = 1e-8;
    auto slope = [](double z) {
        return std::abs(detail::reflector_shape(z + h)) - std::abs(detail::reflector_shape(z - h));
    };
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int n = 1; n <= count; ++n) {
        const double seed = 0.5 * (n + 0.5);
        double lo = 0.0, hi = 0.0;
        bool found = false;
        for (double w = 0.05; w <= 0.2001 && !found; w += 0.05) {
            lo = std::max(0.05, seed - w);
            hi = seed + w;
            found = slope(lo) > 0.0 && slope(hi) < 0.0;
        }
        if (!found)
            throw Error(Errc::numerical, "no derivative sign change for antinode " + std::to_string(n) +
                                             " in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) > 0.0 ? lo : hi) = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    return out;
}

// ---------------------------------------------------------------------------
// master equation

/// Density matrix over {|0>, |1>, |2>}; |0> is the excited state.
class DensityMatrix3 {
public:
    explicit DensityMatrix3(const ComplexMatrix3& m, double tol = 1e-9) : m_(m) {
        if ((m - m.adjoint()).max_abs() > tol)
            throw Error(Errc::invalid_argument, "density matrix must be Hermitian");
        if (std::abs(m.trace() - 1.0) > tol)
            throw Error(Errc::invalid_argument, "density matrix must have unit trace");
        for (int i = 0; i < 3; ++i) {
            const double p = m(i, i).real();
            if (p < -tol || p > 1.0 + tol)
                throw Error(Errc::invalid_argument, "populations must lie in [0, 1]");
        }
    }

    static DensityMatrix3 excited() { return DensityMatrix3(ComplexMatrix3::diag(1.0, 0.0, 0.0)); }

    const ComplexMatrix3& matrix() const { return m_; }
    cplx operator()(int i, int j) const { return m_(i, j); }
    cplx rho12() const { return m_(1, 2); }
    double trace() const { return m_.trace().real(); }

private:
    ComplexMatrix3 m_;
};

/// Right-hand side of the master equation: X + X^dagger with
/// X = -(i w0 + (g1 + g2)/2) |0><0| rho + rho00 (g1/2 |1><1| + g2/2 |2><2|
///     + k21/2 |2><1| + k12/2 |1><2|).
inline ComplexMatrix3 master_rhs(const RateSet& r, const ComplexMatrix3& rho, double omega0) {
    const cplx c = I * omega0 + 0.5 * (r.gamma1 + r.gamma2);
    ComplexMatrix3 x;
    for (int j = 0; j < 3; ++j) x(0, j) = -c * rho(0, j);
    const cplx p00 = rho(0, 0);
    x(1, 1) += p00 * (0.5 * r.gamma1);
    x(2, 2) += p00 * (0.5 * r.gamma2);
    x(2, 1) += p00 * (0.5 * r.kappa21());
    x(1, 2) += p00 * (0.5 * r.kappa12);
    return x + x.adjoint();
}

/// Fixed-step classical RK4 integration from rho0 to t_final. The optional
/// observer sees (t, rho) after every step.
inline DensityMatrix3 evolve_master(const RateSet& rates, const DensityMatrix3& rho0, double t_final,
                                    double dt, double omega0 = UnitsConvention::omega0,
                                    const std::function<void(double, const ComplexMatrix3&)>& observer = {}) {
    const double gsum = rates.gamma1 + rates.gamma2;
    if (!(dt > 0.0) || !(t_final >= 0.0))
        throw Error(Errc::invalid_argument, "dt must be positive and t_final non-negative");
    if (dt * gsum >= 0.1)
        throw Error(Errc::invalid_argument, "step too large: dt*(gamma1+gamma2) must be < 0.1");
    if (dt * std::abs(cplx(0.5 * gsum, omega0)) >= 2.5)
        throw Error(Errc::invalid_argument, "step too large for the optical phase of rho_0j");
    if (rates.gamma1 < 0.0 || rates.gamma2 < 0.0)
        throw Error(Errc::invalid_argument, "decay rates must be non-negative");

    ComplexMatrix3 rho = rho0.matrix();
    const auto steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
    const double h = steps > 0 ? t_final / static_cast<double>(steps) : 0.0;
    for (long n = 0; n < steps; ++n) {
        const ComplexMatrix3 k1 = master_rhs(rates, rho, omega0);
        const ComplexMatrix3 k2 = master_rhs(rates, rho + (0.5 * h) * k1, omega0);
        const ComplexMatrix3 k3 = master_rhs(rates, rho + (0.5 * h) * k2, omega0);
        const ComplexMatrix3 k4 = master_rhs(rates, rho + h * k3, omega0);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (observer) observer(static_cast<double>(n + 1) * h, rho);
    }
    return DensityMatrix3(rho, 1e-8);
}

} // namespace cohere
