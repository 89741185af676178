#pragma once

// Closed-form dyadic Green's tensors: free space and the perfectly reflecting
// half-space z < 0, evaluated at equal points on the z-axis.

#include "cohere/core.hpp"

namespace cohere {

/// Free-space Green's tensor without the contact (delta) term.
inline ComplexMatrix3 vacuum_greens(const Vec3& r, const Vec3& r_prime, double omega) {
    const Vec3 rv = r - r_prime;
    const double R = norm(rv);
    if (R == 0.0)
        throw Error(Errc::domain,
                    "vacuum_greens is singular at coincident points; use vacuum_im_greens_equal");
    const double k = omega / UnitsConvention::c;
    const double kr = k * R;
    const cplx pre = -std::exp(I * kr) / (4.0 * pi * k * k * R * R * R);
    const cplx a = 1.0 - I * kr - kr * kr;
    const cplx b = 3.0 - 3.0 * I * kr - kr * kr;
    const Vec3c u{rv[0] / R, rv[1] / R, rv[2] / R};
    ComplexMatrix3 g = ComplexMatrix3::outer(u, u) * (-b);
    g += ComplexMatrix3::identity() * a;
    return g * pre;
}

/// Im G(r, r, omega) in free space: (omega / 6 pi c) * identity.
inline ComplexMatrix3 vacuum_im_greens_equal(double omega) {
    if (omega < 0.0) throw Error(Errc::domain, "omega must be non-negative");
    const double v = omega / (6.0 * pi * UnitsConvention::c);
    return ComplexMatrix3::diag(v, v, v);
}

/// Diagonal of the scattering part of the perfect-reflector Green's tensor at
/// equal points. Off-diagonal elements vanish identically.
struct HalfSpaceScatterDiag {
    cplx gxx; ///< also gyy
    cplx gzz;

    ComplexMatrix3 matrix() const { return ComplexMatrix3::diag(gxx, gxx, gzz); }
};

namespace detail {
inline void require_positive_zeta(double zeta) {
    if (!(zeta > 0.0))
        throw Error(Errc::domain, "zeta must be positive (atom above the mirror), got " +
                                      std::to_string(zeta));
}
} // namespace detail

/// Height z recovered from zeta = omega z / (pi c).
inline double height_from_zeta(double zeta, double omega) { return zeta * pi * UnitsConvention::c / omega; }

inline HalfSpaceScatterDiag reflector_scatter_equal(double zeta, double omega) {
    detail::require_positive_zeta(zeta);
    const double z = height_from_zeta(zeta, omega);
    const double t = 2.0 * pi * zeta;
    const cplx ph = std::exp(I * t);
    const double p3 = pi * pi * pi;
    HalfSpaceScatterDiag s;
    s.gxx = ph * (1.0 - I * t - t * t) / (32.0 * p3 * zeta * zeta * z);
    s.gzz = ph * (1.0 - I * t) / (16.0 * p3 * zeta * zeta * z);
    return s;
}

/// Im G(r, r, omega) above a perfect reflector in closed trigonometric form.
inline ComplexMatrix3 reflector_im_greens_equal(double zeta, double omega) {
    detail::require_positive_zeta(zeta);
    const double z = height_from_zeta(zeta, omega);
    const double t = 2.0 * pi * zeta;
    const double p3 = pi * pi * pi;
    const double vac = omega / (6.0 * pi * UnitsConvention::c);
    const double par = ((1.0 - t * t) * std::sin(t) - t * std::cos(t)) / (32.0 * p3 * zeta * zeta * z);
    const double perp = (std::sin(t) - t * std::cos(t)) / (16.0 * p3 * zeta * zeta * z);
    return ComplexMatrix3::diag(vac + par, vac + par, vac + perp);
}

} // namespace cohere
