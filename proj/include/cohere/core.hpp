#pragma once

// Units, small dense complex linear algebra and dipole configurations shared by
// every other part of the library.
//
// Natural units are used throughout: the reference vacuum wavelength and the
// speed of light are both 1, so the transition angular frequency is 2*pi and
// the dimensionless distance zeta = omega*z/(pi*c) reduces to 2*z.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cohere {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// ---------------------------------------------------------------------------
// errors

enum class Errc {
    invalid_argument,
    domain,
    non_physical_environment,
    degenerate_environment,
    numerical,
    convergence,
    geometry,
    missing_data,
    region_exhausted,
    protocol,
    parse,
    io,
};

inline const char* to_string(Errc c) {
    switch (c) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::domain: return "domain";
    case Errc::non_physical_environment: return "non-physical-environment";
    case Errc::degenerate_environment: return "degenerate-environment";
    case Errc::numerical: return "numerical";
    case Errc::convergence: return "convergence";
    case Errc::geometry: return "geometry";
    case Errc::missing_data: return "missing-data";
    case Errc::region_exhausted: return "region-exhausted";
    case Errc::protocol: return "protocol";
    case Errc::parse: return "parse";
    case Errc::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// ---------------------------------------------------------------------------
// units

struct UnitsConvention {
    static constexpr double lambda0 = 1.0;
    static constexpr double c = 1.0;
    static constexpr double omega0 = 2.0 * pi * c / lambda0;

    /// Dimensionless distance omega0*z/(pi*c).
    static constexpr double zeta(double z) { return omega0 * z / (pi * c); }
    /// Inverse of zeta(): simulation length for a dimensionless distance.
    static constexpr double length(double zeta) { return zeta * pi * c / omega0; }
};

// ---------------------------------------------------------------------------
// 3-vectors and 3x3 matrices

using Vec3 = std::array<double, 3>;
using Vec3c = std::array<cplx, 3>;

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
inline double norm(const Vec3c& v) {
    return std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
}

/// Hermitian inner product a^* . b
inline cplx dot_conj(const Vec3c& a, const Vec3c& b) {
    return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] + std::conj(a[2]) * b[2];
}

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

/// 3x3 complex matrix, row-major, rows and columns indexed x, y, z.
class ComplexMatrix3 {
public:
    constexpr ComplexMatrix3() = default;

    static ComplexMatrix3 identity() { return diag(1.0, 1.0, 1.0); }
    static ComplexMatrix3 diag(cplx a, cplx b, cplx c) {
        ComplexMatrix3 m;
        m(0, 0) = a;
        m(1, 1) = b;
        m(2, 2) = c;
        return m;
    }
    /// a (x) b, no conjugation; callers conjugate explicitly.
    static ComplexMatrix3 outer(const Vec3c& a, const Vec3c& b) {
        ComplexMatrix3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = a[i] * b[j];
        return m;
    }

    cplx& operator()(int i, int j) { return a_[3 * i + j]; }
    const cplx& operator()(int i, int j) const { return a_[3 * i + j]; }

    ComplexMatrix3 transpose() const {
        ComplexMatrix3 t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t(i, j) = (*this)(j, i);
        return t;
    }
    ComplexMatrix3 conj() const {
        ComplexMatrix3 t;
        for (int k = 0; k < 9; ++k) t.a_[k] = std::conj(a_[k]);
        return t;
    }
    ComplexMatrix3 adjoint() const { return transpose().conj(); }
    /// Elementwise imaginary part (returned as a matrix with zero imaginary parts).
    ComplexMatrix3 imag() const {
        ComplexMatrix3 t;
        for (int k = 0; k < 9; ++k) t.a_[k] = a_[k].imag();
        return t;
    }
    ComplexMatrix3 real() const {
        ComplexMatrix3 t;
        for (int k = 0; k < 9; ++k) t.a_[k] = a_[k].real();
        return t;
    }
    cplx trace() const { return a_[0] + a_[4] + a_[8]; }

    /// Largest elementwise modulus.
    double max_abs() const {
        double m = 0.0;
        for (const auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }
    double frobenius() const {
        double s = 0.0;
        for (const auto& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    ComplexMatrix3& operator+=(const ComplexMatrix3& o) {
        for (int k = 0; k < 9; ++k) a_[k] += o.a_[k];
        return *this;
    }
    ComplexMatrix3& operator-=(const ComplexMatrix3& o) {
        for (int k = 0; k < 9; ++k) a_[k] -= o.a_[k];
        return *this;
    }
    ComplexMatrix3& operator*=(cplx s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend ComplexMatrix3 operator+(ComplexMatrix3 a, const ComplexMatrix3& b) { return a += b; }
    friend ComplexMatrix3 operator-(ComplexMatrix3 a, const ComplexMatrix3& b) { return a -= b; }
    friend ComplexMatrix3 operator*(cplx s, ComplexMatrix3 a) { return a *= s; }
    friend ComplexMatrix3 operator*(ComplexMatrix3 a, cplx s) { return a *= s; }
    friend ComplexMatrix3 operator/(ComplexMatrix3 a, cplx s) { return a *= (1.0 / s); }

    friend ComplexMatrix3 operator*(const ComplexMatrix3& a, const ComplexMatrix3& b) {
        ComplexMatrix3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                cplx s = 0.0;
                for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
                m(i, j) = s;
            }
        return m;
    }
    friend Vec3c operator*(const ComplexMatrix3& a, const Vec3c& v) {
        Vec3c r{};
        for (int i = 0; i < 3; ++i) r[i] = a(i, 0) * v[0] + a(i, 1) * v[1] + a(i, 2) * v[2];
        return r;
    }
    friend bool operator==(const ComplexMatrix3&, const ComplexMatrix3&) = default;

private:
    std::array<cplx, 9> a_{};
};

/// Unconjugated elementwise contraction sum_ij A_ij B_ij.
inline cplx contract(const ComplexMatrix3& a, const ComplexMatrix3& b) {
    cplx s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += a(i, j) * b(i, j);
    return s;
}

/// Quadratic form u^* . A . v
inline cplx sandwich(const Vec3c& u, const ComplexMatrix3& a, const Vec3c& v) {
    return dot_conj(u, a * v);
}

/// Eigenvalues of a Hermitian 3x3 matrix, ascending (closed-form trigonometric solution).
inline std::array<double, 3> hermitian_eigenvalues(const ComplexMatrix3& m) {
    const double a = m(0, 0).real(), b = m(1, 1).real(), c = m(2, 2).real();
    const cplx d = m(0, 1), e = m(1, 2), f = m(0, 2);
    const double p1 = std::norm(d) + std::norm(e) + std::norm(f);
    const double q = (a + b + c) / 3.0;
    const double p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    if (p == 0.0) return {q, q, q};
    ComplexMatrix3 bm = (1.0 / p) * (m - ComplexMatrix3::diag(q, q, q));
    // det of Hermitian B is real
    const cplx det = bm(0, 0) * (bm(1, 1) * bm(2, 2) - bm(1, 2) * bm(2, 1)) -
                     bm(0, 1) * (bm(1, 0) * bm(2, 2) - bm(1, 2) * bm(2, 0)) +
                     bm(0, 2) * (bm(1, 0) * bm(2, 1) - bm(1, 1) * bm(2, 0));
    const double r = std::clamp(det.real() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    return {e3, e2, e1};
}

// ---------------------------------------------------------------------------
// dipoles

enum class Rotation { perpendicular, parallel };

inline const char* to_string(Rotation r) {
    return r == Rotation::perpendicular ? "perpendicular" : "parallel";
}

/// The two transition dipole moments of the Lambda system together with the
/// matrices K = d^* (x) mu and N = d^* (x) d + mu^* (x) mu.
class DipolePair {
public:
    DipolePair(const Vec3c& d, const Vec3c& mu)
        : d_(d), mu_(mu),
          k_(ComplexMatrix3::outer(conj(d), mu)),
          n_(ComplexMatrix3::outer(conj(d), d) + ComplexMatrix3::outer(conj(mu), mu)) {}

    const Vec3c& d() const { return d_; }
    const Vec3c& mu() const { return mu_; }
    const ComplexMatrix3& K() const { return k_; }
    const ComplexMatrix3& N() const { return n_; }

private:
    static Vec3c conj(const Vec3c& v) { return {std::conj(v[0]), std::conj(v[1]), std::conj(v[2])}; }

    Vec3c d_, mu_;
    ComplexMatrix3 k_, n_;
};

struct DipoleMatrices {
    ComplexMatrix3 K;
    ComplexMatrix3 N;
};

inline DipoleMatrices dipole_matrices(const DipolePair& pair) { return {pair.K(), pair.N()}; }

/// Circularly rotating orthogonal dipoles. Perpendicular rotation is in the yz
/// plane, parallel rotation in the xy plane (relative to the placement plane).
inline DipolePair standard_dipoles(Rotation rotation, double d, double mu) {
    if (!(d > 0.0) || !(mu > 0.0))
        throw Error(Errc::invalid_argument, "dipole magnitudes must be positive");
    const double s = 1.0 / std::sqrt(2.0);
    if (rotation == Rotation::perpendicular)
        return DipolePair({0.0, d * s, I * d * s}, {0.0, mu * s, -I * mu * s});
    return DipolePair({d * s, I * d * s, 0.0}, {mu * s, -I * mu * s, 0.0});
}

} // namespace cohere
