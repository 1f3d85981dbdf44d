#pragma once

#include "quartic/types.hpp"

namespace quartic {

/// A kernel value together with its first two derivatives in the wavenumber.
struct KernelValue {
  cplx value{};
  cplx d1{};
  cplx d2{};

  KernelValue conj() const { return {std::conj(value), std::conj(d1), std::conj(d2)}; }
  KernelValue& operator+=(const KernelValue& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
  friend KernelValue operator+(KernelValue a, const KernelValue& b) { return a += b; }
  friend KernelValue operator*(cplx s, const KernelValue& k) {
    return {s * k.value, s * k.d1, s * k.d2};
  }
};

/// Coefficients of the low-energy expansion of the quartic free resolvent:
/// R(lambda) = a/lambda + G0 + a1 * lambda * G1 + ...
struct ExpansionConstants {
  static constexpr cplx a_plus{1.0 / (8.0 * pi), 1.0 / (8.0 * pi)};
  static constexpr cplx a_minus{1.0 / (8.0 * pi), -1.0 / (8.0 * pi)};
  static constexpr cplx a1_plus{1.0 / (48.0 * pi), -1.0 / (48.0 * pi)};
  static constexpr cplx a1_minus{1.0 / (48.0 * pi), 1.0 / (48.0 * pi)};

  static constexpr cplx a(Branch b) { return b == Branch::plus ? a_plus : a_minus; }
  static constexpr cplx a1(Branch b) { return b == Branch::plus ? a1_plus : a1_minus; }
};

/// e^{±i lambda r} / (4 pi r), the three-dimensional Helmholtz resolvent kernel.
/// Throws DiagonalSingularityError at r == 0 and DomainError for lambda <= 0.
KernelValue schrodinger_resolvent(double lambda, double r, Branch branch);

/// Kernel of (Delta^2 - lambda^4 ∓ i0)^{-1}:
///   (e^{±i lambda r} - e^{-lambda r}) / (8 pi lambda^2 r).
/// Finite on the diagonal; r == 0 returns the limit (1 ± i)/(8 pi lambda).
KernelValue quartic_resolvent(double lambda, double r, Branch branch);

enum class ExpansionTerm { G0, G1 };

/// G0(r) = -r/(8 pi) (the kernel of Delta^{-2}) and G1(r) = r^2.
double expansion_term(ExpansionTerm term, double r);

/// Remainders of the low-energy expansion:
///   order 0: E0 = R - a/lambda
///   order 1: E1 = E0 - G0
///   order 2: E2 = E1 - a1 lambda G1
/// Evaluated by power series when lambda*r is small so no digits are lost.
KernelValue remainder(int order, double lambda, double r, Branch branch);

/// K(z) = (e^{iz} - e^{-z})/(8 pi z) - a+ + z/(8 pi) with K1 = z K', K2 = z K1'.
struct KFamily {
  cplx k{};
  cplx k1{};
  cplx k2{};
};
KFamily k_family(double z);

/// Below this value of lambda*r the series form is used.
inline constexpr double series_crossover = 0.5;

/// Radial profile of the free propagator: the inverse Fourier transform of e^{-i|xi|^4}
/// evaluated at |x| = r. Cached on a radial grid with cubic Hermite interpolation.
cplx free_kernel_profile(double r);

/// Same profile evaluated by direct contour-rotated quadrature (no cache).
/// Returns the value and its r-derivative.
std::pair<cplx, cplx> free_kernel_profile_direct(double r);

/// Closed form of the profile at the origin: Gamma(3/4) e^{-3 i pi/8} / (8 pi^2).
cplx free_kernel_at_origin();

/// Kernel of e^{-it Delta^2}: t^{-3/4} K(t^{-1/4} r). Throws DomainError for t <= 0.
cplx free_propagator_kernel(double t, double r);

}  // namespace quartic
