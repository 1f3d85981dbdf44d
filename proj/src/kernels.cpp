#include "quartic/kernels.hpp"

#include <array>
#include <cmath>

namespace quartic {
namespace {

// A radial function h(z) with z h'(z) and z^2 h''(z). The kernels below all have the
// form h(lambda r)/lambda, which makes lambda-derivatives algebraic in these three.
struct Radial {
  cplx h{};
  cplx zh1{};
  cplx z2h2{};
};

// phi(z) = (e^{iz} - e^{-z})/(8 pi z) = (1/(8 pi)) sum_{n>=1} (i^n - (-1)^n) z^{n-1}/n!.
// Series starting at index `first` (1: phi, 3: K, 5: K - a1 z^2).
Radial phi_series(double z, int first) {
  static const std::array<cplx, 4> ipow{cplx{1, 0}, cplx{0, 1}, cplx{-1, 0}, cplx{0, -1}};
  Radial out;
  double factorial = 1.0;
  for (int n = 1; n < first; ++n) factorial *= n;
  double zpow = std::pow(z, first - 1);
  for (int n = first; n <= 60; ++n) {
    factorial *= n;
    const cplx c = (ipow[n % 4] - ((n % 2) ? -1.0 : 1.0)) / factorial;
    const cplx term = c * zpow;
    out.h += term;
    out.zh1 += static_cast<double>(n - 1) * term;
    out.z2h2 += static_cast<double>((n - 1) * (n - 2)) * term;
    // Every fourth coefficient vanishes, so test the bound |z|^{n-1}/n! rather than the term.
    if (zpow / factorial * (n * n) < 1e-18 * std::abs(out.h) || (zpow == 0.0 && n > first)) break;
    zpow *= z;
  }
  const double s = 1.0 / (8.0 * pi);
  out.h *= s;
  out.zh1 *= s;
  out.z2h2 *= s;
  return out;
}

Radial phi_closed(double z) {
  const cplx eiz = std::exp(I * z);
  const double emz = std::exp(-z);
  const cplx n0 = eiz - emz;
  const cplx n1 = I * eiz + emz;
  const cplx n2 = -eiz - emz;
  const double d = 8.0 * pi * z;
  return {n0 / d, (z * n1 - n0) / d, (z * z * n2 - 2.0 * z * n1 + 2.0 * n0) / d};
}

// Plus-branch radial profiles of R, K and K - a1 z^2.
Radial phi_profile(double z) { return z < series_crossover ? phi_series(z, 1) : phi_closed(z); }

Radial k_profile(double z) {
  if (z < series_crossover) return phi_series(z, 3);
  Radial p = phi_closed(z);
  const double s = z / (8.0 * pi);
  return {p.h - ExpansionConstants::a_plus + s, p.zh1 + s, p.z2h2};
}

Radial k2_profile(double z) {
  if (z < series_crossover) return phi_series(z, 5);
  Radial k = k_profile(z);
  const cplx a1z2 = ExpansionConstants::a1_plus * z * z;
  return {k.h - a1z2, k.zh1 - 2.0 * a1z2, k.z2h2 - 2.0 * a1z2};
}

// h(lambda r)/lambda and its first two lambda-derivatives.
KernelValue scaled(const Radial& p, double lambda) {
  const double l2 = lambda * lambda;
  return {p.h / lambda, (p.zh1 - p.h) / l2, (p.z2h2 - 2.0 * p.zh1 + 2.0 * p.h) / (l2 * lambda)};
}

KernelValue with_branch(KernelValue k, Branch b) { return b == Branch::plus ? k : k.conj(); }

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("wavenumber must be positive");
}

}  // namespace

KernelValue schrodinger_resolvent(double lambda, double r, Branch branch) {
  require_positive_lambda(lambda);
  if (r == 0.0) throw DiagonalSingularityError("Helmholtz kernel is singular at r = 0");
  if (!(r > 0.0)) throw DomainError("distance must be nonnegative");
  const cplx v = std::exp(I * (lambda * r)) / (4.0 * pi * r);
  return with_branch({v, I * r * v, -r * r * v}, branch);
}

KernelValue quartic_resolvent(double lambda, double r, Branch branch) {
  require_positive_lambda(lambda);
  if (!(r >= 0.0)) throw DomainError("distance must be nonnegative");
  return with_branch(scaled(phi_profile(lambda * r), lambda), branch);
}

double expansion_term(ExpansionTerm term, double r) {
  return term == ExpansionTerm::G0 ? -r / (8.0 * pi) : r * r;
}

KernelValue remainder(int order, double lambda, double r, Branch branch) {
  require_positive_lambda(lambda);
  if (!(r >= 0.0)) throw DomainError("distance must be nonnegative");
  const double z = lambda * r;
  KernelValue out;
  switch (order) {
    case 0:
      out = scaled(k_profile(z), lambda);
      out.value += expansion_term(ExpansionTerm::G0, r);
      break;
    case 1:
      out = scaled(k_profile(z), lambda);
      break;
    case 2:
      out = scaled(k2_profile(z), lambda);
      break;
    default:
      throw DomainError("remainder order must be 0, 1 or 2");
  }
  return with_branch(out, branch);
}

KFamily k_family(double z) {
  if (!(z >= 0.0)) throw DomainError("K family argument must be nonnegative");
  const Radial p = k_profile(z);
  // K2 = z (z K')' = z K' + z^2 K''.
  return {p.h, p.zh1, p.zh1 + p.z2h2};
}

}  // namespace quartic
