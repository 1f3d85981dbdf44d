#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "quartic/kernels.hpp"

using namespace quartic;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> geomspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a * std::pow(b / a, double(i) / (n - 1));
  return out;
}

// Independent Taylor oracle for phi(z) = (e^{iz} - e^{-z})/(8 pi z), in long double.
std::complex<long double> phi_taylor(long double z, int first) {
  std::complex<long double> sum = 0, ipow = 1;
  long double fact = 1;
  for (int n = 1; n <= 40; ++n) {
    ipow *= std::complex<long double>(0, 1);
    fact *= n;
    if (n < first) continue;
    const long double sgn = (n % 2) ? -1.0L : 1.0L;
    sum += (ipow - sgn) * std::pow(z, static_cast<long double>(n - 1)) / fact;
  }
  return sum / (8.0L * std::numbers::pi_v<long double>);
}

// Power series of the free propagator profile in r^2 (term-wise Gamma integrals).
cplx profile_series(double r) {
  cplx sum = 0;
  double fact = 1;  // (2k+1)!
  for (int k = 0; k < 40; ++k) {
    if (k > 0) fact *= (2.0 * k) * (2.0 * k + 1.0);
    const double g = std::tgamma((2.0 * k + 3.0) / 4.0) / 4.0;
    const cplx phase = std::polar(1.0, -pi * (2.0 * k + 3.0) / 8.0);
    sum += ((k % 2) ? -1.0 : 1.0) / fact * g * phase * std::pow(r, 2 * k);
  }
  return sum / (2.0 * pi * pi);
}

template <class Fn>
void expect_derivatives(Fn f, double lambda, double tol) {
  const double h = 1e-5 * std::max(lambda, 1e-2);
  const KernelValue k = f(lambda);
  const cplx fd1 = (f(lambda + h).value - f(lambda - h).value) / (2 * h);
  const cplx fd2 = (f(lambda + h).d1 - f(lambda - h).d1) / (2 * h);
  const double s1 = std::max(std::abs(k.d1), std::abs(k.value) / lambda);
  const double s2 = std::max(std::abs(k.d2), std::abs(k.value) / (lambda * lambda));
  EXPECT_LT(std::abs(fd1 - k.d1) / s1, tol) << "lambda=" << lambda;
  EXPECT_LT(std::abs(fd2 - k.d2) / s2, tol) << "lambda=" << lambda;
}

}  // namespace

TEST(SchrodingerResolvent, ClosedFormValue) {
  const KernelValue k = schrodinger_resolvent(1.0, 1.0, Branch::plus);
  EXPECT_NEAR(k.value.real(), 0.04300, 1e-5);
  EXPECT_NEAR(k.value.imag(), 0.06697, 1e-5);
  EXPECT_LT(rel(k.value, std::exp(I) / (4 * pi)), 1e-15);
}

TEST(SchrodingerResolvent, ErrorsAndConjugation) {
  EXPECT_THROW(schrodinger_resolvent(1.0, 0.0, Branch::plus), DiagonalSingularityError);
  EXPECT_THROW(schrodinger_resolvent(0.0, 1.0, Branch::plus), DomainError);
  EXPECT_THROW(schrodinger_resolvent(-1.0, 1.0, Branch::minus), DomainError);
  for (double lambda : {0.01, 0.7, 3.0, 40.0}) {
    const KernelValue p = schrodinger_resolvent(lambda, 1.0, Branch::plus);
    const KernelValue m = schrodinger_resolvent(lambda, 1.0, Branch::minus);
    EXPECT_EQ(m.value, std::conj(p.value));
    EXPECT_EQ(m.d2, std::conj(p.d2));
  }
}

TEST(SchrodingerResolvent, DerivativeMatchesFiniteDifference) {
  expect_derivatives([](double l) { return schrodinger_resolvent(l, 2.0, Branch::plus); }, 0.3,
                     1e-6);
}

TEST(QuarticResolvent, ClosedFormValue) {
  const KernelValue k = quartic_resolvent(1.0, 1.0, Branch::plus);
  EXPECT_NEAR(k.value.real(), 0.006861, 1e-5);
  EXPECT_NEAR(k.value.imag(), 0.033487, 1e-5);
  EXPECT_LT(rel(k.value, (std::exp(I) - std::exp(-1.0)) / (8 * pi)), 1e-14);
}

TEST(QuarticResolvent, DiagonalLimit) {
  for (double lambda : {1e-3, 0.5, 7.0}) {
    const KernelValue k = quartic_resolvent(lambda, 0.0, Branch::plus);
    EXPECT_LT(rel(k.value, cplx(1, 1) / (8 * pi * lambda)), 1e-14);
    EXPECT_LT(rel(k.value, quartic_resolvent(lambda, 1e-9, Branch::plus).value), 1e-8);
  }
}

TEST(QuarticResolvent, LowEnergyPole) {
  const KernelValue k = quartic_resolvent(1e-4, 1.0, Branch::plus);
  EXPECT_LT(rel(1e-4 * k.value, ExpansionConstants::a_plus), 1e-3);
}

TEST(QuarticResolvent, ConjugationSymmetry) {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> ul(1e-3, 20.0), ur(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double l = ul(gen), r = ur(gen);
    const KernelValue p = quartic_resolvent(l, r, Branch::plus);
    const KernelValue m = quartic_resolvent(l, r, Branch::minus);
    EXPECT_LE(std::abs(m.value - std::conj(p.value)), 1e-14 * std::abs(p.value));
    for (int j = 0; j <= 2; ++j) {
      const KernelValue ep = remainder(j, l, r, Branch::plus);
      const KernelValue em = remainder(j, l, r, Branch::minus);
      EXPECT_LE(std::abs(em.value - std::conj(ep.value)), 1e-14 * std::abs(ep.value) + 1e-300);
    }
  }
}

TEST(QuarticResolvent, DerivativesOnRandomSample) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> ul(0.05, 5.0), ur(0.0, 6.0);
  for (int i = 0; i < 100; ++i) {
    const double l = ul(gen), r = ur(gen);
    expect_derivatives([r](double x) { return quartic_resolvent(x, r, Branch::plus); }, l, 1e-6);
    expect_derivatives([r](double x) { return remainder(2, x, r, Branch::minus); }, l, 1e-6);
    if (r > 0)
      expect_derivatives([r](double x) { return schrodinger_resolvent(x, r, Branch::plus); }, l,
                         1e-6);
  }
}

TEST(ExpansionTerm, Values) {
  EXPECT_DOUBLE_EQ(expansion_term(ExpansionTerm::G0, 8 * pi), -1.0);
  EXPECT_DOUBLE_EQ(expansion_term(ExpansionTerm::G1, 3.0), 9.0);
  EXPECT_EQ(expansion_term(ExpansionTerm::G0, 0.0), 0.0);
}

TEST(ExpansionConstants, ProductIsRealAndSignIndependent) {
  const cplx p = ExpansionConstants::a_plus * ExpansionConstants::a1_plus;
  const cplx m = ExpansionConstants::a_minus * ExpansionConstants::a1_minus;
  EXPECT_EQ(p, m);
  EXPECT_EQ(p.imag(), 0.0);
  EXPECT_EQ(ExpansionConstants::a_minus, std::conj(ExpansionConstants::a_plus));
}

TEST(Remainder, OrdersOfVanishing) {
  const auto lambdas = geomspace(1e-3, 1e-1, 12);
  std::vector<double> e0, e1, e2;
  for (double l : lambdas) {
    e0.push_back(std::abs(remainder(0, l, 1.0, Branch::plus).value -
                          expansion_term(ExpansionTerm::G0, 1.0)));
    e1.push_back(std::abs(remainder(1, l, 1.0, Branch::plus).value));
    e2.push_back(std::abs(remainder(2, l, 1.0, Branch::plus).value));
  }
  EXPECT_NEAR(loglog_slope(lambdas, e0), 1.0, 0.1);
  EXPECT_NEAR(loglog_slope(lambdas, e1), 1.0, 0.1);
  EXPECT_NEAR(loglog_slope(lambdas, e2), 3.0, 0.1);
}

TEST(Remainder, AgreesWithLongDoubleTaylorOracle) {
  for (double z : {1e-6, 1e-3, 0.1, 0.49, 0.51, 2.0}) {
    const double l = z;  // r = 1
    const auto k1 = phi_taylor(z, 3);
    const auto k2 = phi_taylor(z, 5);
    const cplx e1 = remainder(1, l, 1.0, Branch::plus).value;
    const cplx e2 = remainder(2, l, 1.0, Branch::plus).value;
    EXPECT_LT(rel(e1, cplx(k1) / l), 1e-12) << z;
    EXPECT_LT(rel(e2, cplx(k2) / l), 1e-10) << z;
  }
}

TEST(Remainder, FirstOrderCoefficient) {
  const double l = 1e-4, r = 2.0;
  const cplx e1 = remainder(1, l, r, Branch::plus).value;
  EXPECT_LT(rel(e1 * l / ((l * r) * (l * r)), ExpansionConstants::a1_plus), 1e-3);
}

TEST(Remainder, ZerothOrderTendsToG0) {
  double prev = 1e300;
  for (double l : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double gap =
        std::abs(remainder(0, l, 1.0, Branch::plus).value - expansion_term(ExpansionTerm::G0, 1));
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(Remainder, CrossoverContinuity) {
  const double z = series_crossover;
  for (int j = 0; j <= 2; ++j) {
    const KernelValue below = remainder(j, z * (1 - 1e-13), 1.0, Branch::plus);
    const KernelValue above = remainder(j, z * (1 + 1e-13), 1.0, Branch::plus);
    EXPECT_LT(rel(below.value, above.value), 1e-10) << j;
    EXPECT_LT(rel(below.d1, above.d1), 1e-10) << j;
    EXPECT_LT(rel(below.d2, above.d2), 1e-10) << j;
  }
  EXPECT_THROW(remainder(3, 1.0, 1.0, Branch::plus), DomainError);
}

TEST(KFamily, SmallArgumentLimit) {
  const KFamily k = k_family(1e-3);
  EXPECT_LT(rel(k.k / 1e-6, ExpansionConstants::a1_plus), 1e-3);
  EXPECT_LT(rel(k.k, cplx(phi_taylor(1e-3L, 3))), 1e-13);
  EXPECT_EQ(k_family(0.0).k, cplx(0.0));
}

TEST(KFamily, DerivativeRelations) {
  // K1 = z K', K2 = z K1'.
  for (double z : {0.05, 0.3, 0.7, 3.0, 25.0}) {
    const double h = 1e-6 * z;
    const KFamily k = k_family(z);
    const cplx k1 = z * (k_family(z + h).k - k_family(z - h).k) / (2 * h);
    const cplx k2 = z * (k_family(z + h).k1 - k_family(z - h).k1) / (2 * h);
    EXPECT_LT(rel(k.k1, k1), 1e-6) << z;
    EXPECT_LT(rel(k.k2, k2), 1e-6) << z;
  }
}

TEST(KFamily, QuadraticAndLinearBounds) {
  double c2 = 0, c1 = 0;
  for (double z : geomspace(1e-4, 100.0, 200)) {
    const KFamily k = k_family(z);
    for (cplx v : {k.k, k.k1, k.k2}) {
      c2 = std::max(c2, std::abs(v) / (z * z));
      c1 = std::max(c1, std::abs(v) / z);
    }
  }
  EXPECT_LT(c2, 1.0);
  EXPECT_LT(c1, 1.0);
}

TEST(FreeKernel, OriginValue) {
  const cplx expected = std::tgamma(0.75) * std::polar(1.0, -3 * pi / 8) / (8 * pi * pi);
  EXPECT_LT(rel(free_kernel_at_origin(), expected), 1e-15);
  EXPECT_LT(rel(free_kernel_profile_direct(0.0).first, expected), 1e-12);
  EXPECT_LT(rel(free_kernel_profile(0.0), expected), 1e-12);
}

TEST(FreeKernel, MatchesPowerSeries) {
  for (double r : {0.1, 0.5, 1.0, 1.7, 2.5, 3.3}) {
    const cplx s = profile_series(r);
    EXPECT_LT(std::abs(free_kernel_profile_direct(r).first - s), 1e-11) << r;
    EXPECT_LT(std::abs(free_kernel_profile(r) - s), 1e-8) << r;
  }
}

TEST(FreeKernel, DerivativeAndCacheConsistency) {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> ur(0.0, 30.0);
  for (int i = 0; i < 60; ++i) {
    const double r = ur(gen);
    const double h = 1e-5;
    const auto [v, d] = free_kernel_profile_direct(r);
    const cplx fd =
        (free_kernel_profile_direct(r + h).first - free_kernel_profile_direct(r - h).first) /
        (2 * h);
    EXPECT_LT(std::abs(fd - d), 1e-7) << r;
    EXPECT_LT(std::abs(free_kernel_profile(r) - v), 1e-8) << r;
  }
}

TEST(FreeKernel, QuadraticNearOrigin) {
  double c = 0;
  for (double r : geomspace(1e-3, 1.0, 40))
    c = std::max(c, std::abs(free_kernel_profile(r) - free_kernel_at_origin()) / (r * r));
  EXPECT_LT(c, 0.05);
  EXPECT_GT(c, 0.0);
}

TEST(FreeKernel, DispersiveBound) {
  double lo = 1e300, hi = 0;
  for (double t : geomspace(1.0, 100.0, 9)) {
    double sup = 0;
    for (double r : geomspace(1e-2, 50.0, 300))
      sup = std::max(sup, std::abs(free_propagator_kernel(t, r)));
    sup = std::max(sup, std::abs(free_propagator_kernel(t, 0.0)));
    lo = std::min(lo, sup * std::pow(t, 0.75));
    hi = std::max(hi, sup * std::pow(t, 0.75));
  }
  EXPECT_LT(hi / lo, 1.0 + 1e-9);
  EXPECT_THROW(free_propagator_kernel(0.0, 1.0), DomainError);
}
