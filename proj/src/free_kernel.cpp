#include <cmath>
#include <vector>

#include "quartic/kernels.hpp"
#include "quartic/quadrature.hpp"

namespace quartic {
namespace {

// sin(w)/w and its derivative for complex w.
cplx sinc(cplx w) {
  if (std::abs(w) < 1e-3) {
    const cplx w2 = w * w;
    return 1.0 - w2 / 6.0 + w2 * w2 / 120.0;
  }
  return std::sin(w) / w;
}

cplx sinc_prime(cplx w) {
  if (std::abs(w) < 1e-3) {
    const cplx w2 = w * w;
    return -w / 3.0 + w * w2 / 30.0;
  }
  return (w * std::cos(w) - std::sin(w)) / (w * w);
}

// Profile integrand rho^2 sinc(rho r) e^{-i rho^4} / (2 pi^2) and its r-derivative.
struct ProfileSum {
  cplx value{};
  cplx deriv{};
  void add(cplx rho, cplx drho, double r) {
    const cplx phase = std::exp(-I * (rho * rho * rho * rho)) * drho;
    const cplx rho2 = rho * rho;
    value += rho2 * sinc(rho * r) * phase;
    deriv += rho2 * rho * sinc_prime(rho * r) * phase;
  }
};

const Rule1D& panel_rule() {
  static const Rule1D rule = gauss_legendre(24, 0.0, 1.0);
  return rule;
}

constexpr double table_step = 1.0 / 32.0;
constexpr double table_max = 16.0;

struct ProfileTable {
  std::vector<cplx> value;
  std::vector<cplx> deriv;

  ProfileTable() {
    const int n = static_cast<int>(table_max / table_step) + 1;
    value.resize(n);
    deriv.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto [v, d] = free_kernel_profile_direct(i * table_step);
      value[i] = v;
      deriv[i] = d;
    }
  }
};

const ProfileTable& profile_table() {
  static const ProfileTable table;
  return table;
}

}  // namespace

std::pair<cplx, cplx> free_kernel_profile_direct(double r) {
  if (!(r >= 0.0)) throw DomainError("profile radius must be nonnegative");
  const Rule1D& rule = panel_rule();
  ProfileSum sum;
  // Real segment [0, B] followed by the ray B + s e^{-i pi/8}. Along the ray e^{-i rho^4}
  // decays faster than sin(rho r) can grow once 4 B^3 > r.
  const double b = std::cbrt(r / 2.0);
  if (b > 0.0) {
    const int panels = static_cast<int>(std::ceil((std::pow(b, 4) + b * r) / 2.0)) + 1;
    const double h = b / panels;
    for (int p = 0; p < panels; ++p) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        sum.add(cplx{h * (p + rule.nodes[q]), 0.0}, cplx{h * rule.weights[q], 0.0}, r);
      }
    }
  }
  const cplx dir = std::polar(1.0, -pi / 8.0);
  const double ray_length = 5.0;
  const int panels = static_cast<int>(std::ceil(ray_length * std::max(2.0, r) / 1.5));
  const double h = ray_length / panels;
  for (int p = 0; p < panels; ++p) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double s = h * (p + rule.nodes[q]);
      sum.add(b + s * dir, dir * (h * rule.weights[q]), r);
    }
  }
  const double scale = 1.0 / (2.0 * pi * pi);
  return {scale * sum.value, scale * sum.deriv};
}

cplx free_kernel_at_origin() {
  return std::tgamma(0.75) * std::polar(1.0, -3.0 * pi / 8.0) / (8.0 * pi * pi);
}

cplx free_kernel_profile(double r) {
  if (!(r >= 0.0)) throw DomainError("profile radius must be nonnegative");
  if (r >= table_max) return free_kernel_profile_direct(r).first;
  const ProfileTable& table = profile_table();
  const double u = r / table_step;
  const auto i = static_cast<std::size_t>(u);
  const double s = u - static_cast<double>(i);
  // Cubic Hermite on [r_i, r_{i+1}].
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * table.value[i] + h10 * table_step * table.deriv[i] + h01 * table.value[i + 1] +
         h11 * table_step * table.deriv[i + 1];
}

cplx free_propagator_kernel(double t, double r) {
  if (!(t > 0.0)) throw DomainError("free propagator requires t > 0");
  const double scale = std::pow(t, -0.25);
  return std::pow(t, -0.75) * free_kernel_profile(scale * r);
}

}  // namespace quartic
