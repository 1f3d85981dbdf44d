#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "quartic/kernels.hpp"
#include "quartic/types.hpp"

namespace quartic {

/// Smooth low-energy cutoff: chi = 1 on [0, lambda0], 0 beyond 2*lambda0, with a
/// polynomial smoothstep of the given order in between (order 2 is the quintic, C^2).
class Cutoff {
 public:
  explicit Cutoff(double lambda0 = 0.05, int profile = 2);

  double lambda0() const { return lambda0_; }
  int profile() const { return profile_; }

  double chi(double lambda) const;
  double chi_tilde(double lambda) const { return 1.0 - chi(lambda); }
  /// chi_tilde and its first two lambda-derivatives.
  std::array<double, 3> chi_tilde_derivatives(double lambda) const;

 private:
  double lambda0_;
  int profile_;
  std::vector<double> coeffs_;  // smoothstep S(u) = sum coeffs_[k] u^k
};

struct QuadratureValue {
  cplx value{};
  double error = 0.0;
};

/// Panel-wise Filon rule for integrals of e^{-i t lambda^4} g(lambda) over a fixed set of
/// panels. g is sampled at Gauss-Legendre nodes (independent of t); for each t the exact
/// moments of e^{-i t lambda^4} against the panel's Lagrange basis are computed, either by
/// fine Gauss-Legendre (small panel phase) or along steepest-descent contours.
class FilonRule {
 public:
  explicit FilonRule(std::vector<double> breakpoints, int order = 16);

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  int order() const { return order_; }
  std::size_t size() const { return nodes_.size(); }

  /// Moment weights w(t): integral ~= sum_k w_k(t) g(nodes_k).
  ComplexVector weights(double t) const;
  /// Plain Gauss-Legendre weights (the t = 0 moments).
  ComplexVector static_weights() const;
  /// Per-panel bound on sup |g - interpolant| times panel width (Legendre tail).
  std::vector<double> panel_errors(const ComplexVector& g) const;
  /// Polynomial-tail estimate of the interpolation error, independent of t.
  double error_estimate(const ComplexVector& g) const;
  /// Rounding floor for a weighted sum.
  static double roundoff(const ComplexVector& w, const ComplexVector& g);

  QuadratureValue integrate(double t, const ComplexVector& g) const;

 private:
  void panel_weights(double t, double a, double b, cplx* out) const;

  std::vector<double> breaks_;
  int order_;
  std::vector<double> ref_nodes_;     // on [-1, 1]
  std::vector<double> ref_weights_;
  std::vector<double> bary_;
  RealMatrix legendre_;               // samples -> Legendre coefficients
  std::vector<double> nodes_;
};

/// Panels on [0, 2*lambda0], geometrically refined towards 0.
FilonRule low_energy_rule(const Cutoff& cutoff, int levels = 24, int order = 16);
/// Panels on [lambda0, lambda_max] with at most `panel_width` per panel.
FilonRule high_energy_rule(const Cutoff& cutoff, double lambda_max, double panel_width = 1.0,
                           int order = 16);

using Sampler = std::function<KernelValue(double)>;

/// Integrand d/dl( d/dl(chi_tilde F) / l^3 ) of the twice integrated-by-parts tail.
cplx ibp_integrand(double lambda, const KernelValue& F, const Cutoff& cutoff);

/// Envelope constant C with max_k |d^k F| <= C lambda^{-exponent}, taken over the sampled
/// nodes in the upper half of [2*lambda0, lambda_max] (the part that governs the tail).
/// Throws ContractError when the scaled envelope grows towards the end of the range.
double envelope_constant(const std::vector<double>& lambdas, const std::vector<KernelValue>& F,
                         const Cutoff& cutoff, double exponent);

/// int_{lambda0}^{lambda_max} e^{-i t l^4} h dl for h = (G'/l^3)', given the exact value
/// `boundary` = G'(lambda_max)/lambda_max^3 of int h. Only (e^{-i t l^4} - 1) h is integrated
/// numerically, which avoids cancellation when t lambda0^4 is small.
QuadratureValue ibp_integrate(const FilonRule& rule, double t, const ComplexVector& h,
                              cplx boundary);

/// Sum of panel interpolation errors weighted by |e^{-i t l^4} - 1| <= min(2, t b^4).
double damped_panel_error(const FilonRule& rule, const std::vector<double>& panel_errors, double t);

/// Bound on the discarded part of the IBP integral beyond lambda_max, prefactor included.
double ibp_tail_bound(double envelope, double lambda_max, double exponent, double t);

/// int_0^inf e^{-i t l^4} l^3 chi(l) F(l) dl.
QuadratureValue stone_low_energy(double t, const Sampler& F, const Cutoff& cutoff);

/// int_0^inf e^{-i t l^4} l^3 chi_tilde(l) F(l) dl via two integrations by parts, truncated at
/// lambda_max. `envelope_exponent` is the asserted decay of F and its derivatives.
QuadratureValue stone_high_energy(double t, const Sampler& F, const Cutoff& cutoff,
                                  double lambda_max = 40.0, double envelope_exponent = 2.0);

/// value ~ C t^{-exponent} fit on log-log axes.
struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;  // standard error of the exponent
  std::pair<double, double> t_window{};
  int n_points = 0;
};

DecayFit fit_decay(const std::vector<std::pair<double, double>>& samples);

/// Geometrically spaced values from a to b inclusive.
std::vector<double> geometric_grid(double a, double b, int n);

}  // namespace quartic
