#include "quartic/oscillatory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quartic/quadrature.hpp"

namespace quartic {
namespace {

// Panel phase above which moments are taken along steepest-descent contours.
constexpr double contour_phase = 50.0;
// Contours are truncated where e^{-s} is below double precision relevance.
constexpr double contour_length = 45.0;
constexpr int contour_order = 16;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

// ---------------------------------------------------------------------------------------
// Cutoff

Cutoff::Cutoff(double lambda0, int profile) : lambda0_(lambda0), profile_(profile) {
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0))
    throw DomainError("cutoff scale lambda0 must be positive and finite");
  if (profile < 2) throw DomainError("cutoff profile must be at least 2 (C^2 smoothstep)");
  // S_n(u) = sum_k (-1)^k C(n+k, k) C(2n+1, n-k) u^{n+k+1}
  const int n = profile;
  coeffs_.assign(2 * n + 2, 0.0);
  for (int k = 0; k <= n; ++k)
    coeffs_[n + k + 1] = ((k % 2) ? -1.0 : 1.0) * binomial(n + k, k) * binomial(2 * n + 1, n - k);
}

double Cutoff::chi(double lambda) const { return 1.0 - chi_tilde_derivatives(lambda)[0]; }

std::array<double, 3> Cutoff::chi_tilde_derivatives(double lambda) const {
  const double u = (lambda - lambda0_) / lambda0_;
  if (u <= 0.0) return {0.0, 0.0, 0.0};
  if (u >= 1.0) return {1.0, 0.0, 0.0};
  double s = 0, s1 = 0, s2 = 0;
  for (std::size_t k = coeffs_.size(); k-- > 0;) {
    s2 = s2 * u + 2.0 * s1;
    s1 = s1 * u + s;
    s = s * u + coeffs_[k];
  }
  return {s, s1 / lambda0_, s2 / (lambda0_ * lambda0_)};
}

// ---------------------------------------------------------------------------------------
// FilonRule

FilonRule::FilonRule(std::vector<double> breakpoints, int order)
    : breaks_(std::move(breakpoints)), order_(order) {
  if (breaks_.size() < 2) throw DomainError("Filon rule needs at least one panel");
  if (order < 4) throw DomainError("Filon rule order must be at least 4");
  if (breaks_.front() < 0.0) throw DomainError("Filon panels must lie in [0, inf)");
  for (std::size_t i = 1; i < breaks_.size(); ++i)
    if (!(breaks_[i] > breaks_[i - 1])) throw DomainError("Filon breakpoints must increase");

  const Rule1D& ref = cached_gauss_legendre(order);
  ref_nodes_ = ref.nodes;
  ref_weights_ = ref.weights;
  // Unscaled barycentric weights so that l_j(z) = l(z) w_j / (z - x_j) holds exactly;
  // this first form stays accurate off the interval, where the moments need it.
  bary_.assign(order, 1.0);
  for (int j = 0; j < order; ++j)
    for (int k = 0; k < order; ++k)
      if (k != j) bary_[j] /= (ref_nodes_[j] - ref_nodes_[k]);

  legendre_.resize(order, order);
  for (int j = 0; j < order; ++j) {
    double p0 = 1.0, p1 = 0.0;
    const double x = ref_nodes_[j];
    for (int n = 0; n < order; ++n) {
      legendre_(n, j) = (2.0 * n + 1.0) / 2.0 * ref_weights_[j] * p0;
      const double p2 = ((2.0 * n + 1.0) * x * p0 - n * p1) / (n + 1.0);
      p1 = p0;
      p0 = p2;
    }
  }

  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
    const double mid = 0.5 * (breaks_[p] + breaks_[p + 1]);
    const double half = 0.5 * (breaks_[p + 1] - breaks_[p]);
    for (double x : ref_nodes_) nodes_.push_back(mid + half * x);
  }
}

void FilonRule::panel_weights(double t, double a, double b, cplx* out) const {
  const int p = order_;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::vector<cplx> basis(p);

  // Lagrange basis at a complex point given in panel coordinates.
  auto lagrange = [&](cplx z) {
    cplx ell = 1.0;
    for (int j = 0; j < p; ++j) {
      const cplx d = z - ref_nodes_[j];
      if (d == 0.0) {
        std::fill(basis.begin(), basis.end(), cplx{});
        basis[j] = 1.0;
        return;
      }
      ell *= d;
    }
    for (int j = 0; j < p; ++j) basis[j] = ell * bary_[j] / (z - ref_nodes_[j]);
  };
  auto accumulate = [&](cplx lambda, cplx weight) {
    lagrange((lambda - mid) / half);
    for (int j = 0; j < p; ++j) out[j] += weight * basis[j];
  };

  std::fill(out, out + p, cplx{});
  const double phase = t * (std::pow(b, 4) - std::pow(a, 4));
  if (phase <= contour_phase) {
    const int m = 26 + static_cast<int>(std::ceil(0.7 * phase));
    const Rule1D& rule = cached_gauss_legendre(m);
    for (int q = 0; q < m; ++q) {
      const double lambda = mid + half * rule.nodes[q];
      accumulate(lambda, std::polar(half * rule.weights[q], -t * std::pow(lambda, 4)));
    }
    return;
  }

  // int_a^b = J(a) - J(b), J(c) the integral from c to infinity along the steepest-descent
  // path c^4 - i s / t = lambda^4 on which e^{-i t lambda^4} = e^{-i t c^4} e^{-s}.
  const Rule1D& panel = cached_gauss_legendre(contour_order);
  auto endpoint = [&](double c, double sign) {
    if (c == 0.0) {
      // Ray lambda = e^{-i pi/8} u t^{-1/4}, e^{-i t lambda^4} = e^{-u^4}.
      const cplx dir = std::polar(std::pow(t, -0.25), -pi / 8.0);
      const double umax = 2.7;
      const int pieces = 3;
      for (int k = 0; k < pieces; ++k) {
        for (std::size_t q = 0; q < panel.size(); ++q) {
          const double u = umax / pieces * (k + 0.5 * (panel.nodes[q] + 1.0));
          const double w = umax / pieces * 0.5 * panel.weights[q];
          accumulate(dir * u, sign * w * std::exp(-std::pow(u, 4)) * dir);
        }
      }
      return;
    }
    const double tau = t * std::pow(c, 4);
    const cplx phase0 = std::polar(1.0, -tau);
    // Branch point at s = -i tau: grade the s-panels geometrically away from 0.
    double lo = 0.0, width = std::min(tau, 1.0) / 4.0;
    while (lo < contour_length) {
      const double hi = std::min(lo + width, contour_length);
      for (std::size_t q = 0; q < panel.size(); ++q) {
        const double s = lo + (hi - lo) * 0.5 * (panel.nodes[q] + 1.0);
        const double w = (hi - lo) * 0.5 * panel.weights[q];
        const cplx lambda = c * std::pow(cplx(1.0, -s / tau), 0.25);
        const cplx dlambda = cplx(0.0, -1.0 / t) / (4.0 * lambda * lambda * lambda);
        accumulate(lambda, sign * w * std::exp(-s) * phase0 * dlambda);
      }
      lo = hi;
      width = std::max(width, lo);
    }
  };
  endpoint(a, 1.0);
  endpoint(b, -1.0);
}

ComplexVector FilonRule::weights(double t) const {
  if (!(t > 0.0)) throw DomainError("oscillatory weights require t > 0");
  ComplexVector w(static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p)
    panel_weights(t, breaks_[p], breaks_[p + 1], w.data() + p * order_);
  return w;
}

ComplexVector FilonRule::static_weights() const {
  ComplexVector w(static_cast<Eigen::Index>(nodes_.size()));
  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p)
    for (int j = 0; j < order_; ++j)
      w(p * order_ + j) = 0.5 * (breaks_[p + 1] - breaks_[p]) * ref_weights_[j];
  return w;
}

std::vector<double> FilonRule::panel_errors(const ComplexVector& g) const {
  if (static_cast<std::size_t>(g.size()) != nodes_.size())
    throw ContractError("sample vector does not match the Filon nodes");
  std::vector<double> err(breaks_.size() - 1);
  for (std::size_t p = 0; p + 1 < breaks_.size(); ++p) {
    const ComplexVector c = legendre_.cast<cplx>() * g.segment(p * order_, order_);
    const double tail = std::abs(c(order_ - 1)) + std::abs(c(order_ - 2));
    err[p] = (breaks_[p + 1] - breaks_[p]) * tail;
  }
  return err;
}

double FilonRule::error_estimate(const ComplexVector& g) const {
  double err = 0.0;
  for (double e : panel_errors(g)) err += e;
  return err;
}

double FilonRule::roundoff(const ComplexVector& w, const ComplexVector& g) {
  return 8.0 * std::numeric_limits<double>::epsilon() * (w.cwiseAbs().dot(g.cwiseAbs()));
}

QuadratureValue FilonRule::integrate(double t, const ComplexVector& g) const {
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (!finite(g(k))) throw DomainError("integrand is not finite at a quadrature node");
  const ComplexVector w = weights(t);
  return {(w.transpose() * g)(0), error_estimate(g) + roundoff(w, g)};
}

FilonRule low_energy_rule(const Cutoff& cutoff, int levels, int order) {
  const double l0 = cutoff.lambda0();
  std::vector<double> br{0.0};
  for (int k = levels; k >= 1; --k) br.push_back(l0 * std::ldexp(1.0, -k));
  for (double f : {1.0, 1.5, 2.0}) br.push_back(f * l0);
  return FilonRule(std::move(br), order);
}

FilonRule high_energy_rule(const Cutoff& cutoff, double lambda_max, double panel_width,
                           int order) {
  const double l0 = cutoff.lambda0();
  if (!(lambda_max > 2.0 * l0)) throw DomainError("lambda_max must exceed 2*lambda0");
  if (!(panel_width > 0.0)) throw DomainError("panel width must be positive");
  // h carries up to a lambda^-7 singularity at the origin; keep panels short relative to
  // their distance from it.
  std::vector<double> br;
  for (double f : {1.0, 1.1, 1.25, 1.5, 1.75, 2.0}) br.push_back(f * l0);
  double a = 2.0 * l0;
  while (a < lambda_max) {
    double b = std::min({a + panel_width, 1.25 * a, lambda_max});
    if (lambda_max - b < 1e-3 * panel_width) b = lambda_max;
    br.push_back(b);
    a = b;
  }
  return FilonRule(std::move(br), order);
}

// ---------------------------------------------------------------------------------------
// Stone integrals

cplx ibp_integrand(double lambda, const KernelValue& F, const Cutoff& cutoff) {
  const auto [c0, c1, c2] = cutoff.chi_tilde_derivatives(lambda);
  const cplx g1 = c1 * F.value + c0 * F.d1;
  const cplx g2 = c2 * F.value + 2.0 * c1 * F.d1 + c0 * F.d2;
  const double l3 = lambda * lambda * lambda;
  return g2 / l3 - 3.0 * g1 / (l3 * lambda);
}

double envelope_constant(const std::vector<double>& lambdas, const std::vector<KernelValue>& F,
                         const Cutoff& cutoff, double exponent) {
  const double start = 2.0 * cutoff.lambda0();
  double top = 0.0, bottom = 0.0, last = start;
  for (double l : lambdas) last = std::max(last, l);
  const double split = 0.5 * (start + last);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (lambdas[k] < start) continue;
    const double e =
        std::pow(lambdas[k], exponent) *
        std::max({std::abs(F[k].value), std::abs(F[k].d1), std::abs(F[k].d2)});
    if (!std::isfinite(e)) throw DomainError("integrand is not finite at a quadrature node");
    (lambdas[k] > split ? top : bottom) = std::max(lambdas[k] > split ? top : bottom, e);
  }
  if (top > 1.5 * bottom && top > 0.0)
    throw ContractError("sampled integrand violates the asserted lambda^-" +
                        std::to_string(exponent) + " envelope");
  // The tail beyond lambda_max is governed by the envelope on the upper half of the range.
  return top > 0.0 ? top : bottom;
}

QuadratureValue ibp_integrate(const FilonRule& rule, double t, const ComplexVector& h,
                              cplx boundary) {
  for (Eigen::Index k = 0; k < h.size(); ++k)
    if (!finite(h(k))) throw DomainError("integrand is not finite at a quadrature node");
  const ComplexVector w = rule.weights(t) - rule.static_weights();
  const double err = damped_panel_error(rule, rule.panel_errors(h), t);
  return {(w.transpose() * h)(0) + boundary, err + FilonRule::roundoff(w, h)};
}

double damped_panel_error(const FilonRule& rule, const std::vector<double>& panel_errors,
                          double t) {
  // |e^{-i t l^4} - 1| <= min(2, t l^4) damps the interpolation error near lambda0.
  double err = 0.0;
  for (std::size_t p = 0; p < panel_errors.size(); ++p)
    err += panel_errors[p] * std::min(2.0, t * std::pow(rule.breakpoints()[p + 1], 4));
  return err;
}

double ibp_tail_bound(double envelope, double lambda_max, double exponent, double t) {
  const double b = exponent;
  return envelope *
         (std::pow(lambda_max, -b - 2.0) / (b + 2.0) +
          3.0 * std::pow(lambda_max, -b - 3.0) / (b + 3.0)) /
         (16.0 * t * t);
}

QuadratureValue stone_low_energy(double t, const Sampler& F, const Cutoff& cutoff) {
  if (!(t > 0.0)) throw DomainError("Stone integral requires t > 0");
  const FilonRule rule = low_energy_rule(cutoff);
  ComplexVector g(static_cast<Eigen::Index>(rule.size()));
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double l = rule.nodes()[k];
    g(k) = l * l * l * cutoff.chi(l) * F(l).value;
  }
  return rule.integrate(t, g);
}

QuadratureValue stone_high_energy(double t, const Sampler& F, const Cutoff& cutoff,
                                  double lambda_max, double envelope_exponent) {
  if (!(t > 0.0)) throw DomainError("Stone integral requires t > 0");
  const FilonRule rule = high_energy_rule(cutoff, lambda_max);
  std::vector<KernelValue> samples(rule.size());
  ComplexVector h(static_cast<Eigen::Index>(rule.size()));
  for (std::size_t k = 0; k < rule.size(); ++k) {
    samples[k] = F(rule.nodes()[k]);
    h(k) = ibp_integrand(rule.nodes()[k], samples[k], cutoff);
  }
  const double envelope = envelope_constant(rule.nodes(), samples, cutoff, envelope_exponent);
  const KernelValue end = F(lambda_max);
  const auto chi_end = cutoff.chi_tilde_derivatives(lambda_max);
  const cplx boundary =
      (chi_end[1] * end.value + chi_end[0] * end.d1) / std::pow(lambda_max, 3);
  const QuadratureValue q = ibp_integrate(rule, t, h, boundary);
  const double pre = 1.0 / (16.0 * t * t);  // (1/(-4it))^2 = -1/(16 t^2)
  return {-pre * q.value,
          pre * q.error + ibp_tail_bound(envelope, lambda_max, envelope_exponent, t)};
}

// ---------------------------------------------------------------------------------------
// Decay fits

DecayFit fit_decay(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 8) throw FitError("decay fit needs at least 8 samples");
  double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
  for (const auto& [t, v] : samples) {
    if (!(t >= 1.0) || !std::isfinite(t)) throw FitError("decay fit requires t >= 1");
    if (!(v > 0.0) || !std::isfinite(v)) throw FitError("decay fit requires positive values");
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  if (tmax < 10.0 * tmin) throw FitError("decay fit samples must span a decade in t");

  const double n = static_cast<double>(samples.size());
  double mx = 0, my = 0;
  for (const auto& [t, v] : samples) {
    mx += std::log(t);
    my += std::log(v);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& [t, v] : samples) {
    sxx += (std::log(t) - mx) * (std::log(t) - mx);
    sxy += (std::log(t) - mx) * (std::log(v) - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0;
  for (const auto& [t, v] : samples) {
    const double r = std::log(v) - (intercept + slope * std::log(t));
    ssr += r * r;
  }
  DecayFit fit;
  fit.exponent = -slope;
  fit.intercept = intercept;
  fit.std_error = std::sqrt(ssr / (n - 2.0) / sxx);
  fit.t_window = {tmin, tmax};
  fit.n_points = static_cast<int>(samples.size());
  return fit;
}

std::vector<double> geometric_grid(double a, double b, int n) {
  if (n < 2 || !(a > 0.0) || !(b > a)) throw DomainError("geometric grid needs 0 < a < b, n >= 2");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a * std::pow(b / a, static_cast<double>(i) / (n - 1));
  out.back() = b;
  return out;
}

}  // namespace quartic
