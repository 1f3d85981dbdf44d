#include "quartic/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quartic/parallel.hpp"

namespace quartic {
namespace {

using Index = Eigen::Index;

// Columns vt_i k(|y - n_i|) for each y, with optional derivatives.
ResolventBlock node_columns(const ThresholdData& td, const std::vector<Point>& ys,
                            bool derivatives, auto&& kernel) {
  const auto n = static_cast<Index>(td.size());
  const auto m = static_cast<Index>(ys.size());
  ResolventBlock b{ComplexMatrix(n, m), ComplexMatrix(), ComplexMatrix()};
  if (derivatives) {
    b.d1.resize(n, m);
    b.d2.resize(n, m);
  }
  for (Index q = 0; q < m; ++q)
    for (Index i = 0; i < n; ++i) {
      const KernelValue k = kernel((ys[q] - td.nodes[i]).norm());
      b.value(i, q) = td.vt(i) * k.value;
      if (derivatives) {
        b.d1(i, q) = td.vt(i) * k.d1;
        b.d2(i, q) = td.vt(i) * k.d2;
      }
    }
  return b;
}

ResolventBlock point_block(const std::vector<Point>& xs, const std::vector<Point>& ys,
                           bool derivatives, auto&& kernel) {
  const auto nx = static_cast<Index>(xs.size()), ny = static_cast<Index>(ys.size());
  ResolventBlock b{ComplexMatrix(nx, ny), ComplexMatrix(), ComplexMatrix()};
  if (derivatives) {
    b.d1.resize(nx, ny);
    b.d2.resize(nx, ny);
  }
  for (Index p = 0; p < nx; ++p)
    for (Index q = 0; q < ny; ++q) {
      const KernelValue k = kernel((xs[p] - ys[q]).norm());
      b.value(p, q) = k.value;
      if (derivatives) {
        b.d1(p, q) = k.d1;
        b.d2(p, q) = k.d2;
      }
    }
  return b;
}

// Normwise backward error of a solve A X = B.
double backward_error(const ComplexMatrix& A, const ComplexMatrix& X, const ComplexMatrix& B) {
  const double scale = A.norm() * X.norm() + B.norm();
  const double r = (A * X - B).norm();
  return std::isfinite(r) ? r / std::max(scale, 1e-300) : std::numeric_limits<double>::infinity();
}

ResolventBlock direct_block(const ThresholdData& td, double lambda, Branch branch,
                            const std::vector<Point>& xs, const std::vector<Point>& ys,
                            bool derivatives) {
  auto free = [&](double r) { return quartic_resolvent(lambda, r, branch); };
  ResolventBlock out = point_block(xs, ys, derivatives, free);
  const MSeries M = derivatives ? assemble_M_series(td, lambda, branch)
                                : MSeries{assemble_M(td, lambda, branch), {}, {}};
  const ResolventBlock A = node_columns(td, xs, derivatives, free);
  const ResolventBlock B = &xs == &ys ? A : node_columns(td, ys, derivatives, free);
  const Eigen::PartialPivLU<ComplexMatrix> lu(M.value);
  const ComplexMatrix Y0 = lu.solve(B.value);
  if (!(backward_error(M.value, Y0, B.value) <= 1e-10))
    throw NearSingularError("resolvent identity solve failed at lambda = " +
                                std::to_string(lambda),
                            lambda);
  out.value -= A.value.transpose() * Y0;
  if (derivatives) {
    // Differentiating M Y = B: Y' = M^{-1}(B' - M'Y), Y'' = M^{-1}(B'' - M''Y - 2M'Y').
    const ComplexMatrix Y1 = lu.solve(B.d1 - M.d1 * Y0);
    const ComplexMatrix Y2 = lu.solve(B.d2 - M.d2 * Y0 - 2.0 * M.d1 * Y1);
    out.d1 -= A.d1.transpose() * Y0 + A.value.transpose() * Y1;
    out.d2 -= A.d2.transpose() * Y0 + 2.0 * A.d1.transpose() * Y1 + A.value.transpose() * Y2;
  }
  return out;
}

}  // namespace

ResolventBlock perturbed_resolvent_block(const ThresholdData* td, double lambda, Branch branch,
                                         const std::vector<Point>& xs,
                                         const std::vector<Point>& ys, bool derivatives) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("wavenumber must be positive and finite");
  if (td == nullptr || td->size() == 0)
    return point_block(xs, ys, derivatives,
                       [&](double r) { return quartic_resolvent(lambda, r, branch); });
  if (derivatives) return direct_block(*td, lambda, branch, xs, ys, true);

  // Split form: M = M1 + (a/lambda) v v' with M1 = U + v E v, E = R - a/lambda.
  auto rem = [&](double r) { return remainder(0, lambda, r, branch); };
  const auto n = static_cast<Index>(td->size());
  ComplexMatrix M1(n, n);
  for (Index i = 0; i < n; ++i) {
    M1(i, i) = td->U(i) + td->vt(i) * td->vt(i) * rem(0.0).value;
    for (Index j = 0; j < i; ++j)
      M1(i, j) = M1(j, i) =
          td->vt(i) * td->vt(j) * rem((td->nodes[i] - td->nodes[j]).norm()).value;
  }
  const ResolventBlock EX = node_columns(*td, xs, false, rem);
  const ResolventBlock EY = &xs == &ys ? EX : node_columns(*td, ys, false, rem);
  ComplexMatrix rhs(n, EY.value.cols() + 1);
  rhs << td->vt.cast<cplx>(), EY.value;
  const Eigen::PartialPivLU<ComplexMatrix> lu(M1);
  const ComplexMatrix sol = lu.solve(rhs);
  if (!(backward_error(M1, sol, rhs) <= 1e-10))
    return direct_block(*td, lambda, branch, xs, ys, false);
  const ComplexVector u = sol.col(0);
  const cplx s = (td->vt.cast<cplx>().transpose() * u)(0);
  const ComplexVector px = ComplexVector::Ones(EX.value.cols()) - EX.value.transpose() * u;
  const ComplexVector py = ComplexVector::Ones(EY.value.cols()) - EY.value.transpose() * u;
  const cplx denom = lambda / ExpansionConstants::a(branch) + s;
  ResolventBlock out = point_block(xs, ys, false, rem);
  out.value -= EX.value.transpose() * sol.rightCols(EY.value.cols());
  out.value += px * py.transpose() / denom;
  return out;
}

cplx perturbed_resolvent(const ThresholdData* td, double lambda, Branch branch, const Point& x,
                         const Point& y) {
  return perturbed_resolvent_block(td, lambda, branch, {x}, {y}).value(0, 0);
}

ResolventSample spectral_density(const ThresholdData* td, double lambda, const Point& x,
                                 const Point& y) {
  ResolventSample s;
  s.lambda = lambda;
  s.x = x;
  s.y = y;
  s.RV_plus = perturbed_resolvent(td, lambda, Branch::plus, x, y);
  s.density = 2.0 * I * s.RV_plus.imag();
  return s;
}

std::vector<Point> standard_test_points(double R) {
  if (!(R > 0.0)) throw DomainError("test set radius must be positive");
  // Fibonacci-sphere directions, rotated per shell so the shells do not line up.
  std::vector<Point> out;
  const double golden = pi * (3.0 - std::sqrt(5.0));
  const double radii[3][2] = {{0.3, 0.8}, {1.8, 2.2}, {4.6, 5.4}};
  for (int shell = 0; shell < 3; ++shell)
    for (int k = 0; k < 8; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / 8.0;
      const double rho = std::sqrt(1.0 - z * z);
      const double phi = golden * k + 0.7 * shell;
      const double r = R * (radii[shell][0] + (radii[shell][1] - radii[shell][0]) * k / 7.0);
      out.emplace_back(r * rho * std::cos(phi), r * rho * std::sin(phi), r * z);
    }
  return out;
}

Evolution::Evolution(const ThresholdData* td, std::vector<Point> points, EvolutionOptions options)
    : td_(td),
      points_(std::move(points)),
      options_(options),
      low_rule_(low_energy_rule(options.cutoff, options.low_levels, options.order)),
      high_rule_(high_energy_rule(options.cutoff, options.lambda_max, options.panel_width,
                                  options.order)) {
  if (points_.empty()) throw DomainError("evolution needs at least one point");
  const Cutoff& cut = options_.cutoff;
  const auto np = static_cast<Index>(points_.size());
  const Index pairs = np * np;
  auto density = [&](double l, bool derivatives) {
    ResolventBlock b = perturbed_resolvent_block(td_, l, Branch::plus, points_, points_, derivatives);
    auto im2 = [](const ComplexMatrix& m) -> ComplexMatrix {
      return (2.0 * I) * m.imag().cast<cplx>();
    };
    b.value = im2(b.value);
    if (derivatives) {
      b.d1 = im2(b.d1);
      b.d2 = im2(b.d2);
    }
    return b;
  };

  const auto nl = static_cast<Index>(low_rule_.size());
  low_g_.resize(nl, pairs);
  parallel_for(low_rule_.size(), [&](std::size_t k) {
    const double l = low_rule_.nodes()[k];
    const ResolventBlock b = density(l, false);
    const double w = l * l * l * cut.chi(l);
    for (Index p = 0; p < pairs; ++p)
      low_g_(static_cast<Index>(k), p) = w * b.value(p / np, p % np);
  });

  const auto nh = static_cast<Index>(high_rule_.size());
  high_h_.resize(nh, pairs);
  std::vector<ResolventBlock> high_samples(high_rule_.size());
  parallel_for(high_rule_.size(), [&](std::size_t k) {
    const double l = high_rule_.nodes()[k];
    high_samples[k] = density(l, true);
    for (Index p = 0; p < pairs; ++p) {
      const KernelValue F{high_samples[k].value(p / np, p % np), high_samples[k].d1(p / np, p % np),
                          high_samples[k].d2(p / np, p % np)};
      high_h_(static_cast<Index>(k), p) = ibp_integrand(l, F, cut);
    }
  });

  const double lmax = options_.lambda_max;
  const ResolventBlock end = density(lmax, true);
  const auto chi_end = cut.chi_tilde_derivatives(lmax);
  boundary_.resize(pairs);
  low_error_.resize(pairs);
  envelope_.resize(pairs);
  high_panel_error_.resize(static_cast<std::size_t>(pairs));
  parallel_for(static_cast<std::size_t>(pairs), [&](std::size_t pp) {
    const auto p = static_cast<Index>(pp);
    const Index i = p / np, j = p % np;
    boundary_(p) = (chi_end[1] * end.value(i, j) + chi_end[0] * end.d1(i, j)) / std::pow(lmax, 3);
    low_error_(p) = low_rule_.error_estimate(low_g_.col(p));
    high_panel_error_[pp] = high_rule_.panel_errors(high_h_.col(p));
    std::vector<KernelValue> F(high_samples.size());
    for (std::size_t k = 0; k < F.size(); ++k)
      F[k] = {high_samples[k].value(i, j), high_samples[k].d1(i, j), high_samples[k].d2(i, j)};
    envelope_(p) = envelope_constant(high_rule_.nodes(), F, cut, options_.envelope_exponent);
  });
}

PropagatorKernel Evolution::kernel(double t) const {
  if (!(t != 0.0) || !std::isfinite(t)) throw DomainError("evolution time must be finite and nonzero");
  if (t < 0.0) {
    PropagatorKernel k = kernel(-t);
    k.t = t;
    k.values = k.values.conjugate().eval();
    k.low_part = k.low_part.conjugate().eval();
    k.high_part = k.high_part.conjugate().eval();
    return k;
  }
  const auto np = static_cast<Index>(points_.size());
  const Index pairs = np * np;
  const ComplexVector wl = low_rule_.weights(t);
  const ComplexVector wh = high_rule_.weights(t) - high_rule_.static_weights();
  const ComplexVector low = (wl.transpose() * low_g_).transpose();
  const ComplexVector high = (wh.transpose() * high_h_).transpose() + boundary_;
  const cplx pref = 2.0 / (pi * I);
  const double ibp = 1.0 / (16.0 * t * t);

  PropagatorKernel out;
  out.t = t;
  out.points = points_;
  out.values.resize(np, np);
  out.low_part.resize(np, np);
  out.high_part.resize(np, np);
  out.errors.resize(np, np);
  for (Index p = 0; p < pairs; ++p) {
    const Index i = p / np, j = p % np;
    const double err_low = low_error_(p) + FilonRule::roundoff(wl, low_g_.col(p));
    const double err_high =
        ibp * (damped_panel_error(high_rule_, high_panel_error_[static_cast<std::size_t>(p)], t) +
               FilonRule::roundoff(wh, high_h_.col(p))) +
        ibp_tail_bound(envelope_(p), options_.lambda_max, options_.envelope_exponent, t);
    out.low_part(i, j) = pref * low(p);
    out.high_part(i, j) = -pref * ibp * high(p);
    out.values(i, j) = out.low_part(i, j) + out.high_part(i, j);
    out.errors(i, j) = (2.0 / pi) * (err_low + err_high);
  }
  out.error_estimate = out.errors.maxCoeff();
  return out;
}

PropagatorKernel evolve_kernel(const ThresholdData* td, double t, const std::vector<Point>& points,
                               const Cutoff& cutoff, double lambda_max) {
  EvolutionOptions options;
  options.cutoff = cutoff;
  options.lambda_max = lambda_max;
  return Evolution(td, points, options).kernel(t);
}

double weighted_sup(const PropagatorKernel& kernel, double sigma, const ComplexMatrix& subtract) {
  if (!(sigma >= 0.0)) throw DomainError("weight exponent must be nonnegative");
  const auto np = static_cast<Index>(kernel.points.size());
  if (subtract.size() != 0 && (subtract.rows() != np || subtract.cols() != np))
    throw DomainError("subtracted kernel has the wrong shape");
  double best = 0.0;
  for (Index i = 0; i < np; ++i)
    for (Index j = 0; j < np; ++j) {
      const cplx v = kernel.values(i, j) - (subtract.size() ? subtract(i, j) : cplx{});
      const double w = std::pow(bracket(kernel.points[i]) * bracket(kernel.points[j]), sigma);
      best = std::max(best, std::abs(v) / w);
    }
  return best;
}

std::string to_string(Subtraction s) {
  switch (s) {
    case Subtraction::none: return "none";
    case Subtraction::resonant: return "F_t";
    case Subtraction::free_origin: return "free_origin";
  }
  return "unknown";
}

std::vector<DecayReport> decay_reports(const Evolution& evolution,
                                       const std::vector<double>& t_grid,
                                       const std::vector<double>& sigmas,
                                       const std::vector<Subtraction>& subtractions) {
  const ThresholdData* td = evolution.threshold();
  const bool resonant = std::find(subtractions.begin(), subtractions.end(),
                                  Subtraction::resonant) != subtractions.end();
  if (resonant && (td == nullptr || td->classification != Classification::FirstKind))
    throw DomainError("F_t subtraction needs a resonance of the first kind");
  const auto np = static_cast<Index>(evolution.points().size());
  const std::size_t ns = subtractions.size();
  std::vector<DecayReport> reports(ns);
  std::vector<std::vector<std::vector<std::pair<double, double>>>> samples(
      ns, std::vector<std::vector<std::pair<double, double>>>(sigmas.size()));
  ComplexMatrix pole;
  if (resonant) pole = pole_difference(*td, evolution.points(), evolution.points());
  for (double t : t_grid) {
    const PropagatorKernel k = evolution.kernel(t);
    for (std::size_t j = 0; j < ns; ++j) {
      ComplexMatrix sub;
      if (subtractions[j] == Subtraction::resonant)
        sub = (2.0 / (pi * I)) * resonant_time_factor(t, evolution.options().cutoff).value * pole;
      else if (subtractions[j] == Subtraction::free_origin)
        sub = ComplexMatrix::Constant(np, np, std::pow(t, -0.75) * free_kernel_at_origin());
      for (std::size_t s = 0; s < sigmas.size(); ++s) {
        DecayRow row;
        row.t = t;
        row.sigma = sigmas[s];
        row.subtraction = subtractions[j];
        row.weighted_sup = weighted_sup(k, sigmas[s], sub);
        row.error_estimate = k.error_estimate;
        reports[j].rows.push_back(row);
        if (t >= 1.0) samples[j][s].emplace_back(t, row.weighted_sup);
      }
    }
  }
  for (std::size_t j = 0; j < ns; ++j)
    for (std::size_t s = 0; s < sigmas.size(); ++s)
      reports[j].fits.emplace_back(sigmas[s], fit_decay(samples[j][s]));
  return reports;
}

DecayReport decay_report(const Evolution& evolution, const std::vector<double>& t_grid,
                         const std::vector<double>& sigmas, Subtraction subtraction) {
  return decay_reports(evolution, t_grid, sigmas, {subtraction}).front();
}

}  // namespace quartic
