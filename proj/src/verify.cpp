#include "quartic/verify.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "quartic/kernels.hpp"
#include "quartic/oscillatory.hpp"
#include "quartic/potential.hpp"
#include "quartic/propagator.hpp"
#include "quartic/quadrature.hpp"
#include "quartic/threshold.hpp"

namespace quartic {

namespace {

using EC = ExpansionConstants;

class Suite {
 public:
  Suite(std::string name, std::vector<InvariantResult>& out) : name_(std::move(name)), out_(out) {}

  void check(const std::string& name, double tol, const std::function<double()>& measure) {
    InvariantResult r;
    r.suite = name_;
    r.name = name;
    r.tolerance = tol;
    try {
      r.measured = measure();
      r.pass = r.measured <= tol;
    } catch (const std::exception& e) {
      r.measured = std::numeric_limits<double>::quiet_NaN();
      r.note = e.what();
    }
    out_.push_back(r);
  }

 private:
  std::string name_;
  std::vector<InvariantResult>& out_;
};

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

// (e^{iz} - e^{-z})/(8 pi z) with the first `first` Taylor terms dropped, in long double.
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
  double fact = 1;
  for (int k = 0; k < 40; ++k) {
    if (k > 0) fact *= (2.0 * k) * (2.0 * k + 1.0);
    const double g = std::tgamma((2.0 * k + 3.0) / 4.0) / 4.0;
    const cplx phase = std::polar(1.0, -pi * (2.0 * k + 3.0) / 8.0);
    sum += ((k % 2) ? -1.0 : 1.0) / fact * g * phase * std::pow(r, 2 * k);
  }
  return sum / (2.0 * pi * pi);
}

Sampler power(double alpha) {
  return [alpha](double l) {
    return KernelValue{std::pow(l, alpha), alpha * std::pow(l, alpha - 1),
                       alpha * (alpha - 1) * std::pow(l, alpha - 2)};
  };
}

double ratio_of_extremes(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
}

std::vector<Point> random_points(int n, double radius, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(gen), u(gen), u(gen));
  return pts;
}

void kernels_suite(std::vector<InvariantResult>& out) {
  Suite s("kernels", out);
  s.check("schrodinger resolvent closed form", 1e-15, [] {
    return rel(schrodinger_resolvent(1.0, 1.0, Branch::plus).value,
               std::polar(1.0, 1.0) / (4 * pi));
  });
  s.check("quartic resolvent = Schrodinger difference", 1e-13, [] {
    double worst = 0;
    for (double l : {1e-2, 0.3, 1.0, 7.0})
      for (double r : {0.05, 1.0, 4.0}) {
        const cplx oracle = (std::polar(1.0, l * r) - std::exp(-l * r)) / (8 * pi * l * l * r);
        worst = std::max(worst, rel(quartic_resolvent(l, r, Branch::plus).value, oracle));
      }
    return worst;
  });
  s.check("quartic resolvent conjugation", 1e-15, [] {
    double worst = 0;
    for (double l : {1e-3, 0.5, 3.0})
      for (double r : {0.0, 0.1, 2.0}) {
        const KernelValue p = quartic_resolvent(l, r, Branch::plus);
        const KernelValue m = quartic_resolvent(l, r, Branch::minus);
        worst = std::max({worst, rel(m.value, std::conj(p.value)), rel(m.d1, std::conj(p.d1))});
      }
    return worst;
  });
  s.check("quartic resolvent diagonal limit", 1e-6, [] {
    return rel(quartic_resolvent(0.7, 1e-9, Branch::plus).value, cplx(1, 1) / (8 * pi * 0.7));
  });
  s.check("quartic resolvent derivatives vs finite differences", 1e-6, [] {
    double worst = 0;
    for (double l : {0.05, 0.8, 5.0}) {
      const double h = 1e-5 * l, r = 0.9;
      const KernelValue k = quartic_resolvent(l, r, Branch::plus);
      const cplx fd1 = (quartic_resolvent(l + h, r, Branch::plus).value -
                        quartic_resolvent(l - h, r, Branch::plus).value) / (2 * h);
      const cplx fd2 = (quartic_resolvent(l + h, r, Branch::plus).d1 -
                        quartic_resolvent(l - h, r, Branch::plus).d1) / (2 * h);
      worst = std::max({worst, rel(fd1, k.d1), rel(fd2, k.d2)});
    }
    return worst;
  });
  const std::vector<double> lambdas = geometric_grid(1e-3, 1e-1, 12);
  for (int order : {0, 1, 2}) {
    const double expected = order == 2 ? 3.0 : 1.0;
    s.check("remainder E" + std::to_string(order) + " vanishing order", 0.1, [&, order] {
      std::vector<double> e;
      for (double l : lambdas) {
        cplx v = remainder(order, l, 1.0, Branch::plus).value;
        if (order == 0) v -= expansion_term(ExpansionTerm::G0, 1.0);
        e.push_back(std::abs(v));
      }
      return std::abs(loglog_slope(lambdas, e) - expected);
    });
  }
  s.check("remainder vs long-double Taylor oracle", 1e-10, [] {
    double worst = 0;
    for (double z : {1e-6, 1e-3, 0.1, 0.49, 0.51, 2.0}) {
      worst = std::max(worst, rel(remainder(1, z, 1.0, Branch::plus).value,
                                  cplx(phi_taylor(z, 3)) / z));
      worst = std::max(worst, rel(remainder(2, z, 1.0, Branch::plus).value,
                                  cplx(phi_taylor(z, 5)) / z));
    }
    return worst;
  });
  s.check("series/closed-form crossover continuity", 1e-10, [] {
    double worst = 0;
    const double z = series_crossover;
    for (int j = 0; j <= 2; ++j) {
      const KernelValue a = remainder(j, z * (1 - 1e-13), 1.0, Branch::plus);
      const KernelValue b = remainder(j, z * (1 + 1e-13), 1.0, Branch::plus);
      worst = std::max({worst, rel(a.value, b.value), rel(a.d1, b.d1), rel(a.d2, b.d2)});
    }
    return worst;
  });
  s.check("K(z)/z^2 -> a1+ at z = 1e-3", 1e-3,
          [] { return rel(k_family(1e-3).k / 1e-6, EC::a1_plus); });
  s.check("a+ a1+ = a- a1-", 0.0,
          [] { return std::abs(EC::a_plus * EC::a1_plus - EC::a_minus * EC::a1_minus); });
  s.check("free kernel at origin", 1e-12, [] {
    return rel(free_kernel_profile(0.0),
               std::tgamma(0.75) * std::polar(1.0, -3 * pi / 8) / (8 * pi * pi));
  });
  s.check("free kernel vs power series", 1e-8, [] {
    double worst = 0;
    for (double r : {0.1, 0.5, 1.0, 1.7, 2.5, 3.3})
      worst = std::max(worst, std::abs(free_kernel_profile(r) - profile_series(r)));
    return worst;
  });
  s.check("free kernel sup scales as t^-3/4", 1e-9, [] {
    double lo = 1e300, hi = 0;
    for (double t : geometric_grid(1.0, 100.0, 5)) {
      double sup = std::abs(free_propagator_kernel(t, 0.0));
      for (double r : geometric_grid(1e-2, 50.0, 200))
        sup = std::max(sup, std::abs(free_propagator_kernel(t, r)));
      lo = std::min(lo, sup * std::pow(t, 0.75));
      hi = std::max(hi, sup * std::pow(t, 0.75));
    }
    return hi / lo - 1.0;
  });
}

void oscillatory_suite(std::vector<InvariantResult>& out) {
  Suite s("oscillatory", out);
  s.check("cutoff partition of unity and support", 1e-15, [] {
    const Cutoff c(0.05);
    double worst = std::abs(c.chi(0.02) - 1.0) + std::abs(c.chi(0.11));
    for (double l : geometric_grid(1e-3, 1.0, 50))
      worst = std::max(worst, std::abs(c.chi(l) + c.chi_tilde(l) - 1.0));
    return worst;
  });
  s.check("cutoff C^2 matching at the transition ends", 1e-12, [] {
    const Cutoff c(0.05);
    double worst = 0;
    for (double l : {0.05, 0.1}) {
      const auto d = c.chi_tilde_derivatives(l);
      worst = std::max({worst, std::abs(d[1]) * l, std::abs(d[2]) * l * l});
    }
    return worst;
  });
  s.check("low-energy integral vs Gamma asymptote", 1e-3, [] {
    const Cutoff c(1.0);
    double worst = 0;
    for (double alpha : {0.5, 1.0, 2.0}) {
      const double t = 1e4, b = 4.0 + alpha;
      const cplx lead = 0.25 * std::tgamma(b / 4) * std::pow(t, -b / 4) * std::polar(1.0, -pi * b / 8);
      worst = std::max(worst, rel(stone_low_energy(t, power(alpha), c).value, lead));
    }
    return worst;
  });
  s.check("low-energy sweep, positive powers: t^{1+a/4}|I| bounded", 5.0, [] {
    const Cutoff c(1.0);
    double worst = 0;
    for (double alpha : {0.5, 1.0, 2.0, 3.0}) {
      std::vector<double> scaled;
      for (double t : geometric_grid(10.0, 1e4, 13))
        scaled.push_back(std::pow(t, 1 + alpha / 4) *
                         std::abs(stone_low_energy(t, power(alpha), c).value));
      worst = std::max(worst, ratio_of_extremes(scaled));
    }
    return worst;
  });
  s.check("low-energy sweep, negative powers: t^{1-a/4}|I| bounded", 5.0, [] {
    const Cutoff c(1.0);
    double worst = 0;
    for (double alpha : {0.5, 1.0, 2.0}) {
      std::vector<double> scaled;
      for (double t : geometric_grid(1.0, 1e4, 17))
        scaled.push_back(std::pow(t, 1 - alpha / 4) *
                         std::abs(stone_low_energy(t, power(-alpha), c).value));
      worst = std::max(worst, ratio_of_extremes(scaled));
    }
    return worst;
  });
  s.check("high-energy lambda^-2 within the 1/(16 t^2) bound (excess)", 0.0, [] {
    double excess = 0;
    for (double l0 : {0.05, 0.5, 1.0}) {
      const Cutoff c(l0);
      const FilonRule rule = high_energy_rule(c, 40.0);
      ComplexVector h(rule.size());
      for (std::size_t k = 0; k < rule.size(); ++k)
        h(k) = ibp_integrand(rule.nodes()[k], power(-2.0)(rule.nodes()[k]), c);
      const double bound = rule.static_weights().cwiseAbs().dot(h.cwiseAbs()) / 16.0;
      for (double t : geometric_grid(1.0, 100.0, 12)) {
        const QuadratureValue q = stone_high_energy(t, power(-2.0), c);
        excess = std::max(excess, t * t * std::abs(q.value) - bound - t * t * q.error);
      }
    }
    return excess;
  });
  s.check("high-energy integral vs brute-force quadrature", 1e-6, [] {
    const Cutoff c;
    const Sampler F = [](double l) {
      const double e = std::exp(-l) / (l * l);
      return KernelValue{e, e * (-1.0 - 2.0 / l), e * (1.0 + 4.0 / l + 6.0 / (l * l))};
    };
    const double t = 2.0;
    const Rule1D& g = cached_gauss_legendre(20);
    cplx ref = 0;
    for (double lo = c.lambda0(); lo < 30.0;) {
      const double wl = 2 * pi / (4 * t * lo * lo * lo);
      const double hi = std::min({30.0, lo + 0.02, lo + 0.25 * wl});
      for (std::size_t q = 0; q < g.size(); ++q) {
        const double l = lo + (hi - lo) * 0.5 * (g.nodes[q] + 1);
        ref += (hi - lo) * 0.5 * g.weights[q] * std::polar(1.0, -t * std::pow(l, 4)) * l * l * l *
               c.chi_tilde(l) * F(l).value;
      }
      lo = hi;
    }
    return rel(stone_high_energy(t, F, c).value, ref);
  });
  s.check("decay fit recovers an exact power law", 1e-12, [] {
    std::vector<std::pair<double, double>> samples;
    for (double t : geometric_grid(1.0, 1e3, 10)) samples.emplace_back(t, 3.0 * std::pow(t, -1.25));
    return std::abs(fit_decay(samples).exponent - 1.25);
  });
}

void projection_checks(Suite& s, const std::string& label, const ThresholdData& td) {
  auto op = [](const RealMatrix& m) { return m.size() ? m.operatorNorm() : 0.0; };
  s.check(label + ": P^2 = P, Q^2 = Q, PQ = 0", 1e-12, [&] {
    return std::max({op(td.P * td.P - td.P), op(td.Q * td.Q - td.Q), op(td.P * td.Q)});
  });
  s.check(label + ": S1^2 = S1, S1 Q = S1, S1 v = 0", 1e-10, [&] {
    return std::max({op(td.S1 * td.S1 - td.S1), op(td.S1 * td.Q - td.S1),
                     (td.S1 * td.vt).norm() / td.vt.norm()});
  });
  s.check(label + ": S1 D0 = S1 = D0 S1", 1e-10,
          [&] { return std::max(op(td.S1 * td.D0 - td.S1), op(td.D0 * td.S1 - td.S1)); });
  s.check(label + ": |v|^2 = |V|_1", 1e-12,
          [&] { return std::abs(td.vt.squaredNorm() - td.norm_V_L1) / td.norm_V_L1; });
}

void threshold_suite(std::vector<InvariantResult>& out, const VerifyOptions& opt) {
  Suite s("threshold", out);
  PotentialSpec well;
  well.family = PotentialFamily::gaussian_well;
  well.amplitude = -1e6;
  well.width = 0.04;
  PotentialSpec bump = well;
  bump.family = PotentialFamily::gaussian_bump;
  bump.amplitude = 2.7e5;
  const GridSpec grid{0.1, 4};

  const SampledPotential base = build_potential(well, grid);
  TuneResult tuned;
  s.check("tuned coupling: sigma_min(QTQ)", 1e-10, [&] {
    tuned = tune_to_resonance(base, {0.1, 20.0}, 1e-10);
    return tuned.sigma_min;
  });
  if (tuned.coupling == 0.0) return;
  const ThresholdData res = build_threshold(base.scaled(tuned.coupling), opt.ker_tol);
  const ThresholdData reg = build_threshold(build_potential(bump, grid), opt.ker_tol);

  s.check("resonant fixture is FirstKind", 0.0,
          [&] { return res.classification == Classification::FirstKind ? 0.0 : 1.0; });
  s.check("bump fixture is Regular (rank S1)", 0.0, [&] { return double(reg.rank_S1); });
  projection_checks(s, "resonant", res);
  projection_checks(s, "bump", reg);

  s.check("M(-) = conj M(+), M symmetric", 1e-12, [&] {
    double worst = 0;
    for (double l : {1e-3, 0.1, 2.0}) {
      const ComplexMatrix Mp = assemble_M(res, l, Branch::plus);
      const ComplexMatrix Mm = assemble_M(res, l, Branch::minus);
      worst = std::max({worst, (Mm - Mp.conjugate()).norm() / Mp.norm(),
                        (Mp - Mp.transpose()).norm() / Mp.norm()});
    }
    return worst;
  });
  s.check("|M^-1| slope vs lambda at resonance (|slope + 1|)", 0.2, [&] {
    auto inv_norm = [&](double l) {
      Eigen::JacobiSVD<ComplexMatrix> svd(assemble_M(res, l, Branch::plus));
      return 1.0 / svd.singularValues().minCoeff();
    };
    return std::abs(std::log(inv_norm(1e-2) / inv_norm(1e-4)) / std::log(100.0) + 1.0);
  });
  s.check("Jensen-Nenciu vs direct inverse (50 samples)", 1e-9, [&] {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> logl(-3.0, 0.0);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
      const double l = std::pow(10.0, logl(gen));
      const Branch b = k % 2 ? Branch::minus : Branch::plus;
      const ComplexMatrix jn = invert_M_jensen_nenciu(res, l, b).matrix;
      const ComplexMatrix direct = invert_M(res, l, b).matrix;
      worst = std::max(worst, (jn - direct).norm() / direct.norm());
    }
    return worst;
  });
  s.check("lambda B^-1 -> -a |V|_1 T1^-1", 1e-3, [&] {
    double worst = 0;
    for (Branch b : {Branch::plus, Branch::minus}) {
      const ComplexMatrix limit = -EC::a(b) * res.norm_V_L1 * res.T1.inverse().cast<cplx>();
      const ComplexMatrix Binv = jensen_nenciu_B(res, 1e-4, b).inverse();
      worst = std::max(worst, (1e-4 * Binv - limit).norm() / limit.norm());
    }
    return worst;
  });
  s.check("A^-1 scalar c is real", 1e-10, [&] {
    double worst = 0;
    for (double l : {1e-3, 1e-1}) {
      const AInverse ai = A_inverse(res, l, Branch::plus);
      worst = std::max(worst, std::abs(ai.c.imag()) / std::abs(ai.c));
    }
    return worst;
  });
  const std::vector<Point> pts = standard_test_points(0.1);
  s.check("lambda R_V -> a |V|_1 C_-1 (max entrywise, lambda = 1e-4)", 0.02, [&] {
    double worst = 0;
    for (Branch b : {Branch::plus, Branch::minus}) {
      const ComplexMatrix lead = EC::a(b) * res.norm_V_L1 * build_C_minus1(res, b, pts, pts);
      const ComplexMatrix R = perturbed_resolvent_block(&res, 1e-4, b, pts, pts).value;
      worst = std::max(worst,
                       (1e-4 * R - lead).cwiseAbs().cwiseQuotient(lead.cwiseAbs()).maxCoeff());
    }
    return worst;
  });
  s.check("lambda (R_V+ - R_V-) -> pole difference", 0.02, [&] {
    const ComplexMatrix pole = pole_difference(res, pts, pts);
    const ComplexMatrix d = perturbed_resolvent_block(&res, 1e-4, Branch::plus, pts, pts).value -
                            perturbed_resolvent_block(&res, 1e-4, Branch::minus, pts, pts).value;
    return (1e-4 * d - pole).cwiseAbs().cwiseQuotient(pole.cwiseAbs()).maxCoeff();
  });
  s.check("F_t(x,y) = F_t(y,x)", 1e-10, [&] {
    const auto xs = random_points(50, 0.5, 8), ys = random_points(50, 0.5, 9);
    const ComplexMatrix a = build_F_t(res, 3.0, Cutoff(1.25), xs, ys);
    const ComplexMatrix b = build_F_t(res, 3.0, Cutoff(1.25), ys, xs);
    double worst = 0;
    for (int i = 0; i < 50; ++i) worst = std::max(worst, rel(a(i, i), b(i, i)));
    return worst;
  });
  s.check("embedded-eigenvalue scan on the bump (flagged)", 0.0, [&] {
    return double(embedded_eigenvalue_scan(reg, geometric_grid(0.05, 40.0, 80)).flagged.size());
  });
}

}  // namespace

std::vector<std::string> verify_suites() { return {"kernels", "oscillatory", "threshold"}; }

std::vector<InvariantResult> run_verify(const std::string& suite, const VerifyOptions& options) {
  std::vector<InvariantResult> out;
  const bool all = suite == "all";
  if (!all && suite != "kernels" && suite != "oscillatory" && suite != "threshold")
    throw ConfigError("unknown suite '" + suite + "' (kernels, oscillatory, threshold, all)");
  if (all || suite == "kernels") kernels_suite(out);
  if (all || suite == "oscillatory") oscillatory_suite(out);
  if (all || suite == "threshold") threshold_suite(out, options);
  return out;
}

std::string format_table(const std::vector<InvariantResult>& results) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-62s %12s %10s  %s\n", "suite", "invariant", "measured",
                "tol", "status");
  os << line;
  int failed = 0;
  for (const InvariantResult& r : results) {
    failed += !r.pass;
    std::snprintf(line, sizeof line, "%-12s %-62s %12.3e %10.1e  %s\n", r.suite.c_str(),
                  r.name.c_str(), r.measured, r.tolerance, r.pass ? "pass" : "FAIL");
    os << line;
    if (!r.note.empty()) os << "             error: " << r.note << "\n";
  }
  os << results.size() - failed << "/" << results.size() << " invariants pass\n";
  return os.str();
}

}  // namespace quartic
