#pragma once

#include <string>
#include <vector>

#include "quartic/oscillatory.hpp"
#include "quartic/threshold.hpp"
#include "quartic/types.hpp"

namespace quartic {

/// Resolvent kernel values between two point sets with two wavenumber derivatives
/// (derivatives are left empty when not requested).
struct ResolventBlock {
  ComplexMatrix value, d1, d2;
};

/// R_V(lambda^4)(x, y) for x in xs, y in ys; td == nullptr means V == 0.
/// Without derivatives the resolvent identity is evaluated in the split form
///   R_V = E(x,y) - e_x' M1^{-1} e_y + (1 - p_x)(1 - p_y) / (lambda/a + s),
/// with M = M1 + (a/lambda) vv', p = e' M1^{-1} v, s = v' M1^{-1} v, which carries the
/// 1/lambda pole without cancellation. With derivatives it uses a direct LU solve and the
/// differentiated identity; that path is meant for the high-energy range, and near a
/// resonance at lambda << 1 it carries the cond(M) * eps error of the rounded M.
ResolventBlock perturbed_resolvent_block(const ThresholdData* td, double lambda, Branch branch,
                                         const std::vector<Point>& xs,
                                         const std::vector<Point>& ys, bool derivatives = false);

cplx perturbed_resolvent(const ThresholdData* td, double lambda, Branch branch, const Point& x,
                         const Point& y);

struct ResolventSample {
  double lambda = 0.0;
  Point x, y;
  cplx RV_plus{};
  cplx density{};  // (R_V^+ - R_V^-)(lambda^4)(x, y) = 2i Im R_V^+
};

ResolventSample spectral_density(const ThresholdData* td, double lambda, const Point& x,
                                 const Point& y);

/// Standard evaluation set: 8 points inside radius R, 8 near 2R, 8 near 5R.
std::vector<Point> standard_test_points(double R);

struct EvolutionOptions {
  Cutoff cutoff{};
  double lambda_max = 40.0;
  int low_levels = 24;
  int order = 16;
  double panel_width = 1.0;
  /// Asserted decay of the spectral density envelope; 1 covers coincident points.
  double envelope_exponent = 1.0;
};

/// Kernel of e^{-itH} P_ac(H) on all ordered pairs of a point set.
struct PropagatorKernel {
  double t = 0.0;
  std::vector<Point> points;
  ComplexMatrix values, low_part, high_part;
  RealMatrix errors;
  double error_estimate = 0.0;  // max over pairs
};

/// Stone's formula (2/(pi i)) int e^{-it l^4} l^3 (R_V^+ - R_V^-)(l^4) dl split by the cutoff.
/// The spectral density is sampled once on t-independent Filon nodes at construction; each
/// kernel(t) call only recomputes moment weights.
class Evolution {
 public:
  Evolution(const ThresholdData* td, std::vector<Point> points, EvolutionOptions options = {});

  /// Negative t is handled by conjugation: K_{-t} = conj(K_t).
  PropagatorKernel kernel(double t) const;

  const std::vector<Point>& points() const { return points_; }
  const EvolutionOptions& options() const { return options_; }
  const ThresholdData* threshold() const { return td_; }
  std::size_t sample_count() const { return low_rule_.size() + high_rule_.size() + 1; }

 private:
  const ThresholdData* td_;
  std::vector<Point> points_;
  EvolutionOptions options_;
  FilonRule low_rule_, high_rule_;
  ComplexMatrix low_g_;     // nodes x pairs: l^3 chi F
  ComplexMatrix high_h_;    // nodes x pairs: IBP integrand
  ComplexVector boundary_;  // pairs
  RealVector low_error_;    // t-independent interpolation error per pair
  std::vector<std::vector<double>> high_panel_error_;  // per pair
  RealVector envelope_;     // per pair
};

PropagatorKernel evolve_kernel(const ThresholdData* td, double t, const std::vector<Point>& points,
                               const Cutoff& cutoff = Cutoff{}, double lambda_max = 40.0);

/// max over pairs of |K(x,y) - sub(x,y)| / (<x>^sigma <y>^sigma); sub may be empty.
double weighted_sup(const PropagatorKernel& kernel, double sigma,
                    const ComplexMatrix& subtract = ComplexMatrix());

enum class Subtraction { none, resonant, free_origin };

std::string to_string(Subtraction s);

struct DecayRow {
  double t = 0.0;
  double sigma = 0.0;
  Subtraction subtraction = Subtraction::none;
  double weighted_sup = 0.0;
  double error_estimate = 0.0;
};

struct DecayReport {
  std::vector<DecayRow> rows;
  std::vector<std::pair<double, DecayFit>> fits;  // per sigma
};

/// Weighted sups over t and sigma with optional subtraction of the resonant F_t (requires a
/// FirstKind threshold) or of the free constant t^{-3/4} K(0), followed by decay fits.
DecayReport decay_report(const Evolution& evolution, const std::vector<double>& t_grid,
                         const std::vector<double>& sigmas, Subtraction subtraction);

/// Several subtractions sharing one kernel evaluation per t; reports in the given order.
std::vector<DecayReport> decay_reports(const Evolution& evolution,
                                       const std::vector<double>& t_grid,
                                       const std::vector<double>& sigmas,
                                       const std::vector<Subtraction>& subtractions);

}  // namespace quartic
