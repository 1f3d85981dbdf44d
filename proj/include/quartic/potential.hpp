#pragma once

#include <string>
#include <utility>
#include <vector>

#include "quartic/types.hpp"

namespace quartic {

enum class GridRule { tensor_gauss, tensor_trapezoid };

GridRule parse_grid_rule(const std::string& name);
std::string to_string(GridRule r);

/// Tensor grid on the cube [-R, R]^3.
struct GridSpec {
  double extent = 1.0;
  int points_per_axis = 8;
  GridRule rule = GridRule::tensor_gauss;

  static constexpr int max_nodes = 4096;
  int total_nodes() const { return points_per_axis * points_per_axis * points_per_axis; }
};

enum class PotentialFamily { zero, gaussian_well, gaussian_bump, double_well, custom };

PotentialFamily parse_family(const std::string& name);
std::string to_string(PotentialFamily f);

/// A named potential family with its parameters.
///   gaussian_well / gaussian_bump: amplitude * exp(-|x - center|^2 / width^2)
///   double_well: two such lobes at center -/+ (separation/2) e_x with amplitudes
///                amplitude and amplitude2
///   custom: values read from a CSV table (x, y, z, V) and interpolated onto the grid
struct PotentialSpec {
  PotentialFamily family = PotentialFamily::gaussian_well;
  double amplitude = -1.0;
  double amplitude2 = 1.0;
  double width = 1.0;
  double separation = 2.0;
  Point center = Point::Zero();
  std::string csv_path;
  double beta_claimed = 12.0;
};

/// V sampled on a quadrature grid and split as V = U v^2.
/// The Birman-Schwinger node set keeps the nodes where |V| >= 1e-12 max|V|; on it the
/// weight-normalized coupling vt_i = sqrt(w_i) v_i is what every matrix is built from.
struct SampledPotential {
  std::vector<Point> nodes;
  RealVector weights;
  RealVector V;
  RealVector v;
  RealVector U;
  double beta_claimed = 12.0;
  double norm_V_L1 = 0.0;

  std::vector<Point> bs_nodes;
  RealVector bs_vt;
  RealVector bs_U;

  bool is_zero() const { return bs_nodes.empty(); }
  /// The potential c V on the same grid.
  SampledPotential scaled(double c) const;
};

/// Tensor grid nodes and weights. Throws DomainError beyond the node cap.
std::pair<std::vector<Point>, RealVector> make_grid(const GridSpec& grid);

SampledPotential build_potential(const PotentialSpec& spec, const GridSpec& grid);
/// Samples arbitrary values on the grid nodes.
SampledPotential sample_potential(const std::vector<Point>& nodes, const RealVector& weights,
                                  const RealVector& values, double beta_claimed = 12.0);

/// Tensor table read from CSV rows x, y, z, V (an optional header line is skipped).
/// Evaluates by trilinear interpolation, zero outside the table's bounding box.
class PotentialTable {
 public:
  static PotentialTable read_csv(const std::string& path);
  PotentialTable(std::vector<double> xs, std::vector<double> ys, std::vector<double> zs,
                 std::vector<double> values);
  double operator()(const Point& p) const;

 private:
  std::vector<double> xs_, ys_, zs_;
  std::vector<double> values_;  // index (i * ny + j) * nz + k
};

/// |sum w - (2R)^3| / (2R)^3.
double quadrature_audit(const SampledPotential& pot, const GridSpec& grid);
/// max |V - U v^2| over the nodes.
double decomposition_audit(const SampledPotential& pot);

struct DecayAudit {
  double beta = 0.0;
  double constant = 0.0;  // smallest C with |V(x)| <= C <x>^{-beta} on the nodes
};
DecayAudit decay_audit(const SampledPotential& pot);

struct CouplingSample {
  double coupling = 0.0;
  double sigma_min = 0.0;  // smallest singular value of Q T_c Q on QL^2
  int negative = 0;        // number of negative eigenvalues of Q T_c Q on QL^2
};

/// sigma_min(Q T_c Q) for the potentials c V. Throws DomainError for c == 0 or V == 0.
std::vector<CouplingSample> coupling_scan(const SampledPotential& base,
                                          const std::vector<double>& couplings);

struct TuneResult {
  double coupling = 0.0;
  double sigma_min = 0.0;
  int iterations = 0;
};

/// Locates a coupling c* in the bracket at which Q T_c Q becomes singular: bisection on
/// the inertia of Q T_c Q when an eigenvalue crosses zero, golden section on sigma_min
/// otherwise. Stops once sigma_min <= tol and the bracket is narrower than tol.
/// Throws NotFoundError when sigma_min never drops below tol in the bracket.
TuneResult tune_to_resonance(const SampledPotential& base, std::pair<double, double> bracket,
                             double tol = 1e-10);

}  // namespace quartic
