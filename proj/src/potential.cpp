#include "quartic/potential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "quartic/parallel.hpp"
#include "quartic/quadrature.hpp"
#include "quartic/threshold.hpp"

namespace quartic {
namespace {

bool finite(const Point& p) { return p.allFinite(); }

double gaussian(double amplitude, double width, const Point& center, const Point& x) {
  return amplitude * std::exp(-(x - center).squaredNorm() / (width * width));
}

std::size_t locate(const std::vector<double>& axis, double x) {
  // Index i with axis[i] <= x <= axis[i+1]; caller guarantees x is inside.
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  const auto i = static_cast<std::size_t>(std::distance(axis.begin(), it));
  return std::min(i == 0 ? 0 : i - 1, axis.size() - 2);
}

// Q T_c Q on QL^2 in a fixed basis of the complement of v: sign(c) B'UB + |c| B'(vG0v)B.
struct CouplingModel {
  RealMatrix bub, bkb;

  explicit CouplingModel(const SampledPotential& base) {
    if (base.is_zero()) throw DomainError("coupling scan needs a nonzero potential");
    const RealMatrix B = orthogonal_complement(base.bs_vt);
    bub = B.transpose() * base.bs_U.asDiagonal() * B;
    bkb = B.transpose() * sandwich(ExpansionTerm::G0, base.bs_nodes, base.bs_vt) * B;
  }

  CouplingSample at(double c) const {
    if (c == 0.0 || !std::isfinite(c)) throw DomainError("coupling must be finite and nonzero");
    const RealMatrix A = (c > 0 ? 1.0 : -1.0) * bub + std::abs(c) * bkb;
    const RealVector eig = Eigen::SelfAdjointEigenSolver<RealMatrix>(A, Eigen::EigenvaluesOnly)
                               .eigenvalues();
    CouplingSample s;
    s.coupling = c;
    s.sigma_min = eig.size() ? eig.cwiseAbs().minCoeff() : 0.0;
    s.negative = static_cast<int>((eig.array() < 0.0).count());
    return s;
  }
};

}  // namespace

PotentialFamily parse_family(const std::string& name) {
  if (name == "zero") return PotentialFamily::zero;
  if (name == "gaussian_well") return PotentialFamily::gaussian_well;
  if (name == "gaussian_bump") return PotentialFamily::gaussian_bump;
  if (name == "double_well") return PotentialFamily::double_well;
  if (name == "custom") return PotentialFamily::custom;
  throw ConfigError("unknown potential family '" + name + "'");
}

std::string to_string(PotentialFamily f) {
  switch (f) {
    case PotentialFamily::zero: return "zero";
    case PotentialFamily::gaussian_well: return "gaussian_well";
    case PotentialFamily::gaussian_bump: return "gaussian_bump";
    case PotentialFamily::double_well: return "double_well";
    case PotentialFamily::custom: return "custom";
  }
  return "unknown";
}

GridRule parse_grid_rule(const std::string& name) {
  if (name == "tensor_gauss") return GridRule::tensor_gauss;
  if (name == "tensor_trapezoid") return GridRule::tensor_trapezoid;
  throw ConfigError("unknown grid rule '" + name + "'");
}

std::string to_string(GridRule r) {
  return r == GridRule::tensor_gauss ? "tensor_gauss" : "tensor_trapezoid";
}

std::pair<std::vector<Point>, RealVector> make_grid(const GridSpec& grid) {
  if (!(grid.extent > 0.0) || !std::isfinite(grid.extent))
    throw DomainError("grid extent must be positive and finite");
  if (grid.points_per_axis < 2) throw DomainError("grid needs at least 2 points per axis");
  if (grid.points_per_axis > 16 || grid.total_nodes() > GridSpec::max_nodes)
    throw DomainError("grid exceeds the " + std::to_string(GridSpec::max_nodes) + " node cap");
  const int n = grid.points_per_axis;
  const Rule1D rule = grid.rule == GridRule::tensor_gauss
                          ? gauss_legendre(n, -grid.extent, grid.extent)
                          : trapezoid(n, -grid.extent, grid.extent);
  std::vector<Point> nodes;
  RealVector weights(grid.total_nodes());
  nodes.reserve(grid.total_nodes());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        weights(static_cast<Eigen::Index>(nodes.size())) =
            rule.weights[i] * rule.weights[j] * rule.weights[k];
        nodes.emplace_back(rule.nodes[i], rule.nodes[j], rule.nodes[k]);
      }
  return {std::move(nodes), std::move(weights)};
}

SampledPotential sample_potential(const std::vector<Point>& nodes, const RealVector& weights,
                                  const RealVector& values, double beta_claimed) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (weights.size() != n || values.size() != n)
    throw DomainError("nodes, weights and values must have equal length");
  if (!values.allFinite()) throw DomainError("potential values must be finite");
  SampledPotential pot;
  pot.nodes = nodes;
  pot.weights = weights;
  pot.beta_claimed = beta_claimed;
  pot.v.resize(n);
  pot.U.resize(n);
  pot.V.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights(i) > 0.0)) throw DomainError("quadrature weights must be positive");
    pot.v(i) = std::sqrt(std::abs(values(i)));
    pot.U(i) = values(i) > 0.0 ? 1.0 : (values(i) < 0.0 ? -1.0 : 0.0);
    // Stored V is rebuilt from the split so that V = U v^2 holds exactly.
    pot.V(i) = pot.U(i) * pot.v(i) * pot.v(i);
  }
  pot.norm_V_L1 = pot.weights.dot(pot.V.cwiseAbs());
  const double vmax = n ? pot.V.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (vmax > 0.0 && std::abs(pot.V(i)) >= 1e-12 * vmax) keep.push_back(i);
  pot.bs_vt.resize(static_cast<Eigen::Index>(keep.size()));
  pot.bs_U.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Eigen::Index i = keep[k];
    pot.bs_nodes.push_back(pot.nodes[i]);
    pot.bs_vt(static_cast<Eigen::Index>(k)) = std::sqrt(pot.weights(i)) * pot.v(i);
    pot.bs_U(static_cast<Eigen::Index>(k)) = pot.U(i);
  }
  return pot;
}

SampledPotential SampledPotential::scaled(double c) const {
  if (!std::isfinite(c)) throw DomainError("coupling must be finite");
  return sample_potential(nodes, weights, c * V, beta_claimed);
}

SampledPotential build_potential(const PotentialSpec& spec, const GridSpec& grid) {
  const std::vector<double> params = {spec.amplitude, spec.amplitude2, spec.width,
                                      spec.separation, spec.beta_claimed};
  for (double p : params)
    if (!std::isfinite(p)) throw DomainError("potential parameters must be finite");
  if (!finite(spec.center)) throw DomainError("potential center must be finite");
  const bool gaussian_family = spec.family == PotentialFamily::gaussian_well ||
                               spec.family == PotentialFamily::gaussian_bump ||
                               spec.family == PotentialFamily::double_well;
  if (gaussian_family && !(spec.width > 0.0)) throw DomainError("width must be positive");
  if (spec.family == PotentialFamily::gaussian_well && spec.amplitude > 0.0)
    throw DomainError("a gaussian well needs amplitude <= 0");
  if (spec.family == PotentialFamily::gaussian_bump && spec.amplitude < 0.0)
    throw DomainError("a gaussian bump needs amplitude >= 0");

  auto [nodes, weights] = make_grid(grid);
  RealVector values(static_cast<Eigen::Index>(nodes.size()));
  std::unique_ptr<PotentialTable> table;
  if (spec.family == PotentialFamily::custom)
    table = std::make_unique<PotentialTable>(PotentialTable::read_csv(spec.csv_path));
  const Point shift(spec.separation / 2.0, 0.0, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Point& x = nodes[i];
    double value = 0.0;
    switch (spec.family) {
      case PotentialFamily::zero: break;
      case PotentialFamily::gaussian_well:
      case PotentialFamily::gaussian_bump:
        value = gaussian(spec.amplitude, spec.width, spec.center, x);
        break;
      case PotentialFamily::double_well:
        value = gaussian(spec.amplitude, spec.width, spec.center - shift, x) +
                gaussian(spec.amplitude2, spec.width, spec.center + shift, x);
        break;
      case PotentialFamily::custom: value = (*table)(x); break;
    }
    values(static_cast<Eigen::Index>(i)) = value;
  }
  return sample_potential(nodes, weights, values, spec.beta_claimed);
}

PotentialTable PotentialTable::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential table '" + path + "'");
  std::set<double> sx, sy, sz;
  std::vector<std::array<double, 4>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::array<double, 4> r{};
    if (!(ss >> r[0] >> r[1] >> r[2] >> r[3])) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected x, y, z, V");
    }
    for (double c : r)
      if (!std::isfinite(c)) throw ConfigError(path + ": non-finite entry");
    rows.push_back(r);
    sx.insert(r[0]);
    sy.insert(r[1]);
    sz.insert(r[2]);
  }
  std::vector<double> xs(sx.begin(), sx.end()), ys(sy.begin(), sy.end()), zs(sz.begin(), sz.end());
  if (xs.size() < 2 || ys.size() < 2 || zs.size() < 2 ||
      rows.size() != xs.size() * ys.size() * zs.size())
    throw ConfigError(path + ": rows must form a full tensor table with >= 2 values per axis");
  std::vector<double> values(rows.size(), std::numeric_limits<double>::quiet_NaN());
  auto index = [](const std::vector<double>& a, double x) {
    return static_cast<std::size_t>(std::lower_bound(a.begin(), a.end(), x) - a.begin());
  };
  for (const auto& r : rows) {
    const std::size_t k = (index(xs, r[0]) * ys.size() + index(ys, r[1])) * zs.size() +
                          index(zs, r[2]);
    values[k] = r[3];
  }
  for (double v : values)
    if (std::isnan(v)) throw ConfigError(path + ": duplicate rows in tensor table");
  return PotentialTable(std::move(xs), std::move(ys), std::move(zs), std::move(values));
}

PotentialTable::PotentialTable(std::vector<double> xs, std::vector<double> ys,
                               std::vector<double> zs, std::vector<double> values)
    : xs_(std::move(xs)), ys_(std::move(ys)), zs_(std::move(zs)), values_(std::move(values)) {
  if (values_.size() != xs_.size() * ys_.size() * zs_.size())
    throw DomainError("table size does not match its axes");
}

double PotentialTable::operator()(const Point& p) const {
  if (p.x() < xs_.front() || p.x() > xs_.back() || p.y() < ys_.front() || p.y() > ys_.back() ||
      p.z() < zs_.front() || p.z() > zs_.back())
    return 0.0;
  const std::size_t i = locate(xs_, p.x()), j = locate(ys_, p.y()), k = locate(zs_, p.z());
  const double u = (p.x() - xs_[i]) / (xs_[i + 1] - xs_[i]);
  const double v = (p.y() - ys_[j]) / (ys_[j + 1] - ys_[j]);
  const double w = (p.z() - zs_[k]) / (zs_[k + 1] - zs_[k]);
  auto at = [&](std::size_t a, std::size_t b, std::size_t c) {
    return values_[(a * ys_.size() + b) * zs_.size() + c];
  };
  double out = 0.0;
  for (int da = 0; da < 2; ++da)
    for (int db = 0; db < 2; ++db)
      for (int dc = 0; dc < 2; ++dc)
        out += (da ? u : 1 - u) * (db ? v : 1 - v) * (dc ? w : 1 - w) * at(i + da, j + db, k + dc);
  return out;
}

double quadrature_audit(const SampledPotential& pot, const GridSpec& grid) {
  const double volume = std::pow(2.0 * grid.extent, 3);
  return std::abs(pot.weights.sum() - volume) / volume;
}

double decomposition_audit(const SampledPotential& pot) {
  if (pot.V.size() == 0) return 0.0;
  return (pot.V - pot.U.cwiseProduct(pot.v.cwiseProduct(pot.v))).cwiseAbs().maxCoeff();
}

DecayAudit decay_audit(const SampledPotential& pot) {
  DecayAudit audit;
  audit.beta = pot.beta_claimed;
  for (std::size_t i = 0; i < pot.nodes.size(); ++i)
    audit.constant = std::max(audit.constant, std::abs(pot.V(static_cast<Eigen::Index>(i))) *
                                                  std::pow(bracket(pot.nodes[i]), pot.beta_claimed));
  return audit;
}

std::vector<CouplingSample> coupling_scan(const SampledPotential& base,
                                          const std::vector<double>& couplings) {
  const CouplingModel model(base);
  std::vector<CouplingSample> out(couplings.size());
  parallel_for(couplings.size(), [&](std::size_t i) { out[i] = model.at(couplings[i]); });
  return out;
}

TuneResult tune_to_resonance(const SampledPotential& base, std::pair<double, double> bracket,
                             double tol) {
  auto [lo, hi] = bracket;
  if (!(lo < hi) || lo * hi <= 0.0 || !std::isfinite(lo) || !std::isfinite(hi))
    throw DomainError("bracket must be finite, ordered and exclude zero");
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  const CouplingModel model(base);

  constexpr int samples = 33;
  std::vector<CouplingSample> grid(samples);
  for (int k = 0; k < samples; ++k) grid[k] = model.at(lo + (hi - lo) * k / (samples - 1));

  TuneResult result;
  auto accept = [&](const CouplingSample& s, double width) {
    result.coupling = s.coupling;
    result.sigma_min = s.sigma_min;
    return s.sigma_min <= tol && width <= tol;
  };

  // An eigenvalue crossing zero changes the inertia: bisect on the first crossing.
  for (int k = 0; k + 1 < samples; ++k) {
    if (grid[k].negative == grid[k + 1].negative) continue;
    CouplingSample a = grid[k], b = grid[k + 1];
    for (int it = 0; it < 200; ++it) {
      result.iterations = it + 1;
      const CouplingSample m = model.at(0.5 * (a.coupling + b.coupling));
      if (accept(m, b.coupling - a.coupling)) return result;
      if (b.coupling - a.coupling <= 4e-16 * std::abs(m.coupling)) break;
      (m.negative == a.negative ? a : b) = m;
    }
    if (result.sigma_min <= tol) return result;
    throw NotFoundError("bisection stalled with sigma_min = " + std::to_string(result.sigma_min));
  }

  // No crossing: golden section on sigma_min around the smallest sample.
  const auto best = std::min_element(grid.begin(), grid.end(), [](const auto& x, const auto& y) {
    return x.sigma_min < y.sigma_min;
  });
  const int k = static_cast<int>(best - grid.begin());
  double a = grid[std::max(k - 1, 0)].coupling, b = grid[std::min(k + 1, samples - 1)].coupling;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  CouplingSample c1 = model.at(b - g * (b - a)), c2 = model.at(a + g * (b - a));
  for (int it = 0; it < 200; ++it) {
    result.iterations = it + 1;
    const CouplingSample& m = c1.sigma_min < c2.sigma_min ? c1 : c2;
    if (accept(m, b - a)) return result;
    if (b - a <= 4e-16 * std::abs(m.coupling)) break;
    if (c1.sigma_min < c2.sigma_min) {
      b = c2.coupling;
      c2 = c1;
      c1 = model.at(b - g * (b - a));
    } else {
      a = c1.coupling;
      c1 = c2;
      c2 = model.at(a + g * (b - a));
    }
  }
  if (result.sigma_min <= tol) return result;
  throw NotFoundError("no resonant coupling in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]: sigma_min >= " + std::to_string(result.sigma_min));
}

}  // namespace quartic
