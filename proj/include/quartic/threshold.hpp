#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "quartic/kernels.hpp"
#include "quartic/oscillatory.hpp"
#include "quartic/potential.hpp"
#include "quartic/types.hpp"

namespace quartic {

enum class Classification { Regular, FirstKind, OtherNonRegular };

std::string to_string(Classification c);

/// n x (n-1) matrix with orthonormal columns spanning the complement of v (Householder).
RealMatrix orthogonal_complement(const RealVector& v);

/// vt_i K(|x_i - x_j|) vt_j for K = G0 or G1.
RealMatrix sandwich(ExpansionTerm term, const std::vector<Point>& nodes, const RealVector& vt);

/// Zero-energy operators on the Birman-Schwinger node set, in weight-normalized
/// coordinates (the discrete L^2 inner product is the Euclidean one there).
struct ThresholdData {
  std::vector<Point> nodes;
  RealVector vt;
  RealVector U;
  double norm_V_L1 = 0.0;
  double ker_tol = 0.0;

  RealMatrix P, Q, T;
  RealMatrix D0;   // QD0Q: inverse of Q(T + S1)Q on QL^2, zero on span(v)
  RealMatrix S1;
  RealMatrix S1_basis;  // orthonormal columns spanning S1 L^2
  int rank_S1 = 0;
  RealMatrix T1;   // on S1 L^2, in the S1_basis coordinates
  RealMatrix D1;   // S1 T1^{-1} S1 (empty unless FirstKind)
  RealMatrix S_op;
  RealMatrix vG1v;
  ComplexMatrix FL_plus, FL_minus, FR_plus, FR_minus;
  RealVector qtq_eigenvalues;  // eigenvalues of QTQ on QL^2, ascending in modulus
  Classification classification = Classification::Regular;

  std::size_t size() const { return nodes.size(); }
  const ComplexMatrix& FL(Branch b) const { return b == Branch::plus ? FL_plus : FL_minus; }
  const ComplexMatrix& FR(Branch b) const { return b == Branch::plus ? FR_plus : FR_minus; }
};

/// ker_tol <= 0 selects the default 1e-8 ||T||.
ThresholdData build_threshold(const SampledPotential& pot, double ker_tol = 0.0);

/// M(lambda) = U + vt R(lambda) vt with two lambda-derivatives.
struct MSeries {
  ComplexMatrix value, d1, d2;
};

ComplexMatrix assemble_M(const ThresholdData& td, double lambda, Branch branch);

/// M1 = M - (a/lambda) v v' = U + v E0 v, built from the cancellation-free remainder.
ComplexMatrix assemble_M1(const ThresholdData& td, double lambda, Branch branch);
MSeries assemble_M_series(const ThresholdData& td, double lambda, Branch branch);

enum class InverseMethod { direct, jensen_nenciu };

struct MInverse {
  double lambda = 0.0;
  Branch branch = Branch::plus;
  ComplexMatrix matrix;
  InverseMethod method = InverseMethod::direct;
  double condition_estimate = 0.0;
};

/// Dense LU inverse; a relative residual above 1e-8 raises NearSingularError.
MInverse invert_M_direct(const ComplexMatrix& M, double lambda = 0.0,
                         Branch branch = Branch::plus);

/// Dense LU inverse of M(lambda) followed by iterative refinement whose residuals are
/// accumulated in extended precision from M = M1 + (a/lambda) v v'; accurate to O(eps) in
/// the operator rather than O(cond * eps) in the rounded matrix.
MInverse invert_M(const ThresholdData& td, double lambda, Branch branch);

/// M^{-1} = (M+S1)^{-1} + (M+S1)^{-1} S1 B^{-1} S1 (M+S1)^{-1}, B = S1 - S1 (M+S1)^{-1} S1.
MInverse invert_M_jensen_nenciu(const ThresholdData& td, double lambda, Branch branch);

/// B(lambda) on S1 L^2 in S1_basis coordinates.
ComplexMatrix jensen_nenciu_B(const ThresholdData& td, double lambda, Branch branch);

struct AInverse {
  ComplexMatrix matrix;
  cplx g{};  // coefficient of S in (A + S1)^{-1} = QD0Q + g S
  cplx c{};  // from g = (a ||V||_1 / lambda + c)^{-1}
};

/// Inverse of A(lambda) = a ||V||_1 P / lambda + T (+ S1 when not regular).
AInverse A_inverse(const ThresholdData& td, double lambda, Branch branch);

/// The real constant c, extracted at several wavenumbers; throws FitError when the
/// samples disagree by more than 1e-6 relative.
double extract_c(const ThresholdData& td, const std::vector<double>& lambdas = {1e-3, 1e-2, 1e-1});

/// C_{-1}(x, y) for x in xs, y in ys. Throws DomainError unless FirstKind.
ComplexMatrix build_C_minus1(const ThresholdData& td, Branch branch, const std::vector<Point>& xs,
                             const std::vector<Point>& ys);

/// Coefficient of 1/lambda in R_V^+ - R_V^-: ||V||_1 (a+ C_{-1}^+ - a- C_{-1}^-).
ComplexMatrix pole_difference(const ThresholdData& td, const std::vector<Point>& xs,
                              const std::vector<Point>& ys);

/// int_0^inf e^{-i t l^4} l^2 chi(l) dl.
QuadratureValue resonant_time_factor(double t, const Cutoff& cutoff);

/// F_t(x, y) = (2/(pi i)) [int e^{-i t l^4} l^2 chi dl] pole_difference(x, y).
ComplexMatrix build_F_t(const ThresholdData& td, double t, const Cutoff& cutoff,
                        const std::vector<Point>& xs, const std::vector<Point>& ys);

struct EmbeddedScan {
  std::vector<double> lambdas;
  std::vector<double> sigma_min;
  std::vector<double> flagged;  // wavenumbers with sigma_min below the threshold

  bool clean() const { return flagged.empty(); }
};

EmbeddedScan embedded_eigenvalue_scan(const ThresholdData& td, const std::vector<double>& lambdas,
                                      double threshold = 1e-6);

/// Number of eigenvalues of H below -kappa^4 (Birman-Schwinger inertia count).
int bound_state_count(const ThresholdData& td, double kappa);

/// Thread-safe memo of M^{-1} keyed by (lambda, branch): concurrent readers, one writer.
class MInverseCache {
 public:
  explicit MInverseCache(const ThresholdData& td) : td_(td) {}

  std::shared_ptr<const MInverse> get(double lambda, Branch branch);
  std::size_t size() const;

 private:
  const ThresholdData& td_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<double, int>, std::shared_ptr<const MInverse>> entries_;
};

}  // namespace quartic
