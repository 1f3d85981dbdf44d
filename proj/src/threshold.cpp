#include "quartic/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

namespace quartic {
namespace {

ComplexMatrix to_complex(const RealMatrix& m) { return m.cast<cplx>(); }

using LComplexMatrix = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;

// (M1 + (a/lambda) v v' + shift) Y with the large rank-one part applied in extended
// precision, so its rounding never enters. M1 Y stays in double: M1 is itself rounded to
// double, so a wider product would not be more accurate.
LComplexMatrix split_product(const ThresholdData& td, const ComplexMatrix& M1, cplx alpha,
                             const RealMatrix* shift, const ComplexMatrix& Y) {
  ComplexMatrix dense = M1 * Y;
  if (shift != nullptr) dense.noalias() += *shift * Y;
  const LComplexMatrix Yl = Y.cast<std::complex<long double>>();
  const auto vl = td.vt.cast<long double>().cast<std::complex<long double>>();
  LComplexMatrix out = dense.cast<std::complex<long double>>();
  out += std::complex<long double>(alpha) * (vl * (vl.transpose() * Yl));
  return out;
}

// Iterative refinement of an approximate inverse X of M1 + (a/lambda) v v' + shift with
// residuals in extended precision. Converges whenever cond * eps < 1 and removes the
// cond * eps error that forming M in double introduces.
void refine_inverse(const ThresholdData& td, const ComplexMatrix& M1, cplx alpha,
                    const RealMatrix* shift, ComplexMatrix& X) {
  const auto n = X.rows();
  for (int iter = 0; iter < 3; ++iter) {
    const LComplexMatrix R = LComplexMatrix::Identity(n, n) - split_product(td, M1, alpha, shift, X);
    const ComplexMatrix dX = X * R.cast<cplx>();
    X += dX;
    if (dX.norm() <= 1e-15 * X.norm()) break;
  }
}

std::string format_sci(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

// Zero-energy resolvent kernel of Delta^2 + kappa^4: e^{-s} sin(s) / (4 pi kappa^2 r), s = kappa r/sqrt 2.
double negative_energy_kernel(double kappa, double r) {
  if (r == 0.0) return 1.0 / (4.0 * std::sqrt(2.0) * pi * kappa);
  const double s = kappa * r / std::sqrt(2.0);
  return std::exp(-s) * std::sin(s) / (4.0 * pi * kappa * kappa * r);
}

void require_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("wavenumber must be positive and finite");
}

}  // namespace

std::string to_string(Classification c) {
  switch (c) {
    case Classification::Regular: return "Regular";
    case Classification::FirstKind: return "FirstKind";
    case Classification::OtherNonRegular: return "OtherNonRegular";
  }
  return "unknown";
}

RealMatrix orthogonal_complement(const RealVector& v) {
  const Eigen::Index n = v.size();
  const double norm = v.norm();
  if (n == 0 || norm == 0.0) throw DomainError("complement of the zero vector is undefined");
  RealVector u = v / norm;
  u(0) += u(0) >= 0.0 ? 1.0 : -1.0;
  // H = I - 2 u u^T / |u|^2 maps v to a multiple of e_0; its other columns span v-perp.
  RealMatrix H = RealMatrix::Identity(n, n) - (2.0 / u.squaredNorm()) * u * u.transpose();
  return H.rightCols(n - 1);
}

RealMatrix sandwich(ExpansionTerm term, const std::vector<Point>& nodes, const RealVector& vt) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  RealMatrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = vt(i) * expansion_term(term, 0.0) * vt(i);
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = vt(i) * expansion_term(term, (nodes[i] - nodes[j]).norm()) * vt(j);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

ThresholdData build_threshold(const SampledPotential& pot, double ker_tol) {
  if (pot.is_zero() || !(pot.norm_V_L1 > 0.0))
    throw DomainError("threshold analysis needs a nonzero potential");
  ThresholdData td;
  td.nodes = pot.bs_nodes;
  td.vt = pot.bs_vt;
  td.U = pot.bs_U;
  const Eigen::Index n = td.vt.size();
  const double nv = td.vt.squaredNorm();
  td.norm_V_L1 = nv;

  td.P = td.vt * td.vt.transpose() / nv;
  td.Q = RealMatrix::Identity(n, n) - td.P;
  td.T = RealMatrix(td.U.asDiagonal()) + sandwich(ExpansionTerm::G0, td.nodes, td.vt);
  const double t_norm =
      Eigen::SelfAdjointEigenSolver<RealMatrix>(td.T, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .cwiseAbs()
          .maxCoeff();
  td.ker_tol = ker_tol > 0.0 ? ker_tol : 1e-8 * t_norm;

  // QTQ on QL^2 in an orthonormal basis of v-perp.
  const RealMatrix B = orthogonal_complement(td.vt);
  const Eigen::SelfAdjointEigenSolver<RealMatrix> eig(B.transpose() * td.T * B);
  const RealVector& mu = eig.eigenvalues();
  const Eigen::Index m = mu.size();
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return std::abs(mu(a)) < std::abs(mu(b)); });
  td.qtq_eigenvalues.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) td.qtq_eigenvalues(k) = mu(order[k]);

  // Kernel rank: below ker_tol, cut at the largest gap between consecutive moduli.
  Eigen::Index below = 0;
  while (below < m && std::abs(td.qtq_eigenvalues(below)) < td.ker_tol) ++below;
  Eigen::Index rank = 0;
  if (below > 0) {
    double best = -1.0;
    for (Eigen::Index k = 1; k <= below; ++k) {
      const double lo = std::abs(td.qtq_eigenvalues(k - 1));
      const double hi = k < m ? std::abs(td.qtq_eigenvalues(k)) : td.ker_tol;
      const double ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
      if (ratio > best) {
        best = ratio;
        rank = k;
      }
    }
  }
  td.rank_S1 = static_cast<int>(rank);

  RealMatrix W(m, m);
  RealVector inv(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    W.col(k) = eig.eigenvectors().col(order[k]);
    // Q(T + S1)Q adds the identity on the kernel.
    inv(k) = 1.0 / (td.qtq_eigenvalues(k) + (k < rank ? 1.0 : 0.0));
  }
  const RealMatrix BW = B * W;
  td.D0 = BW * inv.asDiagonal() * BW.transpose();
  td.S1_basis = BW.leftCols(rank);
  td.S1 = td.S1_basis * td.S1_basis.transpose();
  td.vG1v = sandwich(ExpansionTerm::G1, td.nodes, td.vt);

  td.classification = Classification::Regular;
  if (rank > 0) {
    const RealMatrix& Bk = td.S1_basis;
    const RealMatrix TB = td.T * Bk;
    td.T1 = TB.transpose() * td.P * TB -
            (nv / (3.0 * std::pow(8.0 * pi, 2))) * Bk.transpose() * td.vG1v * Bk;
    td.T1 = 0.5 * (td.T1 + td.T1.transpose()).eval();
    const RealVector t1eig =
        Eigen::SelfAdjointEigenSolver<RealMatrix>(td.T1, Eigen::EigenvaluesOnly).eigenvalues();
    if (t1eig.cwiseAbs().minCoeff() > 1e-10 * t_norm * t_norm) {
      td.classification = Classification::FirstKind;
      td.D1 = Bk * td.T1.inverse() * Bk.transpose();
    } else {
      td.classification = Classification::OtherNonRegular;
    }
  }

  const RealMatrix TP = td.T * td.P;
  const RealMatrix PTD0 = TP.transpose() * td.D0;  // P T D0
  td.S_op = td.P - PTD0 - PTD0.transpose() + PTD0.transpose() * td.T * td.D0;

  for (Branch b : {Branch::plus, Branch::minus}) {
    const cplx a = ExpansionConstants::a(b), a1 = ExpansionConstants::a1(b);
    const ComplexMatrix s = to_complex(td.S_op) / (a * nv);
    ComplexMatrix fr = s + a1 * to_complex(td.vG1v * td.D0);
    ComplexMatrix fl = s + a1 * to_complex(td.D0 * td.vG1v);
    (b == Branch::plus ? td.FR_plus : td.FR_minus) = std::move(fr);
    (b == Branch::plus ? td.FL_plus : td.FL_minus) = std::move(fl);
  }
  return td;
}

MSeries assemble_M_series(const ThresholdData& td, double lambda, Branch branch) {
  require_lambda(lambda);
  const auto n = static_cast<Eigen::Index>(td.size());
  MSeries m{ComplexMatrix(n, n), ComplexMatrix(n, n), ComplexMatrix(n, n)};
  const KernelValue diag = quartic_resolvent(lambda, 0.0, branch);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double vi = td.vt(i);
    m.value(i, i) = td.U(i) + vi * vi * diag.value;
    m.d1(i, i) = vi * vi * diag.d1;
    m.d2(i, i) = vi * vi * diag.d2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const KernelValue k = quartic_resolvent(lambda, (td.nodes[i] - td.nodes[j]).norm(), branch);
      const double w = vi * td.vt(j);
      m.value(i, j) = m.value(j, i) = w * k.value;
      m.d1(i, j) = m.d1(j, i) = w * k.d1;
      m.d2(i, j) = m.d2(j, i) = w * k.d2;
    }
  }
  return m;
}

ComplexMatrix assemble_M(const ThresholdData& td, double lambda, Branch branch) {
  require_lambda(lambda);
  const auto n = static_cast<Eigen::Index>(td.size());
  ComplexMatrix m(n, n);
  const cplx diag = quartic_resolvent(lambda, 0.0, branch).value;
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = td.U(i) + td.vt(i) * td.vt(i) * diag;
    for (Eigen::Index j = 0; j < i; ++j)
      m(i, j) = m(j, i) = td.vt(i) * td.vt(j) *
                          quartic_resolvent(lambda, (td.nodes[i] - td.nodes[j]).norm(), branch).value;
  }
  return m;
}

ComplexMatrix assemble_M1(const ThresholdData& td, double lambda, Branch branch) {
  require_lambda(lambda);
  const auto n = static_cast<Eigen::Index>(td.size());
  ComplexMatrix m(n, n);
  const cplx diag = remainder(0, lambda, 0.0, branch).value;
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, i) = td.U(i) + td.vt(i) * td.vt(i) * diag;
    for (Eigen::Index j = 0; j < i; ++j)
      m(i, j) = m(j, i) = td.vt(i) * td.vt(j) *
                          remainder(0, lambda, (td.nodes[i] - td.nodes[j]).norm(), branch).value;
  }
  return m;
}

MInverse invert_M_direct(const ComplexMatrix& M, double lambda, Branch branch) {
  if (M.rows() != M.cols()) throw DomainError("matrix must be square");
  MInverse out;
  out.lambda = lambda;
  out.branch = branch;
  out.method = InverseMethod::direct;
  const Eigen::Index n = M.rows();
  if (n == 0) return out;
  const Eigen::PartialPivLU<ComplexMatrix> lu(M);
  out.matrix = lu.inverse();
  out.condition_estimate = 1.0 / lu.rcond();
  // Normwise relative residual: an O(eps) value means a backward-stable inverse whatever
  // the conditioning; singular or numerically singular input yields O(1) or NaN.
  const double residual = (M * out.matrix - ComplexMatrix::Identity(n, n)).norm() /
                          (M.norm() * out.matrix.norm());
  if (!(residual <= 1e-8) || !(lu.rcond() > 1e-15))
    throw NearSingularError("M inverse relative residual " + format_sci(residual) +
                                " at lambda = " + format_sci(lambda),
                            lambda);
  return out;
}

MInverse invert_M(const ThresholdData& td, double lambda, Branch branch) {
  MInverse out = invert_M_direct(assemble_M(td, lambda, branch), lambda, branch);
  const cplx alpha = ExpansionConstants::a(branch) / lambda;
  refine_inverse(td, assemble_M1(td, lambda, branch), alpha, nullptr, out.matrix);
  return out;
}

namespace {

// (M + S1)^{-1} refined against the split operator, and B = S1 - S1 X S1 in S1_basis
// coordinates formed as Bk' X (M Bk): X (M + S1) = I gives S1 - S1 X S1 = S1 X M S1, which
// avoids the cancellation of I against S1 X S1 when B = O(lambda).
std::pair<MInverse, ComplexMatrix> jensen_nenciu_parts(const ThresholdData& td, double lambda,
                                                        Branch branch) {
  const ComplexMatrix M1 = assemble_M1(td, lambda, branch);
  const cplx alpha = ExpansionConstants::a(branch) / lambda;
  MInverse X = invert_M_direct(assemble_M(td, lambda, branch) + to_complex(td.S1), lambda, branch);
  refine_inverse(td, M1, alpha, &td.S1, X.matrix);
  const ComplexMatrix Bk = to_complex(td.S1_basis);
  const ComplexMatrix MBk = split_product(td, M1, alpha, nullptr, Bk).cast<cplx>();
  ComplexMatrix B = Bk.transpose() * (X.matrix * MBk);
  return {std::move(X), std::move(B)};
}

}  // namespace

ComplexMatrix jensen_nenciu_B(const ThresholdData& td, double lambda, Branch branch) {
  return jensen_nenciu_parts(td, lambda, branch).second;
}

MInverse invert_M_jensen_nenciu(const ThresholdData& td, double lambda, Branch branch) {
  if (td.rank_S1 == 0) {
    MInverse out = invert_M(td, lambda, branch);
    out.method = InverseMethod::jensen_nenciu;
    return out;
  }
  auto [out, B] = jensen_nenciu_parts(td, lambda, branch);
  const ComplexMatrix& X = out.matrix;
  const ComplexMatrix Bk = to_complex(td.S1_basis);
  const Eigen::FullPivLU<ComplexMatrix> blu(B);
  if (!blu.isInvertible() || blu.rcond() < 1e-14)
    throw NearSingularError("Jensen-Nenciu block is singular at lambda = " + format_sci(lambda),
                            lambda);
  const ComplexMatrix XB = X * Bk;
  out.matrix = X + XB * blu.inverse() * XB.transpose();
  out.method = InverseMethod::jensen_nenciu;
  out.condition_estimate = std::max(out.condition_estimate, 1.0 / blu.rcond());
  return out;
}

AInverse A_inverse(const ThresholdData& td, double lambda, Branch branch) {
  require_lambda(lambda);
  const cplx alpha = ExpansionConstants::a(branch) * td.norm_V_L1 / lambda;
  const ComplexMatrix A = alpha * to_complex(td.P) + to_complex(td.T + td.S1);
  AInverse out;
  out.matrix = A.partialPivLu().inverse();
  // g from the Schur complement of the P-block, 1/g = alpha + c, so c carries no
  // cancellation against the large alpha.
  const RealMatrix A0 = td.T + td.S1;
  const RealVector u = td.vt / std::sqrt(td.norm_V_L1);
  const RealMatrix Qb = orthogonal_complement(td.vt);
  const RealVector w = Qb.transpose() * (A0 * u);
  const RealMatrix block = Qb.transpose() * A0 * Qb;
  out.c = u.dot(A0 * u) - w.dot(block.partialPivLu().solve(w));
  out.g = 1.0 / (alpha + out.c);
  return out;
}

double extract_c(const ThresholdData& td, const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw DomainError("c extraction needs at least one wavenumber");
  std::vector<double> values;
  for (double l : lambdas)
    for (Branch b : {Branch::plus, Branch::minus}) values.push_back(A_inverse(td, l, b).c.real());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double c = values.front();
  if (*hi - *lo > 1e-6 * std::max(std::abs(c), 1e-300))
    throw FitError("c varies across wavenumbers: [" + std::to_string(*lo) + ", " +
                   std::to_string(*hi) + "]");
  return c;
}

ComplexMatrix build_C_minus1(const ThresholdData& td, Branch branch, const std::vector<Point>& xs,
                             const std::vector<Point>& ys) {
  if (td.classification != Classification::FirstKind)
    throw DomainError("C_{-1} requires a resonance of the first kind");
  const cplx a = ExpansionConstants::a(branch);
  const ComplexMatrix Bk = to_complex(td.S1_basis);
  const auto n = static_cast<Eigen::Index>(td.size());
  auto g0 = [&](const Point& x) {
    ComplexVector g(n);
    for (Eigen::Index i = 0; i < n; ++i)
      g(i) = expansion_term(ExpansionTerm::G0, (x - td.nodes[i]).norm()) * td.vt(i);
    return g;
  };
  const ComplexVector v = td.vt.cast<cplx>();
  // Constant parts 1 v F_L and F_R v 1.
  const ComplexVector left_const = a * (td.FL(branch).transpose() * v);
  const ComplexVector right_const = a * (td.FR(branch) * v);
  ComplexMatrix L(static_cast<Eigen::Index>(xs.size()), td.rank_S1);
  ComplexMatrix R(td.rank_S1, static_cast<Eigen::Index>(ys.size()));
  for (std::size_t p = 0; p < xs.size(); ++p)
    L.row(static_cast<Eigen::Index>(p)) = (g0(xs[p]) + left_const).transpose() * Bk;
  for (std::size_t q = 0; q < ys.size(); ++q)
    R.col(static_cast<Eigen::Index>(q)) = Bk.transpose() * (g0(ys[q]) + right_const);
  return L * td.T1.inverse().cast<cplx>() * R;
}

ComplexMatrix pole_difference(const ThresholdData& td, const std::vector<Point>& xs,
                              const std::vector<Point>& ys) {
  return td.norm_V_L1 * (ExpansionConstants::a_plus * build_C_minus1(td, Branch::plus, xs, ys) -
                         ExpansionConstants::a_minus * build_C_minus1(td, Branch::minus, xs, ys));
}

QuadratureValue resonant_time_factor(double t, const Cutoff& cutoff) {
  return stone_low_energy(
      t, [](double l) { return KernelValue{1.0 / l, -1.0 / (l * l), 2.0 / (l * l * l)}; }, cutoff);
}

ComplexMatrix build_F_t(const ThresholdData& td, double t, const Cutoff& cutoff,
                        const std::vector<Point>& xs, const std::vector<Point>& ys) {
  if (!(t >= 1.0)) throw DomainError("F_t is defined for t >= 1");
  const ComplexMatrix pd = pole_difference(td, xs, ys);
  return (2.0 / (pi * I)) * resonant_time_factor(t, cutoff).value * pd;
}

EmbeddedScan embedded_eigenvalue_scan(const ThresholdData& td, const std::vector<double>& lambdas,
                                      double threshold) {
  EmbeddedScan scan;
  for (double l : lambdas) {
    require_lambda(l);
    const ComplexMatrix M = assemble_M(td, l, Branch::plus);
    const double s = Eigen::BDCSVD<ComplexMatrix>(M).singularValues().minCoeff();
    scan.lambdas.push_back(l);
    scan.sigma_min.push_back(s);
    if (s < threshold) scan.flagged.push_back(l);
  }
  return scan;
}

int bound_state_count(const ThresholdData& td, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  const auto n = static_cast<Eigen::Index>(td.size());
  RealMatrix M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      M(i, j) = M(j, i) = (i == j ? td.U(i) : 0.0) +
                          td.vt(i) * td.vt(j) *
                              negative_energy_kernel(kappa, (td.nodes[i] - td.nodes[j]).norm());
  const RealVector eig =
      Eigen::SelfAdjointEigenSolver<RealMatrix>(M, Eigen::EigenvaluesOnly).eigenvalues();
  const auto negative_U = (td.U.array() < 0.0).count();
  const auto negative_M = (eig.array() < 0.0).count();
  return static_cast<int>(negative_U - negative_M);
}

std::shared_ptr<const MInverse> MInverseCache::get(double lambda, Branch branch) {
  const auto key = std::make_pair(lambda, static_cast<int>(branch));
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto value = std::make_shared<const MInverse>(invert_M(td_, lambda, branch));
  std::unique_lock lock(mutex_);
  return entries_.emplace(key, std::move(value)).first->second;
}

std::size_t MInverseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace quartic
