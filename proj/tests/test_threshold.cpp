#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <random>
#include <thread>

#include "quartic/potential.hpp"
#include "quartic/propagator.hpp"
#include "quartic/threshold.hpp"

using namespace quartic;

namespace {

using EC = ExpansionConstants;

SampledPotential small_well() {
  PotentialSpec s;
  s.family = PotentialFamily::gaussian_well;
  s.amplitude = -1e6;
  s.width = 0.04;
  return build_potential(s, GridSpec{0.1, 4});
}

SampledPotential bump() {
  PotentialSpec s;
  s.family = PotentialFamily::gaussian_bump;
  s.amplitude = 2.7e5;
  s.width = 0.04;
  return build_potential(s, GridSpec{0.1, 4});
}

int numerical_rank(const ComplexMatrix& m, double rel = 1e-10) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > rel * s(0);
  return r;
}

double slope(double x0, double y0, double x1, double y1) {
  return std::log(y1 / y0) / std::log(x1 / x0);
}

std::vector<Point> random_points(int n, double radius, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(gen), u(gen), u(gen));
  return pts;
}

}  // namespace

// Shared fixtures: a weak well (regular), the repulsive bump (regular) and the well tuned to
// its first resonant coupling.
class ThresholdTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const SampledPotential base = small_well();
    c_star_ = tune_to_resonance(base, {0.1, 20.0}, 1e-10).coupling;
    resonant_ = new ThresholdData(build_threshold(base.scaled(c_star_)));
    weak_ = new ThresholdData(build_threshold(base.scaled(1e-3)));
    bump_ = new ThresholdData(build_threshold(bump()));
  }
  static void TearDownTestSuite() {
    delete resonant_;
    delete weak_;
    delete bump_;
  }

  static inline double c_star_ = 0.0;
  static inline ThresholdData* resonant_ = nullptr;
  static inline ThresholdData* weak_ = nullptr;
  static inline ThresholdData* bump_ = nullptr;
};

TEST_F(ThresholdTest, ProjectionAlgebra) {
  for (const ThresholdData* td : {resonant_, weak_, bump_}) {
    const RealMatrix& P = td->P;
    const RealMatrix& Q = td->Q;
    const RealMatrix& S1 = td->S1;
    EXPECT_LE((P * P - P).operatorNorm(), 1e-12);
    EXPECT_LE((Q * Q - Q).operatorNorm(), 1e-12);
    EXPECT_LE((P * Q).operatorNorm(), 1e-12);
    EXPECT_LE((P - P.transpose()).operatorNorm(), 1e-12);
    EXPECT_NEAR(P.trace(), 1.0, 1e-12);
    EXPECT_LE((S1 * Q - S1).operatorNorm(), 1e-12);
    EXPECT_LE((Q * S1 - S1).operatorNorm(), 1e-12);
    EXPECT_LE((S1 * P).operatorNorm(), 1e-12);
    EXPECT_LE((S1 * S1 - S1).operatorNorm(), 1e-12);
    EXPECT_LE((S1 - S1.transpose()).operatorNorm(), 1e-12);
    EXPECT_LE((S1 * td->vt).norm(), 1e-10 * td->vt.norm());
    EXPECT_LE((S1 * td->D0 - S1).operatorNorm(), 1e-10);
    EXPECT_LE((td->D0 * S1 - S1).operatorNorm(), 1e-10);
    EXPECT_LE((td->T - td->T.transpose()).operatorNorm(), 1e-12 * td->T.operatorNorm());
    EXPECT_NEAR(td->vt.squaredNorm(), td->norm_V_L1, 1e-12 * td->norm_V_L1);
  }
}

TEST_F(ThresholdTest, Classification) {
  EXPECT_EQ(weak_->classification, Classification::Regular);
  EXPECT_EQ(weak_->rank_S1, 0);
  EXPECT_GT(std::abs(weak_->qtq_eigenvalues(0)), weak_->ker_tol);
  EXPECT_EQ(bump_->classification, Classification::Regular);

  EXPECT_EQ(resonant_->classification, Classification::FirstKind);
  EXPECT_GE(resonant_->rank_S1, 1);
  EXPECT_LE(resonant_->rank_S1, 4);
  Eigen::JacobiSVD<RealMatrix> svd(resonant_->T1);
  EXPECT_GT(svd.singularValues().minCoeff(), 1e-6 * svd.singularValues().maxCoeff());
  // D0 inverts QTQ off the kernel.
  const RealMatrix& Q = resonant_->Q;
  const RealMatrix off = Q - resonant_->S1;
  EXPECT_LE((resonant_->D0 * (Q * resonant_->T * Q) - off).operatorNorm(), 1e-8);
}

TEST_F(ThresholdTest, FaultInjectedKernelToleranceBreaksProjectionIdentity) {
  // The resonant kernel is separated by a wide gap, so corrupt a regular threshold instead.
  const ThresholdData broken = build_threshold(bump(), 1e3);
  EXPECT_GT(broken.rank_S1, 0);
  EXPECT_GT((broken.S1 * broken.D0 - broken.S1).operatorNorm(), 1e-6);
}

TEST_F(ThresholdTest, MSymmetries) {
  for (double lambda : {1e-3, 0.3, 7.0}) {
    const ComplexMatrix Mp = assemble_M(*resonant_, lambda, Branch::plus);
    const ComplexMatrix Mm = assemble_M(*resonant_, lambda, Branch::minus);
    EXPECT_LE((Mm - Mp.conjugate()).norm(), 1e-14 * Mp.norm());
    EXPECT_LE((Mp - Mp.transpose()).norm(), 1e-12 * Mp.norm());
  }
}

TEST_F(ThresholdTest, MLowEnergyExpansionHasSlopeOne) {
  for (Branch b : {Branch::plus, Branch::minus}) {
    auto residual = [&](double lambda) {
      const ComplexMatrix M = assemble_M(*resonant_, lambda, b);
      const ComplexMatrix lead = (EC::a(b) * resonant_->norm_V_L1 / lambda) *
                                     resonant_->P.cast<cplx>() +
                                 resonant_->T.cast<cplx>();
      return (M - lead).norm();
    };
    EXPECT_NEAR(slope(1e-3, residual(1e-3), 1e-2, residual(1e-2)), 1.0, 0.1);
  }
}

TEST_F(ThresholdTest, DirectInverse) {
  const ComplexMatrix I = ComplexMatrix::Identity(5, 5);
  EXPECT_LE((invert_M_direct(I).matrix - I).norm(), 1e-15);

  std::mt19937 gen(7);
  std::normal_distribution<double> n01;
  ComplexMatrix A(40, 40);
  for (Eigen::Index i = 0; i < 40; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) A(i, j) = A(j, i) = cplx(n01(gen), n01(gen));
  A += 20.0 * ComplexMatrix::Identity(40, 40);
  const MInverse inv = invert_M_direct(A);
  EXPECT_LE((A * inv.matrix - ComplexMatrix::Identity(40, 40)).norm() / std::sqrt(40.0), 1e-12);
  EXPECT_GT(inv.condition_estimate, 1.0);

  ComplexMatrix singular = ComplexMatrix::Ones(4, 4);
  EXPECT_THROW(invert_M_direct(singular), NearSingularError);
}

TEST_F(ThresholdTest, InverseNormGrowsLikeOneOverLambdaAtResonance) {
  auto inv_norm = [&](double lambda) {
    Eigen::JacobiSVD<ComplexMatrix> svd(assemble_M(*resonant_, lambda, Branch::plus));
    return 1.0 / svd.singularValues().minCoeff();
  };
  EXPECT_NEAR(slope(1e-4, inv_norm(1e-4), 1e-2, inv_norm(1e-2)), -1.0, 0.2);
}

TEST_F(ThresholdTest, JensenNenciuMatchesDirect) {
  for (double lambda : {1e-3, 0.1}) {
    const MInverse jn = invert_M_jensen_nenciu(*weak_, lambda, Branch::plus);
    const MInverse direct = invert_M(*weak_, lambda, Branch::plus);
    EXPECT_LE((jn.matrix - direct.matrix).norm(), 1e-12 * direct.matrix.norm());
  }
  {
    const MInverse jn = invert_M_jensen_nenciu(*resonant_, 1e-3, Branch::plus);
    const MInverse direct = invert_M(*resonant_, 1e-3, Branch::plus);
    EXPECT_EQ(jn.method, InverseMethod::jensen_nenciu);
    EXPECT_LE((jn.matrix - direct.matrix).norm(), 1e-10 * direct.matrix.norm());
  }
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> logl(-3.0, 0.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double lambda = std::pow(10.0, logl(gen));
    const Branch b = k % 2 ? Branch::minus : Branch::plus;
    const ComplexMatrix jn = invert_M_jensen_nenciu(*resonant_, lambda, b).matrix;
    const ComplexMatrix direct = invert_M(*resonant_, lambda, b).matrix;
    worst = std::max(worst, (jn - direct).norm() / direct.norm());
  }
  EXPECT_LE(worst, 1e-9);
}

TEST_F(ThresholdTest, JensenNenciuPoleOfBInverse) {
  for (Branch b : {Branch::plus, Branch::minus}) {
    const ComplexMatrix limit = -EC::a(b) * resonant_->norm_V_L1 * resonant_->T1.inverse().cast<cplx>();
    auto err = [&](double lambda) {
      const ComplexMatrix Binv = jensen_nenciu_B(*resonant_, lambda, b).inverse();
      return (lambda * Binv - limit).norm() / limit.norm();
    };
    EXPECT_LT(err(1e-4), 1e-3);
    EXPECT_LT(err(1e-4), err(1e-2));
  }
}

TEST_F(ThresholdTest, AInverseStructure) {
  for (const ThresholdData* td : {weak_, resonant_}) {
    const RealMatrix QD0Q = td->Q * td->D0 * td->Q;
    const RealMatrix S = td->P - td->P * td->T * QD0Q - QD0Q * td->T * td->P +
                         QD0Q * td->T * td->P * td->T * QD0Q;
    EXPECT_LE((S - td->S_op).operatorNorm(), 1e-10 * S.operatorNorm());
    const double c_oracle =
        (td->vt.dot(td->T * td->vt) - td->vt.dot(td->T * td->D0 * td->T * td->vt)) / td->norm_V_L1;
    for (Branch b : {Branch::plus, Branch::minus})
      for (double lambda : {1e-3, 1e-2, 1e-1}) {
        const AInverse ai = A_inverse(*td, lambda, b);
        const ComplexMatrix formula = QD0Q.cast<cplx>() + ai.g * S.cast<cplx>();
        EXPECT_LE((ai.matrix - formula).norm(), 1e-10 * ai.matrix.norm());
        EXPECT_LE(std::abs(ai.c.imag()), 1e-10 * std::abs(ai.c));
        EXPECT_NEAR(ai.c.real(), c_oracle, 1e-8 * std::abs(c_oracle));
      }
    const AInverse tiny = A_inverse(*td, 1e-7, Branch::plus);
    EXPECT_LE(std::abs(tiny.g / 1e-7 * EC::a_plus * td->norm_V_L1 - 1.0), 1e-5);
    EXPECT_NEAR(extract_c(*td), c_oracle, 1e-8 * std::abs(c_oracle));
  }
}

TEST_F(ThresholdTest, PlusMinusSymmetry) {
  EXPECT_EQ(EC::a_plus * EC::a1_plus, EC::a_minus * EC::a1_minus);
  for (const ThresholdData* td : {resonant_, weak_}) {
    EXPECT_LE((td->FL_minus - td->FL_plus.conjugate()).norm(), 1e-14 * td->FL_plus.norm());
    EXPECT_LE((td->FR_minus - td->FR_plus.conjugate()).norm(), 1e-14 * td->FR_plus.norm());
  }
  const auto pts = standard_test_points(0.1);
  const ComplexMatrix Cp = build_C_minus1(*resonant_, Branch::plus, pts, pts);
  const ComplexMatrix Cm = build_C_minus1(*resonant_, Branch::minus, pts, pts);
  EXPECT_LE((Cm - Cp.conjugate()).norm(), 1e-12 * Cp.norm());
}

TEST_F(ThresholdTest, CMinus1RankAndDomain) {
  const auto pts = random_points(60, 0.5, 3);
  const ComplexMatrix C = build_C_minus1(*resonant_, Branch::plus, pts, pts);
  EXPECT_LE(numerical_rank(C), resonant_->rank_S1);
  EXPECT_GT(C.norm(), 0.0);
  EXPECT_THROW(build_C_minus1(*weak_, Branch::plus, pts, pts), DomainError);
  EXPECT_THROW(build_F_t(*weak_, 2.0, Cutoff(1.25), pts, pts), DomainError);
  EXPECT_THROW(build_F_t(*resonant_, 0.5, Cutoff(1.25), pts, pts), DomainError);
}

TEST_F(ThresholdTest, ResolventPoleMatchesCMinus1) {
  const auto pts = standard_test_points(0.1);
  for (Branch b : {Branch::plus, Branch::minus}) {
    const ComplexMatrix C = build_C_minus1(*resonant_, b, pts, pts);
    const ComplexMatrix lead = EC::a(b) * resonant_->norm_V_L1 * C;
    auto ratio_err = [&](double lambda) {
      const ComplexMatrix R = perturbed_resolvent_block(resonant_, lambda, b, pts, pts).value;
      return (lambda * R - lead).cwiseAbs().cwiseQuotient(lead.cwiseAbs()).maxCoeff();
    };
    EXPECT_LE(ratio_err(1e-3), 0.02);
    EXPECT_LE(ratio_err(1e-4), 0.02);
  }
  const ComplexMatrix pole = pole_difference(*resonant_, pts, pts);
  auto diff_err = [&](double lambda) {
    const ComplexMatrix Rp = perturbed_resolvent_block(resonant_, lambda, Branch::plus, pts, pts).value;
    const ComplexMatrix Rm = perturbed_resolvent_block(resonant_, lambda, Branch::minus, pts, pts).value;
    return (lambda * (Rp - Rm) - pole).cwiseAbs().cwiseQuotient(pole.cwiseAbs()).maxCoeff();
  };
  EXPECT_LE(diff_err(1e-4), 0.02);
}

TEST_F(ThresholdTest, FtRankSymmetryAndDecay) {
  const Cutoff cutoff(1.25);
  const auto pts = random_points(40, 0.5, 5);
  std::vector<std::pair<double, double>> sup;
  for (double t : geometric_grid(1.0, 1000.0, 10)) {
    const ComplexMatrix F = build_F_t(*resonant_, t, cutoff, pts, pts);
    EXPECT_LE(numerical_rank(F), 4);
    sup.emplace_back(t, F.cwiseAbs().maxCoeff());
  }
  EXPECT_NEAR(fit_decay(sup).exponent, 0.75, 0.05);

  const auto xs = random_points(100, 0.5, 8);
  const auto ys = random_points(100, 0.5, 9);
  const ComplexMatrix Fxy = build_F_t(*resonant_, 3.0, cutoff, xs, ys);
  const ComplexMatrix Fyx = build_F_t(*resonant_, 3.0, cutoff, ys, xs);
  for (int i = 0; i < 100; ++i)
    EXPECT_LE(std::abs(Fxy(i, i) - Fyx(i, i)), 1e-10 * std::abs(Fxy(i, i)));
}

TEST_F(ThresholdTest, EmbeddedScan) {
  const auto lambdas = geometric_grid(0.05, 40.0, 80);
  EXPECT_TRUE(embedded_eigenvalue_scan(*bump_, lambdas).clean());

  // Born regime: ||v R0 v|| < 1 everywhere on the grid, so no dips.
  for (double l : lambdas) {
    const ComplexMatrix M = assemble_M(*weak_, l, Branch::plus);
    const ComplexMatrix born = M - weak_->U.asDiagonal().toDenseMatrix().cast<cplx>();
    EXPECT_LT(born.operatorNorm(), 1.0);
  }
  const EmbeddedScan weak = embedded_eigenvalue_scan(*weak_, lambdas);
  EXPECT_TRUE(weak.clean());

  // Weyl: adjacent sigma_min values differ by at most ||M(l1) - M(l2)||.
  const EmbeddedScan scan = embedded_eigenvalue_scan(*bump_, lambdas);
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    const double dM = (assemble_M(*bump_, lambdas[k], Branch::plus) -
                       assemble_M(*bump_, lambdas[k - 1], Branch::plus))
                          .operatorNorm();
    EXPECT_LE(std::abs(scan.sigma_min[k] - scan.sigma_min[k - 1]), dM * (1 + 1e-8));
  }
}

TEST_F(ThresholdTest, BoundStateCount) {
  EXPECT_EQ(bound_state_count(*bump_, 1e-2), 0);
  EXPECT_GE(bound_state_count(*resonant_, 1e-2), 1);
}

TEST_F(ThresholdTest, InverseCacheIsSharedAcrossThreads) {
  MInverseCache cache(*resonant_);
  std::vector<std::shared_ptr<const MInverse>> got(4);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i)
    threads.emplace_back([&, i] { got[i] = cache.get(0.2, Branch::plus); });
  for (auto& th : threads) th.join();
  EXPECT_EQ(cache.size(), 1u);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(got[i], got[0]);
  const ComplexMatrix direct = invert_M(*resonant_, 0.2, Branch::plus).matrix;
  EXPECT_LE((got[0]->matrix - direct).norm(), 1e-9 * direct.norm());
}
