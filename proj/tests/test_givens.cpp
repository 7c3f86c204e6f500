#include <gtest/gtest.h>

#include <numbers>

#include <sobi/givens.hpp>

#include "test_support.hpp"

using namespace sobi;

TEST(Off, Definition) {
  EXPECT_EQ(off(RealMatrix::Identity(7, 7)), 0.0);
  RealMatrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_EQ(off(m), 13.0);
  EXPECT_THROW(off(RealMatrix::Ones(2, 3)), InvalidArgument);
}

TEST(Off, ZeroAfterExactDiagonalization) {
  Rng rng(1);
  const RealMatrix m = support::random_symmetric(5, rng);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(m);
  const RealMatrix v = es.eigenvectors();
  EXPECT_LT(off(v.transpose() * m * v), 1e-24 * m.squaredNorm());
}

TEST(JointDiagonalize, DiagonalSetIsFixedPoint) {
  std::vector<RealMatrix> set;
  set.push_back(RealVector::LinSpaced(4, 1, 4).asDiagonal());
  set.push_back(RealVector::LinSpaced(4, -2, 5).asDiagonal());
  const JadeResult r = joint_diagonalize(set);
  EXPECT_EQ(r.rotations_applied, 0);
  EXPECT_EQ(r.sweeps, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.final_off, 0.0);
  // Identity up to permutation (canonical order sorts by descending diagonal).
  EXPECT_EQ(r.U.cwiseAbs().colwise().sum(), RealMatrix::Ones(1, 4));
  EXPECT_EQ(r.U.cwiseAbs().rowwise().sum(), RealMatrix::Ones(4, 1));
}

TEST(JointDiagonalize, TwoByTwoRotatesByFortyFiveDegrees) {
  RealMatrix m(2, 2);
  m << 2, 1, 1, 2;
  const JadeResult r = joint_diagonalize(std::vector<RealMatrix>{m});
  EXPECT_EQ(r.rotations_applied, 1);
  const RealMatrix d = r.U.transpose() * m * r.U;
  EXPECT_NEAR(d(0, 0), 3.0, 1e-14);
  EXPECT_NEAR(d(1, 1), 1.0, 1e-14);
  const double h = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(r.U(0, 0)), h, 1e-15);
  EXPECT_NEAR(std::abs(r.U(1, 0)), h, 1e-15);
  EXPECT_NEAR(r.U(0, 0) * r.U(1, 0), 0.5, 1e-15);  // (1, 1)/√2
  EXPECT_NEAR(r.U(0, 1) * r.U(1, 1), -0.5, 1e-15); // (1, −1)/√2
}

TEST(JointDiagonalize, RecoversConjugatingMatrix) {
  Rng rng(2);
  for (Index n : {2, 3, 5, 8}) {
    const auto s = support::conjugated_set(n, 2, rng);
    // The default tol leaves residual angles up to 1e-8, i.e. off ~ 1e-16
    // relative; the 1e-18 floor needs a tighter stop.
    JacobiOptions opts;
    opts.tol = 1e-12;
    const JadeResult r = joint_diagonalize(s.matrices, opts);
    double norm2 = 0.0;
    for (const auto& m : s.matrices)
      norm2 += m.squaredNorm();
    EXPECT_LT(support::max_matched_column_angle(r.U, s.q0), 1e-6) << "n=" << n;
    EXPECT_LT(r.final_off, 1e-18 * norm2) << "n=" << n;
    EXPECT_LT(orthogonality_error(r.U), 1e-10);
  }
}

TEST(JointDiagonalize, EveryRotationDecreasesOffAndKeepsNorms) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<RealMatrix> set;
    for (int k = 0; k < 4; ++k)
      set.push_back(support::random_symmetric(6, rng));
    std::vector<double> norms;
    for (const auto& m : set)
      norms.push_back(m.squaredNorm());
    double previous = total_off(set);
    int rotations = 0;
    JacobiOptions opts;
    opts.on_rotation = [&](const std::vector<RealMatrix>& work) {
      const double now = total_off(work);
      EXPECT_LT(now, previous + 1e-14 * norms[0]);
      previous = now;
      for (std::size_t k = 0; k < work.size(); ++k)
        EXPECT_NEAR(work[k].squaredNorm(), norms[k], 1e-12 * norms[k]);
      ++rotations;
    };
    const JadeResult r = joint_diagonalize(set, opts);
    EXPECT_EQ(rotations, r.rotations_applied);
    for (std::size_t i = 1; i < r.off_history.size(); ++i)
      EXPECT_LE(r.off_history[i], r.off_history[i - 1] + 1e-13 * r.off_history.front());
    EXPECT_NEAR(r.off_history.back(), r.final_off, 1e-9 * r.off_history.front());
    EXPECT_LT(orthogonality_error(r.U), 1e-10);
  }
}

TEST(JointDiagonalize, PermutationEquivariance) {
  Rng rng(4);
  const auto s = support::conjugated_set(5, 3, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const RealMatrix p = perm.toDenseMatrix().cast<double>();
  std::vector<RealMatrix> permuted;
  for (const auto& m : s.matrices)
    permuted.push_back(p.transpose() * m * p);
  const JadeResult a = joint_diagonalize(s.matrices);
  const JadeResult b = joint_diagonalize(permuted);
  EXPECT_LT(support::max_matched_column_angle(p.transpose() * a.U, b.U), 1e-6);
}

TEST(JointDiagonalize, CanonicalOrderAndSigns) {
  Rng rng(5);
  const auto s = support::conjugated_set(6, 3, rng);
  const JadeResult r = joint_diagonalize(s.matrices);
  const RealVector d = (r.U.transpose() * s.matrices[0] * r.U).diagonal();
  for (Index i = 1; i < d.size(); ++i)
    EXPECT_GE(d(i - 1), d(i));
  for (Index j = 0; j < r.U.cols(); ++j) {
    Index k = 0;
    r.U.col(j).cwiseAbs().maxCoeff(&k);
    EXPECT_GT(r.U(k, j), 0.0);
  }
}

TEST(JointDiagonalize, RespectsSweepBudget) {
  Rng rng(6);
  std::vector<RealMatrix> set;
  for (int k = 0; k < 5; ++k)
    set.push_back(support::random_symmetric(8, rng));
  JacobiOptions opts;
  opts.max_sweeps = 1;
  const JadeResult r = joint_diagonalize(set, opts);
  EXPECT_EQ(r.sweeps, 1);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.off_history.size(), 2u);
  opts.max_sweeps = 0;
  EXPECT_THROW(joint_diagonalize(set, opts), InvalidArgument);
}

TEST(JointDiagonalize, RejectsBadInput) {
  RealMatrix a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(joint_diagonalize(std::vector<RealMatrix>{a}), InvalidArgument);
  EXPECT_THROW(joint_diagonalize(std::vector<RealMatrix>{RealMatrix::Identity(2, 2), RealMatrix::Identity(3, 3)}),
               InvalidArgument);
  EXPECT_THROW(joint_diagonalize(std::vector<RealMatrix>{}), InvalidArgument);
}
