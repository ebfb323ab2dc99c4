#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ndg/basis.hpp"

using namespace ndg;

TEST(GaussRule, OnePointRule) {
  const auto& r = gauss_rule(1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r.points[0], 0.0, 1e-15);
  EXPECT_NEAR(r.weights[0], 2.0, 1e-15);
}

TEST(GaussRule, TwoPointRule) {
  const auto& r = gauss_rule(2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r.points[0], -0.5773502692, 1e-10);
  EXPECT_NEAR(r.points[1], 0.5773502692, 1e-10);
  EXPECT_NEAR(r.weights[0], 1.0, 1e-14);
  EXPECT_NEAR(r.weights[1], 1.0, 1e-14);
}

TEST(GaussRule, ThreePointsIntegrateQuartic) {
  const auto& r = gauss_rule(3);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.points[i], 4);
  EXPECT_NEAR(s, 0.4, 1e-14);
}

TEST(GaussRule, RejectsOutOfRangeCounts) {
  EXPECT_THROW(gauss_rule(0), std::out_of_range);
  EXPECT_THROW(gauss_rule(65), std::out_of_range);
  EXPECT_NO_THROW(gauss_rule(64));
}

TEST(GaussRule, WeightsSumToTwoAndNodesAscend) {
  for (int n = 1; n <= 64; ++n) {
    const auto& r = gauss_rule(n);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_GT(r.weights[i], 0.0);
      if (i > 0) EXPECT_LT(r.points[i - 1], r.points[i]);
      s += r.weights[i];
    }
    EXPECT_NEAR(s, 2.0, 1e-13) << "n=" << n;
  }
}

TEST(GaussRule, ExactForRandomPolynomialsUpToDegree2nMinus1) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int n = 1; n <= 24; ++n) {
    const int deg = 2 * n - 1;
    std::vector<double> c(deg + 1);
    for (double& v : c) v = coef(rng);
    double exact = 0.0;
    for (int k = 0; k <= deg; k += 2) exact += 2.0 * c[k] / (k + 1);
    const auto& r = gauss_rule(n);
    double q = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double v = 0.0;
      for (int k = deg; k >= 0; --k) v = v * r.points[i] + c[k];
      q += r.weights[i] * v;
    }
    EXPECT_NEAR(q, exact, 1e-12 * std::max(1.0, std::abs(exact))) << "n=" << n;
  }
}

TEST(ReferenceBasis, FlatIndexing) {
  const ReferenceBasis b(3);
  EXPECT_EQ(b.size(), 16);
  EXPECT_EQ(b.index(2, 1), 9);
  EXPECT_EQ(b.multi_index(9), (std::array<int, 2>{2, 1}));
  EXPECT_THROW(ReferenceBasis(-1), std::invalid_argument);
}

TEST(ReferenceBasis, MassMatrixIsIdentity) {
  for (int p = 0; p <= 10; ++p) {
    const VolumeTable t = make_volume_table(p, p + 1);
    const Eigen::MatrixXd m = t.basis.value.transpose() * t.weights.asDiagonal() * t.basis.value;
    const double err = (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
    EXPECT_LE(err, 1e-12) << "p=" << p;
  }
}

TEST(EvalBasisVolume, ConstantModeHasZeroGradient) {
  const BasisTable t = eval_basis_volume(ReferenceBasis(0), {{0.1, 0.7}, {0.5, 0.5}, {1.0, 0.0}});
  for (int q = 0; q < 3; ++q) {
    EXPECT_DOUBLE_EQ(t.value(q, 0), 1.0);
    EXPECT_DOUBLE_EQ(t.dx(q, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.dy(q, 0), 0.0);
  }
}

TEST(EvalBasisVolume, LinearModeVanishesAtMidpoint) {
  const ReferenceBasis b(1);
  const BasisTable t = eval_basis_volume(b, {{0.5, 0.2}, {0.5, 0.9}});
  EXPECT_NEAR(t.value(0, b.index(1, 0)), 0.0, 1e-15);
  EXPECT_NEAR(t.value(1, b.index(1, 0)), 0.0, 1e-15);
}

TEST(EvalBasisVolume, QuadraticLegendreValue) {
  const ReferenceBasis b(2);
  const BasisTable t = eval_basis_volume(b, {{0.75, 0.3}});
  // L2 times L0 with L0 = 1.
  EXPECT_NEAR(t.value(0, b.index(2, 0)), std::sqrt(5.0) * (-0.125), 1e-14);
}

TEST(EvalBasisVolume, GradientsMatchFiniteDifferences) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-6;
  for (int p = 1; p <= 6; ++p) {
    const ReferenceBasis b(p);
    for (int k = 0; k < 5; ++k) {
      const RefPoint x{u(rng), u(rng)};
      const BasisTable t = eval_basis_volume(b, {x, {x.x + h, x.y}, {x.x - h, x.y}, {x.x, x.y + h}, {x.x, x.y - h}});
      for (int a = 0; a < b.size(); ++a) {
        const double fdx = (t.value(1, a) - t.value(2, a)) / (2 * h);
        const double fdy = (t.value(3, a) - t.value(4, a)) / (2 * h);
        const double scale = std::max(1.0, std::abs(t.dx(0, a)) + std::abs(t.dy(0, a)));
        EXPECT_NEAR(t.dx(0, a), fdx, 1e-6 * scale);
        EXPECT_NEAR(t.dy(0, a), fdy, 1e-6 * scale);
      }
    }
  }
}

TEST(EvalBasisVolume, SecondDerivativesMatchFiniteDifferences) {
  const double h = 1e-4;
  const ReferenceBasis b(5);
  const RefPoint x{0.37, 0.61};
  const BasisTable t = eval_basis_volume(b, {x, {x.x + h, x.y}, {x.x - h, x.y}, {x.x, x.y + h}, {x.x, x.y - h}});
  for (int a = 0; a < b.size(); ++a) {
    const double fxx = (t.dx(1, a) - t.dx(2, a)) / (2 * h);
    const double fyy = (t.dy(3, a) - t.dy(4, a)) / (2 * h);
    EXPECT_NEAR(t.dxx(0, a), fxx, 1e-5 * std::max(1.0, std::abs(fxx)));
    EXPECT_NEAR(t.dyy(0, a), fyy, 1e-5 * std::max(1.0, std::abs(fyy)));
  }
}

TEST(EvalBasisEdge, ConstantModeTrace) {
  const ReferenceBasis b(2);
  for (Face f : {Face::left, Face::right, Face::bottom, Face::top}) {
    const TraceTable t = eval_basis_edge(b, f, {0.0, 0.3, 1.0});
    for (int q = 0; q < 3; ++q) {
      EXPECT_DOUBLE_EQ(t.value(q, 0), 1.0);
      EXPECT_DOUBLE_EQ(t.normal(q, 0), 0.0);
    }
  }
}

TEST(EvalBasisEdge, LinearModeOnLeftFace) {
  const ReferenceBasis b(1);
  const TraceTable t = eval_basis_edge(b, Face::left, {0.0, 0.25, 0.8});
  for (int q = 0; q < 3; ++q) {
    EXPECT_NEAR(t.value(q, b.index(1, 0)), -std::sqrt(3.0), 1e-14);
    // Outward normal (-1, 0) against d/dx of sqrt(3)(2x-1).
    EXPECT_NEAR(t.normal(q, b.index(1, 0)), -2.0 * std::sqrt(3.0), 1e-14);
  }
}

TEST(EvalBasisEdge, FacePointsMapOntoTheSquareBoundary) {
  EXPECT_DOUBLE_EQ(face_point(Face::right, 0.4).x, 1.0);
  EXPECT_DOUBLE_EQ(face_point(Face::right, 0.4).y, 0.4);
  EXPECT_DOUBLE_EQ(face_point(Face::bottom, 0.4).y, 0.0);
  EXPECT_DOUBLE_EQ(face_point(Face::top, 0.4).x, 0.4);
  EXPECT_EQ(outward_normal(Face::bottom), (std::array<double, 2>{0.0, -1.0}));
}

TEST(VolumeTable, WeightsSumToReferenceArea) {
  for (int p : {1, 4, 9}) {
    const VolumeTable& t = volume_table(p, volume_points(p));
    EXPECT_NEAR(t.weights.sum(), 1.0, 1e-14);
    EXPECT_EQ(t.points_per_dir, p + 3);
    EXPECT_EQ(&t, &volume_table(p, volume_points(p)));
  }
}
