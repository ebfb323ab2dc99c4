#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "ndg/assembly.hpp"
#include "ndg/linsolve.hpp"

using namespace ndg;

namespace {

MeshPtr share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

FormParams linear_params(double eps = 1.0, double c_sigma = 10.0) {
  FormParams fp;
  fp.eps = eps;
  fp.c_sigma = c_sigma;
  fp.f = [](Point, double) { return 0.0; };
  fp.df = [](Point, double) { return 0.0; };
  return fp;
}

FormParams bratu_params(double eps = 1.0) {
  FormParams fp;
  fp.eps = eps;
  fp.f = [](Point, double u) { return std::exp(u) + u; };
  fp.df = [](Point, double u) { return std::exp(u) + 1.0; };
  return fp;
}

Mesh mixed_mesh() {
  Mesh m = create_rect_mesh({0, 1, 0, 1}, 4, 4, 1);
  m = increment_degrees(m, std::vector<int>{5, 6, 9}, true);
  m = increment_degrees(m, std::vector<int>{5}, true);
  m = refine_elements(m, std::vector<int>{0, 15});
  return m;
}

DgFunction random_function(const MeshPtr& mesh, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd c(DofMap(*mesh).total);
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = n(rng);
  return DgFunction(mesh, c);
}

double max_abs(const SparseMatrix& m) { return m.nonZeros() ? m.coeffs().cwiseAbs().maxCoeff() : 0.0; }

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

}  // namespace

TEST(Jacobian, SingleElementConstantModeDiagonal) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 1, 1, 1));
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), linear_params()).matrix;
  EXPECT_NEAR(a.coeff(0, 0), 41.0, 1e-12);
}

TEST(Jacobian, SymmetricForSipgWithZeroReaction) {
  const auto mesh = share(mixed_mesh());
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), linear_params(0.2)).matrix;
  EXPECT_LE(max_abs(a - SparseMatrix(a.transpose())), 1e-10 * max_abs(a));
}

TEST(Jacobian, SymmetricForSipgAtAnyIterate) {
  const auto mesh = share(mixed_mesh());
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const SparseMatrix a = assemble_jacobian(random_function(mesh, seed, 0.3), bratu_params(0.5)).matrix;
    EXPECT_LE(max_abs(a - SparseMatrix(a.transpose())), 1e-10 * max_abs(a));
  }
}

TEST(Jacobian, NonsymmetricVariantsAreNot) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 2));
  FormParams fp = linear_params();
  fp.theta = -1.0;
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), fp).matrix;
  EXPECT_GT(max_abs(a - SparseMatrix(a.transpose())), 1e-3);
}

TEST(Jacobian, SymmetricSparsityPattern) {
  const auto mesh = share(mixed_mesh());
  FormParams fp = linear_params();
  fp.theta = 0.0;
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), fp).matrix;
  std::set<std::pair<int, int>> nz;
  for (int r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) nz.insert({static_cast<int>(it.row()), static_cast<int>(it.col())});
  for (const auto& [r, c] : nz) EXPECT_TRUE(nz.contains({c, r}));
}

TEST(Jacobian, TogglingEdgeTermsLeavesBlockDiagonalMassStiffness) {
  const auto mesh = share(create_rect_mesh({0, 2, 0, 1}, 2, 1, 2));
  const int nb = 9;
  const SparseMatrix full = assemble_jacobian(DgFunction(mesh), linear_params()).matrix;
  EXPECT_GT(dense(full).block(0, nb, nb, nb).cwiseAbs().maxCoeff(), 1e-3);

  FormParams fp = linear_params(1.0, 0.0);
  fp.flux_terms = false;
  const Eigen::MatrixXd a = dense(assemble_jacobian(DgFunction(mesh), fp).matrix);
  EXPECT_LE(a.block(0, nb, nb, nb).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(a.block(nb, 0, nb, nb).cwiseAbs().maxCoeff(), 1e-14);
  // Unit squares: mass = I, stiffness = sum of 1D stiffness tensors.
  const VolumeTable& vt = volume_table(2, 8);
  const Eigen::MatrixXd k = vt.basis.dx.transpose() * vt.weights.asDiagonal() * vt.basis.dx +
                            vt.basis.dy.transpose() * vt.weights.asDiagonal() * vt.basis.dy;
  const Eigen::MatrixXd expect = Eigen::MatrixXd::Identity(nb, nb) + k;
  EXPECT_LE((a.block(0, 0, nb, nb) - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.block(nb, nb, nb, nb) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jacobian, PenaltyRaisesTheSpectrum) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 1));
  auto penalty_part = [&](double c) {
    FormParams with = linear_params(1.0, c), without = linear_params(1.0, 0.0);
    return Eigen::MatrixXd(dense(assemble_jacobian(DgFunction(mesh), with).matrix) -
                           dense(assemble_jacobian(DgFunction(mesh), without).matrix));
  };
  double prev_min = -1.0;
  for (double c : {5.0, 10.0, 20.0}) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(penalty_part(c)).eigenvalues();
    const Eigen::VectorXd full = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                     dense(assemble_jacobian(DgFunction(mesh), linear_params(1.0, c)).matrix))
                                     .eigenvalues();
    EXPECT_GE(ev.minCoeff(), -1e-10);
    EXPECT_GT(full.minCoeff(), prev_min);
    prev_min = full.minCoeff();
  }
  // Its nonzero eigenvalues scale linearly with C_sigma.
  const Eigen::VectorXd e10 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(penalty_part(10.0)).eigenvalues();
  const Eigen::VectorXd e20 = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(penalty_part(20.0)).eigenvalues();
  EXPECT_GT(e20.maxCoeff(), e10.maxCoeff());
  EXPECT_LE((e20 - 2.0 * e10).cwiseAbs().maxCoeff(), 1e-9 * e20.maxCoeff());
}

TEST(Jacobian, DiscreteCoercivity) {
  Mesh m = create_rect_mesh({0, 1, 0, 1}, 4, 4, 1);
  m = increment_degrees(m, std::vector<int>{1, 2, 6}, true);
  m = increment_degrees(m, std::vector<int>{6}, true);
  const auto mesh = share(m);
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), linear_params(1.0, 10.0)).matrix;
  std::mt19937 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd v(a.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n(rng);
    EXPECT_GT(v.dot(a * v), 0.0);
  }
}

TEST(Jacobian, ReactionBlockIsStableUnderQuadratureRefinement) {
  // f' = u is a polynomial in u; doubling the points must not change the block.
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 3));
  FormParams fp = linear_params();
  fp.f = [](Point, double u) { return 0.5 * u * u; };
  fp.df = [](Point, double u) { return u; };
  const DgFunction u = random_function(mesh, 5);
  const DgOperator op(mesh, fp);
  const Eigen::MatrixXd reaction = dense(op.jacobian(u).matrix - op.linear_part());
  const VolumeTable& vt = volume_table(3, 2 * volume_points(3));
  const int nb = 16;
  for (int k = 0; k < 4; ++k) {
    const double area = mesh->elements[mesh->leaves()[k]].rect.area();
    const Eigen::VectorXd uq = vt.basis.value * u.block(k);
    const Eigen::MatrixXd oracle =
        -area * vt.basis.value.transpose() * (vt.weights.cwiseProduct(uq)).asDiagonal() * vt.basis.value;
    EXPECT_LE((reaction.block(k * nb, k * nb, nb, nb) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Jacobian, OverflowNamesTheElement) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 1));
  DgFunction u(mesh);
  u.block(2)[0] = 1000.0;
  try {
    assemble_jacobian(u, bratu_params());
    FAIL() << "expected AssemblyError";
  } catch (const AssemblyError& e) {
    EXPECT_EQ(e.element(), mesh->leaves()[2]);
  }
  EXPECT_THROW(assemble_residual(u, bratu_params()), AssemblyError);
}

TEST(NewtonRhs, ZeroStepGivesZeroVector) {
  const auto mesh = share(mixed_mesh());
  EXPECT_EQ(assemble_newton_rhs(random_function(mesh, 3), 0.0, bratu_params()).norm(), 0.0);
}

TEST(NewtonRhs, AffineSourceIsScaledLoad) {
  const auto mesh = share(mixed_mesh());
  FormParams fp = linear_params();
  fp.f = [](Point x, double) { return std::sin(3.0 * x.x) + x.y; };
  const DgFunction u = random_function(mesh, 4);
  const DgOperator op(mesh, fp);
  EXPECT_LE((op.newton_rhs(u, 0.37) - 0.37 * op.load(u)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(NewtonRhs, BratuAtZeroHitsConstantModesOnly) {
  const auto mesh = share(mixed_mesh());
  const DgFunction zero(mesh);
  const Eigen::VectorXd b = assemble_newton_rhs(zero, 0.5, bratu_params());
  for (std::size_t k = 0; k < mesh->leaves().size(); ++k) {
    const double area = mesh->elements[mesh->leaves()[k]].rect.area();
    const int off = zero.dofs().offset[k];
    EXPECT_NEAR(b[off], 0.5 * area, 1e-14);
    for (int a = 1; a < zero.dofs().size[k]; ++a) EXPECT_NEAR(b[off + a], 0.0, 1e-14);
  }
}

TEST(Residual, ZeroAtZeroWhenSourceVanishes) {
  const auto mesh = share(mixed_mesh());
  FormParams fp = linear_params();
  fp.f = [](Point, double u) { return 2.0 * u - u * u * u; };
  EXPECT_EQ(assemble_residual(DgFunction(mesh), fp).norm(), 0.0);
}

TEST(Residual, AffineIdentityAndDiscreteSolution) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 4, 4, 2));
  FormParams fp = linear_params(0.7);
  fp.f = [](Point x, double) { return 1.0 + x.x * x.y; };
  const DgOperator op(mesh, fp);
  const DgFunction u = random_function(mesh, 6);
  const Eigen::VectorXd r = op.residual(u);
  const Eigen::VectorXd identity = op.jacobian(u).matrix * u.coefficients() - op.newton_rhs(u, 1.0);
  EXPECT_LE((r - identity).cwiseAbs().maxCoeff(), 1e-12);

  const SolveReport sol = solve(op.jacobian(u), op.newton_rhs(u, 1.0));
  const DgFunction uh(mesh, sol.solution);
  EXPECT_LE(op.residual(uh).norm(), 1e-8);
}

TEST(Residual, NonlinearIdentity) {
  // r(u) = A(u) u - b(u, 1) holds for any f since A(u) carries -f'(u).
  const auto mesh = share(mixed_mesh());
  const DgOperator op(mesh, bratu_params(0.4));
  const DgFunction u = random_function(mesh, 8, 0.2);
  const Eigen::VectorXd lhs = op.residual(u);
  const Eigen::VectorXd rhs = op.jacobian(u).matrix * u.coefficients() - op.newton_rhs(u, 1.0);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));
}

TEST(Lifting, VanishesForGlobalPolynomials) {
  const auto mesh = share(mixed_mesh());
  const DgFunction u = project(mesh, [](Point x) { return x.x + 0.5 * x.y; });
  EXPECT_LE(lifting(u).coefficients().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lifting, KinkIsSeenOnlyByItsTwoElements) {
  const auto mesh = share(create_rect_mesh({0, 3, 0, 1}, 3, 1, 1));
  // Continuous, with a gradient kink at x = 1 only.
  const DgFunction u = project(mesh, [](Point x) { return x.x < 1.0 ? x.x : 1.0 + 2.0 * (x.x - 1.0); });
  const DgFunction l = lifting(u);
  EXPECT_GT(l.block(0).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_GT(l.block(1).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE(l.block(2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lifting, TwoUnitElementsConstantModes) {
  const auto mesh = share(create_rect_mesh({0, 2, 0, 1}, 2, 1, 1));
  const DgFunction u = project(mesh, [](Point x) { return x.x < 1.0 ? x.x : 2.0 * x.x; });
  const DgFunction l = lifting(u);
  EXPECT_NEAR(std::abs(l.block(0)[0]), 0.5, 1e-12);
  EXPECT_NEAR(std::abs(l.block(1)[0]), 0.5, 1e-12);
}

TEST(MatrixDump, OneLinePerNonzero) {
  const auto mesh = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 1));
  const SparseMatrix a = assemble_jacobian(DgFunction(mesh), linear_params()).matrix;
  std::ostringstream os;
  write_matrix_coo(a, os);
  std::istringstream in(os.str());
  std::string line;
  long n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, a.nonZeros());
}

TEST(DgOperator, RejectsFunctionsFromAnotherMesh) {
  const auto a = share(create_rect_mesh({0, 1, 0, 1}, 2, 2, 1));
  const auto b = share(create_rect_mesh({0, 1, 0, 1}, 3, 3, 1));
  const DgOperator op(a, linear_params());
  EXPECT_THROW(op.residual(DgFunction(b)), std::invalid_argument);
}
