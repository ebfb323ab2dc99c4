#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ndg/assembly.hpp"
#include "ndg/linsolve.hpp"

using namespace ndg;

namespace {

SparseSystem from_dense(const Eigen::MatrixXd& d) { return {d.sparseView()}; }

SparseSystem dg_system(double df_value) {
  auto mesh = std::make_shared<const Mesh>(create_rect_mesh({0, 1, 0, 1}, 4, 4, 2));
  FormParams fp;
  fp.eps = 0.1;
  fp.f = [df_value](Point, double u) { return df_value * u + 1.0; };
  fp.df = [df_value](Point, double) { return df_value; };
  return assemble_jacobian(DgFunction(mesh), fp);
}

}  // namespace

TEST(Solve, IdentitySystem) {
  const SparseSystem s = from_dense(Eigen::MatrixXd::Identity(5, 5));
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(5);
  e1[0] = 1.0;
  const SolveReport r = solve(s, e1);
  EXPECT_LE((r.solution - e1).norm(), 1e-14);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Solve, TwoByTwo) {
  Eigen::MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  const SolveReport r = solve(from_dense(a), Eigen::Vector2d(3, 3));
  EXPECT_NEAR(r.solution[0], 1.0, 1e-14);
  EXPECT_NEAR(r.solution[1], 1.0, 1e-14);
  EXPECT_LE(r.residual, 1e-10);
}

TEST(Solve, ZeroAndEmptyRightHandSides) {
  const SparseSystem s = from_dense(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_EQ(solve(s, Eigen::VectorXd::Zero(3)).solution.norm(), 0.0);
  const SparseSystem empty{SparseMatrix(0, 0)};
  EXPECT_EQ(solve(empty, Eigen::VectorXd()).solution.size(), 0);
}

TEST(Solve, ShapeMismatchIsRejected) {
  const SparseSystem s = from_dense(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW(solve(s, Eigen::VectorXd::Ones(4)), std::invalid_argument);
  const SparseSystem rect{Eigen::MatrixXd::Ones(2, 3).sparseView()};
  EXPECT_THROW(solve(rect, Eigen::VectorXd::Ones(2)), std::invalid_argument);
}

TEST(Solve, SingularMatrixIsAStructuredFailure) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  EXPECT_THROW(solve(from_dense(a), Eigen::Vector3d(1, 2, 3)), SolveError);
}

TEST(Solve, IndefiniteDgLinearisation) {
  // A large f' makes the reaction term negative and the matrix indefinite.
  const SparseSystem s = dg_system(7.3);
  std::mt19937 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd b(s.matrix.rows());
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n(rng);
  for (SolveMethod m : {SolveMethod::direct, SolveMethod::automatic}) {
    SolverOptions opt;
    opt.method = m;
    const SolveReport r = solve(s, b, opt);
    EXPECT_LE(r.residual, opt.tol);
    EXPECT_LE(detail::relative_residual(s.matrix, r.solution, b), opt.tol);
  }
}

TEST(Solve, NonsymmetricSystem) {
  auto mesh = std::make_shared<const Mesh>(create_rect_mesh({0, 1, 0, 1}, 3, 3, 2));
  FormParams fp;
  fp.theta = -1.0;
  fp.f = [](Point, double) { return 1.0; };
  fp.df = [](Point, double) { return 0.0; };
  const SparseSystem s = assemble_jacobian(DgFunction(mesh), fp);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(s.matrix.rows(), -1.0, 2.0);
  EXPECT_LE(solve(s, b).residual, 1e-10);
}

TEST(Solve, KrylovPathOnDgSystem) {
  const SparseSystem s = dg_system(0.0);
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(s.matrix.rows());
  SolverOptions opt;
  opt.method = SolveMethod::gmres;
  const SolveReport r = solve(s, b, opt);
  EXPECT_EQ(r.method, "gmres-ilut");
  EXPECT_LE(r.residual, opt.tol);
  const SolveReport d = solve(s, b);
  EXPECT_LE((r.solution - d.solution).norm(), 1e-8 * d.solution.norm());
}

TEST(Solve, AutomaticSwitchesToKrylovAboveThreshold) {
  const SparseSystem s = dg_system(0.0);
  SolverOptions opt;
  opt.krylov_threshold = 10;
  EXPECT_EQ(solve(s, Eigen::VectorXd::Ones(s.matrix.rows()), opt).method, "gmres-ilut");
}

TEST(Solve, ReportsBackwardError) {
  const SparseSystem s = dg_system(1.0);
  const Eigen::VectorXd b = Eigen::VectorXd::Ones(s.matrix.rows());
  const SolveReport r = solve(s, b);
  EXPECT_NEAR(r.backward_error, detail::backward_error(s.matrix, r.solution, b), 1e-300);
  EXPECT_LE(r.backward_error, 1e-13);
}

TEST(Solve, ReproducesTheDiscreteSolution) {
  auto mesh = std::make_shared<const Mesh>(create_rect_mesh({0, 1, 0, 1}, 4, 4, 2));
  FormParams fp;
  fp.f = [](Point x, double) { return x.x * (1 - x.y); };
  fp.df = [](Point, double) { return 0.0; };
  const DgOperator op(mesh, fp);
  const DgFunction zero(mesh);
  const SolveReport r = solve(op.jacobian(zero), op.newton_rhs(zero, 1.0));
  EXPECT_LE(op.residual(DgFunction(mesh, r.solution)).norm(), 1e-8);
}

TEST(SolveHelpers, ScientificFormatting) {
  EXPECT_EQ(detail::sci(2.5e-11), "2.500e-11");
}
