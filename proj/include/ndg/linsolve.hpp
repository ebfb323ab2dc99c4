#pragma once

// Sparse linear solves for the Newton systems. Direct LU (UMFPACK when
// available, Eigen's SparseLU otherwise); restarted GMRES with an
// incomplete LU preconditioner for large systems.

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>
#ifdef NDG_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "ndg/assembly.hpp"

namespace ndg {

enum class SolveMethod { automatic, direct, gmres };

struct SolverOptions {
  double tol = 1e-10;
  SolveMethod method = SolveMethod::automatic;
  int krylov_threshold = 400000;  // automatic switches to GMRES above this size
  int max_iterations = 2000;
  int restart = 100;
  int refinement_steps = 3;
  // A solve whose relative residual misses tol is still accepted when its
  // normwise backward error is at round-off level: no double-precision x
  // does better once u * cond(A) exceeds tol.
  double backward_tol = 1e-13;
  double min_pivot_ratio = 1e-15;  // below this the matrix is treated as singular
  bool check_backward_error = true;
};

struct SolveReport {
  Eigen::VectorXd solution;
  double residual = 0.0;        // ||Ax - b||_2 / ||b||_2
  double backward_error = 0.0;  // ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)
  double pivot_ratio = 1.0;     // min |U_ii| / max |U_ii| (UMFPACK only)
  std::string method;
  int iterations = 0;
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const double nb = b.norm();
  const double nr = (b - a * x).norm();
  return nb > 0.0 ? nr / nb : nr;
}

inline double backward_error(const SparseMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  double norm_a = 0.0;
  for (int r = 0; r < a.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) row += std::abs(it.value());
    norm_a = std::max(norm_a, row);
  }
  const double denom = norm_a * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  const double r = (b - a * x).lpNorm<Eigen::Infinity>();
  return denom > 0.0 ? r / denom : r;
}

#ifdef NDG_HAVE_UMFPACK
// Exposes UMFPACK's pivot-ratio estimate (Info[UMFPACK_RCOND]).
template <typename M>
class UmfPackLUWithInfo : public Eigen::UmfPackLU<M> {
 public:
  double pivot_ratio() const { return this->m_umfpackInfo(UMFPACK_RCOND); }
};
#endif

inline SolveReport solve_direct(const SparseMatrix& a, const Eigen::VectorXd& b, const SolverOptions& opt) {
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  const ColMatrix ac = a;
#ifdef NDG_HAVE_UMFPACK
  UmfPackLUWithInfo<ColMatrix> lu;
  const char* tag = "umfpack-lu";
#else
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
  const char* tag = "sparse-lu";
#endif
  lu.compute(ac);
  if (lu.info() != Eigen::Success) {
    throw SolveError(std::string(tag) + ": factorization failed (matrix numerically singular)");
  }
  SolveReport rep;
  rep.method = tag;
#ifdef NDG_HAVE_UMFPACK
  rep.pivot_ratio = lu.pivot_ratio();
#endif
  if (!(rep.pivot_ratio >= opt.min_pivot_ratio)) {
    throw SolveError(std::string(tag) + ": matrix numerically singular, smallest pivot ratio " + sci(rep.pivot_ratio));
  }
  rep.solution = lu.solve(b);
  if (lu.info() != Eigen::Success || !rep.solution.allFinite()) {
    throw SolveError(std::string(tag) + ": solve produced non-finite values (near-singular pivot)");
  }
  rep.residual = relative_residual(a, rep.solution, b);
  for (int k = 0; k < opt.refinement_steps && rep.residual > opt.tol; ++k) {
    const Eigen::VectorXd r = b - a * rep.solution;
    rep.solution += lu.solve(r);
    rep.residual = relative_residual(a, rep.solution, b);
  }
  rep.backward_error = backward_error(a, rep.solution, b);
  return rep;
}

inline SolveReport solve_gmres(const SparseMatrix& a, const Eigen::VectorXd& b, const SolverOptions& opt) {
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  const ColMatrix ac = a;
  Eigen::GMRES<ColMatrix, Eigen::IncompleteLUT<double>> gmres;
  gmres.set_restart(opt.restart);
  gmres.setMaxIterations(opt.max_iterations);
  gmres.setTolerance(opt.tol);
  gmres.preconditioner().setDroptol(1e-4);
  gmres.preconditioner().setFillfactor(20);
  gmres.compute(ac);
  if (gmres.info() != Eigen::Success) throw SolveError("gmres: incomplete factorization failed");
  SolveReport rep;
  rep.method = "gmres-ilut";
  rep.solution = gmres.solve(b);
  rep.iterations = static_cast<int>(gmres.iterations());
  rep.residual = relative_residual(a, rep.solution, b);
  rep.backward_error = backward_error(a, rep.solution, b);
  if (!rep.solution.allFinite() || rep.residual > opt.tol) {
    throw SolveError("gmres: stagnated after " + std::to_string(rep.iterations) +
                     " iterations, relative residual " + sci(rep.residual));
  }
  return rep;
}

}  // namespace detail

/// Solves A x = rhs to relative residual tol, or throws SolveError.
inline SolveReport solve(const SparseSystem& system, const Eigen::VectorXd& rhs, const SolverOptions& opt = {}) {
  const SparseMatrix& a = system.matrix;
  if (a.rows() != a.cols()) throw std::invalid_argument("solve: matrix is not square");
  if (rhs.size() != a.rows()) throw std::invalid_argument("solve: right-hand side length mismatch");
  if (rhs.size() == 0 || rhs.norm() == 0.0) {
    SolveReport rep;
    rep.solution = Eigen::VectorXd::Zero(rhs.size());
    rep.method = rhs.size() == 0 ? "empty" : "trivial";
    return rep;
  }
  const bool use_gmres = opt.method == SolveMethod::gmres ||
                         (opt.method == SolveMethod::automatic && a.rows() > opt.krylov_threshold);
  SolveReport rep = use_gmres ? detail::solve_gmres(a, rhs, opt) : detail::solve_direct(a, rhs, opt);
  if (opt.check_backward_error && !(rep.residual <= opt.tol) && !(rep.backward_error <= opt.backward_tol)) {
    throw SolveError(rep.method + ": relative residual " + detail::sci(rep.residual) + " above tolerance " +
                     detail::sci(opt.tol) + " (backward error " + detail::sci(rep.backward_error) + ")");
  }
  return rep;
}

}  // namespace ndg
