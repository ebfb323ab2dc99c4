#pragma once

// Adaptive damped Newton: Newton-Raphson transform, step-size control,
// iterate update.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ndg/assembly.hpp"
#include "ndg/linsolve.hpp"
#include "ndg/space.hpp"

namespace ndg {

struct NewtonParams {
  double tau = 0.1;
  double gamma = 0.5;
  double h_cap = 1.0;
  double denom_floor = 1e-14;
  SolverOptions solver;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("NewtonParams: tau must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("NewtonParams: gamma must be positive");
    if (!(h_cap > 0.0)) throw std::invalid_argument("NewtonParams: h_cap must be positive");
  }
};

/// d = NF(u) = -F'(u)^{-1} F(u) on the current space, and ||d||_DG.
struct Transform {
  DgFunction d;
  double norm = 0.0;
};

inline Transform newton_transform(const DgOperator& op, const DgFunction& u, const SolverOptions& solver = {}) {
  const SparseSystem jac = op.jacobian(u);
  const Eigen::VectorXd r = op.residual(u);
  SolveReport rep = solve(jac, -r, solver);
  DgFunction d(u.mesh_ptr(), std::move(rep.solution));
  const double norm = dg_norm(d, op.params().eps);
  return {std::move(d), norm};
}

inline Transform newton_transform(const DgFunction& u, const FormParams& params, const SolverOptions& solver = {}) {
  return newton_transform(DgOperator(u.mesh_ptr(), params), u, solver);
}

/// dt_0 = min(sqrt(2 tau / ||NF(u_0)||), 1).
inline double initial_step(double norm0, const NewtonParams& params) {
  if (norm0 < params.denom_floor) return 1.0;
  return std::min(std::sqrt(2.0 * params.tau / norm0), 1.0);
}

/// h_n = min(gamma kappa_n / ||d_n||^2, h_cap).
inline double probe_length(double kappa, double d_norm, const NewtonParams& params) {
  if (d_norm < params.denom_floor) return params.h_cap;
  return std::min(params.gamma * kappa / (d_norm * d_norm), params.h_cap);
}

/// dt_n = min(sqrt(2 tau h_n / ||eta_h||), 1).
inline double step_from_probe(double h, double eta_norm, const NewtonParams& params) {
  if (eta_norm < params.denom_floor) return 1.0;
  return std::min(std::sqrt(2.0 * params.tau * h / eta_norm), 1.0);
}

struct NewtonState {
  DgFunction u;
  double dt_prev = 1.0;  // dt_{n-1}
  int n = 0;
  double last_norm = 0.0;
  std::vector<double> dt_history;

  explicit NewtonState(DgFunction u0) : u(std::move(u0)) {}
};

struct StepChoice {
  double dt = 1.0;
  double h = 0.0;
  double eta_norm = 0.0;
  bool fallback = false;
  std::string fallback_reason;
};

/// Step size for n >= 1 from a probe transform at u_n + h_n d_n. A failed
/// probe (assembly overflow or solver breakdown) halves the previous step.
inline StepChoice adaptive_step(const NewtonState& state, const Transform& t, const DgOperator& op,
                                const NewtonParams& params) {
  StepChoice out;
  out.h = probe_length(state.dt_prev, t.norm, params);
  try {
    DgFunction probe = state.u;
    probe.coefficients() += out.h * t.d.coefficients();
    const Transform tp = newton_transform(op, probe, params.solver);
    const DgFunction eta = tp.d - t.d;
    out.eta_norm = dg_norm(eta, op.params().eps);
    if (!std::isfinite(out.eta_norm)) throw SolveError("probe transform is not finite");
    out.dt = step_from_probe(out.h, out.eta_norm, params);
  } catch (const std::exception& e) {
    out.fallback = true;
    out.fallback_reason = e.what();
    out.dt = 0.5 * state.dt_prev;
  }
  return out;
}

/// u_{n+1} = u_n + dt d.
inline void apply_update(NewtonState& state, const DgFunction& d, double dt) {
  state.u.coefficients() += dt * d.coefficients();
  state.dt_prev = dt;
  state.dt_history.push_back(dt);
  ++state.n;
}

}  // namespace ndg
