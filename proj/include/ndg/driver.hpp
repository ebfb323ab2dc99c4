#pragma once

// The adaptive Newton-DG loop: Newton steps on a fixed space alternate with
// hp-enrichment whenever the linearisation error is dominated by the
// discretisation error.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ndg/adapt.hpp"
#include "ndg/assembly.hpp"
#include "ndg/estimator.hpp"
#include "ndg/linsolve.hpp"
#include "ndg/mesh.hpp"
#include "ndg/newton.hpp"
#include "ndg/problem.hpp"
#include "ndg/space.hpp"

namespace ndg {

struct RunConfig {
  NewtonParams newton;
  double theta = 1.0;
  double c_sigma = 10.0;
  double lambda = 0.5;
  MarkingParams marking;
  RefinementMode mode = RefinementMode::hp;
  int n_init = 4;
  int p0 = 2;
  MeshLimits limits;
  double e_tol = 1e-6;
  int max_passes = 200;
  int max_dofs = 50000;
  int sample_n = 100;  // solution samples on an (n+1)^2 grid

  void validate() const {
    newton.validate();
    marking.validate();
    if (!(lambda > 0.0)) throw std::invalid_argument("RunConfig: lambda must be positive");
    if (n_init < 1 || p0 < 1) throw std::invalid_argument("RunConfig: n_init and p0 must be at least 1");
    if (p0 > limits.p_max) throw std::invalid_argument("RunConfig: p0 exceeds p_max");
    if (max_passes < 1 || max_dofs < 1) throw std::invalid_argument("RunConfig: caps must be positive");
    if (sample_n < 1) throw std::invalid_argument("RunConfig: sample_n must be positive");
  }
};

inline FormParams form_params(const ProblemSpec& problem, const RunConfig& config) {
  FormParams fp;
  fp.eps = problem.eps;
  fp.theta = config.theta;
  fp.c_sigma = config.c_sigma;
  fp.f = problem.f;
  fp.df = problem.df;
  return fp;
}

enum class PassAction { newton, refine };

inline const char* action_name(PassAction a) { return a == PassAction::refine ? "refine" : "newton"; }

/// One row per pass. The action is the outcome of the refinement test;
/// on the last pass the run stops before carrying it out.
struct PassRecord {
  int pass = 0;
  int n_newton = 0;
  int dofs = 0;
  int leaves = 0;
  double estimator = 0.0;
  double delta_sq = 0.0;
  double sum_eta_sq = 0.0;
  double dt = 1.0;
  PassAction action = PassAction::newton;
  double d_norm = 0.0;
  bool step_fallback = false;
  int h_marked = 0;
  int p_marked = 0;
  int closure_forced = 0;
};

enum class RunStatus { converged, not_converged, error };

inline const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::not_converged: return "not_converged";
    case RunStatus::error: return "error";
  }
  return "?";
}

struct RunRecord {
  std::string problem;
  RefinementMode mode = RefinementMode::hp;
  double eps = 1.0;
  double amplitude = 0.0;
  RunStatus status = RunStatus::not_converged;
  std::string reason;
  std::vector<PassRecord> passes;
  std::vector<MeshPtr> meshes;  // initial mesh, then one per refinement
  std::shared_ptr<const DgFunction> solution;  // last iterate
  std::vector<std::string> warnings;
  double seconds = 0.0;

  bool converged() const { return status == RunStatus::converged; }
  int newton_steps() const { return passes.empty() ? 0 : passes.back().n_newton; }
};

/// Max and min of a DgFunction sampled on a (2p+3)^2 uniform subgrid of
/// every leaf, corners included.
struct Extrema {
  double min = 0.0;
  double max = 0.0;
  double max_abs() const { return std::max(std::abs(min), std::abs(max)); }
};

inline Extrema sample_extrema(const DgFunction& u) {
  Extrema ex{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const Mesh& mesh = u.mesh();
  for (std::size_t k = 0; k < mesh.leaves().size(); ++k) {
    const Element& el = mesh.elements[mesh.leaves()[k]];
    const int m = 2 * el.degree + 2;
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) {
        const double v =
            evaluate_block(u.block(static_cast<int>(k)), el.degree, el.rect, {double(i) / m, double(j) / m}).value;
        ex.min = std::min(ex.min, v);
        ex.max = std::max(ex.max, v);
      }
    }
  }
  return ex;
}

/// Called after every pass with the finished row (refinement counts filled in).
using PassObserver = std::function<void(const PassRecord&)>;

inline RunRecord run_adaptive(const ProblemSpec& problem, const RunConfig& config, const PassObserver& observer = {}) {
  config.validate();
  check_consistency(problem);
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.problem = problem.name;
  rec.mode = config.mode;
  rec.eps = problem.eps;
  rec.amplitude = problem.amplitude;

  const FormParams form = form_params(problem, config);
  auto mesh = std::make_shared<const Mesh>(
      create_rect_mesh(problem.bounds, config.n_init, config.n_init, config.p0, config.limits));
  rec.meshes.push_back(mesh);
  NewtonState state(project(mesh, problem.u0));
  auto op = std::make_unique<DgOperator>(mesh, form);
  int n_newton = 0;
  bool first = true;

  auto finish = [&](RunStatus s, std::string reason) {
    rec.status = s;
    rec.reason = std::move(reason);
    rec.solution = std::make_shared<const DgFunction>(state.u);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  };

  for (int pass = 0;; ++pass) {
    if (pass >= config.max_passes) return finish(RunStatus::not_converged, "pass cap reached");
    PassRecord row;
    row.pass = pass;
    row.n_newton = n_newton;
    row.dofs = state.u.size();
    row.leaves = static_cast<int>(mesh->leaves().size());
    EstimatorReport est;
    try {
      const Transform t = newton_transform(*op, state.u, config.newton.solver);
      row.d_norm = t.norm;
      double dt = 1.0;
      if (first) {
        dt = initial_step(t.norm, config.newton);
      } else {
        const StepChoice c = adaptive_step(state, t, *op, config.newton);
        dt = c.dt;
        row.step_fallback = c.fallback;
        if (c.fallback) rec.warnings.push_back("pass " + std::to_string(pass) + ": step fallback: " + c.fallback_reason);
      }
      const DgFunction u_prev = state.u;
      apply_update(state, t.d, dt);
      row.dt = dt;
      if (!state.u.coefficients().allFinite()) throw AssemblyError("iterate is not finite", -1);
      est = estimate(u_prev, state.u, dt, form);
    } catch (const AssemblyError& e) {
      // Overflow of the nonlinearity: the iteration has left every basin.
      rec.warnings.push_back(e.what());
      return finish(RunStatus::not_converged, std::string("iteration diverged: ") + e.what());
    } catch (const SolveError& e) {
      return finish(RunStatus::error, std::string("linear solve failed: ") + e.what());
    }
    first = false;
    row.estimator = est.estimate;
    row.delta_sq = est.delta_total * est.delta_total;
    row.sum_eta_sq = est.sum_eta_sq;
    row.action = row.delta_sq <= config.lambda * row.sum_eta_sq ? PassAction::refine : PassAction::newton;
    rec.passes.push_back(row);
    auto notify = [&] {
      if (observer) observer(rec.passes.back());
    };
    if (!std::isfinite(row.estimator)) {
      notify();
      return finish(RunStatus::not_converged, "estimator is not finite");
    }
    if (row.estimator <= config.e_tol) {
      notify();
      return finish(RunStatus::converged, "estimator below tolerance");
    }

    if (row.action == PassAction::newton) {
      notify();
      ++n_newton;
      continue;
    }
    const std::vector<int> marks = mark_maximal(est.eta, config.marking.upsilon);
    if (marks.empty()) {
      notify();
      return finish(RunStatus::not_converged, "no element marked");
    }
    RefinementResult r = execute_refinement(state.u, marks, config.mode, config.marking);
    auto& last = rec.passes.back();
    last.h_marked = static_cast<int>(r.h_marked.size());
    last.p_marked = static_cast<int>(r.p_marked.size());
    last.closure_forced = static_cast<int>(r.log.closure_forced.size());
    notify();
    for (auto& w : r.log.warnings) rec.warnings.push_back("pass " + std::to_string(pass) + ": " + w);
    if (r.mesh->leaves().size() == mesh->leaves().size() && r.u.size() == state.u.size()) {
      return finish(RunStatus::not_converged, "refinement stagnated at the level and degree caps");
    }
    // The refined space is not adopted once it would exceed the budget.
    if (r.u.size() > config.max_dofs) return finish(RunStatus::not_converged, "dof cap reached");
    mesh = r.mesh;
    rec.meshes.push_back(mesh);
    state.u = std::move(r.u);
    op = std::make_unique<DgOperator>(mesh, form);
  }
}

/// Default run settings per preset. Ginzburg-Landau starts on an 8x8 mesh
/// and stops at E <= 5e-3, which stays within the default dof budget down
/// to eps = 1e-4; the Bratu and manufactured presets run to 1e-6.
inline RunConfig default_config(const std::string& problem, double eps, RefinementMode mode) {
  (void)eps;
  RunConfig c;
  c.mode = mode;
  if (problem == "ginzburg_landau") {
    c.n_init = 8;
    c.e_tol = 5e-3;
  }
  return c;
}

}  // namespace ndg
