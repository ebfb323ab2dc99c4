#pragma once

// Residual a posteriori estimator for one damped Newton-DG step:
// discretisation indicators eta_K and linearisation terms delta1, delta2.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ndg/assembly.hpp"
#include "ndg/space.hpp"

namespace ndg {

struct ScalingFactors {
  double alpha = 1.0;  // min(1, eps^{-1/2} h / p)
  double beta = 1.0;   // eps^{-1/4} alpha^{1/2}
};

inline ScalingFactors scaling_factors(double eps, double h, int p) {
  ScalingFactors s;
  s.alpha = std::min(1.0, h / (std::sqrt(eps) * p));
  s.beta = std::pow(eps, -0.25) * std::sqrt(s.alpha);
  return s;
}

/// The three squared contributions to eta_K^2.
struct IndicatorParts {
  double volume = 0.0;
  double gradient_jump = 0.0;
  double jump = 0.0;

  double total() const { return volume + gradient_jump + jump; }
};

struct EstimatorReport {
  std::vector<double> eta;  // by leaf position
  std::vector<IndicatorParts> parts;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double dt = 1.0;
  double delta_total = 0.0;  // (1 - dt) delta1 + delta2
  double sum_eta_sq = 0.0;
  double estimate = 0.0;     // (delta_total^2 + sum_eta_sq)^{1/2}
};

namespace detail {

struct LeafGeometry {
  double h = 0.0;  // diameter
  int p = 1;
  ScalingFactors s;
};

inline std::vector<LeafGeometry> leaf_geometry(const Mesh& mesh, double eps) {
  std::vector<LeafGeometry> g;
  g.reserve(mesh.leaves().size());
  for (int id : mesh.leaves()) {
    const Element& el = mesh.elements[id];
    g.push_back({el.rect.diameter(), el.degree, scaling_factors(eps, el.rect.diameter(), el.degree)});
  }
  return g;
}

// Elementwise Laplacian of a coefficient block at the volume points.
inline Eigen::VectorXd laplacian_at(const VolumeTable& vt, const Rect& r, const Eigen::Ref<const Eigen::VectorXd>& c) {
  return vt.basis.dxx * c / (r.hx() * r.hx()) + vt.basis.dyy * c / (r.hy() * r.hy());
}

// Per-edge squared L2 norms of [w] and (interior only) [grad w].
struct EdgeJumps {
  double jump = 0.0;
  double gradient = 0.0;
};

inline std::vector<EdgeJumps> edge_jump_norms(const DgFunction& w, bool gradients) {
  const Mesh& mesh = w.mesh();
  std::vector<EdgeJumps> out(mesh.edges().size());
  for (std::size_t k = 0; k < mesh.edges().size(); ++k) {
    const Edge& e = mesh.edges()[k];
    const EdgeQuadrature q = edge_quadrature(mesh, e);
    const auto tr = edge_traces(mesh, e, q);
    out[k].jump = q.weights.dot(edge_jump(w, e, tr).cwiseAbs2());
    if (gradients && e.kind == EdgeKind::interior) {
      out[k].gradient = q.weights.dot(edge_gradient_jump(w, tr).cwiseAbs2());
    }
  }
  return out;
}

}  // namespace detail

/// eta_K for u_hat = u_np1 - (1 - dt) u_n and f_hat = dt (f(u_n) - f'(u_n) u_n).
/// Interior-edge terms are attributed to both neighbouring leaves.
inline std::vector<IndicatorParts> local_indicator_parts(const DgFunction& u_n, const DgFunction& u_np1, double dt,
                                                         const FormParams& params) {
  const Mesh& mesh = u_n.mesh();
  const double eps = params.eps;
  DgFunction u_hat = u_np1;
  u_hat.coefficients() -= (1.0 - dt) * u_n.coefficients();
  const auto geo = detail::leaf_geometry(mesh, eps);
  std::vector<IndicatorParts> parts(geo.size());

  const auto& leaves = mesh.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh.elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
    const int pos = static_cast<int>(k);
    const Eigen::VectorXd uh = vt.basis.value * u_hat.block(pos);
    const Eigen::VectorXd un = vt.basis.value * u_n.block(pos);
    const Eigen::VectorXd lap = detail::laplacian_at(vt, el.rect, u_hat.block(pos));
    double s = 0.0;
    for (Eigen::Index q = 0; q < uh.size(); ++q) {
      const Point x = el.rect.to_physical(vt.points[q]);
      const double fp = params.df(x, un[q]);
      const double fhat = dt * (params.f(x, un[q]) - fp * un[q]);
      const double r = eps * lap[q] - uh[q] + fp * uh[q] + fhat;
      s += vt.weights[q] * r * r;
    }
    parts[k].volume = geo[k].s.alpha * geo[k].s.alpha * el.rect.area() * s;
  }

  const double pen = std::max(1.0, params.c_sigma * params.c_sigma);
  const auto jumps = detail::edge_jump_norms(u_hat, true);
  for (std::size_t k = 0; k < mesh.edges().size(); ++k) {
    const Edge& e = mesh.edges()[k];
    for (int s = 0; s < e.side_count(); ++s) {
      const int pos = mesh.leaf_position(e.sides[s].element);
      const auto& g = geo[pos];
      parts[pos].jump += pen * (eps * g.p * g.p * g.p / g.h + g.h / (g.p * g.p)) * jumps[k].jump;
      if (e.kind == EdgeKind::interior) parts[pos].gradient_jump += g.s.beta * g.s.beta * eps * eps * jumps[k].gradient;
    }
  }
  return parts;
}

inline std::vector<double> local_indicators(const DgFunction& u_n, const DgFunction& u_np1, double dt,
                                            const FormParams& params) {
  const auto parts = local_indicator_parts(u_n, u_np1, dt, params);
  std::vector<double> eta;
  eta.reserve(parts.size());
  for (const auto& p : parts) eta.push_back(std::sqrt(p.total()));
  return eta;
}

/// The three summands of delta1, unsquared.
struct Delta1Parts {
  double residual = 0.0;
  double lifting = 0.0;
  double jump = 0.0;

  double total() const { return residual + lifting + jump; }
};

inline Delta1Parts delta1_parts(const DgFunction& u_n, const FormParams& params) {
  const Mesh& mesh = u_n.mesh();
  const double eps = params.eps;
  const DgFunction lift = lifting(u_n);
  const auto geo = detail::leaf_geometry(mesh, eps);

  double res = 0.0, lift_sum = 0.0;
  const auto& leaves = mesh.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh.elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
    const int pos = static_cast<int>(k);
    const Eigen::VectorXd un = vt.basis.value * u_n.block(pos);
    const Eigen::VectorXd lap = detail::laplacian_at(vt, el.rect, u_n.block(pos));
    const Eigen::VectorXd lq = vt.basis.value * lift.block(pos);
    double s = 0.0;
    for (Eigen::Index q = 0; q < un.size(); ++q) {
      const Point x = el.rect.to_physical(vt.points[q]);
      const double r = eps * lap[q] - un[q] + params.f(x, un[q]) - eps * lq[q];
      s += vt.weights[q] * r * r;
    }
    res += el.rect.area() * s;
    const double a = geo[k].s.alpha;
    lift_sum += eps * eps * a * a * el.rect.area() * lift.block(pos).squaredNorm();
  }

  double jump_sum = 0.0;
  const auto jumps = detail::edge_jump_norms(u_n, true);
  for (std::size_t k = 0; k < mesh.edges().size(); ++k) {
    const Edge& e = mesh.edges()[k];
    for (int s = 0; s < e.side_count(); ++s) {
      const int pos = mesh.leaf_position(e.sides[s].element);
      const auto& g = geo[pos];
      jump_sum += (eps * g.p * g.p / g.h + g.h / (g.p * g.p)) * jumps[k].jump;
      if (e.kind == EdgeKind::interior) lift_sum += eps * eps * g.s.alpha / std::sqrt(eps) * jumps[k].gradient;
    }
  }
  return {std::sqrt(res), std::sqrt(lift_sum), params.c_sigma * std::sqrt(jump_sum)};
}

inline double delta1(const DgFunction& u_n, const FormParams& params) { return delta1_parts(u_n, params).total(); }

/// ||f(u_n) + f'(u_n)(u_np1 - u_n) - f(u_np1)||_0.
inline double delta2(const DgFunction& u_n, const DgFunction& u_np1, const FormParams& params) {
  const Mesh& mesh = u_n.mesh();
  double s = 0.0;
  const auto& leaves = mesh.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh.elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
    const int pos = static_cast<int>(k);
    const Eigen::VectorXd a = vt.basis.value * u_n.block(pos);
    const Eigen::VectorXd b = vt.basis.value * u_np1.block(pos);
    double t = 0.0;
    for (Eigen::Index q = 0; q < a.size(); ++q) {
      const Point x = el.rect.to_physical(vt.points[q]);
      const double r = params.f(x, a[q]) + params.df(x, a[q]) * (b[q] - a[q]) - params.f(x, b[q]);
      t += vt.weights[q] * r * r;
    }
    s += el.rect.area() * t;
  }
  return std::sqrt(s);
}

inline EstimatorReport total_estimate(std::vector<double> eta, double d1, double d2, double dt) {
  EstimatorReport rep;
  rep.delta1 = d1;
  rep.delta2 = d2;
  rep.dt = dt;
  rep.delta_total = (1.0 - dt) * d1 + d2;
  for (double e : eta) rep.sum_eta_sq += e * e;
  rep.eta = std::move(eta);
  rep.estimate = std::sqrt(rep.delta_total * rep.delta_total + rep.sum_eta_sq);
  return rep;
}

/// Full estimator for the step u_n -> u_np1 taken with step size dt.
inline EstimatorReport estimate(const DgFunction& u_n, const DgFunction& u_np1, double dt, const FormParams& params) {
  auto parts = local_indicator_parts(u_n, u_np1, dt, params);
  std::vector<double> eta;
  eta.reserve(parts.size());
  for (const auto& p : parts) eta.push_back(std::sqrt(p.total()));
  const double d1 = delta1(u_n, params);
  EstimatorReport rep = total_estimate(std::move(eta), d1, delta2(u_n, u_np1, params), dt);
  rep.parts = std::move(parts);
  return rep;
}

}  // namespace ndg
