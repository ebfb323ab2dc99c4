#pragma once

// Marking, hp-decision from Legendre coefficient decay, and refinement.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "ndg/mesh.hpp"
#include "ndg/space.hpp"

namespace ndg {

enum class RefinementMode { h_only, hp };

struct MarkingParams {
  double upsilon = 1.0 / 3.0;
  double theta_hp = 0.6;
  double fit_floor = 1e-14;
  bool smooth_degrees = true;

  void validate() const {
    if (!(upsilon > 0.0 && upsilon < 1.0)) throw std::invalid_argument("MarkingParams: upsilon must lie in (0,1)");
    if (!(theta_hp > 0.0)) throw std::invalid_argument("MarkingParams: theta_hp must be positive");
  }
};

/// Leaf positions with eta > upsilon * max eta; empty when all eta vanish.
inline std::vector<int> mark_maximal(std::span<const double> eta, double upsilon) {
  double mx = 0.0;
  for (double e : eta) mx = std::max(mx, e);
  std::vector<int> marked;
  if (!(mx > 0.0)) return marked;
  const double threshold = upsilon * mx;
  for (std::size_t k = 0; k < eta.size(); ++k) {
    if (eta[k] > threshold) marked.push_back(static_cast<int>(k));
  }
  return marked;
}

/// Least-squares slope of log(max(a_i, floor)) against i.
inline double log_decay_slope(std::span<const double> a, double floor) {
  const int n = static_cast<int>(a.size());
  if (n < 2) return 0.0;
  double si = 0.0, sy = 0.0, sii = 0.0, siy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = std::log(std::max(a[i], floor));
    si += i;
    sy += y;
    sii += static_cast<double>(i) * i;
    siy += i * y;
  }
  return (n * siy - si * sy) / (n * sii - si * si);
}

/// Fitted decay factor e^{-b} of a coefficient magnitude sequence.
inline double decay_factor(std::span<const double> a, double floor) { return std::exp(log_decay_slope(a, floor)); }

enum class RefineKind { h, p };

struct SmoothnessReport {
  RefineKind decision = RefineKind::h;
  double decay = 1.0;  // e^{-b*}, the slower of the two directions
};

inline SmoothnessReport smoothness_indicator(const DgFunction& u, int leaf_pos, const MarkingParams& params) {
  const Element& el = u.mesh().elements[u.mesh().leaves()[leaf_pos]];
  const int p = el.degree;
  SmoothnessReport rep;
  if (p < 2) return rep;
  const auto c = u.block(leaf_pos);
  std::vector<double> ax(p + 1, 0.0), ay(p + 1, 0.0);
  for (int i = 0; i <= p; ++i) {
    for (int j = 0; j <= p; ++j) {
      const double v = c[i * (p + 1) + j];
      ax[i] += v * v;
      ay[j] += v * v;
    }
  }
  for (int i = 0; i <= p; ++i) {
    ax[i] = std::sqrt(ax[i]);
    ay[i] = std::sqrt(ay[i]);
  }
  rep.decay = std::max(decay_factor(ax, params.fit_floor), decay_factor(ay, params.fit_floor));
  rep.decision = rep.decay <= params.theta_hp ? RefineKind::p : RefineKind::h;
  return rep;
}

struct RefinementResult {
  std::shared_ptr<const Mesh> mesh;
  DgFunction u;
  std::vector<int> h_marked;  // element ids
  std::vector<int> p_marked;
  std::vector<int> p_capped_to_h;  // smooth but already at p_max, split instead
  MeshLog log;
};

/// Splits marks (leaf positions) into p- and h-refinements, applies them and
/// transfers u. A leaf judged smooth but already at p_max is h-refined.
inline RefinementResult execute_refinement(const DgFunction& u, std::span<const int> marks, RefinementMode mode,
                                           const MarkingParams& params) {
  if (marks.empty()) throw std::invalid_argument("execute_refinement: no marked elements");
  const Mesh& mesh = u.mesh();
  std::vector<int> h_ids, p_ids, capped;
  for (int pos : marks) {
    const int id = mesh.leaves().at(pos);
    if (mode == RefinementMode::hp && smoothness_indicator(u, pos, params).decision == RefineKind::p) {
      if (mesh.elements[id].degree >= mesh.limits.p_max) {
        capped.push_back(id);
        h_ids.push_back(id);
      } else {
        p_ids.push_back(id);
      }
    } else {
      h_ids.push_back(id);
    }
  }
  MeshLog log;
  Mesh next = p_ids.empty() ? mesh : increment_degrees(mesh, p_ids, params.smooth_degrees, &log);
  if (!h_ids.empty()) next = refine_elements(next, h_ids, &log);
  auto ptr = std::make_shared<const Mesh>(std::move(next));
  DgFunction moved = transfer(u, ptr);
  return {ptr, std::move(moved), std::move(h_ids), std::move(p_ids), std::move(capped), std::move(log)};
}

}  // namespace ndg
