#pragma once

// Tensor-product Legendre bases on the reference square (0,1)^2 and
// Gauss-Legendre quadrature.

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ndg {

/// Gauss-Legendre rule on [-1,1]. Nodes are ascending.
struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

namespace detail {

// Legendre P_n and P_{n-1} at x by the three-term recurrence.
inline std::array<double, 2> legendre_pair(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

inline QuadratureRule compute_gauss_rule(int n) {
  QuadratureRule rule;
  rule.points.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  if (n == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  for (int k = 0; k < (n + 1) / 2; ++k) {
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = legendre_pair(n, x);
      const double dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre_pair(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[n - 1 - k] = x;
    rule.points[k] = -x;
    rule.weights[n - 1 - k] = w;
    rule.weights[k] = w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

inline constexpr int kMaxGaussPoints = 64;

/// n-point Gauss-Legendre rule, 1 <= n <= 64. Rules are computed once.
inline const QuadratureRule& gauss_rule(int n) {
  if (n < 1 || n > kMaxGaussPoints) {
    throw std::out_of_range("gauss_rule: point count " + std::to_string(n) +
                            " outside [1, 64]");
  }
  static const std::vector<QuadratureRule> rules = [] {
    std::vector<QuadratureRule> all(kMaxGaussPoints + 1);
    for (int k = 1; k <= kMaxGaussPoints; ++k) all[k] = detail::compute_gauss_rule(k);
    return all;
  }();
  return rules[n];
}

/// Values and first two derivatives of the L2(0,1)-orthonormal Legendre
/// polynomials L_0..L_p at one point t in [0,1].
struct LegendreValues {
  std::vector<double> value, d1, d2;
};

inline LegendreValues legendre_on_unit(int p, double t) {
  LegendreValues out;
  out.value.resize(p + 1);
  out.d1.resize(p + 1);
  out.d2.resize(p + 1);
  const double s = 2.0 * t - 1.0;
  // Classical P_k, P_k', P_k'' on [-1,1].
  std::vector<double> P(p + 1), dP(p + 1), ddP(p + 1);
  P[0] = 1.0;
  dP[0] = 0.0;
  ddP[0] = 0.0;
  if (p >= 1) {
    P[1] = s;
    dP[1] = 1.0;
    ddP[1] = 0.0;
  }
  for (int k = 1; k < p; ++k) {
    P[k + 1] = ((2.0 * k + 1.0) * s * P[k] - k * P[k - 1]) / (k + 1.0);
    dP[k + 1] = dP[k - 1] + (2.0 * k + 1.0) * P[k];
    ddP[k + 1] = ddP[k - 1] + (2.0 * k + 1.0) * dP[k];
  }
  for (int k = 0; k <= p; ++k) {
    const double scale = std::sqrt(2.0 * k + 1.0);
    out.value[k] = scale * P[k];
    out.d1[k] = 2.0 * scale * dP[k];
    out.d2[k] = 4.0 * scale * ddP[k];
  }
  return out;
}

/// Tensor basis phi_{ij}(x,y) = L_i(x) L_j(y) of Q_p on (0,1)^2.
/// Flat index a = i*(p+1) + j, where i is the x-degree.
struct ReferenceBasis {
  int degree = 1;

  explicit ReferenceBasis(int p) : degree(p) {
    if (p < 0) throw std::invalid_argument("ReferenceBasis: negative degree");
  }

  int size() const { return (degree + 1) * (degree + 1); }
  int index(int i, int j) const { return i * (degree + 1) + j; }
  std::array<int, 2> multi_index(int a) const { return {a / (degree + 1), a % (degree + 1)}; }
};

/// Basis data tabulated at a set of reference points; one row per point.
struct BasisTable {
  Eigen::MatrixXd value;  // phi_a
  Eigen::MatrixXd dx;     // d phi_a / d xhat
  Eigen::MatrixXd dy;     // d phi_a / d yhat
  Eigen::MatrixXd dxx;    // d^2 phi_a / d xhat^2
  Eigen::MatrixXd dyy;    // d^2 phi_a / d yhat^2
};

struct RefPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Evaluates every basis function and its reference derivatives at the
/// given points. Physical derivatives follow from the diagonal Jacobian
/// (divide dx by h_x, dy by h_y).
inline BasisTable eval_basis_volume(const ReferenceBasis& basis, const std::vector<RefPoint>& points) {
  const int p = basis.degree;
  const int nd = basis.size();
  const auto np = static_cast<Eigen::Index>(points.size());
  BasisTable t;
  t.value.resize(np, nd);
  t.dx.resize(np, nd);
  t.dy.resize(np, nd);
  t.dxx.resize(np, nd);
  t.dyy.resize(np, nd);
  for (Eigen::Index q = 0; q < np; ++q) {
    const LegendreValues lx = legendre_on_unit(p, points[q].x);
    const LegendreValues ly = legendre_on_unit(p, points[q].y);
    for (int i = 0; i <= p; ++i) {
      for (int j = 0; j <= p; ++j) {
        const int a = basis.index(i, j);
        t.value(q, a) = lx.value[i] * ly.value[j];
        t.dx(q, a) = lx.d1[i] * ly.value[j];
        t.dy(q, a) = lx.value[i] * ly.d1[j];
        t.dxx(q, a) = lx.d2[i] * ly.value[j];
        t.dyy(q, a) = lx.value[i] * ly.d2[j];
      }
    }
  }
  return t;
}

/// Reference faces: 0 is xhat=0, 1 is xhat=1, 2 is yhat=0, 3 is yhat=1.
enum class Face : int { left = 0, right = 1, bottom = 2, top = 3 };

inline std::array<double, 2> outward_normal(Face f) {
  switch (f) {
    case Face::left: return {-1.0, 0.0};
    case Face::right: return {1.0, 0.0};
    case Face::bottom: return {0.0, -1.0};
    case Face::top: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

/// Maps a face parameter s in [0,1] (increasing x or y) onto the reference square.
inline RefPoint face_point(Face f, double s) {
  switch (f) {
    case Face::left: return {0.0, s};
    case Face::right: return {1.0, s};
    case Face::bottom: return {s, 0.0};
    case Face::top: return {s, 1.0};
  }
  return {};
}

struct TraceTable {
  Eigen::MatrixXd value;   // phi_a on the face
  Eigen::MatrixXd normal;  // n . grad phi_a in reference coordinates, n the outward face normal
};

/// Traces along a reference face. The normal derivative is taken with
/// respect to reference coordinates; scale by 1/h in the normal direction
/// for the physical one.
inline TraceTable eval_basis_edge(const ReferenceBasis& basis, Face face, const std::vector<double>& params) {
  std::vector<RefPoint> pts;
  pts.reserve(params.size());
  for (double s : params) pts.push_back(face_point(face, s));
  BasisTable vol = eval_basis_volume(basis, pts);
  const auto n = outward_normal(face);
  TraceTable t;
  t.value = std::move(vol.value);
  t.normal = n[0] * vol.dx + n[1] * vol.dy;
  return t;
}

/// Tensor Gauss rule on (0,1)^2 with the degree-p basis tabulated at its
/// points. Weights sum to 1 (the reference area).
struct VolumeTable {
  int degree = 0;
  int points_per_dir = 0;
  std::vector<RefPoint> points;
  Eigen::VectorXd weights;
  BasisTable basis;
};

inline VolumeTable make_volume_table(int p, int n) {
  const QuadratureRule& rule = gauss_rule(n);
  VolumeTable t;
  t.degree = p;
  t.points_per_dir = n;
  t.weights.resize(n * n);
  for (int qx = 0; qx < n; ++qx) {
    for (int qy = 0; qy < n; ++qy) {
      t.points.push_back({0.5 * (rule.points[qx] + 1.0), 0.5 * (rule.points[qy] + 1.0)});
      t.weights[qx * n + qy] = 0.25 * rule.weights[qx] * rule.weights[qy];
    }
  }
  t.basis = eval_basis_volume(ReferenceBasis(p), t.points);
  return t;
}

/// Shared, lazily built volume tables keyed by (degree, points per direction).
inline const VolumeTable& volume_table(int p, int n) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<VolumeTable>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{p, n}];
  if (!slot) slot = std::make_unique<VolumeTable>(make_volume_table(p, n));
  return *slot;
}

/// Volume rule used for degree-p elements: p + 3 points per direction.
inline int volume_points(int p) { return p + 3; }

}  // namespace ndg
