#pragma once

// Discontinuous piecewise-polynomial functions on a Mesh, stored as
// per-leaf Legendre coefficient blocks.

#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ndg/basis.hpp"
#include "ndg/mesh.hpp"

namespace ndg {

using MeshPtr = std::shared_ptr<const Mesh>;

/// Contiguous coefficient block per leaf, in leaf order.
struct DofMap {
  std::vector<int> offset;  // by leaf position
  std::vector<int> size;    // (p+1)^2
  int total = 0;

  explicit DofMap(const Mesh& mesh) {
    offset.reserve(mesh.leaves().size());
    size.reserve(mesh.leaves().size());
    for (int id : mesh.leaves()) {
      const int p = mesh.elements[id].degree;
      offset.push_back(total);
      size.push_back((p + 1) * (p + 1));
      total += (p + 1) * (p + 1);
    }
  }
};

using PointFunction = std::function<double(Point)>;
using GradientFunction = std::function<std::array<double, 2>(Point)>;

class DgFunction {
 public:
  DgFunction(MeshPtr mesh) : mesh_(std::move(mesh)), dofs_(*mesh_), coeffs_(Eigen::VectorXd::Zero(dofs_.total)) {}
  DgFunction(MeshPtr mesh, Eigen::VectorXd coeffs) : mesh_(std::move(mesh)), dofs_(*mesh_), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != dofs_.total) throw std::invalid_argument("DgFunction: coefficient length mismatch");
  }

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }
  int size() const { return dofs_.total; }

  /// Coefficient block of the leaf at the given leaf position.
  auto block(int leaf_pos) const { return coeffs_.segment(dofs_.offset[leaf_pos], dofs_.size[leaf_pos]); }
  auto block(int leaf_pos) { return coeffs_.segment(dofs_.offset[leaf_pos], dofs_.size[leaf_pos]); }

  DgFunction& operator+=(const DgFunction& o) {
    check_same(o);
    coeffs_ += o.coeffs_;
    return *this;
  }
  DgFunction& operator-=(const DgFunction& o) {
    check_same(o);
    coeffs_ -= o.coeffs_;
    return *this;
  }
  DgFunction& operator*=(double s) {
    coeffs_ *= s;
    return *this;
  }
  friend DgFunction operator+(DgFunction a, const DgFunction& b) { return a += b; }
  friend DgFunction operator-(DgFunction a, const DgFunction& b) { return a -= b; }
  friend DgFunction operator*(double s, DgFunction a) { return a *= s; }

 private:
  void check_same(const DgFunction& o) const {
    if (o.dofs_.total != dofs_.total) throw std::invalid_argument("DgFunction: mesh mismatch");
  }

  MeshPtr mesh_;
  DofMap dofs_;
  Eigen::VectorXd coeffs_;
};

/// Elementwise L2 projection, c_a = int_{ref} (g o Psi) phi_a.
inline DgFunction project(MeshPtr mesh, const PointFunction& g) {
  DgFunction out(mesh);
  const auto& leaves = mesh->leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh->elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
    Eigen::VectorXd gw(vt.points.size());
    for (std::size_t q = 0; q < vt.points.size(); ++q) {
      gw[q] = vt.weights[q] * g(el.rect.to_physical(vt.points[q]));
    }
    out.block(static_cast<int>(k)) = vt.basis.value.transpose() * gw;
  }
  return out;
}

struct PointValue {
  double value = 0.0;
  std::array<double, 2> gradient{0.0, 0.0};
};

/// Leaf containing the point; on shared boundaries the lowest id wins.
inline int locate_leaf(const Mesh& mesh, Point p) {
  if (!mesh.bounds.contains(p)) {
    throw std::out_of_range("evaluate: point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                            ") outside the domain");
  }
  const double tol = 1e-13 * std::max(mesh.bounds.x1 - mesh.bounds.x0, mesh.bounds.y1 - mesh.bounds.y0);
  // Descend from the root cells that contain the point.
  const double dx = (mesh.bounds.x1 - mesh.bounds.x0) / mesh.nx;
  const double dy = (mesh.bounds.y1 - mesh.bounds.y0) / mesh.ny;
  const int i0 = std::clamp(static_cast<int>(std::floor((p.x - mesh.bounds.x0 - tol) / dx)), 0, mesh.nx - 1);
  const int i1 = std::clamp(static_cast<int>(std::floor((p.x - mesh.bounds.x0 + tol) / dx)), 0, mesh.nx - 1);
  const int j0 = std::clamp(static_cast<int>(std::floor((p.y - mesh.bounds.y0 - tol) / dy)), 0, mesh.ny - 1);
  const int j1 = std::clamp(static_cast<int>(std::floor((p.y - mesh.bounds.y0 + tol) / dy)), 0, mesh.ny - 1);
  int best = -1;
  std::vector<int> stack;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) stack.push_back(j * mesh.nx + i);
  }
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const Element& e = mesh.elements[id];
    const Rect& r = e.rect;
    if (p.x < r.x_lo - tol || p.x > r.x_hi + tol || p.y < r.y_lo - tol || p.y > r.y_hi + tol) continue;
    if (e.is_leaf()) {
      if (best < 0 || id < best) best = id;
    } else {
      for (int c : e.children) stack.push_back(c);
    }
  }
  if (best < 0) throw std::logic_error("evaluate: no leaf contains the point");
  return best;
}

/// Value and gradient of a degree-p coefficient block at a reference point.
inline PointValue evaluate_block(const Eigen::Ref<const Eigen::VectorXd>& c, int p, const Rect& rect, RefPoint r) {
  const LegendreValues lx = legendre_on_unit(p, r.x);
  const LegendreValues ly = legendre_on_unit(p, r.y);
  PointValue out;
  for (int i = 0; i <= p; ++i) {
    for (int j = 0; j <= p; ++j) {
      const double ca = c[i * (p + 1) + j];
      out.value += ca * lx.value[i] * ly.value[j];
      out.gradient[0] += ca * lx.d1[i] * ly.value[j];
      out.gradient[1] += ca * lx.value[i] * ly.d1[j];
    }
  }
  out.gradient[0] /= rect.hx();
  out.gradient[1] /= rect.hy();
  return out;
}

inline PointValue evaluate(const DgFunction& f, Point p) {
  const Mesh& mesh = f.mesh();
  const int id = locate_leaf(mesh, p);
  const Element& el = mesh.elements[id];
  const int pos = mesh.leaf_position(id);
  return evaluate_block(f.block(pos), el.degree, el.rect, el.rect.to_reference(p));
}

/// The leaf of old_mesh that contains (or equals) a leaf of a mesh derived
/// from it by refinement; -1 if there is none.
inline int old_ancestor(const Mesh& old_mesh, const Mesh& new_mesh, int new_leaf) {
  int id = new_leaf;
  while (id >= 0) {
    if (id < static_cast<int>(old_mesh.elements.size()) && old_mesh.elements[id].is_leaf()) {
      const Rect& a = old_mesh.elements[id].rect;
      const Rect& b = new_mesh.elements[id].rect;
      if (a.x_lo != b.x_lo || a.x_hi != b.x_hi || a.y_lo != b.y_lo || a.y_hi != b.y_hi) return -1;
      return id;
    }
    id = new_mesh.elements[id].parent;
  }
  return -1;
}

/// L2 projection onto a refined space (h- and/or p-enrichment). Exact to
/// round-off because the spaces are nested.
inline DgFunction transfer(const DgFunction& f, MeshPtr new_mesh) {
  const Mesh& old_mesh = f.mesh();
  if (old_mesh.nx != new_mesh->nx || old_mesh.ny != new_mesh->ny || old_mesh.bounds.x0 != new_mesh->bounds.x0 ||
      old_mesh.bounds.x1 != new_mesh->bounds.x1 || old_mesh.bounds.y0 != new_mesh->bounds.y0 ||
      old_mesh.bounds.y1 != new_mesh->bounds.y1 || new_mesh->elements.size() < old_mesh.elements.size()) {
    throw std::invalid_argument("transfer: meshes are unrelated");
  }
  DgFunction out(new_mesh);
  const auto& leaves = new_mesh->leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const int id = leaves[k];
    const int anc = old_ancestor(old_mesh, *new_mesh, id);
    if (anc < 0) throw std::invalid_argument("transfer: meshes are unrelated (no ancestor for leaf " + std::to_string(id) + ")");
    const Element& src = old_mesh.elements[anc];
    const Element& dst = new_mesh->elements[id];
    const int pos_old = old_mesh.leaf_position(anc);
    if (anc == id && src.degree <= dst.degree) {
      // Same cell: orthonormal nesting, pad with zeros.
      Eigen::VectorXd c = Eigen::VectorXd::Zero(out.dofs().size[k]);
      const auto old_block = f.block(pos_old);
      const int po = src.degree, pn = dst.degree;
      for (int i = 0; i <= po; ++i)
        for (int j = 0; j <= po; ++j) c[i * (pn + 1) + j] = old_block[i * (po + 1) + j];
      out.block(static_cast<int>(k)) = c;
      continue;
    }
    const int n = std::max(src.degree, dst.degree) + 1;
    const VolumeTable& vt = volume_table(dst.degree, n);
    std::vector<RefPoint> src_pts;
    src_pts.reserve(vt.points.size());
    for (const RefPoint& r : vt.points) src_pts.push_back(src.rect.to_reference(dst.rect.to_physical(r)));
    const BasisTable src_tab = eval_basis_volume(ReferenceBasis(src.degree), src_pts);
    const Eigen::VectorXd vals = src_tab.value * f.block(pos_old);
    out.block(static_cast<int>(k)) = vt.basis.value.transpose() * vt.weights.cwiseProduct(vals);
  }
  return out;
}

/// ||f||_0^2 from Parseval: sum_k |J_k| sum_a c_a^2.
inline double l2_norm_squared(const DgFunction& f) {
  double s = 0.0;
  const auto& leaves = f.mesh().leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    s += f.mesh().elements[leaves[k]].rect.area() * f.block(static_cast<int>(k)).squaredNorm();
  }
  return s;
}

/// Gauss points and weights (physical length included) along an edge.
struct EdgeQuadrature {
  std::vector<double> s;       // parameter in [0,1]
  std::vector<Point> points;
  Eigen::VectorXd weights;
};

/// Edge rule with max(ceil(p_e) + 3, p_max_side + 1) points.
inline EdgeQuadrature edge_quadrature(const Mesh& mesh, const Edge& e, int extra = 0) {
  int pmax = mesh.elements[e.sides[0].element].degree;
  if (e.kind == EdgeKind::interior) pmax = std::max(pmax, mesh.elements[e.sides[1].element].degree);
  const int n = std::max(static_cast<int>(std::ceil(e.p_e - 1e-12)) + 3, pmax + 1) + extra;
  const QuadratureRule& rule = gauss_rule(n);
  EdgeQuadrature q;
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = 0.5 * (rule.points[i] + 1.0);
    q.s.push_back(s);
    q.points.push_back(e.at(s));
    q.weights[i] = 0.5 * rule.weights[i] * e.length;
  }
  return q;
}

/// Basis traces of one side of an edge at the edge quadrature points:
/// values and physical derivative along the edge normal.
struct SideTrace {
  int leaf_pos = -1;
  int degree = 0;
  Eigen::MatrixXd value;   // nq x nd
  Eigen::MatrixXd normal;  // nq x nd, grad phi . edge normal
  Eigen::MatrixXd dxx, dyy;
};

inline SideTrace side_trace(const Mesh& mesh, const Edge& e, int side, const EdgeQuadrature& q, bool second = false) {
  const Element& el = mesh.elements[e.sides[side].element];
  std::vector<RefPoint> pts;
  pts.reserve(q.points.size());
  for (const Point& p : q.points) {
    RefPoint r = el.rect.to_reference(p);
    // Pin the coordinate normal to the face exactly onto the face.
    switch (e.sides[side].face) {
      case Face::left: r.x = 0.0; break;
      case Face::right: r.x = 1.0; break;
      case Face::bottom: r.y = 0.0; break;
      case Face::top: r.y = 1.0; break;
    }
    pts.push_back(r);
  }
  BasisTable t = eval_basis_volume(ReferenceBasis(el.degree), pts);
  SideTrace out;
  out.leaf_pos = mesh.leaf_position(el.id);
  out.degree = el.degree;
  out.value = std::move(t.value);
  out.normal = (e.normal[0] / el.rect.hx()) * t.dx + (e.normal[1] / el.rect.hy()) * t.dy;
  if (second) {
    out.dxx = t.dxx / (el.rect.hx() * el.rect.hx());
    out.dyy = t.dyy / (el.rect.hy() * el.rect.hy());
  }
  return out;
}

/// Scalar jump [f].n = f_0 - f_1 at the edge points (f_0 on boundary edges).
inline Eigen::VectorXd edge_jump(const DgFunction& f, const Edge& e, const std::array<SideTrace, 2>& tr) {
  Eigen::VectorXd j = tr[0].value * f.block(tr[0].leaf_pos);
  if (e.kind == EdgeKind::interior) j -= tr[1].value * f.block(tr[1].leaf_pos);
  return j;
}

/// Normal-gradient jump [grad f] = (grad f_0 - grad f_1).n; interior edges only.
inline Eigen::VectorXd edge_gradient_jump(const DgFunction& f, const std::array<SideTrace, 2>& tr) {
  return tr[0].normal * f.block(tr[0].leaf_pos) - tr[1].normal * f.block(tr[1].leaf_pos);
}

inline std::array<SideTrace, 2> edge_traces(const Mesh& mesh, const Edge& e, const EdgeQuadrature& q, bool second = false) {
  std::array<SideTrace, 2> tr;
  tr[0] = side_trace(mesh, e, 0, q, second);
  if (e.kind == EdgeKind::interior) tr[1] = side_trace(mesh, e, 1, q, second);
  return tr;
}

/// (eps ||grad_T f||^2 + ||f||^2 + int_E (eps sigma + 1/sigma) |[f]|^2)^{1/2}.
inline double dg_norm(const DgFunction& f, double eps) {
  const Mesh& mesh = f.mesh();
  double grad = 0.0;
  const auto& leaves = mesh.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh.elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
    const auto c = f.block(static_cast<int>(k));
    const Eigen::VectorXd gx = vt.basis.dx * c / el.rect.hx();
    const Eigen::VectorXd gy = vt.basis.dy * c / el.rect.hy();
    grad += el.rect.area() * vt.weights.dot(gx.cwiseAbs2() + gy.cwiseAbs2());
  }
  double jump = 0.0;
  for (const Edge& e : mesh.edges()) {
    const EdgeQuadrature q = edge_quadrature(mesh, e);
    const auto tr = edge_traces(mesh, e, q);
    const Eigen::VectorXd j = edge_jump(f, e, tr);
    jump += (eps * e.sigma + 1.0 / e.sigma) * q.weights.dot(j.cwiseAbs2());
  }
  return std::sqrt(eps * grad + l2_norm_squared(f) + jump);
}

/// ||w - f||_DG for a smooth w given with its gradient; jumps of w are
/// taken as zero inside Omega and as its trace on the boundary.
inline double dg_norm_error(const DgFunction& f, double eps, const PointFunction& w, const GradientFunction& grad_w,
                            int extra_points = 4) {
  const Mesh& mesh = f.mesh();
  double grad = 0.0, l2 = 0.0;
  const auto& leaves = mesh.leaves();
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Element& el = mesh.elements[leaves[k]];
    const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree) + extra_points);
    const auto c = f.block(static_cast<int>(k));
    const Eigen::VectorXd v = vt.basis.value * c;
    const Eigen::VectorXd gx = vt.basis.dx * c / el.rect.hx();
    const Eigen::VectorXd gy = vt.basis.dy * c / el.rect.hy();
    for (std::size_t q = 0; q < vt.points.size(); ++q) {
      const Point x = el.rect.to_physical(vt.points[q]);
      const auto g = grad_w(x);
      const double wq = vt.weights[q] * el.rect.area();
      grad += wq * ((g[0] - gx[q]) * (g[0] - gx[q]) + (g[1] - gy[q]) * (g[1] - gy[q]));
      l2 += wq * (w(x) - v[q]) * (w(x) - v[q]);
    }
  }
  double jump = 0.0;
  for (const Edge& e : mesh.edges()) {
    const EdgeQuadrature q = edge_quadrature(mesh, e, extra_points);
    const auto tr = edge_traces(mesh, e, q);
    Eigen::VectorXd j = edge_jump(f, e, tr);
    if (e.kind == EdgeKind::boundary) {
      for (Eigen::Index i = 0; i < j.size(); ++i) j[i] -= w(q.points[i]);
    }
    jump += (eps * e.sigma + 1.0 / e.sigma) * q.weights.dot(j.cwiseAbs2());
  }
  return std::sqrt(eps * grad + l2 + jump);
}

/// Samples f on an (n+1) x (n+1) uniform grid as CSV rows "x,y,u".
inline void write_solution_csv(const DgFunction& f, int n, std::ostream& os) {
  const Bounds& b = f.mesh().bounds;
  os << "x,y,u\n";
  os.precision(17);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const Point p{b.x0 + (b.x1 - b.x0) * i / n, b.y0 + (b.y1 - b.y0) * j / n};
      os << p.x << ',' << p.y << ',' << evaluate(f, p).value << '\n';
    }
  }
}

}  // namespace ndg
