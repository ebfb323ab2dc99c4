#pragma once

// Interior penalty DG forms for -eps Lap u + u = f(x, u): Jacobian,
// Newton right-hand side, nonlinear residual, and the gradient-jump lifting.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ndg/space.hpp"

namespace ndg {

/// f(x, u) or its u-derivative.
using Nonlinearity = std::function<double(Point, double)>;

struct FormParams {
  double eps = 1.0;
  double theta = 1.0;     // 1 SIPG, 0 IIPG, -1 NIPG
  double c_sigma = 10.0;
  Nonlinearity f;
  Nonlinearity df;
  // The average-flux and symmetry edge terms; only switched off in tests.
  bool flux_terms = true;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SparseSystem {
  SparseMatrix matrix;
};

class AssemblyError : public std::runtime_error {
 public:
  AssemblyError(const std::string& what, int element) : std::runtime_error(what), element_(element) {}
  int element() const { return element_; }

 private:
  int element_;
};

/// Row-compressed storage whose pattern is the leaf adjacency graph: each
/// leaf block couples to itself and to its edge neighbours.
class BlockPattern {
 public:
  explicit BlockPattern(const Mesh& mesh) : dofs_(mesh) {
    const std::size_t nl = mesh.leaves().size();
    neighbors_.assign(nl, {});
    for (std::size_t k = 0; k < nl; ++k) neighbors_[k].push_back(static_cast<int>(k));
    for (const Edge& e : mesh.edges()) {
      if (e.kind != EdgeKind::interior) continue;
      const int a = mesh.leaf_position(e.sides[0].element);
      const int b = mesh.leaf_position(e.sides[1].element);
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
    }
    prefix_.assign(nl, {});
    row_width_.assign(nl, 0);
    for (std::size_t k = 0; k < nl; ++k) {
      auto& nb = neighbors_[k];
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      int w = 0;
      for (int c : nb) {
        prefix_[k].push_back(w);
        w += dofs_.size[c];
      }
      row_width_[k] = w;
    }
  }

  const DofMap& dofs() const { return dofs_; }

  /// Empty matrix with the full block pattern allocated (values zero).
  SparseMatrix allocate() const {
    const int n = dofs_.total;
    SparseMatrix m(n, n);
    std::size_t nnz = 0;
    for (std::size_t k = 0; k < neighbors_.size(); ++k) nnz += static_cast<std::size_t>(row_width_[k]) * dofs_.size[k];
    m.resizeNonZeros(static_cast<Eigen::Index>(nnz));
    int* outer = m.outerIndexPtr();
    int* inner = m.innerIndexPtr();
    double* val = m.valuePtr();
    std::size_t pos = 0;
    outer[0] = 0;
    for (std::size_t k = 0; k < neighbors_.size(); ++k) {
      for (int r = 0; r < dofs_.size[k]; ++r) {
        for (int c : neighbors_[k]) {
          for (int j = 0; j < dofs_.size[c]; ++j) {
            inner[pos] = dofs_.offset[c] + j;
            val[pos] = 0.0;
            ++pos;
          }
        }
        outer[dofs_.offset[k] + r + 1] = static_cast<int>(pos);
      }
    }
    return m;
  }

  /// Adds a dense block coupling test leaf `row` with trial leaf `col`.
  void add_block(SparseMatrix& m, int row, int col, const Eigen::MatrixXd& block) const {
    const auto& nb = neighbors_[row];
    const auto it = std::lower_bound(nb.begin(), nb.end(), col);
    if (it == nb.end() || *it != col) throw std::logic_error("BlockPattern: block outside pattern");
    const int pre = prefix_[row][it - nb.begin()];
    const int* outer = m.outerIndexPtr();
    double* val = m.valuePtr();
    for (int r = 0; r < block.rows(); ++r) {
      double* dst = val + outer[dofs_.offset[row] + r] + pre;
      for (int j = 0; j < block.cols(); ++j) dst[j] += block(r, j);
    }
  }

 private:
  DofMap dofs_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> prefix_;
  std::vector<int> row_width_;
};

/// DG operator on one mesh. The u-independent bilinear part (diffusion,
/// mass, edge terms) is assembled once; the reaction block -f'(u) is
/// block diagonal and added per linearisation point.
class DgOperator {
 public:
  DgOperator(MeshPtr mesh, FormParams params)
      : mesh_(std::move(mesh)), params_(std::move(params)), pattern_(*mesh_) {
    assemble_linear();
  }

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const FormParams& params() const { return params_; }
  const SparseMatrix& linear_part() const { return linear_; }

  SparseSystem jacobian(const DgFunction& u) const {
    check_mesh(u);
    SparseSystem sys{linear_};
    const auto& leaves = mesh_->leaves();
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const Element& el = mesh_->elements[leaves[k]];
      const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
      const Eigen::VectorXd uq = vt.basis.value * u.block(static_cast<int>(k));
      Eigen::VectorXd w(uq.size());
      for (Eigen::Index q = 0; q < uq.size(); ++q) {
        const double d = params_.df(el.rect.to_physical(vt.points[q]), uq[q]);
        if (!std::isfinite(d)) throw overflow(el.id, "f'");
        w[q] = -vt.weights[q] * el.rect.area() * d;
      }
      const Eigen::MatrixXd block = vt.basis.value.transpose() * w.asDiagonal() * vt.basis.value;
      pattern_.add_block(sys.matrix, static_cast<int>(k), static_cast<int>(k), block);
    }
    return sys;
  }

  /// int f(x, u) v for every basis function v.
  Eigen::VectorXd load(const DgFunction& u) const {
    return volume_vector(u, [this](Point x, double uq) { return params_.f(x, uq); }, "f");
  }

  /// b_v = dt * int (f(u) - f'(u) u) v.
  Eigen::VectorXd newton_rhs(const DgFunction& u, double dt) const {
    if (dt == 0.0) return Eigen::VectorXd::Zero(u.size());
    Eigen::VectorXd b = volume_vector(
        u, [this](Point x, double uq) { return params_.f(x, uq) - params_.df(x, uq) * uq; }, "f - f'u");
    return dt * b;
  }

  /// r_v = <F_DG(u), v> = A_lin u - int f(u) v.
  Eigen::VectorXd residual(const DgFunction& u) const {
    check_mesh(u);
    return linear_ * u.coefficients() - load(u);
  }

 private:
  template <typename G>
  Eigen::VectorXd volume_vector(const DgFunction& u, G&& g, const char* what) const {
    check_mesh(u);
    Eigen::VectorXd out(u.size());
    const auto& leaves = mesh_->leaves();
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const Element& el = mesh_->elements[leaves[k]];
      const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
      const Eigen::VectorXd uq = vt.basis.value * u.block(static_cast<int>(k));
      Eigen::VectorXd w(uq.size());
      for (Eigen::Index q = 0; q < uq.size(); ++q) {
        const double v = g(el.rect.to_physical(vt.points[q]), uq[q]);
        if (!std::isfinite(v)) throw overflow(el.id, what);
        w[q] = vt.weights[q] * el.rect.area() * v;
      }
      out.segment(u.dofs().offset[k], u.dofs().size[k]) = vt.basis.value.transpose() * w;
    }
    return out;
  }

  static AssemblyError overflow(int id, const std::string& what) {
    return AssemblyError("non-finite " + what + " at quadrature point of element " + std::to_string(id), id);
  }

  void check_mesh(const DgFunction& u) const {
    if (u.size() != pattern_.dofs().total) throw std::invalid_argument("DgOperator: function lives on another mesh");
  }

  void assemble_linear() {
    linear_ = pattern_.allocate();
    const double eps = params_.eps;
    const auto& leaves = mesh_->leaves();
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const Element& el = mesh_->elements[leaves[k]];
      const VolumeTable& vt = volume_table(el.degree, volume_points(el.degree));
      const double hx = el.rect.hx(), hy = el.rect.hy(), area = el.rect.area();
      const Eigen::MatrixXd wdx = vt.weights.asDiagonal() * vt.basis.dx;
      const Eigen::MatrixXd wdy = vt.weights.asDiagonal() * vt.basis.dy;
      Eigen::MatrixXd block = eps * area *
                              (vt.basis.dx.transpose() * wdx / (hx * hx) + vt.basis.dy.transpose() * wdy / (hy * hy));
      block.diagonal().array() += area;
      pattern_.add_block(linear_, static_cast<int>(k), static_cast<int>(k), block);
    }
    const double theta = params_.flux_terms ? params_.theta : 0.0;
    const double flux = params_.flux_terms ? 1.0 : 0.0;
    for (const Edge& e : mesh_->edges()) {
      const EdgeQuadrature q = edge_quadrature(*mesh_, e);
      const auto tr = edge_traces(*mesh_, e, q);
      const double pen = params_.c_sigma * eps * e.sigma;
      if (e.kind == EdgeKind::boundary) {
        const Eigen::MatrixXd wv = q.weights.asDiagonal() * tr[0].value;
        const Eigen::MatrixXd vd = wv.transpose() * tr[0].normal;  // rows v, cols grad u
        Eigen::MatrixXd block = -eps * flux * vd - theta * eps * vd.transpose() + pen * (wv.transpose() * tr[0].value);
        pattern_.add_block(linear_, tr[0].leaf_pos, tr[0].leaf_pos, block);
        continue;
      }
      const double sign[2] = {1.0, -1.0};
      for (int s = 0; s < 2; ++s) {
        const Eigen::MatrixXd wv = q.weights.asDiagonal() * tr[s].value;
        const Eigen::MatrixXd wd = q.weights.asDiagonal() * tr[s].normal;
        for (int t = 0; t < 2; ++t) {
          Eigen::MatrixXd block = -0.5 * eps * flux * sign[s] * (wv.transpose() * tr[t].normal) -
                                  0.5 * theta * eps * sign[t] * (wd.transpose() * tr[t].value) +
                                  pen * sign[s] * sign[t] * (wv.transpose() * tr[t].value);
          pattern_.add_block(linear_, tr[s].leaf_pos, tr[t].leaf_pos, block);
        }
      }
    }
  }

  MeshPtr mesh_;
  FormParams params_;
  BlockPattern pattern_;
  SparseMatrix linear_;
};

inline SparseSystem assemble_jacobian(const DgFunction& u, const FormParams& params) {
  return DgOperator(u.mesh_ptr(), params).jacobian(u);
}

inline Eigen::VectorXd assemble_newton_rhs(const DgFunction& u, double dt, const FormParams& params) {
  return DgOperator(u.mesh_ptr(), params).newton_rhs(u, dt);
}

inline Eigen::VectorXd assemble_residual(const DgFunction& u, const FormParams& params) {
  return DgOperator(u.mesh_ptr(), params).residual(u);
}

/// L(u) with int L(u) phi = int_{E_I} [grad u] {phi} ds; the average splits
/// each interior-edge contribution half and half between its two sides.
inline DgFunction lifting(const DgFunction& u) {
  const Mesh& mesh = u.mesh();
  DgFunction out(u.mesh_ptr());
  for (const Edge& e : mesh.edges()) {
    if (e.kind != EdgeKind::interior) continue;
    const EdgeQuadrature q = edge_quadrature(mesh, e);
    const auto tr = edge_traces(mesh, e, q);
    const Eigen::VectorXd wg = q.weights.cwiseProduct(edge_gradient_jump(u, tr));
    for (int s = 0; s < 2; ++s) {
      const double area = mesh.elements[e.sides[s].element].rect.area();
      out.block(tr[s].leaf_pos) += (0.5 / area) * (tr[s].value.transpose() * wg);
    }
  }
  return out;
}

/// Coordinate text dump "row col value", one nonzero per line.
inline void write_matrix_coo(const SparseMatrix& m, std::ostream& os) {
  os.precision(17);
  for (int r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  }
}

}  // namespace ndg
