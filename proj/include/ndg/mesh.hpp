#pragma once

// 1-irregular forests of quadtrees over axis-aligned rectangles, with a
// polynomial degree attached to every leaf.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ndg/basis.hpp"

namespace ndg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Bounds {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(Point p, double tol = 1e-12) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }
};

struct Rect {
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;

  double hx() const { return x_hi - x_lo; }
  double hy() const { return y_hi - y_lo; }
  double area() const { return hx() * hy(); }
  double diameter() const { return std::hypot(hx(), hy()); }
  Point to_physical(RefPoint r) const { return {x_lo + hx() * r.x, y_lo + hy() * r.y}; }
  RefPoint to_reference(Point p) const { return {(p.x - x_lo) / hx(), (p.y - y_lo) / hy()}; }
};

struct Element {
  int id = -1;
  int parent = -1;
  int level = 0;
  // Cell index at this element's level, counted over the whole domain.
  std::int64_t ix = 0, iy = 0;
  Rect rect;
  int degree = 1;
  std::array<int, 4> children{-1, -1, -1, -1};

  bool is_leaf() const { return children[0] < 0; }
  double diameter() const { return rect.diameter(); }
};

enum class EdgeKind { interior, boundary };

struct EdgeSide {
  int element = -1;
  Face face = Face::left;
};

/// An edge of the (possibly hanging) mesh skeleton. For an interior edge
/// the normal points from sides[0] to sides[1]; for a boundary edge it is
/// the outward normal of Omega.
struct Edge {
  Point a, b;
  double length = 0.0;
  EdgeKind kind = EdgeKind::boundary;
  std::array<EdgeSide, 2> sides{};
  std::array<double, 2> normal{0.0, 0.0};
  double p_e = 1.0;
  double sigma = 1.0;

  int side_count() const { return kind == EdgeKind::interior ? 2 : 1; }
  Point at(double s) const { return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)}; }
};

struct MeshLimits {
  int p_max = 10;
  int level_max = 30;
  double degree_ratio = 2.0;  // rho_2
};

/// Bookkeeping from refine/increment calls.
struct MeshLog {
  std::vector<int> closure_forced;   // leaves refined only to restore 1-irregularity
  std::vector<int> degree_capped;    // leaves whose degree hit p_max
  std::vector<int> level_capped;     // leaves not refined because of level_max
  std::vector<int> smoothed;         // leaves raised by degree smoothing
  std::vector<std::string> warnings;
};

class Mesh {
 public:
  Bounds bounds;
  int nx = 1, ny = 1;
  MeshLimits limits;
  std::vector<Element> elements;

  const std::vector<int>& leaves() const { return leaves_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Position of a leaf id inside leaves(); -1 for non-leaves.
  int leaf_position(int id) const { return leaf_pos_.at(id); }
  /// Edges touching each leaf, by leaf position.
  const std::vector<std::vector<int>>& leaf_edges() const { return leaf_edges_; }

  const Element& element(int id) const {
    if (id < 0 || id >= static_cast<int>(elements.size())) {
      throw std::out_of_range("Mesh: unknown element id " + std::to_string(id));
    }
    return elements[id];
  }

  /// Element with the given cell index at the given level, or -1.
  int find(int level, std::int64_t ix, std::int64_t iy) const {
    auto it = lookup_.find(key(level, ix, iy));
    return it == lookup_.end() ? -1 : it->second;
  }

  std::int64_t cells_x(int level) const { return static_cast<std::int64_t>(nx) << level; }
  std::int64_t cells_y(int level) const { return static_cast<std::int64_t>(ny) << level; }

  /// Leaf neighbours across a face (one or two leaves); empty on the boundary.
  std::vector<int> face_neighbors(int id, Face face) const;

  /// Rebuilds leaf list, lookup table, and edges. Called after every change.
  void rebuild();

 private:
  struct CellKey {
    int level;
    std::int64_t ix, iy;
    bool operator==(const CellKey&) const = default;
  };
  struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.level) * 0x9E3779B97F4A7C15ull;
      h ^= static_cast<std::uint64_t>(k.ix) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.iy) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  static CellKey key(int level, std::int64_t ix, std::int64_t iy) { return {level, ix, iy}; }
  void build_edges();

  std::vector<int> leaves_;
  std::vector<int> leaf_pos_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> leaf_edges_;
  std::unordered_map<CellKey, int, CellKeyHash> lookup_;
};

namespace detail {

inline std::array<std::int64_t, 2> face_offset(Face f) {
  switch (f) {
    case Face::left: return {-1, 0};
    case Face::right: return {1, 0};
    case Face::bottom: return {0, -1};
    case Face::top: return {0, 1};
  }
  return {0, 0};
}

inline Face opposite(Face f) {
  switch (f) {
    case Face::left: return Face::right;
    case Face::right: return Face::left;
    case Face::bottom: return Face::top;
    case Face::top: return Face::bottom;
  }
  return f;
}

// Children of a cell adjacent to the given face of that cell, in
// increasing coordinate order along the face. Child order is
// (0: lo-lo, 1: hi-lo, 2: lo-hi, 3: hi-hi) in (x, y).
inline std::array<int, 2> children_on_face(Face f) {
  switch (f) {
    case Face::left: return {0, 2};
    case Face::right: return {1, 3};
    case Face::bottom: return {0, 1};
    case Face::top: return {2, 3};
  }
  return {0, 0};
}

inline std::array<Point, 2> face_endpoints(const Rect& r, Face f) {
  switch (f) {
    case Face::left: return {Point{r.x_lo, r.y_lo}, Point{r.x_lo, r.y_hi}};
    case Face::right: return {Point{r.x_hi, r.y_lo}, Point{r.x_hi, r.y_hi}};
    case Face::bottom: return {Point{r.x_lo, r.y_lo}, Point{r.x_hi, r.y_lo}};
    case Face::top: return {Point{r.x_lo, r.y_hi}, Point{r.x_hi, r.y_hi}};
  }
  return {};
}

}  // namespace detail

inline std::vector<int> Mesh::face_neighbors(int id, Face face) const {
  const Element& e = element(id);
  const auto off = detail::face_offset(face);
  const std::int64_t jx = e.ix + off[0];
  const std::int64_t jy = e.iy + off[1];
  if (jx < 0 || jy < 0 || jx >= cells_x(e.level) || jy >= cells_y(e.level)) return {};
  const int same = find(e.level, jx, jy);
  if (same >= 0) {
    const Element& n = elements[same];
    if (n.is_leaf()) return {same};
    std::vector<int> out;
    for (int c : detail::children_on_face(detail::opposite(face))) out.push_back(n.children[c]);
    return out;
  }
  // Coarser neighbour: walk up until a cell exists.
  std::int64_t cx = jx, cy = jy;
  for (int lvl = e.level - 1; lvl >= 0; --lvl) {
    cx >>= 1;
    cy >>= 1;
    const int c = find(lvl, cx, cy);
    if (c >= 0) return {c};
  }
  return {};
}

inline void Mesh::rebuild() {
  lookup_.clear();
  leaves_.clear();
  leaf_pos_.assign(elements.size(), -1);
  for (const Element& e : elements) {
    lookup_.emplace(key(e.level, e.ix, e.iy), e.id);
    if (e.is_leaf()) {
      leaf_pos_[e.id] = static_cast<int>(leaves_.size());
      leaves_.push_back(e.id);
    }
  }
  build_edges();
}

inline double edge_degree(const Mesh& mesh, const Edge& e) {
  if (e.kind == EdgeKind::boundary) return mesh.elements[e.sides[0].element].degree;
  return 0.5 * (mesh.elements[e.sides[0].element].degree + mesh.elements[e.sides[1].element].degree);
}

inline void Mesh::build_edges() {
  edges_.clear();
  leaf_edges_.assign(leaves_.size(), {});
  auto push = [&](Edge edge) {
    edge.length = std::hypot(edge.b.x - edge.a.x, edge.b.y - edge.a.y);
    edge.p_e = edge_degree(*this, edge);
    edge.sigma = edge.p_e * edge.p_e / edge.length;
    const int idx = static_cast<int>(edges_.size());
    for (int s = 0; s < edge.side_count(); ++s) leaf_edges_[leaf_pos_[edge.sides[s].element]].push_back(idx);
    edges_.push_back(edge);
  };
  for (int id : leaves_) {
    const Element& el = elements[id];
    for (int f = 0; f < 4; ++f) {
      const Face face = static_cast<Face>(f);
      const auto off = detail::face_offset(face);
      const std::int64_t jx = el.ix + off[0];
      const std::int64_t jy = el.iy + off[1];
      const auto ends = detail::face_endpoints(el.rect, face);
      if (jx < 0 || jy < 0 || jx >= cells_x(el.level) || jy >= cells_y(el.level)) {
        Edge e;
        e.a = ends[0];
        e.b = ends[1];
        e.kind = EdgeKind::boundary;
        e.sides[0] = {id, face};
        e.normal = outward_normal(face);
        push(e);
        continue;
      }
      const int same = find(el.level, jx, jy);
      if (same < 0) continue;  // coarser neighbour owns the hanging pair
      const Element& nb = elements[same];
      if (nb.is_leaf()) {
        // Conforming edge, emitted once from the left/bottom element.
        if (face != Face::right && face != Face::top) continue;
        Edge e;
        e.a = ends[0];
        e.b = ends[1];
        e.kind = EdgeKind::interior;
        e.sides[0] = {id, face};
        e.sides[1] = {same, detail::opposite(face)};
        e.normal = outward_normal(face);
        push(e);
        continue;
      }
      // Finer neighbour: two half-edges, coarse side first.
      const Point mid{0.5 * (ends[0].x + ends[1].x), 0.5 * (ends[0].y + ends[1].y)};
      const auto kids = detail::children_on_face(detail::opposite(face));
      for (int half = 0; half < 2; ++half) {
        const int child = nb.children[kids[half]];
        if (!elements[child].is_leaf()) {
          throw std::logic_error("Mesh: 1-irregularity violated next to element " + std::to_string(id));
        }
        Edge e;
        e.a = half == 0 ? ends[0] : mid;
        e.b = half == 0 ? mid : ends[1];
        e.kind = EdgeKind::interior;
        e.sides[0] = {id, face};
        e.sides[1] = {child, detail::opposite(face)};
        e.normal = outward_normal(face);
        push(e);
      }
    }
  }
}

/// Uniform n_x-by-n_y grid of degree-p0 leaves.
inline Mesh create_rect_mesh(const Bounds& bounds, int n_x, int n_y, int p0, MeshLimits limits = {}) {
  if (!(bounds.x0 < bounds.x1) || !(bounds.y0 < bounds.y1)) {
    throw std::invalid_argument("create_rect_mesh: degenerate bounds");
  }
  if (n_x < 1 || n_y < 1) throw std::invalid_argument("create_rect_mesh: need n_x, n_y >= 1");
  if (p0 < 1) throw std::invalid_argument("create_rect_mesh: need p0 >= 1");
  if (p0 > limits.p_max) throw std::invalid_argument("create_rect_mesh: p0 exceeds p_max");
  Mesh mesh;
  mesh.bounds = bounds;
  mesh.nx = n_x;
  mesh.ny = n_y;
  mesh.limits = limits;
  const double dx = (bounds.x1 - bounds.x0) / n_x;
  const double dy = (bounds.y1 - bounds.y0) / n_y;
  for (int j = 0; j < n_y; ++j) {
    for (int i = 0; i < n_x; ++i) {
      Element e;
      e.id = static_cast<int>(mesh.elements.size());
      e.ix = i;
      e.iy = j;
      e.rect = {bounds.x0 + i * dx, i + 1 == n_x ? bounds.x1 : bounds.x0 + (i + 1) * dx,
                bounds.y0 + j * dy, j + 1 == n_y ? bounds.y1 : bounds.y0 + (j + 1) * dy};
      e.degree = p0;
      mesh.elements.push_back(e);
    }
  }
  mesh.rebuild();
  return mesh;
}

/// Splits the listed leaves into four quadrants, plus whatever closure
/// refinement 1-irregularity demands. Leaves at level_max are skipped.
inline Mesh refine_elements(const Mesh& mesh, std::span<const int> ids, MeshLog* log = nullptr) {
  std::set<int> requested;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(mesh.elements.size())) {
      throw std::out_of_range("refine_elements: unknown element id " + std::to_string(id));
    }
    if (!mesh.elements[id].is_leaf()) {
      throw std::invalid_argument("refine_elements: element " + std::to_string(id) + " is not a leaf");
    }
    if (mesh.elements[id].level >= mesh.limits.level_max) {
      if (log) {
        log->level_capped.push_back(id);
        log->warnings.push_back("level cap reached at element " + std::to_string(id));
      }
      continue;
    }
    requested.insert(id);
  }
  // Closure: refining a level-l leaf forces coarser (level l-1) face
  // neighbours to be refined too.
  std::set<int> to_refine = requested;
  std::vector<int> work(requested.begin(), requested.end());
  while (!work.empty()) {
    const int id = work.back();
    work.pop_back();
    const Element& e = mesh.elements[id];
    for (int f = 0; f < 4; ++f) {
      for (int nb : mesh.face_neighbors(id, static_cast<Face>(f))) {
        if (mesh.elements[nb].level < e.level && !to_refine.contains(nb)) {
          to_refine.insert(nb);
          work.push_back(nb);
          if (log) log->closure_forced.push_back(nb);
        }
      }
    }
  }
  Mesh out = mesh;
  for (int id : to_refine) {
    const Element parent = out.elements[id];
    const double xm = 0.5 * (parent.rect.x_lo + parent.rect.x_hi);
    const double ym = 0.5 * (parent.rect.y_lo + parent.rect.y_hi);
    for (int c = 0; c < 4; ++c) {
      const int bx = c & 1;
      const int by = c >> 1;
      Element child;
      child.id = static_cast<int>(out.elements.size());
      child.parent = id;
      child.level = parent.level + 1;
      child.ix = 2 * parent.ix + bx;
      child.iy = 2 * parent.iy + by;
      child.rect = {bx ? xm : parent.rect.x_lo, bx ? parent.rect.x_hi : xm, by ? ym : parent.rect.y_lo,
                    by ? parent.rect.y_hi : ym};
      child.degree = parent.degree;
      out.elements[id].children[c] = child.id;
      out.elements.push_back(child);
    }
  }
  if (log) std::sort(log->closure_forced.begin(), log->closure_forced.end());
  out.rebuild();
  return out;
}

/// Raises the degree of the listed leaves by one (capped at p_max). With
/// smoothing, neighbouring degrees are raised until every edge-adjacent
/// pair satisfies max/min <= degree_ratio.
inline Mesh increment_degrees(const Mesh& mesh, std::span<const int> ids, bool smooth, MeshLog* log = nullptr) {
  Mesh out = mesh;
  for (int id : ids) {
    if (id < 0 || id >= static_cast<int>(out.elements.size())) {
      throw std::out_of_range("increment_degrees: unknown element id " + std::to_string(id));
    }
    Element& e = out.elements[id];
    if (!e.is_leaf()) throw std::invalid_argument("increment_degrees: element " + std::to_string(id) + " is not a leaf");
    if (e.degree + 1 > out.limits.p_max) {
      if (log) {
        log->degree_capped.push_back(id);
        log->warnings.push_back("degree cap p_max=" + std::to_string(out.limits.p_max) + " at element " +
                                std::to_string(id));
      }
      e.degree = out.limits.p_max;
    } else {
      ++e.degree;
    }
  }
  if (smooth) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (int id : out.leaves()) {
        for (int f = 0; f < 4; ++f) {
          for (int nb : out.face_neighbors(id, static_cast<Face>(f))) {
            const int hi = out.elements[id].degree;
            int& lo = out.elements[nb].degree;
            if (hi > out.limits.degree_ratio * lo) {
              lo = static_cast<int>(std::ceil(hi / out.limits.degree_ratio));
              changed = true;
              if (log) log->smoothed.push_back(nb);
            }
          }
        }
      }
    }
  }
  out.rebuild();
  return out;
}

/// Deterministic edge list of the current leaves.
inline const std::vector<Edge>& collect_edges(const Mesh& mesh) { return mesh.edges(); }

inline const char* face_name(Face f) {
  switch (f) {
    case Face::left: return "left";
    case Face::right: return "right";
    case Face::bottom: return "bottom";
    case Face::top: return "top";
  }
  return "?";
}

/// {bounds, elements: [{id, rect, level, p}], edges: [...]}; leaves only.
inline nlohmann::json mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  j["bounds"] = {mesh.bounds.x0, mesh.bounds.x1, mesh.bounds.y0, mesh.bounds.y1};
  j["elements"] = nlohmann::json::array();
  for (int id : mesh.leaves()) {
    const Element& e = mesh.elements[id];
    j["elements"].push_back({{"id", e.id},
                             {"rect", {e.rect.x_lo, e.rect.x_hi, e.rect.y_lo, e.rect.y_hi}},
                             {"level", e.level},
                             {"p", e.degree}});
  }
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : mesh.edges()) {
    nlohmann::json sides = nlohmann::json::array();
    for (int s = 0; s < e.side_count(); ++s) {
      sides.push_back({{"element", e.sides[s].element}, {"face", face_name(e.sides[s].face)}});
    }
    j["edges"].push_back({{"a", {e.a.x, e.a.y}},
                          {"b", {e.b.x, e.b.y}},
                          {"kind", e.kind == EdgeKind::interior ? "interior" : "boundary"},
                          {"h", e.length},
                          {"p_e", e.p_e},
                          {"sigma", e.sigma},
                          {"sides", sides}});
  }
  return j;
}

}  // namespace ndg
