#pragma once

// Separating saddles, the labelling of local minima by critical components
// (union-find sweep over a sampling grid), a brute-force level-sampling oracle,
// genericity and gap checks.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metaspec/error.hpp"
#include "metaspec/potential.hpp"

namespace metaspec {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Field values on a uniform tensor grid over a box, 2- or 4-neighbour graph.
class SamplingGrid {
 public:
  SamplingGrid(const ScalarField& field, Box box, int points_per_axis) : box_(std::move(box)) {
    dim_ = box_.dimension();
    if (dim_ != field.dimension()) throw Error("topology", "sampling grid dimension does not match the field");
    if (points_per_axis < 3) throw Error("topology", "sampling grid needs >= 3 points per axis");
    n_[0] = points_per_axis;
    n_[1] = dim_ == 2 ? points_per_axis : 1;
    for (int a = 0; a < dim_; ++a) spacing_[a] = (box_.upper[a] - box_.lower[a]) / (points_per_axis - 1);
    values_.resize(static_cast<std::size_t>(n_[0]) * n_[1]);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = field.value(node(static_cast<int>(i)));
  }

  [[nodiscard]] int dimension() const { return dim_; }
  [[nodiscard]] int size() const { return static_cast<int>(values_.size()); }
  [[nodiscard]] const Box& box() const { return box_; }
  [[nodiscard]] double spacing(int axis) const { return spacing_[axis]; }
  [[nodiscard]] double max_spacing() const { return dim_ == 2 ? std::max(spacing_[0], spacing_[1]) : spacing_[0]; }
  [[nodiscard]] double value(int i) const { return values_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  [[nodiscard]] Vec node(int i) const {
    Vec x(dim_);
    x[0] = box_.lower[0] + (i % n_[0]) * spacing_[0];
    if (dim_ == 2) x[1] = box_.lower[1] + (i / n_[0]) * spacing_[1];
    return x;
  }

  [[nodiscard]] int nearest(const Vec& x) const {
    int idx[2] = {0, 0};
    for (int a = 0; a < dim_; ++a) {
      const double t = std::round((x[a] - box_.lower[a]) / spacing_[a]);
      idx[a] = static_cast<int>(std::clamp(t, 0.0, static_cast<double>(n_[a] - 1)));
    }
    return idx[0] + n_[0] * idx[1];
  }

  template <class F>
  void for_each_neighbour(int i, F&& f) const {
    const int ix = i % n_[0];
    const int iy = i / n_[0];
    if (ix > 0) f(i - 1);
    if (ix + 1 < n_[0]) f(i + 1);
    if (dim_ == 2) {
      if (iy > 0) f(i - n_[0]);
      if (iy + 1 < n_[1]) f(i + n_[0]);
    }
  }

 private:
  Box box_;
  int dim_ = 1;
  int n_[2] = {1, 1};
  double spacing_[2] = {0.0, 0.0};
  std::vector<double> values_;
};

struct SaddleInfo {
  int critical_point_id = 0;
  bool is_separating = false;
  std::array<Vec, 2> descending_component_reps;
  std::array<std::vector<int>, 2> component_minima;  // minima ids reached from each rep
  double level = 0.0;                                // flood-fill level V(s) - margin
};

struct SaddleDetectionOptions {
  double seed_radius_cells = 4.0;
  /// Negative: use the curvature variation across one cell at the saddle.
  double level_margin = -1.0;
};

namespace detail {

/// Nodes of {V < level} connected to `start` (empty if start is not below level).
inline std::vector<char> flood(const SamplingGrid& grid, int start, double level) {
  std::vector<char> seen(static_cast<std::size_t>(grid.size()), 0);
  if (!(grid.value(start) < level)) return seen;
  std::deque<int> queue{start};
  seen[static_cast<std::size_t>(start)] = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    grid.for_each_neighbour(u, [&](int v) {
      if (!seen[static_cast<std::size_t>(v)] && grid.value(v) < level) {
        seen[static_cast<std::size_t>(v)] = 1;
        queue.push_back(v);
      }
    });
  }
  return seen;
}

inline int grid_descend(const SamplingGrid& grid, int i) {
  for (;;) {
    int best = i;
    grid.for_each_neighbour(i, [&](int v) {
      if (grid.value(v) < grid.value(best)) best = v;
    });
    if (best == i) return i;
    i = best;
  }
}

inline std::vector<int> snapped_minima(const SamplingGrid& grid, const std::vector<CriticalPoint>& points) {
  std::vector<int> nodes(points.size(), -1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].is_minimum()) continue;
    if (!grid.box().contains(points[i].location)) {
      throw Error("topology", "minimum " + std::to_string(points[i].id) + " lies outside the sampling grid");
    }
    nodes[i] = grid.nearest(points[i].location);
    for (std::size_t j = 0; j < i; ++j) {
      if (nodes[j] == nodes[i]) throw Error("topology", "two minima snap to the same grid node; refine the grid");
    }
  }
  return nodes;
}

inline bool intersects(const std::vector<int>& a, const std::vector<int>& b) {
  return std::any_of(a.begin(), a.end(), [&](int x) { return std::find(b.begin(), b.end(), x) != b.end(); });
}

}  // namespace detail

/// Marks each index-1 point separating iff its two descending seeds fall into
/// different components of the discrete sublevel set just below the saddle.
inline std::vector<SaddleInfo> detect_separating_saddles(const ScalarField& field,
                                                         const std::vector<CriticalPoint>& points,
                                                         const SamplingGrid& grid,
                                                         const SaddleDetectionOptions& opt = {}) {
  const auto min_nodes = detail::snapped_minima(grid, points);
  const double dx = grid.max_spacing();
  std::vector<SaddleInfo> out;
  for (const auto& s : points) {
    if (!s.is_saddle()) continue;
    Eigen::SelfAdjointEigenSolver<Mat> eig(s.hessian);
    const Vec w = eig.eigenvectors().col(0);
    const double margin =
        opt.level_margin >= 0.0 ? opt.level_margin : 0.5 * eig.eigenvalues().cwiseAbs().maxCoeff() * dx * dx;
    SaddleInfo info;
    info.critical_point_id = s.id;
    info.level = s.value - margin;
    const double r = opt.seed_radius_cells * dx;
    std::array<int, 2> seeds{};
    for (int side = 0; side < 2; ++side) {
      const Vec rep = s.location + (side == 0 ? -r : r) * w;
      if (!grid.box().contains(rep)) {
        throw Error("topology", "descending seed of saddle " + std::to_string(s.id) + " lies outside the grid");
      }
      if (!(field.value(rep) < info.level)) {
        throw Error("topology", "descending seed of saddle " + std::to_string(s.id) +
                                    " is not below the saddle level; grid too coarse or seed radius too large");
      }
      info.descending_component_reps[static_cast<std::size_t>(side)] = rep;
      seeds[static_cast<std::size_t>(side)] = detail::grid_descend(grid, grid.nearest(rep));
      if (!(grid.value(seeds[static_cast<std::size_t>(side)]) < info.level)) {
        throw Error("topology", "grid seed of saddle " + std::to_string(s.id) + " is not below the flood level");
      }
    }
    const auto reach = detail::flood(grid, seeds[0], info.level);
    info.is_separating = !reach[static_cast<std::size_t>(seeds[1])];
    const auto reach_b = info.is_separating ? detail::flood(grid, seeds[1], info.level) : reach;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (min_nodes[i] < 0) continue;
      if (reach[static_cast<std::size_t>(min_nodes[i])]) info.component_minima[0].push_back(points[i].id);
      if (reach_b[static_cast<std::size_t>(min_nodes[i])]) info.component_minima[1].push_back(points[i].id);
    }
    out.push_back(std::move(info));
  }
  return out;
}

struct LabelledMinimum {
  int minimum_id = 0;
  std::pair<int, int> label{1, 1};  // (k_sigma, k_cc)
  double minimum_value = 0.0;
  double sigma = kInfinity;
  double barrier = kInfinity;  // S_k
  int assigned_saddle_id = -1;
  std::vector<int> component_member_min_ids;
  /// Separating saddles at level sigma on the boundary of the critical component.
  std::vector<int> boundary_saddle_ids;
};

struct MergeEvent {
  double grid_level = 0.0;
  double sigma = 0.0;
  int saddle_id = -1;
  int survivor_min_id = -1;
  int loser_min_id = -1;
  std::vector<int> survivor_members;
  std::vector<int> loser_members;
};

struct MergeTreeNode {
  int minimum_id = 0;
  double death_value = kInfinity;
  int death_saddle_id = -1;
  int parent_minimum_id = -1;  // component it merges into; -1 for the root
};

struct MergeTree {
  std::vector<MergeTreeNode> nodes;
  std::vector<double> sigma_levels;  // +inf first, then decreasing
};

struct Labelling {
  std::vector<LabelledMinimum> minima;  // sorted by label
  MergeTree tree;
  std::vector<MergeEvent> events;       // in sweep order
  double level_tol = 1e-9;

  [[nodiscard]] const LabelledMinimum& by_minimum(int id) const {
    for (const auto& m : minima) {
      if (m.minimum_id == id) return m;
    }
    throw Error("topology", "no labelled minimum with id " + std::to_string(id));
  }
};

struct LabellingOptions {
  double level_tol = 1e-9;  // saddle values closer than this form one level
};

/// Union-find sweep over grid nodes in increasing V. When two components that
/// both hold a true minimum meet, the one with the higher minimum dies at the
/// value of the separating saddle joining them.
inline Labelling label_minima(const std::vector<CriticalPoint>& points, const std::vector<SaddleInfo>& saddles,
                              const SamplingGrid& grid, const LabellingOptions& opt = {}) {
  const auto min_nodes = detail::snapped_minima(grid, points);
  const int n0 = static_cast<int>(std::count_if(points.begin(), points.end(), [](const auto& p) { return p.is_minimum(); }));
  if (n0 == 0) throw Error("topology", "no local minimum to label");

  std::vector<int> node_min(static_cast<std::size_t>(grid.size()), -1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (min_nodes[i] >= 0) node_min[static_cast<std::size_t>(min_nodes[i])] = static_cast<int>(i);
  }

  // Union-find with per-root minimum data (indices into `points`).
  std::vector<int> parent(static_cast<std::size_t>(grid.size()), -1);
  std::vector<int> best(static_cast<std::size_t>(grid.size()), -1);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(grid.size()));
  auto find = [&](int x) {
    int r = x;
    while (parent[static_cast<std::size_t>(r)] != r) r = parent[static_cast<std::size_t>(r)];
    while (parent[static_cast<std::size_t>(x)] != r) {
      const int next = parent[static_cast<std::size_t>(x)];
      parent[static_cast<std::size_t>(x)] = r;
      x = next;
    }
    return r;
  };

  std::vector<int> order(static_cast<std::size_t>(grid.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return grid.value(a) < grid.value(b); });

  auto ids_of = [&](const std::vector<int>& idx) {
    std::vector<int> ids;
    for (int i : idx) ids.push_back(points[static_cast<std::size_t>(i)].id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  Labelling result;
  result.level_tol = opt.level_tol;
  for (int u : order) {
    parent[static_cast<std::size_t>(u)] = u;
    if (node_min[static_cast<std::size_t>(u)] >= 0) {
      best[static_cast<std::size_t>(u)] = node_min[static_cast<std::size_t>(u)];
      members[static_cast<std::size_t>(u)] = {node_min[static_cast<std::size_t>(u)]};
    }
    grid.for_each_neighbour(u, [&](int v) {
      if (parent[static_cast<std::size_t>(v)] < 0) return;
      const int ru = find(u);
      const int rv = find(v);
      if (ru == rv) return;
      const int bu = best[static_cast<std::size_t>(ru)];
      const int bv = best[static_cast<std::size_t>(rv)];
      int keep = ru, drop = rv;
      if (bu >= 0 && bv >= 0) {
        const bool u_wins = detail::ordered_before(points[static_cast<std::size_t>(bu)], points[static_cast<std::size_t>(bv)]);
        keep = u_wins ? ru : rv;
        drop = u_wins ? rv : ru;
        MergeEvent ev;
        ev.grid_level = grid.value(u);
        ev.survivor_min_id = points[static_cast<std::size_t>(best[static_cast<std::size_t>(keep)])].id;
        ev.loser_min_id = points[static_cast<std::size_t>(best[static_cast<std::size_t>(drop)])].id;
        ev.survivor_members = ids_of(members[static_cast<std::size_t>(keep)]);
        ev.loser_members = ids_of(members[static_cast<std::size_t>(drop)]);
        double gap = kInfinity;
        for (const auto& s : saddles) {
          if (!s.is_separating) continue;
          const bool joins =
              (detail::intersects(s.component_minima[0], ev.survivor_members) &&
               detail::intersects(s.component_minima[1], ev.loser_members)) ||
              (detail::intersects(s.component_minima[1], ev.survivor_members) &&
               detail::intersects(s.component_minima[0], ev.loser_members));
          if (!joins) continue;
          const double value = point_by_id(points, s.critical_point_id).value;
          if (std::abs(value - ev.grid_level) < gap) {
            gap = std::abs(value - ev.grid_level);
            ev.saddle_id = s.critical_point_id;
            ev.sigma = value;
          }
        }
        if (ev.saddle_id < 0) {
          throw Error("topology", "components of minima " + std::to_string(ev.survivor_min_id) + " and " +
                                      std::to_string(ev.loser_min_id) + " merge at level " +
                                      std::to_string(ev.grid_level) +
                                      " without a separating saddle between them; grid too coarse");
        }
        result.events.push_back(std::move(ev));
      } else if (bu < 0) {
        keep = rv;
        drop = ru;
      }
      parent[static_cast<std::size_t>(drop)] = keep;
      auto& km = members[static_cast<std::size_t>(keep)];
      auto& dm = members[static_cast<std::size_t>(drop)];
      km.insert(km.end(), dm.begin(), dm.end());
      dm.clear();
      dm.shrink_to_fit();
    });
  }
  const int root = find(order.front());
  if (static_cast<int>(members[static_cast<std::size_t>(root)].size()) != n0) {
    throw Error("topology", "sampling grid is disconnected from some minima");
  }

  // Distinct saddle levels, decreasing, with +inf first.
  std::vector<double> sig;
  for (const auto& ev : result.events) sig.push_back(ev.sigma);
  std::sort(sig.begin(), sig.end(), std::greater<>());
  result.tree.sigma_levels.push_back(kInfinity);
  for (double s : sig) {
    if (std::abs(result.tree.sigma_levels.back() - s) > opt.level_tol) result.tree.sigma_levels.push_back(s);
  }
  auto level_index = [&](double s) {
    for (std::size_t k = 1; k < result.tree.sigma_levels.size(); ++k) {
      if (std::abs(result.tree.sigma_levels[k] - s) <= opt.level_tol) return static_cast<int>(k) + 1;
    }
    return 1;
  };

  for (const auto& p : points) {
    if (!p.is_minimum()) continue;
    LabelledMinimum lm;
    lm.minimum_id = p.id;
    lm.minimum_value = p.value;
    MergeTreeNode node;
    node.minimum_id = p.id;
    for (const auto& ev : result.events) {
      if (ev.loser_min_id != p.id) continue;
      lm.sigma = ev.sigma;
      lm.barrier = ev.sigma - p.value;
      lm.assigned_saddle_id = ev.saddle_id;
      lm.component_member_min_ids = ev.loser_members;
      node.death_value = ev.sigma;
      node.death_saddle_id = ev.saddle_id;
      node.parent_minimum_id = ev.survivor_min_id;
    }
    if (lm.assigned_saddle_id < 0) {
      std::vector<int> all;
      for (const auto& q : points) {
        if (q.is_minimum()) all.push_back(q.id);
      }
      lm.component_member_min_ids = all;
    } else {
      for (const auto& s : saddles) {
        if (!s.is_separating) continue;
        if (std::abs(point_by_id(points, s.critical_point_id).value - lm.sigma) > opt.level_tol) continue;
        const bool a = detail::intersects(s.component_minima[0], lm.component_member_min_ids);
        const bool b = detail::intersects(s.component_minima[1], lm.component_member_min_ids);
        if (a != b) lm.boundary_saddle_ids.push_back(s.critical_point_id);
      }
    }
    result.minima.push_back(std::move(lm));
    result.tree.nodes.push_back(node);
  }

  // k_cc counts the components born at one level, in order of their minima.
  std::sort(result.minima.begin(), result.minima.end(), [&](const LabelledMinimum& a, const LabelledMinimum& b) {
    const int la = a.assigned_saddle_id < 0 ? 1 : level_index(a.sigma);
    const int lb = b.assigned_saddle_id < 0 ? 1 : level_index(b.sigma);
    if (la != lb) return la < lb;
    return detail::ordered_before(point_by_id(points, a.minimum_id), point_by_id(points, b.minimum_id));
  });
  int previous = 0, counter = 0;
  for (auto& m : result.minima) {
    const int level = m.assigned_saddle_id < 0 ? 1 : level_index(m.sigma);
    counter = level == previous ? counter + 1 : 1;
    previous = level;
    m.label = {level, counter};
  }
  return result;
}

struct BruteForcePairing {
  std::vector<std::pair<int, double>> sigma;  // minimum id -> first merge level (non-global minima)
  double level_step = 0.0;
};

/// Independent oracle: for each non-global minimum, the smallest sampled level
/// at which its connected component of {V < t} reaches a lower minimum.
inline BruteForcePairing brute_force_pairing(const std::vector<CriticalPoint>& points, const SamplingGrid& grid,
                                             int level_samples, std::optional<std::pair<double, double>> range = {}) {
  if (level_samples < 2) throw Error("topology", "brute-force pairing needs at least two levels");
  std::vector<const CriticalPoint*> minima;
  double hi = -kInfinity;
  for (const auto& p : points) {
    if (p.is_minimum()) minima.push_back(&p);
    if (p.is_saddle()) hi = std::max(hi, p.value);
  }
  std::sort(minima.begin(), minima.end(), [](const auto* a, const auto* b) { return detail::ordered_before(*a, *b); });
  BruteForcePairing out;
  if (minima.size() < 2) return out;
  double lo = minima.front()->value;
  if (range) {
    lo = range->first;
    hi = range->second;
  } else {
    hi += 0.1 * (hi - lo);
  }
  out.level_step = (hi - lo) / (level_samples - 1);
  auto level = [&](int i) { return lo + i * out.level_step; };

  for (std::size_t k = 1; k < minima.size(); ++k) {
    const int start = grid.nearest(minima[k]->location);
    std::vector<int> lower;
    for (std::size_t j = 0; j < k; ++j) lower.push_back(grid.nearest(minima[j]->location));
    auto merged = [&](int i) {
      const auto seen = detail::flood(grid, start, level(i));
      return std::any_of(lower.begin(), lower.end(), [&](int n) { return seen[static_cast<std::size_t>(n)] != 0; });
    };
    if (!merged(level_samples - 1)) {
      out.sigma.emplace_back(minima[k]->id, kInfinity);
      continue;
    }
    int a = 0, b = level_samples - 1;  // merged(b) holds
    if (merged(a)) b = a;
    while (b - a > 1) {
      const int m = (a + b) / 2;
      (merged(m) ? b : a) = m;
    }
    out.sigma.emplace_back(minima[k]->id, level(b));
  }
  return out;
}

struct GenericityReport {
  bool generic = true;
  std::vector<std::string> violations;
};

/// Checks (a) unique minimum in each critical component, (b) binary splits,
/// (c) a single separating saddle on each critical component boundary.
inline GenericityReport is_generic(const Labelling& lab, const std::vector<CriticalPoint>& points, double tol) {
  GenericityReport r;
  auto unique_min = [&](const std::vector<int>& ids, const std::string& what) {
    if (ids.size() < 2) return;
    std::vector<double> v;
    for (int id : ids) v.push_back(point_by_id(points, id).value);
    std::sort(v.begin(), v.end());
    if (v[1] - v[0] <= tol) {
      r.violations.push_back("(a) minimum value of " + what + " attained at more than one minimum");
    }
  };
  std::vector<int> all;
  for (const auto& m : lab.minima) all.push_back(m.minimum_id);
  unique_min(all, "the whole space");
  for (const auto& ev : lab.events) {
    unique_min(ev.loser_members, "the component of minimum " + std::to_string(ev.loser_min_id));
    unique_min(ev.survivor_members, "the component of minimum " + std::to_string(ev.survivor_min_id));
  }
  // (b): several merges into the same component at one level means a split into >= 3.
  for (std::size_t i = 0; i < lab.events.size(); ++i) {
    for (std::size_t j = i + 1; j < lab.events.size(); ++j) {
      const auto& a = lab.events[i];
      const auto& b = lab.events[j];
      if (std::abs(a.sigma - b.sigma) > tol) continue;
      std::vector<int> after_a = a.survivor_members;
      after_a.insert(after_a.end(), a.loser_members.begin(), a.loser_members.end());
      if (detail::intersects(after_a, b.survivor_members) || detail::intersects(after_a, b.loser_members)) {
        r.violations.push_back("(b) saddles " + std::to_string(a.saddle_id) + " and " + std::to_string(b.saddle_id) +
                               " split one component at the same level " + std::to_string(a.sigma));
      }
    }
  }
  for (const auto& m : lab.minima) {
    if (m.assigned_saddle_id < 0) continue;
    if (m.boundary_saddle_ids.size() != 1) {
      std::string ids;
      for (int s : m.boundary_saddle_ids) ids += (ids.empty() ? "" : ",") + std::to_string(s);
      r.violations.push_back("(c) component of minimum " + std::to_string(m.minimum_id) +
                             " has equal-value separating saddles {" + ids + "} on its boundary");
    }
  }
  r.generic = r.violations.empty();
  return r;
}

struct GapConditions {
  bool fa1_holds = false;
  bool fa2_holds = false;
  double S_gap = 0.0;
};

/// fa1: the largest finite barrier strictly exceeds the others; fa2: its
/// component boundary carries exactly one separating saddle. With a single
/// finite barrier the gap is measured against 0.
inline GapConditions gap_conditions(const Labelling& lab, double tol = 1e-9) {
  std::vector<const LabelledMinimum*> finite;
  for (const auto& m : lab.minima) {
    if (std::isfinite(m.barrier)) finite.push_back(&m);
  }
  GapConditions g;
  if (finite.empty()) return g;
  std::stable_sort(finite.begin(), finite.end(), [](const auto* a, const auto* b) { return a->barrier > b->barrier; });
  g.S_gap = finite.size() > 1 ? finite[0]->barrier - finite[1]->barrier : finite[0]->barrier;
  g.fa1_holds = g.S_gap > tol;
  g.fa2_holds = finite[0]->boundary_saddle_ids.size() == 1;
  return g;
}

}  // namespace metaspec
