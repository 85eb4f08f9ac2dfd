#pragma once

// Confining Morse potentials with exact derivatives, and the Newton search that
// locates and classifies their critical points inside a box.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "metaspec/error.hpp"

namespace metaspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Evaluation {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

namespace detail {

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

inline void require_dimension(const Vec& x, int dim, const char* family) {
  if (x.size() != dim) {
    throw Error("potential", std::string(family) + " field has dimension " + std::to_string(dim) +
                                 ", got a point of dimension " + std::to_string(x.size()));
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw Error("potential", "evaluation point is not finite");
  }
}

}  // namespace detail

/// c * x1^p1 * x2^p2 (p2 ignored in 1D).
struct Monomial {
  double coefficient = 0.0;
  std::array<int, 2> powers{0, 0};
};

class Polynomial {
 public:
  Polynomial(int dimension, std::vector<Monomial> terms) : dim_(dimension), terms_(std::move(terms)) {
    if (dim_ != 1 && dim_ != 2) throw Error("potential", "polynomial dimension must be 1 or 2");
    for (const auto& t : terms_) {
      if (t.powers[0] < 0 || t.powers[1] < 0) throw Error("potential", "negative monomial power");
      if (dim_ == 1 && t.powers[1] != 0) throw Error("potential", "1D polynomial with an x2 power");
    }
  }

  [[nodiscard]] int dimension() const { return dim_; }
  [[nodiscard]] const std::vector<Monomial>& terms() const { return terms_; }

  [[nodiscard]] double value(const Vec& x) const {
    const double x1 = x[0];
    const double x2 = dim_ == 2 ? x[1] : 0.0;
    double v = 0.0;
    for (const auto& t : terms_) v += t.coefficient * detail::ipow(x1, t.powers[0]) * detail::ipow(x2, t.powers[1]);
    return v;
  }

  [[nodiscard]] Evaluation evaluate(const Vec& x) const {
    using detail::ipow;
    Evaluation e{0.0, Vec::Zero(dim_), Mat::Zero(dim_, dim_)};
    const double x1 = x[0];
    const double x2 = dim_ == 2 ? x[1] : 0.0;
    for (const auto& t : terms_) {
      const int p = t.powers[0];
      const int q = t.powers[1];
      const double c = t.coefficient;
      const double a0 = ipow(x1, p);
      const double a1 = p >= 1 ? p * ipow(x1, p - 1) : 0.0;
      const double a2 = p >= 2 ? p * (p - 1) * ipow(x1, p - 2) : 0.0;
      const double b0 = ipow(x2, q);
      const double b1 = q >= 1 ? q * ipow(x2, q - 1) : 0.0;
      const double b2 = q >= 2 ? q * (q - 1) * ipow(x2, q - 2) : 0.0;
      e.value += c * a0 * b0;
      e.gradient[0] += c * a1 * b0;
      e.hessian(0, 0) += c * a2 * b0;
      if (dim_ == 2) {
        e.gradient[1] += c * a0 * b1;
        e.hessian(1, 1) += c * a0 * b2;
        e.hessian(0, 1) += c * a1 * b1;
      }
    }
    if (dim_ == 2) e.hessian(1, 0) = e.hessian(0, 1);
    return e;
  }

 private:
  int dim_;
  std::vector<Monomial> terms_;
};

/// V(x) = k|x|^2 - sum_i d_i exp(-|x - c_i|^2 / (2 w_i^2)).
class GaussianWells {
 public:
  GaussianWells(std::vector<Vec> centers, std::vector<double> depths, std::vector<double> widths,
                double confinement)
      : centers_(std::move(centers)), depths_(std::move(depths)), widths_(std::move(widths)),
        confinement_(confinement) {
    if (centers_.empty()) throw Error("potential", "gaussian wells need at least one center");
    if (depths_.size() != centers_.size() || widths_.size() != centers_.size()) {
      throw Error("potential", "gaussian wells: centers, depths and widths differ in length");
    }
    dim_ = static_cast<int>(centers_.front().size());
    if (dim_ != 1 && dim_ != 2) throw Error("potential", "gaussian wells dimension must be 1 or 2");
    for (const auto& c : centers_) {
      if (c.size() != dim_) throw Error("potential", "gaussian well centers differ in dimension");
    }
    for (double w : widths_) {
      if (!(w > 0.0)) throw Error("potential", "gaussian well widths must be positive");
    }
    if (!(confinement_ > 0.0)) throw Error("potential", "confinement coefficient must be positive");
  }

  [[nodiscard]] int dimension() const { return dim_; }
  [[nodiscard]] const std::vector<Vec>& centers() const { return centers_; }
  [[nodiscard]] const std::vector<double>& depths() const { return depths_; }
  [[nodiscard]] const std::vector<double>& widths() const { return widths_; }
  [[nodiscard]] double confinement() const { return confinement_; }

  [[nodiscard]] double value(const Vec& x) const {
    double v = confinement_ * x.squaredNorm();
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const double w2 = widths_[i] * widths_[i];
      v -= depths_[i] * std::exp(-(x - centers_[i]).squaredNorm() / (2.0 * w2));
    }
    return v;
  }

  [[nodiscard]] Evaluation evaluate(const Vec& x) const {
    Evaluation e{confinement_ * x.squaredNorm(), 2.0 * confinement_ * x,
                 2.0 * confinement_ * Mat::Identity(dim_, dim_)};
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const double w2 = widths_[i] * widths_[i];
      const Vec r = x - centers_[i];
      const double g = depths_[i] * std::exp(-r.squaredNorm() / (2.0 * w2));
      e.value -= g;
      e.gradient += g * r / w2;
      e.hessian += g * (Mat::Identity(dim_, dim_) / w2 - r * r.transpose() / (w2 * w2));
    }
    return e;
  }

 private:
  std::vector<Vec> centers_;
  std::vector<double> depths_;
  std::vector<double> widths_;
  double confinement_;
  int dim_ = 1;
};

/// Natural cubic spline through (knot, value) pairs, continued linearly
/// outside the knot range (the natural end condition makes this C^2).
class Tabulated1d {
 public:
  Tabulated1d(std::vector<double> knots, std::vector<double> values)
      : knots_(std::move(knots)), values_(std::move(values)) {
    const std::size_t n = knots_.size();
    if (n < 3 || values_.size() != n) throw Error("potential", "tabulated potential needs >= 3 knots and matching values");
    for (std::size_t i = 1; i < n; ++i) {
      if (!(knots_[i] > knots_[i - 1])) throw Error("potential", "tabulated knots must be strictly increasing");
    }
    // Tridiagonal system for the second derivatives, natural ends.
    second_.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hl = knots_[i] - knots_[i - 1];
      const double hr = knots_[i + 1] - knots_[i];
      const double a = hl / 6.0;
      const double b = (hl + hr) / 3.0;
      const double cc = hr / 6.0;
      const double rhs = (values_[i + 1] - values_[i]) / hr - (values_[i] - values_[i - 1]) / hl;
      const double denom = b - a * c[i - 1];
      c[i] = cc / denom;
      d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      second_[i] = d[i] - c[i] * second_[i + 1];
    }
  }

  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  [[nodiscard]] std::size_t segment_count() const { return knots_.size() - 1; }

  /// Value, first and second derivative at x.
  [[nodiscard]] std::array<double, 3> eval(double x) const {
    const std::size_t n = knots_.size();
    if (x < knots_.front()) {
      const auto e = eval_segment(0, knots_.front());
      return {e[0] + e[1] * (x - knots_.front()), e[1], 0.0};
    }
    if (x > knots_.back()) {
      const auto e = eval_segment(n - 2, knots_.back());
      return {e[0] + e[1] * (x - knots_.back()), e[1], 0.0};
    }
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    std::size_t seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - knots_.begin()) - 1));
    seg = std::min(seg, n - 2);
    return eval_segment(seg, x);
  }

  [[nodiscard]] std::array<double, 3> eval_segment(std::size_t i, double x) const {
    const double x0 = knots_[i];
    const double x1 = knots_[i + 1];
    const double h = x1 - x0;
    const double a = (x1 - x) / h;
    const double b = (x - x0) / h;
    const double m0 = second_[i];
    const double m1 = second_[i + 1];
    const double v = a * values_[i] + b * values_[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
    const double dv = (values_[i + 1] - values_[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 +
                      (3.0 * b * b - 1.0) * h * m1 / 6.0;
    const double d2v = a * m0 + b * m1;
    return {v, dv, d2v};
  }

  /// Roots of V' inside segment i; V' is quadratic there.
  [[nodiscard]] std::vector<double> derivative_roots(std::size_t i) const {
    const double x0 = knots_[i];
    const double h = knots_[i + 1] - x0;
    const double m0 = second_[i];
    const double m1 = second_[i + 1];
    const double slope = (values_[i + 1] - values_[i]) / h;
    // V'(x0 + t h) as a polynomial in t: c2 t^2 + c1 t + c0.
    const double c2 = (m1 - m0) * h / 2.0;
    const double c1 = m0 * h;
    const double c0 = slope - h * (2.0 * m0 + m1) / 6.0;
    std::vector<double> ts;
    if (std::abs(c2) < 1e-14 * (std::abs(c1) + std::abs(c0) + 1e-300)) {
      if (c1 != 0.0) ts.push_back(-c0 / c1);
    } else {
      const double disc = c1 * c1 - 4.0 * c2 * c0;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (c1 + std::copysign(sq, c1));
        ts.push_back(q / c2);
        if (q != 0.0) ts.push_back(c0 / q);
      }
    }
    std::vector<double> roots;
    for (double t : ts) {
      if (t >= -1e-12 && t <= 1.0 + 1e-12) roots.push_back(x0 + std::clamp(t, 0.0, 1.0) * h);
    }
    return roots;
  }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> second_;
};

class ScalarField;

/// phi(x, y) = y^2/2 + V(x) on phase space, for a 1D potential V.
struct PhaseSpaceLift {
  std::shared_ptr<const ScalarField> base;
};

class ScalarField {
 public:
  using Family = std::variant<Polynomial, GaussianWells, Tabulated1d, PhaseSpaceLift>;

  explicit ScalarField(Family family) : family_(std::move(family)) {}

  [[nodiscard]] const Family& family() const { return family_; }

  [[nodiscard]] int dimension() const;
  [[nodiscard]] std::string family_name() const;
  [[nodiscard]] Evaluation evaluate(const Vec& x) const;
  [[nodiscard]] double value(const Vec& x) const;

  [[nodiscard]] double value(double x) const { return value(Vec::Constant(1, x)); }
  [[nodiscard]] double value(double x, double y) const {
    Vec p(2);
    p << x, y;
    return value(p);
  }
  /// First derivative of a 1D field.
  [[nodiscard]] double derivative(double x) const { return evaluate(Vec::Constant(1, x)).gradient[0]; }

 private:
  Family family_;
};

inline int ScalarField::dimension() const {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Tabulated1d>) {
          return 1;
        } else if constexpr (std::is_same_v<T, PhaseSpaceLift>) {
          return 2;
        } else {
          return f.dimension();
        }
      },
      family_);
}

inline std::string ScalarField::family_name() const {
  switch (family_.index()) {
    case 0: return "polynomial";
    case 1: return "gaussian_wells";
    case 2: return "tabulated_1d";
    default: return "phase_space_lift";
  }
}

inline double ScalarField::value(const Vec& x) const {
  detail::require_dimension(x, dimension(), "scalar");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Tabulated1d>) {
          return f.eval(x[0])[0];
        } else if constexpr (std::is_same_v<T, PhaseSpaceLift>) {
          return 0.5 * x[1] * x[1] + f.base->value(x[0]);
        } else {
          return f.value(x);
        }
      },
      family_);
}

inline Evaluation ScalarField::evaluate(const Vec& x) const {
  detail::require_dimension(x, dimension(), "scalar");
  return std::visit(
      [&](const auto& f) -> Evaluation {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Tabulated1d>) {
          const auto e = f.eval(x[0]);
          return {e[0], Vec::Constant(1, e[1]), Mat::Constant(1, 1, e[2])};
        } else if constexpr (std::is_same_v<T, PhaseSpaceLift>) {
          const Evaluation b = f.base->evaluate(Vec::Constant(1, x[0]));
          Evaluation e{b.value + 0.5 * x[1] * x[1], Vec(2), Mat::Zero(2, 2)};
          e.gradient << b.gradient[0], x[1];
          e.hessian(0, 0) = b.hessian(0, 0);
          e.hessian(1, 1) = 1.0;
          return e;
        } else {
          return f.evaluate(x);
        }
      },
      family_);
}

inline ScalarField phase_space_lift(const ScalarField& potential) {
  if (potential.dimension() != 1) throw Error("potential", "phase-space lift needs a 1D potential");
  return ScalarField(PhaseSpaceLift{std::make_shared<const ScalarField>(potential)});
}

/// Axis-aligned box.
struct Box {
  Vec lower;
  Vec upper;

  [[nodiscard]] int dimension() const { return static_cast<int>(lower.size()); }
  [[nodiscard]] double diameter() const { return (upper - lower).norm(); }
  [[nodiscard]] bool contains(const Vec& x, double slack = 0.0) const {
    for (int i = 0; i < dimension(); ++i) {
      if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    }
    return true;
  }

  static Box interval(double lo, double hi) { return {Vec::Constant(1, lo), Vec::Constant(1, hi)}; }
  static Box rectangle(double x0, double x1, double y0, double y1) {
    Vec lo(2), hi(2);
    lo << x0, y0;
    hi << x1, y1;
    return {lo, hi};
  }
};

struct CriticalPoint {
  int id = 0;
  Vec location;
  double value = 0.0;
  Mat hessian;
  Vec hessian_eigenvalues;  // ascending
  int morse_index = 0;

  [[nodiscard]] bool is_minimum() const { return morse_index == 0; }
  [[nodiscard]] bool is_saddle() const { return morse_index == 1; }
  [[nodiscard]] double min_abs_eigenvalue() const { return hessian_eigenvalues.cwiseAbs().minCoeff(); }
};

struct CriticalSearchOptions {
  int seeds_per_axis = 33;
  double newton_tol = 1e-10;
  double degeneracy_tol = 1e-8;
  double dedupe_radius_factor = 1e-6;  // times the box diameter
  int max_iterations = 200;
  /// When false a degenerate Hessian at a converged point is fatal.
  bool keep_degenerate = false;
};

struct CriticalSearchResult {
  std::vector<CriticalPoint> points;
  int dropped_seeds = 0;
};

namespace detail {

inline CriticalPoint classify(const ScalarField& field, const Vec& x) {
  const Evaluation e = field.evaluate(x);
  Eigen::SelfAdjointEigenSolver<Mat> eig(e.hessian);
  CriticalPoint p;
  p.location = x;
  p.value = e.value;
  p.hessian = e.hessian;
  p.hessian_eigenvalues = eig.eigenvalues();
  p.morse_index = static_cast<int>((eig.eigenvalues().array() < 0.0).count());
  return p;
}

/// Value order with rounding-level ties broken by lexicographic location, so
/// symmetric landscapes order the same way whatever the seed grid.
inline bool ordered_before(const CriticalPoint& a, const CriticalPoint& b) {
  const double tol = 1e-11 * (1.0 + std::max(std::abs(a.value), std::abs(b.value)));
  if (std::abs(a.value - b.value) > tol) return a.value < b.value;
  for (Eigen::Index i = 0; i < a.location.size(); ++i) {
    if (std::abs(a.location[i] - b.location[i]) > 1e-9) return a.location[i] < b.location[i];
  }
  return false;
}

/// Newton on grad V = 0. The Hessian spectrum is floored only to build the step.
inline std::optional<Vec> newton_critical(const ScalarField& field, Vec x, const Box& box,
                                          const CriticalSearchOptions& opt) {
  const double max_step = 0.25 * box.diameter();
  const double floor = 1e-12;
  auto step_from = [&](const Evaluation& e) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(e.hessian);
    Vec s = Vec::Zero(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double lam = eig.eigenvalues()[i];
      const double mod = std::copysign(std::max(std::abs(lam), floor), lam == 0.0 ? 1.0 : lam);
      s -= (eig.eigenvectors().col(i).dot(e.gradient) / mod) * eig.eigenvectors().col(i);
    }
    const double n = s.norm();
    if (n > max_step) s *= max_step / n;
    return s;
  };
  Evaluation e = field.evaluate(x);
  int it = 0;
  for (; it < opt.max_iterations && e.gradient.norm() > opt.newton_tol; ++it) {
    x += step_from(e);
    if (!box.contains(x, 0.1 * box.diameter())) return std::nullopt;
    e = field.evaluate(x);
    if (!std::isfinite(e.value)) return std::nullopt;
  }
  if (e.gradient.norm() > opt.newton_tol) return std::nullopt;
  // Polish while the gradient keeps shrinking; near a degenerate point the
  // steps only contract linearly and this drives x onto the flat spot.
  for (int extra = 0; extra < 200; ++extra) {
    const Vec s = step_from(e);
    if (s.norm() <= 1e-14 * (1.0 + x.norm())) break;
    const Vec xn = x + s;
    const Evaluation en = field.evaluate(xn);
    if (!(en.gradient.norm() < e.gradient.norm())) break;
    x = xn;
    e = en;
  }
  return x;
}

}  // namespace detail

/// Locates all critical points in `box` by Newton iteration from a uniform
/// seed grid (or by exact per-segment roots for tabulated potentials).
inline CriticalSearchResult find_critical_points(const ScalarField& field, const Box& box,
                                                 const CriticalSearchOptions& opt = {}) {
  const int dim = field.dimension();
  if (box.dimension() != dim) throw Error("potential", "search box dimension does not match the field");
  if (opt.seeds_per_axis < 2) throw Error("potential", "seeds_per_axis must be >= 2");

  CriticalSearchResult result;
  std::vector<Vec> converged;

  if (const auto* tab = std::get_if<Tabulated1d>(&field.family())) {
    for (std::size_t s = 0; s < tab->segment_count(); ++s) {
      for (double r : tab->derivative_roots(s)) {
        Vec seed = Vec::Constant(1, r);
        if (!box.contains(seed)) continue;
        if (auto x = detail::newton_critical(field, seed, box, opt)) {
          converged.push_back(*x);
        } else {
          ++result.dropped_seeds;
        }
      }
    }
  } else {
    const int n = opt.seeds_per_axis;
    const int total = dim == 1 ? n : n * n;
    for (int k = 0; k < total; ++k) {
      Vec seed(dim);
      const int idx[2] = {k % n, k / n};
      for (int a = 0; a < dim; ++a) {
        seed[a] = box.lower[a] + (box.upper[a] - box.lower[a]) * idx[a] / (n - 1);
      }
      if (auto x = detail::newton_critical(field, seed, box, opt); x && box.contains(*x, 1e-9 * box.diameter())) {
        converged.push_back(*x);
      } else {
        ++result.dropped_seeds;
      }
    }
  }

  std::vector<CriticalPoint> candidates;
  candidates.reserve(converged.size());
  for (const Vec& x : converged) candidates.push_back(detail::classify(field, x));
  const auto before = [](const CriticalPoint& a, const CriticalPoint& b) { return detail::ordered_before(a, b); };
  std::sort(candidates.begin(), candidates.end(), before);

  const double radius = opt.dedupe_radius_factor * box.diameter();
  for (auto& c : candidates) {
    const bool dup = std::any_of(result.points.begin(), result.points.end(),
                                 [&](const CriticalPoint& p) { return (p.location - c.location).norm() <= radius; });
    if (!dup) result.points.push_back(std::move(c));
  }
  std::sort(result.points.begin(), result.points.end(), before);

  if (result.points.empty()) throw Error("potential", "no critical points found in the search box");
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    auto& p = result.points[i];
    p.id = static_cast<int>(i);
    if (!opt.keep_degenerate && p.min_abs_eigenvalue() < 2.0 * opt.degeneracy_tol) {
      throw Error("potential", "degenerate critical point (not Morse) at value " + std::to_string(p.value));
    }
  }
  return result;
}

struct MorseReport {
  bool all_nondegenerate = true;
  std::vector<int> degenerate_ids;
  int n0 = 0;  // minima
  int n1 = 0;  // index-1 saddles
  int n_higher = 0;
  double min_shell_gradient = 0.0;      // min |grad V| on the box boundary
  double min_shell_outward_slope = 0.0;  // min grad V . outward normal
  double min_shell_value = 0.0;
  double max_critical_value = 0.0;

  [[nodiscard]] bool confined() const { return min_shell_outward_slope > 0.0 && min_shell_value > max_critical_value; }
};

inline MorseReport verify_morse_and_confinement(const ScalarField& field, const std::vector<CriticalPoint>& points,
                                                const Box& box, double degeneracy_tol = 1e-8,
                                                int shell_samples = 128) {
  MorseReport r;
  r.max_critical_value = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.min_abs_eigenvalue() < 2.0 * degeneracy_tol) {
      r.all_nondegenerate = false;
      r.degenerate_ids.push_back(p.id);
    }
    if (p.morse_index == 0) {
      ++r.n0;
    } else if (p.morse_index == 1) {
      ++r.n1;
    } else {
      ++r.n_higher;
    }
    r.max_critical_value = std::max(r.max_critical_value, p.value);
  }

  double gmin = std::numeric_limits<double>::infinity();
  double smin = std::numeric_limits<double>::infinity();
  double vmin = std::numeric_limits<double>::infinity();
  auto probe = [&](const Vec& x, const Vec& normal) {
    const Evaluation e = field.evaluate(x);
    gmin = std::min(gmin, e.gradient.norm());
    smin = std::min(smin, e.gradient.dot(normal));
    vmin = std::min(vmin, e.value);
  };
  const int dim = box.dimension();
  if (dim == 1) {
    probe(box.lower, Vec::Constant(1, -1.0));
    probe(box.upper, Vec::Constant(1, 1.0));
  } else {
    for (int i = 0; i <= shell_samples; ++i) {
      const double t = static_cast<double>(i) / shell_samples;
      const double x = box.lower[0] + t * (box.upper[0] - box.lower[0]);
      const double y = box.lower[1] + t * (box.upper[1] - box.lower[1]);
      Vec p(2), n(2);
      p << x, box.lower[1]; n << 0.0, -1.0; probe(p, n);
      p << x, box.upper[1]; n << 0.0, 1.0; probe(p, n);
      p << box.lower[0], y; n << -1.0, 0.0; probe(p, n);
      p << box.upper[0], y; n << 1.0, 0.0; probe(p, n);
    }
  }
  r.min_shell_gradient = gmin;
  r.min_shell_outward_slope = smin;
  r.min_shell_value = vmin;
  return r;
}

inline std::vector<CriticalPoint> minima_of(const std::vector<CriticalPoint>& points) {
  std::vector<CriticalPoint> out;
  std::copy_if(points.begin(), points.end(), std::back_inserter(out), [](const auto& p) { return p.is_minimum(); });
  return out;
}

inline const CriticalPoint& point_by_id(const std::vector<CriticalPoint>& points, int id) {
  for (const auto& p : points) {
    if (p.id == id) return p;
  }
  throw Error("potential", "unknown critical point id " + std::to_string(id));
}

}  // namespace metaspec
