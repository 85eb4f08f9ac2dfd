#pragma once

// Numerical ground truth: finite-difference KFP and Witten operators, a dense
// and a shift-invert eigensolver, and the comparison against the asymptotics.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "metaspec/asymptotics.hpp"
#include "metaspec/error.hpp"
#include "metaspec/potential.hpp"

namespace metaspec {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Cplx = std::complex<double>;

class Grid {
 public:
  Grid(std::vector<double> extent, std::vector<int> points) : extent_(std::move(extent)), points_(std::move(points)) {
    if (extent_.empty() || extent_.size() > 2 || extent_.size() != points_.size()) {
      throw Error("oracle", "grid needs one or two axes with matching extent and point counts");
    }
    for (std::size_t a = 0; a < extent_.size(); ++a) {
      if (points_[a] < 32) throw Error("oracle", "grid axis with fewer than 32 points");
      if (!(extent_[a] > 0.0)) throw Error("oracle", "grid extent must be positive");
    }
  }

  [[nodiscard]] int dimension() const { return static_cast<int>(extent_.size()); }
  [[nodiscard]] double extent(int a) const { return extent_[static_cast<std::size_t>(a)]; }
  [[nodiscard]] int points(int a) const { return points_[static_cast<std::size_t>(a)]; }
  [[nodiscard]] double spacing(int a) const { return 2.0 * extent(a) / (points(a) - 1); }
  [[nodiscard]] double coordinate(int a, int i) const { return -extent(a) + i * spacing(a); }
  [[nodiscard]] Eigen::Index size() const {
    Eigen::Index n = 1;
    for (int p : points_) n *= p;
    return n;
  }
  // x-major: the last axis varies fastest
  [[nodiscard]] Eigen::Index index(int i, int j = 0) const { return dimension() == 1 ? i : Eigen::Index(i) * points(1) + j; }
  [[nodiscard]] Vec node(Eigen::Index k) const {
    Vec p(dimension());
    if (dimension() == 1) {
      p[0] = coordinate(0, static_cast<int>(k));
    } else {
      p[0] = coordinate(0, static_cast<int>(k / points(1)));
      p[1] = coordinate(1, static_cast<int>(k % points(1)));
    }
    return p;
  }
  /// Grid with every spacing halved: N -> 2N - 1.
  [[nodiscard]] Grid refined() const {
    std::vector<int> n = points_;
    for (int& v : n) v = 2 * v - 1;
    return Grid(extent_, n);
  }

 private:
  std::vector<double> extent_;
  std::vector<int> points_;
};

/// Smallest value of phi over the boundary nodes of the grid.
inline double boundary_minimum(const Grid& grid, const std::function<double(const Vec&)>& phi) {
  double lo = kInfinity;
  if (grid.dimension() == 1) {
    for (int i : {0, grid.points(0) - 1}) lo = std::min(lo, phi(grid.node(i)));
    return lo;
  }
  const int nx = grid.points(0), ny = grid.points(1);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) lo = std::min(lo, phi(grid.node(grid.index(i, j))));
    }
  }
  return lo;
}

inline void require_boundary_level(const Grid& grid, const std::function<double(const Vec&)>& phi, double level) {
  const double lo = boundary_minimum(grid, phi);
  if (!(lo >= level)) {
    throw Error("oracle", "domain too small: boundary potential " + std::to_string(lo) + " is below the required level " +
                              std::to_string(level));
  }
}

/// Half-width per axis so that V on the boundary is at least `level`; for the
/// KFP phase space the velocity axis gets max(12 sqrt(h), 4).
struct DomainRule {
  double margin = 2.0;
  double step = 0.05;
  double start = 0.5;
  double max_extent = 50.0;
};

inline std::vector<double> domain_extent(const ScalarField& field, double sigma_max, double h, OperatorKind kind,
                                         const DomainRule& rule = {}) {
  const int d = field.dimension();
  const double level = sigma_max + rule.margin;
  auto edge_min = [&](double L) {
    if (d == 1) return std::min(field.value(-L), field.value(L));
    double lo = kInfinity;
    const int n = 400;
    for (int k = 0; k <= n; ++k) {
      const double t = -L + 2.0 * L * k / n;
      lo = std::min({lo, field.value(-L, t), field.value(L, t), field.value(t, -L), field.value(t, L)});
    }
    return lo;
  };
  double L = rule.start;
  while (edge_min(L) < level) {
    L += rule.step;
    if (L > rule.max_extent) throw Error("oracle", "no domain reaches the boundary level within the search range");
  }
  std::vector<double> out(static_cast<std::size_t>(d), L);
  if (kind == OperatorKind::kfp) {
    if (d != 1) throw Error("oracle", "KFP is discretized for one-dimensional potentials only");
    out.push_back(std::max(12.0 * std::sqrt(h), 4.0));
  }
  return out;
}

struct DiscreteOperator {
  OperatorKind kind = OperatorKind::kfp;
  SpMat matrix;
  std::optional<SpMat> factor;  // matrix == factor^T factor when present
  Grid grid;
  double gamma = 0.0;
  double h = 0.0;
  Vec kernel_probe;  // sampled Maxwellian or e^{-phi/h}, scaled to max 1
  double cell_peclet = 0.0;

  [[nodiscard]] Eigen::Index size() const { return matrix.rows(); }
  [[nodiscard]] double kernel_residual() const { return (matrix * kernel_probe).norm() / kernel_probe.norm(); }
  [[nodiscard]] double norm_inf() const {
    double best = 0.0;
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
      double s = 0.0;
      for (SpMat::InnerIterator it(matrix, r); it; ++it) s += std::abs(it.value());
      best = std::max(best, s);
    }
    return best;
  }
  [[nodiscard]] double symmetry_defect() const {
    const SpMat t = matrix.transpose();
    return (matrix - t).norm() / matrix.norm();
  }
  [[nodiscard]] Eigen::Index max_row_nonzeros() const {
    Eigen::Index best = 0;
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
      Eigen::Index c = 0;
      for (SpMat::InnerIterator it(matrix, r); it; ++it) c += it.value() != 0.0;
      best = std::max(best, c);
    }
    return best;
  }
};

enum class Transport { upwind2, central };

struct KfpOptions {
  Transport transport = Transport::upwind2;
  std::optional<double> boundary_level;
};

/// P = y h Dx - V'(x) h Dy + (gamma/2)(y^2 - h - h^2 Dyy) on the (x, y) grid,
/// zero outside. Upwinding follows the sign of y, second order one-sided.
inline DiscreteOperator discretize_kfp(const ScalarField& V, double gamma, double h, const Grid& grid,
                                       const KfpOptions& opt = {}) {
  if (V.dimension() != 1) throw Error("oracle", "discretize_kfp needs a one-dimensional potential");
  if (grid.dimension() != 2) throw Error("oracle", "discretize_kfp needs a two-dimensional phase-space grid");
  if (!(gamma > 0.0) || !(h > 0.0)) throw Error("oracle", "gamma and h must be positive");
  const int nx = grid.points(0), ny = grid.points(1);
  const double dx = grid.spacing(0), dy = grid.spacing(1);
  std::vector<double> vx(static_cast<std::size_t>(nx)), dvx(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) {
    const auto e = V.evaluate(Vec::Constant(1, grid.coordinate(0, i)));
    vx[static_cast<std::size_t>(i)] = e.value;
    dvx[static_cast<std::size_t>(i)] = e.gradient[0];
  }
  if (opt.boundary_level) {
    require_boundary_level(grid, [&](const Vec& p) { return 0.5 * p[1] * p[1] + V.value(p[0]); }, *opt.boundary_level);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(grid.size()) * 6);
  auto add = [&](int i, int j, int ii, int jj, double v) {
    if (ii < 0 || jj < 0 || ii >= nx || jj >= ny || v == 0.0) return;
    trip.emplace_back(grid.index(i, j), grid.index(ii, jj), v);
  };
  double max_dv = 0.0;
  for (double d : dvx) max_dv = std::max(max_dv, std::abs(d));
  for (int i = 0; i < nx; ++i) {
    const double dv = dvx[static_cast<std::size_t>(i)];
    for (int j = 0; j < ny; ++j) {
      const double y = grid.coordinate(1, j);
      const double tx = y * h / (2.0 * dx);
      if (opt.transport == Transport::central) {
        add(i, j, i + 1, j, tx);
        add(i, j, i - 1, j, -tx);
      } else if (y > 0.0) {
        add(i, j, i, j, 3.0 * tx);
        add(i, j, i - 1, j, -4.0 * tx);
        add(i, j, i - 2, j, tx);
      } else if (y < 0.0) {
        add(i, j, i, j, -3.0 * tx);
        add(i, j, i + 1, j, 4.0 * tx);
        add(i, j, i + 2, j, -tx);
      }
      const double ty = -dv * h / (2.0 * dy);
      const double dyy = 0.5 * gamma * h * h / (dy * dy);
      add(i, j, i, j + 1, ty - dyy);
      add(i, j, i, j - 1, -ty - dyy);
      add(i, j, i, j, 0.5 * gamma * (y * y - h) + 2.0 * dyy);
    }
  }
  DiscreteOperator op{OperatorKind::kfp, SpMat(grid.size(), grid.size()), std::nullopt, grid, gamma, h, Vec(), 0.0};
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();

  double phi_min = kInfinity;
  for (double v : vx) phi_min = std::min(phi_min, v);
  op.kernel_probe.resize(grid.size());
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double y = grid.coordinate(1, j);
      op.kernel_probe[grid.index(i, j)] = std::exp(-(0.5 * y * y + vx[static_cast<std::size_t>(i)] - phi_min) / h);
    }
  }
  op.cell_peclet = max_dv * dy / (gamma * h);
  return op;
}

enum class WittenForm { factorized, central };

struct WittenOptions {
  WittenForm form = WittenForm::factorized;
  std::optional<double> boundary_level;
};

/// h^2(-Laplacian) + |grad phi|^2 - h Laplacian(phi) with Dirichlet boundaries.
/// The factorized form is D^T D with one row of D per grid edge,
/// (Du)_e = (h/dx)(e^{(phi_j - phi_i)/2h} u_j - e^{-(phi_j - phi_i)/2h} u_i),
/// which annihilates e^{-phi/h} edge by edge.
inline DiscreteOperator discretize_witten0(const ScalarField& phi, double h, const Grid& grid, const WittenOptions& opt = {}) {
  const int d = phi.dimension();
  if (d != grid.dimension()) throw Error("oracle", "potential and grid dimensions differ");
  if (!(h > 0.0)) throw Error("oracle", "h must be positive");
  if (opt.boundary_level) require_boundary_level(grid, [&](const Vec& p) { return phi.value(p); }, *opt.boundary_level);

  const Eigen::Index n = grid.size();
  Vec values(n);
  for (Eigen::Index k = 0; k < n; ++k) values[k] = phi.value(grid.node(k));
  const double vmin = values.minCoeff();

  auto neighbour = [&](Eigen::Index k, int axis, int dir, Vec& where) -> Eigen::Index {
    int i = d == 1 ? static_cast<int>(k) : static_cast<int>(k / grid.points(1));
    int j = d == 1 ? 0 : static_cast<int>(k % grid.points(1));
    (axis == 0 ? i : j) += dir;
    where = grid.node(k);
    where[axis] += dir * grid.spacing(axis);
    const int ni = axis == 0 ? i : j;
    if (ni < 0 || ni >= grid.points(axis)) return -1;
    return grid.index(i, j);
  };

  DiscreteOperator op{OperatorKind::witten, SpMat(n, n), std::nullopt, grid, 0.0, h, Vec(), 0.0};
  std::vector<Eigen::Triplet<double>> trip;
  if (opt.form == WittenForm::factorized) {
    std::vector<Eigen::Triplet<double>> ftrip;
    Eigen::Index edge = 0;
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    Vec where;
    for (Eigen::Index k = 0; k < n; ++k) {
      for (int axis = 0; axis < d; ++axis) {
        const double w = h / grid.spacing(axis);
        // each interior edge once (towards +), ghost edges on both sides
        for (int dir : {1, -1}) {
          const Eigen::Index m = neighbour(k, axis, dir, where);
          if (m >= 0 && dir < 0) continue;
          const double vm = m >= 0 ? values[m] : phi.value(where);
          const double p = std::exp((vm - values[k]) / (2.0 * h));
          ftrip.emplace_back(edge, k, -w / p);
          diag[static_cast<std::size_t>(k)] += w * w / (p * p);
          if (m >= 0) {
            ftrip.emplace_back(edge, m, w * p);
            diag[static_cast<std::size_t>(m)] += w * w * p * p;
            trip.emplace_back(k, m, -w * w);
            trip.emplace_back(m, k, -w * w);
          }
          ++edge;
        }
      }
    }
    for (Eigen::Index k = 0; k < n; ++k) trip.emplace_back(k, k, diag[static_cast<std::size_t>(k)]);
    SpMat f(edge, n);
    f.setFromTriplets(ftrip.begin(), ftrip.end());
    f.makeCompressed();
    op.factor = std::move(f);
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto e = phi.evaluate(grid.node(k));
      double diag = e.gradient.squaredNorm() - h * e.hessian.trace();
      Vec where;
      for (int axis = 0; axis < d; ++axis) {
        const double c = h * h / (grid.spacing(axis) * grid.spacing(axis));
        diag += 2.0 * c;
        for (int dir : {1, -1}) {
          const Eigen::Index m = neighbour(k, axis, dir, where);
          if (m >= 0) trip.emplace_back(k, m, -c);
        }
      }
      trip.emplace_back(k, k, diag);
    }
  }
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  op.kernel_probe = (-(values.array() - vmin) / h).exp().matrix();
  return op;
}

enum class SolveMode { dense, shift_invert };

struct EigenOptions {
  SolveMode mode = SolveMode::shift_invert;
  int how_many = 4;
  std::optional<double> shift;  // default -h/4
  double tol = 1e-9;
  int krylov_dim = 0;  // 0: automatic
  int max_restarts = 60;
  Eigen::Index dense_ceiling = 5000;
  std::optional<double> count_threshold;  // default h/10
  bool keep_vectors = false;
};

struct SpectralResult {
  std::vector<Cplx> eigenvalues;  // ascending real part
  Eigen::MatrixXcd eigenvectors;
  std::vector<double> residuals;  // ||(A - mu) u|| / (||A||_inf ||u||)
  int count_below_threshold = 0;
  double threshold = 0.0;
  bool count_complete = false;  // some computed eigenvalue lies above the threshold
  SolveMode mode = SolveMode::dense;
  double shift = 0.0;
  int lu_attempts = 0;
  int restarts = 0;
};

namespace detail {

inline double relative_residual(const DiscreteOperator& op, double norm_a, Cplx mu, const Eigen::VectorXcd& u) {
  const Eigen::VectorXcd au = op.matrix.cast<Cplx>() * u;
  return (au - mu * u).norm() / (norm_a * u.norm());
}

/// For D^T D operators the Rayleigh quotient through the factor keeps relative
/// accuracy on eigenvalues far below ||A|| eps.
inline Cplx refine_through_factor(const DiscreteOperator& op, Cplx mu, const Eigen::VectorXcd& u) {
  if (!op.factor) return mu;
  Vec re = u.real();
  if (re.norm() < u.imag().norm()) re = u.imag();
  return {(*op.factor * re).squaredNorm() / re.squaredNorm(), 0.0};
}

inline void finish(const DiscreteOperator& op, const EigenOptions& opt, std::vector<std::pair<Cplx, Eigen::VectorXcd>>& pairs,
                   SpectralResult& r) {
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
    return a.first.imag() < b.first.imag();
  });
  const double norm_a = op.norm_inf();
  r.threshold = opt.count_threshold.value_or(op.h / 10.0);
  if (opt.keep_vectors) r.eigenvectors.resize(op.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Cplx mu = refine_through_factor(op, pairs[k].first, pairs[k].second);
    r.eigenvalues.push_back(mu);
    r.residuals.push_back(relative_residual(op, norm_a, mu, pairs[k].second));
    if (opt.keep_vectors) r.eigenvectors.col(static_cast<Eigen::Index>(k)) = pairs[k].second / pairs[k].second.norm();
    if (mu.real() < r.threshold) {
      ++r.count_below_threshold;
    } else {
      r.count_complete = true;
    }
  }
}

inline Vec start_vector(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  return v.normalized();
}

}  // namespace detail

inline SpectralResult dense_eigenvalues(const DiscreteOperator& op, const EigenOptions& opt) {
  const Eigen::Index n = op.size();
  if (n > opt.dense_ceiling) {
    throw Error("oracle", "dense mode limited to " + std::to_string(opt.dense_ceiling) + " unknowns, got " + std::to_string(n));
  }
  const Mat a(op.matrix);
  std::vector<std::pair<Cplx, Eigen::VectorXcd>> all;
  if (op.kind == OperatorKind::witten) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success) throw Error("oracle", "dense symmetric eigensolver failed");
    for (Eigen::Index k = 0; k < n; ++k) all.emplace_back(Cplx(es.eigenvalues()[k], 0.0), es.eigenvectors().col(k).cast<Cplx>());
  } else {
    Eigen::EigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success) throw Error("oracle", "dense eigensolver failed");
    for (Eigen::Index k = 0; k < n; ++k) all.emplace_back(es.eigenvalues()[k], es.eigenvectors().col(k));
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return std::abs(x.first) < std::abs(y.first); });
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(opt.how_many)));
  SpectralResult r;
  r.mode = SolveMode::dense;
  detail::finish(op, opt, all, r);
  return r;
}

/// Sparse LU of (A - shift I) and explicitly restarted Arnoldi on the inverse.
/// Each restart starts from the sum of the wanted Ritz vectors.
inline SpectralResult shift_invert_eigenvalues(const DiscreteOperator& op, const EigenOptions& opt) {
  const Eigen::Index n = op.size();
  const int k = opt.how_many;
  if (k < 1 || k >= n) throw Error("oracle", "how_many out of range");
  double shift = opt.shift.value_or(-op.h / 4.0);

  using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>;
  Solver lu;
  int attempts = 0;
  const Eigen::SparseMatrix<double> base(op.matrix);
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  for (;;) {
    ++attempts;
    const Eigen::SparseMatrix<double> shifted = base - shift * eye;
    lu.analyzePattern(shifted);
    lu.factorize(shifted);
    if (lu.info() == Eigen::Success) break;
    if (attempts > 3) throw Error("oracle", "LU factorization singular at the shift after 3 perturbed retries");
    shift -= 0.05 * std::max(std::abs(shift), op.h) * attempts;
  }

  const int m = static_cast<int>(std::min<Eigen::Index>(n - 1, opt.krylov_dim > 0 ? opt.krylov_dim : std::max(2 * k + 20, 40)));
  if (m < k) throw Error("oracle", "Krylov dimension smaller than how_many");
  const double norm_a = op.norm_inf();
  Vec v = detail::start_vector(n);
  SpectralResult r;
  r.mode = SolveMode::shift_invert;
  r.lu_attempts = attempts;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    Mat basis = Mat::Zero(n, m + 1);
    Mat hess = Mat::Zero(m + 1, m);
    basis.col(0) = v;
    int used = m;
    for (int j = 0; j < m; ++j) {
      Vec w = lu.solve(basis.col(j));
      for (int pass = 0; pass < 2; ++pass) {
        const Vec c = basis.leftCols(j + 1).transpose() * w;
        w -= basis.leftCols(j + 1) * c;
        hess.col(j).head(j + 1) += c;
      }
      const double beta = w.norm();
      hess(j + 1, j) = beta;
      if (beta <= 1e-13 * hess.col(j).head(j + 1).norm()) {
        used = j + 1;
        break;
      }
      basis.col(j + 1) = w / beta;
    }
    Eigen::EigenSolver<Mat> es(hess.topLeftCorner(used, used));
    if (es.info() != Eigen::Success) throw Error("oracle", "Hessenberg eigensolver failed");
    std::vector<int> order(static_cast<std::size_t>(used));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]); });
    std::vector<std::pair<Cplx, Eigen::VectorXcd>> pairs;
    bool ok = true;
    Vec next = Vec::Zero(n);
    for (int t = 0; t < std::min(k, used); ++t) {
      const int idx = order[static_cast<std::size_t>(t)];
      const Cplx theta = es.eigenvalues()[idx];
      const Eigen::VectorXcd u = basis.leftCols(used).cast<Cplx>() * es.eigenvectors().col(idx);
      const Cplx mu = shift + 1.0 / theta;
      const Cplx refined = detail::refine_through_factor(op, mu, u);
      if (detail::relative_residual(op, norm_a, refined, u) > opt.tol) ok = false;
      pairs.emplace_back(mu, u);
      next += u.real() + u.imag();
    }
    r.restarts = restart;
    if (ok) {
      r.shift = shift;
      detail::finish(op, opt, pairs, r);
      return r;
    }
    v = next.normalized();
  }
  throw Error("oracle", "Arnoldi did not converge within " + std::to_string(opt.max_restarts) + " restarts");
}

inline SpectralResult small_eigenvalues(const DiscreteOperator& op, const EigenOptions& opt = {}) {
  return opt.mode == SolveMode::dense ? dense_eigenvalues(op, opt) : shift_invert_eigenvalues(op, opt);
}

struct FittedBarrier {
  double S_hat = 0.0;
  double l_hat = 0.0;
  double fit_residual = 0.0;  // rms of the log residuals
  bool poor_fit = false;
};

/// Least squares of log(mu/h) against 1/h: slope -2S, intercept log l.
inline FittedBarrier fitted_barrier(const std::vector<std::pair<double, double>>& samples, double residual_flag = 0.05) {
  if (samples.size() < 3) throw Error("oracle", "fitted_barrier needs at least 3 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Mat a(n, 2);
  Vec b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [h, mu] = samples[static_cast<std::size_t>(i)];
    if (!(mu > 0.0) || !(h > 0.0)) throw Error("oracle", "fitted_barrier needs positive h and mu");
    a(i, 0) = 1.0;
    a(i, 1) = 1.0 / h;
    b[i] = std::log(mu / h);
  }
  const Vec c = a.colPivHouseholderQr().solve(b);
  FittedBarrier f;
  f.l_hat = std::exp(c[0]);
  f.S_hat = -c[1] / 2.0;
  f.fit_residual = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
  f.poor_fit = f.fit_residual > residual_flag;
  return f;
}

/// Numeric eigenvalues at one h, optionally on a coarser grid with twice the spacing.
struct NumericSample {
  double h = 0.0;
  SpectralResult fine;
  std::optional<SpectralResult> coarse;
};

struct ConvergenceRow {
  double h = 0.0;
  Cplx mu_fine;         // kernel offset removed
  std::optional<Cplx> mu_coarse;
  double mu_num = 0.0;  // Richardson value when a coarse grid exists
  double mu_asym = 0.0;
  double ratio = 0.0;
  double rescaled = 0.0;
  double grid_gap = 0.0;  // |fine - coarse| / |fine|
  double kernel_eigenvalue = 0.0;
};

struct ConvergenceTable {
  std::pair<int, int> label{0, 0};
  int minimum_id = -1;
  std::vector<ConvergenceRow> rows;
  double extrapolated_ratio = 0.0;
  double convention_scale = 1.0;
  std::optional<FittedBarrier> fit;
  bool grid_converged = true;
  bool monotone = true;  // |rescaled - 1| decreases as h decreases
  std::vector<std::string> warnings;
};

inline double nearest_convention_scale(double ratio) {
  double best = 1.0, dist = kInfinity;
  for (double c : {0.25, 0.5, 1.0, 2.0}) {
    const double dd = std::abs(std::log(ratio / c));
    if (dd < dist) {
      dist = dd;
      best = c;
    }
  }
  return best;
}

/// The kernel eigenvalue (smallest |mu|) is dropped and its real part is
/// subtracted from the rest; numeric eigenvalues are matched to the asymptotic
/// records in ascending order. One table per finite-barrier record.
inline std::vector<ConvergenceTable> compare(const std::vector<NumericSample>& numeric,
                                             const std::vector<AsymptoticEigenvalue>& asym, double richardson_limit = 0.02) {
  if (numeric.size() < 3) throw Error("oracle", "compare needs at least 3 values of h");
  std::vector<const AsymptoticEigenvalue*> records;
  for (const auto& r : asym) {
    if (std::isfinite(r.barrier)) records.push_back(&r);
  }
  std::vector<ConvergenceTable> tables(records.size());

  auto shifted = [&](const SpectralResult& s, std::size_t want, double& kernel, std::vector<std::string>& warn, double h) {
    if (s.eigenvalues.size() < want + 1) throw Error("oracle", "too few numeric eigenvalues to match the asymptotic records");
    std::size_t k0 = 0;
    for (std::size_t i = 1; i < s.eigenvalues.size(); ++i) {
      if (std::abs(s.eigenvalues[i]) < std::abs(s.eigenvalues[k0])) k0 = i;
    }
    kernel = s.eigenvalues[k0].real();
    std::vector<Cplx> rest;
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
      if (i != k0) rest.push_back(s.eigenvalues[i] - kernel);
    }
    std::sort(rest.begin(), rest.end(), [](Cplx a, Cplx b) { return a.real() < b.real(); });
    for (std::size_t i = 0; i + 1 < std::min(rest.size(), want + 1); ++i) {
      if (std::abs(rest[i + 1] - rest[i]) <= 0.01 * std::abs(rest[i + 1])) {
        warn.push_back("h=" + std::to_string(h) + ": numeric eigenvalues " + std::to_string(i + 2) + " and " +
                       std::to_string(i + 3) + " within 1%, matching ambiguous");
      }
    }
    rest.resize(want);
    return rest;
  };

  for (const auto& ns : numeric) {
    // asymptotic order at this h
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a]->mu_of_h(ns.h) < records[b]->mu_of_h(ns.h); });
    std::vector<std::string> warn;
    double kernel = 0.0, kernel_coarse = 0.0;
    const auto fine = shifted(ns.fine, records.size(), kernel, warn, ns.h);
    std::optional<std::vector<Cplx>> coarse;
    if (ns.coarse) coarse = shifted(*ns.coarse, records.size(), kernel_coarse, warn, ns.h);
    for (std::size_t t = 0; t < order.size(); ++t) {
      auto& table = tables[order[t]];
      const auto* rec = records[order[t]];
      table.label = rec->label;
      table.minimum_id = rec->minimum_id;
      ConvergenceRow row;
      row.h = ns.h;
      row.kernel_eigenvalue = kernel;
      row.mu_fine = fine[t];
      row.mu_num = fine[t].real();
      if (coarse) {
        row.mu_coarse = (*coarse)[t];
        row.mu_num = (4.0 * fine[t].real() - (*coarse)[t].real()) / 3.0;
        row.grid_gap = std::abs(fine[t] - (*coarse)[t]) / std::abs(fine[t]);
        if (row.grid_gap > richardson_limit) table.grid_converged = false;
      }
      row.mu_asym = rec->mu_of_h(ns.h);
      row.ratio = row.mu_num / row.mu_asym;
      table.rows.push_back(row);
      table.warnings.insert(table.warnings.end(), warn.begin(), warn.end());
    }
  }

  for (auto& table : tables) {
    std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) { return a.h > b.h; });
    // ratio is linear in h to first order: extrapolate the intercept
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Mat a(n, 2);
    Vec b(n);
    std::vector<std::pair<double, double>> samples;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = table.rows[static_cast<std::size_t>(i)];
      a(i, 0) = 1.0;
      a(i, 1) = row.h;
      b[i] = row.ratio;
      samples.emplace_back(row.h, row.mu_num);
    }
    table.extrapolated_ratio = a.colPivHouseholderQr().solve(b)[0];
    table.convention_scale = table.extrapolated_ratio > 0.0 ? nearest_convention_scale(table.extrapolated_ratio) : 1.0;
    double prev = kInfinity;
    for (auto& row : table.rows) {
      row.rescaled = row.ratio / table.convention_scale;
      const double dev = std::abs(row.rescaled - 1.0);
      if (dev > prev) table.monotone = false;
      prev = dev;
    }
    bool positive = true;
    for (const auto& s : samples) positive = positive && s.second > 0.0;
    if (positive) {
      table.fit = fitted_barrier(samples);
    } else {
      table.warnings.push_back("nonpositive numeric eigenvalue, barrier fit skipped");
    }
  }
  return tables;
}

/// Coordinate-format Matrix Market dump.
inline void write_matrix_market(const SpMat& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("oracle", "cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    for (SpMat::InnerIterator it(a, r); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
  }
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results stay indexed.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace metaspec
