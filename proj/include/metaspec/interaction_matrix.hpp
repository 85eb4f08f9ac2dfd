#pragma once

// The saddle-by-minimum interaction matrix R, singular values that stay
// accurate for exponentially graded columns, the indicator-matrix left
// inverse, and the three-well closed forms.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "metaspec/asymptotics.hpp"
#include "metaspec/error.hpp"
#include "metaspec/topology.hpp"

namespace metaspec {

enum class EntryClass { dominant, boundary_subdominant, negligible, zero_column };

inline const char* to_string(EntryClass c) {
  switch (c) {
    case EntryClass::dominant: return "dominant";
    case EntryClass::boundary_subdominant: return "boundary_subdominant";
    case EntryClass::negligible: return "negligible";
    default: return "zero_column";
  }
}

/// R with rows = index-1 saddles and columns = minima in label order.
/// Entries are stored factored, r_jk = scaled(j,k) * exp(log_column_scale[k]),
/// where log_column_scale = log(h)/2 - S_k/h; the global column is zero.
struct StructuredMatrix {
  double h = 0.0;
  std::vector<int> saddle_ids;
  std::vector<int> minimum_ids;
  std::vector<double> barriers;
  std::vector<double> sigmas;
  Mat scaled;  // R~
  std::vector<double> log_column_scale;
  std::vector<std::vector<EntryClass>> tags;

  [[nodiscard]] Eigen::Index rows() const { return scaled.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return scaled.cols(); }

  /// The assembled matrix; entries below the double range underflow to 0.
  [[nodiscard]] Mat dense() const {
    Mat m = scaled;
    for (Eigen::Index k = 0; k < cols(); ++k) {
      m.col(k) *= std::isfinite(log_column_scale[static_cast<std::size_t>(k)])
                      ? std::exp(log_column_scale[static_cast<std::size_t>(k)])
                      : 0.0;
    }
    return m;
  }

  /// Columns with a finite barrier.
  [[nodiscard]] std::vector<Eigen::Index> active_columns() const {
    std::vector<Eigen::Index> c;
    for (Eigen::Index k = 0; k < cols(); ++k) {
      if (std::isfinite(barriers[static_cast<std::size_t>(k)])) c.push_back(k);
    }
    return c;
  }

  [[nodiscard]] Mat scaled_active() const {
    const auto c = active_columns();
    Mat m(rows(), static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = scaled.col(c[i]);
    return m;
  }
};

struct SyntheticEntries {
  double alpha = 1.0;         // extra decay of the non-dominant classes
  double coefficient = 1.0;   // magnitude bound of the random class-2/3 coefficients
  unsigned seed = 0;
};

/// Populates R from a labelling. Dominant entries take b from `b_values`
/// keyed by (saddle id, minimum id); the other classes use seeded synthetic
/// coefficients in [-coefficient, coefficient].
inline StructuredMatrix build_R(const Labelling& lab, const std::vector<CriticalPoint>& points,
                                const std::map<std::pair<int, int>, double>& b_values, double h,
                                const SyntheticEntries& syn = {}) {
  if (!(h > 0.0)) throw Error("interaction_matrix", "h must be positive");
  StructuredMatrix R;
  R.h = h;
  for (const auto& p : points) {
    if (p.is_saddle()) R.saddle_ids.push_back(p.id);
  }
  for (const auto& m : lab.minima) {
    R.minimum_ids.push_back(m.minimum_id);
    R.barriers.push_back(m.barrier);
    R.sigmas.push_back(m.sigma);
    R.log_column_scale.push_back(std::isfinite(m.barrier) ? 0.5 * std::log(h) - m.barrier / h
                                                           : -std::numeric_limits<double>::infinity());
  }
  const auto nr = static_cast<Eigen::Index>(R.saddle_ids.size());
  const auto nc = static_cast<Eigen::Index>(R.minimum_ids.size());
  R.scaled = Mat::Zero(nr, nc);
  R.tags.assign(static_cast<std::size_t>(nr), std::vector<EntryClass>(static_cast<std::size_t>(nc), EntryClass::zero_column));

  std::mt19937_64 rng(syn.seed);
  std::uniform_real_distribution<double> coef(-syn.coefficient, syn.coefficient);
  for (Eigen::Index k = 0; k < nc; ++k) {
    const auto& mk = lab.minima[static_cast<std::size_t>(k)];
    if (!std::isfinite(mk.barrier)) continue;
    if (mk.boundary_saddle_ids.empty()) throw Error("interaction_matrix", "finite-barrier minimum without boundary saddle");
    for (Eigen::Index j = 0; j < nr; ++j) {
      const int sid = R.saddle_ids[static_cast<std::size_t>(j)];
      auto& tag = R.tags[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      const bool on_boundary = std::find(mk.boundary_saddle_ids.begin(), mk.boundary_saddle_ids.end(), sid) !=
                               mk.boundary_saddle_ids.end();
      if (on_boundary) {
        const auto it = b_values.find({sid, mk.minimum_id});
        if (it == b_values.end()) {
          throw Error("interaction_matrix", "missing b value for saddle " + std::to_string(sid) + " and minimum " +
                                                std::to_string(mk.minimum_id));
        }
        tag = EntryClass::dominant;
        R.scaled(j, k) = it->second;
        continue;
      }
      // boundary of a larger critical component that contains E_k
      bool larger = false;
      for (const auto& other : lab.minima) {
        if (other.minimum_id == mk.minimum_id || !std::isfinite(other.barrier)) continue;
        const auto& mem = other.component_member_min_ids;
        if (std::find(mem.begin(), mem.end(), mk.minimum_id) == mem.end()) continue;
        if (std::find(other.boundary_saddle_ids.begin(), other.boundary_saddle_ids.end(), sid) !=
            other.boundary_saddle_ids.end()) {
          larger = true;
        }
      }
      const double c = coef(rng);
      if (larger) {
        tag = EntryClass::boundary_subdominant;
        const double gap = point_by_id(points, sid).value - mk.minimum_value - mk.barrier;
        R.scaled(j, k) = c * (std::exp(-gap / h) + std::exp(-syn.alpha / h));
      } else {
        tag = EntryClass::negligible;
        R.scaled(j, k) = c * std::exp(-syn.alpha / h);
      }
    }
  }
  return R;
}

struct SvdResult {
  Vec values;  // descending
  Mat right_vectors;
  bool used_jacobi = false;
};

namespace detail {

/// One-sided (Hestenes) Jacobi: orthogonalizes the columns of A in place.
/// Singular values come out with high relative accuracy for column-graded A.
inline SvdResult hestenes_jacobi(Mat a) {
  const auto n = a.cols();
  Mat v = Mat::Identity(n, n);
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const double x = a(i, p), y = a(i, q);
          a(i, p) = c * x - s * y;
          a(i, q) = s * x + c * y;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = v(i, p), y = v(i, q);
          v(i, p) = c * x - s * y;
          v(i, q) = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Vec norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = a.col(i).norm();
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return norms[x] > norms[y]; });
  SvdResult r;
  r.values.resize(n);
  r.right_vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.values[i] = norms[order[static_cast<std::size_t>(i)]];
    r.right_vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  r.used_jacobi = true;
  return r;
}

}  // namespace detail

/// Singular values through the Gram matrix, switching to one-sided Jacobi when
/// some value falls below sqrt(eps) * |M| and the Gram route loses it.
inline SvdResult singular_values(const Mat& m) {
  if (!m.allFinite()) throw Error("interaction_matrix", "matrix has non-finite entries");
  if (m.cols() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Mat> eig(m.transpose() * m);
  const auto n = m.cols();
  SvdResult r;
  r.values.resize(n);
  r.right_vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.values[i] = std::sqrt(std::max(0.0, eig.eigenvalues()[n - 1 - i]));
    r.right_vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
  }
  const double norm = r.values[0];
  if (norm > 0.0 && r.values[n - 1] < std::sqrt(std::numeric_limits<double>::epsilon()) * norm) {
    return detail::hestenes_jacobi(m);
  }
  return r;
}

/// log s_nu of scaled * diag(exp(log_scale)) without assembling the product.
inline Vec log_singular_values(const Mat& scaled, const std::vector<double>& log_scale) {
  if (static_cast<Eigen::Index>(log_scale.size()) != scaled.cols()) {
    throw Error("interaction_matrix", "one log scale per column required");
  }
  if (scaled.cols() == 0) return {};
  const double top = *std::max_element(log_scale.begin(), log_scale.end());
  Mat graded = scaled;
  for (Eigen::Index k = 0; k < scaled.cols(); ++k) graded.col(k) *= std::exp(log_scale[static_cast<std::size_t>(k)] - top);
  const Vec s = detail::hestenes_jacobi(graded).values;
  return s.array().log() + top;
}

struct DominantComparison {
  struct Row {
    int minimum_id = 0;
    int saddle_id = 0;
    double log_singular_value = 0.0;
    double log_dominant = 0.0;
    double relative_deviation = 0.0;
  };
  std::vector<Row> rows;
  double max_relative_deviation = 0.0;
};

/// Pairs the nonzero singular values of R with the dominant entry of each
/// column (both sorted descending) in the log domain.
inline DominantComparison generic_singular_estimate(const StructuredMatrix& R) {
  const auto cols = R.active_columns();
  std::vector<DominantComparison::Row> dom;
  std::vector<double> logs;
  for (auto k : cols) {
    int count = 0;
    DominantComparison::Row row;
    row.minimum_id = R.minimum_ids[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < R.rows(); ++j) {
      if (R.tags[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] != EntryClass::dominant) continue;
      ++count;
      row.saddle_id = R.saddle_ids[static_cast<std::size_t>(j)];
      row.log_dominant = std::log(std::abs(R.scaled(j, k))) + R.log_column_scale[static_cast<std::size_t>(k)];
    }
    if (count != 1) {
      throw Error("interaction_matrix", "column of minimum " + std::to_string(row.minimum_id) + " has " +
                                            std::to_string(count) + " dominant entries; structure is not generic");
    }
    dom.push_back(row);
    logs.push_back(R.log_column_scale[static_cast<std::size_t>(k)]);
  }
  const Vec ls = log_singular_values(R.scaled_active(), logs);
  std::sort(dom.begin(), dom.end(), [](const auto& a, const auto& b) { return a.log_dominant > b.log_dominant; });
  DominantComparison out;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    auto row = dom[i];
    row.log_singular_value = ls[static_cast<Eigen::Index>(i)];
    row.relative_deviation = std::abs(std::expm1(row.log_singular_value - row.log_dominant));
    out.max_relative_deviation = std::max(out.max_relative_deviation, row.relative_deviation);
    out.rows.push_back(row);
  }
  return out;
}

/// Least-squares eta in log(deviation) = c - eta / h.
inline double fit_decay_rate(const std::vector<double>& h, const std::vector<double>& deviation) {
  if (h.size() != deviation.size() || h.size() < 2) throw Error("interaction_matrix", "need >= 2 (h, deviation) pairs");
  Mat a(static_cast<Eigen::Index>(h.size()), 2);
  Vec b(static_cast<Eigen::Index>(h.size()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(deviation[i] > 0.0)) throw Error("interaction_matrix", "deviations must be positive to fit a decay rate");
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = -1.0 / h[i];
    b[static_cast<Eigen::Index>(i)] = std::log(deviation[i]);
  }
  return a.colPivHouseholderQr().solve(b)[1];
}

struct EliminationStep {
  int minimum_id = 0;
  int pivot_saddle_id = 0;
  double pivot = 0.0;
  double level = 0.0;
};

struct LeftInverseResult {
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  bool above_floor = true;
  std::vector<EliminationStep> elimination;
  Mat indicator;  // R~_0 on the active columns
};

/// sigma_min of R~ with the negligible class zeroed, and the elimination order:
/// minima by ascending saddle level (label order inside a level), each with the
/// dominant pivot of its column.
inline LeftInverseResult indicator_left_inverse(const StructuredMatrix& R, double floor = 1e-10) {
  const auto cols = R.active_columns();
  LeftInverseResult out;
  out.indicator = Mat::Zero(R.rows(), static_cast<Eigen::Index>(cols.size()));
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto k = cols[c];
    for (Eigen::Index j = 0; j < R.rows(); ++j) {
      if (R.tags[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] != EntryClass::negligible) {
        out.indicator(j, static_cast<Eigen::Index>(c)) = R.scaled(j, k);
      }
    }
    order.emplace_back(R.sigmas[static_cast<std::size_t>(k)], c);
  }
  for (auto& [lvl, c] : order) {
    const auto k = cols[c];
    double best = 0.0;
    EliminationStep step;
    step.minimum_id = R.minimum_ids[static_cast<std::size_t>(k)];
    for (Eigen::Index j = 0; j < R.rows(); ++j) {
      if (R.tags[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] == EntryClass::dominant &&
          std::abs(R.scaled(j, k)) > best) {
        best = std::abs(R.scaled(j, k));
        step.pivot = R.scaled(j, k);
        step.pivot_saddle_id = R.saddle_ids[static_cast<std::size_t>(j)];
      }
    }
    step.level = lvl;
    out.elimination.push_back(step);
  }
  std::stable_sort(out.elimination.begin(), out.elimination.end(),
                   [](const auto& a, const auto& b) { return a.level < b.level; });
  if (!cols.empty()) {
    const auto sv = singular_values(out.indicator).values;
    out.largest_singular_value = sv[0];
    out.smallest_singular_value = sv[sv.size() - 1];
  }
  out.above_floor = cols.empty() || out.smallest_singular_value >= floor;
  return out;
}

struct KyFanCheck {
  std::vector<double> ratios;  // s_nu(R') / (h^{1/2} e^{-S/h}) with the reversed barrier pairing
  double lower = 0.0;          // sigma_min(R~)
  double upper = 0.0;          // |R~|
  bool holds = true;
};

/// s_nu(R~ D) lies between sigma_min(R~) s_nu(D) and |R~| s_nu(D).
inline KyFanCheck ky_fan_sandwich(const StructuredMatrix& R) {
  const auto cols = R.active_columns();
  KyFanCheck out;
  if (cols.empty()) return out;
  std::vector<double> logs;
  for (auto k : cols) logs.push_back(R.log_column_scale[static_cast<std::size_t>(k)]);
  const Mat rt = R.scaled_active();
  const auto sv = singular_values(rt).values;
  out.upper = sv[0];
  out.lower = sv[sv.size() - 1];
  const Vec ls = log_singular_values(rt, logs);
  std::vector<double> sorted_logs = logs;
  std::sort(sorted_logs.begin(), sorted_logs.end(), std::greater<>());  // smallest barrier first
  for (std::size_t i = 0; i < sorted_logs.size(); ++i) {
    const double ratio = std::exp(ls[static_cast<Eigen::Index>(i)] - sorted_logs[i]);
    out.ratios.push_back(ratio);
    out.holds = out.holds && ratio >= out.lower * (1 - 1e-10) && ratio <= out.upper * (1 + 1e-10);
  }
  return out;
}

/// sigma_j = d_j e^{-phi(s_j)/h}, mu_k = c_k e^{phi(m_k)/h}.
struct ThreeWellSystem {
  std::array<double, 3> sigma{1, 1, 1};
  std::array<double, 3> mu{1, 1, 1};

  [[nodiscard]] std::array<double, 3> a() const { return {sigma[2] * mu[0], sigma[0] * mu[1], sigma[1] * mu[2]}; }
  [[nodiscard]] std::array<double, 3> b() const { return {sigma[1] * mu[0], sigma[2] * mu[1], sigma[0] * mu[2]}; }
};

inline Mat three_well_R0(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  Mat r(3, 3);
  r << 0, a[1], -b[2],
       -b[0], 0, a[2],
       a[0], -b[1], 0;
  return r;
}

struct ThreeWellSpectrum {
  std::array<double, 3> eigenvalues{};  // 0, lambda_-, lambda_+
  double D = 0.0;
  std::array<double, 3> gamma{};
  double gamma_sum = 0.0;
  Vec kernel;
  double kernel_residual = 0.0;  // |R0 k| / (|R0| |k|)
  bool D_bounds = false;         // 0 < D <= (sum/2)^2
  bool localization = false;     // 0 < l- <= sum/2 <= l+ < sum
  bool lower_bracket = false;    // D/sum < l- <= 2D/sum

  [[nodiscard]] bool all_checks() const { return D_bounds && localization && lower_bracket; }
};

/// Closed-form spectrum of R0^T R0 for raw (a, b); no kernel condition assumed.
inline ThreeWellSpectrum three_well_closed_form(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  ThreeWellSpectrum s;
  for (int j = 0; j < 3; ++j) s.gamma[static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(j)] + b[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(j)];
  s.gamma_sum = s.gamma[0] + s.gamma[1] + s.gamma[2];
  auto sq = [](double x) { return x * x; };
  const auto& [a1, a2, a3] = a;
  const auto& [b1, b2, b3] = b;
  s.D = (sq(a2) * sq(a3) + sq(b2) * sq(b3) + sq(b2) * sq(a3)) + (sq(a3) * sq(a1) + sq(b3) * sq(b1) + sq(b3) * sq(a1)) +
        (sq(a1) * sq(a2) + sq(b1) * sq(b2) + sq(b1) * sq(a2));
  const double half = s.gamma_sum / 2.0;
  const double root = std::sqrt(std::max(0.0, half * half - s.D));
  // lambda_- via D / lambda_+ avoids cancellation when D is small
  const double lplus = half + root;
  const double lminus = lplus > 0.0 ? s.D / lplus : 0.0;
  s.eigenvalues = {0.0, lminus, lplus};
  s.D_bounds = s.D > 0.0 && s.D <= half * half;
  s.localization = lminus > 0.0 && lminus <= half && half <= lplus && lplus < s.gamma_sum;
  s.lower_bracket = s.D / s.gamma_sum < lminus && lminus <= 2.0 * s.D / s.gamma_sum;
  return s;
}

inline ThreeWellSpectrum three_well_spectrum(const ThreeWellSystem& sys) {
  for (int i = 0; i < 3; ++i) {
    if (!(sys.sigma[static_cast<std::size_t>(i)] > 0.0) || !(sys.mu[static_cast<std::size_t>(i)] > 0.0)) {
      throw Error("interaction_matrix", "three-well sigma and mu must be positive");
    }
  }
  ThreeWellSpectrum s = three_well_closed_form(sys.a(), sys.b());
  const Mat r0 = three_well_R0(sys.a(), sys.b());
  s.kernel = Vec(3);
  s.kernel << 1.0 / sys.mu[0], 1.0 / sys.mu[1], 1.0 / sys.mu[2];
  s.kernel_residual = (r0 * s.kernel).norm() / (r0.norm() * s.kernel.norm());
  return s;
}

/// Discriminant of the three-well quadratic for raw coefficients alpha_j, beta_j.
inline double three_well_discriminant(const std::array<double, 3>& alpha, const std::array<double, 3>& beta) {
  const double d1 = alpha[0] - beta[2];
  const double d2 = alpha[1] - beta[0];
  const double d3 = alpha[2] - beta[1];
  return d1 * d1 + d2 * d2 + d3 * d3 - 2.0 * (d1 * d2 + d1 * d3 + d2 * d3);
}

}  // namespace metaspec
