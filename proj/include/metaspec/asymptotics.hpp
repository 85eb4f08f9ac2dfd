#pragma once

// Leading-order small-eigenvalue asymptotics: saddle escape rates, prefactors,
// the outgoing quadratic phase at a KFP saddle and the Witten specialization.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "metaspec/error.hpp"
#include "metaspec/topology.hpp"

namespace metaspec {

struct SaddleRate {
  double lambda_hat = 0.0;
  Mat block_matrix;
  double gamma = 0.0;
  double v = 0.0;  // minus the negative Hessian eigenvalue
};

namespace detail {

inline double negative_eigenvalue(const Mat& hess, const char* who) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(hess);
  const auto& ev = eig.eigenvalues();
  const int neg = static_cast<int>((ev.array() < 0.0).count());
  if (neg != 1) throw Error("asymptotics", std::string(who) + ": Hessian is not of Morse index 1");
  return ev[0];
}

inline double positive_det(const Mat& hess, const char* who) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(hess);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw Error("asymptotics", std::string(who) + ": Hessian at the minimum is not positive definite");
  return hess.determinant();
}

}  // namespace detail

/// The rate is minus the unique negative eigenvalue of [[0, I], [-V''(s), gamma I]]
/// (the linearised Langevin flow at the saddle written in (x, y)).
inline SaddleRate lambda_hat(const Mat& hess_saddle, double gamma) {
  if (!(gamma > 0.0)) throw Error("asymptotics", "friction gamma must be positive");
  const auto d = hess_saddle.rows();
  SaddleRate r;
  r.gamma = gamma;
  r.v = -detail::negative_eigenvalue(hess_saddle, "lambda_hat");
  r.block_matrix = Mat::Zero(2 * d, 2 * d);
  r.block_matrix.topRightCorner(d, d) = Mat::Identity(d, d);
  r.block_matrix.bottomLeftCorner(d, d) = -hess_saddle;
  r.block_matrix.bottomRightCorner(d, d) = gamma * Mat::Identity(d, d);

  Eigen::EigenSolver<Mat> es(r.block_matrix);
  const auto& ev = es.eigenvalues();
  const double scale = r.block_matrix.norm();
  int count = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i].real() < -1e-13 * scale) {
      ++count;
      if (std::abs(ev[i].imag()) > 1e-10 * scale) throw Error("asymptotics", "negative block eigenvalue is not real");
      r.lambda_hat = -ev[i].real();
    }
  }
  if (count != 1) {
    throw Error("asymptotics", "block matrix has " + std::to_string(count) +
                                   " eigenvalues with negative real part; expected exactly one");
  }
  return r;
}

/// l0 = (lambda_hat / pi) sqrt(det V''(m) / -det V''(s)).
inline double kfp_prefactor(const Mat& hess_min, const Mat& hess_saddle, double gamma) {
  const double dm = detail::positive_det(hess_min, "kfp_prefactor");
  const double ds = hess_saddle.determinant();
  const double ratio = dm / -ds;
  if (!(ratio > 0.0)) throw Error("asymptotics", "nonpositive determinant ratio");
  return lambda_hat(hess_saddle, gamma).lambda_hat / std::numbers::pi * std::sqrt(ratio);
}

/// Witten Laplacian: the rate is the modulus of the negative Hessian eigenvalue.
inline double witten_prefactor(const Mat& hess_min, const Mat& hess_saddle) {
  const double dm = detail::positive_det(hess_min, "witten_prefactor");
  const double lam = -detail::negative_eigenvalue(hess_saddle, "witten_prefactor");
  return lam / std::numbers::pi * std::sqrt(dm / std::abs(hess_saddle.determinant()));
}

/// |b0| = pi^{-1/2} lambda_hat^{1/2} (det V''(m) / -det V''(s))^{1/4}; the sign is not fixed.
inline double interaction_b0(const Mat& hess_min, const Mat& hess_saddle, double gamma) {
  const double dm = detail::positive_det(hess_min, "interaction_b0");
  const double ratio = dm / -hess_saddle.determinant();
  if (!(ratio > 0.0)) throw Error("asymptotics", "nonpositive determinant ratio");
  return std::sqrt(lambda_hat(hess_saddle, gamma).lambda_hat / std::numbers::pi) * std::pow(ratio, 0.25);
}

/// phi_+ = (a x^2 + 2 b x y + c y^2) / 2 at a 1D saddle V = -v x^2 / 2.
struct QuadraticPhase {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double kappa11 = 1.0;
};

inline QuadraticPhase quadratic_phase(double v, double gamma) {
  if (!(v > 0.0) || !(gamma > 0.0)) throw Error("asymptotics", "quadratic_phase needs v > 0 and gamma > 0");
  QuadraticPhase p;
  p.c = std::sqrt(1.0 + 4.0 * v / (gamma * gamma));
  p.b = -2.0 * v / gamma;
  p.a = v * p.c;
  p.kappa11 = gamma / std::sqrt(gamma * gamma + 4.0 * v);
  if (!(p.a > 0.0 && p.a * p.c - p.b * p.b > 0.0)) throw Error("asymptotics", "outgoing phase is not positive definite");
  return p;
}

/// q(x, y; d_x phi_+, d_y phi_+) with q = y xi + v x eta + gamma/2 (eta^2 - y^2).
inline double eikonal_residual(const QuadraticPhase& p, double v, double gamma, double x, double y) {
  const double xi = p.a * x + p.b * y;
  const double eta = p.b * x + p.c * y;
  return y * xi + v * x * eta + 0.5 * gamma * (eta * eta - y * y);
}

/// Phase-space Hessians at a KFP saddle, in the eigenbasis of V''(s) with
/// coordinates (x_1..x_d, y_1..y_d): phi'' and (phi_+ + phi_+ o kappa)'' / 2.
struct PhaseHessians {
  Mat phi;
  Mat symmetrized_outgoing;
};

inline PhaseHessians kfp_phase_hessians(const Mat& hess_saddle, double gamma) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(hess_saddle);
  const auto d = hess_saddle.rows();
  const double v = -detail::negative_eigenvalue(hess_saddle, "kfp_phase_hessians");
  const QuadraticPhase q = quadratic_phase(v, gamma);
  PhaseHessians h{Mat::Zero(2 * d, 2 * d), Mat::Zero(2 * d, 2 * d)};
  for (Eigen::Index i = 0; i < d; ++i) {
    h.phi(i, i) = eig.eigenvalues()[i];
    h.phi(d + i, d + i) = 1.0;
    // the y-odd cross term 2bxy cancels against its reflection
    h.symmetrized_outgoing(i, i) = i == 0 ? q.a : eig.eigenvalues()[i];
    h.symmetrized_outgoing(d + i, d + i) = i == 0 ? q.c : 1.0;
  }
  return h;
}

/// Witten analogue: phi_+ = |phi| on the saddle eigenbasis, kappa the identity.
inline Mat witten_symmetrized_outgoing(const Mat& hess_saddle) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(hess_saddle);
  return eig.eigenvalues().cwiseAbs().asDiagonal();
}

/// (1/pi)(lambda_hat / kappa11) sqrt(det phi''(m) / det (phi_+ + phi_+ o kappa)''(s) / 2).
inline double endestim_prefactor(const Mat& hess_min_phi, const Mat& symmetrized_outgoing, double lambda_hat_value,
                                 double kappa11) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized_outgoing);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw Error("asymptotics", "symmetrized outgoing phase Hessian is indefinite");
  const double dm = detail::positive_det(hess_min_phi, "endestim_prefactor");
  return lambda_hat_value / kappa11 / std::numbers::pi * std::sqrt(dm / symmetrized_outgoing.determinant());
}

/// Phase-space Hessian diag(V''(m), I) at a minimum.
inline Mat phase_space_hessian(const Mat& hess) {
  const auto d = hess.rows();
  Mat out = Mat::Zero(2 * d, 2 * d);
  out.topLeftCorner(d, d) = hess;
  out.bottomRightCorner(d, d) = Mat::Identity(d, d);
  return out;
}

enum class OperatorKind { kfp, witten };

struct AsymptoticEigenvalue {
  std::pair<int, int> label{1, 1};
  int minimum_id = 0;
  int saddle_id = -1;
  double barrier = kInfinity;
  std::optional<double> prefactor_l0;  // absent for the bracket-only records
  std::optional<double> b0_magnitude;
  std::optional<double> lambda_hat;
  std::vector<double> h;
  std::vector<double> mu;

  /// h l0 e^{-2S/h}, or the bracket h e^{-2S/h} without a prefactor; 0 for the global record.
  [[nodiscard]] double mu_of_h(double hv) const {
    if (!std::isfinite(barrier)) return 0.0;
    return hv * prefactor_l0.value_or(1.0) * std::exp(-2.0 * barrier / hv);
  }
};

/// One record per labelled minimum. In generic mode every finite-barrier record
/// carries its prefactor; otherwise only the exponential bracket.
inline std::vector<AsymptoticEigenvalue> asymptotic_spectrum(const Labelling& lab,
                                                             const std::vector<CriticalPoint>& points,
                                                             OperatorKind kind, double gamma,
                                                             const std::vector<double>& h_list, bool generic) {
  std::vector<AsymptoticEigenvalue> out;
  for (const auto& m : lab.minima) {
    AsymptoticEigenvalue r;
    r.label = m.label;
    r.minimum_id = m.minimum_id;
    r.barrier = m.barrier;
    r.saddle_id = m.assigned_saddle_id;
    if (std::isfinite(m.barrier) && generic) {
      if (m.assigned_saddle_id < 0) throw Error("asymptotics", "generic record without an assigned saddle");
      const Mat& hm = point_by_id(points, m.minimum_id).hessian;
      const Mat& hs = point_by_id(points, m.assigned_saddle_id).hessian;
      if (kind == OperatorKind::kfp) {
        r.lambda_hat = lambda_hat(hs, gamma).lambda_hat;
        r.prefactor_l0 = kfp_prefactor(hm, hs, gamma);
        r.b0_magnitude = interaction_b0(hm, hs, gamma);
      } else {
        r.lambda_hat = -detail::negative_eigenvalue(hs, "asymptotic_spectrum");
        r.prefactor_l0 = witten_prefactor(hm, hs);
        r.b0_magnitude = std::sqrt(*r.prefactor_l0);
      }
    }
    for (double hv : h_list) {
      r.h.push_back(hv);
      r.mu.push_back(r.mu_of_h(hv));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace metaspec
