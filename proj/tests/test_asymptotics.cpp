#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "metaspec/asymptotics.hpp"

using namespace metaspec;
using Catch::Approx;

namespace {

Mat m1(double v) { return Mat::Constant(1, 1, v); }

// Positive root of l^2 + gamma l - v = 0.
double lambda_closed(double v, double gamma) { return std::sqrt(gamma * gamma / 4 + v) - gamma / 2; }

}  // namespace

TEST_CASE("lambda_hat closed forms") {
  CHECK(lambda_hat(m1(-1), 1).lambda_hat == Approx((std::sqrt(5.0) - 1) / 2).epsilon(1e-14));
  CHECK(lambda_hat(m1(-3), 2).lambda_hat == Approx(1.0).epsilon(1e-14));
  Mat h = Mat::Zero(2, 2);
  h.diagonal() << -4, 4;
  const auto r = lambda_hat(h, 1);
  CHECK(r.lambda_hat == Approx(lambda_closed(4, 1)).epsilon(1e-13));
  CHECK(r.v == 4.0);
  CHECK(r.block_matrix.rows() == 4);
}

TEST_CASE("lambda_hat rejects non-saddles") {
  CHECK_THROWS_AS(lambda_hat(m1(2), 1), Error);
  Mat h = Mat::Zero(2, 2);
  h.diagonal() << -1, -2;
  CHECK_THROWS_AS(lambda_hat(h, 1), Error);
  CHECK_THROWS_AS(lambda_hat(m1(-1), 0), Error);
}

TEST_CASE("lambda_hat solves its quadratic and is monotone") {
  for (double v = 0.1; v < 5; v += 0.37) {
    for (double g = 0.1; g < 5; g += 0.41) {
      const double l = lambda_hat(m1(-v), g).lambda_hat;
      CHECK(std::abs(l * l + g * l - v) <= 1e-12 * v);
      CHECK(lambda_hat(m1(-(v + 0.01)), g).lambda_hat > l);
      CHECK(lambda_hat(m1(-v), g + 0.01).lambda_hat < l);
    }
  }
}

TEST_CASE("prefactor arithmetic") {
  CHECK(kfp_prefactor(m1(2), m1(-3), 2) == Approx(std::sqrt(2.0 / 3.0) / std::numbers::pi).epsilon(1e-14));
  CHECK(interaction_b0(m1(2), m1(-3), 2) == Approx(std::pow(2.0 / 3.0, 0.25) / std::sqrt(std::numbers::pi)).epsilon(1e-14));
  CHECK(witten_prefactor(m1(2), m1(-3)) == Approx(std::sqrt(6.0) / std::numbers::pi).epsilon(1e-14));
  CHECK(witten_prefactor(m1(2), m1(-3)) == Approx(0.77970).margin(1e-5));
  CHECK(witten_prefactor(m1(1.7), m1(-1.7)) == Approx(1.7 / std::numbers::pi).epsilon(1e-14));
  CHECK_THROWS_AS(kfp_prefactor(m1(-2), m1(-3), 1), Error);
  double prev = kfp_prefactor(m1(2), m1(-3), 0.1);
  for (double g = 0.5; g < 50; g *= 1.5) {
    const double l = kfp_prefactor(m1(2), m1(-3), g);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("quadratic phase") {
  const auto p = quadratic_phase(1, 2);
  CHECK(p.b == Approx(-1.0));
  CHECK(p.c == Approx(std::sqrt(2.0)));
  CHECK(p.a == Approx(std::sqrt(2.0)));
  CHECK(p.kappa11 == Approx(1 / std::sqrt(2.0)));
  CHECK(quadratic_phase(1e-10, 1).kappa11 == Approx(1.0));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2, 2), pos(0.05, 5);
  for (int i = 0; i < 100; ++i) {
    const double v = pos(rng), g = pos(rng);
    const auto q = quadratic_phase(v, g);
    CHECK(q.kappa11 <= 1.0);
    CHECK(q.kappa11 > 0.0);
    for (int k = 0; k < 5; ++k) {
      const double x = u(rng), y = u(rng);
      CHECK(std::abs(eikonal_residual(q, v, g, x, y)) <= 1e-12 * (1 + v + g) * (x * x + y * y + 1) * (1 + q.a + q.c));
    }
  }
}

TEST_CASE("general prefactor reduces to the KFP and Witten formulas") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pos(0.05, 5);
  for (int i = 0; i < 100; ++i) {
    const double v = pos(rng), g = pos(rng), vm = pos(rng);
    const auto ph = kfp_phase_hessians(m1(-v), g);
    const auto q = quadratic_phase(v, g);
    CHECK(ph.symmetrized_outgoing(0, 0) == Approx(v * q.c));
    CHECK(ph.symmetrized_outgoing(1, 1) == Approx(q.c));
    const double lh = lambda_hat(m1(-v), g).lambda_hat;
    const double general = endestim_prefactor(phase_space_hessian(m1(vm)), ph.symmetrized_outgoing, lh, q.kappa11);
    const double direct = kfp_prefactor(m1(vm), m1(-v), g);
    CHECK(std::abs(general - direct) <= 1e-12 * direct);
    const double b0 = interaction_b0(m1(vm), m1(-v), g);
    CHECK(std::abs(b0 * b0 - direct) <= 1e-12 * direct);

    const double witten = endestim_prefactor(m1(vm), witten_symmetrized_outgoing(m1(-v)), v, 1.0);
    CHECK(std::abs(witten - witten_prefactor(m1(vm), m1(-v))) <= 1e-12 * witten);
  }
  // 2D saddle: same identity with a transverse mode
  Mat hs(2, 2), hm(2, 2);
  hs << -1.5, 0.4, 0.4, 2.0;
  hm << 3.0, 0.5, 0.5, 1.2;
  const auto ph = kfp_phase_hessians(hs, 0.7);
  const auto sr = lambda_hat(hs, 0.7);
  const double general = endestim_prefactor(phase_space_hessian(hm), ph.symmetrized_outgoing, sr.lambda_hat,
                                            quadratic_phase(sr.v, 0.7).kappa11);
  CHECK(general == Approx(kfp_prefactor(hm, hs, 0.7)).epsilon(1e-12));
}

TEST_CASE("scaling all Hessians leaves the general prefactor consistent") {
  for (double t : {0.5, 2.0, 7.0}) {
    const double v = 1.3 * t, vm = 2.1 * t, g = 1.0;
    const auto q = quadratic_phase(v, g);
    const double general = endestim_prefactor(phase_space_hessian(m1(vm)), kfp_phase_hessians(m1(-v), g).symmetrized_outgoing,
                                              lambda_hat(m1(-v), g).lambda_hat, q.kappa11);
    CHECK(general == Approx(lambda_hat(m1(-v), g).lambda_hat / std::numbers::pi * std::sqrt(vm / v)).epsilon(1e-12));
  }
}

TEST_CASE("indefinite symmetrized phase is rejected") {
  Mat bad = Mat::Zero(2, 2);
  bad.diagonal() << 1, -1;
  CHECK_THROWS_AS(endestim_prefactor(phase_space_hessian(m1(1)), bad, 1, 1), Error);
}

TEST_CASE("asymptotic spectrum of the tilted double well") {
  const ScalarField f(Polynomial(1, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}, {0.2, {1, 0}}}));
  const auto pts = find_critical_points(f, Box::interval(-2, 2)).points;
  const SamplingGrid grid(f, Box::interval(-2, 2), 801);
  const auto lab = label_minima(pts, detect_separating_saddles(f, pts, grid), grid);
  const std::vector<double> hs{0.25, 0.2, 0.15, 0.1};
  const auto asym = asymptotic_spectrum(lab, pts, OperatorKind::kfp, 1.0, hs, true);
  REQUIRE(asym.size() == 2);
  CHECK(asym[0].mu == std::vector<double>(4, 0.0));
  const auto& r = asym[1];
  const auto& m = point_by_id(pts, r.minimum_id);
  const auto& s = point_by_id(pts, r.saddle_id);
  CHECK(r.barrier == s.value - m.value);
  const double l0 = kfp_prefactor(m.hessian, s.hessian, 1.0);
  for (std::size_t i = 0; i < hs.size(); ++i) CHECK(r.mu[i] == Approx(hs[i] * l0 * std::exp(-2 * r.barrier / hs[i])));
  CHECK(*r.b0_magnitude * *r.b0_magnitude == Approx(*r.prefactor_l0).epsilon(1e-12));

  const auto bracket = asymptotic_spectrum(lab, pts, OperatorKind::kfp, 1.0, hs, false);
  CHECK_FALSE(bracket[1].prefactor_l0.has_value());
  CHECK(bracket[1].mu[3] == Approx(0.1 * std::exp(-2 * r.barrier / 0.1)));
}

TEST_CASE("single well spectrum is zero") {
  const ScalarField f(Polynomial(1, {{1.0, {2, 0}}}));
  const auto pts = find_critical_points(f, Box::interval(-2, 2)).points;
  const SamplingGrid grid(f, Box::interval(-2, 2), 101);
  const auto lab = label_minima(pts, detect_separating_saddles(f, pts, grid), grid);
  const auto asym = asymptotic_spectrum(lab, pts, OperatorKind::witten, 0.0, {0.1, 0.05}, true);
  REQUIRE(asym.size() == 1);
  CHECK(asym[0].mu == std::vector<double>{0.0, 0.0});
}
