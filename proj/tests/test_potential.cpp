#include <catch_amalgamated.hpp>

#include <random>

#include "metaspec/potential.hpp"

using namespace metaspec;
using Catch::Approx;

namespace {

ScalarField double_well(double tilt = 0.0) {
  // (x^2-1)^2 + tilt*x
  return ScalarField(Polynomial(1, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}, {tilt, {1, 0}}}));
}

ScalarField separable_2d() {
  return ScalarField(Polynomial(2, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}, {2.0, {0, 2}}}));
}

Vec point(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double c : v) x[i++] = c;
  return x;
}

// Central differences of the value (gradient) and of the exact gradient (Hessian).
void check_derivatives(const ScalarField& f, const Vec& x) {
  const double d = 1e-5;
  const Evaluation e = f.evaluate(x);
  for (int i = 0; i < f.dimension(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += d;
    xm[i] -= d;
    const double g = (f.value(xp) - f.value(xm)) / (2 * d);
    CHECK(std::abs(g - e.gradient[i]) <= 1e-6 * std::max(1.0, std::abs(e.gradient[i])));
    const Vec h = (f.evaluate(xp).gradient - f.evaluate(xm).gradient) / (2 * d);
    for (int j = 0; j < f.dimension(); ++j) {
      CHECK(std::abs(h[j] - e.hessian(j, i)) <= 1e-6 * std::max(1.0, std::abs(e.hessian(j, i))));
    }
  }
}

}  // namespace

TEST_CASE("polynomial double well values") {
  const auto f = double_well();
  auto e = f.evaluate(point({0.0}));
  CHECK(e.value == 1.0);
  CHECK(e.gradient[0] == 0.0);
  CHECK(e.hessian(0, 0) == -4.0);
  e = f.evaluate(point({1.0}));
  CHECK(e.value == 0.0);
  CHECK(e.gradient[0] == 0.0);
  CHECK(e.hessian(0, 0) == 8.0);
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(double_well().evaluate(point({0.0, 1.0})), Error);
  CHECK_THROWS_AS(separable_2d().value(0.5), Error);
}

TEST_CASE("finite-difference check of every family") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const ScalarField poly = separable_2d();
  const ScalarField poly_mixed(Polynomial(2, {{0.3, {3, 1}}, {-0.7, {1, 2}}, {0.25, {4, 0}}, {0.5, {0, 4}}}));
  const ScalarField wells(GaussianWells({point({1.0, 0.0}), point({-0.5, 0.8})}, {2.0, 1.5}, {0.4, 0.5}, 0.5));
  const ScalarField tab(Tabulated1d({-2, -1, -0.5, 0, 0.7, 1.2, 2}, {3, 0.2, 0.6, 1.0, 0.1, 0.4, 2.5}));
  const ScalarField lift = phase_space_lift(double_well(0.2));
  for (int k = 0; k < 20; ++k) {
    check_derivatives(poly, point({u(rng), u(rng)}));
    check_derivatives(poly_mixed, point({u(rng), u(rng)}));
    check_derivatives(wells, point({u(rng), u(rng)}));
    check_derivatives(lift, point({u(rng), u(rng)}));
    check_derivatives(double_well(0.2), point({u(rng)}));
    // keep away from knots where the spline's third derivative jumps
    check_derivatives(tab, point({-0.75 + 0.01 * k}));
  }
}

TEST_CASE("tabulated spline interpolates knots and extends linearly") {
  const Tabulated1d t({0, 1, 2, 3}, {0, 1, 0, 1});
  for (int i = 0; i < 4; ++i) CHECK(t.eval(i)[0] == Approx(t.values()[i]).margin(1e-14));
  const auto right = t.eval(3.0);
  CHECK(t.eval(4.0)[0] == Approx(right[0] + right[1]));
  CHECK(t.eval(4.0)[2] == 0.0);
  CHECK(right[2] == Approx(0.0).margin(1e-14));  // natural end
}

TEST_CASE("double well critical points") {
  const auto res = find_critical_points(double_well(), Box::interval(-2, 2));
  REQUIRE(res.points.size() == 3);
  CHECK(res.points[0].location[0] == Approx(-1.0));
  CHECK(res.points[1].location[0] == Approx(1.0));
  CHECK(res.points[0].morse_index == 0);
  CHECK(res.points[1].morse_index == 0);
  CHECK(res.points[2].location[0] == Approx(0.0).margin(1e-12));
  CHECK(res.points[2].value == Approx(1.0));
  CHECK(res.points[2].morse_index == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(res.points[i].id == static_cast<int>(i));

  const auto rep = verify_morse_and_confinement(double_well(), res.points, Box::interval(-2, 2));
  CHECK(rep.all_nondegenerate);
  CHECK(rep.n0 == 2);
  CHECK(rep.n1 == 1);
  CHECK(rep.min_shell_gradient == Approx(24.0));
  CHECK(rep.confined());
}

TEST_CASE("tilted double well agrees with sign changes of V'") {
  const auto f = double_well(0.2);
  const auto res = find_critical_points(f, Box::interval(-2, 2));
  REQUIRE(res.points.size() == 3);
  // bracket each root of V' on a fine grid, then check the Newton points sit inside
  std::vector<double> brackets;
  for (int i = 0; i < 4000; ++i) {
    const double a = -2 + 4.0 * i / 4000, b = a + 4.0 / 4000;
    if (f.derivative(a) * f.derivative(b) < 0) brackets.push_back(a);
  }
  REQUIRE(brackets.size() == 3);
  for (const auto& p : res.points) {
    CHECK(std::abs(f.derivative(p.location[0])) <= 1e-10);
    const bool bracketed = std::any_of(brackets.begin(), brackets.end(), [&](double a) {
      return p.location[0] >= a && p.location[0] <= a + 4.0 / 4000;
    });
    CHECK(bracketed);
  }
  CHECK(res.points[0].location[0] < -0.9);  // deeper minimum on the left
  CHECK(res.points[1].location[0] > 0.9);
  CHECK(res.points[0].value < res.points[1].value);
  CHECK(res.points[2].morse_index == 1);
  CHECK(std::abs(res.points[2].location[0]) < 0.1);
  const auto rep = verify_morse_and_confinement(f, res.points, Box::interval(-2, 2));
  CHECK(rep.n0 == 2);
  CHECK(rep.n1 == 1);
}

TEST_CASE("separable 2D well") {
  const auto res = find_critical_points(separable_2d(), Box::rectangle(-2, 2, -2, 2));
  REQUIRE(res.points.size() == 3);
  const auto& s = res.points[2];
  CHECK(s.morse_index == 1);
  CHECK(s.location.norm() <= 1e-12);
  CHECK(s.hessian(0, 0) == Approx(-4.0));
  CHECK(s.hessian(1, 1) == Approx(4.0));
  CHECK(s.hessian(0, 1) == Approx(0.0).margin(1e-14));
  CHECK(res.points[0].location[0] == Approx(-1.0));
  CHECK(res.points[1].location[0] == Approx(1.0));
}

TEST_CASE("degenerate point is fatal unless kept for reporting") {
  const ScalarField quartic(Polynomial(1, {{1.0, {4, 0}}}));
  CHECK_THROWS_AS(find_critical_points(quartic, Box::interval(-1, 1)), Error);
  CriticalSearchOptions opt;
  opt.keep_degenerate = true;
  const auto res = find_critical_points(quartic, Box::interval(-1, 1), opt);
  REQUIRE(res.points.size() == 1);
  const auto rep = verify_morse_and_confinement(quartic, res.points, Box::interval(-1, 1));
  CHECK_FALSE(rep.all_nondegenerate);
  CHECK(rep.degenerate_ids == std::vector<int>{0});
}

TEST_CASE("no critical points in the box is fatal") {
  const ScalarField slope(Polynomial(1, {{1.0, {1, 0}}}));
  CHECK_THROWS_AS(find_critical_points(slope, Box::interval(-1, 1)), Error);
}

TEST_CASE("critical set is stable under doubling the seed count") {
  const ScalarField wells(GaussianWells({point({1.0, 0.0}), point({-0.5, 0.866}), point({-0.5, -0.866})},
                                        {2.0, 2.0, 2.0}, {0.4, 0.4, 0.4}, 0.5));
  const Box box = Box::rectangle(-2.5, 2.5, -2.5, 2.5);
  CriticalSearchOptions coarse, fine;
  coarse.seeds_per_axis = 25;
  fine.seeds_per_axis = 50;
  const auto a = find_critical_points(wells, box, coarse);
  const auto b = find_critical_points(wells, box, fine);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK((a.points[i].location - b.points[i].location).norm() <= 1e-9);
    CHECK(a.points[i].morse_index == b.points[i].morse_index);
  }
  const auto rep = verify_morse_and_confinement(wells, a.points, box);
  CHECK(rep.n0 == 3);
  CHECK(rep.n1 == 3);
  CHECK(rep.n_higher == 1);
}

TEST_CASE("phase-space lift mirrors the critical structure of V") {
  const auto v = double_well(0.2);
  const auto phi = phase_space_lift(v);
  const auto base = find_critical_points(v, Box::interval(-2, 2));
  const auto lifted = find_critical_points(phi, Box::rectangle(-2, 2, -2, 2));
  REQUIRE(base.points.size() == lifted.points.size());
  for (std::size_t i = 0; i < base.points.size(); ++i) {
    CHECK(lifted.points[i].location[0] == Approx(base.points[i].location[0]).margin(1e-10));
    CHECK(lifted.points[i].location[1] == Approx(0.0).margin(1e-10));
    CHECK(lifted.points[i].morse_index == base.points[i].morse_index);
  }
}

TEST_CASE("tabulated critical points from per-segment roots") {
  const Tabulated1d t({-2, -1, -0.5, 0, 0.7, 1.2, 2}, {3, 0.2, 0.6, 1.0, 0.1, 0.4, 2.5});
  const ScalarField f(t);
  const auto res = find_critical_points(f, Box::interval(-2, 2));
  // dense sign-change count of the spline derivative
  int changes = 0;
  for (int i = 0; i < 8000; ++i) {
    const double a = -2 + 4.0 * i / 8000, b = a + 4.0 / 8000;
    if (f.derivative(a) * f.derivative(b) < 0) ++changes;
  }
  CHECK(static_cast<int>(res.points.size()) == changes);
  for (const auto& p : res.points) CHECK(std::abs(f.derivative(p.location[0])) <= 1e-10);
}
