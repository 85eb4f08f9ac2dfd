#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "metaspec/topology.hpp"
#include "support/landscapes.hpp"

using namespace metaspec;
using Catch::Approx;
using testland::chain_potential;
using testland::Landscape;

namespace {

// Exhaustive 1D sweep: sigma of each minimum is the lower of the two maxima of V
// on the way to a strictly lower minimum (left or right).
std::map<int, double> interval_oracle(const std::vector<CriticalPoint>& pts) {
  std::vector<CriticalPoint> byx = pts;
  std::sort(byx.begin(), byx.end(), [](const auto& a, const auto& b) { return a.location[0] < b.location[0]; });
  std::map<int, double> out;
  for (std::size_t i = 0; i < byx.size(); ++i) {
    if (!byx[i].is_minimum()) continue;
    double best = kInfinity;
    for (int dir : {-1, 1}) {
      double barrier = -kInfinity;
      for (auto j = static_cast<std::ptrdiff_t>(i) + dir; j >= 0 && j < static_cast<std::ptrdiff_t>(byx.size()); j += dir) {
        const auto& q = byx[static_cast<std::size_t>(j)];
        if (q.is_saddle()) barrier = std::max(barrier, q.value);
        if (q.is_minimum() && detail::ordered_before(q, byx[i])) {
          best = std::min(best, barrier);
          break;
        }
      }
    }
    out[byx[i].id] = best;
  }
  return out;
}

}  // namespace

TEST_CASE("1D chain: both saddles separate, barriers from the sweep") {
  Landscape L(chain_potential({0.0, 1.0, 0.3, 0.8, 0.5}), Box::interval(-2, 6), 4001);
  REQUIRE(L.points.size() == 5);
  REQUIRE(L.saddles.size() == 2);
  for (const auto& s : L.saddles) CHECK(s.is_separating);

  const auto oracle = interval_oracle(L.points);
  for (const auto& m : L.labelling.minima) CHECK(m.sigma == oracle.at(m.minimum_id));

  const auto& g = L.labelling.minima[0];
  CHECK(g.label == std::pair{1, 1});
  CHECK(std::isinf(g.sigma));
  CHECK(std::isinf(g.barrier));
  CHECK(g.minimum_value == Approx(0.0).margin(2e-3));

  const auto& a = L.labelling.minima[1];  // minimum near 0.3, dies at the higher saddle
  CHECK(a.label == std::pair{2, 1});
  CHECK(a.minimum_value == Approx(0.3).margin(5e-3));
  CHECK(a.sigma == Approx(1.0).margin(5e-3));
  CHECK(a.barrier == Approx(0.7).margin(1e-2));
  CHECK(a.component_member_min_ids.size() == 2);

  const auto& b = L.labelling.minima[2];
  CHECK(b.label == std::pair{3, 1});
  CHECK(b.sigma == Approx(0.8).margin(5e-3));
  CHECK(b.barrier == Approx(0.3).margin(1e-2));
  CHECK(b.component_member_min_ids.size() == 1);

  CHECK(L.labelling.tree.sigma_levels.size() == 3);
  CHECK(std::isinf(L.labelling.tree.sigma_levels[0]));
  CHECK(L.labelling.tree.sigma_levels[1] > L.labelling.tree.sigma_levels[2]);

  const auto gen = is_generic(L.labelling, L.points, 1e-6);
  CHECK(gen.generic);
  const auto gap = gap_conditions(L.labelling);
  CHECK(gap.fa1_holds);
  CHECK(gap.fa2_holds);
  CHECK(gap.S_gap == Approx(a.barrier - b.barrier));

  const auto brute = brute_force_pairing(L.points, L.grid, 1000, std::pair{0.0, 1.2});
  CHECK(brute.level_step == Approx(1.2 / 999));
  REQUIRE(brute.sigma.size() == 2);
  for (const auto& [id, s] : brute.sigma) {
    CHECK(std::abs(s - L.labelling.by_minimum(id).sigma) <= brute.level_step);
  }
}

TEST_CASE("single well: one record with infinite barrier") {
  Landscape L(ScalarField(Polynomial(1, {{1.0, {2, 0}}})), Box::interval(-2, 2), 401);
  REQUIRE(L.labelling.minima.size() == 1);
  CHECK(std::isinf(L.labelling.minima[0].barrier));
  CHECK(L.saddles.empty());
  CHECK(is_generic(L.labelling, L.points, 1e-9).generic);
}

TEST_CASE("symmetric double well: tie broken by location") {
  const ScalarField f(Polynomial(1, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}}));
  Landscape L(f, Box::interval(-2, 2), 801);
  REQUIRE(L.labelling.minima.size() == 2);
  const auto& g = L.labelling.minima[0];
  CHECK(point_by_id(L.points, g.minimum_id).location[0] == Approx(-1.0));
  const auto& o = L.labelling.minima[1];
  CHECK(o.sigma == Approx(1.0));
  CHECK(o.barrier == Approx(1.0));
  CHECK(o.assigned_saddle_id == 2);
  // two minima at equal depth violate (a) for the whole space
  CHECK_FALSE(is_generic(L.labelling, L.points, 1e-9).generic);
  const auto brute = brute_force_pairing(L.points, L.grid, 400);
  REQUIRE(brute.sigma.size() == 1);
  CHECK(std::abs(brute.sigma[0].second - 1.0) <= brute.level_step);
}

TEST_CASE("tilted double well is generic") {
  const ScalarField f(Polynomial(1, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}, {0.2, {1, 0}}}));
  Landscape L(f, Box::interval(-2, 2), 801);
  const auto gen = is_generic(L.labelling, L.points, 1e-9);
  CHECK(gen.generic);
  const auto& m2 = L.labelling.minima[1];
  const auto& s = point_by_id(L.points, m2.assigned_saddle_id);
  CHECK(m2.barrier == Approx(s.value - m2.minimum_value).epsilon(1e-14));
  CHECK(point_by_id(L.points, m2.minimum_id).location[0] > 0);
  const auto gap = gap_conditions(L.labelling);
  CHECK(gap.fa1_holds);
  CHECK(gap.fa2_holds);
}

TEST_CASE("2D separable saddle separates; local maximum is not listed") {
  const ScalarField f(Polynomial(2, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}, {2.0, {0, 2}}}));
  Landscape L(f, Box::rectangle(-2, 2, -2, 2), 161);
  REQUIRE(L.saddles.size() == 1);
  CHECK(L.saddles[0].is_separating);
  CHECK(L.saddles[0].component_minima[0].size() == 1);
  CHECK(L.saddles[0].component_minima[1].size() == 1);

  // three wells on a ring: the centre is an index-2 point
  Landscape W(testland::three_wells(), Box::rectangle(-2.5, 2.5, -2.5, 2.5), 201);
  CHECK(W.saddles.size() == 3);
  for (const auto& s : W.saddles) {
    CHECK(point_by_id(W.points, s.critical_point_id).morse_index == 1);
    CHECK(s.is_separating);
  }
}

TEST_CASE("symmetric three wells are not generic") {
  Landscape W(testland::three_wells(), Box::rectangle(-2.5, 2.5, -2.5, 2.5), 201);
  REQUIRE(W.labelling.minima.size() == 3);
  CHECK(W.labelling.minima[1].label == std::pair{2, 1});
  CHECK(W.labelling.minima[2].label == std::pair{2, 2});
  CHECK(W.labelling.minima[1].barrier == Approx(W.labelling.minima[2].barrier).epsilon(1e-10));
  const auto gen = is_generic(W.labelling, W.points, 1e-8);
  CHECK_FALSE(gen.generic);
  bool equal_saddles = false;
  for (const auto& v : gen.violations) equal_saddles = equal_saddles || v.find("equal-value separating saddles") != std::string::npos;
  CHECK(equal_saddles);
  CHECK_FALSE(gap_conditions(W.labelling).fa1_holds);
}

TEST_CASE("gap conditions on prescribed barriers") {
  Labelling lab;
  auto add = [&](double S, int nb) {
    LabelledMinimum m;
    m.barrier = S;
    m.boundary_saddle_ids.assign(static_cast<std::size_t>(nb), 0);
    lab.minima.push_back(m);
  };
  add(kInfinity, 0);
  add(0.7, 1);
  add(0.3, 1);
  auto g = gap_conditions(lab);
  CHECK(g.fa1_holds);
  CHECK(g.S_gap == Approx(0.4));
  lab.minima[2].barrier = 0.7;
  CHECK_FALSE(gap_conditions(lab).fa1_holds);
}

TEST_CASE("doubling the grid keeps the pairing") {
  const ScalarField f = chain_potential({0.0, 1.0, 0.3, 0.8, 0.5, 1.4, 0.2});
  Landscape a(f, Box::interval(-2, 8), 1001);
  Landscape b(f, Box::interval(-2, 8), 2001);
  REQUIRE(a.labelling.minima.size() == b.labelling.minima.size());
  for (std::size_t i = 0; i < a.labelling.minima.size(); ++i) {
    CHECK(a.labelling.minima[i].minimum_id == b.labelling.minima[i].minimum_id);
    CHECK(a.labelling.minima[i].assigned_saddle_id == b.labelling.minima[i].assigned_saddle_id);
    CHECK(a.labelling.minima[i].label == b.labelling.minima[i].label);
  }
}

TEST_CASE("randomized 1D landscapes: union-find equals exhaustive sweep") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> ext;
    for (int i = 0; i < 7; ++i) ext.push_back(i % 2 == 0 ? u(rng) : 1.0 + u(rng));
    Landscape L(chain_potential(ext), Box::interval(-2, 8), 2001);
    const auto oracle = interval_oracle(L.points);
    int finite = 0;
    for (const auto& m : L.labelling.minima) {
      CHECK(m.sigma == oracle.at(m.minimum_id));
      if (std::isfinite(m.barrier)) {
        CHECK(m.barrier > 0);
        ++finite;
      }
    }
    CHECK(finite == static_cast<int>(L.labelling.minima.size()) - 1);
    // each split uses its own separating saddle
    std::vector<int> used;
    for (const auto& m : L.labelling.minima) {
      if (m.assigned_saddle_id >= 0) used.push_back(m.assigned_saddle_id);
    }
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
  }
}

TEST_CASE("seed outside the grid is reported") {
  const ScalarField f(Polynomial(1, {{1.0, {4, 0}}, {-2.0, {2, 0}}, {1.0, {0, 0}}}));
  const auto pts = find_critical_points(f, Box::interval(-2, 2)).points;
  const SamplingGrid coarse(f, Box::interval(-2, 2), 5);
  CHECK_THROWS_AS(detect_separating_saddles(f, pts, coarse), Error);
}
