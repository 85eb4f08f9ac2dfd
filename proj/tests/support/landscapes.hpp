#pragma once

// Test landscapes shared by the unit and acceptance suites.

#include <cmath>
#include <numbers>
#include <vector>

#include "metaspec/topology.hpp"

namespace testland {

using namespace metaspec;

// Cosine interpolation through prescribed extremal values at x = 0, 1, 2, ...
// with quadratic walls outside, sampled densely into a tabulated spline.
inline ScalarField chain_potential(const std::vector<double>& extrema, double step = 0.05) {
  const double last = static_cast<double>(extrema.size() - 1);
  auto g = [&](double x) {
    if (x <= 0) return extrema.front() + x * x;
    if (x >= last) return extrema.back() + (x - last) * (x - last);
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double t = x - static_cast<double>(i);
    return extrema[i] + (extrema[i + 1] - extrema[i]) * (1 - std::cos(std::numbers::pi * t)) / 2;
  };
  std::vector<double> xs, vs;
  for (double x = -2.0; x <= last + 2.0 + 1e-9; x += step) {
    xs.push_back(x);
    vs.push_back(g(x));
  }
  return ScalarField(Tabulated1d(xs, vs));
}

inline ScalarField polynomial_1d(std::vector<double> coefficients) {
  std::vector<Monomial> terms;
  for (std::size_t p = 0; p < coefficients.size(); ++p) {
    if (coefficients[p] != 0.0) terms.push_back({coefficients[p], {static_cast<int>(p), 0}});
  }
  return ScalarField(Polynomial(1, terms));
}

// 0.5 |x|^2 - sum 2 exp(-|x - c_i|^2 / (2 * 0.4^2)), centres on the unit circle.
inline ScalarField three_wells(double depth = 2.0, double width = 0.4) {
  std::vector<Vec> centers;
  for (double deg : {90.0, 210.0, 330.0}) {
    Vec c(2);
    c << std::cos(deg * std::numbers::pi / 180), std::sin(deg * std::numbers::pi / 180);
    centers.push_back(c);
  }
  return ScalarField(GaussianWells(centers, {depth, depth, depth}, {width, width, width}, 0.5));
}

struct Landscape {
  ScalarField field;
  Box box;
  std::vector<CriticalPoint> points;
  SamplingGrid grid;
  std::vector<SaddleInfo> saddles;
  Labelling labelling;

  Landscape(ScalarField f, Box b, int n)
      : field(std::move(f)), box(std::move(b)), points(find_critical_points(field, box).points),
        grid(field, box, n), saddles(detect_separating_saddles(field, points, grid)),
        labelling(label_minima(points, saddles, grid)) {}
};

}  // namespace testland
