#include <catch_amalgamated.hpp>

#include <random>

#include "metaspec/interaction_matrix.hpp"
#include "support/landscapes.hpp"

using namespace metaspec;
using Catch::Approx;
using testland::Landscape;

namespace {

// b values from the KFP formula for every boundary saddle of every component.
std::map<std::pair<int, int>, double> kfp_b_values(const Landscape& L, double gamma) {
  std::map<std::pair<int, int>, double> b;
  for (const auto& m : L.labelling.minima) {
    for (int s : m.boundary_saddle_ids) {
      b[{s, m.minimum_id}] = interaction_b0(point_by_id(L.points, m.minimum_id).hessian, point_by_id(L.points, s).hessian, gamma);
    }
  }
  return b;
}

Landscape tilted() {
  return Landscape(testland::polynomial_1d({1.0, 0.2, -2.0, 0.0, 1.0}), Box::interval(-2, 2), 801);
}

Landscape chain() { return Landscape(testland::chain_potential({0.0, 1.0, 0.3, 0.8, 0.5}), Box::interval(-2, 6), 2001); }

}  // namespace

TEST_CASE("singular values of simple matrices") {
  Mat d = Mat::Zero(3, 3);
  d.diagonal() << 1, 3, 2;
  const auto s = singular_values(d);
  CHECK(s.values[0] == Approx(3));
  CHECK(s.values[1] == Approx(2));
  CHECK(s.values[2] == Approx(1));

  std::mt19937 rng(2);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    Mat m(5, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    const auto r = singular_values(m);
    const Mat g = m.transpose() * m;
    Eigen::SelfAdjointEigenSolver<Mat> eig(g);
    for (int i = 0; i < 4; ++i) CHECK(r.values[i] == Approx(std::sqrt(eig.eigenvalues()[3 - i])).epsilon(1e-10));
    const Mat rebuilt = r.right_vectors * r.values.array().square().matrix().asDiagonal() * r.right_vectors.transpose();
    CHECK((g - rebuilt).norm() <= 1e-12 * m.squaredNorm());
  }
}

TEST_CASE("three-well R0 has the predicted kernel") {
  ThreeWellSystem sys{{1, 1, 1}, {1, 2, 3}};
  const Mat r0 = three_well_R0(sys.a(), sys.b());
  Mat expect(3, 3);
  expect << 0, 2, -3, -1, 0, 3, 1, -2, 0;
  CHECK((r0 - expect).norm() == 0.0);
  const auto s = singular_values(r0);
  CHECK(s.values[2] <= 1e-12 * s.values[0]);
  Vec k = s.right_vectors.col(2);
  k /= k[0];
  CHECK(k[1] == Approx(0.5));
  CHECK(k[2] == Approx(1.0 / 3.0));
}

TEST_CASE("Jacobi keeps tiny singular values of column-graded matrices") {
  Mat b(3, 3);
  b << 1.0, 0.3, -0.2, 0.1, 0.9, 0.4, -0.3, 0.2, 1.1;
  const std::vector<double> logs{0.0, -20.0, -45.0};
  Mat graded = b;
  for (int k = 0; k < 3; ++k) graded.col(k) *= std::exp(logs[static_cast<std::size_t>(k)]);
  const auto s = singular_values(graded);
  CHECK(s.used_jacobi);
  const Vec ls = log_singular_values(b, logs);
  for (int i = 0; i < 3; ++i) CHECK(std::log(s.values[i]) == Approx(ls[i]).epsilon(1e-12));
  // the product of singular values equals |det|
  CHECK(ls.sum() == Approx(std::log(std::abs(b.determinant())) - 65.0).epsilon(1e-12));
}

TEST_CASE("two-well R") {
  const auto L = tilted();
  const auto b = kfp_b_values(L, 1.0);
  const double h = 0.1;
  const auto R = build_R(L.labelling, L.points, b, h);
  REQUIRE(R.rows() == 1);
  REQUIRE(R.cols() == 2);
  CHECK(R.tags[0][0] == EntryClass::zero_column);
  CHECK(R.tags[0][1] == EntryClass::dominant);
  const Mat d = R.dense();
  CHECK(d(0, 0) == 0.0);
  const auto& m2 = L.labelling.minima[1];
  CHECK(d(0, 1) == Approx(std::sqrt(h) * b.at({m2.assigned_saddle_id, m2.minimum_id}) * std::exp(-m2.barrier / h)));
  const auto li = indicator_left_inverse(R);
  CHECK(li.smallest_singular_value == Approx(b.at({m2.assigned_saddle_id, m2.minimum_id})));
  REQUIRE(li.elimination.size() == 1);
  const auto cmp = generic_singular_estimate(R);
  CHECK(cmp.max_relative_deviation <= 1e-14);
}

TEST_CASE("generic chain: pattern, dominant-entry deviations, elimination order") {
  const auto L = chain();
  const auto b = kfp_b_values(L, 1.0);
  std::vector<double> hs{0.2, 0.1, 0.05}, devs;
  for (double h : hs) {
    SyntheticEntries syn;
    syn.alpha = 0.25;
    syn.seed = 9;
    const auto R = build_R(L.labelling, L.points, b, h, syn);
    REQUIRE(R.rows() == 2);
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(R.tags[static_cast<std::size_t>(j)][0] == EntryClass::zero_column);
    int dominant = 0;
    for (Eigen::Index k = 1; k < 3; ++k) {
      int per_col = 0;
      for (std::size_t j = 0; j < 2; ++j) per_col += R.tags[j][static_cast<std::size_t>(k)] == EntryClass::dominant;
      CHECK(per_col == 1);
      dominant += per_col;
    }
    CHECK(dominant == 2);
    const auto cmp = generic_singular_estimate(R);
    devs.push_back(cmp.max_relative_deviation);
    const auto li = indicator_left_inverse(R);
    CHECK(li.above_floor);
    REQUIRE(li.elimination.size() == 2);
    CHECK(li.elimination[0].level < li.elimination[1].level);
    CHECK(li.elimination[0].minimum_id == L.labelling.minima[2].minimum_id);
    const auto kf = ky_fan_sandwich(R);
    CHECK(kf.holds);
  }
  CHECK(devs[2] <= 1e-3);
  CHECK(devs[0] > devs[1]);
  CHECK(devs[1] > devs[2]);
  CHECK(fit_decay_rate(hs, devs) > 0.0);
}

TEST_CASE("exactly permuted diagonal R has no deviation") {
  const auto L = chain();
  SyntheticEntries syn;
  syn.coefficient = 0.0;
  const auto R = build_R(L.labelling, L.points, kfp_b_values(L, 1.0), 0.1, syn);
  CHECK(generic_singular_estimate(R).max_relative_deviation <= 1e-14);
}

TEST_CASE("indicator sigma_min is stable under negligible perturbations") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> ext;
    for (int i = 0; i < 9; ++i) ext.push_back(i % 2 == 0 ? u(rng) : 1.0 + u(rng));
    const Landscape L(testland::chain_potential(ext), Box::interval(-2, 10), 2401);
    const auto b = kfp_b_values(L, 1.0);
    const double h = 0.1, alpha = 0.5;
    SyntheticEntries syn;
    syn.alpha = alpha;
    syn.seed = static_cast<unsigned>(trial);
    const auto R = build_R(L.labelling, L.points, b, h, syn);
    const auto clean = indicator_left_inverse(R);
    const double full = singular_values(R.scaled_active()).values.tail(1)[0];
    const double eps = std::exp(-alpha / h);
    CHECK(std::abs(full - clean.smallest_singular_value) / clean.smallest_singular_value <= 10 * eps);
    CHECK(clean.above_floor);
  }
}

TEST_CASE("three-well closed forms") {
  // symmetric: {0, 3 alpha, 3 alpha} with alpha = a^2
  ThreeWellSystem sym{{0.7, 0.7, 0.7}, {1.3, 1.3, 1.3}};
  const auto s = three_well_spectrum(sym);
  const double alpha = std::pow(0.7 * 1.3, 2);
  CHECK(s.eigenvalues[0] == 0.0);
  CHECK(std::abs(s.eigenvalues[1] - 3 * alpha) <= 1e-12 * alpha);
  CHECK(std::abs(s.eigenvalues[2] - 3 * alpha) <= 1e-12 * alpha);
  CHECK(s.kernel_residual <= 1e-15);

  ThreeWellSystem ex{{1, 1, 1}, {1, 2, 3}};
  const auto e = three_well_spectrum(ex);
  CHECK(e.gamma == std::array<double, 3>{2, 8, 18});
  Eigen::SelfAdjointEigenSolver<Mat> dense(three_well_R0(ex.a(), ex.b()).transpose() * three_well_R0(ex.a(), ex.b()));
  CHECK(std::abs(dense.eigenvalues()[0]) <= 1e-12 * dense.eigenvalues()[2]);
  CHECK(e.eigenvalues[1] == Approx(dense.eigenvalues()[1]).epsilon(1e-12));
  CHECK(e.eigenvalues[2] == Approx(dense.eigenvalues()[2]).epsilon(1e-12));
  CHECK(e.all_checks());

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int t = 0; t < 1000; ++t) {
    ThreeWellSystem r{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
    const auto sp = three_well_spectrum(r);
    CHECK(sp.all_checks());
    CHECK(sp.kernel_residual <= 1e-12);
    const auto a = r.a(), b = r.b();
    CHECK(a[0] * a[1] * a[2] == Approx(b[0] * b[1] * b[2]).epsilon(1e-14));
    const Mat r0 = three_well_R0(a, b);
    Eigen::SelfAdjointEigenSolver<Mat> ev(r0.transpose() * r0);
    CHECK(std::abs(sp.eigenvalues[1] - ev.eigenvalues()[1]) <= 1e-10 * ev.eigenvalues()[1]);
    CHECK(std::abs(sp.eigenvalues[2] - ev.eigenvalues()[2]) <= 1e-10 * ev.eigenvalues()[2]);
  }
}

TEST_CASE("shifted-coefficient counterexample has negative discriminant") {
  for (double delta : {0.1, 0.5, 2.0}) {
    const std::array<double, 3> beta{0.3, 0.9, 1.4};
    // alpha_j - beta_{j-1} = delta for every j
    const std::array<double, 3> alpha{beta[2] + delta, beta[0] + delta, beta[1] + delta};
    CHECK(three_well_discriminant(alpha, beta) == Approx(-3 * delta * delta));
  }
}

TEST_CASE("non-generic three-well R has several dominant entries per column") {
  const Landscape W(testland::three_wells(), Box::rectangle(-2.5, 2.5, -2.5, 2.5), 201);
  std::map<std::pair<int, int>, double> b;
  for (const auto& m : W.labelling.minima) {
    for (int s : m.boundary_saddle_ids) b[{s, m.minimum_id}] = 1.0;
  }
  const auto R = build_R(W.labelling, W.points, b, 0.1);
  CHECK_THROWS_AS(generic_singular_estimate(R), Error);
}
