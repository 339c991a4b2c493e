#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "tdfdr/density.hpp"

using namespace tdfdr;

namespace {

Eigen::VectorXd to_vector(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

} // namespace

TEST_CASE("single kernel evaluates to the standard normal peak") {
  KdeModel model = kde_fit(to_vector({0.0}), 1.0);
  const double expected = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  CHECK(model(0.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(model(0.0) == doctest::Approx(0.39894).epsilon(1e-4));
}

TEST_CASE("two symmetric kernels evaluate to phi(1) at the midpoint") {
  KdeModel model = kde_fit(to_vector({-1.0, 1.0}), 1.0);
  const double phi1 = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(model(0.0) == doctest::Approx(phi1).epsilon(1e-12));
  CHECK(model(0.0) == doctest::Approx(0.24197).epsilon(1e-4));
}

TEST_CASE("zero-weight points drop out of the evaluator") {
  KdeModel weighted = kde_fit(to_vector({0.4, 9.0}), to_vector({2.0, 0.0}), 0.7);
  KdeModel single = kde_fit(to_vector({0.4}), 0.7);
  for (double x = -3.0; x <= 3.0; x += 0.1) {
    CHECK(weighted(x) == doctest::Approx(single(x)).epsilon(1e-14));
  }
}

TEST_CASE("uniform weights equal the unweighted fit exactly") {
  RngStream rng = make_rng(17, 0);
  Eigen::VectorXd points(200);
  for (Eigen::Index i = 0; i < points.size(); ++i) points[i] = rng.next_normal();
  KdeModel unweighted = kde_fit(points, 0.35);
  KdeModel weighted = kde_fit(points, Eigen::VectorXd::Ones(points.size()), 0.35);
  for (double x = -4.0; x <= 4.0; x += 0.05) {
    CHECK(std::abs(unweighted(x) - weighted(x)) <= 1e-12);
  }
}

TEST_CASE("fitted densities integrate to one and stay positive") {
  RngStream rng = make_rng(23, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd points(60);
    for (Eigen::Index i = 0; i < points.size(); ++i) {
      points[i] = 2.0 * rng.next_normal() + rng.next_double();
    }
    const double h = 0.1 + rng.next_double();
    Eigen::VectorXd weights(points.size());
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      weights[i] = rng.next_double();
    }
    KdeModel model = kde_fit(points, weights, h);

    const double lo = points.minCoeff() - 10.0 * h;
    const double hi = points.maxCoeff() + 10.0 * h;
    const double integral =
        testutil::simpson([&](double x) { return model(x); }, lo, hi, 10000);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));

    for (double x = lo; x <= hi; x += (hi - lo) / 256.0) {
      CHECK(model(x) > 0.0);
    }
  }
}

TEST_CASE("log_density agrees with density and reaches into the far tail") {
  RngStream rng = make_rng(29, 0);
  Eigen::VectorXd points(50);
  for (Eigen::Index i = 0; i < points.size(); ++i) points[i] = rng.next_normal();
  KdeModel model = kde_fit(points, 0.4);
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    CHECK(std::log(model(x)) == doctest::Approx(model.log_density(x)).epsilon(1e-10));
  }
  // density() underflows to 0 out here; log_density must not
  const double far = 200.0;
  CHECK(model(far) == 0.0);
  CHECK(std::isfinite(model.log_density(far)));
  CHECK(model.log_density(far) < -1000.0);
}

TEST_CASE("constructor rejects bad inputs") {
  CHECK_THROWS_AS(kde_fit(Eigen::VectorXd(), 1.0), EmptyInput);
  CHECK_THROWS_AS(kde_fit(to_vector({1.0, 2.0}), 0.0), NonPositiveBandwidth);
  CHECK_THROWS_AS(kde_fit(to_vector({1.0, 2.0}), -1.0), NonPositiveBandwidth);
  CHECK_THROWS_AS(kde_fit(to_vector({1.0, 2.0}), to_vector({0.0, 0.0}), 1.0),
                  AllZeroWeights);
}

TEST_CASE("bandwidth selection needs ten points") {
  CHECK_THROWS_AS(select_bandwidth(to_vector({1, 2, 3, 4, 5, 6, 7, 8, 9}),
                                   make_rng(0, 0)),
                  TooFewPoints);
}

TEST_CASE("cross-validated bandwidth lands near Silverman on normal data") {
  RngStream rng = make_rng(314159, 0);
  Eigen::VectorXd points(10000);
  for (Eigen::Index i = 0; i < points.size(); ++i) points[i] = rng.next_normal();
  const double h_s = silverman_bandwidth(points);
  const double h = select_bandwidth(points, make_rng(314159, 1));
  CHECK(h >= 0.5 * h_s);
  CHECK(h <= 2.0 * h_s);
}

TEST_CASE("zero spread falls back to the bandwidth floor") {
  Eigen::VectorXd points = Eigen::VectorXd::Constant(50, 3.25);
  const double h = select_bandwidth(points, make_rng(0, 0));
  CHECK(h == 1e-6);
}

TEST_CASE("selected bandwidth scales with the data") {
  RngStream rng = make_rng(2718, 0);
  Eigen::VectorXd points(400);
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    points[i] = rng.next_normal() + 0.3 * rng.next_double();
  }
  const double c = 7.5;
  const double h_base = select_bandwidth(points, make_rng(1, 0));
  const double h_scaled = select_bandwidth((c * points.array()).matrix(),
                                           make_rng(1, 0));
  // equivariant up to one geometric grid step, 64^(1/29)
  const double step = std::pow(64.0, 1.0 / 29.0);
  CHECK(h_scaled >= c * h_base / step * 0.999999);
  CHECK(h_scaled <= c * h_base * step * 1.000001);
}
