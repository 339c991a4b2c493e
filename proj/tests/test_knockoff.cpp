#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "tdfdr/knockoff.hpp"
#include "tdfdr/two_group.hpp"

using namespace tdfdr;

namespace {

// Independent Lasso oracle: plain cyclic coordinate descent solved from a
// cold start at every grid point, no warm starts, no active-set shortcut.
Eigen::VectorXd lasso_entries_cold_oracle(const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& grid) {
  const Eigen::Index p = a.cols();
  Eigen::VectorXd col_sq = a.colwise().squaredNorm().transpose();
  Eigen::VectorXd entry = Eigen::VectorXd::Zero(p);

  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double lambda = grid[g];
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd residual = y;
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        const double old = beta[j];
        const double z = a.col(j).dot(residual) + col_sq[j] * old;
        double next = 0.0;
        if (z > lambda) next = (z - lambda) / col_sq[j];
        if (z < -lambda) next = (z + lambda) / col_sq[j];
        if (next != old) {
          residual -= a.col(j) * (next - old);
          beta[j] = next;
        }
        max_change = std::max(max_change, std::abs(next - old));
      }
      if (max_change < 1e-8) break;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0 && entry[j] == 0.0) entry[j] = lambda;
    }
  }
  return entry;
}

Eigen::MatrixXd random_gaussian(Eigen::Index rows, Eigen::Index cols,
                                RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
  }
  return m;
}

Eigen::MatrixXd random_ar1(Eigen::Index rows, Eigen::Index cols, double rho,
                           RngStream& rng) {
  Eigen::MatrixXd m(rows, cols);
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double prev = rng.next_normal();
    m(i, 0) = prev;
    for (Eigen::Index j = 1; j < cols; ++j) {
      prev = rho * prev + innovation * rng.next_normal();
      m(i, j) = prev;
    }
  }
  return m;
}

Eigen::VectorXd geometric_grid(double top, double decades, int size) {
  // keep the top strictly above lambda_max so no column sits on the
  // zero/nonzero knife edge of the first grid point
  top *= 1.0 + 1e-9;
  Eigen::VectorXd grid(size);
  for (int i = 0; i < size; ++i) {
    grid[i] = top * std::pow(10.0, -decades * i / (size - 1));
  }
  return grid;
}

} // namespace

TEST_CASE("orthogonal design: knockoffs exactly orthogonal to originals") {
  RngStream rng = make_rng(101, 0);
  Eigen::MatrixXd raw = random_gaussian(20, 5, rng);
  // center first so the columns stay orthonormal through construction
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    raw.col(j).array() -= raw.col(j).mean();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd x = qr.householderQ() * Eigen::MatrixXd::Identity(20, 5);

  RngStream construct_rng = make_rng(101, 1);
  KnockoffModel model = construct_knockoffs(x, construct_rng);

  CHECK((model.s.array() == 1.0).all());
  CHECK((model.design.transpose() * model.knockoffs).cwiseAbs().maxCoeff() <=
        1e-8);
  CHECK((model.knockoffs.transpose() * model.knockoffs -
         Eigen::MatrixXd::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() <= 1e-8);
}

TEST_CASE("single column: the knockoff is a unit vector orthogonal to it") {
  RngStream rng = make_rng(102, 0);
  Eigen::MatrixXd x = random_gaussian(8, 1, rng);

  RngStream construct_rng = make_rng(102, 1);
  KnockoffModel model = construct_knockoffs(x, construct_rng);

  CHECK(model.s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(model.design.col(0).dot(model.knockoffs.col(0))) <= 1e-10);
  CHECK(model.knockoffs.col(0).norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("AR(1) design at simulation scale satisfies both identities") {
  RngStream rng = make_rng(103, 0);
  Eigen::MatrixXd x = random_ar1(600, 200, 0.3, rng);
  RngStream construct_rng = make_rng(103, 1);
  KnockoffModel model = construct_knockoffs(x, construct_rng);
  CHECK(model.residual_gram <= 1e-8);
  CHECK(model.residual_cross <= 1e-8);
}

TEST_CASE("construction identities and complement orthonormality on random designs") {
  RngStream scenario_rng = make_rng(104, 0);
  const double rhos[] = {0.0, 0.3, 0.6};
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index m = 5 + static_cast<Eigen::Index>(scenario_rng.next_below(60));
    const Eigen::Index n = 4 * m;
    const double rho = rhos[trial % 3];

    RngStream data_rng = make_rng(104, 10 + trial);
    Eigen::MatrixXd x = random_ar1(n, m, rho, data_rng);
    RngStream construct_rng = make_rng(104, 1000 + trial);
    KnockoffModel model = construct_knockoffs(x, construct_rng);

    CHECK(model.residual_gram <= 1e-8);
    CHECK(model.residual_cross <= 1e-8);
    CHECK((model.s.array() >= 0.0).all());
    CHECK((model.s.array() <= 1.0).all());

    RngStream complement_rng = make_rng(104, 2000 + trial);
    Eigen::MatrixXd u = orthonormal_complement(model.design, m, complement_rng);
    CHECK((u.transpose() * u - Eigen::MatrixXd::Identity(m, m))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    CHECK((model.design.transpose() * u).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("construction preconditions") {
  RngStream rng = make_rng(105, 0);
  SUBCASE("n < 2m") {
    Eigen::MatrixXd x = random_gaussian(15, 10, rng);
    RngStream r = make_rng(105, 1);
    CHECK_THROWS_AS(construct_knockoffs(x, r), DimensionError);
  }
  SUBCASE("constant column") {
    Eigen::MatrixXd x = random_gaussian(20, 3, rng);
    x.col(1).setConstant(4.0);
    RngStream r = make_rng(105, 2);
    CHECK_THROWS_AS(construct_knockoffs(x, r), SingularGram);
  }
  SUBCASE("duplicated column makes the Gram singular") {
    Eigen::MatrixXd x = random_gaussian(20, 4, rng);
    x.col(3) = 2.0 * x.col(0);
    RngStream r = make_rng(105, 3);
    CHECK_THROWS_AS(construct_knockoffs(x, r), SingularGram);
  }
}

TEST_CASE("orthogonal columns: entry value is the largest grid point under |c_j|") {
  RngStream rng = make_rng(106, 0);
  Eigen::MatrixXd raw = random_gaussian(30, 6, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd a = qr.householderQ() * Eigen::MatrixXd::Identity(30, 6);

  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) y[i] = rng.next_normal();

  const Eigen::VectorXd c = a.transpose() * y;
  const double top = c.cwiseAbs().maxCoeff();
  Eigen::VectorXd grid = geometric_grid(top, 3.0, 120);

  const Eigen::VectorXd entries = lasso_path_entries(a, y, grid);
  for (Eigen::Index j = 0; j < 6; ++j) {
    double expected = 0.0;
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      if (grid[g] < std::abs(c[j])) {
        expected = grid[g];
        break;
      }
    }
    CHECK(entries[j] == expected);
  }
}

TEST_CASE("zero response yields all-zero entries and W") {
  RngStream rng = make_rng(107, 0);
  Eigen::MatrixXd x = random_gaussian(24, 6, rng);
  RngStream construct_rng = make_rng(107, 1);
  KnockoffModel model = construct_knockoffs(x, construct_rng);
  KnockoffStats stats = knockoff_stats(model, Eigen::VectorXd::Zero(24), 50);
  CHECK((stats.z.array() == 0.0).all());
  CHECK((stats.z_tilde.array() == 0.0).all());
  CHECK((stats.w.array() == 0.0).all());
}

TEST_CASE("warm-started path matches the cold-start oracle exactly") {
  RngStream rng = make_rng(108, 0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a = random_gaussian(20, 10, rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(10);
    beta[0] = 2.0;
    beta[3] = -1.5;
    Eigen::VectorXd y = a * beta;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.5 * rng.next_normal();

    const double top = (a.transpose() * y).cwiseAbs().maxCoeff();
    Eigen::VectorXd grid = geometric_grid(top, 3.0, 100);

    const Eigen::VectorXd fast = lasso_path_entries(a, y, grid);
    const Eigen::VectorXd oracle = lasso_entries_cold_oracle(a, y, grid);
    for (Eigen::Index j = 0; j < 10; ++j) CHECK(fast[j] == oracle[j]);
  }
}

TEST_CASE("path solver validates its inputs") {
  RngStream rng = make_rng(109, 0);
  Eigen::MatrixXd a = random_gaussian(12, 4, rng);
  Eigen::VectorXd y(12);
  for (Eigen::Index i = 0; i < 12; ++i) y[i] = rng.next_normal();
  const double top = (a.transpose() * y).cwiseAbs().maxCoeff();

  SUBCASE("non-finite response") {
    Eigen::VectorXd bad = y;
    bad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(lasso_path_entries(a, bad, geometric_grid(top, 2, 10)),
                    NonFiniteInput);
  }
  SUBCASE("ascending grid") {
    Eigen::VectorXd grid(3);
    grid << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(lasso_path_entries(a, y, grid), InputError);
  }
  SUBCASE("grid top below lambda_max") {
    CHECK_THROWS_AS(lasso_path_entries(a, y, geometric_grid(top * 0.5, 2, 10)),
                    InputError);
  }
}

TEST_CASE("swapping a column with its knockoff flips the sign of its W") {
  RngStream scenario_rng = make_rng(110, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index m = 6 + static_cast<Eigen::Index>(scenario_rng.next_below(6));
    const Eigen::Index n = 6 * m;

    RngStream data_rng = make_rng(110, 10 + trial);
    Eigen::MatrixXd x = random_ar1(n, m, 0.2, data_rng);
    RngStream construct_rng = make_rng(110, 100 + trial);
    KnockoffModel model = construct_knockoffs(x, construct_rng);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    beta[0] = 3.0;
    beta[2] = -2.0;
    Eigen::VectorXd y = model.design * beta;
    for (Eigen::Index i = 0; i < n; ++i) y[i] += data_rng.next_normal();

    KnockoffStats base = knockoff_stats(model, y, 80);

    const Eigen::Index swap_j =
        static_cast<Eigen::Index>(scenario_rng.next_below(m));
    KnockoffModel swapped = model;
    swapped.design.col(swap_j).swap(swapped.knockoffs.col(swap_j));
    KnockoffStats flipped = knockoff_stats(swapped, y, 80);

    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == swap_j) {
        CHECK(flipped.w[j] == -base.w[j]);
      } else {
        CHECK(std::abs(flipped.w[j]) == std::abs(base.w[j]));
      }
    }
  }
}

TEST_CASE("signal columns dominate the W statistics at simulation scale") {
  // n = 600, m = 200, m1 = 40, A = 3.5, rho = 0, mean W over true signals
  // positive and above the null mean, checked over seeded repetitions.
  int wins = 0;
  for (int rep = 0; rep < 10; ++rep) {
    RngStream data_rng = make_rng(111, rep);
    Eigen::MatrixXd x = random_gaussian(600, 200, data_rng);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x.col(j).array() -= x.col(j).mean();
      x.col(j) /= x.col(j).norm();
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(200);
    for (Eigen::Index j = 0; j < 40; ++j) {
      beta[j] = data_rng.next_coin() ? 3.5 : -3.5;
    }
    Eigen::VectorXd y = x * beta;
    for (Eigen::Index i = 0; i < 600; ++i) y[i] += data_rng.next_normal();

    RngStream construct_rng = make_rng(111, 100 + rep);
    KnockoffModel model = construct_knockoffs(x, construct_rng);
    KnockoffStats stats = knockoff_stats(model, y, 100);

    double signal_mean = 0.0, null_mean = 0.0;
    for (Eigen::Index j = 0; j < 200; ++j) {
      (j < 40 ? signal_mean : null_mean) += stats.w[j];
    }
    signal_mean /= 40.0;
    null_mean /= 160.0;
    if (signal_mean > 0.0 && signal_mean > null_mean) ++wins;
  }
  CHECK(wins == 10);
}

TEST_CASE("knockoff_select worked examples") {
  SUBCASE("one negative among five positives at q = 0.5") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(6);
    stats.w << 5, 4, 3, 2, 1, -1;
    const auto selected = knockoff_select(stats, 0.5);
    CHECK(selected == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
  SUBCASE("no threshold qualifies") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(4);
    stats.w << 3, 2, -2, 1;
    CHECK(knockoff_select(stats, 0.5).empty());
  }
  SUBCASE("all positive W selects everything once q >= 1/#positives") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(5);
    stats.w << 0.4, 1.2, 0.9, 2.2, 0.5;
    const auto selected = knockoff_select(stats, 0.25);
    CHECK(selected.size() == 5);
  }
}

TEST_CASE("knockoff_select agrees with the brute-force oracle") {
  RngStream rng = make_rng(20240602, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng.next_below(50);
    std::vector<double> w(m);
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      double value;
      const auto kind = rng.next_below(5);
      if (kind == 0) {
        value = 0.0;
      } else if (kind == 1) {
        value = static_cast<double>(rng.next_below(6)) - 3.0; // tied magnitudes
      } else {
        value = 6.0 * (rng.next_double() - 0.5);
      }
      w[j] = value;
      stats.w[static_cast<Eigen::Index>(j)] = value;
    }
    const double q = 0.02 + 0.96 * rng.next_double();
    CHECK(knockoff_select(stats, q) == testutil::knockoff_select_oracle(w, q));
  }
}

TEST_CASE("to_competition maps signs to labels and |w| to scores") {
  SUBCASE("positive w") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(1);
    stats.w << 2.5;
    RngStream rng = make_rng(0, 0);
    CompetitionResult result = to_competition(stats, rng);
    REQUIRE(result.size() == 1);
    CHECK(result.variables()[0].label == Label::Target);
    CHECK(result.variables()[0].final_score == 2.5);
  }
  SUBCASE("negative w") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(1);
    stats.w << -0.7;
    RngStream rng = make_rng(0, 0);
    CompetitionResult result = to_competition(stats, rng);
    REQUIRE(result.size() == 1);
    CHECK(result.variables()[0].label == Label::Decoy);
    CHECK(result.variables()[0].final_score == 0.7);
  }
  SUBCASE("zero w is flagged and randomly labelled") {
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(3);
    stats.w << 1.0, 0.0, -1.0;
    RngStream rng = make_rng(0, 0);
    CompetitionResult result = to_competition(stats, rng);
    CHECK(result.meta().at("zero_w") == "1");
    CHECK(result.variables()[1].final_score == 0.0);
  }
}

TEST_CASE("td_select after to_competition equals knockoff_select on tie-free W") {
  RngStream rng = make_rng(20240603, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng.next_below(50);
    KnockoffStats stats;
    stats.w = Eigen::VectorXd(static_cast<Eigen::Index>(m));
    std::set<double> magnitudes;
    for (std::size_t j = 0; j < m; ++j) {
      double magnitude;
      do {
        magnitude = rng.next_double() * 5.0 + 1e-9;
      } while (magnitudes.count(magnitude));
      magnitudes.insert(magnitude);
      stats.w[static_cast<Eigen::Index>(j)] =
          rng.next_coin() ? magnitude : -magnitude;
    }
    const double q = 0.02 + 0.96 * rng.next_double();

    RngStream label_rng = make_rng(1, trial);
    CompetitionResult mapped = to_competition(stats, label_rng);
    auto via_td = td_select(mapped, q);
    auto direct = knockoff_select(stats, q);
    std::sort(direct.begin(), direct.end());
    CHECK(via_td == direct);
  }
}
