#include "tdfdr/knockoff.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace tdfdr {

namespace {

constexpr double kLambdaMinFloor = 1e-10;
constexpr double kEigenClamp = 1e-12;
constexpr double kResidualCap = 1e-6;
constexpr double kCdTolerance = 1e-8;
constexpr std::size_t kCdSweepCap = 100'000;

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

} // namespace

Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& basis,
                                       Eigen::Index count, RngStream& rng) {
  const Eigen::Index n = basis.rows();
  const Eigen::Index m = basis.cols();
  if (n < m + count) {
    throw DimensionError("not enough rows for an orthonormal complement");
  }

  Eigen::MatrixXd stacked(n, m + count);
  stacked.leftCols(m) = basis;
  for (Eigen::Index j = 0; j < count; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      stacked(i, m + j) = rng.next_normal();
    }
  }

  // Householder QR without pivoting keeps the first m columns of Q spanning
  // the basis columns; the next `count` columns are the complement.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m + count);
  return q.rightCols(count);
}

KnockoffModel construct_knockoffs(const Eigen::MatrixXd& design_raw,
                                  RngStream& rng) {
  const Eigen::Index n = design_raw.rows();
  const Eigen::Index m = design_raw.cols();
  if (m < 1) throw EmptyInput("design has no columns");
  if (n < 2 * m) {
    throw DimensionError("knockoff construction needs n >= 2m, got n = " +
                         std::to_string(n) + ", m = " + std::to_string(m));
  }
  if (!design_raw.allFinite()) {
    throw NonFiniteInput("non-finite entry in design matrix");
  }

  KnockoffModel model;
  model.design = design_raw;
  for (Eigen::Index j = 0; j < m; ++j) {
    model.design.col(j).array() -= model.design.col(j).mean();
    const double norm = model.design.col(j).norm();
    if (!(norm > 0.0)) {
      throw SingularGram("column " + std::to_string(j) +
                         " is constant; its centered norm is zero");
    }
    model.design.col(j) /= norm;
  }

  model.gram = model.design.transpose() * model.design;
  model.gram = 0.5 * (model.gram + model.gram.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(model.gram);
  const double lambda_min = gram_eig.eigenvalues().minCoeff();
  if (lambda_min <= kLambdaMinFloor) {
    throw SingularGram("Gram matrix is numerically singular (lambda_min = " +
                       std::to_string(lambda_min) + ")");
  }

  const double s_value = std::min(2.0 * lambda_min, 1.0);
  model.s = Eigen::VectorXd::Constant(m, s_value);

  // Sigma^-1 diag(s)
  Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(model.gram);
  const Eigen::MatrixXd s_diag = model.s.asDiagonal();
  Eigen::MatrixXd gram_inv_s = gram_ldlt.solve(s_diag);

  // Cholesky target 2 diag(s) - diag(s) Sigma^-1 diag(s). The
  // equicorrelated s makes it exactly singular in the direction of the
  // smallest Gram eigenvector, so clamp tiny eigenvalues before
  // factorizing.
  Eigen::MatrixXd target = 2.0 * s_diag - s_diag * gram_inv_s;
  target = 0.5 * (target + target.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> target_eig(target);
  Eigen::VectorXd evals = target_eig.eigenvalues();
  const double clamp_to = kEigenClamp * std::max(evals.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (evals[i] < kEigenClamp) evals[i] = clamp_to;
  }
  Eigen::MatrixXd repaired = target_eig.eigenvectors() * evals.asDiagonal() *
                             target_eig.eigenvectors().transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(repaired);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(
        "Cholesky target not positive semidefinite after eigenvalue repair");
  }
  Eigen::MatrixXd c_factor = llt.matrixU(); // C with C'C = repaired

  Eigen::MatrixXd u_tilde = orthonormal_complement(model.design, m, rng);

  model.knockoffs = model.design * (Eigen::MatrixXd::Identity(m, m) - gram_inv_s) +
                    u_tilde * c_factor;

  Eigen::MatrixXd cross = model.design.transpose() * model.knockoffs;
  Eigen::MatrixXd cross_expected = model.gram;
  cross_expected.diagonal() -= model.s;
  model.residual_gram =
      max_abs(model.knockoffs.transpose() * model.knockoffs - model.gram);
  model.residual_cross = max_abs(cross - cross_expected);

  if (std::max(model.residual_gram, model.residual_cross) > kResidualCap) {
    std::ostringstream msg;
    msg << "knockoff construction identities violated: gram residual "
        << model.residual_gram << ", cross residual " << model.residual_cross;
    throw FactorizationError(msg.str());
  }
  return model;
}

Eigen::VectorXd lasso_path_entries(const Eigen::MatrixXd& design_aug,
                                   const Eigen::VectorXd& response,
                                   const Eigen::VectorXd& lambda_grid) {
  const Eigen::Index n = design_aug.rows();
  const Eigen::Index p = design_aug.cols();
  if (response.size() != n) {
    throw DimensionError("response length != design rows");
  }
  if (!design_aug.allFinite() || !response.allFinite() ||
      !lambda_grid.allFinite()) {
    throw NonFiniteInput("non-finite value in Lasso inputs");
  }
  if (lambda_grid.size() == 0) throw EmptyInput("empty lambda grid");
  for (Eigen::Index g = 1; g < lambda_grid.size(); ++g) {
    if (!(lambda_grid[g] < lambda_grid[g - 1])) {
      throw InputError("lambda grid must be strictly descending");
    }
  }
  if (!(lambda_grid[lambda_grid.size() - 1] > 0.0)) {
    throw InputError("lambda grid must be positive");
  }

  const double lambda_max = (design_aug.transpose() * response).cwiseAbs().maxCoeff();
  if (lambda_grid[0] < lambda_max * (1.0 - 1e-12)) {
    throw InputError("lambda grid top must be >= lambda_max of the problem");
  }

  const Eigen::VectorXd col_sq = design_aug.colwise().squaredNorm().transpose();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = response;
  Eigen::VectorXd entry = Eigen::VectorXd::Zero(p);

  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(p));

  auto update_coordinate = [&](Eigen::Index j, double lambda) -> double {
    if (col_sq[j] <= 0.0) return 0.0;
    const double old = beta[j];
    const double z = design_aug.col(j).dot(residual) + col_sq[j] * old;
    double next = 0.0;
    if (z > lambda) {
      next = (z - lambda) / col_sq[j];
    } else if (z < -lambda) {
      next = (z + lambda) / col_sq[j];
    }
    if (next != old) {
      residual.noalias() -= design_aug.col(j) * (next - old);
      beta[j] = next;
    }
    return std::abs(next - old);
  };

  for (Eigen::Index g = 0; g < lambda_grid.size(); ++g) {
    const double lambda = lambda_grid[g];
    std::size_t sweeps = 0;

    for (;;) {
      // Full pass: also discovers newly active coordinates.
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        max_change = std::max(max_change, update_coordinate(j, lambda));
      }
      if (++sweeps > kCdSweepCap) {
        throw NoConvergence("coordinate descent exceeded sweep cap at lambda " +
                            std::to_string(lambda));
      }
      if (max_change < kCdTolerance) break;

      // Inner passes over the current active set only.
      for (;;) {
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
          if (beta[j] != 0.0) active.push_back(j);
        }
        double inner_change = 0.0;
        for (Eigen::Index j : active) {
          inner_change = std::max(inner_change, update_coordinate(j, lambda));
        }
        if (++sweeps > kCdSweepCap) {
          throw NoConvergence(
              "coordinate descent exceeded sweep cap at lambda " +
              std::to_string(lambda));
        }
        if (inner_change < kCdTolerance) break;
      }
    }

    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0 && entry[j] == 0.0) entry[j] = lambda;
    }
  }
  return entry;
}

KnockoffStats knockoff_stats(const KnockoffModel& model,
                             const Eigen::VectorXd& response, int grid_size) {
  const Eigen::Index n = model.n_samples();
  const Eigen::Index m = model.n_variables();
  if (response.size() != n) {
    throw DimensionError("response length != number of samples");
  }
  if (grid_size < 2) throw InputError("grid size must be >= 2");

  Eigen::VectorXd y = response.array() - response.mean();

  Eigen::MatrixXd augmented(n, 2 * m);
  augmented.leftCols(m) = model.design;
  augmented.rightCols(m) = model.knockoffs;

  KnockoffStats stats;
  const double lambda_max = (augmented.transpose() * y).cwiseAbs().maxCoeff();
  if (!(lambda_max > 0.0)) {
    stats.z = Eigen::VectorXd::Zero(m);
    stats.z_tilde = Eigen::VectorXd::Zero(m);
    stats.w = Eigen::VectorXd::Zero(m);
    return stats;
  }

  // top nudged just above lambda_max so the argmax column cannot activate
  // at the first grid point from rounding jitter
  const double grid_top = lambda_max * (1.0 + 1e-9);
  Eigen::VectorXd grid(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    grid[i] = grid_top * std::pow(1e-3, static_cast<double>(i) /
                                            static_cast<double>(grid_size - 1));
  }

  const Eigen::VectorXd entries = lasso_path_entries(augmented, y, grid);
  stats.z = entries.head(m);
  stats.z_tilde = entries.tail(m);
  stats.w.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double z = stats.z[j];
    const double zt = stats.z_tilde[j];
    if (z > zt) {
      stats.w[j] = z;
    } else if (z < zt) {
      stats.w[j] = -zt;
    } else {
      stats.w[j] = 0.0;
    }
  }
  return stats;
}

std::vector<std::size_t> knockoff_select(const KnockoffStats& stats, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InputError("q must lie in (0, 1)");
  }
  const Eigen::Index m = stats.w.size();

  std::set<double> candidates;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (stats.w[j] != 0.0) candidates.insert(std::abs(stats.w[j]));
  }

  double threshold = 0.0;
  bool found = false;
  for (double t : candidates) { // ascending: first hit is the minimum
    std::size_t below = 0, above = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (stats.w[j] <= -t) ++below;
      if (stats.w[j] >= t) ++above;
    }
    const double ratio = static_cast<double>(below + 1) /
                         static_cast<double>(std::max<std::size_t>(above, 1));
    if (ratio <= q) {
      threshold = t;
      found = true;
      break;
    }
  }

  std::vector<std::size_t> selected;
  if (!found) return selected;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (stats.w[j] >= threshold) selected.push_back(static_cast<std::size_t>(j));
  }
  return selected;
}

CompetitionResult to_competition(const KnockoffStats& stats, RngStream& rng) {
  const Eigen::Index m = stats.w.size();
  std::vector<ScoredVariable> variables;
  variables.reserve(static_cast<std::size_t>(m));
  std::ostringstream zero_w;

  for (Eigen::Index j = 0; j < m; ++j) {
    const double w = stats.w[j];
    ScoredVariable v;
    v.index = static_cast<std::size_t>(j);
    if (w > 0.0) {
      v.label = Label::Target;
      v.final_score = w;
    } else if (w < 0.0) {
      v.label = Label::Decoy;
      v.final_score = -w;
    } else {
      v.label = rng.next_coin() ? Label::Target : Label::Decoy;
      v.final_score = 0.0;
      if (zero_w.tellp() > 0) zero_w << ',';
      zero_w << j;
    }
    variables.push_back(v);
  }

  std::map<std::string, std::string> meta{
      {"procedure", "knockoff"},
      {"seed", std::to_string(rng.seed())},
      {"stream", std::to_string(rng.stream())},
  };
  if (zero_w.tellp() > 0) meta["zero_w"] = zero_w.str();
  return CompetitionResult(std::move(variables), std::move(meta));
}

} // namespace tdfdr
