#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "tdfdr/random.hpp"
#include "tdfdr/types.hpp"

namespace tdfdr {

//! Fixed-X knockoff model for a design with n >= 2m. The stored design has
//! centered, unit-norm columns; the knockoff matrix satisfies
//!   Xt' Xt = Sigma          (same Gram matrix)
//!   X'  Xt = Sigma - diag(s)
//! with both residuals recorded as max-abs violations.
struct KnockoffModel {
  Eigen::MatrixXd design;    // X, centered and normalized
  Eigen::MatrixXd gram;      // Sigma = X'X
  Eigen::VectorXd s;         // equicorrelated: min(2*lambda_min(Sigma), 1)
  Eigen::MatrixXd knockoffs; // Xt
  double residual_gram = 0.0;  // ||Xt'Xt - Sigma||_max
  double residual_cross = 0.0; // ||X'Xt - (Sigma - diag s)||_max

  Eigen::Index n_samples() const { return design.rows(); }
  Eigen::Index n_variables() const { return design.cols(); }
};

//! Lasso-entry statistics on the augmented design [X Xt]: z_j (z_tilde_j)
//! is the largest penalty at which variable j (its knockoff) carries a
//! nonzero coefficient, and w_j = max(z_j, zt_j) * sign(z_j - zt_j).
struct KnockoffStats {
  Eigen::VectorXd z;
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd w;
};

//! Orthonormal basis of a `count`-dimensional subspace orthogonal to the
//! column span of `basis`, built by QR of [basis | G] with G standard
//! normal. Requires basis.rows() >= basis.cols() + count and full column
//! rank of basis.
Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& basis,
                                       Eigen::Index count, RngStream& rng);

//! Builds the knockoff matrix: center and normalize columns, take the
//! equicorrelated s = min(2*lambda_min, 1), complete an orthonormal Ut,
//! factorize 2*diag(s) - diag(s) Sigma^-1 diag(s) (eigen-clamping tiny
//! negative values caused by the marginally singular equicorrelated
//! choice), and assemble Xt = X (I - Sigma^-1 diag(s)) + Ut C.
//! Throws DimensionError (n < 2m), SingularGram (lambda_min <= 1e-10 or a
//! constant column), FactorizationError (residuals above 1e-6).
KnockoffModel construct_knockoffs(const Eigen::MatrixXd& design_raw,
                                  RngStream& rng);

//! For each column of `design_aug`, the largest grid penalty at which its
//! Lasso coefficient is nonzero (0 if it never activates). The objective is
//! 0.5*||y - A b||^2 + lambda*||b||_1, solved by cyclic coordinate descent
//! warm-started along the descending grid; convergence when the largest
//! coefficient change in a sweep is < 1e-8, cap 1e5 sweeps per grid point.
Eigen::VectorXd lasso_path_entries(const Eigen::MatrixXd& design_aug,
                                   const Eigen::VectorXd& response,
                                   const Eigen::VectorXd& lambda_grid);

//! Runs the Lasso path on [X Xt] over a geometric grid of `grid_size`
//! points from lambda_max down to lambda_max/1000 (response centered
//! first) and assembles the signed-max W statistics.
KnockoffStats knockoff_stats(const KnockoffModel& model,
                             const Eigen::VectorXd& response,
                             int grid_size = 200);

//! Knockoff filter selection at FDR level q: the threshold is the smallest
//! t among the nonzero |w| with (#{w <= -t} + 1)/(#{w >= t} v 1) <= q;
//! returns {j : w_j >= t}, empty when no t qualifies.
std::vector<std::size_t> knockoff_select(const KnockoffStats& stats, double q);

//! Maps W statistics onto the target-decoy interface: sign gives the label,
//! |w| the final score. Zero w gets a fair-coin label, score 0, and is
//! listed in meta["zero_w"].
CompetitionResult to_competition(const KnockoffStats& stats, RngStream& rng);

} // namespace tdfdr
