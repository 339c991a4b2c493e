#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "tdfdr/random.hpp"
#include "tdfdr/types.hpp"

namespace tdfdr {

//! Case-control matrix: rows are samples (controls first), columns are
//! variables.
struct TwoGroupData {
  TwoGroupData(Eigen::MatrixXd matrix_in, Eigen::Index n_control_in);

  Eigen::MatrixXd matrix;
  Eigen::Index n_control = 0;
  Eigen::Index n_case = 0;

  Eigen::Index n_samples() const { return matrix.rows(); }
  Eigen::Index n_variables() const { return matrix.cols(); }
};

//! Pooled-variance two-sample t statistic, signed so that positive means
//! the case group sits above the control group. Throws DegenerateVariance
//! when both groups have zero sample variance.
double t_score(std::span<const double> control, std::span<const double> cases);

//! Rank bookkeeping for one variable: the original score, its N permutation
//! scores, and the original's descending rank among all N+1 (ties resolved
//! by a uniformly random offset within the tied block).
struct PermutationScores {
  double original = 0.0;
  std::vector<double> permuted;
  std::size_t rank = 0; // 1-based, 1 = largest
};

//! Computes the descending rank of `original` among {original} U permuted.
PermutationScores rank_original(double original, std::vector<double> permuted,
                                RngStream& rng);

//! Applies the median labelling rule and the symmetric-rank final score:
//! targets keep the original score, decoys take the (N+2-R)-th largest of
//! the N+1 sorted scores. A rank exactly at (N+2)/2 gets a fair coin label.
ScoredVariable label_and_score(std::size_t index, const PermutationScores& ps,
                               RngStream& rng);

struct CompeteOptions {
  std::size_t n_perm = 19;
  //! Score with |t| instead of the signed statistic (two-sided use).
  bool two_sided = false;
  //! Stable per-variable ids used to key the per-variable RNG streams;
  //! empty means 0..m-1. Permuting columns while carrying their ids along
  //! permutes the output correspondingly.
  std::vector<std::size_t> variable_ids;
};

//! Target-decoy permutation competition: for each variable, score the
//! original column, score N uniformly random permutations of its rows,
//! rank, label, and assign the final score. Variables whose every score is
//! degenerate are excluded and listed in meta["excluded"].
//! Parallel over variables; output is independent of thread count.
CompetitionResult compete(const TwoGroupData& data, const CompeteOptions& options,
                          const RngStream& rng);

//! Target-decoy selection at FDR level q: sort by final score descending
//! (ties broken by index), find the largest k whose decoy/target ratio
//! (#D + 1)/(#T v 1) stays within q, and return the target indices in that
//! prefix. Empty when no k qualifies.
std::vector<std::size_t> td_select(const CompetitionResult& result, double q);

} // namespace tdfdr
