#pragma once

#include <Eigen/Core>
#include <optional>

#include "tdfdr/errors.hpp"
#include "tdfdr/random.hpp"

namespace tdfdr {

//! Gaussian kernel density estimate, optionally weighted:
//!   f(x) = sum_j w_j * phi((x - x_j)/h) / (h * sum_j w_j).
//! Immutable and safe to share across threads.
class KdeModel {
public:
  //! Unweighted fit (w_j = 1).
  KdeModel(Eigen::VectorXd points, double bandwidth);
  //! Weighted fit; weights must be nonnegative with positive sum.
  KdeModel(Eigen::VectorXd points, Eigen::VectorXd weights, double bandwidth);

  double operator()(double x) const { return density(x); }
  double density(double x) const;
  //! log f(x) via log-sum-exp; usable far in the tails where density()
  //! underflows to zero.
  double log_density(double x) const;

  double bandwidth() const { return bandwidth_; }
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

private:
  void validate() const;

  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
  double bandwidth_;
  double weight_sum_;
};

inline KdeModel kde_fit(Eigen::VectorXd points, double bandwidth) {
  return KdeModel(std::move(points), bandwidth);
}

inline KdeModel kde_fit(Eigen::VectorXd points, Eigen::VectorXd weights,
                        double bandwidth) {
  return KdeModel(std::move(points), std::move(weights), bandwidth);
}

//! Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
double silverman_bandwidth(const Eigen::VectorXd& points);

//! Least-squares (unbiased) leave-one-out cross-validation over a 30-point
//! geometric grid spanning [h_S/8, 8*h_S] around Silverman's rule h_S.
//! Returns h_S when the CV curve bottoms out at a grid boundary, and the
//! floor 1e-6 when the data have zero spread. Needs >= 10 points.
//! The rng is consumed only by the pair-subsampling path used above
//! 20000 points.
double select_bandwidth(const Eigen::VectorXd& points, RngStream rng);

} // namespace tdfdr
