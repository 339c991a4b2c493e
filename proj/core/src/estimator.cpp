#include "tdfdr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tdfdr/parallel.hpp"

namespace tdfdr {

namespace {

constexpr double kRelativeGuard = 1e-12;
constexpr double kDensityUnderflow = 1e-300;

// Kernel matrices above this row count are recomputed per iteration
// instead of cached (the cache is O(|T|^2) doubles).
constexpr std::size_t kKernelCacheLimit = 8000;

std::vector<ScoredVariable> sorted_targets_desc(const CompetitionResult& result) {
  std::vector<ScoredVariable> targets = result.targets();
  std::sort(targets.begin(), targets.end(), [](const auto& a, const auto& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.index < b.index;
  });
  return targets;
}

} // namespace

double estimate_pi0t(const CompetitionResult& result) {
  if (result.n_target() == 0) {
    throw NoTargets("no target-labelled variables");
  }
  const double ratio = static_cast<double>(result.n_decoy()) /
                       static_cast<double>(result.n_target());
  return std::min(ratio, 1.0);
}

double estimate_pi0(const CompetitionResult& result) {
  if (result.size() == 0) throw EmptyInput("empty competition result");
  const double ratio = 2.0 * static_cast<double>(result.n_decoy()) /
                       static_cast<double>(result.size());
  return std::min(ratio, 1.0);
}

FdrFit fit_fdr(const CompetitionResult& result, double epsilon,
               std::size_t l_max, const RngStream& rng) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (l_max < 1) throw InputError("l_max must be >= 1");

  const auto targets = result.targets();
  const auto decoys = result.decoys();
  if (targets.size() < 10) {
    throw TooFewTargets("need >= 10 targets, got " +
                        std::to_string(targets.size()));
  }
  if (decoys.size() < 10) {
    throw TooFewDecoys("need >= 10 decoys, got " +
                       std::to_string(decoys.size()));
  }

  const std::size_t n_t = targets.size();
  Eigen::VectorXd target_scores(n_t);
  for (std::size_t j = 0; j < n_t; ++j) target_scores[j] = targets[j].final_score;
  Eigen::VectorXd decoy_scores(decoys.size());
  for (std::size_t j = 0; j < decoys.size(); ++j)
    decoy_scores[j] = decoys[j].final_score;

  FdrFit fit;
  fit.epsilon = epsilon;
  fit.l_max = l_max;
  fit.pi0t = estimate_pi0t(result);
  fit.pi0 = estimate_pi0(result);

  RngStream rng_h0 = rng.child(0);
  RngStream rng_h1 = rng.child(1);
  fit.h0 = select_bandwidth(decoy_scores, rng_h0);
  fit.null_density.emplace(decoy_scores, fit.h0);
  fit.h1 = select_bandwidth(target_scores, rng_h1);

  if (fit.pi0t >= 1.0) {
    // Everything among the targets is treated as null; nothing to iterate.
    for (const auto& t : targets) {
      fit.p[t.index] = 0.0;
      fit.fdr[t.index] = 1.0;
    }
    fit.converged = true;
    fit.iterations = 0;
    return fit;
  }

  const double pi0 = fit.pi0t;
  const double pi1 = 1.0 - fit.pi0t;

  Eigen::VectorXd f0_at(n_t);
  for (std::size_t j = 0; j < n_t; ++j) {
    f0_at[j] = (*fit.null_density)(target_scores[j]);
  }

  const double inv_h1 = 1.0 / fit.h1;
  const double kde_norm = inv_h1 / std::sqrt(2.0 * std::numbers::pi);

  const bool cache_kernel = n_t <= kKernelCacheLimit;
  Eigen::MatrixXd kernel;
  if (cache_kernel) {
    kernel.resize(static_cast<Eigen::Index>(n_t), static_cast<Eigen::Index>(n_t));
    parallel_for(n_t, [&](std::size_t j) {
      for (std::size_t i = 0; i < n_t; ++i) {
        const double u = (target_scores[i] - target_scores[j]) * inv_h1;
        kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::exp(-0.5 * u * u);
      }
    });
  }

  fit.min_p_seen = std::numeric_limits<double>::infinity();
  fit.max_p_seen = -std::numeric_limits<double>::infinity();
  std::atomic<std::size_t> underflows{0};

  Eigen::VectorXd p_prev(n_t);
  Eigen::VectorXd p_next(n_t);
  Eigen::VectorXd p_final_weights(n_t);

  auto iterate = [&](const Eigen::VectorXd& p_init) {
    p_prev = p_init;
    p_final_weights = p_init;
    fit.converged = false;

    for (std::size_t l = 1; l <= l_max; ++l) {
      const double weight_sum = p_prev.sum();

      parallel_for(n_t, [&](std::size_t j) {
        // f1 at target j from the previous posteriors as kernel weights
        double acc = 0.0;
        if (cache_kernel) {
          acc = kernel.col(static_cast<Eigen::Index>(j)).dot(p_prev);
        } else {
          for (std::size_t i = 0; i < n_t; ++i) {
            if (p_prev[i] == 0.0) continue;
            const double u = (target_scores[i] - target_scores[j]) * inv_h1;
            acc += p_prev[i] * std::exp(-0.5 * u * u);
          }
        }
        const double f1 = acc * kde_norm / weight_sum;

        const double null_part = pi0 * f0_at[j];
        const double alt_part = pi1 * f1;
        const double denom = null_part + alt_part;
        if (denom < kDensityUnderflow) {
          // Both components underflowed: resolve the ratio's limit in log
          // space through the weighted kernel sums.
          underflows.fetch_add(1, std::memory_order_relaxed);
          const double log_null =
              std::log(pi0) + fit.null_density->log_density(target_scores[j]);
          double log_alt = -std::numeric_limits<double>::infinity();
          double max_term = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < n_t; ++i) {
            if (p_prev[i] <= 0.0) continue;
            const double u = (target_scores[i] - target_scores[j]) * inv_h1;
            max_term = std::max(max_term, std::log(p_prev[i]) - 0.5 * u * u);
          }
          if (std::isfinite(max_term)) {
            double lse = 0.0;
            for (std::size_t i = 0; i < n_t; ++i) {
              if (p_prev[i] <= 0.0) continue;
              const double u = (target_scores[i] - target_scores[j]) * inv_h1;
              lse += std::exp(std::log(p_prev[i]) - 0.5 * u * u - max_term);
            }
            log_alt = std::log(pi1) + max_term + std::log(lse) +
                      std::log(kde_norm / weight_sum);
          }
          p_next[j] = (log_alt > log_null) ? 1.0 : 0.0;
        } else {
          p_next[j] = alt_part / denom;
        }
      });

      double max_change = 0.0;
      for (std::size_t j = 0; j < n_t; ++j) {
        const double delta = std::abs(p_next[j] - p_prev[j]);
        const double change =
            (p_prev[j] < kRelativeGuard) ? delta : delta / p_prev[j];
        max_change = std::max(max_change, change);
      }

      fit.min_p_seen = std::min(fit.min_p_seen, p_next.minCoeff());
      fit.max_p_seen = std::max(fit.max_p_seen, p_next.maxCoeff());
      fit.iterations = l;
      fit.final_max_change = max_change;

      p_final_weights = p_prev; // weights that produced the current iterate
      p_prev = p_next;

      if (max_change < epsilon) {
        fit.converged = true;
        break;
      }
    }
  };

  // Initiation: p = 1 on every maximizer of the target score, 0 elsewhere.
  const double top_score = target_scores.maxCoeff();
  Eigen::VectorXd p_init = Eigen::VectorXd::Zero(n_t);
  double n_top = 0.0;
  for (std::size_t j = 0; j < n_t; ++j) {
    if (target_scores[j] == top_score) {
      p_init[j] = 1.0;
      n_top += 1.0;
    }
  }
  iterate(p_init);

  // When the maximum sits many bandwidths away from the next target score,
  // the iteration can settle on the degenerate fixed point that keeps all
  // mass at the initiation while the label counts demand pi1t * |T| of
  // non-null mass. Reseed once from the flat initiation p = pi1t.
  const double expected_mass = pi1 * static_cast<double>(n_t);
  if (fit.converged && expected_mass >= 10.0 &&
      p_prev.sum() <= std::max(0.1 * expected_mass, 2.0 * n_top)) {
    fit.restarted = true;
    iterate(Eigen::VectorXd::Constant(n_t, pi1));
  }

  fit.underflow_events = underflows.load();
  for (std::size_t j = 0; j < n_t; ++j) {
    fit.p[targets[j].index] = p_prev[j];
    fit.fdr[targets[j].index] = 1.0 - p_prev[j];
  }
  if (p_final_weights.sum() > 0.0) {
    fit.alt_density.emplace(target_scores, p_final_weights, fit.h1);
  }
  return fit;
}

std::map<double, double, std::greater<double>> fdr_to_FDR(
    const FdrFit& fit, const CompetitionResult& result) {
  const auto targets = sorted_targets_desc(result);
  std::map<double, double, std::greater<double>> step;
  if (targets.empty()) return step;

  double running_sum = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto it = fit.fdr.find(targets[k].index);
    if (it == fit.fdr.end()) {
      throw InputError("fit does not cover target index " +
                       std::to_string(targets[k].index));
    }
    running_sum += it->second;
    const bool group_end = (k + 1 == targets.size()) ||
                           (targets[k + 1].final_score != targets[k].final_score);
    if (group_end) {
      step[targets[k].final_score] = running_sum / static_cast<double>(k + 1);
    }
  }
  return step;
}

std::vector<std::size_t> select_at(const FdrFit& fit,
                                   const CompetitionResult& result, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InputError("q must lie in (0, 1)");
  const auto targets = sorted_targets_desc(result);

  double running_sum = 0.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto it = fit.fdr.find(targets[k].index);
    if (it == fit.fdr.end()) {
      throw InputError("fit does not cover target index " +
                       std::to_string(targets[k].index));
    }
    running_sum += it->second;
    if (running_sum / static_cast<double>(k + 1) <= q) best_k = k + 1;
  }

  std::vector<std::size_t> selected;
  selected.reserve(best_k);
  for (std::size_t k = 0; k < best_k; ++k) selected.push_back(targets[k].index);
  std::sort(selected.begin(), selected.end());
  return selected;
}

} // namespace tdfdr
