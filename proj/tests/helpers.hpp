#pragma once

// Test-only utilities: independent brute-force oracles for the selection
// thresholds, a two-sample Kolmogorov-Smirnov test, and quadrature. These
// deliberately re-derive everything from the defining formulas rather than
// calling the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "tdfdr/random.hpp"
#include "tdfdr/types.hpp"

namespace testutil {

// Enumerates every k and evaluates the decoy/target ratio from scratch:
//   K = max{k : (#{j<=k: D} + 1) / (#{j<=k: T} v 1) <= q}, select targets
// in the top K. Ordering: score descending, index ascending.
inline std::vector<std::size_t> td_select_oracle(
    std::vector<tdfdr::ScoredVariable> variables, double q) {
  std::sort(variables.begin(), variables.end(),
            [](const auto& a, const auto& b) {
              if (a.final_score != b.final_score)
                return a.final_score > b.final_score;
              return a.index < b.index;
            });
  std::size_t k_best = 0;
  for (std::size_t k = 1; k <= variables.size(); ++k) {
    std::size_t n_decoy = 0, n_target = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (variables[j].label == tdfdr::Label::Decoy) {
        ++n_decoy;
      } else {
        ++n_target;
      }
    }
    const double ratio =
        static_cast<double>(n_decoy + 1) /
        static_cast<double>(n_target == 0 ? 1 : n_target);
    if (ratio <= q) k_best = k;
  }
  std::vector<std::size_t> selected;
  for (std::size_t j = 0; j < k_best; ++j) {
    if (variables[j].label == tdfdr::Label::Target)
      selected.push_back(variables[j].index);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

// Scans every candidate threshold t in {|w_j| : w_j != 0} and takes the
// minimum satisfying (#{w <= -t} + 1)/(#{w >= t} v 1) <= q; selects w >= t.
inline std::vector<std::size_t> knockoff_select_oracle(
    const std::vector<double>& w, double q) {
  std::vector<double> candidates;
  for (double v : w) {
    if (v != 0.0) candidates.push_back(std::abs(v));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  bool found = false;
  double threshold = 0.0;
  for (double t : candidates) {
    std::size_t below = 0, above = 0;
    for (double v : w) {
      if (v <= -t) ++below;
      if (v >= t) ++above;
    }
    const double ratio = static_cast<double>(below + 1) /
                         static_cast<double>(above == 0 ? 1 : above);
    if (ratio <= q && (!found || t < threshold)) {
      threshold = t;
      found = true;
    }
  }

  std::vector<std::size_t> selected;
  if (!found) return selected;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] >= threshold) selected.push_back(j);
  }
  return selected;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

// true when the KS test rejects equality of distributions at level alpha.
inline bool ks_rejects(const std::vector<double>& a,
                       const std::vector<double>& b, double alpha) {
  const double d = ks_statistic(a, b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return d > c * std::sqrt((na + nb) / (na * nb));
}

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int panels) {
  // panels must be even
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) {
    sum += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  }
  return sum * h / 3.0;
}

// Random label/score sequence for threshold-oracle checks.
inline std::vector<tdfdr::ScoredVariable> random_competition(
    tdfdr::RngStream& rng, std::size_t max_length, bool allow_ties = true) {
  const std::size_t length = 1 + rng.next_below(max_length);
  std::vector<tdfdr::ScoredVariable> variables(length);
  for (std::size_t j = 0; j < length; ++j) {
    variables[j].index = j;
    variables[j].label =
        rng.next_coin() ? tdfdr::Label::Target : tdfdr::Label::Decoy;
    if (allow_ties && rng.next_below(4) == 0) {
      // coarse grid scores produce frequent ties
      variables[j].final_score = static_cast<double>(rng.next_below(8));
    } else {
      variables[j].final_score = 10.0 * rng.next_double();
    }
  }
  return variables;
}

} // namespace testutil
