#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "tdfdr/density.hpp"
#include "tdfdr/random.hpp"
#include "tdfdr/types.hpp"

namespace tdfdr {

//! Fitted local-fdr model for the target variables of a competition
//! result. fdr[j] == 1 - p[j] exactly for every target index j.
struct FdrFit {
  double pi0t = 1.0; //!< null proportion among targets, |D|/|T| clamped to 1
  double pi0 = 1.0;  //!< overall null proportion, 2|D|/m clamped to 1

  std::optional<KdeModel> null_density; //!< decoy-score KDE (bandwidth h0)
  std::optional<KdeModel> alt_density;  //!< final non-null iterate (bandwidth h1)
  double h0 = 0.0;
  double h1 = 0.0;

  std::map<std::size_t, double> p;   //!< posterior non-null probability
  std::map<std::size_t, double> fdr; //!< 1 - p

  std::size_t iterations = 0;
  bool converged = false;
  double epsilon = 0.0;
  std::size_t l_max = 0;

  //! Stopping-rule value at the final iterate (max guarded relative change).
  double final_max_change = 0.0;
  //! The single-point initiation can converge onto a degenerate fixed point
  //! (all mass stuck at the top score) when the maximum is isolated by many
  //! bandwidths; the fit is then rerun once from the flat initiation
  //! p = 1 - pi0t and this flag records that it happened.
  bool restarted = false;
  //! Extremes of p over every iterate, for invariant checks.
  double min_p_seen = 0.0;
  double max_p_seen = 0.0;
  //! Number of scores where both mixture components underflowed and the
  //! posterior was resolved by log-domain comparison.
  std::size_t underflow_events = 0;
};

//! |D| / |T|, clamped to 1. Throws NoTargets when |T| = 0.
double estimate_pi0t(const CompetitionResult& result);

//! 2|D| / m, clamped to 1.
double estimate_pi0(const CompetitionResult& result);

//! Fits the target-fdr model: pi0t from the label counts, the null density
//! from decoy scores (CV bandwidth), then the kerfdr-style fixed-point
//! iteration of the non-null density and the posteriors p_j, stopping when
//! the largest relative change drops below epsilon or after l_max rounds.
//! Needs >= 10 targets and >= 10 decoys. When pi0t clamps to 1 the
//! iteration is skipped and every target gets fdr 1.
FdrFit fit_fdr(const CompetitionResult& result, double epsilon,
               std::size_t l_max, const RngStream& rng);

//! FDR as a step function of the score threshold t (descending keys):
//! FDR(t) = mean of fdr over targets with score >= t.
std::map<double, double, std::greater<double>> fdr_to_FDR(
    const FdrFit& fit, const CompetitionResult& result);

//! Largest prefix of targets in descending score order whose running mean
//! of fdr stays within q; returns the prefix's indices sorted ascending.
std::vector<std::size_t> select_at(const FdrFit& fit,
                                   const CompetitionResult& result, double q);

} // namespace tdfdr
