#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tdfdr/random.hpp"
#include "tdfdr/two_group.hpp"
#include "tdfdr/types.hpp"

namespace tdfdr {

enum class Scenario { Normal, Gamma, Regression };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario scenario);

//! Full description of one experiment. Two-group scenarios use
//! group_size/n_perm, the regression scenario uses n/rho/grid_size.
struct SimulationConfig {
  Scenario scenario = Scenario::Normal;
  std::size_t m = 2000;     //!< number of variables
  double pi0 = 0.8;         //!< true null proportion
  double effect = 3.0;      //!< a (normal), alpha (gamma), A (regression)
  std::size_t group_size = 5;
  std::size_t n = 0;        //!< regression sample count, needs n >= 2m
  double rho = 0.0;         //!< AR(1) correlation between adjacent columns
  std::size_t n_perm = 19;
  int grid_size = 200;
  std::size_t reps = 20;
  std::uint64_t seed = 0;
  std::vector<double> thresholds{0.05, 0.1, 0.2};
  //! Place the non-null coefficients on the first m1 columns instead of
  //! uniformly at random (regression only).
  bool signals_first = false;
  double epsilon = 1e-4;
  std::size_t l_max = 200;

  void validate() const;
};

//! Parses the JSON config format; schema violations name the offending
//! field.
SimulationConfig parse_config(const std::string& json_text);

//! Per-variable null indicator, known by construction.
struct GroundTruth {
  std::vector<bool> is_null;

  std::size_t n_nonnull() const {
    std::size_t c = 0;
    for (bool b : is_null) {
      if (!b) ++c;
    }
    return c;
  }
};

//! Normal: controls ~ N(0,1), case columns ~ N(effect,1) for non-nulls.
//! Gamma: controls ~ Ga(2,1), case columns ~ Ga(effect,1) for non-nulls.
//! The first round(m*(1-pi0)) columns are the non-nulls.
std::pair<TwoGroupData, GroundTruth> generate_two_group(
    const SimulationConfig& config, RngStream& rng);

//! Rows i.i.d. N(0, Theta) with Theta_ij = rho^|i-j| via the AR(1)
//! recursion, columns centered and unit-normalized, coefficients +-effect
//! on round(m*(1-pi0)) positions, y = X beta + standard normal noise.
std::tuple<Eigen::MatrixXd, Eigen::VectorXd, GroundTruth> generate_regression(
    const SimulationConfig& config, RngStream& rng);

//! |T0| / |T|: fraction of true nulls among the target-labelled variables.
double real_pi0t(const CompetitionResult& result, const GroundTruth& truth);

//! The "real" fdr of every target, from ground truth: null/non-null target
//! densities fitted by KDE on the known subsets (CV bandwidths) and the
//! passed true pi0t. Degenerate cases (no non-null or no null targets)
//! yield constant 1 or 0; otherwise both classes need >= 10 members.
std::map<std::size_t, double> oracle_fdr(const CompetitionResult& result,
                                         const GroundTruth& truth,
                                         double pi0t_true, RngStream rng);

struct ThresholdMetrics {
  double q = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  double fdp_competition = 0.0;   //!< td_select / knockoff_select baseline
  double power_competition = 0.0;
};

struct RepetitionMetrics {
  std::size_t rep = 0;
  double rmse = 0.0;
  double pi0_true = 0.0;
  double pi0_hat = 0.0;
  double pi0t_hat = 0.0;
  double pi0t_true = 0.0;
  bool power_defined = true;
  std::vector<ThresholdMetrics> per_threshold;
};

struct AggregateMetrics {
  double q = 0.0;
  double realized_fdr = 0.0;
  double mean_power = 0.0;
  double realized_fdr_competition = 0.0;
  double mean_power_competition = 0.0;
};

struct MetricsReport {
  std::vector<RepetitionMetrics> repetitions;
  double rmse_ave = 0.0;
  double mean_pi0_hat = 0.0;
  double mean_pi0t_hat = 0.0;
  std::vector<AggregateMetrics> per_threshold;
};

//! Runs `reps` independent repetitions (stream k for repetition k, parallel
//! across repetitions): generate data, run the competition procedure, fit
//! the fdr model, score it against the oracle fdr (RMSE), and evaluate
//! FDP/power at every threshold for both the fdr-based selection and the
//! competition procedure's own selection rule.
MetricsReport run_experiment(const SimulationConfig& config);

//! Writes metrics.csv (one row per repetition x threshold), summary.csv
//! (per-threshold aggregates), and pi0_scatter.csv into `directory`.
void write_metrics(const MetricsReport& report,
                   const std::filesystem::path& directory);

} // namespace tdfdr
