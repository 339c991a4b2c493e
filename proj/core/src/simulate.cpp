#include "tdfdr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>

#include <json.hpp>

#include "tdfdr/csv.hpp"
#include "tdfdr/estimator.hpp"
#include "tdfdr/knockoff.hpp"
#include "tdfdr/parallel.hpp"

namespace tdfdr {

Scenario scenario_from_string(const std::string& name) {
  if (name == "normal") return Scenario::Normal;
  if (name == "gamma") return Scenario::Gamma;
  if (name == "regression") return Scenario::Regression;
  throw BadScenario("unknown scenario '" + name +
                    "', expected normal, gamma, or regression");
}

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Normal: return "normal";
    case Scenario::Gamma: return "gamma";
    case Scenario::Regression: return "regression";
  }
  return "?";
}

void SimulationConfig::validate() const {
  if (m < 1) throw InputError("config field 'm' must be >= 1");
  if (!(pi0 > 0.0 && pi0 <= 1.0)) {
    throw InputError("config field 'pi0' must lie in (0, 1]");
  }
  if (reps < 1) throw InputError("config field 'reps' must be >= 1");
  if (!(epsilon > 0.0)) throw InputError("config field 'epsilon' must be > 0");
  if (l_max < 1) throw InputError("config field 'l_max' must be >= 1");
  for (double q : thresholds) {
    if (!(q > 0.0 && q < 1.0)) {
      throw InputError("config field 'thresholds' entries must lie in (0, 1)");
    }
  }
  if (scenario == Scenario::Regression) {
    if (n < 2 * m) {
      throw DimensionError("config field 'n' must be >= 2m for regression");
    }
    if (!(rho >= 0.0 && rho < 1.0)) {
      throw InputError("config field 'rho' must lie in [0, 1)");
    }
    if (grid_size < 2) {
      throw InputError("config field 'grid_size' must be >= 2");
    }
  } else {
    if (group_size < 2) {
      throw InputError("config field 'group_size' must be >= 2");
    }
    if (n_perm < 1) throw InputError("config field 'n_perm' must be >= 1");
    if (scenario == Scenario::Gamma && !(effect > 0.0)) {
      throw InputError("config field 'effect' must be > 0 for gamma data");
    }
  }
}

SimulationConfig parse_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("config must be a JSON object");

  static const std::set<std::string> known{
      "scenario", "m",     "pi0",        "effect",   "group_size",
      "n",        "rho",   "n_perm",     "grid_size", "reps",
      "seed",     "thresholds", "signals_first", "epsilon", "l_max"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) {
      throw InputError("unknown config field '" + key + "'");
    }
  }

  SimulationConfig config;
  auto require = [&](const char* field) -> const nlohmann::json& {
    if (!doc.contains(field)) {
      throw InputError(std::string("missing config field '") + field + "'");
    }
    return doc.at(field);
  };
  auto get_count = [&](const char* field, const nlohmann::json& v) -> std::size_t {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      return v.get<std::size_t>();
    }
    throw InputError(std::string("config field '") + field +
                     "' must be a nonnegative integer");
  };
  auto get_real = [&](const char* field, const nlohmann::json& v) -> double {
    if (!v.is_number()) {
      throw InputError(std::string("config field '") + field +
                       "' must be a number");
    }
    return v.get<double>();
  };

  const auto& scenario_field = require("scenario");
  if (!scenario_field.is_string()) {
    throw InputError("config field 'scenario' must be a string");
  }
  config.scenario = scenario_from_string(scenario_field.get<std::string>());
  config.m = get_count("m", require("m"));
  config.pi0 = get_real("pi0", require("pi0"));
  config.effect = get_real("effect", require("effect"));
  config.reps = get_count("reps", require("reps"));
  config.seed = get_count("seed", require("seed"));

  const auto& thresholds = require("thresholds");
  if (!thresholds.is_array() || thresholds.empty()) {
    throw InputError("config field 'thresholds' must be a nonempty array");
  }
  config.thresholds.clear();
  for (const auto& t : thresholds) {
    config.thresholds.push_back(get_real("thresholds", t));
  }

  if (doc.contains("group_size")) {
    config.group_size = get_count("group_size", doc.at("group_size"));
  }
  if (doc.contains("n")) config.n = get_count("n", doc.at("n"));
  if (doc.contains("rho")) config.rho = get_real("rho", doc.at("rho"));
  if (doc.contains("n_perm")) config.n_perm = get_count("n_perm", doc.at("n_perm"));
  if (doc.contains("grid_size")) {
    config.grid_size = static_cast<int>(get_count("grid_size", doc.at("grid_size")));
  }
  if (doc.contains("signals_first")) {
    if (!doc.at("signals_first").is_boolean()) {
      throw InputError("config field 'signals_first' must be a boolean");
    }
    config.signals_first = doc.at("signals_first").get<bool>();
  }
  if (doc.contains("epsilon")) config.epsilon = get_real("epsilon", doc.at("epsilon"));
  if (doc.contains("l_max")) config.l_max = get_count("l_max", doc.at("l_max"));

  config.validate();
  return config;
}

namespace {

std::size_t nonnull_count(std::size_t m, double pi0) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(m) * (1.0 - pi0)));
}

} // namespace

std::pair<TwoGroupData, GroundTruth> generate_two_group(
    const SimulationConfig& config, RngStream& rng) {
  if (config.scenario != Scenario::Normal && config.scenario != Scenario::Gamma) {
    throw BadScenario("generate_two_group needs a normal or gamma scenario");
  }

  const std::size_t g = config.group_size;
  const std::size_t m = config.m;
  const std::size_t m1 = nonnull_count(m, config.pi0);
  const bool gamma = config.scenario == Scenario::Gamma;

  Eigen::MatrixXd data(static_cast<Eigen::Index>(2 * g),
                       static_cast<Eigen::Index>(m));
  GroundTruth truth;
  truth.is_null.assign(m, true);

  for (std::size_t j = 0; j < m; ++j) {
    const bool is_nonnull = j < m1;
    if (is_nonnull) truth.is_null[j] = false;
    for (std::size_t i = 0; i < g; ++i) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gamma ? rng.next_gamma(2.0) : rng.next_normal();
    }
    for (std::size_t i = 0; i < g; ++i) {
      double value;
      if (gamma) {
        value = rng.next_gamma(is_nonnull ? config.effect : 2.0);
      } else {
        value = rng.next_normal() + (is_nonnull ? config.effect : 0.0);
      }
      data(static_cast<Eigen::Index>(g + i), static_cast<Eigen::Index>(j)) = value;
    }
  }

  return {TwoGroupData(std::move(data), static_cast<Eigen::Index>(g)),
          std::move(truth)};
}

std::tuple<Eigen::MatrixXd, Eigen::VectorXd, GroundTruth> generate_regression(
    const SimulationConfig& config, RngStream& rng) {
  if (config.scenario != Scenario::Regression) {
    throw BadScenario("generate_regression needs the regression scenario");
  }
  const std::size_t n = config.n;
  const std::size_t m = config.m;
  if (n < 2 * m) {
    throw DimensionError("regression needs n >= 2m");
  }

  const double rho = config.rho;
  const double innovation = std::sqrt(1.0 - rho * rho);

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    double prev = rng.next_normal();
    design(static_cast<Eigen::Index>(i), 0) = prev;
    for (std::size_t j = 1; j < m; ++j) {
      prev = rho * prev + innovation * rng.next_normal();
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = prev;
    }
  }

  Eigen::MatrixXd normalized = design;
  for (Eigen::Index j = 0; j < normalized.cols(); ++j) {
    normalized.col(j).array() -= normalized.col(j).mean();
    const double norm = normalized.col(j).norm();
    if (norm > 0.0) normalized.col(j) /= norm;
  }

  const std::size_t m1 = nonnull_count(m, config.pi0);
  GroundTruth truth;
  truth.is_null.assign(m, true);

  std::vector<std::size_t> positions(m);
  std::iota(positions.begin(), positions.end(), 0);
  if (!config.signals_first) {
    rng.shuffle(std::span<std::size_t>(positions));
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k < m1; ++k) {
    const std::size_t j = positions[k];
    truth.is_null[j] = false;
    beta[static_cast<Eigen::Index>(j)] =
        rng.next_coin() ? config.effect : -config.effect;
  }

  Eigen::VectorXd response = normalized * beta;
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    response[i] += rng.next_normal();
  }

  return {std::move(normalized), std::move(response), std::move(truth)};
}

double real_pi0t(const CompetitionResult& result, const GroundTruth& truth) {
  std::size_t n_target = 0, n_null_target = 0;
  for (const auto& v : result.variables()) {
    if (v.label != Label::Target) continue;
    ++n_target;
    if (v.index >= truth.is_null.size()) {
      throw DimensionError("competition index outside ground truth");
    }
    if (truth.is_null[v.index]) ++n_null_target;
  }
  if (n_target == 0) throw NoTargets("no target-labelled variables");
  return static_cast<double>(n_null_target) / static_cast<double>(n_target);
}

std::map<std::size_t, double> oracle_fdr(const CompetitionResult& result,
                                         const GroundTruth& truth,
                                         double pi0t_true, RngStream rng) {
  std::vector<double> null_scores, nonnull_scores;
  std::vector<std::size_t> target_indices;
  std::vector<double> target_scores;
  for (const auto& v : result.variables()) {
    if (v.label != Label::Target) continue;
    if (v.index >= truth.is_null.size()) {
      throw DimensionError("competition index outside ground truth");
    }
    target_indices.push_back(v.index);
    target_scores.push_back(v.final_score);
    if (truth.is_null[v.index]) {
      null_scores.push_back(v.final_score);
    } else {
      nonnull_scores.push_back(v.final_score);
    }
  }
  if (target_indices.empty()) throw NoTargets("no target-labelled variables");

  std::map<std::size_t, double> fdr;
  if (nonnull_scores.empty() || pi0t_true >= 1.0) {
    for (std::size_t idx : target_indices) fdr[idx] = 1.0;
    return fdr;
  }
  if (null_scores.empty() || pi0t_true <= 0.0) {
    for (std::size_t idx : target_indices) fdr[idx] = 0.0;
    return fdr;
  }
  if (null_scores.size() < 10 || nonnull_scores.size() < 10) {
    throw TooFewInClass("oracle fdr needs >= 10 null and >= 10 non-null "
                        "targets, got " +
                        std::to_string(null_scores.size()) + " / " +
                        std::to_string(nonnull_scores.size()));
  }

  Eigen::Map<const Eigen::VectorXd> nulls(null_scores.data(),
                                          static_cast<Eigen::Index>(null_scores.size()));
  Eigen::Map<const Eigen::VectorXd> nonnulls(
      nonnull_scores.data(), static_cast<Eigen::Index>(nonnull_scores.size()));

  RngStream rng_h0 = rng.child(0);
  RngStream rng_h1 = rng.child(1);
  const double h0 = select_bandwidth(nulls, rng_h0);
  const double h1 = select_bandwidth(nonnulls, rng_h1);
  const KdeModel f0(nulls, h0);
  const KdeModel f1(nonnulls, h1);

  const double log_pi0 = std::log(pi0t_true);
  const double log_pi1 = std::log(1.0 - pi0t_true);
  for (std::size_t k = 0; k < target_indices.size(); ++k) {
    const double s = target_scores[k];
    // fdr = 1 / (1 + exp(log(pi1 f1) - log(pi0 f0))), stable in both tails
    const double log_null = log_pi0 + f0.log_density(s);
    const double log_alt = log_pi1 + f1.log_density(s);
    double value;
    if (!std::isfinite(log_null) && !std::isfinite(log_alt)) {
      value = pi0t_true; // no kernel mass at all; fall back to the prior
    } else {
      value = 1.0 / (1.0 + std::exp(log_alt - log_null));
    }
    fdr[target_indices[k]] = value;
  }
  return fdr;
}

namespace {

struct SelectionScore {
  double fdp = 0.0;
  double power = 0.0;
};

SelectionScore score_selection(const std::vector<std::size_t>& selected,
                               const GroundTruth& truth) {
  std::size_t false_count = 0, true_count = 0;
  for (std::size_t idx : selected) {
    if (truth.is_null[idx]) {
      ++false_count;
    } else {
      ++true_count;
    }
  }
  SelectionScore score;
  score.fdp = static_cast<double>(false_count) /
              static_cast<double>(std::max<std::size_t>(selected.size(), 1));
  const std::size_t nonnull = truth.n_nonnull();
  score.power = nonnull == 0 ? 0.0
                             : static_cast<double>(true_count) /
                                   static_cast<double>(nonnull);
  return score;
}

} // namespace

MetricsReport run_experiment(const SimulationConfig& config) {
  config.validate();

  MetricsReport report;
  report.repetitions.resize(config.reps);

  parallel_for(config.reps, [&](std::size_t k) {
    RngStream rep_rng(config.seed, k);
    RngStream rng_data = rep_rng.child(0);
    RngStream rng_compete = rep_rng.child(1);
    RngStream rng_fit = rep_rng.child(2);
    RngStream rng_oracle = rep_rng.child(3);

    GroundTruth truth;
    std::optional<CompetitionResult> result;
    std::optional<KnockoffStats> stats;

    if (config.scenario == Scenario::Regression) {
      auto [design, response, truth_k] = generate_regression(config, rng_data);
      truth = std::move(truth_k);
      RngStream rng_construct = rng_data.child(1'000'001);
      KnockoffModel model = construct_knockoffs(design, rng_construct);
      stats = knockoff_stats(model, response, config.grid_size);
      result = to_competition(*stats, rng_compete);
    } else {
      auto [data, truth_k] = generate_two_group(config, rng_data);
      truth = std::move(truth_k);
      CompeteOptions options;
      options.n_perm = config.n_perm;
      result = compete(data, options, rng_compete);
    }

    FdrFit fit = fit_fdr(*result, config.epsilon, config.l_max, rng_fit);
    const double pi0t_truth = real_pi0t(*result, truth);
    const auto oracle = oracle_fdr(*result, truth, pi0t_truth, rng_oracle);

    double sq_sum = 0.0;
    for (const auto& [idx, value] : fit.fdr) {
      const double diff = value - oracle.at(idx);
      sq_sum += diff * diff;
    }

    RepetitionMetrics rep;
    rep.rep = k;
    rep.rmse = std::sqrt(sq_sum / static_cast<double>(fit.fdr.size()));
    rep.pi0_true = config.pi0;
    rep.pi0_hat = fit.pi0;
    rep.pi0t_hat = fit.pi0t;
    rep.pi0t_true = pi0t_truth;
    rep.power_defined = truth.n_nonnull() > 0;

    for (double q : config.thresholds) {
      ThresholdMetrics tm;
      tm.q = q;
      const auto fdr_selected = select_at(fit, *result, q);
      const auto fdr_score = score_selection(fdr_selected, truth);
      tm.fdp = fdr_score.fdp;
      tm.power = fdr_score.power;

      const auto baseline_selected =
          stats ? knockoff_select(*stats, q) : td_select(*result, q);
      const auto baseline_score = score_selection(baseline_selected, truth);
      tm.fdp_competition = baseline_score.fdp;
      tm.power_competition = baseline_score.power;

      rep.per_threshold.push_back(tm);
    }
    report.repetitions[k] = std::move(rep);
  });

  const double reps = static_cast<double>(config.reps);
  for (const auto& rep : report.repetitions) {
    report.rmse_ave += rep.rmse / reps;
    report.mean_pi0_hat += rep.pi0_hat / reps;
    report.mean_pi0t_hat += rep.pi0t_hat / reps;
  }
  for (std::size_t t = 0; t < config.thresholds.size(); ++t) {
    AggregateMetrics agg;
    agg.q = config.thresholds[t];
    for (const auto& rep : report.repetitions) {
      agg.realized_fdr += rep.per_threshold[t].fdp / reps;
      agg.mean_power += rep.per_threshold[t].power / reps;
      agg.realized_fdr_competition += rep.per_threshold[t].fdp_competition / reps;
      agg.mean_power_competition += rep.per_threshold[t].power_competition / reps;
    }
    report.per_threshold.push_back(agg);
  }
  return report;
}

void write_metrics(const MetricsReport& report,
                   const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  {
    std::ofstream out(directory / "metrics.csv");
    if (!out) throw InputError("cannot write metrics.csv");
    out << "rep,q,rmse,pi0_hat,pi0t_hat,pi0t_true,fdp,power,"
           "fdp_competition,power_competition,power_defined\n";
    for (const auto& rep : report.repetitions) {
      for (const auto& tm : rep.per_threshold) {
        out << rep.rep << ',' << csv::format(tm.q) << ','
            << csv::format(rep.rmse) << ',' << csv::format(rep.pi0_hat) << ','
            << csv::format(rep.pi0t_hat) << ',' << csv::format(rep.pi0t_true)
            << ',' << csv::format(tm.fdp) << ',' << csv::format(tm.power)
            << ',' << csv::format(tm.fdp_competition) << ','
            << csv::format(tm.power_competition) << ','
            << (rep.power_defined ? 1 : 0) << '\n';
      }
    }
  }

  {
    std::ofstream out(directory / "summary.csv");
    if (!out) throw InputError("cannot write summary.csv");
    out << "q,rmse_ave,realized_fdr,mean_power,realized_fdr_competition,"
           "mean_power_competition,mean_pi0_hat,mean_pi0t_hat\n";
    for (const auto& agg : report.per_threshold) {
      out << csv::format(agg.q) << ',' << csv::format(report.rmse_ave) << ','
          << csv::format(agg.realized_fdr) << ',' << csv::format(agg.mean_power)
          << ',' << csv::format(agg.realized_fdr_competition) << ','
          << csv::format(agg.mean_power_competition) << ','
          << csv::format(report.mean_pi0_hat) << ','
          << csv::format(report.mean_pi0t_hat) << '\n';
    }
  }

  {
    std::ofstream out(directory / "pi0_scatter.csv");
    if (!out) throw InputError("cannot write pi0_scatter.csv");
    out << "rep,pi0_true,pi0_hat,pi0t_true,pi0t_hat\n";
    for (const auto& rep : report.repetitions) {
      out << rep.rep << ',' << csv::format(rep.pi0_true) << ','
          << csv::format(rep.pi0_hat) << ',' << csv::format(rep.pi0t_true)
          << ',' << csv::format(rep.pi0t_hat) << '\n';
    }
  }
}

} // namespace tdfdr
