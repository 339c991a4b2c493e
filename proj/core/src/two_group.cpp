#include "tdfdr/two_group.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tdfdr/parallel.hpp"

namespace tdfdr {

TwoGroupData::TwoGroupData(Eigen::MatrixXd matrix_in, Eigen::Index n_control_in)
    : matrix(std::move(matrix_in)), n_control(n_control_in) {
  n_case = matrix.rows() - n_control;
  if (n_control < 2 || n_case < 2) {
    throw DimensionError("need >= 2 control and >= 2 case samples, got " +
                         std::to_string(n_control) + " control / " +
                         std::to_string(n_case) + " case");
  }
  if (!matrix.allFinite()) {
    throw NonFiniteInput("non-finite entry in two-group data matrix");
  }
}

double t_score(std::span<const double> control, std::span<const double> cases) {
  const std::size_t n1 = control.size();
  const std::size_t n2 = cases.size();
  if (n1 < 2 || n2 < 2) {
    throw DimensionError("t statistic needs >= 2 samples per group");
  }

  double mean1 = 0.0, mean2 = 0.0;
  for (double x : control) mean1 += x;
  for (double x : cases) mean2 += x;
  mean1 /= static_cast<double>(n1);
  mean2 /= static_cast<double>(n2);

  double ss1 = 0.0, ss2 = 0.0;
  for (double x : control) ss1 += (x - mean1) * (x - mean1);
  for (double x : cases) ss2 += (x - mean2) * (x - mean2);

  const double pooled_var =
      (ss1 + ss2) / static_cast<double>(n1 + n2 - 2);
  if (!(pooled_var > 0.0)) {
    throw DegenerateVariance("both groups have zero sample variance");
  }
  const double se = std::sqrt(pooled_var * (1.0 / static_cast<double>(n1) +
                                            1.0 / static_cast<double>(n2)));
  return (mean2 - mean1) / se;
}

PermutationScores rank_original(double original, std::vector<double> permuted,
                                RngStream& rng) {
  PermutationScores ps;
  ps.original = original;
  std::size_t greater = 0, tied = 0;
  for (double s : permuted) {
    if (s > original) {
      ++greater;
    } else if (s == original) {
      ++tied;
    }
  }
  std::size_t offset = 0;
  if (tied > 0) offset = static_cast<std::size_t>(rng.next_below(tied + 1));
  ps.rank = 1 + greater + offset;
  ps.permuted = std::move(permuted);
  return ps;
}

ScoredVariable label_and_score(std::size_t index, const PermutationScores& ps,
                               RngStream& rng) {
  const std::size_t n_perm = ps.permuted.size();
  const double half = (static_cast<double>(n_perm) + 2.0) / 2.0;
  const double rank = static_cast<double>(ps.rank);

  Label label;
  if (rank < half) {
    label = Label::Target;
  } else if (rank > half) {
    label = Label::Decoy;
  } else {
    label = rng.next_coin() ? Label::Target : Label::Decoy;
  }

  double final_score = ps.original;
  if (label == Label::Decoy) {
    std::vector<double> sorted = ps.permuted;
    sorted.push_back(ps.original);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    // (N+2-R)-th largest of the N+1 scores: the permutation score at the
    // position symmetric to R about the median.
    const std::size_t pos = n_perm + 2 - ps.rank; // 1-based
    final_score = sorted[pos - 1];
  }
  return ScoredVariable{index, label, final_score};
}

CompetitionResult compete(const TwoGroupData& data, const CompeteOptions& options,
                          const RngStream& rng) {
  if (options.n_perm < 1) {
    throw InputError("n_perm must be >= 1");
  }
  const std::size_t m = static_cast<std::size_t>(data.n_variables());
  if (!options.variable_ids.empty() && options.variable_ids.size() != m) {
    throw DimensionError("variable_ids length != number of variables");
  }

  const std::size_t n1 = static_cast<std::size_t>(data.n_control);
  const std::size_t n = static_cast<std::size_t>(data.n_samples());

  struct Slot {
    bool excluded = false;
    ScoredVariable variable;
  };
  std::vector<Slot> slots(m);

  parallel_for(m, [&](std::size_t j) {
    const std::size_t id =
        options.variable_ids.empty() ? j : options.variable_ids[j];
    RngStream var_rng = rng.child(id);

    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = data.matrix(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(j));
    }

    auto score = [&](const std::vector<double>& values) {
      const double t =
          t_score(std::span<const double>(values.data(), n1),
                  std::span<const double>(values.data() + n1, n - n1));
      return options.two_sided ? std::abs(t) : t;
    };

    try {
      const double original = score(column);
      std::vector<double> permuted(options.n_perm);
      std::vector<double> shuffled = column;
      for (std::size_t k = 0; k < options.n_perm; ++k) {
        shuffled = column;
        var_rng.shuffle(std::span<double>(shuffled));
        permuted[k] = score(shuffled);
      }
      PermutationScores ps =
          rank_original(original, std::move(permuted), var_rng);
      slots[j].variable = label_and_score(id, ps, var_rng);
    } catch (const DegenerateVariance&) {
      slots[j].excluded = true;
    }
  });

  std::vector<ScoredVariable> variables;
  variables.reserve(m);
  std::ostringstream excluded;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t id =
        options.variable_ids.empty() ? j : options.variable_ids[j];
    if (slots[j].excluded) {
      if (excluded.tellp() > 0) excluded << ',';
      excluded << id;
    } else {
      variables.push_back(slots[j].variable);
    }
  }

  std::map<std::string, std::string> meta{
      {"procedure", "two-group-permutation"},
      {"n_perm", std::to_string(options.n_perm)},
      {"two_sided", options.two_sided ? "1" : "0"},
      {"seed", std::to_string(rng.seed())},
      {"stream", std::to_string(rng.stream())},
  };
  if (excluded.tellp() > 0) meta["excluded"] = excluded.str();

  return CompetitionResult(std::move(variables), std::move(meta));
}

std::vector<std::size_t> td_select(const CompetitionResult& result, double q) {
  if (result.size() == 0) throw EmptyInput("empty competition result");
  if (!(q > 0.0 && q < 1.0)) {
    throw InputError("q must lie in (0, 1)");
  }

  std::vector<ScoredVariable> sorted = result.variables();
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.index < b.index;
  });

  std::size_t n_decoy = 0, n_target = 0;
  std::size_t k_td = 0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (sorted[k].label == Label::Decoy) {
      ++n_decoy;
    } else {
      ++n_target;
    }
    const double ratio = static_cast<double>(n_decoy + 1) /
                         static_cast<double>(std::max<std::size_t>(n_target, 1));
    if (ratio <= q) k_td = k + 1;
  }

  std::vector<std::size_t> selected;
  for (std::size_t k = 0; k < k_td; ++k) {
    if (sorted[k].label == Label::Target) selected.push_back(sorted[k].index);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

} // namespace tdfdr
