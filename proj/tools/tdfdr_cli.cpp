// tdfdr: competition-based variable selection and local-fdr estimation.
//
// Subcommands:
//   compete   two-group target-decoy permutation competition -> label/score CSV
//   knockoff  fixed-X knockoff W statistics mapped to label/score CSV
//   fdr       local-fdr estimation on a label/score CSV
//   select    target-decoy selection (Eq.-style decoy/target threshold)
//   pi0       null-proportion estimates from a label/score CSV
//   simulate  run a configured experiment and write the metrics files
//
// Every file-producing run also writes a manifest (resolved flags, seed,
// input digests, tool version) so results can be reproduced bit-exactly.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "tdfdr/csv.hpp"
#include "tdfdr/estimator.hpp"
#include "tdfdr/knockoff.hpp"
#include "tdfdr/parallel.hpp"
#include "tdfdr/simulate.hpp"
#include "tdfdr/two_group.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitStat = 3;

std::string fnv1a64_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tdfdr::InputError("cannot open file '" + path.string() + "'");
  std::uint64_t hash = 14695981039346656037ULL;
  char buffer[1 << 16];
  while (in) {
    in.read(buffer, sizeof(buffer));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(hash));
  return out;
}

struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> inputs; // path -> digest

  void add_input(const fs::path& path) {
    inputs[path.string()] = fnv1a64_hex(path);
  }

  void write(const fs::path& path) const {
    json doc;
    doc["tool_version"] = kToolVersion;
    doc["subcommand"] = subcommand;
    doc["seed"] = seed;
    doc["flags"] = flags;
    doc["inputs"] = inputs;
    std::ofstream out(path);
    if (!out) {
      throw tdfdr::InputError("cannot write manifest '" + path.string() + "'");
    }
    out << doc.dump(2) << "\n";
  }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("TDFDR_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw tdfdr::InputError(std::string("TDFDR_SEED is not a valid seed: '") +
                              env + "'");
    }
  }
  return 0;
}

struct CompeteArgs {
  std::string data_path;
  std::string out_path;
  std::string groups_path;
  long long n_control = -1;
  std::size_t n_perm = 19;
  bool two_sided = false;
  std::optional<std::uint64_t> seed;
};

int run_compete(const CompeteArgs& args) {
  const bool has_n_control = args.n_control >= 0;
  const bool has_groups = !args.groups_path.empty();
  if (has_n_control == has_groups) {
    throw tdfdr::InputError(
        "exactly one of --n-control or --groups is required");
  }

  Eigen::MatrixXd matrix = tdfdr::csv::read_matrix(args.data_path);
  Eigen::Index n_control = 0;

  if (has_groups) {
    std::vector<bool> is_case;
    try {
      is_case = tdfdr::csv::read_groups(args.groups_path);
    } catch (const tdfdr::InputError& e) {
      throw tdfdr::InputError(std::string("--groups: ") + e.what());
    }
    if (static_cast<Eigen::Index>(is_case.size()) != matrix.rows()) {
      throw tdfdr::InputError(
          "--groups: " + std::to_string(is_case.size()) +
          " entries for " + std::to_string(matrix.rows()) + " data rows");
    }
    // controls first, original order preserved within each group
    Eigen::MatrixXd reordered(matrix.rows(), matrix.cols());
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < is_case.size(); ++i) {
      if (!is_case[i]) reordered.row(row++) = matrix.row(static_cast<Eigen::Index>(i));
    }
    n_control = row;
    for (std::size_t i = 0; i < is_case.size(); ++i) {
      if (is_case[i]) reordered.row(row++) = matrix.row(static_cast<Eigen::Index>(i));
    }
    matrix = std::move(reordered);
  } else {
    n_control = static_cast<Eigen::Index>(args.n_control);
    if (n_control < 2 || n_control > matrix.rows() - 2) {
      throw tdfdr::InputError("--n-control must leave >= 2 rows per group");
    }
  }

  const std::uint64_t seed = resolve_seed(args.seed);
  tdfdr::TwoGroupData data(std::move(matrix), n_control);
  tdfdr::CompeteOptions options;
  options.n_perm = args.n_perm;
  options.two_sided = args.two_sided;
  tdfdr::CompetitionResult result =
      tdfdr::compete(data, options, tdfdr::make_rng(seed, 0));

  tdfdr::csv::write_competition(result, fs::path(args.out_path));

  Manifest manifest;
  manifest.subcommand = "compete";
  manifest.seed = seed;
  manifest.flags = {{"data", args.data_path},
                    {"out", args.out_path},
                    {"n_perm", std::to_string(args.n_perm)},
                    {"two_sided", args.two_sided ? "1" : "0"}};
  if (has_groups) {
    manifest.flags["groups"] = args.groups_path;
  } else {
    manifest.flags["n_control"] = std::to_string(args.n_control);
  }
  manifest.add_input(args.data_path);
  if (has_groups) manifest.add_input(args.groups_path);
  manifest.write(args.out_path + ".manifest.json");
  return kExitOk;
}

struct KnockoffArgs {
  std::string design_path;
  std::string response_path;
  std::string out_path;
  std::string stats_path;
  int grid_size = 200;
  std::optional<std::uint64_t> seed;
};

int run_knockoff(const KnockoffArgs& args) {
  Eigen::MatrixXd design = tdfdr::csv::read_matrix(args.design_path);
  Eigen::VectorXd response = tdfdr::csv::read_column(args.response_path);
  if (response.size() != design.rows()) {
    throw tdfdr::DimensionError(
        "response has " + std::to_string(response.size()) + " values for " +
        std::to_string(design.rows()) + " design rows");
  }

  const std::uint64_t seed = resolve_seed(args.seed);
  tdfdr::RngStream construct_rng = tdfdr::make_rng(seed, 0);
  tdfdr::RngStream label_rng = tdfdr::make_rng(seed, 1);

  tdfdr::KnockoffModel model = tdfdr::construct_knockoffs(design, construct_rng);
  tdfdr::KnockoffStats stats =
      tdfdr::knockoff_stats(model, response, args.grid_size);
  tdfdr::CompetitionResult result = tdfdr::to_competition(stats, label_rng);

  tdfdr::csv::write_competition(result, fs::path(args.out_path));

  if (!args.stats_path.empty()) {
    std::ofstream out(args.stats_path);
    if (!out) {
      throw tdfdr::InputError("cannot write file '" + args.stats_path + "'");
    }
    out << "index,z,z_tilde,w\n";
    for (Eigen::Index j = 0; j < stats.w.size(); ++j) {
      out << j << ',' << tdfdr::csv::format(stats.z[j]) << ','
          << tdfdr::csv::format(stats.z_tilde[j]) << ','
          << tdfdr::csv::format(stats.w[j]) << '\n';
    }
  }

  Manifest manifest;
  manifest.subcommand = "knockoff";
  manifest.seed = seed;
  manifest.flags = {{"design", args.design_path},
                    {"response", args.response_path},
                    {"out", args.out_path},
                    {"grid_size", std::to_string(args.grid_size)}};
  if (!args.stats_path.empty()) manifest.flags["emit_stats"] = args.stats_path;
  manifest.add_input(args.design_path);
  manifest.add_input(args.response_path);
  manifest.write(args.out_path + ".manifest.json");
  return kExitOk;
}

struct FdrArgs {
  std::string scores_path;
  std::string out_path;
  double q = 0.05;
  double epsilon = 1e-4;
  std::size_t l_max = 200;
  std::optional<std::uint64_t> seed;
};

int run_fdr(const FdrArgs& args) {
  tdfdr::CompetitionResult result = tdfdr::csv::read_competition(args.scores_path);
  const std::uint64_t seed = resolve_seed(args.seed);

  tdfdr::FdrFit fit =
      tdfdr::fit_fdr(result, args.epsilon, args.l_max, tdfdr::make_rng(seed, 0));
  const auto selected = tdfdr::select_at(fit, result, args.q);
  std::set<std::size_t> selected_set(selected.begin(), selected.end());

  std::vector<tdfdr::ScoredVariable> rows = result.variables();
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });

  std::ofstream out(args.out_path);
  if (!out) throw tdfdr::InputError("cannot write file '" + args.out_path + "'");
  out << "index,label,score,fdr,selected_at_q\n";
  for (const auto& v : rows) {
    // decoys are treated as true nulls: fdr 1, never selected
    const double fdr_value =
        v.label == tdfdr::Label::Target ? fit.fdr.at(v.index) : 1.0;
    out << v.index << ',' << tdfdr::to_char(v.label) << ','
        << tdfdr::csv::format(v.final_score) << ','
        << tdfdr::csv::format(fdr_value) << ','
        << (selected_set.count(v.index) ? 1 : 0) << '\n';
  }
  out.close();

  json diagnostics;
  diagnostics["pi0t"] = fit.pi0t;
  diagnostics["pi0"] = fit.pi0;
  diagnostics["h0"] = fit.h0;
  diagnostics["h1"] = fit.h1;
  diagnostics["iterations"] = fit.iterations;
  diagnostics["converged"] = fit.converged;
  diagnostics["epsilon"] = fit.epsilon;
  diagnostics["l_max"] = fit.l_max;
  diagnostics["seed"] = seed;
  std::ofstream diag_out(args.out_path + ".diagnostics.json");
  diag_out << diagnostics.dump(2) << "\n";

  Manifest manifest;
  manifest.subcommand = "fdr";
  manifest.seed = seed;
  manifest.flags = {{"scores", args.scores_path},
                    {"out", args.out_path},
                    {"q", tdfdr::csv::format(args.q)},
                    {"epsilon", tdfdr::csv::format(args.epsilon)},
                    {"l_max", std::to_string(args.l_max)}};
  manifest.add_input(args.scores_path);
  manifest.write(args.out_path + ".manifest.json");
  return kExitOk;
}

struct SelectArgs {
  std::string scores_path;
  std::string out_path;
  double q = 0.05;
};

int run_select(const SelectArgs& args) {
  tdfdr::CompetitionResult result = tdfdr::csv::read_competition(args.scores_path);
  const auto selected = tdfdr::td_select(result, args.q);
  std::set<std::size_t> selected_set(selected.begin(), selected.end());

  std::vector<tdfdr::ScoredVariable> rows = result.variables();
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });

  std::ofstream out(args.out_path);
  if (!out) throw tdfdr::InputError("cannot write file '" + args.out_path + "'");
  out << "index,label,score,selected\n";
  for (const auto& v : rows) {
    out << v.index << ',' << tdfdr::to_char(v.label) << ','
        << tdfdr::csv::format(v.final_score) << ','
        << (selected_set.count(v.index) ? 1 : 0) << '\n';
  }
  out.close();

  Manifest manifest;
  manifest.subcommand = "select";
  manifest.seed = 0;
  manifest.flags = {{"scores", args.scores_path},
                    {"out", args.out_path},
                    {"q", tdfdr::csv::format(args.q)}};
  manifest.add_input(args.scores_path);
  manifest.write(args.out_path + ".manifest.json");
  return kExitOk;
}

struct Pi0Args {
  std::string scores_path;
  std::string out_path;
};

int run_pi0(const Pi0Args& args) {
  tdfdr::CompetitionResult result = tdfdr::csv::read_competition(args.scores_path);
  json doc;
  doc["pi0t"] = tdfdr::estimate_pi0t(result);
  doc["pi0"] = tdfdr::estimate_pi0(result);
  doc["n_target"] = result.n_target();
  doc["n_decoy"] = result.n_decoy();
  std::cout << doc.dump(2) << "\n";

  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path);
    if (!out) throw tdfdr::InputError("cannot write file '" + args.out_path + "'");
    out << doc.dump(2) << "\n";

    Manifest manifest;
    manifest.subcommand = "pi0";
    manifest.seed = 0;
    manifest.flags = {{"scores", args.scores_path}, {"out", args.out_path}};
    manifest.add_input(args.scores_path);
    manifest.write(args.out_path + ".manifest.json");
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  bool signals_first = false;
};

int run_simulate(const SimulateArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) {
    throw tdfdr::InputError("cannot open config '" + args.config_path + "'");
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  tdfdr::SimulationConfig config = tdfdr::parse_config(text);
  if (args.signals_first) config.signals_first = true;

  tdfdr::MetricsReport report = tdfdr::run_experiment(config);
  tdfdr::write_metrics(report, args.out_dir);

  Manifest manifest;
  manifest.subcommand = "simulate";
  manifest.seed = config.seed;
  manifest.flags = {{"config", args.config_path},
                    {"out_dir", args.out_dir},
                    {"signals_first", config.signals_first ? "1" : "0"}};
  manifest.add_input(args.config_path);
  manifest.write(fs::path(args.out_dir) / "manifest.json");
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competition-based variable selection and local-fdr estimation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::size_t threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap (0 = hardware concurrency)");

  CompeteArgs compete_args;
  std::uint64_t compete_seed = 0;
  auto* compete_cmd = app.add_subcommand(
      "compete", "Two-group target-decoy permutation competition");
  compete_cmd->add_option("--data", compete_args.data_path,
                          "Samples-by-variables CSV with header row")
      ->required();
  compete_cmd->add_option("--n-control", compete_args.n_control,
                          "First N rows are the control group");
  compete_cmd->add_option("--groups", compete_args.groups_path,
                          "Single-column file of control/case labels");
  compete_cmd->add_option("--n-perm", compete_args.n_perm,
                          "Number of random permutations")->capture_default_str();
  compete_cmd->add_flag("--two-sided", compete_args.two_sided,
                        "Score with |t| instead of the signed statistic");
  auto* compete_seed_opt =
      compete_cmd->add_option("--seed", compete_seed, "RNG seed");
  compete_cmd->add_option("--out", compete_args.out_path, "Output CSV path")
      ->required();

  KnockoffArgs knockoff_args;
  std::uint64_t knockoff_seed = 0;
  auto* knockoff_cmd = app.add_subcommand(
      "knockoff", "Fixed-X knockoff statistics mapped to labels/scores");
  knockoff_cmd->add_option("--design", knockoff_args.design_path,
                           "Design matrix CSV with header row")
      ->required();
  knockoff_cmd->add_option("--response", knockoff_args.response_path,
                           "Single-column response CSV")
      ->required();
  knockoff_cmd->add_option("--grid-size", knockoff_args.grid_size,
                           "Lasso path grid size")->capture_default_str();
  auto* knockoff_seed_opt =
      knockoff_cmd->add_option("--seed", knockoff_seed, "RNG seed");
  knockoff_cmd->add_option("--emit-stats", knockoff_args.stats_path,
                           "Also write index,z,z_tilde,w CSV here");
  knockoff_cmd->add_option("--out", knockoff_args.out_path, "Output CSV path")
      ->required();

  FdrArgs fdr_args;
  std::uint64_t fdr_seed = 0;
  auto* fdr_cmd =
      app.add_subcommand("fdr", "Estimate local fdr from a label/score CSV");
  fdr_cmd->add_option("--scores", fdr_args.scores_path,
                      "index,label,score CSV from compete or knockoff")
      ->required();
  fdr_cmd->add_option("--q", fdr_args.q, "Selection level")->capture_default_str();
  fdr_cmd->add_option("--epsilon", fdr_args.epsilon,
                      "Iteration stopping tolerance")->capture_default_str();
  fdr_cmd->add_option("--l-max", fdr_args.l_max, "Iteration cap")->capture_default_str();
  auto* fdr_seed_opt = fdr_cmd->add_option("--seed", fdr_seed, "RNG seed");
  fdr_cmd->add_option("--out", fdr_args.out_path, "Output CSV path")->required();

  SelectArgs select_args;
  auto* select_cmd = app.add_subcommand(
      "select", "Target-decoy selection at level q (no fdr model)");
  select_cmd->add_option("--scores", select_args.scores_path,
                         "index,label,score CSV")
      ->required();
  select_cmd->add_option("--q", select_args.q, "Selection level")->capture_default_str();
  select_cmd->add_option("--out", select_args.out_path, "Output CSV path")
      ->required();

  Pi0Args pi0_args;
  auto* pi0_cmd = app.add_subcommand(
      "pi0", "Null-proportion estimates from a label/score CSV");
  pi0_cmd->add_option("--scores", pi0_args.scores_path,
                      "index,label,score CSV")
      ->required();
  pi0_cmd->add_option("--out", pi0_args.out_path, "Optional JSON output path");

  SimulateArgs simulate_args;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "Run a configured experiment");
  simulate_cmd->add_option("--config", simulate_args.config_path,
                           "JSON simulation config")
      ->required();
  simulate_cmd->add_option("--out-dir", simulate_args.out_dir,
                           "Directory for metrics.csv, summary.csv, "
                           "pi0_scatter.csv")
      ->required();
  simulate_cmd->add_flag("--signals-first", simulate_args.signals_first,
                         "Place regression signals on the first columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  tdfdr::set_max_threads(threads);
  if (compete_seed_opt->count() > 0) compete_args.seed = compete_seed;
  if (knockoff_seed_opt->count() > 0) knockoff_args.seed = knockoff_seed;
  if (fdr_seed_opt->count() > 0) fdr_args.seed = fdr_seed;

  try {
    if (compete_cmd->parsed()) return run_compete(compete_args);
    if (knockoff_cmd->parsed()) return run_knockoff(knockoff_args);
    if (fdr_cmd->parsed()) return run_fdr(fdr_args);
    if (select_cmd->parsed()) return run_select(select_args);
    if (pi0_cmd->parsed()) return run_pi0(pi0_args);
    if (simulate_cmd->parsed()) return run_simulate(simulate_args);
  } catch (const tdfdr::StatError& e) {
    std::cerr << "tdfdr: " << e.what() << "\n";
    return kExitStat;
  } catch (const tdfdr::InputError& e) {
    std::cerr << "tdfdr: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "tdfdr: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
