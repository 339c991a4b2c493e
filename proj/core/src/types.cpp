#include "tdfdr/types.hpp"

#include <cmath>
#include <unordered_set>

namespace tdfdr {

CompetitionResult::CompetitionResult(std::vector<ScoredVariable> variables,
                                     std::map<std::string, std::string> meta)
    : variables_(std::move(variables)), meta_(std::move(meta)) {
  std::unordered_set<std::size_t> seen;
  seen.reserve(variables_.size());
  for (const auto& v : variables_) {
    if (!std::isfinite(v.final_score)) {
      throw NonFiniteInput("non-finite final score for variable index " +
                           std::to_string(v.index));
    }
    if (!seen.insert(v.index).second) {
      throw InputError("duplicate variable index " + std::to_string(v.index));
    }
    if (v.label == Label::Target) {
      ++n_target_;
    } else {
      ++n_decoy_;
    }
  }
}

std::vector<ScoredVariable> CompetitionResult::targets() const {
  std::vector<ScoredVariable> out;
  out.reserve(n_target_);
  for (const auto& v : variables_) {
    if (v.label == Label::Target) out.push_back(v);
  }
  return out;
}

std::vector<ScoredVariable> CompetitionResult::decoys() const {
  std::vector<ScoredVariable> out;
  out.reserve(n_decoy_);
  for (const auto& v : variables_) {
    if (v.label == Label::Decoy) out.push_back(v);
  }
  return out;
}

} // namespace tdfdr
