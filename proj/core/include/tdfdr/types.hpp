#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tdfdr/errors.hpp"

namespace tdfdr {

//! Competition label: targets are candidate discoveries, decoys are the
//! fake competitors used to estimate null behaviour.
enum class Label : char { Target = 'T', Decoy = 'D' };

inline char to_char(Label label) { return static_cast<char>(label); }

inline Label label_from_char(char c) {
  if (c == 'T') return Label::Target;
  if (c == 'D') return Label::Decoy;
  throw InputError(std::string("invalid label character '") + c +
                   "', expected T or D");
}

//! One variable after competition: its id, label, and final score
//! (larger = more significant).
struct ScoredVariable {
  std::size_t index = 0;
  Label label = Label::Target;
  double final_score = 0.0;
};

//! Output of a competition procedure (two-group permutation or knockoff).
//! This is the common currency consumed by the fdr estimator and the
//! selection rules. Immutable after construction.
class CompetitionResult {
public:
  //! Validates that scores are finite and indices unique, and tallies the
  //! label counts.
  explicit CompetitionResult(std::vector<ScoredVariable> variables,
                             std::map<std::string, std::string> meta = {});

  const std::vector<ScoredVariable>& variables() const { return variables_; }
  std::size_t size() const { return variables_.size(); }
  std::size_t n_target() const { return n_target_; }
  std::size_t n_decoy() const { return n_decoy_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  std::vector<ScoredVariable> targets() const;
  std::vector<ScoredVariable> decoys() const;

private:
  std::vector<ScoredVariable> variables_;
  std::map<std::string, std::string> meta_;
  std::size_t n_target_ = 0;
  std::size_t n_decoy_ = 0;
};

} // namespace tdfdr
