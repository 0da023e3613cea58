#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subsense/identity.hpp"
#include "subsense/subjectivity.hpp"
#include "subsense/textprep.hpp"

namespace subsense::augment {

enum class AugmentMode { Baseline, SS, SO };

std::string_view mode_name(AugmentMode mode);  // "baseline" | "ss" | "so"
std::optional<AugmentMode> parse_mode(std::string_view name);

// An encoded comment plus the appended subjectivity slot. Inside the encoder
// the slot sits at position base.max_len(), so the effective sequence length
// is max_len + 1.
struct AugmentedExample {
  textprep::EncodedExample base;
  double slot_fill = 0.0;
  bool slot_mask = false;
  AugmentMode mode = AugmentMode::Baseline;

  std::size_t seq_len() const { return base.max_len() + 1; }
  // Key mask over the full sequence including the slot.
  bool attends(std::size_t pos) const {
    return pos < base.max_len() ? base.mask[pos] != 0 : slot_mask;
  }
};

// Baseline: slot masked. SO: slot always attended. SS: slot attended iff an
// identity term is present. Throws ContractError if s is outside [0, 1].
AugmentedExample augment(const textprep::EncodedExample& encoded,
                         const subjectivity::SubjectivityScore& s, bool present,
                         AugmentMode mode);

// Everything derived from one raw comment that training and auditing need.
struct PreparedExample {
  AugmentedExample example;
  identity::IdentityMatch identity;
  double subjectivity = 0.0;
  // Encoded positions (1-based, after CLS) of tokens overlapping an
  // identity-term match and surviving truncation.
  std::vector<std::size_t> identity_positions;
};

struct PrepareContext {
  const textprep::Vocab* vocab = nullptr;
  const subjectivity::SubjectivityLexicon* lexicon = nullptr;
  const identity::IdentityLexicon* identity = nullptr;
  std::size_t max_len = 128;
  AugmentMode mode = AugmentMode::Baseline;
};

PreparedExample prepare(std::string_view text, const PrepareContext& ctx);

// {"ids": [...], "mask": [...], "slot_fill": s, "slot_mask": 0|1, "mode": "ss"}
std::string to_json_line(const AugmentedExample& example);
AugmentedExample from_json_line(std::string_view line);

}  // namespace subsense::augment
