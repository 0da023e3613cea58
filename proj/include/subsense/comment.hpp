#pragma once

#include <string>
#include <string_view>

namespace subsense {

// Class index doubles as the logit index: NonToxic = 0, Toxic = 1.
enum class Label : int { NonToxic = 0, Toxic = 1 };

inline constexpr int class_index(Label label) { return static_cast<int>(label); }

inline std::string_view label_name(Label label) {
  return label == Label::Toxic ? "toxic" : "nontoxic";
}

struct Comment {
  std::string id;
  std::string text;
  Label label = Label::NonToxic;
};

}  // namespace subsense
