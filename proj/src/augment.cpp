#include "subsense/augment.hpp"

#include "json.hpp"

#include "subsense/error.hpp"

namespace subsense::augment {

std::string_view mode_name(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::Baseline: return "baseline";
    case AugmentMode::SS: return "ss";
    case AugmentMode::SO: return "so";
  }
  return "baseline";
}

std::optional<AugmentMode> parse_mode(std::string_view name) {
  if (name == "baseline") return AugmentMode::Baseline;
  if (name == "ss") return AugmentMode::SS;
  if (name == "so") return AugmentMode::SO;
  return std::nullopt;
}

AugmentedExample augment(const textprep::EncodedExample& encoded,
                         const subjectivity::SubjectivityScore& s, bool present,
                         AugmentMode mode) {
  if (!(s.value >= 0.0 && s.value <= 1.0)) {
    throw ContractError("augment: subjectivity outside [0,1]");
  }
  AugmentedExample out;
  out.base = encoded;
  out.slot_fill = s.value;
  out.mode = mode;
  switch (mode) {
    case AugmentMode::Baseline: out.slot_mask = false; break;
    case AugmentMode::SO: out.slot_mask = true; break;
    case AugmentMode::SS: out.slot_mask = present; break;
  }
  return out;
}

PreparedExample prepare(std::string_view text, const PrepareContext& ctx) {
  if (!ctx.vocab || !ctx.lexicon || !ctx.identity) {
    throw ContractError("prepare: incomplete context");
  }
  PreparedExample out;
  const auto spans = textprep::word_split_spans(text);
  std::vector<std::string> tokens;
  tokens.reserve(spans.size());
  for (const auto& s : spans) tokens.push_back(s.text);

  const auto encoded = textprep::encode(tokens, *ctx.vocab, ctx.max_len);
  const auto s = subjectivity::score(text, *ctx.lexicon);
  out.subjectivity = s.value;
  out.identity = identity::detect(text, *ctx.identity);
  out.example = augment(encoded, s, out.identity.present, ctx.mode);

  const std::size_t kept = encoded.n_real - 2;
  for (std::size_t t = 0; t < kept; ++t) {
    for (const auto& m : out.identity.matches) {
      if (spans[t].begin < m.end && m.begin < spans[t].end) {
        out.identity_positions.push_back(t + 1);
        break;
      }
    }
  }
  return out;
}

std::string to_json_line(const AugmentedExample& example) {
  nlohmann::json j;
  j["ids"] = example.base.ids;
  std::vector<int> mask(example.base.mask.begin(), example.base.mask.end());
  j["mask"] = mask;
  j["slot_fill"] = example.slot_fill;
  j["slot_mask"] = example.slot_mask ? 1 : 0;
  j["mode"] = std::string(mode_name(example.mode));
  return j.dump();
}

AugmentedExample from_json_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    AugmentedExample out;
    out.base.ids = j.at("ids").get<std::vector<std::int32_t>>();
    const auto mask = j.at("mask").get<std::vector<int>>();
    if (mask.size() != out.base.ids.size()) {
      throw SchemaError("augmented example: ids/mask length mismatch");
    }
    for (int m : mask) {
      if (m != 0 && m != 1) throw SchemaError("augmented example: mask bit not 0/1");
      out.base.mask.push_back(static_cast<std::uint8_t>(m));
      out.base.n_real += static_cast<std::size_t>(m);
    }
    out.slot_fill = j.at("slot_fill").get<double>();
    out.slot_mask = j.at("slot_mask").get<int>() != 0;
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw SchemaError("augmented example: unknown mode");
    out.mode = *mode;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("augmented example: ") + e.what());
  }
}

}  // namespace subsense::augment
