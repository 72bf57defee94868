#include "acida/types.hpp"

namespace acida {

std::string_view to_string(AttemptLabel label) {
  switch (label) {
    case AttemptLabel::BonaFide: return "bonafide";
    case AttemptLabel::Criminal: return "criminal";
    case AttemptLabel::Accomplice: return "accomplice";
  }
  return "unknown";
}

AttemptLabel parse_label(std::string_view text) {
  if (text == "bonafide") return AttemptLabel::BonaFide;
  if (text == "criminal") return AttemptLabel::Criminal;
  if (text == "accomplice") return AttemptLabel::Accomplice;
  throw DataError("unknown attempt label '" + std::string(text) + "'");
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
  }
  return "unknown";
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::Train;
  if (text == "validation" || text == "val") return SplitTag::Validation;
  if (text == "test") return SplitTag::Test;
  throw DataError("unknown split tag '" + std::string(text) + "'");
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Accomplice: return "accomplice";
    case Scenario::Criminal: return "criminal";
    case Scenario::Both: return "both";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "accomplice") return Scenario::Accomplice;
  if (text == "criminal") return Scenario::Criminal;
  if (text == "both") return Scenario::Both;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

std::size_t LabelCounts::of(AttemptLabel label) const {
  switch (label) {
    case AttemptLabel::BonaFide: return bona_fide;
    case AttemptLabel::Criminal: return criminal;
    case AttemptLabel::Accomplice: return accomplice;
  }
  return 0;
}

}  // namespace acida
