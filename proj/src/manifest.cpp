#include "acida/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acida/io_util.hpp"

namespace acida {

namespace {

using nlohmann::json;

std::string describe(const AttemptPair& pair, std::size_t index) {
  return "entry " + std::to_string(index) + " (" + pair.pair_ref() + ")";
}

double parse_alpha(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": alpha '" + text + "' is not a number");
  }
}

// Builds a pair from named fields; shared by the CSV and JSONL readers.
AttemptPair make_pair(const std::string& document_ref, const std::string& live_ref,
                      const std::string& label, const std::string& algorithm,
                      const std::optional<double>& alpha, const std::string& subject_a,
                      const std::string& subject_b) {
  AttemptPair pair;
  pair.document_ref = document_ref;
  pair.live_ref = live_ref;
  pair.label = parse_label(label);
  if (!algorithm.empty() || alpha) {
    MorphMeta meta;
    meta.algorithm = algorithm;
    meta.alpha = alpha.value_or(-1.0);
    meta.subject_ids = {subject_a, subject_b};
    pair.morph_meta = std::move(meta);
  } else {
    pair.holder = subject_a;
  }
  return pair;
}

DatasetManifest read_csv(std::istream& in) {
  DatasetManifest manifest;
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto doc_col = column("document_ref");
  const auto live_col = column("live_ref");
  const auto label_col = column("label");
  if (!doc_col || !live_col || !label_col) {
    throw DataError("manifest header must contain document_ref, live_ref and label");
  }
  const auto algo_col = column("morph_algorithm");
  const auto alpha_col = column("alpha");
  const auto a_col = column("subject_a");
  const auto b_col = column("subject_b");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    auto get = [&](const std::optional<std::size_t>& col) {
      return col ? fields[*col] : std::string();
    };
    std::optional<double> alpha;
    if (const auto text = get(alpha_col); !text.empty()) alpha = parse_alpha(text, line_no);
    manifest.entries.push_back(make_pair(fields[*doc_col], fields[*live_col], fields[*label_col],
                                         get(algo_col), alpha, get(a_col), get(b_col)));
  }
  return manifest;
}

DatasetManifest read_jsonl(std::istream& in) {
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    auto str = [&](const char* key) {
      return row.contains(key) && !row[key].is_null() ? row[key].get<std::string>() : std::string();
    };
    if (!row.contains("document_ref") || !row.contains("live_ref") || !row.contains("label")) {
      throw DataError("line " + std::to_string(line_no) +
                      ": document_ref, live_ref and label are required");
    }
    std::optional<double> alpha;
    if (row.contains("alpha") && !row["alpha"].is_null()) alpha = row["alpha"].get<double>();
    manifest.entries.push_back(make_pair(str("document_ref"), str("live_ref"), str("label"),
                                         str("morph_algorithm"), alpha, str("subject_a"),
                                         str("subject_b")));
  }
  return manifest;
}

}  // namespace

ValidatedManifest validate_manifest(DatasetManifest manifest, const RefResolver& resolve) {
  ValidatedManifest validated;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const AttemptPair& pair = manifest.entries[i];
    if (is_morph(pair.label) && !pair.morph_meta) {
      throw DataError(describe(pair, i) + ": missing morph metadata");
    }
    if (!is_morph(pair.label) && pair.morph_meta) {
      throw DataError(describe(pair, i) + ": bona fide pair carries morph metadata");
    }
    if (pair.morph_meta && !(pair.morph_meta->alpha >= 0.0 && pair.morph_meta->alpha <= 1.0)) {
      throw DataError(describe(pair, i) + ": alpha out of range");
    }
    for (const auto* ref : {&pair.document_ref, &pair.live_ref}) {
      if (ref->empty() || (resolve && !resolve(*ref))) {
        throw DataError(describe(pair, i) + ": unresolvable reference '" + *ref + "'");
      }
    }
    if (!seen.emplace(pair.document_ref, pair.live_ref).second) {
      throw DataError(describe(pair, i) + ": duplicate pair");
    }
    switch (pair.label) {
      case AttemptLabel::BonaFide: ++validated.counts_.bona_fide; break;
      case AttemptLabel::Criminal: ++validated.counts_.criminal; break;
      case AttemptLabel::Accomplice: ++validated.counts_.accomplice; break;
    }
  }
  validated.manifest_ = std::move(manifest);
  return validated;
}

bool in_scenario(AttemptLabel label, Scenario scenario) {
  switch (scenario) {
    case Scenario::Accomplice: return label != AttemptLabel::Criminal;
    case Scenario::Criminal: return label != AttemptLabel::Accomplice;
    case Scenario::Both: return true;
  }
  return false;
}

const ScenarioSplit& ScenarioSplits::get(Scenario scenario) const {
  switch (scenario) {
    case Scenario::Accomplice: return accomplice;
    case Scenario::Criminal: return criminal;
    case Scenario::Both: break;
  }
  return both;
}

ScenarioSplits split_scenarios(const ValidatedManifest& manifest) {
  ScenarioSplits splits;
  splits.accomplice.scenario = Scenario::Accomplice;
  splits.criminal.scenario = Scenario::Criminal;
  splits.both.scenario = Scenario::Both;
  // Entries are unique after validation, so Both is the plain union.
  for (const AttemptPair& pair : manifest.entries()) {
    if (in_scenario(pair.label, Scenario::Accomplice)) splits.accomplice.pairs.push_back(pair);
    if (in_scenario(pair.label, Scenario::Criminal)) splits.criminal.pairs.push_back(pair);
    splits.both.pairs.push_back(pair);
  }
  const LabelCounts& counts = manifest.counts();
  if (counts.accomplice == 0) splits.warnings.push_back("accomplice split has no morph pairs");
  if (counts.criminal == 0) splits.warnings.push_back("criminal split has no morph pairs");
  if (counts.bona_fide == 0) splits.warnings.push_back("no bona fide pairs");
  return splits;
}

std::vector<std::string> manifest_subjects(const DatasetManifest& manifest) {
  std::set<std::string> subjects;
  for (const AttemptPair& pair : manifest.entries) {
    if (pair.morph_meta) {
      if (!pair.morph_meta->subject_ids.first.empty()) subjects.insert(pair.morph_meta->subject_ids.first);
      if (!pair.morph_meta->subject_ids.second.empty()) subjects.insert(pair.morph_meta->subject_ids.second);
    } else if (!pair.holder.empty()) {
      subjects.insert(pair.holder);
    }
  }
  return {subjects.begin(), subjects.end()};
}

bool subjects_disjoint(const DatasetManifest& a, const DatasetManifest& b) {
  const auto sa = manifest_subjects(a);
  const auto sb = manifest_subjects(b);
  std::vector<std::string> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  return common.empty();
}

DatasetManifest read_manifest(const std::filesystem::path& path, SplitTag tag) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  DatasetManifest manifest =
      path.extension() == ".jsonl" ? read_jsonl(in) : read_csv(in);
  manifest.source_name = path.stem().string();
  manifest.split_tag = tag;
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  const bool jsonl = path.extension() == ".jsonl";
  if (!jsonl) out << "document_ref,live_ref,label,morph_algorithm,alpha,subject_a,subject_b\n";
  for (const AttemptPair& pair : manifest.entries) {
    if (jsonl) {
      json row = {{"document_ref", pair.document_ref},
                  {"live_ref", pair.live_ref},
                  {"label", std::string(to_string(pair.label))}};
      if (pair.morph_meta) {
        row["morph_algorithm"] = pair.morph_meta->algorithm;
        row["alpha"] = pair.morph_meta->alpha;
        row["subject_a"] = pair.morph_meta->subject_ids.first;
        row["subject_b"] = pair.morph_meta->subject_ids.second;
      } else if (!pair.holder.empty()) {
        row["subject_a"] = pair.holder;
      }
      out << row.dump() << '\n';
      continue;
    }
    out << csv_escape(pair.document_ref) << ',' << csv_escape(pair.live_ref) << ','
        << to_string(pair.label) << ',';
    if (pair.morph_meta) {
      out << csv_escape(pair.morph_meta->algorithm) << ',' << format_double(pair.morph_meta->alpha) << ','
          << csv_escape(pair.morph_meta->subject_ids.first) << ','
          << csv_escape(pair.morph_meta->subject_ids.second) << '\n';
    } else {
      out << ",," << csv_escape(pair.holder) << ",\n";
    }
  }
  write_file_atomic(path, out.str());
}

}  // namespace acida
