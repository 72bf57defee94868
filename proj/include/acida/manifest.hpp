#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "acida/types.hpp"

namespace acida {

// Answers whether a document/live reference can be loaded.
using RefResolver = std::function<bool(const std::string& ref)>;

// A manifest whose invariants have been checked. Only validate_manifest
// produces one, so holders can rely on label/metadata consistency.
class ValidatedManifest {
 public:
  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<AttemptPair>& entries() const { return manifest_.entries; }
  const LabelCounts& counts() const { return counts_; }

 private:
  friend ValidatedManifest validate_manifest(DatasetManifest manifest, const RefResolver& resolve);
  DatasetManifest manifest_;
  LabelCounts counts_;
};

ValidatedManifest validate_manifest(DatasetManifest manifest, const RefResolver& resolve);

struct ScenarioSplits {
  ScenarioSplit accomplice;
  ScenarioSplit criminal;
  ScenarioSplit both;
  std::vector<std::string> warnings;

  const ScenarioSplit& get(Scenario scenario) const;
};

ScenarioSplits split_scenarios(const ValidatedManifest& manifest);

// Whether a pair participates in a scenario's benchmark.
bool in_scenario(AttemptLabel label, Scenario scenario);

// Subjects appearing in the manifest (bona fide holders and both morph contributors).
std::vector<std::string> manifest_subjects(const DatasetManifest& manifest);
bool subjects_disjoint(const DatasetManifest& a, const DatasetManifest& b);

// CSV (header row required) or JSON lines, chosen by extension (.csv / .jsonl).
DatasetManifest read_manifest(const std::filesystem::path& path, SplitTag tag);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace acida
