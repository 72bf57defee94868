#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "acida/error.hpp"

namespace acida {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

// A face identity vector together with the tag of the provider that produced it.
// Vectors from different providers live in different spaces and are never mixed.
struct Embedding {
  VectorXd values;
  std::string provider_id;

  Eigen::Index dim() const { return values.size(); }
};

enum class AttemptLabel { BonaFide, Criminal, Accomplice };

inline constexpr std::array<AttemptLabel, 3> kAllLabels = {
    AttemptLabel::BonaFide, AttemptLabel::Criminal, AttemptLabel::Accomplice};

std::string_view to_string(AttemptLabel label);
AttemptLabel parse_label(std::string_view text);

inline bool is_morph(AttemptLabel label) { return label != AttemptLabel::BonaFide; }

// alpha is the criminal-side weight of the morph; 0.3 means the morph mostly
// resembles the accomplice.
struct MorphMeta {
  std::string algorithm;
  double alpha = 0.0;
  std::pair<std::string, std::string> subject_ids;  // (criminal, accomplice)
};

// References are either "emb:<key>" (a precomputed embedding in the cache) or
// a path to an image file.
struct AttemptPair {
  std::string document_ref;
  std::string live_ref;
  AttemptLabel label = AttemptLabel::BonaFide;
  std::optional<MorphMeta> morph_meta;
  std::string holder;  // bona fide document holder, when known

  std::string pair_ref() const { return document_ref + "|" + live_ref; }
};

inline constexpr std::string_view kEmbeddingRefPrefix = "emb:";

inline bool is_embedding_ref(std::string_view ref) { return ref.starts_with(kEmbeddingRefPrefix); }
inline std::string_view embedding_key(std::string_view ref) {
  return is_embedding_ref(ref) ? ref.substr(kEmbeddingRefPrefix.size()) : ref;
}

enum class SplitTag { Train, Validation, Test };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view text);

struct DatasetManifest {
  std::vector<AttemptPair> entries;
  std::string source_name;
  SplitTag split_tag = SplitTag::Test;
  bool subject_disjoint = false;
};

struct LabelCounts {
  std::size_t bona_fide = 0;
  std::size_t criminal = 0;
  std::size_t accomplice = 0;

  std::size_t total() const { return bona_fide + criminal + accomplice; }
  std::size_t of(AttemptLabel label) const;
};

enum class Scenario { Accomplice, Criminal, Both };

std::string_view to_string(Scenario scenario);
Scenario parse_scenario(std::string_view text);

struct ScenarioSplit {
  Scenario scenario = Scenario::Both;
  std::vector<AttemptPair> pairs;
};

}  // namespace acida
