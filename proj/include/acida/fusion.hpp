#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "acida/artifact.hpp"
#include "acida/attempt_classifier.hpp"
#include "acida/id_detector.hpp"
#include "acida/ida_detector.hpp"

namespace acida {

struct ModuleScores {
  double s_ida = 0.0;
  double s_id = 0.0;

  void validate() const;
};

enum class FusionMode { Weighted, Selection };
// Which detector receives the bona fide probability mass in weighted fusion.
enum class BonaFideRoute { ToId, ToIda };

std::string_view to_string(FusionMode mode);
std::string_view to_string(BonaFideRoute route);
FusionMode parse_fusion_mode(std::string_view text);
BonaFideRoute parse_bona_fide_route(std::string_view text);

// ToId:  S = pA * s_ida + (pB + pC) * s_id
// ToIda: S = (pA + pB) * s_ida + pC * s_id
double fuse_weighted(const AttemptProbabilities& p, const ModuleScores& scores,
                     BonaFideRoute route = BonaFideRoute::ToId);

// s_ida when the accomplice probability is strictly the largest, s_id otherwise.
double fuse_selection(const AttemptProbabilities& p, const ModuleScores& scores);

double fuse(FusionMode mode, BonaFideRoute route, const AttemptProbabilities& p,
            const ModuleScores& scores);

struct MADResult {
  std::string pair_ref;
  AttemptLabel label = AttemptLabel::BonaFide;  // ground truth from the manifest
  double cosine = 0.0;
  AttemptProbabilities probabilities;
  ModuleScores module_scores;
  double fused_score = 0.0;
  FusionMode fusion_mode = FusionMode::Weighted;
  BonaFideRoute routing = BonaFideRoute::ToId;

  double recompute() const { return fuse(fusion_mode, routing, probabilities, module_scores); }
};

// Where document artifact inputs come from. Embedding references look the
// document key up under `provider_id`; image references are decoded and cropped.
struct ArtifactSource {
  std::shared_ptr<const ArtifactExtractor> extractor;
  const EmbeddingCache* cache = nullptr;
  std::string provider_id = "synthetic-artifact";
  CropConfig crop;
  const FaceDetector* detector = nullptr;

  VectorXd resolve(const std::string& document_ref) const;
  bool resolvable(const std::string& document_ref) const;
};

struct PairFeatures {
  VectorXd doc;
  VectorXd live;
  VectorXd artifact;
  double cosine = 0.0;
};

PairFeatures resolve_pair(const EmbeddingResolver& embeddings, const ArtifactSource& artifacts,
                          const AttemptPair& pair);

struct Pipeline {
  AcModel ac;
  IdModel id;
  IdaModel ida;
  FusionMode mode = FusionMode::Weighted;
  BonaFideRoute route = BonaFideRoute::ToId;
};

// With `oracle_ac` the AC output is replaced by the one-hot ground-truth label.
MADResult score_attempt(const Pipeline& pipeline, const PairFeatures& features,
                        const AttemptPair& pair, bool oracle_ac = false);
MADResult score_attempt(const Pipeline& pipeline, const EmbeddingResolver& embeddings,
                        const ArtifactSource& artifacts, const AttemptPair& pair,
                        bool oracle_ac = false);

}  // namespace acida
