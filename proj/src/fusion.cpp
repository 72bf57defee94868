#include "acida/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace acida {

void ModuleScores::validate() const {
  for (double s : {s_ida, s_id}) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw DataError("module score out of [0, 1]: " + std::to_string(s));
    }
  }
}

std::string_view to_string(FusionMode mode) {
  return mode == FusionMode::Weighted ? "weighted" : "selection";
}

std::string_view to_string(BonaFideRoute route) {
  return route == BonaFideRoute::ToId ? "bf_to_id" : "bf_to_ida";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "weighted") return FusionMode::Weighted;
  if (text == "selection") return FusionMode::Selection;
  throw ConfigError("unknown fusion mode '" + std::string(text) + "'");
}

BonaFideRoute parse_bona_fide_route(std::string_view text) {
  if (text == "bf_to_id") return BonaFideRoute::ToId;
  if (text == "bf_to_ida") return BonaFideRoute::ToIda;
  throw ConfigError("unknown bona fide route '" + std::string(text) + "'");
}

double fuse_weighted(const AttemptProbabilities& p, const ModuleScores& scores,
                     BonaFideRoute route) {
  p.validate();
  scores.validate();
  const double s = route == BonaFideRoute::ToId
                       ? p.accomplice * scores.s_ida + (p.bona_fide + p.criminal) * scores.s_id
                       : (p.accomplice + p.bona_fide) * scores.s_ida + p.criminal * scores.s_id;
  return std::clamp(s, std::min(scores.s_ida, scores.s_id), std::max(scores.s_ida, scores.s_id));
}

double fuse_selection(const AttemptProbabilities& p, const ModuleScores& scores) {
  p.validate();
  scores.validate();
  const bool accomplice_wins = p.accomplice > p.bona_fide && p.accomplice > p.criminal;
  return accomplice_wins ? scores.s_ida : scores.s_id;
}

double fuse(FusionMode mode, BonaFideRoute route, const AttemptProbabilities& p,
            const ModuleScores& scores) {
  return mode == FusionMode::Weighted ? fuse_weighted(p, scores, route)
                                      : fuse_selection(p, scores);
}

VectorXd ArtifactSource::resolve(const std::string& document_ref) const {
  if (!extractor) throw ModelError("no artifact extractor configured");
  if (is_embedding_ref(document_ref)) {
    if (cache == nullptr) throw DataError("no embedding cache for '" + document_ref + "'");
    auto hit = cache->find(provider_id, std::string(embedding_key(document_ref)));
    if (!hit) throw DataError("unresolvable reference '" + document_ref + "' for " + provider_id);
    return extract_artifact_features(*extractor, std::move(*hit));
  }
  FaceCrop crop = crop_face(decode_image(document_ref), document_ref, this->crop, detector);
  return extract_artifact_features(*extractor, std::move(crop));
}

bool ArtifactSource::resolvable(const std::string& document_ref) const {
  if (is_embedding_ref(document_ref)) {
    return cache != nullptr && cache->contains(provider_id, std::string(embedding_key(document_ref)));
  }
  std::error_code ec;
  return std::filesystem::is_regular_file(document_ref, ec);
}

PairFeatures resolve_pair(const EmbeddingResolver& embeddings, const ArtifactSource& artifacts,
                          const AttemptPair& pair) {
  PairFeatures f;
  f.doc = embeddings.resolve(pair.document_ref).values;
  f.live = embeddings.resolve(pair.live_ref).values;
  f.artifact = artifacts.resolve(pair.document_ref);
  f.cosine = cosine_similarity(f.doc, f.live);
  return f;
}

MADResult score_attempt(const Pipeline& pipeline, const PairFeatures& features,
                        const AttemptPair& pair, bool oracle_ac) {
  MADResult r;
  r.pair_ref = pair.pair_ref();
  r.label = pair.label;
  r.cosine = features.cosine;
  r.probabilities = oracle_ac ? AttemptProbabilities::one_hot(pair.label)
                              : classify_attempt(pipeline.ac, features.doc, features.live);
  r.module_scores.s_id = score_id(pipeline.id, features.doc, features.live);
  r.module_scores.s_ida =
      score_ida(pipeline.ida, ida_features(features.doc, features.live, features.artifact));
  r.fusion_mode = pipeline.mode;
  r.routing = pipeline.route;
  r.fused_score = r.recompute();
  return r;
}

MADResult score_attempt(const Pipeline& pipeline, const EmbeddingResolver& embeddings,
                        const ArtifactSource& artifacts, const AttemptPair& pair,
                        bool oracle_ac) {
  return score_attempt(pipeline, resolve_pair(embeddings, artifacts, pair), pair, oracle_ac);
}

}  // namespace acida
