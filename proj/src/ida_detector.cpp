#include "acida/ida_detector.hpp"

#include <string>

namespace acida {

namespace {

void stack(const std::vector<IdaExample>& examples, MatrixXd& inputs, Eigen::RowVectorXd& targets) {
  const Eigen::Index n = static_cast<Eigen::Index>(examples.size());
  inputs.resize(examples.front().features.size(), n);
  targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.col(i) = examples[static_cast<std::size_t>(i)].features.values;
    targets(i) = examples[static_cast<std::size_t>(i)].is_morph ? 1.0 : 0.0;
  }
}

}  // namespace

IdentityArtifactFeatures ida_features(const Eigen::Ref<const VectorXd>& doc,
                                      const Eigen::Ref<const VectorXd>& live,
                                      const Eigen::Ref<const VectorXd>& artifact) {
  return concat_features(diff_minmax(doc, live), cosine_similarity(doc, live), artifact);
}

IdaModel train_ida(const std::vector<IdaExample>& train, const std::vector<IdaExample>& validation,
                   const IdaHyperparams& params, const std::string& extractor_id) {
  if (train.empty()) throw ModelError("ida: no training examples");
  const Eigen::Index identity_dim = train.front().features.identity_dim;
  const Eigen::Index artifact_dim = train.front().features.artifact_dim;
  std::size_t morphs = 0;
  for (const auto* set : {&train, &validation}) {
    for (const IdaExample& e : *set) {
      if (e.features.identity_dim != identity_dim || e.features.artifact_dim != artifact_dim) {
        throw ModelError("ida: inconsistent feature layout");
      }
      if (!e.features.values.allFinite()) throw ModelError("ida: non-finite features");
    }
  }
  for (const IdaExample& e : train) morphs += e.is_morph ? 1 : 0;
  if (morphs == 0 || morphs == train.size()) {
    throw ModelError("ida: training data must contain both morph and bona fide examples");
  }

  IdaModel model;
  model.identity_dim = identity_dim;
  model.artifact_dim = artifact_dim;
  model.extractor_id = extractor_id;
  model.head = Mlp(feature_length(identity_dim, artifact_dim), params.hidden, params.seed);

  MatrixXd inputs;
  Eigen::RowVectorXd targets;
  stack(train, inputs, targets);
  MatrixXd val_inputs;
  Eigen::RowVectorXd val_targets;
  if (!validation.empty()) stack(validation, val_inputs, val_targets);

  model.log = fit_binary(model.head, inputs, targets, val_inputs, val_targets,
                         FitParams{params.learning_rate, params.batch_size, params.max_epochs,
                                   params.patience, params.min_delta, params.seed});
  return model;
}

double score_ida(const IdaModel& model, const IdentityArtifactFeatures& features) {
  if (features.size() != model.head.input_dim() || features.identity_dim != model.identity_dim) {
    throw DataError("ida: feature length " + std::to_string(features.size()) + ", expected " +
                    std::to_string(model.head.input_dim()));
  }
  return model.head.predict_one(features.values);
}

TensorArchive IdaModel::to_archive() const {
  TensorArchive a = head.to_archive();
  a.put_scalar("identity_dim", static_cast<double>(identity_dim));
  a.put_scalar("artifact_dim", static_cast<double>(artifact_dim));
  a.put_string("extractor_id", extractor_id);
  a.put_string("architecture_hash", head.architecture_hash());
  return a;
}

IdaModel IdaModel::from_archive(const TensorArchive& archive) {
  IdaModel model;
  model.head = Mlp::from_archive(archive);
  model.identity_dim = static_cast<Eigen::Index>(archive.get_scalar("identity_dim"));
  model.artifact_dim = static_cast<Eigen::Index>(archive.get_scalar("artifact_dim"));
  model.extractor_id = archive.get_string("extractor_id");
  if (archive.get_string("architecture_hash") != model.head.architecture_hash()) {
    throw ModelError("ida: architecture hash mismatch");
  }
  if (feature_length(model.identity_dim, model.artifact_dim) != model.head.input_dim()) {
    throw ModelError("ida: feature layout does not match head input");
  }
  return model;
}

}  // namespace acida
