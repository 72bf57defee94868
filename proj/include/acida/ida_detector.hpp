#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acida/embeddings.hpp"
#include "acida/mlp.hpp"

namespace acida {

struct IdaHyperparams {
  std::vector<int> hidden = {250, 125, 64};
  double learning_rate = 1e-5;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
};

struct IdaModel {
  Mlp head;
  Eigen::Index identity_dim = 0;
  Eigen::Index artifact_dim = 0;
  std::string extractor_id;
  FitLog log;

  std::string architecture_hash() const { return head.architecture_hash(); }
  TensorArchive to_archive() const;
  static IdaModel from_archive(const TensorArchive& archive);
};

// [diff_minmax(doc, live) | cos(doc, live) | artifact]
IdentityArtifactFeatures ida_features(const Eigen::Ref<const VectorXd>& doc,
                                      const Eigen::Ref<const VectorXd>& live,
                                      const Eigen::Ref<const VectorXd>& artifact);

struct IdaExample {
  IdentityArtifactFeatures features;
  bool is_morph = false;
};

// Trains the head with Adam on binary cross-entropy; early stopping monitors
// the validation loss (the training loss when no validation set is given) and
// the best weights are kept.
IdaModel train_ida(const std::vector<IdaExample>& train, const std::vector<IdaExample>& validation,
                   const IdaHyperparams& params, const std::string& extractor_id = "passthrough");

double score_ida(const IdaModel& model, const IdentityArtifactFeatures& features);

}  // namespace acida
