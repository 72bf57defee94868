#include "acida/id_detector.hpp"

namespace acida {

IdModel IdModel::from_archive(const TensorArchive& archive) {
  return {binary_svm_from_archive(archive)};
}

IdModel train_id(const std::vector<IdExample>& examples, const IdHyperparams& params) {
  if (examples.empty()) throw ModelError("id: no training examples");
  const Eigen::Index dim = examples.front().doc.size();
  MatrixXd rows(static_cast<Eigen::Index>(examples.size()), dim);
  std::vector<bool> labels;
  labels.reserve(examples.size());
  bool any_morph = false;
  bool any_bona_fide = false;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const IdExample& e = examples[i];
    if (e.doc.size() != dim || e.live.size() != dim) throw ModelError("id: dimension mismatch");
    rows.row(static_cast<Eigen::Index>(i)) = (e.doc - e.live).transpose();
    labels.push_back(e.is_morph);
    (e.is_morph ? any_morph : any_bona_fide) = true;
  }
  if (!any_morph) throw ModelError("id: training data has no morph examples");
  if (!any_bona_fide) throw ModelError("id: training data has no bona fide examples");

  SvmParams svm;
  svm.c = params.c;
  svm.gamma = params.gamma;
  svm.class_weighting = params.class_weighting;
  svm.standardize = params.standardize;
  svm.seed = params.seed;
  try {
    return {train_binary_svm(rows, labels, svm)};
  } catch (const DataError& e) {
    throw ModelError(std::string("id: ") + e.what());
  }
}

double score_id(const IdModel& model, const Eigen::Ref<const VectorXd>& doc,
                const Eigen::Ref<const VectorXd>& live) {
  if (doc.size() != model.dim() || live.size() != model.dim()) {
    throw DataError("id: embedding dimension mismatch");
  }
  const VectorXd diff = doc - live;
  return model.svm.probability(diff);
}

}  // namespace acida
