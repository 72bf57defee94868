#include "acida/attempt_classifier.hpp"

#include <cmath>

#include "acida/embeddings.hpp"

namespace acida {

namespace {

// Class indices inside the SVM.
constexpr int kAccomplice = 0;
constexpr int kBonaFide = 1;
constexpr int kCriminal = 2;

int class_index(AttemptLabel label) {
  switch (label) {
    case AttemptLabel::Accomplice: return kAccomplice;
    case AttemptLabel::BonaFide: return kBonaFide;
    case AttemptLabel::Criminal: return kCriminal;
  }
  return kBonaFide;
}

AttemptProbabilities from_posterior(const VectorXd& p) {
  AttemptProbabilities out{p(kAccomplice), p(kBonaFide), p(kCriminal)};
  out.validate();
  return out;
}

}  // namespace

AttemptProbabilities AttemptProbabilities::one_hot(AttemptLabel label) {
  AttemptProbabilities p;
  switch (label) {
    case AttemptLabel::Accomplice: p.accomplice = 1.0; break;
    case AttemptLabel::BonaFide: p.bona_fide = 1.0; break;
    case AttemptLabel::Criminal: p.criminal = 1.0; break;
  }
  return p;
}

void AttemptProbabilities::validate() const {
  for (double v : {accomplice, bona_fide, criminal}) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("attempt probability outside [0, 1]");
  }
  if (std::abs(accomplice + bona_fide + criminal - 1.0) > kSumTolerance) {
    throw DataError("attempt probabilities do not sum to 1");
  }
}

AttemptLabel AttemptProbabilities::argmax() const {
  // Ties resolve towards bona fide, then criminal.
  if (accomplice > bona_fide && accomplice > criminal) return AttemptLabel::Accomplice;
  if (criminal > bona_fide) return AttemptLabel::Criminal;
  return AttemptLabel::BonaFide;
}

double AttemptProbabilities::of(AttemptLabel label) const {
  switch (label) {
    case AttemptLabel::Accomplice: return accomplice;
    case AttemptLabel::BonaFide: return bona_fide;
    case AttemptLabel::Criminal: return criminal;
  }
  return 0.0;
}

VectorXd ac_features(AcInput input, const Eigen::Ref<const VectorXd>& doc,
                     const Eigen::Ref<const VectorXd>& live) {
  const double cosine = cosine_similarity(doc, live);
  if (input == AcInput::Cosine) return VectorXd::Constant(1, cosine);
  VectorXd out(1 + doc.size());
  out << cosine, doc - live;
  return out;
}

AcModel train_ac(const MatrixXd& features, const std::vector<AttemptLabel>& labels,
                 const AcHyperparams& params) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ModelError("ac: feature rows do not match labels");
  }
  LabelCounts counts;
  std::vector<int> classes;
  classes.reserve(labels.size());
  for (AttemptLabel l : labels) {
    classes.push_back(class_index(l));
    if (l == AttemptLabel::BonaFide) ++counts.bona_fide;
    else if (l == AttemptLabel::Criminal) ++counts.criminal;
    else ++counts.accomplice;
  }
  for (AttemptLabel l : kAllLabels) {
    if (counts.of(l) == 0) {
      throw ModelError("ac: training data has no " + std::string(to_string(l)) + " examples");
    }
  }
  const Eigen::Index expected = params.input == AcInput::Cosine ? 1 : -1;
  if (expected > 0 && features.cols() != expected) {
    throw ModelError("ac: cosine input expects a single feature column");
  }
  SvmParams svm;
  svm.c = params.c;
  svm.gamma = params.gamma;
  svm.class_weighting = params.class_weighting;
  svm.standardize = params.standardize;
  svm.seed = params.seed;
  AcModel model;
  model.input = params.input;
  try {
    model.svm = train_multiclass_svm(features, classes, 3, svm);
  } catch (const DataError& e) {
    throw ModelError(std::string("ac: ") + e.what());
  }
  return model;
}

AcModel train_ac(const std::vector<double>& cosines, const std::vector<AttemptLabel>& labels,
                 const AcHyperparams& params) {
  if (params.input != AcInput::Cosine) throw ModelError("ac: cosine training needs cosine input");
  const MatrixXd features =
      Eigen::Map<const VectorXd>(cosines.data(), static_cast<Eigen::Index>(cosines.size()));
  return train_ac(features, labels, params);
}

AttemptProbabilities classify_attempt(const AcModel& model, double cosine) {
  if (model.input != AcInput::Cosine) {
    throw DataError("ac: model expects embeddings, not a cosine score");
  }
  if (!(cosine >= -1.0 && cosine <= 1.0)) throw DataError("ac: cosine outside [-1, 1]");
  return from_posterior(model.svm.probabilities(VectorXd::Constant(1, cosine)));
}

AttemptProbabilities classify_attempt(const AcModel& model, const Eigen::Ref<const VectorXd>& doc,
                                      const Eigen::Ref<const VectorXd>& live) {
  if (model.input == AcInput::Cosine) return classify_attempt(model, cosine_similarity(doc, live));
  const VectorXd x = ac_features(model.input, doc, live);
  if (x.size() != model.svm.input_dim()) throw DataError("ac: embedding dimension mismatch");
  return from_posterior(model.svm.probabilities(x));
}

TensorArchive AcModel::to_archive() const {
  TensorArchive a = acida::to_archive(svm);
  a.put_string("input", input == AcInput::Cosine ? "cosine" : "cosine+difference");
  return a;
}

AcModel AcModel::from_archive(const TensorArchive& archive) {
  AcModel model;
  const std::string& input = archive.get_string("input");
  if (input == "cosine") model.input = AcInput::Cosine;
  else if (input == "cosine+difference") model.input = AcInput::CosineAndDifference;
  else throw ModelError("ac: unknown input mode '" + input + "'");
  model.svm = multiclass_svm_from_archive(archive);
  if (model.svm.num_classes != 3) throw ModelError("ac: model must have three classes");
  return model;
}

}  // namespace acida
