#pragma once

#include <cstdint>
#include <vector>

#include "acida/svm.hpp"
#include "acida/types.hpp"

namespace acida {

// Posterior over who is standing at the camera: accomplice, the genuine
// document holder, or the criminal.
struct AttemptProbabilities {
  double accomplice = 0.0;
  double bona_fide = 0.0;
  double criminal = 0.0;

  static constexpr double kSumTolerance = 1e-9;

  static AttemptProbabilities one_hot(AttemptLabel label);
  void validate() const;
  AttemptLabel argmax() const;
  double of(AttemptLabel label) const;
};

enum class AcInput {
  Cosine,               // cos(doc, live) only
  CosineAndDifference,  // [cos, doc - live]
};

struct AcHyperparams {
  double c = 1.0;
  double gamma = 1e-3;
  bool class_weighting = false;
  bool standardize = true;
  AcInput input = AcInput::Cosine;
  std::uint64_t seed = 0;
};

struct AcModel {
  AcInput input = AcInput::Cosine;
  MulticlassSvm svm;

  TensorArchive to_archive() const;
  static AcModel from_archive(const TensorArchive& archive);
};

VectorXd ac_features(AcInput input, const Eigen::Ref<const VectorXd>& doc,
                     const Eigen::Ref<const VectorXd>& live);

// One row of `features` per example.
AcModel train_ac(const MatrixXd& features, const std::vector<AttemptLabel>& labels,
                 const AcHyperparams& params);
AcModel train_ac(const std::vector<double>& cosines, const std::vector<AttemptLabel>& labels,
                 const AcHyperparams& params);

AttemptProbabilities classify_attempt(const AcModel& model, double cosine);
AttemptProbabilities classify_attempt(const AcModel& model, const Eigen::Ref<const VectorXd>& doc,
                                      const Eigen::Ref<const VectorXd>& live);

}  // namespace acida
