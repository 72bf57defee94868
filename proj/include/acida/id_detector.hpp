#pragma once

#include <cstdint>
#include <vector>

#include "acida/svm.hpp"
#include "acida/types.hpp"

namespace acida {

struct IdHyperparams {
  double c = 1.0;
  double gamma = 1e-3;
  bool class_weighting = false;
  bool standardize = true;
  std::uint64_t seed = 0;
};

// Kernel machine over the signed identity difference (document minus live).
struct IdModel {
  BinarySvm svm;

  Eigen::Index dim() const { return svm.input_dim(); }
  TensorArchive to_archive() const { return acida::to_archive(svm); }
  static IdModel from_archive(const TensorArchive& archive);
};

struct IdExample {
  VectorXd doc;
  VectorXd live;
  bool is_morph = false;
};

IdModel train_id(const std::vector<IdExample>& examples, const IdHyperparams& params);

// Morph probability, higher means more likely morphed.
double score_id(const IdModel& model, const Eigen::Ref<const VectorXd>& doc,
                const Eigen::Ref<const VectorXd>& live);

}  // namespace acida
