#pragma once

#include <cstdint>
#include <vector>

#include "acida/tensor_io.hpp"
#include "acida/types.hpp"

namespace acida {

struct SvmParams {
  double c = 1.0;
  double gamma = 1e-3;
  double tolerance = 1e-3;
  // Inverse-frequency per-class penalty scaling.
  bool class_weighting = false;
  // Z-score features with training statistics before the kernel.
  bool standardize = false;
  int calibration_folds = 5;
  std::uint64_t seed = 0;
  long max_iterations = 10'000'000;
};

// Affine feature transform applied before the kernel (identity when unused).
struct FeatureScaler {
  VectorXd mean;
  VectorXd inv_scale;

  static FeatureScaler fit(const MatrixXd& rows);
  static FeatureScaler identity(Eigen::Index dim);
  VectorXd apply(const Eigen::Ref<const VectorXd>& x) const;
  MatrixXd apply_rows(const MatrixXd& rows) const;
};

// f(x) = sum_i coef_i K(sv_i, x) - rho, K(u, v) = exp(-gamma |u - v|^2).
struct RbfDecision {
  MatrixXd support;  // one support vector per row
  VectorXd coef;     // alpha_i * y_i
  double rho = 0.0;
  double gamma = 1e-3;

  double operator()(const Eigen::Ref<const VectorXd>& x) const;
};

// P(positive | f) = 1 / (1 + exp(a f + b)).
struct PlattSigmoid {
  double a = 0.0;
  double b = 0.0;

  double operator()(double decision) const;
};

PlattSigmoid fit_platt(const std::vector<double>& decisions, const std::vector<int>& labels);

// Solves the C-SVC dual on a precomputed Gram matrix restricted to `subset`.
// labels are +1/-1, indexed like the Gram matrix.
struct DualSolution {
  std::vector<double> alpha;  // per subset entry
  double rho = 0.0;
  long iterations = 0;
};

DualSolution solve_svc_dual(const MatrixXd& gram, const std::vector<Eigen::Index>& subset,
                            const std::vector<int>& labels, double c_positive, double c_negative,
                            double tolerance, long max_iterations);

MatrixXd rbf_gram(const MatrixXd& rows, double gamma);

// Binary RBF kernel machine with calibrated probability of the positive class.
struct BinarySvm {
  FeatureScaler scaler;
  RbfDecision decision;
  PlattSigmoid sigmoid;

  double decision_value(const Eigen::Ref<const VectorXd>& x) const;
  double probability(const Eigen::Ref<const VectorXd>& x) const;
  Eigen::Index input_dim() const { return scaler.mean.size(); }
};

// labels: true = positive class.
BinarySvm train_binary_svm(const MatrixXd& rows, const std::vector<bool>& labels,
                           const SvmParams& params);

// One-vs-one RBF machines with pairwise-coupled Platt probabilities.
struct MulticlassSvm {
  int num_classes = 0;
  FeatureScaler scaler;
  // Pair (i, j), i < j, in lexicographic order; positive side is class i.
  std::vector<RbfDecision> decisions;
  std::vector<PlattSigmoid> sigmoids;

  VectorXd probabilities(const Eigen::Ref<const VectorXd>& x) const;
  Eigen::Index input_dim() const { return scaler.mean.size(); }
};

MulticlassSvm train_multiclass_svm(const MatrixXd& rows, const std::vector<int>& classes,
                                   int num_classes, const SvmParams& params);

TensorArchive to_archive(const BinarySvm& model);
BinarySvm binary_svm_from_archive(const TensorArchive& archive);
TensorArchive to_archive(const MulticlassSvm& model);
MulticlassSvm multiclass_svm_from_archive(const TensorArchive& archive);

// Combines pairwise estimates r(i, j) ~ P(i | i or j) into class posteriors.
VectorXd couple_pairwise(const MatrixXd& pairwise);

}  // namespace acida
