#pragma once

#include <limits>
#include <cstdint>
#include <string>
#include <vector>

#include "acida/tensor_io.hpp"
#include "acida/types.hpp"

namespace acida {

struct DenseLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;
};

// Feed-forward binary classifier: ReLU hidden layers, one sigmoid output unit.
// Inputs are columns of a features x batch matrix.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Eigen::Index input_dim, const std::vector<int>& hidden, std::uint64_t seed);

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Pre-sigmoid outputs, 1 x batch.
  Eigen::RowVectorXd logits(const MatrixXd& inputs) const;
  // Probabilities kept strictly inside (0, 1).
  Eigen::RowVectorXd predict(const MatrixXd& inputs) const;
  double predict_one(const Eigen::Ref<const VectorXd>& input) const;

  struct Gradients {
    std::vector<MatrixXd> weight;
    std::vector<VectorXd> bias;
  };

  // Mean binary cross-entropy over the batch and its parameter gradients.
  // `input_grad`, when given, receives dLoss/dInputs (features x batch).
  double loss_and_gradients(const MatrixXd& inputs, const Eigen::RowVectorXd& targets,
                            Gradients& grads, MatrixXd* input_grad = nullptr) const;
  double loss(const MatrixXd& inputs, const Eigen::RowVectorXd& targets) const;

  Eigen::Index parameter_count() const;
  VectorXd flat_parameters() const;
  void set_flat_parameters(const VectorXd& flat);
  VectorXd flatten(const Gradients& grads) const;

  // Stable identifier of the layer layout and activations.
  std::string architecture() const;
  std::string architecture_hash() const;

  TensorArchive to_archive() const;
  static Mlp from_archive(const TensorArchive& archive);

  static constexpr double kOutputEpsilon = 1e-12;

 private:
  std::vector<DenseLayer> layers_;
};

class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(VectorXd& params, const VectorXd& grad);

 private:
  VectorXd m_;
  VectorXd v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

// Stops when the monitored loss has not improved by more than min_delta for
// `patience` consecutive epochs.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  // Returns true when the new value is the best so far.
  bool update(double loss);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

struct FitParams {
  double learning_rate = 1e-5;
  int batch_size = 64;
  int max_epochs = 100;
  int patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
};

struct FitLog {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  bool early_stopped = false;
};

// Mini-batch Adam on mean binary cross-entropy. Inputs are one column per
// example. Early stopping watches the validation loss, or the training loss
// when no validation columns are given; the best weights are restored.
FitLog fit_binary(Mlp& mlp, const MatrixXd& inputs, const Eigen::RowVectorXd& targets,
                  const MatrixXd& val_inputs, const Eigen::RowVectorXd& val_targets,
                  const FitParams& params);

}  // namespace acida
