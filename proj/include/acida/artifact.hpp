#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "acida/embeddings.hpp"
#include "acida/tensor_io.hpp"
#include "acida/types.hpp"

namespace acida {

enum class ArtifactModality { Vector, Image };

// A document is presented either as a face crop or, on the synthetic path, as
// a precomputed artifact vector.
using ArtifactInput = std::variant<FaceCrop, VectorXd>;

// Document-only feature extractor feeding the artifact part of the IdA input.
class ArtifactExtractor {
 public:
  virtual ~ArtifactExtractor() = default;
  virtual std::string id() const = 0;
  virtual Eigen::Index dimension() const = 0;
  virtual ArtifactModality modality() const = 0;
  virtual bool trainable() const { return false; }

  virtual VectorXd extract_vector(const VectorXd& input) const;
  virtual VectorXd extract_image(const FaceCrop& crop) const;

  virtual TensorArchive to_archive() const { return {}; }
};

VectorXd extract_artifact_features(const ArtifactExtractor& extractor, const ArtifactInput& input);

// Returns stored artifact vectors unchanged (synthetic test path).
class PassthroughExtractor : public ArtifactExtractor {
 public:
  explicit PassthroughExtractor(Eigen::Index dimension) : dimension_(dimension) {}
  std::string id() const override { return "passthrough"; }
  Eigen::Index dimension() const override { return dimension_; }
  ArtifactModality modality() const override { return ArtifactModality::Vector; }
  VectorXd extract_vector(const VectorXd& input) const override;

 private:
  Eigen::Index dimension_;
};

// Adapter for a pretrained image network whose features were extracted
// offline: looks the crop's source reference up in the embedding cache under
// the network's provider id.
class PrecomputedImageExtractor : public ArtifactExtractor {
 public:
  PrecomputedImageExtractor(std::string provider_id, Eigen::Index dimension,
                            const EmbeddingCache& cache)
      : provider_id_(std::move(provider_id)), dimension_(dimension), cache_(cache) {}
  std::string id() const override { return "precomputed:" + provider_id_; }
  Eigen::Index dimension() const override { return dimension_; }
  ArtifactModality modality() const override { return ArtifactModality::Image; }
  VectorXd extract_image(const FaceCrop& crop) const override;

 private:
  std::string provider_id_;
  Eigen::Index dimension_;
  const EmbeddingCache& cache_;
};

struct ConvNetConfig {
  int input_side = 32;   // crops are resized to input_side x input_side
  int kernel = 5;
  int filters = 8;
  int pool_grid = 4;     // average pooling onto a pool_grid x pool_grid map
  Eigen::Index output_dim = 64;
  std::uint64_t seed = 0;
};

// Small convolutional extractor for tiny images:
// conv(k x k, valid) -> ReLU -> grid average pool -> linear.
class TinyConvNet : public ArtifactExtractor {
 public:
  explicit TinyConvNet(const ConvNetConfig& config);

  std::string id() const override { return "tiny-convnet"; }
  Eigen::Index dimension() const override { return projection_.rows(); }
  ArtifactModality modality() const override { return ArtifactModality::Image; }
  bool trainable() const override { return true; }
  VectorXd extract_image(const FaceCrop& crop) const override;

  // Resized, centred input as (3 * side * side) column, channel-major.
  VectorXd prepare(const Image& image) const;
  // Forward from a prepared input; optionally records intermediates for backprop.
  struct Trace {
    MatrixXd patches;     // (3 k k) x positions
    MatrixXd activation;  // filters x positions, post-ReLU
    VectorXd pooled;
  };
  VectorXd forward(const VectorXd& prepared, Trace* trace = nullptr) const;

  struct Gradients {
    MatrixXd filters;
    VectorXd filter_bias;
    MatrixXd projection;
    VectorXd projection_bias;
  };
  // Accumulates parameter gradients given dLoss/dOutput.
  void backward(const Trace& trace, const VectorXd& output_grad, Gradients& grads) const;
  Gradients zero_gradients() const;
  void apply_sgd(const Gradients& grads, double learning_rate);

  TensorArchive to_archive() const override;
  static TinyConvNet from_archive(const TensorArchive& archive);

  const ConvNetConfig& config() const { return config_; }

 private:
  int out_side() const { return config_.input_side - config_.kernel + 1; }
  MatrixXd im2col(const VectorXd& prepared) const;

  ConvNetConfig config_;
  MatrixXd filters_;  // filters x (3 k k)
  VectorXd filter_bias_;
  MatrixXd projection_;  // output_dim x (filters * grid * grid)
  VectorXd projection_bias_;
};

struct ExtractorTrainingParams {
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int patience = 5;
  double min_delta = 1e-4;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct ExtractorTrainingLog {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
};

// Fine-tunes the extractor with plain SGD (no momentum) through a temporary
// logistic head on morph / bona fide supervision; keeps the best-validation weights.
ExtractorTrainingLog finetune_extractor(TinyConvNet& net, const std::vector<FaceCrop>& train,
                                        const std::vector<bool>& train_is_morph,
                                        const std::vector<FaceCrop>& validation,
                                        const std::vector<bool>& validation_is_morph,
                                        const ExtractorTrainingParams& params);

}  // namespace acida
