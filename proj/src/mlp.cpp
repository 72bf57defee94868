#include "acida/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace acida {

namespace {

double stable_sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// softplus(z) - y z, the binary cross-entropy of sigmoid(z) against y.
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Mlp::Mlp(Eigen::Index input_dim, const std::vector<int>& hidden, std::uint64_t seed) {
  if (input_dim < 1) throw ConfigError("mlp: input dimension must be positive");
  std::mt19937_64 rng(seed);
  Eigen::Index fan_in = input_dim;
  std::vector<int> widths = hidden;
  widths.push_back(1);
  for (int width : widths) {
    if (width < 1) throw ConfigError("mlp: layer widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(width, fan_in);
    layer.bias.resize(width);
    for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = uniform(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = uniform(rng);
    layers_.push_back(std::move(layer));
    fan_in = width;
  }
}

Eigen::RowVectorXd Mlp::logits(const MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) throw DataError("mlp: input length mismatch");
  MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.row(0);
}

Eigen::RowVectorXd Mlp::predict(const MatrixXd& inputs) const {
  return logits(inputs).unaryExpr([](double z) {
    return std::clamp(stable_sigmoid(z), kOutputEpsilon, 1.0 - kOutputEpsilon);
  });
}

double Mlp::predict_one(const Eigen::Ref<const VectorXd>& input) const {
  return predict(MatrixXd(input))(0);
}

double Mlp::loss(const MatrixXd& inputs, const Eigen::RowVectorXd& targets) const {
  const Eigen::RowVectorXd z = logits(inputs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += bce_with_logit(z(i), targets(i));
  return total / static_cast<double>(z.size());
}

double Mlp::loss_and_gradients(const MatrixXd& inputs, const Eigen::RowVectorXd& targets,
                               Gradients& grads, MatrixXd* input_grad) const {
  if (inputs.rows() != input_dim()) throw DataError("mlp: input length mismatch");
  if (targets.size() != inputs.cols()) throw DataError("mlp: target count mismatch");
  const std::size_t depth = layers_.size();
  const auto batch = static_cast<double>(inputs.cols());

  // activations[l] is the input to layer l.
  std::vector<MatrixXd> activations;
  activations.reserve(depth + 1);
  activations.push_back(inputs);
  for (std::size_t l = 0; l < depth; ++l) {
    MatrixXd z = (layers_[l].weight * activations.back()).colwise() + layers_[l].bias;
    if (l + 1 < depth) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }
  const Eigen::RowVectorXd z = activations.back().row(0);
  double total = 0.0;
  MatrixXd delta(1, z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += bce_with_logit(z(i), targets(i));
    delta(0, i) = (stable_sigmoid(z(i)) - targets(i)) / batch;
  }

  grads.weight.resize(depth);
  grads.bias.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    grads.weight[l] = delta * activations[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    if (l > 0) {
      MatrixXd back = layers_[l].weight.transpose() * delta;
      // ReLU derivative; activations[l] holds the post-ReLU output of layer l-1.
      delta = (activations[l].array() > 0.0).select(back, 0.0);
    } else if (input_grad != nullptr) {
      *input_grad = layers_[0].weight.transpose() * delta;
    }
  }
  return total / batch;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

VectorXd Mlp::flat_parameters() const {
  VectorXd flat(parameter_count());
  Eigen::Index k = 0;
  for (const auto& layer : layers_) {
    flat.segment(k, layer.weight.size()) = layer.weight.reshaped();
    k += layer.weight.size();
    flat.segment(k, layer.bias.size()) = layer.bias;
    k += layer.bias.size();
  }
  return flat;
}

void Mlp::set_flat_parameters(const VectorXd& flat) {
  if (flat.size() != parameter_count()) throw DataError("mlp: parameter vector size mismatch");
  Eigen::Index k = 0;
  for (auto& layer : layers_) {
    layer.weight.reshaped() = flat.segment(k, layer.weight.size());
    k += layer.weight.size();
    layer.bias = flat.segment(k, layer.bias.size());
    k += layer.bias.size();
  }
}

VectorXd Mlp::flatten(const Gradients& grads) const {
  VectorXd flat(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    flat.segment(k, grads.weight[l].size()) = grads.weight[l].reshaped();
    k += grads.weight[l].size();
    flat.segment(k, grads.bias[l].size()) = grads.bias[l];
    k += grads.bias[l].size();
  }
  return flat;
}

std::string Mlp::architecture() const {
  std::string out = "mlp:" + std::to_string(input_dim());
  for (const auto& layer : layers_) out += "-" + std::to_string(layer.weight.rows());
  return out + ":relu:sigmoid";
}

std::string Mlp::architecture_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : architecture()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TensorArchive Mlp::to_archive() const {
  TensorArchive a;
  a.put_scalar("depth", static_cast<double>(layers_.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    a.put("layer" + std::to_string(l) + ".weight", layers_[l].weight);
    a.put_vector("layer" + std::to_string(l) + ".bias", layers_[l].bias);
  }
  a.put_string("architecture", architecture());
  return a;
}

Mlp Mlp::from_archive(const TensorArchive& archive) {
  Mlp mlp;
  const auto depth = static_cast<std::size_t>(archive.get_scalar("depth"));
  for (std::size_t l = 0; l < depth; ++l) {
    DenseLayer layer{archive.get("layer" + std::to_string(l) + ".weight"),
                     archive.get_vector("layer" + std::to_string(l) + ".bias")};
    if (layer.bias.size() != layer.weight.rows() ||
        (l > 0 && layer.weight.cols() != mlp.layers_.back().weight.rows())) {
      throw ModelError("mlp: inconsistent layer shapes");
    }
    mlp.layers_.push_back(std::move(layer));
  }
  if (mlp.layers_.empty() || mlp.layers_.back().weight.rows() != 1) {
    throw ModelError("mlp: network must end in a single output unit");
  }
  if (archive.get_string("architecture") != mlp.architecture()) {
    throw ModelError("mlp: architecture record does not match stored layers");
  }
  return mlp;
}

AdamOptimizer::AdamOptimizer(Eigen::Index size, double learning_rate, double beta1, double beta2,
                             double epsilon)
    : m_(VectorXd::Zero(size)),
      v_(VectorXd::Zero(size)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {}

void AdamOptimizer::step(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

bool EarlyStopping::update(double loss) {
  if (loss < best_ - min_delta_) {
    best_ = loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

FitLog fit_binary(Mlp& mlp, const MatrixXd& inputs, const Eigen::RowVectorXd& targets,
                  const MatrixXd& val_inputs, const Eigen::RowVectorXd& val_targets,
                  const FitParams& params) {
  if (params.batch_size < 1 || params.max_epochs < 1) throw ConfigError("mlp: invalid schedule");
  if (!(params.learning_rate > 0.0)) throw ConfigError("mlp: learning rate must be positive");
  if (inputs.cols() == 0) throw ModelError("mlp: no training examples");
  const bool has_validation = val_inputs.cols() > 0;

  FitLog log;
  AdamOptimizer adam(mlp.parameter_count(), params.learning_rate);
  EarlyStopping stopper(params.patience, params.min_delta);
  VectorXd flat = mlp.flat_parameters();
  VectorXd best = flat;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(params.seed ^ 0x5eedULL);
  Mlp::Gradients grads;
  const auto batch_size = static_cast<std::size_t>(params.batch_size);

  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      const auto b = static_cast<Eigen::Index>(stop - start);
      MatrixXd batch(inputs.rows(), b);
      Eigen::RowVectorXd batch_targets(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const Eigen::Index src = order[start + static_cast<std::size_t>(k)];
        batch.col(k) = inputs.col(src);
        batch_targets(k) = targets(src);
      }
      const double loss = mlp.loss_and_gradients(batch, batch_targets, grads);
      if (!std::isfinite(loss)) throw ModelError("mlp: non-finite training loss");
      epoch_loss += loss * static_cast<double>(b);
      adam.step(flat, mlp.flatten(grads));
      mlp.set_flat_parameters(flat);
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(inputs.cols()));
    const double monitored =
        has_validation ? mlp.loss(val_inputs, val_targets) : mlp.loss(inputs, targets);
    if (!std::isfinite(monitored)) throw ModelError("mlp: non-finite validation loss");
    log.validation_loss.push_back(monitored);
    if (stopper.update(monitored)) {
      best = flat;
      log.best_epoch = epoch;
    }
    if (stopper.should_stop()) {
      log.early_stopped = true;
      break;
    }
  }
  mlp.set_flat_parameters(best);
  return log;
}

}  // namespace acida
