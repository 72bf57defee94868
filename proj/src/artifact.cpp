#include "acida/artifact.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "acida/mlp.hpp"

namespace acida {

VectorXd ArtifactExtractor::extract_vector(const VectorXd&) const {
  throw DataError("artifact extractor '" + id() + "' expects an image, got a vector");
}

VectorXd ArtifactExtractor::extract_image(const FaceCrop&) const {
  throw DataError("artifact extractor '" + id() + "' expects a vector, got an image");
}

VectorXd extract_artifact_features(const ArtifactExtractor& extractor, const ArtifactInput& input) {
  VectorXd out = std::holds_alternative<VectorXd>(input)
                     ? extractor.extract_vector(std::get<VectorXd>(input))
                     : extractor.extract_image(std::get<FaceCrop>(input));
  if (out.size() != extractor.dimension()) {
    throw ModelError("artifact extractor '" + extractor.id() + "' produced dimension " +
                     std::to_string(out.size()));
  }
  return out;
}

VectorXd PassthroughExtractor::extract_vector(const VectorXd& input) const {
  if (input.size() != dimension_) {
    throw DataError("passthrough extractor: expected dimension " + std::to_string(dimension_) +
                    ", got " + std::to_string(input.size()));
  }
  return input;
}

VectorXd PrecomputedImageExtractor::extract_image(const FaceCrop& crop) const {
  auto hit = cache_.find(provider_id_, std::string(embedding_key(crop.source_ref)));
  if (!hit) throw DataError("no precomputed artifact features for '" + crop.source_ref + "'");
  return std::move(*hit);
}

// ---------------------------------------------------------------------------
// TinyConvNet
// ---------------------------------------------------------------------------

namespace {

void fill_uniform(MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng);
  }
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double bce(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

TinyConvNet::TinyConvNet(const ConvNetConfig& config) : config_(config) {
  if (config.kernel < 1 || config.input_side < config.kernel || config.filters < 1 ||
      config.pool_grid < 1 || config.pool_grid > config.input_side - config.kernel + 1 ||
      config.output_dim < 1) {
    throw ConfigError("tiny-convnet: invalid geometry");
  }
  std::mt19937_64 rng(config.seed);
  const int patch = 3 * config.kernel * config.kernel;
  filters_.resize(config.filters, patch);
  fill_uniform(filters_, 1.0 / std::sqrt(static_cast<double>(patch)), rng);
  filter_bias_ = VectorXd::Zero(config.filters);
  const int pooled = config.filters * config.pool_grid * config.pool_grid;
  projection_.resize(config.output_dim, pooled);
  fill_uniform(projection_, 1.0 / std::sqrt(static_cast<double>(pooled)), rng);
  projection_bias_ = VectorXd::Zero(config.output_dim);
}

VectorXd TinyConvNet::prepare(const Image& image) const {
  if (image.width <= 0 || image.height <= 0) throw DataError("tiny-convnet: empty image");
  const int s = config_.input_side;
  VectorXd out(3 * s * s);
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < s; ++r) {
      const int sr = r * image.height / s;
      for (int c = 0; c < s; ++c) {
        const int sc = c * image.width / s;
        out(ch * s * s + r * s + c) = image.at(sr, sc, ch) / 255.0 - 0.5;
      }
    }
  }
  return out;
}

MatrixXd TinyConvNet::im2col(const VectorXd& x) const {
  const int s = config_.input_side;
  const int k = config_.kernel;
  const int o = out_side();
  MatrixXd patches(3 * k * k, o * o);
  for (int r = 0; r < o; ++r) {
    for (int c = 0; c < o; ++c) {
      const int col = r * o + c;
      int row = 0;
      for (int ch = 0; ch < 3; ++ch) {
        for (int dr = 0; dr < k; ++dr) {
          for (int dc = 0; dc < k; ++dc) patches(row++, col) = x(ch * s * s + (r + dr) * s + c + dc);
        }
      }
    }
  }
  return patches;
}

VectorXd TinyConvNet::forward(const VectorXd& prepared, Trace* trace) const {
  const int s = config_.input_side;
  if (prepared.size() != 3 * s * s) throw DataError("tiny-convnet: prepared input size mismatch");
  const int o = out_side();
  const int g = config_.pool_grid;
  MatrixXd patches = im2col(prepared);
  MatrixXd act = ((filters_ * patches).colwise() + filter_bias_).cwiseMax(0.0);
  VectorXd pooled = VectorXd::Zero(config_.filters * g * g);
  for (int gr = 0; gr < g; ++gr) {
    const int r0 = gr * o / g;
    const int r1 = (gr + 1) * o / g;
    for (int gc = 0; gc < g; ++gc) {
      const int c0 = gc * o / g;
      const int c1 = (gc + 1) * o / g;
      const double inv = 1.0 / static_cast<double>((r1 - r0) * (c1 - c0));
      for (int f = 0; f < config_.filters; ++f) {
        double sum = 0.0;
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c) sum += act(f, r * o + c);
        }
        pooled(f * g * g + gr * g + gc) = sum * inv;
      }
    }
  }
  VectorXd out = projection_ * pooled + projection_bias_;
  if (trace != nullptr) {
    trace->patches = std::move(patches);
    trace->activation = std::move(act);
    trace->pooled = std::move(pooled);
  }
  return out;
}

VectorXd TinyConvNet::extract_image(const FaceCrop& crop) const {
  return forward(prepare(crop.image));
}

TinyConvNet::Gradients TinyConvNet::zero_gradients() const {
  return {MatrixXd::Zero(filters_.rows(), filters_.cols()), VectorXd::Zero(filter_bias_.size()),
          MatrixXd::Zero(projection_.rows(), projection_.cols()),
          VectorXd::Zero(projection_bias_.size())};
}

void TinyConvNet::backward(const Trace& trace, const VectorXd& output_grad,
                           Gradients& grads) const {
  const int o = out_side();
  const int g = config_.pool_grid;
  grads.projection.noalias() += output_grad * trace.pooled.transpose();
  grads.projection_bias += output_grad;
  const VectorXd pooled_grad = projection_.transpose() * output_grad;

  MatrixXd act_grad = MatrixXd::Zero(trace.activation.rows(), trace.activation.cols());
  for (int gr = 0; gr < g; ++gr) {
    const int r0 = gr * o / g;
    const int r1 = (gr + 1) * o / g;
    for (int gc = 0; gc < g; ++gc) {
      const int c0 = gc * o / g;
      const int c1 = (gc + 1) * o / g;
      const double inv = 1.0 / static_cast<double>((r1 - r0) * (c1 - c0));
      for (int f = 0; f < config_.filters; ++f) {
        const double grad = pooled_grad(f * g * g + gr * g + gc) * inv;
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c) {
            if (trace.activation(f, r * o + c) > 0.0) act_grad(f, r * o + c) = grad;
          }
        }
      }
    }
  }
  grads.filters.noalias() += act_grad * trace.patches.transpose();
  grads.filter_bias += act_grad.rowwise().sum();
}

void TinyConvNet::apply_sgd(const Gradients& grads, double learning_rate) {
  filters_ -= learning_rate * grads.filters;
  filter_bias_ -= learning_rate * grads.filter_bias;
  projection_ -= learning_rate * grads.projection;
  projection_bias_ -= learning_rate * grads.projection_bias;
}

TensorArchive TinyConvNet::to_archive() const {
  TensorArchive a;
  a.put_string("extractor", id());
  a.put_scalar("input_side", config_.input_side);
  a.put_scalar("kernel", config_.kernel);
  a.put_scalar("filters", config_.filters);
  a.put_scalar("pool_grid", config_.pool_grid);
  a.put("conv.weight", filters_);
  a.put_vector("conv.bias", filter_bias_);
  a.put("proj.weight", projection_);
  a.put_vector("proj.bias", projection_bias_);
  return a;
}

TinyConvNet TinyConvNet::from_archive(const TensorArchive& a) {
  ConvNetConfig config;
  config.input_side = static_cast<int>(a.get_scalar("input_side"));
  config.kernel = static_cast<int>(a.get_scalar("kernel"));
  config.filters = static_cast<int>(a.get_scalar("filters"));
  config.pool_grid = static_cast<int>(a.get_scalar("pool_grid"));
  config.output_dim = a.get("proj.weight").rows();
  TinyConvNet net(config);
  net.filters_ = a.get("conv.weight");
  net.filter_bias_ = a.get_vector("conv.bias");
  net.projection_ = a.get("proj.weight");
  net.projection_bias_ = a.get_vector("proj.bias");
  if (net.filters_.rows() != config.filters ||
      net.filters_.cols() != 3 * config.kernel * config.kernel ||
      net.projection_.cols() != config.filters * config.pool_grid * config.pool_grid) {
    throw ModelError("tiny-convnet: stored tensor shapes do not match geometry");
  }
  return net;
}

ExtractorTrainingLog finetune_extractor(TinyConvNet& net, const std::vector<FaceCrop>& train,
                                        const std::vector<bool>& train_is_morph,
                                        const std::vector<FaceCrop>& validation,
                                        const std::vector<bool>& validation_is_morph,
                                        const ExtractorTrainingParams& params) {
  if (train.size() != train_is_morph.size() || validation.size() != validation_is_morph.size()) {
    throw ModelError("extractor: label count mismatch");
  }
  if (std::count(train_is_morph.begin(), train_is_morph.end(), true) == 0 ||
      std::count(train_is_morph.begin(), train_is_morph.end(), false) == 0) {
    throw ModelError("extractor: fine-tuning needs both morph and bona fide crops");
  }
  std::vector<VectorXd> xs;
  for (const auto& c : train) xs.push_back(net.prepare(c.image));
  std::vector<VectorXd> vs;
  for (const auto& c : validation) vs.push_back(net.prepare(c.image));
  const bool use_train_for_val = vs.empty();

  VectorXd head = VectorXd::Zero(net.dimension());
  double head_bias = 0.0;
  auto mean_loss = [&](const std::vector<VectorXd>& inputs, const std::vector<bool>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      total += bce(head.dot(net.forward(inputs[i])) + head_bias, labels[i] ? 1.0 : 0.0);
    }
    return total / static_cast<double>(inputs.size());
  };

  ExtractorTrainingLog log;
  EarlyStopping stopper(params.patience, params.min_delta);
  TinyConvNet best = net;
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.seed);
  const auto batch = static_cast<std::size_t>(std::max(1, params.batch_size));
  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      TinyConvNet::Gradients grads = net.zero_gradients();
      VectorXd head_grad = VectorXd::Zero(head.size());
      double head_bias_grad = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        TinyConvNet::Trace trace;
        const VectorXd feat = net.forward(xs[order[k]], &trace);
        const double y = train_is_morph[order[k]] ? 1.0 : 0.0;
        const double z = head.dot(feat) + head_bias;
        epoch_loss += bce(z, y);
        const double dz = (sigmoid(z) - y) * scale;
        head_grad += dz * feat;
        head_bias_grad += dz;
        net.backward(trace, dz * head, grads);
      }
      net.apply_sgd(grads, params.learning_rate);
      head -= params.learning_rate * head_grad;
      head_bias -= params.learning_rate * head_bias_grad;
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(xs.size()));
    const double val = use_train_for_val ? mean_loss(xs, train_is_morph)
                                         : mean_loss(vs, validation_is_morph);
    if (!std::isfinite(val)) throw ModelError("extractor: non-finite validation loss");
    log.validation_loss.push_back(val);
    if (stopper.update(val)) {
      best = net;
      log.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  net = best;
  return log;
}

}  // namespace acida
