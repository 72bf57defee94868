#include "acida/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acida/io_util.hpp"

namespace acida {

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.provider_id != b.provider_id) {
    throw DataError("cosine_similarity: embeddings from different providers ('" + a.provider_id +
                    "' vs '" + b.provider_id + "')");
  }
  return cosine_similarity(a.values, b.values);
}

IdentityArtifactFeatures concat_features(const Eigen::Ref<const VectorXd>& diff, double cosine,
                                         const Eigen::Ref<const VectorXd>& artifact,
                                         std::optional<Eigen::Index> expected_identity_dim,
                                         std::optional<Eigen::Index> expected_artifact_dim) {
  if (expected_identity_dim && diff.size() != *expected_identity_dim) {
    throw DataError("concat_features: identity part has length " + std::to_string(diff.size()) +
                    ", expected " + std::to_string(*expected_identity_dim));
  }
  if (expected_artifact_dim && artifact.size() != *expected_artifact_dim) {
    throw DataError("concat_features: artifact part has length " +
                    std::to_string(artifact.size()) + ", expected " +
                    std::to_string(*expected_artifact_dim));
  }
  IdentityArtifactFeatures out;
  out.identity_dim = diff.size();
  out.artifact_dim = artifact.size();
  out.values.resize(feature_length(out.identity_dim, out.artifact_dim));
  out.values << diff, cosine, artifact;
  return out;
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

namespace {

class PnmReader {
 public:
  explicit PnmReader(const std::string& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      out.push_back(bytes_[pos_++]);
    }
    return out;
  }

  int integer() {
    const std::string t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), ::isdigit)) {
      throw DataError("undecodable image: bad header field '" + t + "'");
    }
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates the header from binary data.
  void skip_single_space() { ++pos_; }
  std::size_t remaining() const { return pos_ < bytes_.size() ? bytes_.size() - pos_ : 0; }
  const char* cursor() const { return bytes_.data() + pos_; }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_image_bytes(const std::string& bytes) {
  PnmReader reader(bytes);
  const std::string magic = reader.token();
  if (magic != "P6" && magic != "P3") throw DataError("undecodable image: unsupported format");
  Image image;
  image.width = reader.integer();
  image.height = reader.integer();
  const int maxval = reader.integer();
  if (image.width <= 0 || image.height <= 0 || maxval <= 0 || maxval > 255) {
    throw DataError("undecodable image: unsupported dimensions or depth");
  }
  const std::size_t count = static_cast<std::size_t>(image.width) * image.height * 3;
  image.pixels.resize(count);
  if (magic == "P6") {
    reader.skip_single_space();
    if (reader.remaining() < count) throw DataError("undecodable image: truncated pixel data");
    std::memcpy(image.pixels.data(), reader.cursor(), count);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = reader.integer();
      if (v > maxval) throw DataError("undecodable image: sample exceeds maxval");
      image.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(p * 255 / maxval);
  }
  return image;
}

Image decode_image(const std::filesystem::path& path) {
  return decode_image_bytes(read_file(path));
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

FaceCrop crop_face(const Image& image, std::string source_ref, const CropConfig& config,
                   const FaceDetector* detector) {
  if (image.width <= 0 || image.height <= 0) throw DataError("crop_face: empty image");
  if (config.passthrough) return FaceCrop{image, std::move(source_ref)};
  if (detector == nullptr) throw ConfigError("crop_face: no face detector configured");

  const auto boxes = detector->detect(image);
  if (boxes.empty()) throw DataError("no face found in " + source_ref);
  const FaceBox best = *std::max_element(
      boxes.begin(), boxes.end(),
      [](const FaceBox& a, const FaceBox& b) { return a.confidence < b.confidence; });

  const int x0 = std::clamp(best.x, 0, image.width);
  const int y0 = std::clamp(best.y, 0, image.height);
  const int x1 = std::clamp(best.x + best.width, 0, image.width);
  const int y1 = std::clamp(best.y + best.height, 0, image.height);
  if (x1 <= x0 || y1 <= y0) throw DataError("no face found in " + source_ref);

  FaceCrop crop;
  crop.source_ref = std::move(source_ref);
  crop.image.width = x1 - x0;
  crop.image.height = y1 - y0;
  crop.image.pixels.reserve(static_cast<std::size_t>(crop.image.width) * crop.image.height * 3);
  for (int r = y0; r < y1; ++r) {
    for (int c = x0; c < x1; ++c) {
      for (int ch = 0; ch < 3; ++ch) crop.image.pixels.push_back(image.at(r, c, ch));
    }
  }
  return crop;
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

VectorXd PrecomputedProvider::embed(const FaceCrop& crop) const {
  throw DataError("provider '" + id_ + "' serves precomputed vectors only; cannot embed image '" +
                  crop.source_ref + "'");
}

PixelProjectionProvider::PixelProjectionProvider(Eigen::Index dimension, std::uint64_t seed,
                                                 int side)
    : seed_(seed), side_(side) {
  if (dimension < 1 || side < 1) throw ConfigError("pixel projection: invalid dimension");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  projection_.resize(dimension, static_cast<Eigen::Index>(side) * side * 3);
  for (Eigen::Index j = 0; j < projection_.cols(); ++j) {
    for (Eigen::Index i = 0; i < projection_.rows(); ++i) projection_(i, j) = normal(rng);
  }
}

std::string PixelProjectionProvider::id() const {
  return "pixel-projection-" + std::to_string(seed_);
}

VectorXd PixelProjectionProvider::embed(const FaceCrop& crop) const {
  const Image& img = crop.image;
  if (img.width <= 0 || img.height <= 0) throw DataError("pixel projection: empty crop");
  // Nearest-neighbour resize to side x side, centred intensities.
  VectorXd input(projection_.cols());
  Eigen::Index k = 0;
  for (int r = 0; r < side_; ++r) {
    const int sr = r * img.height / side_;
    for (int c = 0; c < side_; ++c) {
      const int sc = c * img.width / side_;
      for (int ch = 0; ch < 3; ++ch) input(k++) = img.at(sr, sc, ch) / 255.0 - 0.5;
    }
  }
  VectorXd out = projection_ * input;
  const double n = out.norm();
  if (n > 0.0) out /= n;
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec, Eigen::Index dimension,
                                                 std::uint64_t seed) {
  if (spec == "synthetic") return std::make_unique<PrecomputedProvider>("synthetic", dimension);
  if (spec.starts_with("precomputed:")) {
    return std::make_unique<PrecomputedProvider>(spec.substr(12), dimension);
  }
  if (spec == "pixel-projection") return std::make_unique<PixelProjectionProvider>(dimension, seed);
  throw ConfigError("unknown embedding provider '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "embedding cache layout assumes a little-endian host");

constexpr int kCacheVersion = 1;

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  const auto index_path = directory_ / "index.json";
  if (!std::filesystem::exists(index_path)) return;
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("embedding cache index is corrupt: " + std::string(e.what()));
  }
  if (index.value("version", 0) != kCacheVersion) {
    throw DataError("embedding cache version mismatch in " + index_path.string());
  }
  const std::string blob = read_file(directory_ / "vectors.bin");
  for (const auto& rec : index.at("records")) {
    const auto offset = rec.at("offset").get<std::size_t>();
    const auto dim = rec.at("dim").get<std::size_t>();
    if ((offset + dim) * sizeof(float) > blob.size()) {
      throw DataError("embedding cache record out of bounds in " + index_path.string());
    }
    std::vector<float> values(dim);
    std::memcpy(values.data(), blob.data() + offset * sizeof(float), dim * sizeof(float));
    records_[{rec.at("provider").get<std::string>(), rec.at("key").get<std::string>()}] =
        std::move(values);
  }
}

std::optional<VectorXd> EmbeddingCache::find(const std::string& provider_id,
                                             const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = records_.find({provider_id, key});
  if (it == records_.end()) return std::nullopt;
  return Eigen::Map<const Eigen::VectorXf>(it->second.data(),
                                           static_cast<Eigen::Index>(it->second.size()))
      .cast<double>()
      .eval();
}

bool EmbeddingCache::contains(const std::string& provider_id, const std::string& key) const {
  std::shared_lock lock(mutex_);
  return records_.contains({provider_id, key});
}

VectorXd EmbeddingCache::insert(const std::string& provider_id, const std::string& key,
                                const VectorXd& values) {
  std::vector<float> stored(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) stored[i] = static_cast<float>(values(i));
  VectorXd rounded = Eigen::Map<const Eigen::VectorXf>(stored.data(), values.size()).cast<double>();
  std::unique_lock lock(mutex_);
  records_[{provider_id, key}] = std::move(stored);
  return rounded;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void EmbeddingCache::save() const {
  if (directory_.empty()) throw DataError("embedding cache has no directory");
  save(directory_);
}

void EmbeddingCache::save(const std::filesystem::path& directory) const {
  std::shared_lock lock(mutex_);
  nlohmann::json records = nlohmann::json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const auto& [key, values] : records_) {
    records.push_back({{"provider", key.first},
                       {"key", key.second},
                       {"offset", offset},
                       {"dim", values.size()}});
    blob.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    offset += values.size();
  }
  nlohmann::json index = {{"version", kCacheVersion}, {"dtype", "float32-le"}, {"records", records}};
  std::filesystem::create_directories(directory);
  write_file_atomic(directory / "vectors.bin", blob);
  write_file_atomic(directory / "index.json", index.dump(1));
}

std::filesystem::path EmbeddingCache::default_directory(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("ACIDA_CACHE_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

Embedding get_embedding(const EmbeddingProvider& provider, const FaceCrop& crop,
                        EmbeddingCache& cache, std::optional<Eigen::Index> expected_dim) {
  const Eigen::Index dim = expected_dim.value_or(provider.dimension());
  const std::string provider_id = provider.id();
  if (auto hit = cache.find(provider_id, crop.source_ref)) {
    if (hit->size() != dim) {
      throw DataError("cached embedding for '" + crop.source_ref + "' has dimension " +
                      std::to_string(hit->size()) + ", expected " + std::to_string(dim));
    }
    return {std::move(*hit), provider_id};
  }
  VectorXd values = provider.embed(crop);
  if (values.size() != dim) {
    throw ModelError("provider '" + provider_id + "' returned dimension " +
                     std::to_string(values.size()) + ", expected " + std::to_string(dim));
  }
  if (!values.allFinite()) throw ModelError("provider '" + provider_id + "' returned non-finite values");
  return {cache.insert(provider_id, crop.source_ref, values), provider_id};
}

Embedding EmbeddingResolver::resolve(const std::string& ref) const {
  if (is_embedding_ref(ref)) {
    const std::string key(embedding_key(ref));
    auto hit = cache_.find(provider_.id(), key);
    if (!hit) throw DataError("unresolvable embedding reference '" + ref + "'");
    if (hit->size() != provider_.dimension()) {
      throw DataError("embedding '" + ref + "' has dimension " + std::to_string(hit->size()) +
                      ", expected " + std::to_string(provider_.dimension()));
    }
    return {std::move(*hit), provider_.id()};
  }
  if (auto hit = cache_.find(provider_.id(), ref)) {
    return get_embedding(provider_, FaceCrop{{}, ref}, cache_);
  }
  if (!provider_.accepts_images()) {
    throw DataError("provider '" + provider_.id() + "' cannot embed image reference '" + ref + "'");
  }
  const Image image = decode_image(ref);
  return get_embedding(provider_, crop_face(image, ref, crop_, detector_), cache_);
}

bool EmbeddingResolver::resolvable(const std::string& ref) const {
  if (is_embedding_ref(ref)) return cache_.contains(provider_.id(), std::string(embedding_key(ref)));
  if (cache_.contains(provider_.id(), ref)) return true;
  return provider_.accepts_images() && std::filesystem::is_regular_file(ref);
}

}  // namespace acida
