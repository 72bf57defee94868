#include "acida/bundle.hpp"

#include "acida/io_util.hpp"

namespace acida {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "acida-pipeline-bundle";

json summary_json(const TrainingSummary& s) {
  return {{"train_pairs", s.train_pairs},
          {"validation_pairs", s.validation_pairs},
          {"ac_train_accuracy", s.ac_train_accuracy},
          {"ida_epochs", s.ida_epochs},
          {"ida_best_epoch", s.ida_best_epoch},
          {"ida_best_validation_loss", s.ida_best_validation_loss},
          {"extractor_epochs", s.extractor_epochs},
          {"artifact_head_epochs", s.artifact_head_epochs},
          {"seconds", s.seconds}};
}

TrainingSummary summary_from_json(const json& j) {
  TrainingSummary s;
  s.train_pairs = j.at("train_pairs").get<std::size_t>();
  s.validation_pairs = j.at("validation_pairs").get<std::size_t>();
  s.ac_train_accuracy = j.at("ac_train_accuracy").get<double>();
  s.ida_epochs = j.at("ida_epochs").get<int>();
  s.ida_best_epoch = j.at("ida_best_epoch").get<int>();
  s.ida_best_validation_loss = j.at("ida_best_validation_loss").get<double>();
  s.extractor_epochs = j.at("extractor_epochs").get<int>();
  s.artifact_head_epochs = j.at("artifact_head_epochs").get<int>();
  s.seconds = j.at("seconds").get<double>();
  return s;
}

TensorArchive load_part(const std::filesystem::path& directory, const char* name) {
  try {
    return TensorArchive::load(directory / name);
  } catch (const Error& e) {
    throw ModelError(std::string("bundle part ") + name + ": " + e.what());
  }
}

}  // namespace

std::shared_ptr<const ArtifactExtractor> make_extractor(const RunConfig& config,
                                                        const EmbeddingCache& cache,
                                                        const TinyConvNet* trained) {
  const std::string& kind = config.ida.extractor;
  if (kind == "passthrough") return std::make_shared<PassthroughExtractor>(config.ida.artifact_dim);
  if (kind == "tiny-convnet") {
    if (trained != nullptr) return std::make_shared<TinyConvNet>(*trained);
    ConvNetConfig net = config.ida.convnet;
    net.output_dim = config.ida.artifact_dim;
    return std::make_shared<TinyConvNet>(net);
  }
  if (kind.starts_with("precomputed:") && kind.size() > 12) {
    return std::make_shared<PrecomputedImageExtractor>(kind.substr(12), config.ida.artifact_dim,
                                                       cache);
  }
  throw ConfigError("config key 'ida.extractor': unknown extractor '" + kind + "'");
}

void save_bundle(const PipelineBundle& bundle, const std::filesystem::path& directory) {
  if (!bundle.extractor) throw ModelError("bundle has no artifact extractor");
  std::filesystem::create_directories(directory);
  bundle.pipeline.ac.to_archive().save(directory / "ac.model");
  bundle.pipeline.id.to_archive().save(directory / "id.model");
  bundle.pipeline.ida.to_archive().save(directory / "ida.head");
  bundle.artifact_head.to_archive().save(directory / "artifact_only.head");
  if (bundle.extractor->trainable()) bundle.extractor->to_archive().save(directory / "ida.extractor");

  const json manifest = {
      {"format", kFormat},
      {"version", kBundleVersion},
      {"seed", bundle.config.seed},
      {"config", to_json(bundle.config)},
      {"provider",
       {{"spec", bundle.config.provider.spec}, {"dimension", bundle.config.provider.dimension}}},
      {"extractor", {{"id", bundle.extractor->id()}, {"trainable", bundle.extractor->trainable()}}},
      {"architecture_hashes",
       {{"ida_head", bundle.pipeline.ida.architecture_hash()},
        {"artifact_only_head", bundle.artifact_head.architecture_hash()}}},
      {"training", summary_json(bundle.summary)},
  };
  write_file_atomic(directory / "manifest.json", manifest.dump(2) + "\n");
}

PipelineBundle load_bundle(const std::filesystem::path& directory, const EmbeddingCache& cache) {
  json manifest;
  try {
    manifest = json::parse(read_file(directory / "manifest.json"));
  } catch (const json::exception& e) {
    throw ModelError("bundle manifest unreadable: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kFormat) throw ModelError("not a pipeline bundle: " + directory.string());
  const int version = manifest.value("version", -1);
  if (version != kBundleVersion) {
    throw ModelError("bundle version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kBundleVersion) + ")");
  }

  PipelineBundle bundle;
  bundle.config = config_from_json(manifest.at("config"));
  bundle.pipeline.ac = AcModel::from_archive(load_part(directory, "ac.model"));
  bundle.pipeline.id = IdModel::from_archive(load_part(directory, "id.model"));
  bundle.pipeline.ida = IdaModel::from_archive(load_part(directory, "ida.head"));
  bundle.pipeline.mode = bundle.config.fusion_mode;
  bundle.pipeline.route = bundle.config.bona_fide_route;
  bundle.artifact_head = Mlp::from_archive(load_part(directory, "artifact_only.head"));

  const auto& hashes = manifest.at("architecture_hashes");
  if (hashes.at("ida_head").get<std::string>() != bundle.pipeline.ida.architecture_hash() ||
      hashes.at("artifact_only_head").get<std::string>() != bundle.artifact_head.architecture_hash()) {
    throw ModelError("bundle architecture hashes do not match stored weights");
  }

  if (bundle.config.ida.extractor == "tiny-convnet") {
    const TinyConvNet net = TinyConvNet::from_archive(load_part(directory, "ida.extractor"));
    bundle.extractor = make_extractor(bundle.config, cache, &net);
  } else {
    bundle.extractor = make_extractor(bundle.config, cache);
  }
  if (bundle.extractor->id() != manifest.at("extractor").at("id").get<std::string>()) {
    throw ModelError("bundle extractor id mismatch");
  }
  bundle.summary = summary_from_json(manifest.at("training"));
  return bundle;
}

}  // namespace acida
