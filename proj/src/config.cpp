#include "acida/config.hpp"

#include "acida/io_util.hpp"
#include "acida/synthetic.hpp"

namespace acida {

using nlohmann::json;

namespace {

json fit_json(const FitParams& p) {
  return {{"learning_rate", p.learning_rate}, {"batch_size", p.batch_size},
          {"max_epochs", p.max_epochs},       {"patience", p.patience},
          {"min_delta", p.min_delta}};
}

void read_fit(const json& j, FitParams& p) {
  p.learning_rate = j.at("learning_rate").get<double>();
  p.batch_size = j.at("batch_size").get<int>();
  p.max_epochs = j.at("max_epochs").get<int>();
  p.patience = j.at("patience").get<int>();
  p.min_delta = j.at("min_delta").get<double>();
}

std::string type_name(const json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

bool compatible(const json& schema, const json& value) {
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_number_integer()) return value.is_number_integer();
  if (schema.is_number()) return value.is_number();
  if (schema.is_string()) return value.is_string();
  if (schema.is_array()) return value.is_array();
  if (schema.is_object()) return value.is_object();
  return false;
}

void merge_checked(json& target, const json& overrides, const std::string& prefix) {
  if (!overrides.is_object()) {
    throw ConfigError("config" + (prefix.empty() ? std::string() : " key '" + prefix + "'") +
                      " must be an object");
  }
  for (const auto& [key, value] : overrides.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) {
      std::string leaf = path;
      for (const json* v = &value; v->is_object() && !v->empty(); v = &v->begin().value()) {
        leaf += "." + v->begin().key();
      }
      throw ConfigError("unknown config key '" + leaf + "'");
    }
    json& slot = target[key];
    if (!compatible(slot, value)) {
      throw ConfigError("config key '" + path + "' expects " + type_name(slot) + ", got " +
                        type_name(value));
    }
    if (slot.is_object()) {
      merge_checked(slot, value, path);
    } else {
      slot = value;
    }
  }
}

template <typename Fn>
void with_key(const char* path, Fn&& fn) {
  try {
    fn();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + path + "': " + e.what());
  }
}

}  // namespace

void RunConfig::propagate_seed() {
  ac.seed = derive_seed(seed, 101, 0);
  id.seed = derive_seed(seed, 102, 0);
  ida.head.seed = derive_seed(seed, 103, 0);
  ida.convnet.seed = derive_seed(seed, 104, 0);
  ida.finetune.seed = derive_seed(seed, 105, 0);
  artifact_only.seed = derive_seed(seed, 106, 0);
}

json to_json(const RunConfig& c) {
  json ida_head = fit_json(FitParams{c.ida.head.learning_rate, c.ida.head.batch_size,
                                     c.ida.head.max_epochs, c.ida.head.patience,
                                     c.ida.head.min_delta, 0});
  ida_head["hidden"] = c.ida.head.hidden;
  return {
      {"seed", c.seed},
      {"provider",
       {{"spec", c.provider.spec},
        {"dimension", c.provider.dimension},
        {"artifact_provider", c.provider.artifact_provider},
        {"cache_dir", c.provider.cache_dir},
        {"crop_passthrough", c.provider.crop_passthrough}}},
      {"ac",
       {{"c", c.ac.c},
        {"gamma", c.ac.gamma},
        {"class_weighting", c.ac.class_weighting},
        {"standardize", c.ac.standardize},
        {"input", c.ac.input == AcInput::Cosine ? "cosine" : "cosine+difference"}}},
      {"id",
       {{"c", c.id.c},
        {"gamma", c.id.gamma},
        {"class_weighting", c.id.class_weighting},
        {"standardize", c.id.standardize}}},
      {"ida",
       {{"head", ida_head},
        {"extractor", c.ida.extractor},
        {"artifact_dim", c.ida.artifact_dim},
        {"convnet",
         {{"input_side", c.ida.convnet.input_side},
          {"kernel", c.ida.convnet.kernel},
          {"filters", c.ida.convnet.filters},
          {"pool_grid", c.ida.convnet.pool_grid}}},
        {"finetune",
         fit_json(FitParams{c.ida.finetune.learning_rate, c.ida.finetune.batch_size,
                            c.ida.finetune.max_epochs, c.ida.finetune.patience,
                            c.ida.finetune.min_delta, 0})}}},
      {"artifact_only", fit_json(c.artifact_only)},
      {"fusion",
       {{"mode", std::string(to_string(c.fusion_mode))},
        {"bona_fide_route", std::string(to_string(c.bona_fide_route))}}},
      {"harness", {{"bins", c.bins}, {"jobs", c.jobs}}},
  };
}

RunConfig config_from_json(const json& overrides) {
  json doc = to_json(RunConfig{});
  merge_checked(doc, overrides, "");

  RunConfig c;
  with_key("seed", [&] { c.seed = doc.at("seed").get<std::uint64_t>(); });
  with_key("provider", [&] {
    const json& p = doc.at("provider");
    c.provider.spec = p.at("spec").get<std::string>();
    c.provider.dimension = p.at("dimension").get<Eigen::Index>();
    c.provider.artifact_provider = p.at("artifact_provider").get<std::string>();
    c.provider.cache_dir = p.at("cache_dir").get<std::string>();
    c.provider.crop_passthrough = p.at("crop_passthrough").get<bool>();
  });
  with_key("ac", [&] {
    const json& a = doc.at("ac");
    c.ac.c = a.at("c").get<double>();
    c.ac.gamma = a.at("gamma").get<double>();
    c.ac.class_weighting = a.at("class_weighting").get<bool>();
    c.ac.standardize = a.at("standardize").get<bool>();
    const auto input = a.at("input").get<std::string>();
    if (input == "cosine") {
      c.ac.input = AcInput::Cosine;
    } else if (input == "cosine+difference") {
      c.ac.input = AcInput::CosineAndDifference;
    } else {
      throw ConfigError("config key 'ac.input': unknown value '" + input + "'");
    }
  });
  with_key("id", [&] {
    const json& a = doc.at("id");
    c.id.c = a.at("c").get<double>();
    c.id.gamma = a.at("gamma").get<double>();
    c.id.class_weighting = a.at("class_weighting").get<bool>();
    c.id.standardize = a.at("standardize").get<bool>();
  });
  with_key("ida", [&] {
    const json& a = doc.at("ida");
    FitParams head;
    read_fit(a.at("head"), head);
    c.ida.head.learning_rate = head.learning_rate;
    c.ida.head.batch_size = head.batch_size;
    c.ida.head.max_epochs = head.max_epochs;
    c.ida.head.patience = head.patience;
    c.ida.head.min_delta = head.min_delta;
    c.ida.head.hidden = a.at("head").at("hidden").get<std::vector<int>>();
    c.ida.extractor = a.at("extractor").get<std::string>();
    c.ida.artifact_dim = a.at("artifact_dim").get<Eigen::Index>();
    const json& net = a.at("convnet");
    c.ida.convnet.input_side = net.at("input_side").get<int>();
    c.ida.convnet.kernel = net.at("kernel").get<int>();
    c.ida.convnet.filters = net.at("filters").get<int>();
    c.ida.convnet.pool_grid = net.at("pool_grid").get<int>();
    c.ida.convnet.output_dim = c.ida.artifact_dim;
    FitParams ft;
    read_fit(a.at("finetune"), ft);
    c.ida.finetune.learning_rate = ft.learning_rate;
    c.ida.finetune.batch_size = ft.batch_size;
    c.ida.finetune.max_epochs = ft.max_epochs;
    c.ida.finetune.patience = ft.patience;
    c.ida.finetune.min_delta = ft.min_delta;
  });
  with_key("artifact_only", [&] { read_fit(doc.at("artifact_only"), c.artifact_only); });
  with_key("fusion", [&] {
    c.fusion_mode = parse_fusion_mode(doc.at("fusion").at("mode").get<std::string>());
    c.bona_fide_route =
        parse_bona_fide_route(doc.at("fusion").at("bona_fide_route").get<std::string>());
  });
  with_key("harness", [&] {
    c.bins = doc.at("harness").at("bins").get<int>();
    c.jobs = doc.at("harness").at("jobs").get<int>();
  });

  if (c.provider.dimension < 1) throw ConfigError("config key 'provider.dimension' must be positive");
  if (c.ida.artifact_dim < 1) throw ConfigError("config key 'ida.artifact_dim' must be positive");
  if (c.ac.c <= 0.0 || c.ac.gamma <= 0.0) throw ConfigError("config key 'ac': c and gamma must be positive");
  if (c.id.c <= 0.0 || c.id.gamma <= 0.0) throw ConfigError("config key 'id': c and gamma must be positive");
  if (c.bins < 2) throw ConfigError("config key 'harness.bins' must be at least 2");
  if (c.jobs < 1) throw ConfigError("config key 'harness.jobs' must be at least 1");
  c.propagate_seed();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &document;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace acida
