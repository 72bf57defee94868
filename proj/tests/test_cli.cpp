#include <gtest/gtest.h>

#include <algorithm>

#include <sstream>

#include "acida/cli.hpp"
#include "acida/config.hpp"
#include "acida/io_util.hpp"
#include "test_support.hpp"

namespace acida {
namespace {

using nlohmann::json;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "acida");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(Config, DefaultsMatchPublishedTrainingSetup) {
  const RunConfig c;
  EXPECT_EQ(c.ac.c, 1.0);
  EXPECT_EQ(c.ac.gamma, 1e-3);
  EXPECT_EQ(c.id.c, 1.0);
  EXPECT_EQ(c.id.gamma, 1e-3);
  EXPECT_EQ(c.ida.head.hidden, (std::vector<int>{250, 125, 64}));
  EXPECT_EQ(c.ida.head.learning_rate, 1e-5);
  EXPECT_EQ(c.ida.head.patience, 5);
  EXPECT_EQ(c.ida.head.min_delta, 1e-4);
  EXPECT_EQ(c.ida.finetune.learning_rate, 1e-3);
  EXPECT_EQ(c.ida.finetune.patience, 5);
  EXPECT_EQ(c.ida.finetune.min_delta, 1e-4);
  EXPECT_EQ(c.fusion_mode, FusionMode::Weighted);
  EXPECT_EQ(c.bona_fide_route, BonaFideRoute::ToId);
  EXPECT_EQ(kWaeWeights, (std::array<double, 4>{0.3, 0.1, 0.2, 0.4}));
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 9;
  c.ac.gamma = 0.5;
  c.ida.head.hidden = {8};
  c.fusion_mode = FusionMode::Selection;
  c.bona_fide_route = BonaFideRoute::ToIda;
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.ida.head.seed, derive_seed(9, 103, 0));
}

TEST(Config, UnknownKeysAndTypeErrorsNameThePath) {
  try {
    config_from_json(json::parse(R"({"fuson": {"mode": "weighted"}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("fuson.mode"), std::string::npos) << e.what();
  }
  try {
    config_from_json(json::parse(R"({"ac": {"c": "one"}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ac.c"), std::string::npos) << e.what();
  }
  EXPECT_THROW(config_from_json(json::parse(R"({"ida": {"head": {"hiden": [4]}}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"fusion": {"mode": "max"}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"harness": {"bins": 1}})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, Overrides) {
  json doc = json::object();
  apply_override(doc, "ida.head.hidden=[32,16]");
  apply_override(doc, "fusion.mode=selection");
  apply_override(doc, "ac.gamma=0.25");
  const RunConfig c = config_from_json(doc);
  EXPECT_EQ(c.ida.head.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.fusion_mode, FusionMode::Selection);
  EXPECT_EQ(c.ac.gamma, 0.25);
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(doc, "a..b=1"), ConfigError);
}

TEST(CacheDir, Precedence) {
  ::unsetenv("ACIDA_CACHE_DIR");
  EXPECT_EQ(resolve_cache_dir(std::filesystem::path("/flag"), "/cfg", "/data/m.csv"), "/flag");
  EXPECT_EQ(resolve_cache_dir(std::nullopt, "/cfg", "/data/m.csv"), "/cfg");
  EXPECT_EQ(resolve_cache_dir(std::nullopt, "", "/data/m.csv"), "/data/cache");
  ::setenv("ACIDA_CACHE_DIR", "/env", 1);
  EXPECT_EQ(resolve_cache_dir(std::nullopt, "/cfg", "/data/m.csv"), "/env");
  ::unsetenv("ACIDA_CACHE_DIR");
}

TEST(Cli, ParseAndUsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--bundle", "/tmp/x"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, GenSyntheticIsDeterministic) {
  testing::TempDir a("gen"), b("gen");
  const std::vector<std::string> common = {"--seed", "3", "--identities", "20", "--dim", "8", "--artifact-dim", "4"};
  auto args_a = std::vector<std::string>{"gen-synthetic", "--out", a.path().string()};
  auto args_b = std::vector<std::string>{"gen-synthetic", "--out", b.path().string()};
  args_a.insert(args_a.end(), common.begin(), common.end());
  args_b.insert(args_b.end(), common.begin(), common.end());
  const CliResult ra = run(args_a);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(run(args_b).code, 0);
  for (const char* f : {"train.csv", "validation.csv", "test.csv", "cache/vectors.bin", "cache/index.json",
                        "config.json"}) {
    EXPECT_EQ(read_file(a.path() / f), read_file(b.path() / f)) << f;
  }
  EXPECT_NE(ra.out.find("accomplice"), std::string::npos);
}

TEST(Cli, GenSyntheticAlphaFlag) {
  testing::TempDir dir("gen");
  const CliResult r = run({"gen-synthetic", "--out", dir.path().string(), "--identities", "20", "--dim", "8",
                           "--artifact-dim", "4", "--alpha", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const DatasetManifest m = read_manifest(dir.path() / "train.csv", SplitTag::Train);
  std::size_t morphs = 0;
  for (const auto& p : m.entries) {
    if (!p.morph_meta) continue;
    ++morphs;
    EXPECT_EQ(p.morph_meta->alpha, 0.3);
  }
  EXPECT_GT(morphs, 0u);
  EXPECT_EQ(run({"gen-synthetic", "--out", dir.path().string(), "--alpha", "1.5"}).code, 2);
}

class CliPipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("cli");
    const auto d = dir_->path().string();
    const CliResult gen = run({"gen-synthetic", "--out", d, "--seed", "2", "--identities", "50", "--dim", "16",
                               "--artifact-dim", "8"});
    ASSERT_EQ(gen.code, 0) << gen.err;
    const CliResult train =
        run({"train", "--config", d + "/config.json", "--train", d + "/train.csv", "--val", d + "/validation.csv",
             "--bundle", d + "/bundle", "--set", "ida.head.hidden=[16,8]", "--set", "ida.head.learning_rate=0.001",
             "--set", "ida.head.max_epochs=30", "--set", "artifact_only.max_epochs=30", "--jobs", "2"});
    ASSERT_EQ(train.code, 0) << train.err;
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }
  static json report(const std::string& out) { return json::parse(read_file(dir_->path() / out / "report.json")); }

  static inline testing::TempDir* dir_ = nullptr;
};

TEST_F(CliPipelineTest, BundleLayout) {
  for (const char* f : {"manifest.json", "ac.model", "id.model", "ida.head", "artifact_only.head"}) {
    EXPECT_TRUE(std::filesystem::exists(dir_->path() / "bundle" / f)) << f;
  }
  const json m = json::parse(read_file(dir_->path() / "bundle" / "manifest.json"));
  EXPECT_EQ(m["version"], kBundleVersion);
  EXPECT_EQ(m["config"]["ida"]["head"]["hidden"], json::parse("[16,8]"));
}

TEST_F(CliPipelineTest, BundleRoundTripIsBitExact) {
  // Retrain in-process with identical inputs and compare against the saved bundle.
  TrainOptions t;
  t.config = path("config.json");
  t.overrides = {"ida.head.hidden=[16,8]", "ida.head.learning_rate=0.001", "ida.head.max_epochs=30",
                 "artifact_only.max_epochs=30"};
  t.train = path("train.csv");
  t.validation = path("validation.csv");
  t.bundle = path("bundle_again");
  std::ostringstream log;
  const PipelineBundle fresh = cmd_train(t, log);

  EmbeddingCache cache(dir_->path() / "cache");
  const PipelineBundle loaded = load_bundle(path("bundle"), cache);
  const auto provider = make_provider("synthetic", 16, 0);
  EmbeddingResolver resolver(*provider, cache);
  ArtifactSource artifacts;
  artifacts.cache = &cache;
  const DatasetManifest test = read_manifest(path("test.csv"), SplitTag::Test);
  std::vector<AttemptPair> probes;
  for (std::size_t i = 0; i < test.entries.size() && probes.size() < 10; i += 7) probes.push_back(test.entries[i]);
  ASSERT_EQ(probes.size(), 10u);
  const auto a = score_pairs(fresh, probes, resolver, artifacts, AblationVariant::Full);
  const auto b = score_pairs(loaded, probes, resolver, artifacts, AblationVariant::Full);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    EXPECT_EQ(a[i].s_ida, b[i].s_ida);
    EXPECT_EQ(a[i].s_id, b[i].s_id);
    EXPECT_EQ(a[i].s_artifact, b[i].s_artifact);
    EXPECT_EQ(a[i].probabilities.accomplice, b[i].probabilities.accomplice);
    EXPECT_EQ(a[i].fused, b[i].fused);
  }
}

TEST_F(CliPipelineTest, VersionMismatchIsAModelError) {
  const auto copy = dir_->path() / "bundle_v2";
  std::filesystem::copy(dir_->path() / "bundle", copy);
  json m = json::parse(read_file(copy / "manifest.json"));
  m["version"] = kBundleVersion + 1;
  write_file_atomic(copy / "manifest.json", m.dump());
  EmbeddingCache cache;
  EXPECT_THROW(load_bundle(copy, cache), ModelError);
  const CliResult r = run({"evaluate", "--bundle", copy.string(), "--test", path("test.csv"), "--out", path("ev_bad")});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("version"), std::string::npos);
}

TEST_F(CliPipelineTest, EvaluateWritesReports) {
  const CliResult r = run({"evaluate", "--bundle", path("bundle"), "--test", path("test.csv"), "--out", path("ev"),
                           "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = report("ev");
  ASSERT_EQ(j["scenarios"].size(), 3u);
  EXPECT_EQ(j["scenarios"][2]["scenario"], "both");
  EXPECT_LT(j["scenarios"][2]["metrics"]["eer"].get<double>(), 0.3);
  EXPECT_TRUE(std::filesystem::exists(dir_->path() / "ev" / "det_both.svg"));

  const CliResult rep = run({"report", "--scores", path("ev/scores.csv"), "--out", path("rep")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(report("rep")["scenarios"], j["scenarios"]);
  EXPECT_EQ(report("rep")["similarity_bins"], j["similarity_bins"]);

  const CliResult plot = run({"plot-det", path("ev/scores.csv"), "--out", path("det.svg")});
  ASSERT_EQ(plot.code, 0) << plot.err;
  EXPECT_NE(read_file(dir_->path() / "det.svg").find("<svg"), std::string::npos);
}

TEST_F(CliPipelineTest, EvaluateFlags) {
  ASSERT_EQ(run({"evaluate", "--bundle", path("bundle"), "--test", path("test.csv"), "--out", path("ev_c"),
                 "--scenario", "criminal", "--ablation", "id_only", "--bins", "8"})
                .code,
            0);
  const json j = report("ev_c");
  ASSERT_EQ(j["scenarios"].size(), 1u);
  EXPECT_EQ(j["scenarios"][0]["scenario"], "criminal");
  EXPECT_EQ(j["variant"], "id_only");
  EXPECT_EQ(j["similarity_bins"].size(), 8u);
  const auto records = parse_score_records_csv(read_file(dir_->path() / "ev_c" / "scores.csv"));
  const auto in_criminal = std::count_if(records.begin(), records.end(), [](const ScoreRecord& r) {
    return in_scenario(r.label, Scenario::Criminal);
  });
  EXPECT_EQ(j["scenarios"][0]["morph"].get<int>() + j["scenarios"][0]["bona_fide"].get<int>(),
            static_cast<int>(in_criminal));
}

TEST_F(CliPipelineTest, ExitCodes) {
  EXPECT_EQ(run({"evaluate", "--bundle", path("bundle"), "--test", path("test.csv"), "--out", path("x"),
                 "--ablation", "bogus"})
                .code,
            2);
  EXPECT_EQ(run({"evaluate", "--bundle", path("bundle"), "--test", path("missing.csv"), "--out", path("x")}).code, 3);
  EXPECT_EQ(run({"evaluate", "--bundle", path("nobundle"), "--test", path("test.csv"), "--out", path("x")}).code, 4);
  EXPECT_EQ(run({"train", "--train", path("train.csv"), "--bundle", path("b2"), "--set", "fuson.mode=x"}).code, 2);
  write_file_atomic(dir_->path() / "bad.csv", "document_ref,live_ref,label\nemb:nope,emb:nope2,bonafide\n");
  EXPECT_EQ(run({"train", "--train", path("bad.csv"), "--bundle", path("b3"), "--cache-dir", path("cache")}).code, 3);
}

}  // namespace
}  // namespace acida
