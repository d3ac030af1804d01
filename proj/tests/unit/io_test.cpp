#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "preempt/io/config.hpp"
#include "preempt/io/manifest.hpp"
#include "preempt/stats/report.hpp"

using namespace preempt;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = PREEMPT_GOLDEN_DIR;

// Set PREEMPT_REGEN_GOLDEN=1 to rewrite the golden files instead of
// comparing against them.
bool regen() { return std::getenv("PREEMPT_REGEN_GOLDEN") != nullptr; }

constexpr act::FeedbackCondition kPredictiveVisual{act::Timing::Predictive, act::Modality::Visual};

sim::TrialLog seed7_trial() {
  static const auto log = [] {
    const auto model = forecast::ForecastModel::linear(42);
    auto spec = sim::random_trial(kPredictiveVisual, sim::AgentConfig{}, 7);
    spec.record_anticipations = true;
    return sim::run_trial(spec, model);
  }();
  return log;
}

sim::StudyLog small_study() {
  sim::StudyConfig cfg;
  cfg.participants = 4;
  cfg.rounds = 1;
  cfg.seed = 7;
  return sim::run_study(cfg, forecast::ForecastModel::linear(42));
}

std::string study_string(const sim::StudyLog& s) {
  std::ostringstream os;
  io::write_study_jsonl(os, s);
  return os.str();
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("preempt_io_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string replace_line(const std::string& text, std::size_t line_no, const std::string& with) {
  std::istringstream is(text);
  std::string out, line;
  for (std::size_t i = 1; std::getline(is, line); ++i) out += (i == line_no ? with : line) + "\n";
  return out;
}

// ---- trial logs ---------------------------------------------------------------

TEST(TrialCodec, RoundTrip) {
  const auto log = seed7_trial();
  std::istringstream is(io::trial_jsonl_string(log));
  const auto parsed = io::read_trial_jsonl(is);
  EXPECT_EQ(parsed.log, log);
  ASSERT_TRUE(parsed.stored_metrics);
  EXPECT_EQ(*parsed.stored_metrics, stats::trial_metrics(log));
  EXPECT_EQ(io::trial_jsonl_string(parsed.log), io::trial_jsonl_string(log));
}

TEST(TrialCodec, GoldenSeedSeven) {
  const auto text = io::trial_jsonl_string(seed7_trial());
  const auto path = kGolden / "trial_seed7.jsonl";
  if (regen()) io::write_file(path, text);
  EXPECT_EQ(io::read_file(path), text);
  // Stored metrics replay exactly.
  const auto parsed = io::load_trial(path);
  const auto again = sim::replay_trial(parsed.log, forecast::ForecastModel::linear(42));
  EXPECT_EQ(stats::trial_metrics(again), *parsed.stored_metrics);
  EXPECT_EQ(again.feedback, parsed.log.feedback);
}

TEST(TrialCodec, ErrorsCarryLineNumbers) {
  const auto text = io::trial_jsonl_string(seed7_trial());
  auto expect_error = [](const std::string& t, const std::string& needle) {
    std::istringstream is(t);
    try {
      io::read_trial_jsonl(is, "t.jsonl");
      ADD_FAILURE() << "no error for " << needle;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error(replace_line(text, 3, "{not json"), "t.jsonl:3: malformed JSON");
  expect_error(replace_line(text, 4, R"({"type":"frame","t":2,"keypoints":[[1,2]],"blocks":[]})"), "t.jsonl:4:");
  expect_error(replace_line(text, 1, R"({"type":"header","version":99})"), "t.jsonl:1:");
  // Drop the summary line.
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  expect_error(cut, "missing summary");
  expect_error("", "empty");
  // Non-increasing frames.
  std::istringstream is(text);
  std::string l1, l2, l3;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  expect_error(l1 + "\n" + l2 + "\n" + l2 + "\n", "t.jsonl:3: frame indices must increase");
}

// ---- study logs and reports ------------------------------------------------

TEST(StudyCodec, RoundTripDropsFramesOnly) {
  const auto s = small_study();
  std::istringstream is(study_string(s));
  const auto back = io::read_study_jsonl(is);
  EXPECT_EQ(back.trials, s.trials);
  EXPECT_EQ(back.config.participants, 4);
  EXPECT_EQ(back.config.agent, s.config.agent);
  EXPECT_EQ(study_string(back), study_string(s));
}

TEST(StudyCodec, GoldenStudyAndReport) {
  const auto study_path = kGolden / "study_small.jsonl";
  const auto report_path = kGolden / "study_small_report.json";
  const auto text_path = kGolden / "study_small_report.txt";
  const auto s = small_study();
  const auto rep = stats::study_report(s, derive_seed(0, "bootstrap"));
  if (regen()) {
    io::write_file(study_path, study_string(s));
    io::write_file(report_path, stats::report_json(rep).dump(2) + "\n");
    io::write_file(text_path, stats::report_text(rep));
  }
  EXPECT_EQ(io::read_file(study_path), study_string(s));
  // The report depends only on the stored log.
  const auto loaded = stats::study_report(io::load_study(study_path), derive_seed(0, "bootstrap"));
  EXPECT_EQ(io::read_file(report_path), stats::report_json(loaded).dump(2) + "\n");
  EXPECT_EQ(io::read_file(text_path), stats::report_text(loaded));
}

// ---- config -----------------------------------------------------------------

TEST(RunConfig, DefaultsRoundTrip) {
  const io::RunConfig c;
  const auto back = io::parse_run_config(io::run_config_json(c));
  EXPECT_EQ(io::run_config_json(back), io::run_config_json(c));
}

TEST(RunConfig, OverridesApply) {
  const auto c = io::parse_run_config(io::Json::parse(
      R"({"seed": 9, "keypoints": 21, "forecaster": {"variant": "vanilla"}, "agent": {"p_err": 0.2},
          "study": {"participants": 5}, "serve": {"port": 0}})"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.keypoints, 21u);
  EXPECT_EQ(c.model.keypoints, 21u);
  EXPECT_EQ(c.variant, forecast::Variant::VanillaSTGCN);
  EXPECT_DOUBLE_EQ(c.agent.p_err, 0.2);
  EXPECT_EQ(c.study_config().participants, 5);
  EXPECT_NE(c.data_config().seed, c.study_config().seed);
}

TEST(RunConfig, RejectsUnknownAndInvalid) {
  auto bad = [](const char* text) { return io::parse_run_config(io::Json::parse(text)); };
  EXPECT_THROW(bad(R"({"sede": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"agent": {"p_err": 0.2, "typo": 1}})"), ConfigError);
  EXPECT_THROW(bad(R"({"keypoints": 5})"), ConfigError);
  EXPECT_THROW(bad(R"({"agent": {"p_err": 2}})"), ConfigError);
  EXPECT_THROW(bad(R"({"train": {"lr": -1}})"), ConfigError);
  EXPECT_THROW(bad(R"({"forecaster": {"variant": "lstm"}})"), ConfigError);
  EXPECT_THROW(bad(R"({"seed": "nine"})"), ConfigError);
}

TEST(RunConfig, MalformedFileReportsLine) {
  const auto d = temp_dir("cfg");
  io::write_file(d / "c.json", "{\n  \"seed\": 1,\n  oops\n}\n");
  try {
    io::load_run_config(d / "c.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("c.json:3"), std::string::npos) << e.what();
  }
  fs::remove_all(d);
}

// ---- manifests --------------------------------------------------------------

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(io::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(DataManifest, RoundTripAndHashCheck) {
  const auto d = temp_dir("data");
  const auto text = io::trial_jsonl_string(seed7_trial());
  io::write_file(d / "train_000.jsonl", text);
  io::DataManifest m;
  m.seed = 3;
  m.files.push_back({"train_000.jsonl", sim::Split::Train, io::sha256_hex(text)});
  io::write_file(d / "manifest.json", io::data_manifest_json(m).dump(2));
  EXPECT_EQ(io::load_data_manifest(d), m);
  const auto data = io::load_dataset(d);
  ASSERT_EQ(data.trials.size(), 1u);
  EXPECT_EQ(data.trials[0], seed7_trial());

  io::write_file(d / "train_000.jsonl", text + "\n");
  EXPECT_THROW(io::load_dataset(d), DataError);
  fs::remove_all(d);
}

TEST(DataManifest, HashDependsOnEveryFile) {
  io::DataManifest a;
  a.files = {{"a", sim::Split::Train, "00"}, {"b", sim::Split::Val, "11"}};
  auto b = a;
  b.files[1].sha256 = "12";
  EXPECT_NE(a.dataset_hash(), b.dataset_hash());
  EXPECT_THROW(io::split_from_name("holdout"), DataError);
}

TEST(CheckpointManifest, RoundTrip) {
  io::CheckpointManifest m;
  m.variant = "scene-aware";
  m.hyper.keypoints = 42;
  m.training_seed = 17;
  m.dataset_hash = "abc";
  m.param_count = 214860;
  m.checkpoint_sha256 = "def";
  m.best_epoch = 3;
  m.best_val = 0.0041;
  EXPECT_EQ(io::checkpoint_manifest_from(io::checkpoint_manifest_json(m)), m);
}

TEST(CheckpointManifest, LoadVerifiesPayloadHash) {
  const auto d = temp_dir("ckpt");
  forecast::StgcnConfig cfg;
  cfg.keypoints = 21;
  auto model = forecast::ForecastModel::learned(forecast::Variant::VanillaSTGCN, cfg);
  const auto ckpt = d / "vanilla.ckpt";
  model.save(ckpt);
  io::CheckpointManifest m;
  m.variant = "vanilla";
  m.keypoints = 21;
  m.hyper = cfg;
  m.param_count = model.net().params().count();
  m.checkpoint_sha256 = io::sha256_file(ckpt);
  io::write_file(io::sidecar_path(ckpt), io::checkpoint_manifest_json(m).dump(2));
  const auto loaded = io::load_learned_model(ckpt);
  EXPECT_EQ(loaded.keypoints(), 21u);
  m.checkpoint_sha256 = std::string(64, '0');
  io::write_file(io::sidecar_path(ckpt), io::checkpoint_manifest_json(m).dump(2));
  EXPECT_THROW(io::load_learned_model(ckpt), DataError);
  fs::remove_all(d);
}

// ---- command line -----------------------------------------------------------

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(PREEMPT_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodes) {
  const auto d = temp_dir("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  io::write_file(d / "bad.json", R"({"seeed": 1})");
  EXPECT_EQ(run_cli("--config " + (d / "bad.json").string() + " gen-data"), 2);
  io::write_file(d / "missing.json", io::Json{{"paths", {{"data", (d / "nothing").string()}}}}.dump());
  EXPECT_EQ(run_cli("--config " + (d / "missing.json").string() + " --variant linear eval-forecast"), 3);

  // Replay: intact log passes, tampered metrics fail.
  const auto golden = kGolden / "trial_seed7.jsonl";
  EXPECT_EQ(run_cli("replay " + golden.string()), 0);
  auto text = io::read_file(golden);
  const auto pos = text.find("\"feedback_count\":");
  ASSERT_NE(pos, std::string::npos);
  text.insert(pos + 17, "1");
  io::write_file(d / "tampered.jsonl", text);
  EXPECT_EQ(run_cli("replay " + (d / "tampered.jsonl").string()), 3);
  fs::remove_all(d);
}

TEST(Cli, AnalyzeReproducesGoldenReport) {
  const auto d = temp_dir("analyze");
  ASSERT_EQ(run_cli("--out " + d.string() + " analyze " + (kGolden / "study_small.jsonl").string()), 0);
  EXPECT_EQ(io::read_file(d / "report.json"), io::read_file(kGolden / "study_small_report.json"));
  EXPECT_EQ(io::read_file(d / "report.txt"), io::read_file(kGolden / "study_small_report.txt"));
  fs::remove_all(d);
}

}  // namespace
