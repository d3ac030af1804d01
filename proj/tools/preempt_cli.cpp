#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "preempt/bridge/server.hpp"
#include "preempt/io/config.hpp"
#include "preempt/io/manifest.hpp"
#include "preempt/pipeline.hpp"
#include "preempt/sim/evaluate.hpp"
#include "preempt/stats/report.hpp"

namespace fs = std::filesystem;
using namespace preempt;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
};

io::RunConfig load_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.variant.empty()) {
    try {
      cfg.variant = forecast::variant_from_name(c.variant);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return cfg;
}

forecast::ForecastModel load_model(const io::RunConfig& cfg, forecast::Variant v) {
  if (!forecast::is_learned(v)) return forecast::ForecastModel::make(v, cfg.keypoints);
  const auto path = cfg.checkpoint_path(v);
  if (!fs::exists(path)) throw DataError("no checkpoint at " + path.string() + " (run `preempt train` first)");
  auto m = io::load_learned_model(path);
  if (m.keypoints() != cfg.keypoints) throw ConfigError("checkpoint K does not match the config");
  return m;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int cmd_gen_data(const Common& c) {
  const auto cfg = load_config(c);
  const fs::path dir = c.out.empty() ? fs::path(cfg.paths.data) : fs::path(c.out);
  if (fs::exists(dir / "manifest.json")) throw ConfigError(dir.string() + " already holds a dataset");
  fs::create_directories(dir);
  const auto dc = cfg.data_config();
  const auto splits = sim::assign_splits(dc);
  io::DataManifest m;
  m.seed = dc.seed;
  m.keypoints = dc.keypoints;
  for (int i = 0; i < dc.total(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%04d.jsonl", i);
    const auto bytes = io::trial_jsonl_string(sim::generate_data_trial(dc, i));
    io::write_file(dir / name, bytes);
    m.files.push_back({name, splits[static_cast<std::size_t>(i)], io::sha256_hex(bytes)});
  }
  io::write_file(dir / "manifest.json", io::data_manifest_json(m).dump(2) + "\n");
  std::cout << "wrote " << m.files.size() << " trajectories to " << dir.string() << " (dataset " << m.dataset_hash()
            << ")\n";
  return 0;
}

void train_one(const io::RunConfig& cfg, forecast::Variant v, const sim::Dataset& data, const std::string& dataset_hash,
               const fs::path& out_dir) {
  std::string curve = "epoch,train_total,val_total,val_tip,val_pose,val_smooth,seconds\n";
  const auto tc = cfg.train_config();
  auto [model, res] = train_variant(
      cfg, v, data,
      [&](const forecast::EpochStats& e) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.3f\n", e.epoch, e.train_total, e.val.total,
                      e.val.l_tip, e.val.l_pose, e.val.l_smooth, e.seconds);
        curve += buf;
        std::snprintf(buf, sizeof(buf), "  epoch %3d  train %.6f  val %.6f  (%.1fs)", e.epoch, e.train_total,
                      e.val.total, e.seconds);
        log_line(buf);
      },
      [&](std::size_t n_train, std::size_t n_val) {
        log_line(std::string(forecast::variant_name(v)) + ": " + std::to_string(n_train) + " train / " +
                 std::to_string(n_val) + " val windows");
      });
  fs::create_directories(out_dir);
  const auto ckpt = out_dir / (std::string(forecast::variant_name(v)) + ".ckpt");
  model.save(ckpt);
  io::CheckpointManifest m;
  m.variant = std::string(forecast::variant_name(v));
  m.keypoints = cfg.keypoints;
  m.hyper = model.net().config();
  m.training_seed = tc.seed;
  m.dataset_hash = dataset_hash;
  m.param_count = model.net().params().count();
  m.checkpoint_sha256 = io::sha256_file(ckpt);
  m.best_epoch = res.best_epoch;
  m.best_val = res.best_val;
  io::write_file(io::sidecar_path(ckpt), io::checkpoint_manifest_json(m).dump(2) + "\n");
  io::write_file(out_dir / (std::string(forecast::variant_name(v)) + ".loss.csv"), curve);
  std::cout << forecast::variant_name(v) << ": best epoch " << res.best_epoch << ", val " << res.best_val << " -> "
            << ckpt.string() << "\n";
}

int cmd_train(const Common& c, bool all) {
  auto cfg = load_config(c);
  if (!c.out.empty()) cfg.paths.checkpoint_dir = c.out;
  const auto data = io::load_dataset(cfg.paths.data);
  const auto hash = io::load_data_manifest(cfg.paths.data).dataset_hash();
  if (all) {
    train_one(cfg, forecast::Variant::VanillaSTGCN, data, hash, cfg.paths.checkpoint_dir);
    train_one(cfg, forecast::Variant::SceneAwareSTGCN, data, hash, cfg.paths.checkpoint_dir);
  } else {
    if (!forecast::is_learned(cfg.variant)) throw ConfigError("variant has no parameters to train");
    train_one(cfg, cfg.variant, data, hash, cfg.paths.checkpoint_dir);
  }
  return 0;
}

int cmd_eval_forecast(const Common& c) {
  const auto cfg = load_config(c);
  const auto data = io::load_dataset(cfg.paths.data);
  const auto test = data.of(sim::Split::Test);
  io::Json rows = io::Json::array();
  std::printf("%-22s %8s %10s %8s\n", "forecaster", "recall", "precision", "F1");
  for (auto v : forecast::kAllVariants) {
    const auto prf = sim::evaluate_anticipation(test, load_model(cfg, v), cfg.engine_config());
    std::printf("%-22s %8.1f %10.1f %8.1f\n", std::string(forecast::variant_label(v)).c_str(), 100 * prf.recall,
                100 * prf.precision, 100 * prf.f1);
    rows.push_back(io::Json{{"forecaster", std::string(forecast::variant_name(v))},
                            {"recall", prf.recall},
                            {"precision", prf.precision},
                            {"f1", prf.f1},
                            {"tp", prf.tp},
                            {"fp", prf.fp},
                            {"fn", prf.fn}});
  }
  const fs::path out = c.out.empty() ? fs::path(cfg.paths.out) / "eval_forecast.json" : fs::path(c.out);
  io::write_file(out, io::Json{{"test_trials", test.size()}, {"rows", rows}}.dump(2) + "\n");
  return 0;
}

int cmd_simulate_study(const Common& c) {
  const auto cfg = load_config(c);
  const auto model = load_model(cfg, cfg.variant);
  const auto t0 = std::chrono::steady_clock::now();
  const auto study = sim::run_study(cfg.study_config(), model, [](const sim::StudyTrial& t) {
    if (t.order == 6) log_line("participant " + std::to_string(t.participant) + " round " + std::to_string(t.round));
  });
  const fs::path out = c.out.empty() ? fs::path(cfg.paths.study) : fs::path(c.out);
  std::ostringstream os;
  io::write_study_jsonl(os, study);
  io::write_file(out, os.str());
  std::cout << "wrote " << study.trials.size() << " trials to " << out.string() << " in "
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
  return 0;
}

int cmd_analyze(const Common& c, const std::string& study_path) {
  const auto cfg = load_config(c);
  const auto study = io::load_study(study_path);
  const auto rep = stats::study_report(study, derive_seed(cfg.seed, "bootstrap"));
  const fs::path dir = c.out.empty() ? fs::path(cfg.paths.out) : fs::path(c.out);
  io::write_file(dir / "report.json", stats::report_json(rep).dump(2) + "\n");
  io::write_file(dir / "report.txt", stats::report_text(rep));
  io::write_file(dir / "paired_diffs.csv", stats::paired_csv(rep));
  std::cout << stats::report_text(rep);
  return 0;
}

int cmd_replay(const Common& c, const std::string& trial_path) {
  const auto cfg = load_config(c);
  const auto parsed = io::load_trial(trial_path);
  const auto& src = parsed.log;
  const auto v = c.variant.empty() ? forecast::variant_from_name(src.forecaster) : cfg.variant;
  auto ecfg = cfg.engine_config();
  const auto replayed = sim::replay_trial(src, load_model(cfg, v), ecfg);
  if (!replayed.completed) throw DataError(trial_path + ": replayed trial did not complete");
  const auto m = stats::trial_metrics(replayed);
  std::cout << io::metrics_json(m).dump() << "\n";
  if (parsed.stored_metrics && !(*parsed.stored_metrics == m))
    throw DataError(trial_path + ": replayed metrics differ from the stored ones " +
                    io::metrics_json(*parsed.stored_metrics).dump());
  if (replayed.placements != src.placements || replayed.feedback != src.feedback)
    throw DataError(trial_path + ": replayed event stream differs from the log");
  return 0;
}

int cmd_serve(const Common& c, bool stdio) {
  const auto cfg = load_config(c);
  const auto model = load_model(cfg, cfg.variant);
  if (stdio || cfg.serve.stdio) {
    bridge::StdioChannel ch(std::cin, std::cout);
    const auto res = bridge::run_session(ch, model, cfg.engine_config());
    return res.error ? 3 : 0;
  }
  bridge::Server server(model, cfg.engine_config());
  const int port = server.listen(cfg.serve.host, cfg.serve.port);
  log_line("listening on " + cfg.serve.host + ":" + std::to_string(port));
  server.serve([](const bridge::SessionResult& r) {
    log_line(r.error ? "session failed: " + *r.error : "session finished");
  });
  return 0;
}

int cmd_calibrate(const Common& c, int trials, int iterations) {
  const auto cfg = load_config(c);
  sim::CalibrationConfig cc;
  cc.trials = trials;
  cc.iterations = iterations;
  cc.seed = derive_seed(cfg.seed, "calibrate");
  const auto steps = sim::calibrate_p_err(cfg.agent, cc, [](const sim::CalibrationStep& s) {
    std::printf("p_err %.6f  edit distance %.4f\n", s.p_err, s.edit_distance);
    std::fflush(stdout);
  });
  const auto best = *std::min_element(steps.begin(), steps.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.edit_distance - cc.target) < std::abs(b.edit_distance - cc.target);
  });
  std::printf("calibrated p_err = %.4f (edit distance %.3f, target %.2f)\n", best.p_err, best.edit_distance, cc.target);
  if (!c.out.empty())
    io::write_file(c.out, io::Json{{"p_err", best.p_err}, {"edit_distance", best.edit_distance},
                                   {"trials", cc.trials}, {"target", cc.target}}
                              .dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  forecast::retain_large_allocations();
  CLI::App app{"preempt: anticipatory feedback engine, simulator and analysis"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "RunConfig JSON file")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Override the master seed");
  app.add_option("--out", common.out, "Output path or directory");
  app.add_option("--variant", common.variant, "Forecaster: linear, instant, vanilla, scene-aware");

  auto* gen = app.add_subcommand("gen-data", "Generate the forecasting corpus and split manifest");
  auto* train = app.add_subcommand("train", "Train a learned forecaster");
  bool train_all = false;
  train->add_flag("--all", train_all, "Train both learned variants");
  auto* eval = app.add_subcommand("eval-forecast", "Placement-anticipation P/R/F1 of all forecasters");
  auto* study = app.add_subcommand("simulate-study", "Run the simulated 7-condition study");
  auto* analyze = app.add_subcommand("analyze", "Study report: table, tests, paired differences");
  std::string study_path;
  analyze->add_option("study", study_path, "StudyLog JSONL")->required();
  auto* replay = app.add_subcommand("replay", "Replay a trial log and check its metrics");
  std::string trial_path;
  replay->add_option("trial", trial_path, "Trial JSONL")->required();
  auto* serve = app.add_subcommand("serve", "Run the session bridge");
  bool stdio = false;
  serve->add_flag("--stdio", stdio, "Serve one session on stdin/stdout");
  auto* cal = app.add_subcommand("calibrate", "Bisect p_err to the no-feedback edit distance target");
  int cal_trials = 400, cal_iter = 12;
  cal->add_option("--trials", cal_trials, "Trials per evaluation");
  cal->add_option("--iterations", cal_iter, "Bisection steps");
  for (auto* s : {gen, train, eval, study, analyze, replay, serve, cal}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*train) return cmd_train(common, train_all);
    if (*eval) return cmd_eval_forecast(common);
    if (*study) return cmd_simulate_study(common);
    if (*analyze) return cmd_analyze(common, study_path);
    if (*replay) return cmd_replay(common, trial_path);
    if (*serve) return cmd_serve(common, stdio);
    if (*cal) return cmd_calibrate(common, cal_trials, cal_iter);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
