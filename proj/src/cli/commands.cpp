#include "trajcl/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajcl/analysis.hpp"
#include "trajcl/errors.hpp"
#include "trajcl/kernels.hpp"
#include "trajcl/trainer.hpp"
#include "trajcl/verify.hpp"

namespace trajcl::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

struct TrainArgs {
  std::string preset = "desk";
  std::string config_path;
  std::vector<std::string> sets;
  std::string mode, family, run_dir;
  std::uint64_t seed = 0;
  double tcl_scale = 0.0;
  std::int64_t budget = 0;
  bool parallel = false, force = false;
};

trainer::TrainConfig resolve_config(const TrainArgs& a, const CLI::App& cmd) {
  auto config = trainer::preset(a.preset);
  bool scale_given = cmd.count("--tcl-scale") > 0;
  json merged = json::object();
  if (!a.config_path.empty()) merged = read_json_file(a.config_path);
  if (!merged.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const auto key = kv.substr(0, eq);
    const auto text = kv.substr(eq + 1);
    const json value = json::accept(text) ? json::parse(text) : json(text);
    merged[key] = value;
  }
  scale_given = scale_given || merged.contains("tcl_scale");
  config = trainer::TrainConfig::from_json(merged, config);
  if (cmd.count("--mode")) config.mode = trainer::parse_mode(a.mode);
  if (cmd.count("--family")) config.family = env::parse_family(a.family);
  if (cmd.count("--seed")) config.seed = a.seed;
  if (cmd.count("--tcl-scale")) config.tcl_scale = a.tcl_scale;
  if (cmd.count("--budget")) config.env_step_budget = a.budget;
  if (cmd.count("--parallel")) config.parallel_collection = a.parallel;
  // Baseline drops the contrastive term unless a scale was asked for, in
  // which case validate() reports the contradiction.
  if (config.mode == trainer::Mode::baseline && !scale_given) config.tcl_scale = 0.0;
  config.validate();
  return config;
}

fs::path default_run_dir(const trainer::TrainConfig& c) {
  const char* root = std::getenv("TRAJCL_RUN_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / (std::string(trainer::to_string(c.mode)) + "-" +
                 std::string(env::to_string(c.family)) + "-seed" + std::to_string(c.seed));
}

int cmd_train(const TrainArgs& a, const CLI::App& cmd, std::ostream& out) {
  const auto config = resolve_config(a, cmd);
  const fs::path dir = a.run_dir.empty() ? default_run_dir(config) : fs::path(a.run_dir);
  if (fs::exists(dir / "manifest.json") && !a.force) {
    throw UsageError("run directory " + dir.string() +
                     " already holds a run; pass --force to replace it");
  }
  fs::create_directories(dir);

  const auto split = env::sample_task_split(config.family, config.n_train, config.n_test,
                                            config.seed, config.horizon, config.discount);
  const std::int64_t warmup = static_cast<std::int64_t>(config.n_train) * config.horizon;
  const std::int64_t phase = static_cast<std::int64_t>(config.n_train) *
                             (config.n_prior + config.n_posterior) * config.horizon;
  const std::int64_t iters =
      config.env_step_budget > warmup ? (config.env_step_budget - warmup) / phase : 0;
  const json manifest{{"mode", std::string(trainer::to_string(config.mode))},
                      {"seed", config.seed},
                      {"start_step", 0},
                      {"end_step", warmup + iters * phase},
                      {"iterations", iters},
                      {"config", config.to_json()},
                      {"artifacts",
                       {{"config", "config.json"},
                        {"split", "split.json"},
                        {"metrics", "metrics.csv"},
                        {"checkpoints", "checkpoints/"}}},
                      {"simd", std::string(kernels::to_string(kernels::active_isa()))}};
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
  write_text(dir / "split.json", env::split_to_json(split) + "\n");
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  out << "training " << trainer::to_string(config.mode) << " on "
      << env::to_string(config.family) << " seed " << config.seed << " for " << iters
      << " iterations -> " << dir.string() << '\n';
  const auto result = trainer::meta_train(config, dir);
  for (const auto& r : result.log) {
    if (!std::isnan(r.return_test)) {
      out << "  iteration " << r.iteration << " steps " << r.env_steps << " test return "
          << r.return_test << '\n';
    }
  }
  out << "done: " << result.log.size() << " iterations, "
      << result.final_checkpoint.env_steps << " environment steps\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, out_csv, tasks = "test", policy = "agent";
  int n_exploration = 0, n_eval = 0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, const CLI::App& cmd, std::ostream& out) {
  const auto ckpt = trainer::load_checkpoint(a.checkpoint);
  const int n_explore = cmd.count("--n-exploration") ? a.n_exploration : ckpt.config.n_exploration;
  const int n_eval = cmd.count("--n-eval") ? a.n_eval : ckpt.config.n_eval;
  if (n_eval < 1) throw ConfigError("--n-eval must be >= 1");
  if (n_explore < 1) throw ConfigError("--n-exploration must be >= 1");
  const auto& tasks = a.tasks == "train" ? ckpt.split.train_tasks : ckpt.split.test_tasks;
  Rng rng = make_rng(a.seed, "eval-cli");
  const auto result = a.policy == "random"
                          ? trainer::random_policy_test(tasks, n_eval, rng)
                          : trainer::meta_test(ckpt.agent, ckpt.config.mode, tasks, n_explore,
                                               n_eval, rng);

  std::ostringstream csv;
  csv << "task,mean_return,stderr,n_eval\n";
  char line[128];
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& r = result.per_task_returns[t];
    const double mean = result.per_task_mean[t];
    double ss = 0.0;
    for (const double v : r) ss += (v - mean) * (v - mean);
    const double se = r.size() > 1 ? std::sqrt(ss / static_cast<double>(r.size() - 1) /
                                               static_cast<double>(r.size()))
                                   : 0.0;
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%zu\n", t, mean, se, r.size());
    csv << line;
    std::snprintf(line, sizeof line, "task %zu: %.3f +- %.3f\n", t, mean, se);
    out << line;
  }
  std::snprintf(line, sizeof line, "mean: %.3f\n", result.mean());
  out << line;
  const fs::path path = a.out_csv.empty() ? fs::path(a.checkpoint).replace_extension(".eval.csv")
                                          : fs::path(a.out_csv);
  write_text(path, csv.str());
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string checkpoint, out_dir, tasks = "train";
  int task_count = 0, rollouts = 20, windows = 4;
  std::uint64_t seed = 0;
};

int cmd_analyze(const AnalyzeArgs& a, const CLI::App& cmd, std::ostream& out) {
  const auto ckpt = trainer::load_checkpoint(a.checkpoint);
  if (ckpt.config.mode == trainer::Mode::oracle) {
    throw ConfigError("oracle checkpoints have no trained encoder to analyze");
  }
  auto tasks = a.tasks == "test" ? ckpt.split.test_tasks : ckpt.split.train_tasks;
  if (cmd.count("--task-count")) {
    if (a.task_count < 1 || static_cast<std::size_t>(a.task_count) > tasks.size()) {
      throw ConfigError("--task-count must lie in [1, " + std::to_string(tasks.size()) + "]");
    }
    tasks.resize(static_cast<std::size_t>(a.task_count));
  }
  if (tasks.size() < 2) {
    throw ConfigError("analysis needs at least two tasks; distance between centroids is undefined");
  }
  Rng rng = make_rng(a.seed, "analyze");
  auto set = analysis::collect_embeddings(ckpt.agent, tasks, a.rollouts, a.windows,
                                          ckpt.config.window, rng);
  set.source = a.checkpoint;
  const auto metrics = analysis::cluster_metrics(set);
  const auto proj = analysis::project_2d(set);

  const fs::path dir = a.out_dir.empty() ? fs::path(a.checkpoint).parent_path() / "analysis"
                                         : fs::path(a.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "embeddings.csv");
    analysis::write_embeddings_csv(set, f);
  }
  {
    std::ofstream f(dir / "projection.csv");
    analysis::write_projection_csv(proj, f);
  }
  write_text(dir / "metrics.json", analysis::metrics_report_json(metrics) + "\n");
  out << "points " << metrics.n_points << ", tasks " << metrics.n_labels << '\n'
      << "avg distance to centroid      " << metrics.avg_dist_to_centroid << '\n'
      << "avg distance between centroids " << metrics.avg_dist_between_centroids << '\n'
      << "wrote " << dir.string() << '\n';
  return kExitOk;
}

int cmd_verify(std::ostream& out) {
  const auto results = verify::run_suite();
  verify::print_table(results, out);
  const bool ok = verify::all_passed(results);
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory contrastive meta-RL on point-mass task families", "trajcl"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "meta-train an agent and write a run directory");
  train->add_option("--preset", ta.preset, "desk, smoke, mujoco-analogue, metaworld-analogue");
  train->add_option("--config", ta.config_path, "JSON file of TrainConfig keys");
  train->add_option("--set", ta.sets, "key=value override (repeatable)");
  train->add_option("--mode", ta.mode, "tcl, baseline or oracle");
  train->add_option("--family", ta.family, "point-goal-2d, point-vel-1d, point-drag-2d");
  train->add_option("--seed", ta.seed);
  train->add_option("--tcl-scale", ta.tcl_scale);
  train->add_option("--budget", ta.budget, "environment-step budget");
  train->add_flag("--parallel", ta.parallel, "collect tasks concurrently");
  train->add_option("--run-dir", ta.run_dir, "default: $TRAJCL_RUN_ROOT/<mode>-<family>-seed<seed>");
  train->add_flag("--force", ta.force, "replace an existing run directory");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "meta-test a checkpoint on held-out tasks");
  eval->add_option("--checkpoint", ea.checkpoint)->required();
  eval->add_option("--n-exploration", ea.n_exploration);
  eval->add_option("--n-eval", ea.n_eval);
  eval->add_option("--seed", ea.seed);
  eval->add_option("--tasks", ea.tasks)->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--policy", ea.policy, "agent or random")->check(CLI::IsMember({"agent", "random"}));
  eval->add_option("--out", ea.out_csv, "CSV path (default: <checkpoint>.eval.csv)");

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "embedding cluster metrics and 2-D projection");
  analyze->add_option("--checkpoint", aa.checkpoint)->required();
  analyze->add_option("--tasks", aa.tasks)->check(CLI::IsMember({"train", "test"}));
  analyze->add_option("--task-count", aa.task_count, "use only the first k tasks");
  analyze->add_option("--rollouts", aa.rollouts, "rollouts per task");
  analyze->add_option("--windows", aa.windows, "windows per trajectory");
  analyze->add_option("--seed", aa.seed);
  analyze->add_option("--out-dir", aa.out_dir);

  auto* verify_cmd = app.add_subcommand("verify", "closed-form and gradient self-checks");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta, *train, out);
    if (*eval) return cmd_eval(ea, *eval, out);
    if (*analyze) return cmd_analyze(aa, *analyze, out);
    if (*verify_cmd) return cmd_verify(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace trajcl::cli
