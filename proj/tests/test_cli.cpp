#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajcl/analysis.hpp"
#include "trajcl/cli.hpp"
#include "trajcl/contrastive.hpp"
#include "trajcl/verify.hpp"

using namespace trajcl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "trajcl");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("trajcl-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

// One smoke-scale run shared by the eval/analyze cases.
const fs::path& trained_run() {
  static const fs::path dir = [] {
    const auto d = scratch_dir("trained");
    const auto r = run({"train", "--preset", "smoke", "--run-dir", (d / "run").string(), "--force"});
    REQUIRE(r.code == 0);
    return d / "run";
  }();
  return dir;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"fly"}).code == cli::kExitUsage);
  CHECK(run({"eval"}).code == cli::kExitUsage);
}

TEST_CASE("missing config file names the path") {
  const auto r = run({"train", "--preset", "smoke", "--config", "/nonexistent/cfg.json"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("/nonexistent/cfg.json") != std::string::npos);
}

TEST_CASE("bad config keys are reported") {
  const auto dir = scratch_dir("badkeys");
  std::ofstream(dir / "cfg.json") << R"({"windw": 4, "horizon": "long"})";
  const auto r = run({"train", "--preset", "smoke", "--config", (dir / "cfg.json").string(),
                      "--run-dir", (dir / "run").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("windw") != std::string::npos);
  CHECK(r.err.find("horizon") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "run" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("baseline with a contrastive scale is contradictory") {
  const auto dir = scratch_dir("contra");
  const auto r = run({"train", "--preset", "smoke", "--mode", "baseline", "--tcl-scale", "5",
                      "--run-dir", (dir / "run").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("tcl_scale") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train writes a self-describing run directory") {
  const auto& dir = trained_run();
  for (auto f : {"manifest.json", "config.json", "split.json", "metrics.csv",
                 "checkpoints/final.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["mode"] == "tcl");
  CHECK(manifest["config"] == nlohmann::json::parse(slurp(dir / "config.json")));
  const auto metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind("step,loss_tcl,tcl_acc,loss_q,loss_pi,kl,return_train,return_test\n", 0) == 0);
  CHECK(count_lines(metrics) == 1 + manifest["iterations"].get<std::size_t>());

  // A second train into the same directory needs --force.
  const auto again = run({"train", "--preset", "smoke", "--run-dir", dir.string()});
  CHECK(again.code == cli::kExitUsage);
}

TEST_CASE("run root environment variable") {
  const auto root = scratch_dir("root");
  setenv("TRAJCL_RUN_ROOT", root.c_str(), 1);
  const auto r = run({"train", "--preset", "smoke", "--budget", "200", "--seed", "4",
                      "--mode", "oracle"});
  unsetenv("TRAJCL_RUN_ROOT");
  CHECK(r.code == 0);
  CHECK(fs::exists(root / "oracle-point-goal-2d-seed4" / "manifest.json"));
  fs::remove_all(root);
}

TEST_CASE("config file and overrides merge into the snapshot") {
  const auto dir = scratch_dir("merge");
  std::ofstream(dir / "cfg.json") << R"({"window": 8, "temperature": 0.5})";
  const auto r = run({"train", "--preset", "smoke", "--config", (dir / "cfg.json").string(),
                      "--set", "window=6", "--budget", "200", "--run-dir",
                      (dir / "run").string()});
  REQUIRE(r.code == 0);
  const auto cfg = nlohmann::json::parse(slurp(dir / "run" / "config.json"));
  CHECK(cfg["window"] == 6);
  CHECK(cfg["temperature"] == 0.5);
  CHECK(cfg["env_step_budget"] == 200);
  fs::remove_all(dir);
}

TEST_CASE("eval") {
  const auto ckpt = trained_run() / "checkpoints" / "final.json";
  const auto out = trained_run() / "eval.csv";
  CHECK(run({"eval", "--checkpoint", ckpt.string(), "--n-eval", "0"}).code == cli::kExitUsage);
  CHECK(run({"eval", "--checkpoint", "/nonexistent.json"}).code != 0);

  REQUIRE(run({"eval", "--checkpoint", ckpt.string(), "--seed", "3", "--out", out.string()}).code ==
          0);
  const auto first = slurp(out);
  REQUIRE(run({"eval", "--checkpoint", ckpt.string(), "--seed", "3", "--out", out.string()}).code ==
          0);
  CHECK(slurp(out) == first);
  CHECK(first.rfind("task,mean_return,stderr,n_eval\n", 0) == 0);
  CHECK(count_lines(first) == 1 + 2);

  // A checkpoint whose config disagrees with its networks is rejected.
  auto j = nlohmann::json::parse(slurp(ckpt));
  j["config"]["policy_hidden"] = {7};
  const auto broken = trained_run() / "broken.json";
  std::ofstream(broken) << j.dump();
  CHECK(run({"eval", "--checkpoint", broken.string()}).code != 0);
}

TEST_CASE("analyze") {
  const auto ckpt = trained_run() / "checkpoints" / "final.json";
  const auto out = trained_run() / "analysis";
  CHECK(run({"analyze", "--checkpoint", ckpt.string(), "--task-count", "1"}).code ==
        cli::kExitUsage);
  REQUIRE(run({"analyze", "--checkpoint", ckpt.string(), "--rollouts", "3", "--windows", "2",
               "--out-dir", out.string()})
              .code == 0);
  const std::size_t points = 3 * 3 * 2;
  CHECK(count_lines(slurp(out / "projection.csv")) == 1 + points);
  std::ifstream emb(out / "embeddings.csv");
  const auto set = analysis::read_embeddings_csv(emb);
  CHECK(set.size() == points);
  const auto recomputed = analysis::cluster_metrics(set);
  const auto report = nlohmann::json::parse(slurp(out / "metrics.json"));
  CHECK(report["avg_dist_to_centroid"].get<double>() ==
        doctest::Approx(recomputed.avg_dist_to_centroid).epsilon(1e-12));
  CHECK(report["avg_dist_between_centroids"].get<double>() ==
        doctest::Approx(recomputed.avg_dist_between_centroids).epsilon(1e-12));
  CHECK(report["n_points"] == points);
}

TEST_CASE("verify") {
  const auto r = run({"verify"});
  CHECK(r.code == 0);
  CHECK(r.out.find("all checks passed") != std::string::npos);

  verify::Hooks flipped;
  flipped.similarity = [](const encoder::PosteriorGaussian& q, const encoder::PosteriorGaussian& k) {
    return -contrastive::similarity(q, k);
  };
  const auto results = verify::run_suite(flipped);
  CHECK_FALSE(verify::all_passed(results));
  std::ostringstream table;
  verify::print_table(results, table);
  CHECK(table.str().find("FAIL") != std::string::npos);
}
