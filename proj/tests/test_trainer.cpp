#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/trainer.hpp"

using namespace trajcl;
using namespace trajcl::trainer;
namespace fs = std::filesystem;

namespace {

TrainConfig smoke(Mode mode = Mode::tcl) {
  auto c = preset("smoke");
  c.mode = mode;
  if (mode != Mode::tcl) c.tcl_scale = 0.0;
  return c;
}

std::string csv_of(const std::vector<MetricsRecord>& log) {
  std::string s = metrics_csv_header() + "\n";
  for (const auto& r : log) s += metrics_csv_row(r) + "\n";
  return s;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("trajcl-test-" + name);
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

}  // namespace

TEST_CASE("config validation names the key") {
  auto c = smoke();
  c.window = 100;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("window") != std::string::npos);
  }
  auto b = smoke(Mode::baseline);
  b.tcl_scale = 5.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  auto t = smoke();
  t.temperature = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
  for (auto name : {"desk", "smoke", "mujoco-analogue", "metaworld-analogue"}) {
    CHECK_NOTHROW(preset(name).validate());
  }
}

TEST_CASE("config json round trip and key errors") {
  const auto c = preset("mujoco-analogue");
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  const auto patched = TrainConfig::from_json(nlohmann::json{{"window", 8}, {"mode", "oracle"}},
                                              preset("smoke"));
  CHECK(patched.window == 8);
  CHECK(patched.mode == Mode::oracle);
  CHECK(patched.horizon == 16);

  try {
    TrainConfig::from_json(nlohmann::json{{"windw", 8}, {"horizon", "long"}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("windw") != std::string::npos);
    CHECK(msg.find("horizon") != std::string::npos);
  }
  CHECK(parse_mode(to_string(Mode::baseline)) == Mode::baseline);
  CHECK_THROWS_AS(parse_mode("maml"), ConfigError);
}

TEST_CASE("collect_rollouts contract") {
  auto cfg = smoke();
  Rng rng(1);
  const auto agent = Agent::create(cfg, rng);
  const auto split = env::sample_task_split(cfg.family, 2, 1, 3, cfg.horizon);
  const auto& task = split.train_tasks[0];
  CHECK(collect_rollouts(task, 0, RolloutMode::prior, 0, agent, nullptr, 4, 0, rng).empty());

  const auto prior = collect_rollouts(task, 0, RolloutMode::prior, 3, agent, nullptr, 4, 10, rng);
  REQUIRE(prior.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(prior[k].z_source == encoder::PosteriorGaussian::unit(cfg.context_dim));
    CHECK(prior[k].trajectory.trajectory_id == static_cast<std::int64_t>(10 + k));
    CHECK(prior[k].trajectory.size() == static_cast<std::size_t>(cfg.horizon));
  }
  CHECK(prior[0].z != prior[1].z);

  Rng a(5), b(5);
  const auto r1 = collect_rollouts(task, 0, RolloutMode::prior, 2, agent, nullptr, 4, 0, a);
  const auto r2 = collect_rollouts(task, 0, RolloutMode::prior, 2, agent, nullptr, 4, 0, b);
  for (std::size_t k = 0; k < 2; ++k) CHECK(r1[k].trajectory == r2[k].trajectory);

  replay::TaskReplayBuffer empty(0);
  CHECK_THROWS_AS(
      collect_rollouts(task, 0, RolloutMode::posterior, 1, agent, &empty, 4, 0, rng),
      EmptyBufferError);
  replay::TaskReplayBuffer filled(0);
  filled.add_trajectory(prior[0].trajectory);
  const auto post = collect_rollouts(task, 0, RolloutMode::posterior, 1, agent, &filled, 4, 0, rng);
  CHECK_FALSE(post[0].z_source == encoder::PosteriorGaussian::unit(cfg.context_dim));

  const auto oracle_z = env::oracle_context(task, cfg.context_dim);
  const auto fixed =
      collect_rollouts(task, 0, RolloutMode::prior, 1, agent, nullptr, 4, 0, rng, oracle_z);
  CHECK(fixed[0].z == oracle_z);
}

TEST_CASE("query/key sets pair windows within trajectories") {
  auto cfg = smoke();
  cfg.n_train = 16;
  Trainer trainer(cfg);
  trainer.warmup();
  trainer.collect();
  std::vector<int> ids(16);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(2);
  const auto sets = build_query_key_sets(trainer.buffers(), trainer.agent().encoder, ids,
                                         cfg.window, rng);
  REQUIRE(sets.batch.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(sets.query_sources[i] == sets.key_sources[i]);
    for (std::size_t j = 0; j < 16; ++j) {
      if (i != j) CHECK(sets.query_sources[i] != sets.key_sources[j]);
    }
  }
  const auto report = contrastive::tcl_loss(sets.batch, 1.0);
  CHECK(report.logits.rows == 16);
  CHECK(report.logits.cols == 16);

  const auto single = build_query_key_sets(trainer.buffers(), trainer.agent().encoder, {3},
                                           cfg.window, rng);
  CHECK(contrastive::tcl_loss(single.batch, 1.0).loss == 0.0);
  CHECK_THROWS_AS(build_query_key_sets(trainer.buffers(), trainer.agent().encoder, {99},
                                       cfg.window, rng),
                  ConfigError);
}

TEST_CASE("trainer call order is enforced") {
  Trainer t(smoke());
  CHECK_THROWS_AS(t.train_step(), UsageError);
  CHECK_THROWS_AS(t.collect(), UsageError);
  t.warmup();
  CHECK_THROWS_AS(t.warmup(), UsageError);
}

TEST_CASE("environment steps are counted exactly") {
  auto cfg = smoke();
  cfg.n_prior = 2;
  cfg.n_posterior = 3;
  Trainer t(cfg);
  t.warmup();
  CHECK(t.env_steps() == cfg.n_train * cfg.horizon);
  for (int i = 0; i < 3; ++i) t.run_iteration(false);
  const std::int64_t trajectories = cfg.n_train * (1 + 3 * (cfg.n_prior + cfg.n_posterior));
  CHECK(t.env_steps() == trajectories * cfg.horizon);
  CHECK(t.steps_per_collection() == cfg.n_train * 5 * cfg.horizon);
  std::size_t stored = 0, count = 0;
  for (const auto& b : t.buffers()) {
    stored += b.size();
    count += b.trajectories().size();
  }
  CHECK(static_cast<std::int64_t>(stored) == t.env_steps());
  CHECK(static_cast<std::int64_t>(count) == trajectories);
  CHECK(t.update_count() == static_cast<std::uint64_t>(3 * cfg.steps_per_iteration));
}

TEST_CASE("meta_train is deterministic, including parallel collection") {
  const auto cfg = smoke();
  const auto a = meta_train(cfg);
  const auto b = meta_train(cfg);
  CHECK(csv_of(a.log) == csv_of(b.log));
  auto par = cfg;
  par.parallel_collection = true;
  CHECK(csv_of(meta_train(par).log) == csv_of(a.log));

  auto other = cfg;
  other.seed = 2;
  CHECK(csv_of(meta_train(other).log) != csv_of(a.log));

  std::int64_t last = 0;
  for (const auto& r : a.log) {
    CHECK(r.env_steps > last);
    last = r.env_steps;
  }
}

TEST_CASE("contrastive scale zero reproduces the baseline") {
  auto zero = smoke();
  zero.tcl_scale = 0.0;
  const auto base_cfg = smoke(Mode::baseline);
  const auto z = meta_train(zero);
  const auto b = meta_train(base_cfg);
  CHECK(csv_of(z.log) == csv_of(b.log));
  CHECK(z.final_checkpoint.agent.encoder.query_params ==
        b.final_checkpoint.agent.encoder.query_params);
  CHECK(z.final_checkpoint.agent.actor.params == b.final_checkpoint.agent.actor.params);
  CHECK(z.final_checkpoint.agent.critics.q1 == b.final_checkpoint.agent.critics.q1);

  Trainer tz(zero), tb(base_cfg);
  tz.warmup();
  tb.warmup();
  for (int i = 0; i < 4; ++i) {
    tz.train_step();
    tb.train_step();
    CHECK(tz.last_encoder_gradient() == tb.last_encoder_gradient());
  }
  for (const auto& r : b.log) {
    CHECK(std::isnan(r.loss_tcl));
    CHECK(std::isnan(r.tcl_acc));
    CHECK(std::isfinite(r.kl));
  }
}

TEST_CASE("contrastive loss changes the encoder gradient") {
  auto with = smoke();
  auto without = smoke();
  without.tcl_scale = 0.0;
  Trainer a(with), b(without);
  a.warmup();
  b.warmup();
  const auto sa = a.train_step();
  b.train_step();
  CHECK(std::isfinite(sa.loss_tcl));
  CHECK(a.last_encoder_gradient() != b.last_encoder_gradient());
}

TEST_CASE("key tracks the updated query after each step") {
  Trainer t(smoke());
  t.warmup();
  for (int i = 0; i < 3; ++i) {
    const auto key_before = t.agent().encoder.key_params;
    t.train_step();
    const auto& q = t.agent().encoder.query_params.values();
    const auto& k = t.agent().encoder.key_params.values();
    const double m = t.config().momentum;
    for (std::size_t j = 0; j < q.size(); ++j) {
      REQUIRE(k[j] == doctest::Approx(m * key_before.values()[j] + (1 - m) * q[j]).epsilon(1e-14));
    }
  }

  Trainer base(smoke(Mode::baseline));
  base.warmup();
  const auto key0 = base.agent().encoder.key_params;
  base.train_step();
  CHECK(base.agent().encoder.key_params == key0);
  CHECK_FALSE(base.agent().encoder.query_params == key0);
}

TEST_CASE("meta-test leaves parameters untouched") {
  Trainer t(smoke());
  t.warmup();
  t.run_iteration(false);
  const auto before = checkpoint_to_json(t.checkpoint()).dump();
  const auto updates = t.update_count();
  Rng rng(3);
  const auto res = t.evaluate_test_tasks(rng);
  CHECK(res.per_task_mean.size() == static_cast<std::size_t>(t.config().n_test));
  for (const auto& r : res.per_task_returns) {
    CHECK(r.size() == static_cast<std::size_t>(t.config().n_eval));
  }
  CHECK(t.update_count() == updates);
  CHECK(checkpoint_to_json(t.checkpoint()).dump() == before);
  CHECK_THROWS_AS(meta_test(t.agent(), Mode::tcl, t.split().test_tasks, 2, 0, rng), ConfigError);
}

TEST_CASE("oracle mode skips the encoder") {
  const auto res = meta_train(smoke(Mode::oracle));
  REQUIRE_FALSE(res.log.empty());
  for (const auto& r : res.log) {
    CHECK(std::isnan(r.loss_tcl));
    CHECK(std::isnan(r.kl));
    CHECK(std::isfinite(r.loss_q));
  }
  Trainer t(smoke(Mode::oracle));
  t.warmup();
  Rng rng(1);
  CHECK_THROWS_AS(t.probe_contrastive_accuracy(1, rng), UsageError);
}

TEST_CASE("budget smaller than one collection phase stops after warmup") {
  auto cfg = smoke();
  cfg.env_step_budget = 60;
  const auto res = meta_train(cfg);
  CHECK(res.log.empty());
  CHECK(res.final_checkpoint.env_steps == cfg.n_train * cfg.horizon);
  CHECK(res.final_checkpoint.iteration == 0);
}

TEST_CASE("contrastive loss decreases over 50 iterations on a frozen buffer") {
  auto cfg = smoke();
  cfg.n_train = 8;
  cfg.steps_per_iteration = 20;
  Trainer t(cfg);
  t.warmup();
  t.collect();
  // Iteration means of the loss; no further collection, so the buffer is fixed.
  std::vector<double> means;
  for (int it = 0; it < 50; ++it) {
    double sum = 0.0;
    for (int s = 0; s < cfg.steps_per_iteration; ++s) sum += t.train_step().loss_tcl;
    means.push_back(sum / cfg.steps_per_iteration);
  }
  CHECK(means.front() == doctest::Approx(std::log(8.0)).epsilon(0.01));
  CHECK(means.back() < means.front());
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch_dir("ckpt");
  Trainer t(smoke());
  t.warmup();
  t.run_iteration(false);
  const auto ck = t.checkpoint();
  save_checkpoint(ck, dir / "a.json");
  CHECK_FALSE(fs::exists(dir / "a.json.tmp"));
  const auto back = load_checkpoint(dir / "a.json");
  CHECK(back.agent.encoder.query_params == ck.agent.encoder.query_params);
  CHECK(back.agent.encoder.key_params == ck.agent.encoder.key_params);
  CHECK(back.agent.actor.params == ck.agent.actor.params);
  CHECK(back.agent.critics.q2_target == ck.agent.critics.q2_target);
  CHECK(back.split == ck.split);
  CHECK(back.iteration == ck.iteration);
  CHECK(back.env_steps == ck.env_steps);
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(ck));

  auto j = checkpoint_to_json(ck);
  j["config"]["context_dim"] = 6;
  CHECK_THROWS_AS(checkpoint_from_json(j), ConfigError);
  CHECK_THROWS(load_checkpoint(dir / "missing.json"));
  fs::remove_all(dir);
}

TEST_CASE("meta_train writes metrics and checkpoints") {
  const auto dir = scratch_dir("run");
  const auto cfg = smoke();
  const auto res = meta_train(cfg, dir);
  const auto csv = slurp(dir / "metrics.csv");
  CHECK(csv == csv_of(res.log));
  CHECK(fs::exists(dir / "checkpoints" / "final.json"));
  // 9 iterations with eval every 2: iterations 2, 4, 6, 8 and the last.
  REQUIRE(res.log.size() == 9);
  CHECK(res.checkpoint_paths.size() == 6);
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    const bool evaluated = (i + 1) % 2 == 0 || i + 1 == res.log.size();
    CHECK(std::isnan(res.log[i].return_test) != evaluated);
  }
  fs::remove_all(dir);
}
