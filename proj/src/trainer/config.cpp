#include <functional>
#include <map>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/trainer.hpp"

namespace trajcl::trainer {

using nlohmann::json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::tcl: return "tcl";
    case Mode::baseline: return "baseline";
    case Mode::oracle: return "oracle";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "tcl") return Mode::tcl;
  if (name == "baseline") return Mode::baseline;
  if (name == "oracle") return Mode::oracle;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected tcl, baseline, oracle)");
}

namespace {

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(std::string("config key '") + key + "': " + what);
}

}  // namespace

void TrainConfig::validate() const {
  require(n_train >= 1, "n_train", "must be >= 1");
  require(n_test >= 1, "n_test", "must be >= 1");
  require(horizon >= 1, "horizon", "must be >= 1");
  require(discount >= 0.0 && discount <= 1.0, "discount", "must be in [0, 1]");
  require(context_dim >= 1, "context_dim", "must be >= 1");
  require(context_dim >= env::task_vector_dim(family), "context_dim",
          "must hold the oracle task vector");
  require(!encoder_hidden.empty(), "encoder_hidden", "needs at least one hidden layer");
  require(!policy_hidden.empty(), "policy_hidden", "needs at least one hidden layer");
  for (auto h : encoder_hidden) require(h >= 1, "encoder_hidden", "sizes must be >= 1");
  for (auto h : policy_hidden) require(h >= 1, "policy_hidden", "sizes must be >= 1");
  require(window >= 1, "window", "must be >= 1");
  require(window <= static_cast<std::size_t>(horizon), "window", "must not exceed horizon");
  require(tcl_scale >= 0.0, "tcl_scale", "must be >= 0");
  require(temperature > 0.0, "temperature", "must be > 0");
  require(momentum >= 0.0 && momentum <= 1.0, "momentum", "must be in [0, 1]");
  require(kl_weight >= 0.0, "kl_weight", "must be >= 0");
  require(lr_encoder > 0.0, "lr_encoder", "must be > 0");
  require(lr_policy > 0.0, "lr_policy", "must be > 0");
  require(entropy_weight >= 0.0, "entropy_weight", "must be >= 0");
  require(reward_scale > 0.0, "reward_scale", "must be > 0");
  require(target_rate >= 0.0 && target_rate <= 1.0, "target_rate", "must be in [0, 1]");
  require(n_prior >= 0, "n_prior", "must be >= 0");
  require(n_posterior >= 0, "n_posterior", "must be >= 0");
  require(n_prior + n_posterior >= 1, "n_prior", "n_prior + n_posterior must be >= 1");
  require(steps_per_iteration >= 1, "steps_per_iteration", "must be >= 1");
  require(env_step_budget > 0, "env_step_budget", "must be > 0");
  require(meta_batch >= 0, "meta_batch", "must be >= 0");
  require(same_task_negatives || meta_batch <= n_train, "meta_batch",
          "cannot exceed n_train when sampling tasks without replacement");
  require(rl_batch >= 1, "rl_batch", "must be >= 1");
  require(buffer_capacity >= static_cast<std::size_t>(horizon), "buffer_capacity",
          "must hold at least one trajectory");
  require(eval_interval >= 1, "eval_interval", "must be >= 1");
  require(n_exploration >= 1, "n_exploration", "must be >= 1");
  require(n_eval >= 1, "n_eval", "must be >= 1");
  require(mode != Mode::baseline || tcl_scale == 0.0, "tcl_scale",
          "baseline mode trains without the contrastive loss; tcl_scale must be 0");
}

std::size_t TrainConfig::effective_meta_batch() const {
  return meta_batch == 0 ? static_cast<std::size_t>(n_train)
                         : static_cast<std::size_t>(meta_batch);
}

json TrainConfig::to_json() const {
  return json{{"family", std::string(env::to_string(family))},
              {"n_train", n_train},
              {"n_test", n_test},
              {"horizon", horizon},
              {"discount", discount},
              {"context_dim", context_dim},
              {"encoder_hidden", encoder_hidden},
              {"policy_hidden", policy_hidden},
              {"window", window},
              {"tcl_scale", tcl_scale},
              {"temperature", temperature},
              {"momentum", momentum},
              {"kl_weight", kl_weight},
              {"same_task_negatives", same_task_negatives},
              {"lr_encoder", lr_encoder},
              {"lr_policy", lr_policy},
              {"entropy_weight", entropy_weight},
              {"reward_scale", reward_scale},
              {"target_rate", target_rate},
              {"n_prior", n_prior},
              {"n_posterior", n_posterior},
              {"steps_per_iteration", steps_per_iteration},
              {"env_step_budget", env_step_budget},
              {"meta_batch", meta_batch},
              {"rl_batch", rl_batch},
              {"buffer_capacity", buffer_capacity},
              {"eval_interval", eval_interval},
              {"n_exploration", n_exploration},
              {"n_eval", n_eval},
              {"parallel_collection", parallel_collection},
              {"seed", seed},
              {"mode", std::string(to_string(mode))}};
}

TrainConfig TrainConfig::from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  using Setter = std::function<void(TrainConfig&, const json&)>;
  // Typed member setters; json::get throws type_error on mismatch.
  auto num = [](auto TrainConfig::*m) -> Setter {
    return [m](TrainConfig& c, const json& v) {
      if (!v.is_number() && !v.is_boolean()) throw ConfigError("expected a number");
      c.*m = v.get<std::remove_reference_t<decltype(c.*m)>>();
    };
  };
  const std::map<std::string, Setter> setters{
      {"family", [](TrainConfig& c, const json& v) { c.family = env::parse_family(v.get<std::string>()); }},
      {"n_train", num(&TrainConfig::n_train)},
      {"n_test", num(&TrainConfig::n_test)},
      {"horizon", num(&TrainConfig::horizon)},
      {"discount", num(&TrainConfig::discount)},
      {"context_dim", num(&TrainConfig::context_dim)},
      {"encoder_hidden", [](TrainConfig& c, const json& v) { c.encoder_hidden = v.get<std::vector<std::size_t>>(); }},
      {"policy_hidden", [](TrainConfig& c, const json& v) { c.policy_hidden = v.get<std::vector<std::size_t>>(); }},
      {"window", num(&TrainConfig::window)},
      {"tcl_scale", num(&TrainConfig::tcl_scale)},
      {"temperature", num(&TrainConfig::temperature)},
      {"momentum", num(&TrainConfig::momentum)},
      {"kl_weight", num(&TrainConfig::kl_weight)},
      {"same_task_negatives", num(&TrainConfig::same_task_negatives)},
      {"lr_encoder", num(&TrainConfig::lr_encoder)},
      {"lr_policy", num(&TrainConfig::lr_policy)},
      {"entropy_weight", num(&TrainConfig::entropy_weight)},
      {"reward_scale", num(&TrainConfig::reward_scale)},
      {"target_rate", num(&TrainConfig::target_rate)},
      {"n_prior", num(&TrainConfig::n_prior)},
      {"n_posterior", num(&TrainConfig::n_posterior)},
      {"steps_per_iteration", num(&TrainConfig::steps_per_iteration)},
      {"env_step_budget", num(&TrainConfig::env_step_budget)},
      {"meta_batch", num(&TrainConfig::meta_batch)},
      {"rl_batch", num(&TrainConfig::rl_batch)},
      {"buffer_capacity", num(&TrainConfig::buffer_capacity)},
      {"eval_interval", num(&TrainConfig::eval_interval)},
      {"n_exploration", num(&TrainConfig::n_exploration)},
      {"n_eval", num(&TrainConfig::n_eval)},
      {"parallel_collection", num(&TrainConfig::parallel_collection)},
      {"seed", num(&TrainConfig::seed)},
      {"mode", [](TrainConfig& c, const json& v) { c.mode = parse_mode(v.get<std::string>()); }},
  };

  TrainConfig c = base;
  std::string problems;
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      problems += "\n  unknown key '" + key + "'";
      continue;
    }
    try {
      it->second(c, value);
    } catch (const json::exception& e) {
      problems += "\n  key '" + key + "': " + e.what();
    } catch (const ConfigError& e) {
      problems += "\n  key '" + key + "': " + e.what();
    }
  }
  if (!problems.empty()) throw ConfigError("invalid configuration:" + problems);
  return c;
}

TrainConfig TrainConfig::from_json(const json& j) { return from_json(j, TrainConfig{}); }

TrainConfig preset(std::string_view name) {
  TrainConfig c;
  if (name == "desk") return c;
  if (name == "smoke") {
    c.n_train = 3;
    c.n_test = 2;
    c.horizon = 16;
    c.window = 4;
    c.encoder_hidden = {32, 32};
    c.policy_hidden = {32, 32};
    c.steps_per_iteration = 5;
    c.env_step_budget = 1000;
    c.rl_batch = 16;
    c.eval_interval = 2;
    return c;
  }
  if (name == "mujoco-analogue") {
    c.n_train = 16;
    c.n_test = 4;
    c.horizon = 200;
    c.window = 64;
    c.tcl_scale = 1.0;
    c.policy_hidden = {300, 300};
    c.rl_batch = 256;
    c.meta_batch = 16;
    c.steps_per_iteration = 4000;
    c.env_step_budget = 1'000'000;
    return c;
  }
  if (name == "metaworld-analogue") {
    c.n_train = 50;
    c.n_test = 10;
    c.horizon = 200;
    c.window = 64;
    c.context_dim = 7;
    c.encoder_hidden = {400, 400};
    c.policy_hidden = {400, 400};
    c.rl_batch = 256;
    c.meta_batch = 16;
    c.steps_per_iteration = 4000;
    c.env_step_budget = 1'000'000;
    c.n_exploration = 10;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace trajcl::trainer
