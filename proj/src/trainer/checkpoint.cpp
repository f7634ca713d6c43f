#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/trainer.hpp"

namespace trajcl::trainer {

using nlohmann::json;

Agent Agent::create(const TrainConfig& config, Rng& rng) {
  config.validate();
  const auto f = config.family;
  Agent a;
  a.encoder = encoder::EncoderPair::create(encoder::transition_feature_dim(f), config.context_dim,
                                           config.encoder_hidden, rng);
  a.actor = policy::ActorParams::create(env::state_dim(f), env::action_dim(f), config.context_dim,
                                        config.policy_hidden, rng);
  a.critics = policy::CriticParams::create(env::state_dim(f), env::action_dim(f),
                                           config.context_dim, config.policy_hidden, rng);
  return a;
}

namespace {

json params_to_json(const nn::ParamVector& p) {
  json layout = json::array();
  for (const auto& e : p.layout()) layout.push_back({{"name", e.name}, {"shape", e.shape}});
  return json{{"layout", layout},
              {"values", std::vector<double>(p.values().begin(), p.values().end())}};
}

void params_from_json(const json& j, nn::ParamVector& target, const char* name) {
  std::vector<nn::LayoutEntry> layout;
  for (const auto& e : j.at("layout")) {
    layout.push_back({e.at("name").get<std::string>(), e.at("shape").get<std::vector<std::size_t>>()});
  }
  if (layout != target.layout()) {
    throw ConfigError(std::string("checkpoint network '") + name +
                      "' does not match the layout implied by its config");
  }
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != target.size()) {
    throw ConfigError(std::string("checkpoint network '") + name + "' has the wrong value count");
  }
  std::copy(values.begin(), values.end(), target.values().begin());
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const Agent& a = ckpt.agent;
  return json{{"config", ckpt.config.to_json()},
              {"split", json::parse(env::split_to_json(ckpt.split))},
              {"iteration", ckpt.iteration},
              {"env_steps", ckpt.env_steps},
              {"networks",
               {{"encoder_query", params_to_json(a.encoder.query_params)},
                {"encoder_key", params_to_json(a.encoder.key_params)},
                {"actor", params_to_json(a.actor.params)},
                {"q1", params_to_json(a.critics.q1)},
                {"q2", params_to_json(a.critics.q2)},
                {"q1_target", params_to_json(a.critics.q1_target)},
                {"q2_target", params_to_json(a.critics.q2_target)}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    Checkpoint c;
    c.config = TrainConfig::from_json(j.at("config"));
    c.config.validate();
    c.split = env::split_from_json(j.at("split").dump());
    c.iteration = j.at("iteration").get<int>();
    c.env_steps = j.at("env_steps").get<std::int64_t>();
    // Shapes come from the config; values overwrite the fresh initialization.
    Rng scratch(0);
    c.agent = Agent::create(c.config, scratch);
    const auto& n = j.at("networks");
    params_from_json(n.at("encoder_query"), c.agent.encoder.query_params, "encoder_query");
    params_from_json(n.at("encoder_key"), c.agent.encoder.key_params, "encoder_key");
    params_from_json(n.at("actor"), c.agent.actor.params, "actor");
    params_from_json(n.at("q1"), c.agent.critics.q1, "q1");
    params_from_json(n.at("q2"), c.agent.critics.q2, "q2");
    params_from_json(n.at("q1_target"), c.agent.critics.q1_target, "q1_target");
    params_from_json(n.at("q2_target"), c.agent.critics.q2_target, "q2_target");
    for (const auto& t : c.split.train_tasks) {
      if (t.family != c.config.family) throw ConfigError("checkpoint split family differs from config");
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << checkpoint_to_json(ckpt).dump();
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace trajcl::trainer
