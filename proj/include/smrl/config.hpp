#pragma once

// Experiment configuration: one JSON document. Hyperparameters live under
// "overrides" as flat dotted keys ("ppo.gamma", "env.dt") checked against a
// typed registry; unknown keys or wrong types are hard errors, never
// silently ignored. The resolved form (defaults + overrides) can be echoed
// back out and reproduces the run when fed in again.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smrl/binio.hpp"
#include "smrl/crawler.hpp"
#include "smrl/harness.hpp"

namespace smrl {

using Json = nlohmann::json;

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::vector<std::string> presets = preset_names();
  std::vector<long long> budgets = {500, 1000, 2000};
  int seeds_per_cell = 10;
  std::vector<TaskKind> tasks = {TaskKind::kWalk};
  int jobs = 1;
  std::string out_dir = "runs";
  bool timings_in_csv = false;  // keeping it false keeps CSVs byte-stable
  HarnessConfig harness;
  std::map<std::string, double> env_overrides;  // dotted key -> value
  std::optional<int> horizon_walk;
  std::optional<int> horizon_jump;
};

namespace detail {

inline const std::map<std::string, double CrawlerConfig::*>& env_fields() {
  static const std::map<std::string, double CrawlerConfig::*> m = {
      {"env.link_length", &CrawlerConfig::link_length},
      {"env.body_mass", &CrawlerConfig::body_mass},
      {"env.body_inertia", &CrawlerConfig::body_inertia},
      {"env.joint_inertia", &CrawlerConfig::joint_inertia},
      {"env.joint_damping", &CrawlerConfig::joint_damping},
      {"env.torque_limit", &CrawlerConfig::torque_limit},
      {"env.joint_angle_limit", &CrawlerConfig::joint_angle_limit},
      {"env.dt", &CrawlerConfig::dt},
      {"env.gravity", &CrawlerConfig::gravity},
      {"env.contact_kp", &CrawlerConfig::contact_kp},
      {"env.contact_kd", &CrawlerConfig::contact_kd},
      {"env.friction_mu", &CrawlerConfig::friction_mu},
      {"env.friction_vs", &CrawlerConfig::friction_vs},
      {"env.pitch_damping", &CrawlerConfig::pitch_damping},
      {"env.fall_z", &CrawlerConfig::fall_z},
      {"env.z_terminate", &CrawlerConfig::z_terminate},
  };
  return m;
}

inline const std::map<std::string, double PpoConfig::*>& ppo_double_fields() {
  static const std::map<std::string, double PpoConfig::*> m = {
      {"ppo.gamma", &PpoConfig::gamma},
      {"ppo.lambda", &PpoConfig::lambda},
      {"ppo.clip_eps", &PpoConfig::clip_eps},
      {"ppo.lr_policy", &PpoConfig::lr_policy},
      {"ppo.lr_value", &PpoConfig::lr_value},
      {"ppo.entropy_coef", &PpoConfig::entropy_coef},
  };
  return m;
}

inline const std::map<std::string, int PpoConfig::*>& ppo_int_fields() {
  static const std::map<std::string, int PpoConfig::*> m = {
      {"ppo.epochs_per_update", &PpoConfig::epochs_per_update},
      {"ppo.minibatch_size", &PpoConfig::minibatch_size},
  };
  return m;
}

inline const std::map<std::string, double SelfModelHyper::*>&
model_double_fields() {
  static const std::map<std::string, double SelfModelHyper::*> m = {
      {"model.lr", &SelfModelHyper::lr},
      {"model.val_fraction", &SelfModelHyper::val_fraction},
      {"model.weight_decay", &SelfModelHyper::weight_decay},
  };
  return m;
}

inline const std::map<std::string, int SelfModelHyper::*>&
model_int_fields() {
  static const std::map<std::string, int SelfModelHyper::*> m = {
      {"model.batch_size", &SelfModelHyper::batch_size},
      {"model.max_epochs", &SelfModelHyper::max_epochs},
      {"model.patience", &SelfModelHyper::patience},
  };
  return m;
}

inline long long json_int(const Json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw std::invalid_argument("config: \"" + key + "\" must be an integer");
  return v.get<long long>();
}

inline double json_num(const Json& v, const std::string& key) {
  if (!v.is_number())
    throw std::invalid_argument("config: \"" + key + "\" must be a number");
  return v.get<double>();
}

inline int json_positive_int(const Json& v, const std::string& key) {
  const long long n = json_int(v, key);
  if (n < 1)
    throw std::invalid_argument("config: \"" + key + "\" must be >= 1");
  return static_cast<int>(n);
}

}  // namespace detail

inline void apply_override(ExperimentConfig& ec, const std::string& key,
                           const Json& v) {
  if (auto it = detail::env_fields().find(key);
      it != detail::env_fields().end()) {
    ec.env_overrides[key] = detail::json_num(v, key);
    return;
  }
  if (key == "env.horizon_walk") {
    ec.horizon_walk = detail::json_positive_int(v, key);
    return;
  }
  if (key == "env.horizon_jump") {
    ec.horizon_jump = detail::json_positive_int(v, key);
    return;
  }
  if (auto it = detail::ppo_double_fields().find(key);
      it != detail::ppo_double_fields().end()) {
    ec.harness.ppo.*(it->second) = detail::json_num(v, key);
    return;
  }
  if (auto it = detail::ppo_int_fields().find(key);
      it != detail::ppo_int_fields().end()) {
    ec.harness.ppo.*(it->second) = detail::json_positive_int(v, key);
    return;
  }
  if (key == "ppo.rollout_batch") {
    ec.harness.ppo.rollout_batch = detail::json_positive_int(v, key);
    return;
  }
  if (key == "model.weight_decay") {
    const double x = detail::json_num(v, key);
    if (x < 0.0)
      throw std::invalid_argument(
          "config: \"model.weight_decay\" must be >= 0");
    ec.harness.model.weight_decay = x;
    return;
  }
  if (auto it = detail::model_double_fields().find(key);
      it != detail::model_double_fields().end()) {
    ec.harness.model.*(it->second) = detail::json_num(v, key);
    return;
  }
  if (auto it = detail::model_int_fields().find(key);
      it != detail::model_int_fields().end()) {
    ec.harness.model.*(it->second) = detail::json_positive_int(v, key);
    return;
  }
  if (key == "model.hidden") {
    if (!v.is_array() || v.empty())
      throw std::invalid_argument(
          "config: \"model.hidden\" must be a non-empty integer array");
    std::vector<int> hidden;
    for (const auto& e : v) hidden.push_back(detail::json_positive_int(e, key));
    ec.harness.model.hidden = std::move(hidden);
    return;
  }
  if (key == "harness.ppo_budget_model") {
    const long long n = detail::json_int(v, key);
    if (n < 0)
      throw std::invalid_argument("config: \"" + key + "\" must be >= 0");
    ec.harness.ppo_budget_model = n;
    return;
  }
  if (key == "harness.eval_episodes") {
    ec.harness.eval_episodes = detail::json_positive_int(v, key);
    return;
  }
  throw std::invalid_argument("config: unknown override key \"" + key + "\"");
}

inline ExperimentConfig parse_experiment_config(const Json& j) {
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be an object");
  ExperimentConfig ec;
  for (const auto& [key, v] : j.items()) {
    if (key == "master_seed") {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw std::invalid_argument("config: \"master_seed\" must be integer");
      ec.master_seed = v.get<std::uint64_t>();
    } else if (key == "presets") {
      if (!v.is_array() || v.empty())
        throw std::invalid_argument("config: \"presets\" must be a non-empty array");
      ec.presets.clear();
      for (const auto& e : v) {
        if (!e.is_string())
          throw std::invalid_argument("config: preset names must be strings");
        preset(e.get<std::string>());  // throws on unknown names
        ec.presets.push_back(e.get<std::string>());
      }
    } else if (key == "budgets") {
      if (!v.is_array() || v.empty())
        throw std::invalid_argument("config: \"budgets\" must be a non-empty array");
      ec.budgets.clear();
      for (const auto& e : v) {
        const long long b = detail::json_int(e, key);
        if (b < 1)
          throw std::invalid_argument("config: budgets must be >= 1");
        ec.budgets.push_back(b);
      }
    } else if (key == "seeds_per_cell") {
      ec.seeds_per_cell = detail::json_positive_int(v, key);
    } else if (key == "tasks") {
      if (!v.is_array() || v.empty())
        throw std::invalid_argument("config: \"tasks\" must be a non-empty array");
      ec.tasks.clear();
      for (const auto& e : v) {
        if (!e.is_string())
          throw std::invalid_argument("config: task names must be strings");
        ec.tasks.push_back(parse_task(e.get<std::string>()));
      }
    } else if (key == "jobs") {
      ec.jobs = detail::json_positive_int(v, key);
    } else if (key == "out_dir") {
      if (!v.is_string())
        throw std::invalid_argument("config: \"out_dir\" must be a string");
      ec.out_dir = v.get<std::string>();
    } else if (key == "timings_in_csv") {
      if (!v.is_boolean())
        throw std::invalid_argument("config: \"timings_in_csv\" must be a bool");
      ec.timings_in_csv = v.get<bool>();
    } else if (key == "overrides") {
      if (!v.is_object())
        throw std::invalid_argument("config: \"overrides\" must be an object");
      for (const auto& [okey, oval] : v.items()) apply_override(ec, okey, oval);
    } else {
      throw std::invalid_argument("config: unknown key \"" + key + "\"");
    }
  }
  return ec;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const std::vector<std::uint8_t> raw = read_file(path);
  Json j;
  try {
    j = Json::parse(raw.begin(), raw.end());
  } catch (const Json::exception& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

inline void apply_env_overrides(CrawlerConfig& c,
                                const std::map<std::string, double>& over) {
  for (const auto& [key, value] : over) {
    auto it = detail::env_fields().find(key);
    if (it == detail::env_fields().end())
      throw std::logic_error("config: unregistered env override " + key);
    c.*(it->second) = value;
  }
}

// Every tunable with its effective value. Feeding this document back in
// reproduces the run exactly.
inline Json resolved_config_json(const ExperimentConfig& ec) {
  Json j;
  j["master_seed"] = ec.master_seed;
  j["presets"] = ec.presets;
  j["budgets"] = ec.budgets;
  std::vector<std::string> tasks;
  for (TaskKind t : ec.tasks) tasks.emplace_back(task_name(t));
  j["tasks"] = tasks;
  j["seeds_per_cell"] = ec.seeds_per_cell;
  j["jobs"] = ec.jobs;
  j["out_dir"] = ec.out_dir;
  j["timings_in_csv"] = ec.timings_in_csv;

  Json o;
  CrawlerConfig env_template;
  apply_env_overrides(env_template, ec.env_overrides);
  for (const auto& [key, ptr] : detail::env_fields())
    o[key] = env_template.*ptr;
  o["env.horizon_walk"] = ec.horizon_walk.value_or(500);
  o["env.horizon_jump"] = ec.horizon_jump.value_or(300);
  for (const auto& [key, ptr] : detail::ppo_double_fields())
    o[key] = ec.harness.ppo.*ptr;
  for (const auto& [key, ptr] : detail::ppo_int_fields())
    o[key] = ec.harness.ppo.*ptr;
  o["ppo.rollout_batch"] = ec.harness.ppo.rollout_batch;
  for (const auto& [key, ptr] : detail::model_double_fields())
    o[key] = ec.harness.model.*ptr;
  for (const auto& [key, ptr] : detail::model_int_fields())
    o[key] = ec.harness.model.*ptr;
  o["model.hidden"] = ec.harness.model.hidden;
  o["harness.ppo_budget_model"] = ec.harness.ppo_budget_model;
  o["harness.eval_episodes"] = ec.harness.eval_episodes;
  j["overrides"] = o;
  return j;
}

inline SweepConfig make_sweep_config(const ExperimentConfig& ec) {
  SweepConfig sc;
  sc.master_seed = ec.master_seed;
  for (const std::string& name : ec.presets) {
    PresetSpec p = make_preset_spec(name);
    apply_env_overrides(p.walk, ec.env_overrides);
    apply_env_overrides(p.jump, ec.env_overrides);
    if (ec.horizon_walk) p.walk.horizon = *ec.horizon_walk;
    if (ec.horizon_jump) p.jump.horizon = *ec.horizon_jump;
    p.walk.validate();
    p.jump.validate();
    sc.presets.push_back(std::move(p));
  }
  sc.budgets = ec.budgets;
  sc.seeds_per_cell = ec.seeds_per_cell;
  sc.tasks = ec.tasks;
  sc.jobs = ec.jobs;
  sc.harness = ec.harness;
  return sc;
}

}  // namespace smrl
