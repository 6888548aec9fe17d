#pragma once

// Environment interface shared by the real crawler and the learned-model
// adapter. PPO trains against this interface and never knows which one it
// is talking to.

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "smrl/crawler.hpp"

namespace smrl {

struct EnvStep {
  Observation obs;
  double reward = 0.0;
  bool terminal = false;   // episode failed or reached its goal
  bool truncated = false;  // episode cut (horizon or model divergence)
  bool divergent = false;  // model produced a non-finite prediction

  bool done() const { return terminal || truncated; }
};

class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual EnvStep step(const std::vector<double>& action) = 0;
};

class CrawlerEnv final : public RolloutEnv {
 public:
  CrawlerEnv(CrawlerConfig config, TaskSpec task)
      : config_(std::move(config)), task_(task) {
    config_.validate();
  }

  CrawlerEnv(const CrawlerConfig& config, TaskKind kind)
      : CrawlerEnv(config, make_task(config, kind)) {}

  int obs_dim() const override { return config_.obs_dim(); }
  int act_dim() const override { return config_.dof(); }

  Observation reset(std::uint64_t seed) override {
    auto [state, obs] = env_reset(config_, seed);
    state_ = std::move(state);
    return obs;
  }

  EnvStep step(const std::vector<double>& action) override {
    StepResult r = env_step(state_, action, config_, task_);
    state_ = std::move(r.state);
    EnvStep out;
    out.obs = std::move(r.obs);
    out.reward = r.reward;
    out.terminal = r.terminal();
    out.truncated = r.truncated();
    return out;
  }

  const PhysicsState& state() const { return state_; }
  const CrawlerConfig& config() const { return config_; }
  const TaskSpec& task() const { return task_; }

 private:
  CrawlerConfig config_;
  TaskSpec task_;
  PhysicsState state_;
};

// Wraps any environment and counts interface calls. The harness uses it to
// prove budget accounting: the Dyna arm must show step_count == 0 on the
// real environment after model-side training.
class CountingEnv final : public RolloutEnv {
 public:
  explicit CountingEnv(RolloutEnv& inner) : inner_(inner) {}

  int obs_dim() const override { return inner_.obs_dim(); }
  int act_dim() const override { return inner_.act_dim(); }

  Observation reset(std::uint64_t seed) override {
    reset_count += 1;
    return inner_.reset(seed);
  }

  EnvStep step(const std::vector<double>& action) override {
    step_count += 1;
    return inner_.step(action);
  }

  long long reset_count = 0;
  long long step_count = 0;

 private:
  RolloutEnv& inner_;
};

}  // namespace smrl
