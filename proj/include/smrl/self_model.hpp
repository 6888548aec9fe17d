#pragma once

// Learned forward dynamics. The network maps normalized [s, a] to the
// normalized observation delta; predictions are s + denormalized(output).
// A trained model can be wrapped as a synthetic environment whose only
// real-world contact is one env_reset per episode for the seed observation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smrl/binio.hpp"
#include "smrl/crawler.hpp"
#include "smrl/dataset.hpp"
#include "smrl/env.hpp"
#include "smrl/nn.hpp"
#include "smrl/rng.hpp"

namespace smrl {

struct SelfModelHyper {
  std::vector<int> hidden = {256, 256};
  double lr = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 30;
  double val_fraction = 0.1;
  double weight_decay = 1e-3;  // L2 on weights only; damps extrapolation
  std::uint64_t seed = 0;
};

struct TrainingReport {
  double final_train_mse = 0.0;
  double best_val_mse = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
};

struct SelfModel {
  int obs_dim = 0;
  int act_dim = 0;
  DenseNet net;
  NormStats stats;
  TrainingReport report;
};

namespace detail {

// Mean over samples of the per-dimension mean squared error.
inline double mean_squared_error(const DenseNet& net,
                                 const std::vector<std::vector<double>>& xs,
                                 const std::vector<std::vector<double>>& ys,
                                 const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  ForwardCache cache;
  double total = 0.0;
  for (std::size_t i : idx) {
    const auto& out = net_forward(net, xs[i], cache);
    double s = 0.0;
    for (std::size_t d = 0; d < out.size(); ++d) {
      double e = out[d] - ys[i][d];
      s += e * e;
    }
    total += s / double(out.size());
  }
  return total / double(idx.size());
}

}  // namespace detail

// Minimizes normalized-delta MSE with Adam on seeded shuffled minibatches.
// 90/10 train/validation split; keeps the parameters of the best validation
// epoch and stops after `patience` epochs without improvement.
inline SelfModel fit_self_model(const TransitionDataset& data,
                                const SelfModelHyper& hyper) {
  const std::size_t n = data.size();
  if (n < 20)
    throw std::invalid_argument("fit_self_model: need at least 20 transitions");
  if (data.obs_dim < 1 || data.act_dim < 1)
    throw std::invalid_argument("fit_self_model: bad dataset dimensions");

  SelfModel model;
  model.obs_dim = data.obs_dim;
  model.act_dim = data.act_dim;
  model.stats = data.stats;

  // Normalized inputs and targets, computed once.
  std::vector<std::vector<double>> xs(n), ys(n);
  std::vector<double> delta(data.obs_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = data.transitions[i];
    std::vector<double> s_n = data.stats.obs.normalize(t.s);
    std::vector<double> a_n = data.stats.act.normalize(t.a);
    xs[i].reserve(s_n.size() + a_n.size());
    xs[i].insert(xs[i].end(), s_n.begin(), s_n.end());
    xs[i].insert(xs[i].end(), a_n.begin(), a_n.end());
    for (int d = 0; d < data.obs_dim; ++d) delta[d] = t.s_next[d] - t.s[d];
    ys[i] = data.stats.delta.normalize(delta);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(seed_chain(hyper.seed, seed_tags::kFitSplit));
  split_rng.shuffle(order);

  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(hyper.val_fraction * n)));
  if (n_val >= n)
    throw std::invalid_argument("fit_self_model: validation split is everything");
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  Rng init_rng(seed_chain(hyper.seed, seed_tags::kFitInit));
  model.net = make_mlp(data.obs_dim + data.act_dim, hyper.hidden,
                       data.obs_dim, Act::kRelu, init_rng);
  AdamState adam = make_adam(model.net, hyper.lr);
  GradientSet grads = make_zero_grads(model.net);
  ForwardCache cache;
  std::vector<double> out_grad(data.obs_dim);

  DenseNet best_net = model.net;
  double best_val = detail::mean_squared_error(model.net, xs, ys, val_idx);
  int best_epoch = 0;
  int stale_epochs = 0;
  int epoch = 0;

  for (epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    Rng epoch_rng(seed_chain(hyper.seed, seed_tags::kFitEpoch,
                             static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(train_idx);

    for (std::size_t start = 0; start < train_idx.size();
         start += hyper.batch_size) {
      const std::size_t stop =
          std::min(train_idx.size(), start + hyper.batch_size);
      grads.zero();
      const double scale = 1.0 / double(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = train_idx[k];
        const auto& out = net_forward(model.net, xs[i], cache);
        for (int d = 0; d < data.obs_dim; ++d) {
          if (!std::isfinite(out[d]))
            throw std::runtime_error(
                "fit_self_model: training diverged at epoch " +
                std::to_string(epoch));
          out_grad[d] = 2.0 * (out[d] - ys[i][d]) / double(data.obs_dim);
        }
        net_backward_into(model.net, cache, out_grad, grads, scale);
      }
      if (hyper.weight_decay > 0.0)
        for (int l = 0; l < model.net.num_layers(); ++l)
          for (std::size_t j = 0; j < grads.weights[l].size(); ++j)
            grads.weights[l][j] +=
                hyper.weight_decay * model.net.weights[l][j];
      adam_update(model.net, grads, adam);
    }

    double val = detail::mean_squared_error(model.net, xs, ys, val_idx);
    if (!std::isfinite(val))
      throw std::runtime_error("fit_self_model: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    if (val < best_val) {
      best_val = val;
      best_net = model.net;
      best_epoch = epoch;
      stale_epochs = 0;
    } else {
      stale_epochs += 1;
      if (stale_epochs >= hyper.patience) break;
    }
  }

  model.net = std::move(best_net);
  model.report.best_val_mse = best_val;
  model.report.best_epoch = best_epoch;
  model.report.epochs_run = std::min(epoch, hyper.max_epochs);
  model.report.final_train_mse =
      detail::mean_squared_error(model.net, xs, ys, train_idx);
  return model;
}

// One-step prediction: s' = s + denormalize(net(normalize([s, a]))).
inline Observation model_predict(const SelfModel& model, const Observation& s,
                                 const std::vector<double>& a) {
  if (static_cast<int>(s.size()) != model.obs_dim ||
      static_cast<int>(a.size()) != model.act_dim)
    throw std::invalid_argument("model_predict: dimension mismatch");
  for (double v : s)
    if (!std::isfinite(v))
      throw std::invalid_argument("model_predict: non-finite observation");
  for (double v : a)
    if (!std::isfinite(v))
      throw std::invalid_argument("model_predict: non-finite action");

  std::vector<double> x = model.stats.obs.normalize(s);
  std::vector<double> a_n = model.stats.act.normalize(a);
  x.insert(x.end(), a_n.begin(), a_n.end());
  std::vector<double> delta = model.stats.delta.denormalize(
      net_forward(model.net, x));
  Observation next(s);
  for (int d = 0; d < model.obs_dim; ++d) next[d] += delta[d];
  return next;
}

// ---------------------------------------------------------------------------
// Open-loop rollouts
// ---------------------------------------------------------------------------

struct RolloutStep {
  std::vector<double> action;
  double reward = 0.0;
  StepEvent event = StepEvent::kNone;
};

struct RolloutTrace {
  std::vector<Observation> states;  // length = steps + 1, states[0] = seed
  std::vector<RolloutStep> steps;
  bool divergent = false;

  std::size_t length() const { return steps.size(); }
  double total_reward() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.reward;
    return s;
  }
};

// Task semantics applied to a predicted observation: reward from the
// velocity slot, termination from the height slot. Mirrors env_step so an
// exact dynamics oracle reproduces real trajectories.
inline double task_reward(const Observation& obs, const CrawlerConfig& c,
                          const TaskSpec& task) {
  return (task.kind == TaskKind::kWalk ? obs[kObsVx] : obs[kObsVz]) * c.dt;
}

inline StepEvent task_event(const Observation& obs, const CrawlerConfig& c,
                            const TaskSpec& task, int steps_done) {
  if (obs[kObsZ] < c.fall_z) return StepEvent::kFell;
  if (task.kind == TaskKind::kJump && obs[kObsZ] >= task.z_terminate)
    return StepEvent::kReachedHeight;
  if (steps_done >= c.horizon) return StepEvent::kHorizon;
  return StepEvent::kNone;
}

// Any real crawler observation stays within tens of units (joint speed
// tops out at torque_limit/joint_damping). A prediction beyond this bound
// is the model extrapolating nonsense and poisons training exactly like a
// non-finite one, so both get the same divergence treatment.
inline constexpr double kModelDivergenceBound = 1e3;

inline bool observation_plausible(const Observation& o) {
  for (double v : o)
    if (!std::isfinite(v) || std::abs(v) > kModelDivergenceBound) return false;
  return true;
}

// The fit data's normalization doubles as a trust region. A prediction that
// lands many standard deviations outside everything the model trained on is
// extrapolation, and letting the policy optimize into that region turns the
// model into a free reward generator detached from the dynamics. The few-
// sigma spread of the data itself stays comfortably inside the bound.
inline constexpr double kModelTrustSigma = 5.0;

inline bool within_trust_region(const Observation& o,
                                const ChannelStats& stats) {
  if (stats.mean.size() != o.size()) return true;
  for (std::size_t i = 0; i < o.size(); ++i)
    if (std::abs(o[i] - stats.mean[i]) > kModelTrustSigma * stats.std[i])
      return false;
  return true;
}

// Recursive prediction from a seed observation. `predict` is any
// (Observation, action) -> Observation dynamics; `policy` maps an
// observation to an action. Never touches the real environment.
template <typename Predict, typename Policy>
RolloutTrace rollout_open_loop(Predict&& predict, Policy&& policy,
                               const Observation& s0, const CrawlerConfig& c,
                               const TaskSpec& task, int horizon) {
  RolloutTrace trace;
  trace.states.push_back(s0);
  for (int t = 0; t < horizon; ++t) {
    RolloutStep step;
    step.action = policy(trace.states.back());
    Observation next = predict(trace.states.back(), step.action);

    if (!observation_plausible(next)) {
      trace.divergent = true;
      break;
    }

    step.reward = task_reward(next, c, task);
    step.event = task_event(next, c, task, t + 1);
    trace.states.push_back(std::move(next));
    const bool done = step.event != StepEvent::kNone;
    trace.steps.push_back(std::move(step));
    if (done) break;
  }
  return trace;
}

template <typename Policy>
RolloutTrace model_rollout(const SelfModel& model, const Observation& s0,
                           Policy&& policy, const CrawlerConfig& c,
                           const TaskSpec& task, int horizon) {
  return rollout_open_loop(
      [&model](const Observation& s, const std::vector<double>& a) {
        return model_predict(model, s, a);
      },
      std::forward<Policy>(policy), s0, c, task, horizon);
}

// ---------------------------------------------------------------------------
// Model as environment
// ---------------------------------------------------------------------------

// Synthetic environment driven by a dynamics function. Reset fetches a real
// seed observation through `reset_fn` (typically a counted env_reset); every
// subsequent step is pure prediction. A non-finite or implausibly large
// prediction ends the episode as a truncation flagged divergent, with the
// last plausible observation returned for value bootstrapping.
class ModelEnv final : public RolloutEnv {
 public:
  using DynamicsFn =
      std::function<Observation(const Observation&, const std::vector<double>&)>;
  using ResetFn = std::function<Observation(std::uint64_t)>;

  ModelEnv(DynamicsFn dynamics, ResetFn reset_fn, CrawlerConfig config,
           TaskSpec task)
      : dynamics_(std::move(dynamics)),
        reset_fn_(std::move(reset_fn)),
        config_(std::move(config)),
        task_(task) {
    config_.validate();
  }

  // The learned-model overload also keeps rollouts inside the fit data's
  // trust region; the raw-dynamics overload has no stats to check against.
  ModelEnv(const SelfModel& model, RolloutEnv& seed_source,
           CrawlerConfig config, TaskSpec task)
      : ModelEnv(
            [&model](const Observation& s, const std::vector<double>& a) {
              return model_predict(model, s, a);
            },
            [&seed_source](std::uint64_t seed) {
              return seed_source.reset(seed);
            },
            std::move(config), task) {
    plausible_ = [&model](const Observation& o) {
      return observation_plausible(o) && within_trust_region(o, model.stats.obs);
    };
  }

  int obs_dim() const override { return config_.obs_dim(); }
  int act_dim() const override { return config_.dof(); }

  Observation reset(std::uint64_t seed) override {
    obs_ = reset_fn_(seed);
    steps_ = 0;
    return obs_;
  }

  EnvStep step(const std::vector<double>& action) override {
    Observation next = dynamics_(obs_, action);
    steps_ += 1;

    EnvStep out;
    if (!plausible_(next)) {
      out.obs = obs_;  // last plausible observation
      out.truncated = true;
      out.divergent = true;
      return out;
    }

    obs_ = std::move(next);
    out.obs = obs_;
    out.reward = task_reward(obs_, config_, task_);
    StepEvent ev = task_event(obs_, config_, task_, steps_);
    out.terminal = ev == StepEvent::kFell || ev == StepEvent::kReachedHeight;
    out.truncated = ev == StepEvent::kHorizon;
    return out;
  }

 private:
  DynamicsFn dynamics_;
  ResetFn reset_fn_;
  CrawlerConfig config_;
  TaskSpec task_;
  std::function<bool(const Observation&)> plausible_ = observation_plausible;
  Observation obs_;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// SMFM on-disk format (little-endian):
//   "SMFM" | u32 version=1 | u32 obs_dim | u32 act_dim
//   | (mean, std) f32 vector pairs for obs, act, delta | SDNN payload.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kSmfmVersion = 1;

inline std::vector<std::uint8_t> save_self_model(const SelfModel& m) {
  ByteWriter w;
  w.magic("SMFM");
  w.u32(kSmfmVersion);
  w.u32(static_cast<std::uint32_t>(m.obs_dim));
  w.u32(static_cast<std::uint32_t>(m.act_dim));
  detail::write_channel_stats(m.stats.obs, w);
  detail::write_channel_stats(m.stats.act, w);
  detail::write_channel_stats(m.stats.delta, w);
  save_dense_net(m.net, w);
  return w.take();
}

inline SelfModel load_self_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic("SMFM");
  if (r.u32() != kSmfmVersion)
    throw std::runtime_error("SMFM: unsupported version");
  SelfModel m;
  m.obs_dim = static_cast<int>(r.u32());
  m.act_dim = static_cast<int>(r.u32());
  if (m.obs_dim < 1 || m.act_dim < 1)
    throw std::runtime_error("SMFM: bad dimensions");
  m.stats.obs = detail::read_channel_stats(r, m.obs_dim);
  m.stats.act = detail::read_channel_stats(r, m.act_dim);
  m.stats.delta = detail::read_channel_stats(r, m.obs_dim);
  m.net = load_dense_net(r);
  r.expect_end();

  if (m.net.input_size() != m.obs_dim + m.act_dim ||
      m.net.output_size() != m.obs_dim)
    throw std::runtime_error("SMFM: network shape does not match dimensions");
  return m;
}

}  // namespace smrl
