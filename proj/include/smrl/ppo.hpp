#pragma once

// Proximal policy optimization with a clipped surrogate and generalized
// advantage estimation. The agent is a diagonal-Gaussian policy (learned
// state-independent log stds) plus a separate value network, both 2x64 tanh.
// Training runs against the RolloutEnv interface and never needs to know
// whether the environment is real or a learned model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smrl/binio.hpp"
#include "smrl/crawler.hpp"
#include "smrl/env.hpp"
#include "smrl/nn.hpp"
#include "smrl/rng.hpp"

namespace smrl {

inline constexpr double kLogStdInit = -0.6931471805599453;  // ln(0.5)
inline constexpr double kLogStdFloor = -6.907755278982137;  // ln(1e-3)

struct PolicyValuePair {
  DenseNet policy;               // obs_dim -> act_dim
  std::vector<double> log_std;   // act_dim, state-independent
  DenseNet value;                // obs_dim -> 1

  int obs_dim() const { return policy.input_size(); }
  int act_dim() const { return policy.output_size(); }
};

inline PolicyValuePair make_agent(int obs_dim, int act_dim,
                                  std::uint64_t seed) {
  if (obs_dim < 1 || act_dim < 1)
    throw std::invalid_argument("make_agent: bad dimensions");
  Rng rng(seed_chain(seed, seed_tags::kAgentInit));
  PolicyValuePair agent;
  agent.policy = make_mlp(obs_dim, {64, 64}, act_dim, Act::kTanh, rng);
  agent.value = make_mlp(obs_dim, {64, 64}, 1, Act::kTanh, rng);
  agent.log_std.assign(act_dim, kLogStdInit);
  return agent;
}

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  int epochs_per_update = 10;
  int minibatch_size = 64;
  double lr_policy = 3e-4;
  double lr_value = 3e-4;
  double entropy_coef = 0.0;
  long long rollout_batch = 2048;
  long long total_step_budget = 0;
};

// Sum of independent Gaussian log densities of `raw` under (mean, log_std).
inline double gaussian_log_prob(std::span<const double> mean,
                                std::span<const double> log_std,
                                std::span<const double> raw) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sigma = std::exp(log_std[i]);
    const double z = (raw[i] - mean[i]) / sigma;
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

inline std::vector<double> policy_mean(const PolicyValuePair& agent,
                                       const Observation& obs) {
  return net_forward(agent.policy, obs);
}

inline double value_of(const PolicyValuePair& agent, const Observation& obs) {
  return net_forward(agent.value, obs)[0];
}

struct ActionSample {
  std::vector<double> action;  // clamped to [-1, 1], fed to the environment
  std::vector<double> raw;     // pre-clamp Gaussian draw, kept for ratios
  double log_prob = 0.0;       // density of `raw`, not of the clamped action
};

inline ActionSample sample_action(const PolicyValuePair& agent,
                                  const Observation& obs, Rng& rng) {
  ActionSample s;
  std::vector<double> mean = policy_mean(agent, obs);
  const int m = agent.act_dim();
  s.raw.resize(m);
  s.action.resize(m);
  for (int i = 0; i < m; ++i) {
    const double sigma = std::exp(agent.log_std[i]);
    s.raw[i] = mean[i] + sigma * rng.normal();
    s.action[i] = std::clamp(s.raw[i], -1.0, 1.0);
  }
  s.log_prob = gaussian_log_prob(mean, agent.log_std, s.raw);
  return s;
}

inline std::vector<double> mean_action(const PolicyValuePair& agent,
                                       const Observation& obs) {
  std::vector<double> a = policy_mean(agent, obs);
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);
  return a;
}

// ---------------------------------------------------------------------------
// Rollout storage and GAE
// ---------------------------------------------------------------------------

struct RolloutBuffer {
  std::vector<Observation> obs;
  std::vector<std::vector<double>> act_raw;
  std::vector<double> log_prob;
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<std::uint8_t> done;       // terminal: no bootstrap
  std::vector<std::uint8_t> truncated;  // cut episode: bootstrap_value applies
  std::vector<double> bootstrap_value;  // V(next obs) where truncated
  std::vector<double> advantage;
  std::vector<double> return_target;

  std::size_t size() const { return obs.size(); }

  void clear() {
    obs.clear();
    act_raw.clear();
    log_prob.clear();
    reward.clear();
    value.clear();
    done.clear();
    truncated.clear();
    bootstrap_value.clear();
    advantage.clear();
    return_target.clear();
  }

  void push(Observation o, std::vector<double> raw, double lp, double r,
            double v, bool is_done, bool is_truncated, double bootstrap) {
    obs.push_back(std::move(o));
    act_raw.push_back(std::move(raw));
    log_prob.push_back(lp);
    reward.push_back(r);
    value.push_back(v);
    done.push_back(is_done ? 1 : 0);
    truncated.push_back(is_truncated ? 1 : 0);
    bootstrap_value.push_back(bootstrap);
  }
};

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t = delta_t + gamma * lambda * A_{t+1}, cut at episode ends.
// Terminal steps bootstrap nothing; truncated steps bootstrap their stored
// next-state value; an unfinished tail bootstraps `last_value`.
inline void compute_gae(RolloutBuffer& buf, double last_value,
                        const PpoConfig& cfg) {
  const std::size_t n = buf.size();
  buf.advantage.assign(n, 0.0);
  buf.return_target.assign(n, 0.0);
  double carry = 0.0;
  for (std::size_t tt = n; tt-- > 0;) {
    double next_v;
    bool cut;
    if (buf.done[tt]) {
      next_v = 0.0;
      cut = true;
    } else if (buf.truncated[tt]) {
      next_v = buf.bootstrap_value[tt];
      cut = true;
    } else if (tt + 1 < n) {
      next_v = buf.value[tt + 1];
      cut = false;
    } else {
      next_v = last_value;
      cut = true;
    }
    const double delta =
        buf.reward[tt] + cfg.gamma * next_v - buf.value[tt];
    carry = delta + (cut ? 0.0 : cfg.gamma * cfg.lambda * carry);
    buf.advantage[tt] = carry;
    buf.return_target[tt] = carry + buf.value[tt];
  }
  for (double a : buf.advantage)
    if (!std::isfinite(a))
      throw std::runtime_error("compute_gae: non-finite advantage");
}

// In-place whole-buffer normalization to mean 0, std 1 (population).
inline void normalize_advantages(RolloutBuffer& buf) {
  const std::size_t n = buf.advantage.size();
  if (n < 2) return;
  double mean = 0.0;
  for (double a : buf.advantage) mean += a;
  mean /= double(n);
  double var = 0.0;
  for (double a : buf.advantage) {
    double d = a - mean;
    var += d * d;
  }
  const double std = std::max(std::sqrt(var / double(n)), 1e-8);
  for (double& a : buf.advantage) a = (a - mean) / std;
}

// ---------------------------------------------------------------------------
// PPO update
// ---------------------------------------------------------------------------

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

struct PolicyGradient {
  GradientSet net;
  std::vector<double> log_std;
};

// Gradient of the policy LOSS (negative mean surrogate, minus entropy bonus)
// over the given samples. clip_eps <= 0 disables clipping, giving the
// vanilla ratio surrogate; at identical old/new parameters both coincide.
inline PolicyGradient compute_policy_gradient(
    const PolicyValuePair& agent, const RolloutBuffer& buf,
    std::span<const std::size_t> idx, double clip_eps, double entropy_coef) {
  const int m = agent.act_dim();
  PolicyGradient g;
  g.net = make_zero_grads(agent.policy);
  g.log_std.assign(m, 0.0);
  if (idx.empty()) return g;

  const double scale = 1.0 / double(idx.size());
  ForwardCache cache;
  std::vector<double> out_grad(m);

  for (std::size_t i : idx) {
    const auto& mean = net_forward(agent.policy, buf.obs[i], cache);
    const double logp_new =
        gaussian_log_prob(mean, agent.log_std, buf.act_raw[i]);
    const double ratio = std::exp(logp_new - buf.log_prob[i]);
    if (!std::isfinite(ratio))
      throw std::runtime_error("ppo_update: non-finite probability ratio");
    const double adv = buf.advantage[i];

    // d min(r*A, clamp(r)*A) / d logp: r*A on the active branch, 0 on the
    // clamp plateau. Ascent on the surrogate = descent on its negation.
    bool active = true;
    if (clip_eps > 0.0) {
      if (adv > 0.0 && ratio > 1.0 + clip_eps) active = false;
      if (adv < 0.0 && ratio < 1.0 - clip_eps) active = false;
    }
    if (active) {
      const double coef = -scale * ratio * adv;  // loss gradient
      for (int d = 0; d < m; ++d) {
        const double sigma = std::exp(agent.log_std[d]);
        const double diff = buf.act_raw[i][d] - mean[d];
        out_grad[d] = coef * diff / (sigma * sigma);
        g.log_std[d] += coef * (diff * diff / (sigma * sigma) - 1.0);
      }
      net_backward_into(agent.policy, cache, out_grad, g.net);
    }
  }
  // Entropy bonus: H = sum(log_std) + const, so dH/dlog_std_i = 1.
  for (int d = 0; d < m; ++d) g.log_std[d] -= entropy_coef;
  return g;
}

struct PpoUpdateState {
  AdamState policy_adam;
  AdamState value_adam;
  AdamVector logstd_adam;
};

inline PpoUpdateState make_update_state(const PolicyValuePair& agent,
                                        const PpoConfig& cfg) {
  PpoUpdateState st;
  st.policy_adam = make_adam(agent.policy, cfg.lr_policy);
  st.value_adam = make_adam(agent.value, cfg.lr_value);
  st.logstd_adam = AdamVector(agent.log_std.size(), cfg.lr_policy);
  return st;
}

// Runs epochs_per_update passes of seeded-shuffled minibatches. Advantages
// are normalized once over the whole buffer first. Throws on any non-finite
// intermediate, leaving the caller to report the aborted update.
inline PpoStats ppo_update(PolicyValuePair& agent, RolloutBuffer& buf,
                           const PpoConfig& cfg, PpoUpdateState& state,
                           Rng& shuffle_rng) {
  const std::size_t n = buf.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty buffer");
  if (buf.advantage.size() != n)
    throw std::invalid_argument("ppo_update: run compute_gae first");

  normalize_advantages(buf);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  GradientSet value_grads = make_zero_grads(agent.value);
  ForwardCache cache;
  const std::vector<double> one = {1.0};
  PpoStats stats;
  long long clipped = 0, seen = 0;

  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(cfg.minibatch_size));
      std::span<const std::size_t> idx(order.data() + start, stop - start);

      PolicyGradient pg = compute_policy_gradient(agent, buf, idx,
                                                  cfg.clip_eps,
                                                  cfg.entropy_coef);
      adam_update(agent.policy, pg.net, state.policy_adam);
      state.logstd_adam.update(agent.log_std, pg.log_std);
      for (double& ls : agent.log_std) ls = std::max(ls, kLogStdFloor);

      value_grads.zero();
      const double vscale = 1.0 / double(idx.size());
      for (std::size_t i : idx) {
        const double v = net_forward(agent.value, buf.obs[i], cache)[0];
        if (!std::isfinite(v))
          throw std::runtime_error("ppo_update: non-finite value estimate");
        std::vector<double> vg = {
            vscale * 2.0 * (v - buf.return_target[i])};
        net_backward_into(agent.value, cache, vg, value_grads);
      }
      adam_update(agent.value, value_grads, state.value_adam);
    }
  }

  // Statistics from a final pass under the updated parameters.
  double surrogate = 0.0, vloss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mean = net_forward(agent.policy, buf.obs[i], cache);
    const double logp =
        gaussian_log_prob(mean, agent.log_std, buf.act_raw[i]);
    const double ratio = std::exp(logp - buf.log_prob[i]);
    const double adv = buf.advantage[i];
    const double clamped =
        std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    surrogate += std::min(ratio * adv, clamped * adv);
    seen += 1;
    if (std::abs(ratio - 1.0) > cfg.clip_eps) clipped += 1;
    const double v = net_forward(agent.value, buf.obs[i], cache)[0];
    const double e = v - buf.return_target[i];
    vloss += e * e;
  }
  stats.policy_loss = -surrogate / double(n);
  stats.value_loss = vloss / double(n);
  double h = 0.0;
  for (double ls : agent.log_std) h += ls;
  constexpr double kLog2PiE = 2.8378770664093453;  // log(2*pi*e)
  stats.entropy = h + 0.5 * kLog2PiE * agent.act_dim();
  stats.clip_fraction = seen > 0 ? double(clipped) / double(seen) : 0.0;
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
    throw std::runtime_error("ppo_update: non-finite loss");
  return stats;
}

// ---------------------------------------------------------------------------
// Training loop and evaluation
// ---------------------------------------------------------------------------

struct TrainResult {
  // After each update: (total env steps consumed, mean return of episodes
  // completed during that batch; carries the previous value when none).
  std::vector<std::pair<long long, double>> curve;
  long long steps = 0;
  long long episodes = 0;
  long long divergent_episodes = 0;
};

// Alternates rollout collection and PPO updates until exactly
// total_step_budget environment steps are consumed. A zero budget returns
// without touching the environment.
inline TrainResult train(PolicyValuePair& agent, RolloutEnv& env,
                         const PpoConfig& cfg, std::uint64_t seed) {
  TrainResult result;
  if (cfg.total_step_budget <= 0) return result;
  if (env.obs_dim() != agent.obs_dim() || env.act_dim() != agent.act_dim())
    throw std::invalid_argument("train: agent/environment shape mismatch");

  Rng sample_rng(seed_chain(seed, seed_tags::kTrainSample));
  Rng shuffle_rng(seed_chain(seed, seed_tags::kPpoShuffle));
  PpoUpdateState update_state = make_update_state(agent, cfg);
  RolloutBuffer buf;

  std::uint64_t episode_index = 0;
  Observation obs = env.reset(seed_chain(seed, seed_tags::kTrainReset,
                                         episode_index));
  double episode_return = 0.0;
  double last_curve_value = 0.0;

  while (result.steps < cfg.total_step_budget) {
    const long long batch =
        std::min<long long>(cfg.rollout_batch,
                            cfg.total_step_budget - result.steps);
    buf.clear();
    std::vector<double> completed;

    bool ended_done = false;
    for (long long k = 0; k < batch; ++k) {
      ActionSample a = sample_action(agent, obs, sample_rng);
      const double v = value_of(agent, obs);
      EnvStep st = env.step(a.action);
      result.steps += 1;
      episode_return += st.reward;

      double bootstrap = 0.0;
      if (st.truncated) bootstrap = value_of(agent, st.obs);
      buf.push(std::move(obs), std::move(a.raw), a.log_prob, st.reward, v,
               st.terminal, st.truncated, bootstrap);

      ended_done = st.done();
      if (st.done()) {
        result.episodes += 1;
        if (st.divergent) result.divergent_episodes += 1;
        completed.push_back(episode_return);
        episode_return = 0.0;
        episode_index += 1;
        obs = env.reset(seed_chain(seed, seed_tags::kTrainReset,
                                   episode_index));
      } else {
        obs = std::move(st.obs);
      }
    }

    const double last_value = ended_done ? 0.0 : value_of(agent, obs);
    compute_gae(buf, last_value, cfg);
    ppo_update(agent, buf, cfg, update_state, shuffle_rng);

    if (!completed.empty()) {
      double s = 0.0;
      for (double r : completed) s += r;
      last_curve_value = s / double(completed.size());
    }
    result.curve.emplace_back(result.steps, last_curve_value);
  }
  return result;
}

struct EvalResult {
  double mean = 0.0;
  std::vector<double> returns;
};

// Deterministic evaluation: mean action, no sampling, fresh environment per
// episode with derived reset seeds.
inline EvalResult evaluate_policy(const PolicyValuePair& agent,
                                  const CrawlerConfig& config, TaskKind kind,
                                  int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  EvalResult out;
  for (int i = 0; i < n_episodes; ++i) {
    CrawlerEnv env(config, kind);
    Observation obs = env.reset(seed_chain(seed, seed_tags::kEvalReset,
                                           static_cast<std::uint64_t>(i)));
    double total = 0.0;
    while (true) {
      EnvStep st = env.step(mean_action(agent, obs));
      total += st.reward;
      if (st.done()) break;
      obs = std::move(st.obs);
    }
    out.returns.push_back(total);
  }
  for (double r : out.returns) out.mean += r;
  out.mean /= double(n_episodes);
  return out;
}

// Reference score scale: i.i.d. uniform actions, same reset seeds as
// evaluate_policy so the two are directly comparable.
inline EvalResult evaluate_random_policy(const CrawlerConfig& config,
                                         TaskKind kind, int n_episodes,
                                         std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("evaluate_random_policy: n_episodes >= 1");
  EvalResult out;
  for (int i = 0; i < n_episodes; ++i) {
    CrawlerEnv env(config, kind);
    env.reset(seed_chain(seed, seed_tags::kEvalReset,
                         static_cast<std::uint64_t>(i)));
    Rng arng(seed_chain(seed, seed_tags::kArmRandom,
                        static_cast<std::uint64_t>(i)));
    std::vector<double> a(config.dof());
    double total = 0.0;
    while (true) {
      for (double& v : a) v = arng.uniform(-1.0, 1.0);
      EnvStep st = env.step(a);
      total += st.reward;
      if (st.done()) break;
    }
    out.returns.push_back(total);
  }
  for (double r : out.returns) out.mean += r;
  out.mean /= double(n_episodes);
  return out;
}

// ---------------------------------------------------------------------------
// SMPG on-disk format (little-endian):
//   "SMPG" | u32 version=1 | u32 act_dim | f32 log_std vector
//   | SDNN policy | SDNN value.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kSmpgVersion = 1;

inline std::vector<std::uint8_t> save_agent(const PolicyValuePair& agent) {
  ByteWriter w;
  w.magic("SMPG");
  w.u32(kSmpgVersion);
  w.u32(static_cast<std::uint32_t>(agent.act_dim()));
  w.f32_vector(agent.log_std);
  save_dense_net(agent.policy, w);
  save_dense_net(agent.value, w);
  return w.take();
}

inline PolicyValuePair load_agent(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic("SMPG");
  if (r.u32() != kSmpgVersion)
    throw std::runtime_error("SMPG: unsupported version");
  const std::uint32_t act_dim = r.u32();
  if (act_dim < 1 || act_dim > 1u << 16)
    throw std::runtime_error("SMPG: bad action dimension");
  PolicyValuePair agent;
  agent.log_std = r.f32_vector(act_dim);
  agent.policy = load_dense_net(r);
  agent.value = load_dense_net(r);
  r.expect_end();
  if (agent.policy.output_size() != static_cast<int>(act_dim) ||
      agent.value.output_size() != 1 ||
      agent.value.input_size() != agent.policy.input_size())
    throw std::runtime_error("SMPG: network shapes are inconsistent");
  return agent;
}

}  // namespace smrl
