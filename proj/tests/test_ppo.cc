#include "smrl/ppo.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "smrl/env.hpp"
#include "smrl/rng.hpp"

namespace {

using smrl::Observation;
using smrl::PpoConfig;
using smrl::RolloutBuffer;
using smrl::Rng;

// Fills a buffer by rolling the agent's stochastic policy in env, exactly as
// the training loop does. Kept separate so gradient tests can inspect a
// batch before any update has happened.
RolloutBuffer collect_batch(const smrl::PolicyValuePair& agent,
                            smrl::RolloutEnv& env, int n, std::uint64_t seed) {
  Rng rng(smrl::seed_chain(seed, 101));
  RolloutBuffer buf;
  std::uint64_t ep = 0;
  Observation obs = env.reset(smrl::seed_chain(seed, 202, ep));
  for (int k = 0; k < n; ++k) {
    smrl::ActionSample a = smrl::sample_action(agent, obs, rng);
    const double v = smrl::value_of(agent, obs);
    smrl::EnvStep st = env.step(a.action);
    const double boot = st.truncated ? smrl::value_of(agent, st.obs) : 0.0;
    buf.push(obs, a.raw, a.log_prob, st.reward, v, st.terminal, st.truncated,
             boot);
    if (st.done()) {
      ep += 1;
      obs = env.reset(smrl::seed_chain(seed, 202, ep));
    } else {
      obs = std::move(st.obs);
    }
  }
  return buf;
}

// Direct-sum reference: A_t = sum_l (gamma*lambda)^l * delta_{t+l}, summed
// forward until the episode chain ends. Independent of the backward
// recursion used by compute_gae.
void gae_reference(const RolloutBuffer& b, double last_value, double gamma,
                   double lambda, std::vector<double>* adv,
                   std::vector<double>* ret) {
  const std::size_t n = b.size();
  adv->assign(n, 0.0);
  ret->assign(n, 0.0);
  auto next_value = [&](std::size_t k) {
    if (b.done[k]) return 0.0;
    if (b.truncated[k]) return b.bootstrap_value[k];
    if (k + 1 < n) return b.value[k + 1];
    return last_value;
  };
  auto chain_ends = [&](std::size_t k) {
    return b.done[k] != 0 || b.truncated[k] != 0 || k + 1 == n;
  };
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    double factor = 1.0;
    for (std::size_t k = t;; ++k) {
      const double delta = b.reward[k] + gamma * next_value(k) - b.value[k];
      acc += factor * delta;
      if (chain_ends(k)) break;
      factor *= gamma * lambda;
    }
    (*adv)[t] = acc;
    (*ret)[t] = acc + b.value[t];
  }
}

// Buffer with synthetic numbers; obs/act entries are placeholders since GAE
// never reads them.
RolloutBuffer fake_buffer(int n, std::uint64_t seed) {
  Rng rng(seed);
  RolloutBuffer buf;
  for (int k = 0; k < n; ++k) {
    const double flag = rng.uniform01();
    bool done = flag < 0.1;
    bool truncated = !done && flag < 0.2;
    if (k + 1 == n) done = truncated = false;  // exercise the tail bootstrap
    buf.push({0.0}, {0.0}, 0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
             done, truncated, rng.uniform(-1.0, 1.0));
  }
  // Guarantee at least one of each cut kind.
  buf.done[7] = 1;
  buf.truncated[7] = 0;
  buf.done[23] = 0;
  buf.truncated[23] = 1;
  return buf;
}

TEST(Gaussian, LogProbMatchesDensityOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + int(rng.index(4));
    std::vector<double> mean(m), log_std(m), raw(m);
    for (int i = 0; i < m; ++i) {
      mean[i] = rng.uniform(-2.0, 2.0);
      log_std[i] = rng.uniform(-2.0, 0.5);
      raw[i] = rng.uniform(-3.0, 3.0);
    }
    double want = 0.0;
    for (int i = 0; i < m; ++i) {
      const double sigma = std::exp(log_std[i]);
      const double d = raw[i] - mean[i];
      want += -std::log(sigma * std::sqrt(2.0 * M_PI)) -
              d * d / (2.0 * sigma * sigma);
    }
    EXPECT_NEAR(smrl::gaussian_log_prob(mean, log_std, raw), want, 1e-10);
  }
}

TEST(Agent, InitShapesAndLogStd) {
  auto agent = smrl::make_agent(14, 2, 5);
  EXPECT_EQ(agent.policy.sizes, (std::vector<int>{14, 64, 64, 2}));
  EXPECT_EQ(agent.value.sizes, (std::vector<int>{14, 64, 64, 1}));
  EXPECT_EQ(agent.policy.acts.back(), smrl::Act::kIdentity);
  EXPECT_EQ(agent.policy.acts.front(), smrl::Act::kTanh);
  EXPECT_EQ(agent.value.acts.back(), smrl::Act::kIdentity);
  ASSERT_EQ(agent.log_std.size(), 2u);
  for (double ls : agent.log_std) EXPECT_DOUBLE_EQ(ls, smrl::kLogStdInit);
  EXPECT_NEAR(std::exp(smrl::kLogStdInit), 0.5, 1e-15);
  EXPECT_THROW(smrl::make_agent(0, 2, 1), std::invalid_argument);
}

TEST(Agent, SampleClampsActionAndKeepsRawDensity) {
  auto agent = smrl::make_agent(3, 2, 9);
  // Push the mean far outside the action box so clamping must happen.
  agent.policy.biases.back() = {5.0, -5.0};
  Rng rng(4);
  const Observation obs = {0.1, -0.2, 0.3};
  auto s = smrl::sample_action(agent, obs, rng);
  EXPECT_GT(s.raw[0], 1.0);
  EXPECT_LT(s.raw[1], -1.0);
  EXPECT_DOUBLE_EQ(s.action[0], 1.0);
  EXPECT_DOUBLE_EQ(s.action[1], -1.0);
  const auto mean = smrl::policy_mean(agent, obs);
  EXPECT_DOUBLE_EQ(
      s.log_prob, smrl::gaussian_log_prob(mean, agent.log_std, s.raw));
  for (double a : smrl::mean_action(agent, obs)) {
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Agent, StoredLogProbMatchesRecomputation) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv env(config, smrl::TaskKind::kWalk);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 21);
  RolloutBuffer buf = collect_batch(agent, env, 128, 77);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto mean = smrl::policy_mean(agent, buf.obs[i]);
    const double lp =
        smrl::gaussian_log_prob(mean, agent.log_std, buf.act_raw[i]);
    EXPECT_NEAR(lp, buf.log_prob[i], 1e-10);
  }
}

TEST(Gae, MatchesDirectSumAcrossParameterGrid) {
  RolloutBuffer buf = fake_buffer(50, 913);
  const double last_value = 0.37;
  std::vector<double> want_adv, want_ret;
  for (double gamma : {0.9, 0.99}) {
    for (double lambda : {0.0, 0.5, 0.95, 1.0}) {
      PpoConfig cfg;
      cfg.gamma = gamma;
      cfg.lambda = lambda;
      smrl::compute_gae(buf, last_value, cfg);
      gae_reference(buf, last_value, gamma, lambda, &want_adv, &want_ret);
      for (std::size_t t = 0; t < buf.size(); ++t) {
        EXPECT_NEAR(buf.advantage[t], want_adv[t], 1e-10)
            << "gamma=" << gamma << " lambda=" << lambda << " t=" << t;
        EXPECT_NEAR(buf.return_target[t], want_ret[t], 1e-10);
      }
    }
  }
}

TEST(Gae, TelescopesToRewardToGoAtGammaLambdaOne) {
  RolloutBuffer buf;
  Rng rng(6);
  const int n = 12;
  for (int k = 0; k < n; ++k) {
    buf.push({0.0}, {0.0}, 0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
             k + 1 == n, false, 0.0);
  }
  PpoConfig cfg;
  cfg.gamma = 1.0;
  cfg.lambda = 1.0;
  smrl::compute_gae(buf, 0.0, cfg);
  double tail = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    tail += buf.reward[t];
    EXPECT_NEAR(buf.advantage[t], tail - buf.value[t], 1e-12);
    EXPECT_NEAR(buf.return_target[t], tail, 1e-12);
  }
}

TEST(Gae, OneStepEpisodeForms) {
  PpoConfig cfg;
  cfg.gamma = 0.99;
  cfg.lambda = 0.95;
  {
    RolloutBuffer buf;
    buf.push({0.0}, {0.0}, 0.0, 2.0, 0.5, true, false, 0.0);
    smrl::compute_gae(buf, 9.9, cfg);
    EXPECT_NEAR(buf.advantage[0], 2.0 - 0.5, 1e-12);  // terminal: no bootstrap
  }
  {
    RolloutBuffer buf;
    buf.push({0.0}, {0.0}, 0.0, 2.0, 0.5, false, true, 0.8);
    smrl::compute_gae(buf, 9.9, cfg);
    EXPECT_NEAR(buf.advantage[0], 2.0 + 0.99 * 0.8 - 0.5, 1e-12);
  }
  {
    RolloutBuffer buf;  // unfinished tail bootstraps last_value
    buf.push({0.0}, {0.0}, 0.0, 2.0, 0.5, false, false, 0.0);
    smrl::compute_gae(buf, 0.3, cfg);
    EXPECT_NEAR(buf.advantage[0], 2.0 + 0.99 * 0.3 - 0.5, 1e-12);
  }
}

TEST(Gae, EpisodeCutsMatchSeparateBuffers) {
  Rng rng(44);
  RolloutBuffer first, second, joint;
  for (int k = 0; k < 8; ++k) {
    const double r = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(-1.0, 1.0);
    first.push({0.0}, {0.0}, 0.0, r, v, k == 7, false, 0.0);
    joint.push({0.0}, {0.0}, 0.0, r, v, k == 7, false, 0.0);
  }
  for (int k = 0; k < 8; ++k) {
    const double r = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(-1.0, 1.0);
    second.push({0.0}, {0.0}, 0.0, r, v, false, k == 7, 0.6);
    joint.push({0.0}, {0.0}, 0.0, r, v, false, k == 7, 0.6);
  }
  PpoConfig cfg;
  smrl::compute_gae(first, 0.0, cfg);
  smrl::compute_gae(second, 0.0, cfg);
  smrl::compute_gae(joint, 0.0, cfg);
  for (int k = 0; k < 8; ++k) {
    EXPECT_DOUBLE_EQ(joint.advantage[k], first.advantage[k]);
    EXPECT_DOUBLE_EQ(joint.advantage[8 + k], second.advantage[k]);
  }
}

TEST(Gae, NormalizationHitsMeanZeroStdOne) {
  RolloutBuffer buf = fake_buffer(256, 1234);
  PpoConfig cfg;
  smrl::compute_gae(buf, 0.1, cfg);
  smrl::normalize_advantages(buf);
  double mean = 0.0;
  for (double a : buf.advantage) mean += a;
  mean /= double(buf.size());
  double var = 0.0;
  for (double a : buf.advantage) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / double(buf.size()));
  EXPECT_LT(std::abs(mean), 1e-9);
  EXPECT_NEAR(std, 1.0, 1e-6);
}

TEST(PolicyGradient, ClippedEqualsUnclippedAtRatioOne) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv env(config, smrl::TaskKind::kWalk);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 33);
  RolloutBuffer buf = collect_batch(agent, env, 64, 55);
  PpoConfig cfg;
  smrl::compute_gae(buf, smrl::value_of(agent, buf.obs.back()), cfg);
  smrl::normalize_advantages(buf);

  std::vector<std::size_t> idx(buf.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto clipped = smrl::compute_policy_gradient(agent, buf, idx, 0.2, 0.0);
  auto vanilla = smrl::compute_policy_gradient(agent, buf, idx, 0.0, 0.0);

  for (std::size_t l = 0; l < clipped.net.weights.size(); ++l) {
    for (std::size_t j = 0; j < clipped.net.weights[l].size(); ++j)
      EXPECT_NEAR(clipped.net.weights[l][j], vanilla.net.weights[l][j], 1e-8);
    for (std::size_t j = 0; j < clipped.net.biases[l].size(); ++j)
      EXPECT_NEAR(clipped.net.biases[l][j], vanilla.net.biases[l][j], 1e-8);
  }
  for (std::size_t d = 0; d < clipped.log_std.size(); ++d)
    EXPECT_NEAR(clipped.log_std[d], vanilla.log_std[d], 1e-8);
}

TEST(PolicyGradient, ClipPlateauContributesNothing) {
  auto agent = smrl::make_agent(2, 1, 3);
  const Observation obs = {0.3, -0.2};
  const std::vector<double> raw = {0.5};
  const auto mean = smrl::policy_mean(agent, obs);
  const double lp = smrl::gaussian_log_prob(mean, agent.log_std, raw);
  const std::vector<std::size_t> idx = {0};

  auto make = [&](double stored_lp, double adv) {
    RolloutBuffer buf;
    buf.push(obs, raw, stored_lp, 0.0, 0.0, false, false, 0.0);
    buf.advantage = {adv};
    buf.return_target = {0.0};
    return buf;
  };

  // ratio = e with positive advantage: clamped at 1 + eps, flat.
  {
    RolloutBuffer buf = make(lp - 1.0, 1.0);
    auto g = smrl::compute_policy_gradient(agent, buf, idx, 0.2, 0.0);
    for (const auto& layer : g.net.weights)
      for (double w : layer) EXPECT_DOUBLE_EQ(w, 0.0);
    for (double d : g.log_std) EXPECT_DOUBLE_EQ(d, 0.0);
  }
  // ratio = 1/e with negative advantage: clamped at 1 - eps, flat.
  {
    RolloutBuffer buf = make(lp + 1.0, -1.0);
    auto g = smrl::compute_policy_gradient(agent, buf, idx, 0.2, 0.0);
    for (const auto& layer : g.net.weights)
      for (double w : layer) EXPECT_DOUBLE_EQ(w, 0.0);
  }
  // ratio = e with negative advantage: min picks the unclipped branch,
  // gradient stays live.
  {
    RolloutBuffer buf = make(lp - 1.0, -1.0);
    auto g = smrl::compute_policy_gradient(agent, buf, idx, 0.2, 0.0);
    double norm = 0.0;
    for (const auto& layer : g.net.weights)
      for (double w : layer) norm += std::abs(w);
    EXPECT_GT(norm, 0.0);
  }
}

TEST(PpoUpdate, ReportsFiniteStatsAndClosedFormEntropy) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv env(config, smrl::TaskKind::kWalk);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 12);
  RolloutBuffer buf = collect_batch(agent, env, 128, 34);
  PpoConfig cfg;
  smrl::compute_gae(buf, 0.0, cfg);
  auto state = smrl::make_update_state(agent, cfg);
  Rng shuffle_rng(9);
  auto stats = smrl::ppo_update(agent, buf, cfg, state, shuffle_rng);
  EXPECT_TRUE(std::isfinite(stats.policy_loss));
  EXPECT_TRUE(std::isfinite(stats.value_loss));
  EXPECT_GE(stats.clip_fraction, 0.0);
  EXPECT_LE(stats.clip_fraction, 1.0);
  double want = 0.5 * std::log(2.0 * M_PI * std::exp(1.0)) * agent.act_dim();
  for (double ls : agent.log_std) want += ls;
  EXPECT_NEAR(stats.entropy, want, 1e-12);
}

TEST(PpoUpdate, LogStdNeverFallsBelowFloor) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv env(config, smrl::TaskKind::kWalk);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 12);
  agent.log_std.assign(agent.log_std.size(), -100.0);
  RolloutBuffer buf = collect_batch(agent, env, 64, 80);
  PpoConfig cfg;
  smrl::compute_gae(buf, 0.0, cfg);
  auto state = smrl::make_update_state(agent, cfg);
  Rng shuffle_rng(2);
  smrl::ppo_update(agent, buf, cfg, state, shuffle_rng);
  for (double ls : agent.log_std) EXPECT_GE(ls, smrl::kLogStdFloor);
}

TEST(PpoUpdate, RequiresAdvantagesAndData) {
  auto agent = smrl::make_agent(3, 1, 1);
  PpoConfig cfg;
  auto state = smrl::make_update_state(agent, cfg);
  Rng rng(1);
  RolloutBuffer empty;
  EXPECT_THROW(smrl::ppo_update(agent, empty, cfg, state, rng),
               std::invalid_argument);
  RolloutBuffer buf;
  buf.push({0.1, 0.2, 0.3}, {0.0}, 0.0, 0.0, 0.0, false, false, 0.0);
  EXPECT_THROW(smrl::ppo_update(agent, buf, cfg, state, rng),
               std::invalid_argument);
}

TEST(PpoUpdate, ValueLossFallsOnFixedBuffer) {
  auto agent = smrl::make_agent(4, 2, 11);
  Rng rng(5);
  RolloutBuffer buf;
  for (int k = 0; k < 64; ++k) {
    Observation o = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                     rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto a = smrl::sample_action(agent, o, rng);
    buf.push(o, a.raw, a.log_prob, rng.uniform(-1.0, 1.0),
             smrl::value_of(agent, o), (k % 16) == 15, false, 0.0);
  }
  PpoConfig cfg;
  smrl::compute_gae(buf, 0.0, cfg);
  auto state = smrl::make_update_state(agent, cfg);
  Rng shuffle_rng(7);
  const double first =
      smrl::ppo_update(agent, buf, cfg, state, shuffle_rng).value_loss;
  double last = first;
  for (int u = 0; u < 30; ++u)
    last = smrl::ppo_update(agent, buf, cfg, state, shuffle_rng).value_loss;
  EXPECT_LT(last, first);
}

TEST(Train, ZeroBudgetTouchesNothing) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv inner(config, smrl::TaskKind::kWalk);
  smrl::CountingEnv env(inner);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 3);
  const auto before = smrl::save_agent(agent);
  PpoConfig cfg;
  cfg.total_step_budget = 0;
  auto result = smrl::train(agent, env, cfg, 99);
  EXPECT_EQ(env.step_count, 0);
  EXPECT_EQ(env.reset_count, 0);
  EXPECT_EQ(result.steps, 0);
  EXPECT_TRUE(result.curve.empty());
  EXPECT_EQ(smrl::save_agent(agent), before);
}

TEST(Train, ConsumesExactBudgetAcrossBatches) {
  auto config = smrl::preset("crawler-2");
  smrl::CrawlerEnv inner(config, smrl::TaskKind::kWalk);
  smrl::CountingEnv env(inner);
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 3);
  PpoConfig cfg;
  cfg.total_step_budget = 1000;
  cfg.rollout_batch = 256;
  cfg.epochs_per_update = 2;
  auto result = smrl::train(agent, env, cfg, 42);
  EXPECT_EQ(env.step_count, 1000);
  EXPECT_EQ(result.steps, 1000);
  ASSERT_EQ(result.curve.size(), 4u);
  EXPECT_EQ(result.curve[0].first, 256);
  EXPECT_EQ(result.curve[1].first, 512);
  EXPECT_EQ(result.curve[2].first, 768);
  EXPECT_EQ(result.curve[3].first, 1000);
  EXPECT_GT(result.episodes, 0);
}

TEST(Train, SeedDeterminesEverything) {
  auto config = smrl::preset("crawler-2");
  PpoConfig cfg;
  cfg.total_step_budget = 600;
  cfg.rollout_batch = 200;
  cfg.epochs_per_update = 2;

  auto run = [&](std::uint64_t seed) {
    smrl::CrawlerEnv env(config, smrl::TaskKind::kWalk);
    auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), seed);
    auto result = smrl::train(agent, env, cfg, seed);
    return std::make_pair(smrl::save_agent(agent), result.curve);
  };

  auto [bytes_a, curve_a] = run(7);
  auto [bytes_b, curve_b] = run(7);
  auto [bytes_c, curve_c] = run(8);
  EXPECT_EQ(bytes_a, bytes_b);
  EXPECT_EQ(curve_a, curve_b);
  EXPECT_NE(bytes_a, bytes_c);
}

// Model stand-in that truncates with a divergence flag every fifth step.
class BlowUpEnv final : public smrl::RolloutEnv {
 public:
  int obs_dim() const override { return 3; }
  int act_dim() const override { return 2; }
  Observation reset(std::uint64_t) override {
    t_ = 0;
    return {0.1, 0.2, 0.3};
  }
  smrl::EnvStep step(const std::vector<double>&) override {
    t_ += 1;
    smrl::EnvStep st;
    st.obs = {0.1 + 0.01 * t_, 0.2, 0.3};
    st.reward = 0.05;
    if (t_ % 5 == 0) {
      st.truncated = true;
      st.divergent = true;
      t_ = 0;
    }
    return st;
  }

 private:
  int t_ = 0;
};

TEST(Train, DivergentTruncationsCountAgainstBudget) {
  BlowUpEnv env;
  auto agent = smrl::make_agent(env.obs_dim(), env.act_dim(), 17);
  PpoConfig cfg;
  cfg.total_step_budget = 60;
  cfg.rollout_batch = 20;
  cfg.epochs_per_update = 2;
  auto result = smrl::train(agent, env, cfg, 23);
  EXPECT_EQ(result.steps, 60);
  EXPECT_EQ(result.episodes, 12);
  EXPECT_EQ(result.divergent_episodes, 12);
}

TEST(Evaluate, DeterministicMeanActionHasZeroVariance) {
  auto config = smrl::preset("crawler-2");
  auto agent = smrl::make_agent(config.obs_dim(), config.dof(), 6);
  auto a = smrl::evaluate_policy(agent, config, smrl::TaskKind::kWalk, 10, 5);
  auto b = smrl::evaluate_policy(agent, config, smrl::TaskKind::kWalk, 10, 5);
  ASSERT_EQ(a.returns.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(a.returns[i], b.returns[i]);
  EXPECT_DOUBLE_EQ(a.mean, b.mean);
  EXPECT_TRUE(std::isfinite(a.mean));
}

TEST(Evaluate, RandomPolicyBaselineIsSeededAndFinite) {
  auto config = smrl::preset("crawler-2");
  auto a = smrl::evaluate_random_policy(config, smrl::TaskKind::kWalk, 5, 5);
  auto b = smrl::evaluate_random_policy(config, smrl::TaskKind::kWalk, 5, 5);
  ASSERT_EQ(a.returns.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(a.returns[i], b.returns[i]);
    EXPECT_TRUE(std::isfinite(a.returns[i]));
  }
}

TEST(AgentIo, RoundTripIsBitExact) {
  auto agent = smrl::make_agent(14, 2, 29);
  agent.log_std = {-0.25, -1.5};
  const auto bytes = smrl::save_agent(agent);
  auto loaded = smrl::load_agent(bytes);
  EXPECT_EQ(smrl::save_agent(loaded), bytes);
  EXPECT_EQ(loaded.policy.sizes, agent.policy.sizes);
  EXPECT_EQ(loaded.value.sizes, agent.value.sizes);

  auto corrupt = bytes;
  corrupt[0] = 'X';
  EXPECT_THROW(smrl::load_agent(corrupt), std::runtime_error);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(smrl::load_agent(truncated), std::runtime_error);
  auto padded = bytes;
  padded.push_back(0);
  EXPECT_THROW(smrl::load_agent(padded), std::runtime_error);
}

TEST(AgentIo, RejectsInconsistentShapes) {
  auto agent = smrl::make_agent(4, 2, 1);
  smrl::ByteWriter w;
  w.magic("SMPG");
  w.u32(smrl::kSmpgVersion);
  w.u32(3);  // claims 3 actions, policy outputs 2
  w.f32_vector(std::vector<double>{-0.7, -0.7, -0.7});
  smrl::save_dense_net(agent.policy, w);
  smrl::save_dense_net(agent.value, w);
  EXPECT_THROW(smrl::load_agent(w.take()), std::runtime_error);
}

}  // namespace
