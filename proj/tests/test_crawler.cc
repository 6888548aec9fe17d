// Physics and contract tests for the crawler environment family:
// analytic free fall, exact standing equilibrium, joint-limit and energy
// invariants, kinematics cross-checks, preset table, task termination.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "smrl/crawler.hpp"
#include "smrl/env.hpp"

using namespace smrl;

namespace {

std::vector<double> zero_action(const CrawlerConfig& c) {
  return std::vector<double>(c.dof(), 0.0);
}

double body_energy(const PhysicsState& s, const CrawlerConfig& c) {
  return 0.5 * c.body_mass * (s.vx * s.vx + s.vz * s.vz) +
         0.5 * c.body_inertia * s.pitch_rate * s.pitch_rate +
         c.body_mass * c.gravity * s.z;
}

bool states_equal(const PhysicsState& a, const PhysicsState& b) {
  return a.x == b.x && a.z == b.z && a.vx == b.vx && a.vz == b.vz &&
         a.pitch == b.pitch && a.pitch_rate == b.pitch_rate && a.q == b.q &&
         a.w == b.w && a.step_index == b.step_index;
}

}  // namespace

TEST(Crawler, ResetIsDeterministicInSeed) {
  CrawlerConfig c = preset("crawler-4");
  auto [s1, o1] = env_reset(c, 99);
  auto [s2, o2] = env_reset(c, 99);
  EXPECT_TRUE(states_equal(s1, s2));
  EXPECT_EQ(o1, o2);
}

TEST(Crawler, ResetSeedChangesOnlyJointAngles) {
  CrawlerConfig c = preset("crawler-4");
  const int m = c.dof();
  auto [s1, o1] = env_reset(c, 1);
  auto [s2, o2] = env_reset(c, 2);

  ASSERT_EQ(o1.size(), o2.size());
  for (int i = 0; i < kObsJointsBegin; ++i) EXPECT_EQ(o1[i], o2[i]);
  for (int i = kObsJointsBegin + m; i < c.obs_dim(); ++i)
    EXPECT_EQ(o1[i], o2[i]);

  bool any_diff = false;
  for (int i = 0; i < m; ++i) {
    double q1 = o1[kObsJointsBegin + i];
    EXPECT_LE(std::abs(q1), 0.05);
    if (q1 != o2[kObsJointsBegin + i]) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Crawler, ObservationLengthTracksDof) {
  EXPECT_EQ(preset("crawler-4").obs_dim(), 15);
  EXPECT_EQ(preset("crawler-16").obs_dim(), 39);
  auto [s, o] = env_reset(preset("crawler-4"), 3);
  EXPECT_EQ(o.size(), 15u);
}

TEST(Crawler, StandingHeightMatchesGeometryMinusSag) {
  CrawlerConfig c = preset("crawler-6");
  double sag = c.body_mass * c.gravity / (c.contact_kp * c.legs);
  EXPECT_EQ(standing_height(c), c.joints_per_leg * c.link_length - sag);
  auto [s, o] = env_reset(c, 5);
  EXPECT_EQ(o[kObsZ], standing_height(c));
}

TEST(Crawler, FreeFallMatchesAnalyticGravity) {
  CrawlerConfig c = preset("crawler-2");
  c.horizon = 1000;
  TaskSpec task = make_task(c, TaskKind::kWalk);

  PhysicsState s = standing_state(c);
  s.z = 6.0;  // airborne for the full window (1 s of fall is ~4.9 m)
  double expected_vz = 0.0;
  for (int n = 1; n <= 100; ++n) {
    StepResult r = env_step(s, zero_action(c), c, task);
    s = r.state;
    expected_vz -= c.gravity * c.dt;
    ASSERT_NEAR(s.vz, expected_vz, 1e-9) << "step " << n;
    ASSERT_NEAR(s.vz, -c.gravity * (n * c.dt), 1e-9) << "step " << n;
  }
}

TEST(Crawler, StandingEquilibriumDoesNotDrift) {
  CrawlerConfig c = preset("crawler-2");
  TaskSpec task = make_task(c, TaskKind::kWalk);
  PhysicsState s = standing_state(c);
  const double z0 = s.z;

  for (int n = 0; n < 100; ++n) {
    StepResult r = env_step(s, zero_action(c), c, task);
    s = r.state;
  }
  EXPECT_LT(std::abs(s.x), 1e-3);
  EXPECT_LT(std::abs(s.z - z0), 1e-4);
  EXPECT_LT(std::abs(s.vx), 1e-6);
  EXPECT_LT(std::abs(s.vz), 1e-6);
  EXPECT_LT(std::abs(s.pitch), 1e-6);
}

TEST(Crawler, ActionContractIsStrict) {
  CrawlerConfig c = preset("crawler-2");
  TaskSpec task = make_task(c, TaskKind::kWalk);
  PhysicsState s = standing_state(c);

  std::vector<double> too_big = {1.0001, 0.0};
  EXPECT_THROW(env_step(s, too_big, c, task), std::invalid_argument);
  std::vector<double> nan_action = {std::nan(""), 0.0};
  EXPECT_THROW(env_step(s, nan_action, c, task), std::invalid_argument);
  std::vector<double> wrong_len = {0.5};
  EXPECT_THROW(env_step(s, wrong_len, c, task), std::invalid_argument);
  std::vector<double> boundary = {1.0, -1.0};
  EXPECT_NO_THROW(env_step(s, boundary, c, task));
}

TEST(Crawler, JointLimitsHoldUnderRandomActions) {
  CrawlerConfig c = preset("crawler-4");
  CrawlerEnv env(c, TaskKind::kWalk);
  Rng rng(2024);

  env.reset(0);
  std::vector<double> a(c.dof());
  int episode = 1;
  for (int step = 0; step < 100000; ++step) {
    for (double& v : a) v = rng.uniform(-1.0, 1.0);
    EnvStep r = env.step(a);
    const PhysicsState& s = env.state();
    for (int i = 0; i < c.dof(); ++i) {
      ASSERT_LE(s.q[i], c.joint_angle_limit);
      ASSERT_GE(s.q[i], -c.joint_angle_limit);
      ASSERT_TRUE(std::isfinite(s.q[i]));
      ASSERT_TRUE(std::isfinite(s.w[i]));
    }
    ASSERT_TRUE(std::isfinite(s.z));
    ASSERT_TRUE(std::isfinite(s.vx));
    if (r.done()) env.reset(episode++);
  }
}

TEST(Crawler, JointClampZeroesVelocityAndPins) {
  CrawlerConfig c = preset("crawler-2");
  c.horizon = 100000;
  TaskSpec task = make_task(c, TaskKind::kWalk);
  PhysicsState s = standing_state(c);
  s.z = 5.0;  // airborne so contact cannot interfere

  std::vector<double> a = {1.0, 0.0};
  bool pinned = false;
  for (int n = 0; n < 400; ++n) {
    s = env_step(s, a, c, task).state;
    if (s.q[0] == c.joint_angle_limit) {
      pinned = true;
      EXPECT_EQ(s.w[0], 0.0);
    }
  }
  EXPECT_TRUE(pinned);
  EXPECT_EQ(s.q[0], c.joint_angle_limit);
}

TEST(Crawler, AirborneEnergyNonIncreasing) {
  CrawlerConfig c = preset("crawler-4");
  c.horizon = 1000;
  TaskSpec task = make_task(c, TaskKind::kWalk);

  PhysicsState s = standing_state(c);
  s.z = 6.0;
  s.vx = 0.8;
  s.vz = 1.5;
  s.pitch_rate = 2.0;

  double prev = body_energy(s, c);
  for (int n = 0; n < 100; ++n) {
    s = env_step(s, zero_action(c), c, task).state;
    for (int leg = 0; leg < c.legs; ++leg)
      ASSERT_GT(foot_state(s, c, leg).z, 0.0) << "left the airborne regime";
    double e = body_energy(s, c);
    ASSERT_LE(e, prev + 1e-6);
    prev = e;
  }
}

TEST(Crawler, StandingPenetrationStaysNearStaticDepth) {
  CrawlerConfig c = preset("crawler-2");
  c.horizon = 1000;
  TaskSpec task = make_task(c, TaskKind::kWalk);
  const double static_depth = c.body_mass * c.gravity / (c.contact_kp * c.legs);

  auto run = [&](PhysicsState s) {
    double max_pen = 0.0;
    for (int n = 0; n < 300; ++n) {
      s = env_step(s, zero_action(c), c, task).state;
      for (int leg = 0; leg < c.legs; ++leg) {
        double fz = foot_state(s, c, leg).z;
        max_pen = std::max(max_pen, -fz);
      }
    }
    return max_pen;
  };

  EXPECT_LE(run(standing_state(c)), 3.0 * static_depth);
  EXPECT_LE(run(env_reset(c, 17).first), 3.0 * static_depth);
}

TEST(Crawler, StepReturnsObservationOfNewState) {
  CrawlerConfig c = preset("crawler-6");
  TaskSpec task = make_task(c, TaskKind::kWalk);
  auto [s, obs0] = env_reset(c, 8);

  std::vector<double> a(c.dof(), 0.3);
  StepResult r = env_step(s, a, c, task);
  EXPECT_EQ(r.obs, observe(r.state, c));
  EXPECT_EQ(r.obs[kObsVy], 0.0);
  EXPECT_EQ(r.obs[kObsRoll], 0.0);
}

TEST(Crawler, ObserveAtRestHasZeroVelocities) {
  CrawlerConfig c = preset("crawler-4");
  Observation o = observe(standing_state(c), c);
  EXPECT_EQ(o[kObsVx], 0.0);
  EXPECT_EQ(o[kObsVz], 0.0);
  const int m = c.dof();
  for (int i = 0; i < m; ++i) EXPECT_EQ(o[kObsJointsBegin + m + i], 0.0);
}

TEST(Crawler, StepIsDeterministic) {
  CrawlerConfig c = preset("crawler-8");
  TaskSpec task = make_task(c, TaskKind::kWalk);
  auto [s, o] = env_reset(c, 123);
  Rng rng(7);
  std::vector<double> a(c.dof());
  for (double& v : a) v = rng.uniform(-1.0, 1.0);

  StepResult r1 = env_step(s, a, c, task);
  StepResult r2 = env_step(s, a, c, task);
  EXPECT_TRUE(states_equal(r1.state, r2.state));
  EXPECT_EQ(r1.obs, r2.obs);
  EXPECT_EQ(r1.reward, r2.reward);
}

TEST(Crawler, RewardIsPostStepVelocityTimesDt) {
  CrawlerConfig c = preset("crawler-2");
  auto [s, o] = env_reset(c, 4);
  std::vector<double> a = {0.7, -0.4};

  StepResult walk = env_step(s, a, c, make_task(c, TaskKind::kWalk));
  EXPECT_EQ(walk.reward, walk.state.vx * c.dt);

  StepResult jump = env_step(s, a, c, make_task(c, TaskKind::kJump));
  EXPECT_EQ(jump.reward, jump.state.vz * c.dt);
}

TEST(Crawler, JumpTerminatesAtTargetHeight) {
  CrawlerConfig c = preset("crawler-2");
  TaskSpec jump = make_task(c, TaskKind::kJump);
  EXPECT_NEAR(jump.z_terminate, standing_height(c) + 0.25, 1e-12);

  PhysicsState s = standing_state(c);
  s.vz = 3.0;
  bool reached = false;
  for (int n = 0; n < 50 && !reached; ++n) {
    StepResult r = env_step(s, zero_action(c), c, jump);
    s = r.state;
    if (r.event == StepEvent::kReachedHeight) {
      reached = true;
      EXPECT_GE(s.z, jump.z_terminate);
      EXPECT_TRUE(r.terminal());
      EXPECT_FALSE(r.truncated());
    }
  }
  EXPECT_TRUE(reached);

  // The same trajectory under the walk task runs straight through.
  PhysicsState s2 = standing_state(c);
  s2.vz = 3.0;
  TaskSpec walk = make_task(c, TaskKind::kWalk);
  for (int n = 0; n < 20; ++n) {
    StepResult r = env_step(s2, zero_action(c), c, walk);
    s2 = r.state;
    ASSERT_NE(r.event, StepEvent::kReachedHeight);
  }
}

TEST(Crawler, FallingBelowThresholdTerminates) {
  CrawlerConfig c = preset("crawler-2");
  TaskSpec task = make_task(c, TaskKind::kWalk);
  PhysicsState s = standing_state(c);
  s.q = {1.2, 1.2};  // legs folded, feet above the fall line
  s.z = 0.055;
  s.vz = -1.0;

  StepResult r = env_step(s, zero_action(c), c, task);
  EXPECT_EQ(r.event, StepEvent::kFell);
  EXPECT_TRUE(r.terminal());
  EXPECT_LT(r.state.z, c.fall_z);
}

TEST(Crawler, HorizonTruncates) {
  CrawlerConfig c = preset("crawler-2");
  c.horizon = 40;
  TaskSpec task = make_task(c, TaskKind::kWalk);
  PhysicsState s = standing_state(c);

  for (int n = 1; n <= 40; ++n) {
    StepResult r = env_step(s, zero_action(c), c, task);
    s = r.state;
    if (n < 40) {
      ASSERT_EQ(r.event, StepEvent::kNone);
    } else {
      EXPECT_EQ(r.event, StepEvent::kHorizon);
      EXPECT_TRUE(r.truncated());
      EXPECT_FALSE(r.terminal());
    }
  }
}

TEST(Crawler, TaskDefaultsSetHorizon) {
  CrawlerConfig c = preset("crawler-2");
  apply_task_defaults(c, TaskKind::kWalk);
  EXPECT_EQ(c.horizon, 500);
  apply_task_defaults(c, TaskKind::kJump);
  EXPECT_EQ(c.horizon, 300);
}

TEST(Crawler, PresetTableMatchesDofLadder) {
  const std::vector<std::pair<std::string, int>> expect = {
      {"crawler-2", 2},  {"crawler-4", 4},  {"crawler-6", 6},
      {"crawler-8", 8},  {"crawler-12", 12}, {"crawler-16", 16}};
  for (const auto& [name, dof] : expect) {
    CrawlerConfig c = preset(name);
    EXPECT_EQ(c.dof(), dof) << name;
    EXPECT_EQ(c.obs_dim(), 2 * dof + 7) << name;
  }
  EXPECT_EQ(preset_names().size(), 6u);
  EXPECT_THROW(preset("crawler-5"), std::invalid_argument);

  // Physical constants are shared across the ladder.
  CrawlerConfig base = preset("crawler-2");
  for (const auto& name : preset_names()) {
    CrawlerConfig c = preset(name);
    EXPECT_EQ(c.torque_limit, base.torque_limit);
    EXPECT_EQ(c.link_length, base.link_length);
    EXPECT_EQ(c.body_mass, base.body_mass);
    EXPECT_EQ(c.dt, base.dt);
  }
}

TEST(Crawler, FootPositionClosedFormAtZeroPose) {
  CrawlerConfig c = preset("crawler-12");
  PhysicsState s = standing_state(c);
  s.x = 0.7;
  for (int leg = 0; leg < c.legs; ++leg) {
    FootState f = foot_state(s, c, leg);
    EXPECT_NEAR(f.x, s.x + c.hip_offset(leg), 1e-12);
    EXPECT_NEAR(f.z, s.z - c.joints_per_leg * c.link_length, 1e-12);
  }
}

TEST(Crawler, FootVelocityMatchesNumericalDerivative) {
  CrawlerConfig c = preset("crawler-6");
  PhysicsState s = standing_state(c);
  s.x = 0.3;
  s.z = 0.5;
  s.vx = 0.4;
  s.vz = -0.2;
  s.pitch = 0.15;
  s.pitch_rate = 1.1;
  Rng rng(66);
  for (double& qi : s.q) qi = rng.uniform(-0.8, 0.8);
  for (double& wi : s.w) wi = rng.uniform(-3.0, 3.0);

  const double h = 1e-7;
  PhysicsState s2 = s;
  s2.x += h * s.vx;
  s2.z += h * s.vz;
  s2.pitch += h * s.pitch_rate;
  for (int i = 0; i < c.dof(); ++i) s2.q[i] += h * s.w[i];

  for (int leg = 0; leg < c.legs; ++leg) {
    FootState f = foot_state(s, c, leg);
    FootState f2 = foot_state(s2, c, leg);
    EXPECT_NEAR((f2.x - f.x) / h, f.vx, 1e-5);
    EXPECT_NEAR((f2.z - f.z) / h, f.vz, 1e-5);
  }
}

TEST(Crawler, CountingEnvCountsCalls) {
  CrawlerConfig c = preset("crawler-2");
  CrawlerEnv env(c, TaskKind::kWalk);
  CountingEnv counted(env);

  counted.reset(1);
  std::vector<double> a(c.dof(), 0.1);
  counted.step(a);
  counted.step(a);
  EXPECT_EQ(counted.reset_count, 1);
  EXPECT_EQ(counted.step_count, 2);
  EXPECT_EQ(counted.obs_dim(), env.obs_dim());
  EXPECT_EQ(counted.act_dim(), env.act_dim());
}

TEST(Crawler, EnvWrapperReportsTerminalAndTruncated) {
  CrawlerConfig c = preset("crawler-2");
  c.horizon = 5;
  CrawlerEnv env(CrawlerConfig(c), make_task(c, TaskKind::kWalk));
  env.reset(3);
  std::vector<double> a(c.dof(), 0.0);
  EnvStep last;
  for (int i = 0; i < 5; ++i) last = env.step(a);
  EXPECT_TRUE(last.truncated);
  EXPECT_FALSE(last.terminal);
  EXPECT_TRUE(last.done());
}
