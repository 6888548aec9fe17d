#pragma once

// Planar crawler robot family. The body is a rigid segment with point-mass
// translation plus a pitch state; legs are serial chains of massless links,
// so all dynamics stay closed-form. Ground contact is a penalty spring with
// damping and smoothed Coulomb friction. Everything is deterministic: the
// step function is pure, and reset randomness comes only from its seed.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smrl/rng.hpp"

namespace smrl {

using Observation = std::vector<double>;

// Observation layout: [z, vx, vy, vz, roll, pitch, pitch_rate, q[0..m),
// w[0..m)]. vy and roll are identically zero in this planar family but keep
// their slots so the vector shape matches a full 3-D sensor suite. Together
// with the joint state this captures everything the dynamics depend on
// except absolute x, so next-step prediction from an observation is
// well-posed.
inline constexpr int kObsZ = 0;
inline constexpr int kObsVx = 1;
inline constexpr int kObsVy = 2;
inline constexpr int kObsVz = 3;
inline constexpr int kObsRoll = 4;
inline constexpr int kObsPitch = 5;
inline constexpr int kObsPitchRate = 6;
inline constexpr int kObsJointsBegin = 7;

struct CrawlerConfig {
  int legs = 2;
  int joints_per_leg = 1;
  double link_length = 0.15;
  double body_mass = 5.0;
  double body_inertia = 0.1;
  double joint_inertia = 0.02;
  double joint_damping = 0.1;
  double torque_limit = 5.0;
  double joint_angle_limit = 1.2;
  double dt = 0.01;
  double gravity = 9.81;
  double contact_kp = 4000.0;
  double contact_kd = 40.0;
  double friction_mu = 0.9;
  double friction_vs = 0.05;
  double pitch_damping = 0.5;
  double fall_z = 0.05;
  int horizon = 500;
  double z_terminate = 0.0;  // 0 means "derive": standing height + 0.25
  std::vector<double> hip_offsets;  // empty means evenly spaced in [-0.2, 0.2]

  int dof() const { return legs * joints_per_leg; }
  int obs_dim() const { return 2 * dof() + 7; }

  double hip_offset(int leg) const {
    if (!hip_offsets.empty()) return hip_offsets[leg];
    if (legs == 1) return 0.0;
    return -0.2 + 0.4 * double(leg) / double(legs - 1);
  }

  void validate() const {
    if (legs < 1 || joints_per_leg < 1)
      throw std::invalid_argument("crawler: need legs >= 1, joints >= 1");
    if (dt <= 0.0) throw std::invalid_argument("crawler: dt must be > 0");
    if (torque_limit <= 0.0)
      throw std::invalid_argument("crawler: torque_limit must be > 0");
    if (horizon < 1) throw std::invalid_argument("crawler: horizon must be >= 1");
    if (link_length <= 0.0 || body_mass <= 0.0 || body_inertia <= 0.0 ||
        joint_inertia <= 0.0)
      throw std::invalid_argument("crawler: physical constants must be > 0");
    if (!hip_offsets.empty() &&
        hip_offsets.size() != static_cast<std::size_t>(legs))
      throw std::invalid_argument("crawler: hip_offsets length != legs");
  }
};

// Body height at which penalty contact exactly balances gravity with all
// legs straight down.
inline double standing_height(const CrawlerConfig& c) {
  double sag = c.body_mass * c.gravity / (c.contact_kp * c.legs);
  return c.joints_per_leg * c.link_length - sag;
}

struct PhysicsState {
  double x = 0.0, z = 0.0;
  double vx = 0.0, vz = 0.0;
  double pitch = 0.0, pitch_rate = 0.0;
  std::vector<double> q, w;
  int step_index = 0;
};

enum class TaskKind { kWalk, kJump };

struct TaskSpec {
  TaskKind kind = TaskKind::kWalk;
  double z_terminate = 0.0;  // jump only
};

inline TaskSpec make_task(const CrawlerConfig& c, TaskKind kind) {
  TaskSpec t;
  t.kind = kind;
  if (kind == TaskKind::kJump)
    t.z_terminate =
        c.z_terminate > 0.0 ? c.z_terminate : standing_height(c) + 0.25;
  return t;
}

inline const char* task_name(TaskKind kind) {
  return kind == TaskKind::kWalk ? "walk" : "jump";
}

inline TaskKind parse_task(const std::string& name) {
  if (name == "walk") return TaskKind::kWalk;
  if (name == "jump") return TaskKind::kJump;
  throw std::invalid_argument("unknown task: " + name);
}

// Task-dependent episode length: walking gets the full default horizon,
// jumping episodes are shorter.
inline void apply_task_defaults(CrawlerConfig& c, TaskKind kind) {
  c.horizon = kind == TaskKind::kWalk ? 500 : 300;
}

inline Observation observe(const PhysicsState& s, const CrawlerConfig& c) {
  const int m = c.dof();
  Observation obs(static_cast<std::size_t>(c.obs_dim()), 0.0);
  obs[kObsZ] = s.z;
  obs[kObsVx] = s.vx;
  obs[kObsVy] = 0.0;
  obs[kObsVz] = s.vz;
  obs[kObsRoll] = 0.0;
  obs[kObsPitch] = s.pitch;
  obs[kObsPitchRate] = s.pitch_rate;
  for (int i = 0; i < m; ++i) {
    obs[kObsJointsBegin + i] = s.q[i];
    obs[kObsJointsBegin + m + i] = s.w[i];
  }
  return obs;
}

// All joints zeroed at the equilibrium height: contact force balances
// gravity exactly, so with zero torque nothing accelerates.
inline PhysicsState standing_state(const CrawlerConfig& c) {
  PhysicsState s;
  s.z = standing_height(c);
  s.q.assign(c.dof(), 0.0);
  s.w.assign(c.dof(), 0.0);
  return s;
}

inline std::pair<PhysicsState, Observation> env_reset(const CrawlerConfig& c,
                                                      std::uint64_t seed) {
  c.validate();
  PhysicsState s = standing_state(c);
  Rng rng(seed);
  for (double& qi : s.q) qi = rng.uniform(-0.05, 0.05);
  return {s, observe(s, c)};
}

struct FootState {
  double x = 0.0, z = 0.0;   // world position
  double vx = 0.0, vz = 0.0; // world velocity
};

// Forward kinematics for one leg. Joint angles measure deviation from
// straight down; link k of the chain points at angle
// pitch - pi/2 + q[0..k] and rotates at pitch_rate + w[0..k].
inline FootState foot_state(const PhysicsState& s, const CrawlerConfig& c,
                            int leg) {
  const double d = c.hip_offset(leg);
  const double cp = std::cos(s.pitch), sp = std::sin(s.pitch);

  FootState f;
  f.x = s.x + d * cp;
  f.z = s.z + d * sp;
  f.vx = s.vx - d * sp * s.pitch_rate;
  f.vz = s.vz + d * cp * s.pitch_rate;

  double angle = s.pitch - std::numbers::pi / 2.0;
  double rate = s.pitch_rate;
  const int base = leg * c.joints_per_leg;
  for (int j = 0; j < c.joints_per_leg; ++j) {
    angle += s.q[base + j];
    rate += s.w[base + j];
    const double ca = std::cos(angle), sa = std::sin(angle);
    f.x += c.link_length * ca;
    f.z += c.link_length * sa;
    f.vx += c.link_length * rate * -sa;
    f.vz += c.link_length * rate * ca;
  }
  return f;
}

enum class StepEvent : std::uint8_t {
  kNone = 0,
  kHorizon,        // episode length reached (truncation, not failure)
  kFell,           // body height below fall_z
  kReachedHeight,  // jump target reached
};

struct StepResult {
  PhysicsState state;
  Observation obs;
  double reward = 0.0;
  StepEvent event = StepEvent::kNone;

  bool done() const { return event != StepEvent::kNone; }
  bool terminal() const {
    return event == StepEvent::kFell || event == StepEvent::kReachedHeight;
  }
  bool truncated() const { return event == StepEvent::kHorizon; }
};

namespace detail {

inline void validate_action(const std::vector<double>& a, int m) {
  if (static_cast<int>(a.size()) != m)
    throw std::invalid_argument("env_step: action length " +
                                std::to_string(a.size()) + " != dof " +
                                std::to_string(m));
  for (double v : a) {
    if (!std::isfinite(v))
      throw std::invalid_argument("env_step: non-finite action");
    if (v < -1.0 || v > 1.0)
      throw std::invalid_argument("env_step: action component " +
                                  std::to_string(v) + " outside [-1, 1]");
  }
}

}  // namespace detail

// One control step: joint kinematic update, penalty contact on the new leg
// pose against the old body pose, semi-implicit Euler on the body. Action
// components outside [-1, 1] are an error, never clipped.
inline StepResult env_step(const PhysicsState& state,
                           const std::vector<double>& action,
                           const CrawlerConfig& c, const TaskSpec& task) {
  const int m = c.dof();
  detail::validate_action(action, m);

  StepResult r;
  PhysicsState& s = r.state;
  s = state;

  for (int i = 0; i < m; ++i) {
    const double torque = c.torque_limit * action[i];
    s.w[i] += c.dt * (torque - c.joint_damping * s.w[i]) / c.joint_inertia;
    double qn = s.q[i] + c.dt * s.w[i];
    if (qn > c.joint_angle_limit) {
      qn = c.joint_angle_limit;
      s.w[i] = 0.0;
    } else if (qn < -c.joint_angle_limit) {
      qn = -c.joint_angle_limit;
      s.w[i] = 0.0;
    }
    s.q[i] = qn;
  }

  // Contact forces from the updated legs against the pre-step body pose.
  double sum_fx = 0.0, sum_fz = 0.0, sum_torque = 0.0;
  for (int leg = 0; leg < c.legs; ++leg) {
    FootState f = foot_state(s, c, leg);
    if (f.z >= 0.0) continue;
    const double normal =
        std::max(0.0, c.contact_kp * -f.z - c.contact_kd * f.vz);
    const double tangent =
        -c.friction_mu * normal * std::tanh(f.vx / c.friction_vs);
    sum_fx += tangent;
    sum_fz += normal;
    sum_torque += (f.x - s.x) * normal - (f.z - s.z) * tangent;
  }

  const double ax = sum_fx / c.body_mass;
  const double az = sum_fz / c.body_mass - c.gravity;
  const double ap =
      (sum_torque - c.pitch_damping * s.pitch_rate) / c.body_inertia;

  s.vx += c.dt * ax;
  s.vz += c.dt * az;
  s.pitch_rate += c.dt * ap;
  s.x += c.dt * s.vx;
  s.z += c.dt * s.vz;
  s.pitch += c.dt * s.pitch_rate;
  s.step_index += 1;

  r.reward = (task.kind == TaskKind::kWalk ? s.vx : s.vz) * c.dt;

  if (s.z < c.fall_z)
    r.event = StepEvent::kFell;
  else if (task.kind == TaskKind::kJump && s.z >= task.z_terminate)
    r.event = StepEvent::kReachedHeight;
  else if (s.step_index >= c.horizon)
    r.event = StepEvent::kHorizon;

  r.obs = observe(s, c);
  return r;
}

// DoF ladder used by the sweep. All presets share the same physical
// constants; only the leg layout changes.
inline CrawlerConfig preset(const std::string& name) {
  CrawlerConfig c;
  if (name == "crawler-2") {
    c.legs = 2;
    c.joints_per_leg = 1;
  } else if (name == "crawler-4") {
    c.legs = 2;
    c.joints_per_leg = 2;
  } else if (name == "crawler-6") {
    c.legs = 2;
    c.joints_per_leg = 3;
  } else if (name == "crawler-8") {
    c.legs = 4;
    c.joints_per_leg = 2;
  } else if (name == "crawler-12") {
    c.legs = 4;
    c.joints_per_leg = 3;
  } else if (name == "crawler-16") {
    c.legs = 4;
    c.joints_per_leg = 4;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return c;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "crawler-2", "crawler-4", "crawler-6",
      "crawler-8", "crawler-12", "crawler-16"};
  return names;
}

}  // namespace smrl
