#pragma once

// Transition datasets collected from random motion, with per-channel
// normalization statistics. |D|, the number of transitions, is the
// experiment's independent variable.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smrl/binio.hpp"
#include "smrl/crawler.hpp"
#include "smrl/env.hpp"
#include "smrl/rng.hpp"

namespace smrl {

// Per-dimension mean and standard deviation. Stds are floored at 1e-6 so
// constant channels (vy, roll) pass through normalization unchanged instead
// of dividing by zero.
struct ChannelStats {
  std::vector<double> mean, std;

  std::vector<double> normalize(std::span<const double> x) const {
    check(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = (x[i] - mean[i]) / std[i];
    return out;
  }

  std::vector<double> denormalize(std::span<const double> x) const {
    check(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = x[i] * std[i] + mean[i];
    return out;
  }

 private:
  void check(std::size_t n) const {
    if (n != mean.size() || n != std.size())
      throw std::invalid_argument("ChannelStats: dimension mismatch");
  }
};

inline constexpr double kStdFloor = 1e-6;

struct NormStats {
  ChannelStats obs, act, delta;
};

struct Transition {
  std::vector<double> s, a, s_next;
};

struct TransitionDataset {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Transition> transitions;
  NormStats stats;

  std::size_t size() const { return transitions.size(); }
};

namespace detail {

// Population mean/std per dimension over a sequence of equal-length vectors.
template <typename GetRow>
ChannelStats channel_stats(std::size_t count, std::size_t dim, GetRow row) {
  ChannelStats cs;
  cs.mean.assign(dim, 0.0);
  cs.std.assign(dim, 0.0);
  if (count == 0) {
    cs.std.assign(dim, kStdFloor);
    return cs;
  }
  for (std::size_t r = 0; r < count; ++r) {
    std::span<const double> v = row(r);
    for (std::size_t i = 0; i < dim; ++i) cs.mean[i] += v[i];
  }
  for (std::size_t i = 0; i < dim; ++i) cs.mean[i] /= double(count);
  for (std::size_t r = 0; r < count; ++r) {
    std::span<const double> v = row(r);
    for (std::size_t i = 0; i < dim; ++i) {
      double d = v[i] - cs.mean[i];
      cs.std[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < dim; ++i)
    cs.std[i] = std::max(std::sqrt(cs.std[i] / double(count)), kStdFloor);
  return cs;
}

}  // namespace detail

inline NormStats compute_norm_stats(const TransitionDataset& ds) {
  NormStats ns;
  const auto& t = ds.transitions;
  ns.obs = detail::channel_stats(
      t.size(), ds.obs_dim,
      [&](std::size_t r) { return std::span<const double>(t[r].s); });
  ns.act = detail::channel_stats(
      t.size(), ds.act_dim,
      [&](std::size_t r) { return std::span<const double>(t[r].a); });

  std::vector<double> delta(ds.obs_dim);
  std::vector<std::vector<double>> deltas(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    deltas[r].resize(ds.obs_dim);
    for (int i = 0; i < ds.obs_dim; ++i)
      deltas[r][i] = t[r].s_next[i] - t[r].s[i];
  }
  ns.delta = detail::channel_stats(
      t.size(), ds.obs_dim,
      [&](std::size_t r) { return std::span<const double>(deltas[r]); });
  return ns;
}

// Random-motion collection against any environment. Actions are i.i.d.
// uniform over [-1,1]^m from one substream; episode reseeds come from
// another, so the action sequence does not depend on episode boundaries.
inline TransitionDataset collect_random_env(RolloutEnv& env, std::size_t n,
                                            int episode_len,
                                            std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("collect_random: n must be >= 1");
  if (episode_len < 1)
    throw std::invalid_argument("collect_random: episode_len must be >= 1");

  TransitionDataset ds;
  ds.obs_dim = env.obs_dim();
  ds.act_dim = env.act_dim();
  ds.transitions.reserve(n);

  Rng action_rng(seed_chain(seed, seed_tags::kCollectActions));
  std::uint64_t episode = 0;
  Observation obs = env.reset(seed_chain(seed, seed_tags::kCollectReset, episode));
  int steps_in_episode = 0;

  while (ds.transitions.size() < n) {
    Transition tr;
    tr.s = obs;
    tr.a.resize(ds.act_dim);
    for (double& v : tr.a) v = action_rng.uniform(-1.0, 1.0);

    EnvStep st = env.step(tr.a);
    tr.s_next = st.obs;
    obs = st.obs;
    steps_in_episode += 1;
    ds.transitions.push_back(std::move(tr));

    if (st.done() || steps_in_episode >= episode_len) {
      episode += 1;
      obs = env.reset(seed_chain(seed, seed_tags::kCollectReset, episode));
      steps_in_episode = 0;
    }
  }
  ds.stats = compute_norm_stats(ds);
  return ds;
}

inline TransitionDataset collect_random(const CrawlerConfig& config,
                                        std::size_t n, int episode_len,
                                        std::uint64_t seed) {
  CrawlerEnv env(config, TaskKind::kWalk);
  return collect_random_env(env, n, episode_len, seed);
}

// ---------------------------------------------------------------------------
// SMDS on-disk format (little-endian):
//   "SMDS" | u32 version=1 | u32 obs_dim | u32 act_dim | u64 count
//   | count rows of [s, a, s_next] f32
//   | (mean, std) f32 vector pairs for obs, act, delta.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kSmdsVersion = 1;

namespace detail {

inline void write_channel_stats(const ChannelStats& cs, ByteWriter& w) {
  w.f32_vector(cs.mean);
  w.f32_vector(cs.std);
}

inline ChannelStats read_channel_stats(ByteReader& r, std::size_t dim) {
  ChannelStats cs;
  cs.mean = r.f32_vector(dim);
  cs.std = r.f32_vector(dim);
  return cs;
}

}  // namespace detail

inline std::vector<std::uint8_t> save_dataset(const TransitionDataset& ds) {
  ByteWriter w;
  w.magic("SMDS");
  w.u32(kSmdsVersion);
  w.u32(static_cast<std::uint32_t>(ds.obs_dim));
  w.u32(static_cast<std::uint32_t>(ds.act_dim));
  w.u64(ds.transitions.size());
  for (const Transition& t : ds.transitions) {
    w.f32_vector(t.s);
    w.f32_vector(t.a);
    w.f32_vector(t.s_next);
  }
  detail::write_channel_stats(ds.stats.obs, w);
  detail::write_channel_stats(ds.stats.act, w);
  detail::write_channel_stats(ds.stats.delta, w);
  return w.take();
}

inline TransitionDataset load_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.magic("SMDS");
  if (r.u32() != kSmdsVersion)
    throw std::runtime_error("SMDS: unsupported version");
  TransitionDataset ds;
  ds.obs_dim = static_cast<int>(r.u32());
  ds.act_dim = static_cast<int>(r.u32());
  if (ds.obs_dim < 1 || ds.obs_dim > 1 << 20 || ds.act_dim < 1 ||
      ds.act_dim > 1 << 20)
    throw std::runtime_error("SMDS: bad dimensions");
  const std::uint64_t count = r.u64();
  ds.transitions.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ds.transitions[i].s = r.f32_vector(ds.obs_dim);
    ds.transitions[i].a = r.f32_vector(ds.act_dim);
    ds.transitions[i].s_next = r.f32_vector(ds.obs_dim);
  }
  ds.stats.obs = detail::read_channel_stats(r, ds.obs_dim);
  ds.stats.act = detail::read_channel_stats(r, ds.act_dim);
  ds.stats.delta = detail::read_channel_stats(r, ds.obs_dim);
  r.expect_end();
  return ds;
}

}  // namespace smrl
