#pragma once

// Matched-budget experiment harness. Every cell grants both arms the same
// number of real transitions |D|: the model-free arm spends them directly on
// PPO, the self-model arm spends them on a random-interaction dataset, fits
// a dynamics model, and trains PPO on model rollouts only. Scores always
// come from the real environment with shared evaluation seeds.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "smrl/crawler.hpp"
#include "smrl/dataset.hpp"
#include "smrl/env.hpp"
#include "smrl/ppo.hpp"
#include "smrl/rng.hpp"
#include "smrl/self_model.hpp"

namespace smrl {

struct HarnessConfig {
  long long ppo_budget_model = 200000;  // model steps granted to the Dyna arm
  int eval_episodes = 10;
  PpoConfig ppo;          // total_step_budget is assigned per arm
  SelfModelHyper model;   // seed is assigned per cell
};

// Environment configs resolved once per task so a sweep never re-derives
// horizons mid-run.
struct PresetSpec {
  std::string name;
  CrawlerConfig walk;
  CrawlerConfig jump;

  const CrawlerConfig& for_task(TaskKind kind) const {
    return kind == TaskKind::kWalk ? walk : jump;
  }
};

inline PresetSpec make_preset_spec(const std::string& name) {
  PresetSpec p;
  p.name = name;
  p.walk = preset(name);
  apply_task_defaults(p.walk, TaskKind::kWalk);
  p.jump = preset(name);
  apply_task_defaults(p.jump, TaskKind::kJump);
  return p;
}

struct CellSpec {
  std::string preset_name;
  CrawlerConfig env_config;  // resolved for the task below
  TaskKind task = TaskKind::kWalk;
  long long budget = 0;  // |D|: real transitions granted to each arm
  int seed_index = 0;
  std::uint64_t cell_seed = 0;
  long long ppo_budget_model = 200000;

  long long ppo_budget_real() const { return budget; }  // matched by design
};

struct ArmResult {
  double score = 0.0;
  PolicyValuePair agent;
  TrainResult train;
};

// Model-free arm: PPO directly on the real environment for exactly |D|
// steps. The counter turns any budget leak into a hard failure.
inline ArmResult run_mfrl_cell(const CellSpec& spec, const HarnessConfig& h) {
  const std::uint64_t arm_seed =
      seed_chain(spec.cell_seed, seed_tags::kArmMfrl);
  CrawlerEnv real(spec.env_config, spec.task);
  CountingEnv counted(real);
  ArmResult out;
  out.agent = make_agent(real.obs_dim(), real.act_dim(), arm_seed);
  PpoConfig ppo = h.ppo;
  ppo.total_step_budget = spec.budget;
  out.train = train(out.agent, counted, ppo, arm_seed);
  if (counted.step_count != spec.budget)
    throw std::logic_error("run_mfrl_cell: real-step budget mismatch");
  out.score = evaluate_policy(out.agent, spec.env_config, spec.task,
                              h.eval_episodes, spec.cell_seed)
                  .mean;
  return out;
}

struct FittedModel {
  TransitionDataset data;
  SelfModel model;
};

// The self-model arm's entire real-data spend: |D| random-interaction
// transitions, collected under walk rules regardless of the downstream
// task, then a dynamics fit. One such model can serve several tasks.
inline FittedModel build_cell_model(const CellSpec& spec,
                                    const HarnessConfig& h) {
  const std::uint64_t arm_seed =
      seed_chain(spec.cell_seed, seed_tags::kArmSelfModel);
  CrawlerEnv real(spec.env_config, TaskKind::kWalk);
  CountingEnv counted(real);
  FittedModel out;
  out.data = collect_random_env(counted, static_cast<std::size_t>(spec.budget),
                                spec.env_config.horizon, arm_seed);
  if (counted.step_count != spec.budget)
    throw std::logic_error("build_cell_model: collection budget mismatch");
  SelfModelHyper hyper = h.model;
  hyper.seed = arm_seed;
  out.model = fit_self_model(out.data, hyper);
  return out;
}

struct DynaArm {
  double score = 0.0;
  PolicyValuePair agent;
  TrainResult train;
  double model_val_loss = 0.0;
};

// PPO purely on model rollouts. The real environment appears only through
// reset, which supplies each rollout's seed observation; a single real step
// during training aborts the cell.
inline DynaArm train_on_model(const SelfModel& model, const CellSpec& spec,
                              const HarnessConfig& h) {
  const std::uint64_t arm_seed =
      seed_chain(spec.cell_seed, seed_tags::kArmSelfModel);
  CrawlerEnv real(spec.env_config, spec.task);
  CountingEnv counted(real);
  ModelEnv model_env(model, counted, spec.env_config,
                     make_task(spec.env_config, spec.task));
  DynaArm out;
  out.agent = make_agent(model_env.obs_dim(), model_env.act_dim(), arm_seed);
  PpoConfig ppo = h.ppo;
  ppo.total_step_budget = spec.ppo_budget_model;
  out.train = train(out.agent, model_env, ppo, arm_seed);
  if (counted.step_count != 0)
    throw std::logic_error("train_on_model: real environment was stepped");
  if (spec.ppo_budget_model > 0 && counted.reset_count == 0)
    throw std::logic_error("train_on_model: no seed observations drawn");
  out.model_val_loss = model.report.best_val_mse;
  out.score = evaluate_policy(out.agent, spec.env_config, spec.task,
                              h.eval_episodes, spec.cell_seed)
                  .mean;
  return out;
}

inline DynaArm run_selfmodel_cell(const CellSpec& spec,
                                  const HarnessConfig& h) {
  FittedModel fitted = build_cell_model(spec, h);
  return train_on_model(fitted.model, spec, h);
}

// ---------------------------------------------------------------------------
// Improvement metric and regression
// ---------------------------------------------------------------------------

// Denominator guard for near-useless baselines: 5% of the spread between
// the random score and the best score seen in the cell, never below 1e-3.
inline double improvement_floor(double score_random, double best_known) {
  return std::max(0.05 * std::abs(score_random - best_known), 1e-3);
}

// Random-anchored difference ratio. A plain score ratio explodes whenever
// the baseline return crosses zero, which is routine at small budgets on
// high-dof bodies, so the baseline's margin over random is floored instead.
inline double percent_improvement(double score_sm, double score_mfrl,
                                  double score_random) {
  if (!std::isfinite(score_sm) || !std::isfinite(score_mfrl) ||
      !std::isfinite(score_random))
    throw std::invalid_argument("percent_improvement: scores must be finite");
  const double best_known = std::max({score_sm, score_mfrl, score_random});
  const double denom =
      std::max(score_mfrl - score_random,
               improvement_floor(score_random, best_known));
  return 100.0 * (score_sm - score_mfrl) / denom;
}

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

// Ordinary least squares of y on x. All-equal y fits itself exactly, so the
// SS_tot = 0 branch resolves to 1 unless residuals somehow remain.
inline Regression fit_r_squared(
    std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  bool two_distinct = false;
  for (std::size_t i = 1; i < n; ++i)
    if (points[i].first != points[0].first) two_distinct = true;
  if (n < 2 || !two_distinct)
    throw std::invalid_argument("fit_r_squared: need >= 2 distinct x values");

  double x_mean = 0.0, y_mean = 0.0;
  for (const auto& [x, y] : points) {
    x_mean += x;
    y_mean += y;
  }
  x_mean /= double(n);
  y_mean /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - x_mean) * (x - x_mean);
    sxy += (x - x_mean) * (y - y_mean);
  }
  Regression reg;
  reg.slope = sxy / sxx;
  reg.intercept = y_mean - reg.slope * x_mean;
  reg.n_points = static_cast<int>(n);

  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [x, y] : points) {
    const double e = y - (reg.intercept + reg.slope * x);
    ss_res += e * e;
    ss_tot += (y - y_mean) * (y - y_mean);
  }
  if (ss_tot == 0.0)
    reg.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
  else
    reg.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  return reg;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median_of: empty");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

struct CellResult {
  std::string preset_name;
  int dof = 0;
  long long budget = 0;
  int seed_index = 0;
  TaskKind task = TaskKind::kWalk;
  double score_random = 0.0;
  double score_mfrl = 0.0;
  double score_selfmodel = 0.0;
  double pct_improvement = 0.0;
  double raw_ratio = 0.0;  // score_selfmodel / score_mfrl, kept for context
  double model_val_loss = 0.0;
  double wall_time_s = 0.0;
  long long divergent_episodes = 0;
  bool ok = false;
  std::string error;
};

inline CellResult run_cell(const CellSpec& spec, const HarnessConfig& h) {
  CellResult r;
  r.preset_name = spec.preset_name;
  r.dof = spec.env_config.dof();
  r.budget = spec.budget;
  r.seed_index = spec.seed_index;
  r.task = spec.task;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.score_random = evaluate_random_policy(spec.env_config, spec.task,
                                            h.eval_episodes, spec.cell_seed)
                         .mean;
    ArmResult mfrl = run_mfrl_cell(spec, h);
    DynaArm dyna = run_selfmodel_cell(spec, h);
    r.score_mfrl = mfrl.score;
    r.score_selfmodel = dyna.score;
    r.pct_improvement =
        percent_improvement(r.score_selfmodel, r.score_mfrl, r.score_random);
    r.raw_ratio = r.score_selfmodel / r.score_mfrl;
    r.model_val_loss = dyna.model_val_loss;
    r.divergent_episodes = dyna.train.divergent_episodes;
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

struct SweepConfig {
  std::uint64_t master_seed = 0;
  std::vector<PresetSpec> presets;
  std::vector<long long> budgets = {500, 1000, 2000};
  int seeds_per_cell = 10;
  std::vector<TaskKind> tasks = {TaskKind::kWalk};
  int jobs = 1;
  HarnessConfig harness;
};

// Cell seeds mix the master seed with every coordinate of the cell's grid
// position, so any subset of the grid reproduces bit-identically.
inline std::vector<CellSpec> enumerate_cells(const SweepConfig& sc) {
  std::vector<CellSpec> cells;
  for (std::size_t pi = 0; pi < sc.presets.size(); ++pi) {
    for (std::size_t bi = 0; bi < sc.budgets.size(); ++bi) {
      for (int si = 0; si < sc.seeds_per_cell; ++si) {
        for (std::size_t ti = 0; ti < sc.tasks.size(); ++ti) {
          CellSpec s;
          s.preset_name = sc.presets[pi].name;
          s.task = sc.tasks[ti];
          s.env_config = sc.presets[pi].for_task(s.task);
          s.budget = sc.budgets[bi];
          s.seed_index = si;
          s.cell_seed = seed_chain(sc.master_seed, pi, bi,
                                   static_cast<std::uint64_t>(si), ti);
          s.ppo_budget_model = sc.harness.ppo_budget_model;
          cells.push_back(std::move(s));
        }
      }
    }
  }
  return cells;
}

struct Aggregate {
  TaskKind task = TaskKind::kWalk;
  long long budget = 0;
  int dof = 0;
  double median_pct = 0.0;
  double mean_pct = 0.0;
  int n = 0;
};

struct RegressionRow {
  TaskKind task = TaskKind::kWalk;
  long long budget = 0;
  Regression reg;
};

struct SweepResult {
  std::vector<CellSpec> cells;
  std::vector<CellResult> results;       // same order as cells
  std::vector<Aggregate> aggregates;     // per (task, budget), dof ascending
  std::vector<RegressionRow> regressions;
};

inline void aggregate_sweep(SweepResult& sr, const SweepConfig& sc) {
  sr.aggregates.clear();
  sr.regressions.clear();
  for (TaskKind task : sc.tasks) {
    for (long long budget : sc.budgets) {
      std::vector<int> dofs;
      for (const CellResult& r : sr.results)
        if (r.ok && r.task == task && r.budget == budget)
          dofs.push_back(r.dof);
      std::sort(dofs.begin(), dofs.end());
      dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());

      std::vector<std::pair<double, double>> points;
      for (int dof : dofs) {
        std::vector<double> pcts;
        for (const CellResult& r : sr.results)
          if (r.ok && r.task == task && r.budget == budget && r.dof == dof)
            pcts.push_back(r.pct_improvement);
        Aggregate agg;
        agg.task = task;
        agg.budget = budget;
        agg.dof = dof;
        agg.n = static_cast<int>(pcts.size());
        agg.median_pct = median_of(pcts);
        double mean = 0.0;
        for (double p : pcts) mean += p;
        agg.mean_pct = mean / double(pcts.size());
        sr.aggregates.push_back(agg);
        points.emplace_back(double(dof), agg.median_pct);
      }
      bool two_distinct = points.size() >= 2;
      if (two_distinct) {
        RegressionRow row;
        row.task = task;
        row.budget = budget;
        row.reg = fit_r_squared(points);
        sr.regressions.push_back(row);
      }
    }
  }
}

// Cells are pure functions of their spec, so workers share nothing but the
// claim counter; results land at fixed indices and the output is identical
// for any job count or scheduling order.
inline SweepResult run_sweep(const SweepConfig& sc) {
  if (sc.presets.size() < 2)
    throw std::invalid_argument("run_sweep: need at least 2 presets");
  if (sc.seeds_per_cell < 1)
    throw std::invalid_argument("run_sweep: need at least 1 seed per cell");
  if (sc.budgets.empty() || sc.tasks.empty())
    throw std::invalid_argument("run_sweep: empty budget or task list");
  if (sc.jobs < 1) throw std::invalid_argument("run_sweep: jobs must be >= 1");

  SweepResult sr;
  sr.cells = enumerate_cells(sc);
  sr.results.resize(sr.cells.size());

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(sc.jobs),
                            sr.cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < sr.cells.size(); ++i)
      sr.results[i] = run_cell(sr.cells[i], sc.harness);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= sr.cells.size()) return;
        sr.results[i] = run_cell(sr.cells[i], sc.harness);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  aggregate_sweep(sr, sc);
  return sr;
}

}  // namespace smrl
