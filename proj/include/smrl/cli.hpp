#pragma once

// Command-line surface. Exit codes: 0 success, 1 usage error, 2 runtime
// failure. Everything the subcommands do routes through the library
// headers, so the binary adds argument parsing and nothing else.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smrl/config.hpp"
#include "smrl/harness.hpp"
#include "smrl/report.hpp"
#include "smrl/version.hpp"

namespace smrl {

namespace detail {

inline CrawlerConfig cli_env_config(const std::string& preset_name,
                                    TaskKind task) {
  CrawlerConfig c = preset(preset_name);
  apply_task_defaults(c, task);
  return c;
}

struct CollectArgs {
  std::string env;
  long long n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

inline int do_collect(const CollectArgs& a) {
  const CrawlerConfig config = cli_env_config(a.env, TaskKind::kWalk);
  const TransitionDataset data = collect_random(
      config, static_cast<std::size_t>(a.n), config.horizon, a.seed);
  write_file_atomic(a.out, save_dataset(data));
  std::cout << "collected " << data.size() << " transitions on " << a.env
            << " (obs_dim=" << data.obs_dim << ", act_dim=" << data.act_dim
            << ") -> " << a.out << "\n";
  return 0;
}

struct FitArgs {
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  int max_epochs = 200;
};

inline int do_fit_model(const FitArgs& a) {
  const TransitionDataset data = load_dataset(read_file(a.data));
  SelfModelHyper hyper;
  hyper.seed = a.seed;
  hyper.max_epochs = a.max_epochs;
  const SelfModel model = fit_self_model(data, hyper);
  write_file_atomic(a.out, save_self_model(model));
  std::cout << "fit self-model on " << data.size()
            << " transitions: val_mse=" << format_g9(model.report.best_val_mse)
            << " epochs=" << model.report.epochs_run << " -> " << a.out
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string mode;
  std::string env;
  std::string task = "walk";
  long long budget = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string data;   // dyna: dataset to fit a model from
  std::string model;  // dyna: pre-fit model, takes precedence over data
};

inline int do_train(const TrainArgs& a) {
  const TaskKind task = parse_task(a.task);
  const CrawlerConfig config = cli_env_config(a.env, task);
  PolicyValuePair agent;
  TrainResult result;
  PpoConfig ppo;
  ppo.total_step_budget = a.budget;

  if (a.mode == "mfrl") {
    CrawlerEnv env(config, task);
    agent = make_agent(env.obs_dim(), env.act_dim(), a.seed);
    result = train(agent, env, ppo, a.seed);
  } else {
    SelfModel model;
    if (!a.model.empty()) {
      model = load_self_model(read_file(a.model));
    } else {
      const TransitionDataset data = load_dataset(read_file(a.data));
      SelfModelHyper hyper;
      hyper.seed = a.seed;
      model = fit_self_model(data, hyper);
    }
    CrawlerEnv real(config, task);
    ModelEnv env(model, real, config, make_task(config, task));
    agent = make_agent(env.obs_dim(), env.act_dim(), a.seed);
    result = train(agent, env, ppo, a.seed);
  }
  write_file_atomic(a.out, save_agent(agent));
  std::cout << "trained " << a.mode << " on " << a.env << "/" << a.task
            << ": steps=" << result.steps << " episodes=" << result.episodes
            << " divergent=" << result.divergent_episodes << " -> " << a.out
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string agent;
  std::string env;
  std::string task = "walk";
  int episodes = 10;
  std::uint64_t seed = 0;
};

inline int do_eval(const EvalArgs& a) {
  const TaskKind task = parse_task(a.task);
  const CrawlerConfig config = cli_env_config(a.env, task);
  const PolicyValuePair agent = load_agent(read_file(a.agent));
  if (agent.obs_dim() != config.obs_dim() || agent.act_dim() != config.dof())
    throw std::runtime_error("eval: agent shape does not match " + a.env);
  const EvalResult r = evaluate_policy(agent, config, task, a.episodes,
                                       a.seed);
  std::cout << "mean_return=" << format_g9(r.mean) << "\n";
  std::cout << "returns=";
  for (std::size_t i = 0; i < r.returns.size(); ++i) {
    if (i) std::cout << ' ';
    std::cout << format_g9(r.returns[i]);
  }
  std::cout << "\n";
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string out;  // overrides the config's out_dir when given
};

inline int do_sweep(const SweepArgs& a) {
  namespace fs = std::filesystem;
  ExperimentConfig ec = load_experiment_config(a.config);
  if (!a.out.empty()) ec.out_dir = a.out;
  const fs::path dir(ec.out_dir);

  const std::string started = utc_timestamp();
  const SweepConfig sc = make_sweep_config(ec);
  const SweepResult sr = run_sweep(sc);

  // Regression tables come from the CSV text, not from in-memory doubles,
  // so a later `report` run reproduces these bytes exactly.
  const std::vector<SweepRow> rows = rows_from_result(sr);
  const std::string csv = sweep_csv_string(rows, ec.timings_in_csv);
  const std::string resolved = resolved_config_json(ec).dump(2) + "\n";

  std::map<std::string, std::string> files;
  files["sweep.csv"] = csv;
  files["config_resolved.json"] = resolved;

  std::string derive_error;
  try {
    const ReportOutputs outputs =
        make_report_outputs(parse_sweep_csv(csv),
                            (dir / "regression.csv").string(),
                            (dir / "figure.svg").string());
    for (const auto& [path, content] : outputs.files)
      files[fs::relative(path, dir).string()] = content;
  } catch (const std::exception& e) {
    derive_error = e.what();
  }

  for (const auto& [name, content] : files)
    write_file_atomic((dir / name).string(), content);
  const Json manifest =
      build_manifest(sr, ec.master_seed, files, started, utc_timestamp());
  write_file_atomic((dir / "manifest.json").string(),
                    manifest.dump(2) + "\n");

  int failed = 0;
  for (const CellResult& r : sr.results)
    if (!r.ok) failed += 1;
  std::cout << "sweep: " << sr.results.size() - failed << "/"
            << sr.results.size() << " cells ok -> " << ec.out_dir << "\n";
  for (const RegressionRow& row : sr.regressions) {
    char line[160];
    std::snprintf(line, sizeof line,
                  "  task=%s budget=%lld slope=%.4g r_squared=%.3f n=%d",
                  task_name(row.task), static_cast<long long>(row.budget),
                  row.reg.slope, row.reg.r_squared, row.reg.n_points);
    std::cout << line << "\n";
  }
  if (!derive_error.empty()) {
    std::cerr << "sweep: report generation failed: " << derive_error << "\n";
    return 2;
  }
  return 0;
}

struct ReportArgs {
  std::string runs;
  std::string csv;
  std::string svg;
};

inline int do_report(const ReportArgs& a) {
  namespace fs = std::filesystem;
  const std::string csv_path =
      a.csv.empty() ? (fs::path(a.runs) / "regression.csv").string() : a.csv;
  const std::string svg_path =
      a.svg.empty() ? (fs::path(a.runs) / "figure.svg").string() : a.svg;
  const std::vector<std::string> written =
      emit_report(a.runs, csv_path, svg_path);
  for (const std::string& path : written)
    std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"self-model reinforcement learning toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  detail::CollectArgs collect;
  CLI::App* c = app.add_subcommand(
      "collect", "record random-interaction transitions");
  c->add_option("--env", collect.env, "environment preset")
      ->required()
      ->check(CLI::IsMember(preset_names()));
  c->add_option("--n", collect.n, "number of transitions")
      ->required()
      ->check(CLI::PositiveNumber);
  c->add_option("--seed", collect.seed, "rng seed");
  c->add_option("--out", collect.out, "output dataset path")->required();

  detail::FitArgs fit;
  CLI::App* f = app.add_subcommand("fit-model", "fit a dynamics self-model");
  f->add_option("--data", fit.data, "input dataset path")->required();
  f->add_option("--out", fit.out, "output model path")->required();
  f->add_option("--seed", fit.seed, "rng seed");
  f->add_option("--max-epochs", fit.max_epochs, "training epoch cap")
      ->check(CLI::PositiveNumber);

  detail::TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "train a policy with PPO");
  t->add_option("--mode", tr.mode, "mfrl (real env) or dyna (model rollouts)")
      ->required()
      ->check(CLI::IsMember({"mfrl", "dyna"}));
  t->add_option("--env", tr.env, "environment preset")
      ->required()
      ->check(CLI::IsMember(preset_names()));
  t->add_option("--task", tr.task, "walk or jump")
      ->check(CLI::IsMember({"walk", "jump"}));
  t->add_option("--budget", tr.budget, "training step budget")
      ->required()
      ->check(CLI::NonNegativeNumber);
  t->add_option("--seed", tr.seed, "rng seed");
  t->add_option("--out", tr.out, "output agent path")->required();
  t->add_option("--data", tr.data, "dyna: dataset to fit a model from");
  t->add_option("--model", tr.model, "dyna: pre-fit model file");

  detail::EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "evaluate a saved agent");
  e->add_option("--agent", ev.agent, "agent file")->required();
  e->add_option("--env", ev.env, "environment preset")
      ->required()
      ->check(CLI::IsMember(preset_names()));
  e->add_option("--task", ev.task, "walk or jump")
      ->check(CLI::IsMember({"walk", "jump"}));
  e->add_option("--episodes", ev.episodes, "evaluation episodes")
      ->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "rng seed");

  detail::SweepArgs sw;
  CLI::App* s = app.add_subcommand("sweep", "run the full experiment grid");
  s->add_option("--config", sw.config, "experiment config (json)")->required();
  s->add_option("--out", sw.out, "output directory (overrides config)");

  detail::ReportArgs rp;
  CLI::App* r = app.add_subcommand(
      "report", "rebuild regression csv + figure from a run directory");
  r->add_option("--runs", rp.runs, "run directory with sweep.csv")->required();
  r->add_option("--csv", rp.csv, "regression csv output path");
  r->add_option("--svg", rp.svg, "figure output path");

  std::vector<const char*> argv;
  argv.push_back(kToolName);
  for (const std::string& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  // Cross-flag requirement CLI11 cannot express: dyna needs a model source.
  if (t->parsed() && tr.mode == "dyna" && tr.model.empty() &&
      tr.data.empty()) {
    std::cerr << "train: --mode dyna requires --model or --data\n";
    return 1;
  }

  try {
    if (c->parsed()) return detail::do_collect(collect);
    if (f->parsed()) return detail::do_fit_model(fit);
    if (t->parsed()) return detail::do_train(tr);
    if (e->parsed()) return detail::do_eval(ev);
    if (s->parsed()) return detail::do_sweep(sw);
    if (r->parsed()) return detail::do_report(rp);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;  // unreachable with require_subcommand(1)
}

}  // namespace smrl
