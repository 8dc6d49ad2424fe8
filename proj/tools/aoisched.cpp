// aoisched: command-line driver for the relay-network AoI scheduling
// experiments. Every subcommand writes its outputs plus manifest.json into
// the --out directory.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aoi/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace aoi;
using namespace aoi::harness;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "out";
  std::string scheduler;
  std::string mode = "config";
  int episodes = 200;
  int stack = 4;
  long train_episodes = 20000;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Scenario file (key = value lines)");
  cmd->add_option("--seed", o.seeds, "Run seed(s)")->expected(1, -1);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--mode", o.mode, "ideal | practical | config")
      ->check(CLI::IsMember({"ideal", "practical", "config"}));
  cmd->add_option("--episodes", o.episodes, "Evaluation episodes per seed")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--stack", o.stack, "Observation stack size z")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--train-episodes", o.train_episodes,
                  "Training budget for vppo (episodes)")
      ->check(CLI::PositiveNumber);
}

ExperimentSpec make_spec(const CommonOptions& o) {
  ExperimentSpec spec;
  if (!o.config.empty()) spec.scenario = load_scenario(o.config);
  spec.mode = parse_env_mode(o.mode);
  spec.seeds = o.seeds;
  spec.eval_episodes = o.episodes;
  spec.stack = o.stack;
  spec.train.total_episodes = o.train_episodes;
  if (!o.checkpoint.empty()) spec.checkpoint = fs::path(o.checkpoint);
  return spec;
}

std::vector<SchedulerKind> scheduler_list(const std::string& token,
                                          bool baselines_only) {
  std::vector<SchedulerKind> kinds;
  if (token.empty() || token == "all") {
    kinds.assign(std::begin(kBaselines), std::end(kBaselines));
    if (token == "all" && !baselines_only) kinds.push_back(SchedulerKind::vppo);
    return kinds;
  }
  std::stringstream ss(token);
  std::string item;
  while (std::getline(ss, item, ',')) kinds.push_back(parse_scheduler(item));
  if (baselines_only)
    for (auto k : kinds)
      if (k == SchedulerKind::vppo)
        throw std::invalid_argument("simulate runs baseline schedulers only");
  return kinds;
}

class Run {
 public:
  Run(std::string command, const CommonOptions& o, const ExperimentSpec& spec)
      : dir_(o.out), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    const auto resolved = apply_mode(spec.scenario, spec.mode);
    manifest_["command"] = std::move(command);
    manifest_["mode"] = std::string(env_mode_name(spec.mode));
    manifest_["seeds"] = spec.seeds;
    manifest_["scenario"] = format_scenario(resolved);
    manifest_["scenario_path"] = o.config;
    manifest_["eval_episodes"] = spec.eval_episodes;
    manifest_["stack"] = spec.stack;
    manifest_["train"] = {{"total_episodes", spec.train.total_episodes},
                          {"gamma", spec.train.gamma},
                          {"clip", spec.train.clip},
                          {"learning_rate", spec.train.learning_rate},
                          {"epochs", spec.train.epochs},
                          {"minibatch_size", spec.train.minibatch_size},
                          {"buffer_size", spec.train.buffer_size},
                          {"value_coef", spec.train.value_coef},
                          {"entropy_coef", spec.train.entropy_coef}};
    if (spec.checkpoint) manifest_["checkpoint"] = spec.checkpoint->string();
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  json& manifest() { return manifest_; }

  void output(const std::string& name) { manifest_["outputs"].push_back(name); }

  void write_results(const std::vector<ResultRow>& rows) {
    std::ofstream f(path("results.csv"));
    write_results_csv(f, rows);
    output("results.csv");
    for (const auto& r : rows)
      manifest_["cell_wall_time"].push_back(
          {{"scheduler", r.scheduler}, {"seed", r.seed},
           {"sweep_value", r.sweep_value}, {"seconds", r.wall_time}});
  }

  ~Run() {
    manifest_["wall_time"] = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
    std::ofstream f(dir_ / "manifest.json");
    f << manifest_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  json manifest_;
};

void print_summary(const std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, int>, std::vector<ResultRow>> cells;
  for (const auto& r : rows) cells[{r.scheduler, r.sweep_value}].push_back(r);
  for (const auto& [key, group] : cells) {
    const auto tbs = summarize_tbs(group);
    const auto relay = summarize_relay(group);
    std::cout << key.first;
    if (!group.front().sweep_var.empty())
      std::cout << ' ' << group.front().sweep_var << '=' << key.second;
    std::cout << "  tbs " << tbs.mean << " +- " << tbs.stderr_ << "  relay "
              << relay.mean << " +- " << relay.stderr_ << '\n';
  }
}

TrainingSink log_sink(Run& run, std::vector<vppo::TrainLogRow>* all,
                      std::vector<std::string>* labels) {
  return [&run, all, labels](const TrainingRecord& rec) {
    std::string name = "policy_seed" + std::to_string(rec.seed);
    if (rec.sweep_value) name += "_v" + std::to_string(rec.sweep_value);
    name += ".txt";
    vppo::save_policy(run.path(name), rec.result.policy);
    run.output(name);
    for (const auto& row : rec.result.curve) {
      all->push_back(row);
      labels->push_back(std::to_string(rec.seed) + "," +
                        std::to_string(rec.sweep_value));
    }
  };
}

void write_training_log(Run& run, const std::vector<vppo::TrainLogRow>& rows,
                        const std::vector<std::string>& labels,
                        const std::string& label_header) {
  std::ostringstream body;
  vppo::write_train_log(body, rows);
  std::istringstream in(body.str());
  std::ofstream f(run.path("training_log.csv"));
  std::string line;
  std::getline(in, line);
  f << label_header << ',' << line << '\n';
  for (std::size_t i = 0; std::getline(in, line); ++i)
    f << labels.at(i) << ',' << line << '\n';
  run.output("training_log.csv");
}

void write_sample_trace(Run& run, const ExperimentSpec& spec,
                        SchedulerKind kind) {
  const auto topo = scenario_topology(spec);
  const auto seed = spec.seeds.front();
  auto scheduler = make_baseline(kind, topo, seed);
  Env env(topo, {spec.scenario.horizon, spec.stack}, eval_env_seed(seed));
  std::vector<TraceRow> trace;
  run_episode(env, *scheduler, &trace);
  std::ofstream f(run.path("trace.csv"));
  write_trace_csv(f, trace);
  run.output("trace.csv");
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AoI scheduling for two-hop relay IoT networks"};
  app.require_subcommand(1);

  CommonOptions opt;
  auto* simulate = app.add_subcommand("simulate", "Evaluate baseline schedulers");
  auto* train = app.add_subcommand("train", "Train v-PPO and evaluate it");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one scheduler");
  auto* sweep = app.add_subcommand("sweep", "Sweep M, N, L, K or z");
  auto* transfer = app.add_subcommand("transfer", "Transfer-learning study");
  auto* space = app.add_subcommand("action-space", "Action-space sizes");

  for (auto* cmd : {simulate, train, evaluate, sweep, transfer})
    add_common(cmd, opt);
  for (auto* cmd : {simulate, evaluate, sweep})
    cmd->add_option("--scheduler", opt.scheduler,
                    "maf_mad | maf | rr | random | vppo, comma separated or all");
  evaluate->add_option("--checkpoint", opt.checkpoint,
                       "Trained policy to evaluate (vppo)");

  std::string var;
  std::vector<int> values;
  sweep->add_option("--var", var, "Sweep variable")
      ->required()
      ->check(CLI::IsMember({"M", "N", "L", "K", "z"}));
  sweep->add_option("--values", values, "Sweep values")->required();

  std::string transfer_mode = "adapt";
  std::string perturbation = "channel";
  double fraction = 0.1;
  std::string pretrained;
  transfer->add_option("--mode-transfer,--transfer-mode", transfer_mode,
                       "uninitialized | explore | adapt");
  transfer->add_option("--perturb", perturbation, "channel | periodicity")
      ->check(CLI::IsMember({"channel", "periodicity"}));
  transfer->add_option("--fraction", fraction, "Fraction of devices perturbed");
  transfer->add_option("--pretrained", pretrained,
                       "Pretrained policy (trained on the spot when absent)");

  std::string space_out = "out";
  std::vector<int> space_m{8, 12, 16};
  int space_n = 1;
  space->add_option("--out", space_out, "Output directory");
  space->add_option("--M", space_m, "Device counts");
  space->add_option("--N", space_n, "Relays")->check(CLI::PositiveNumber);

  // `transfer --mode adapt` is accepted as a spelling of --transfer-mode when
  // the value names a transfer mode rather than an environment mode.
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "transfer") {
    for (std::size_t i = 1; i + 1 < args.size(); ++i) {
      if (args[i] == "--mode" &&
          (args[i + 1] == "uninitialized" || args[i + 1] == "explore" ||
           args[i + 1] == "adapt"))
        args[i] = "--transfer-mode";
    }
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cmdline = command_line(argc, argv);
    if (*space) {
      std::vector<ActionSpaceQuery> queries;
      for (int m : space_m) queries.push_back({m, space_n, 0, 0});
      const auto rows = analyze_action_space(queries);
      fs::create_directories(space_out);
      std::ofstream f(fs::path(space_out) / "action_space.csv");
      write_action_space_csv(f, rows);
      write_action_space_csv(std::cout, rows);
      json manifest{{"command", cmdline}, {"outputs", {"action_space.csv"}}};
      std::ofstream(fs::path(space_out) / "manifest.json")
          << manifest.dump(2) << '\n';
      return 0;
    }

    auto spec = make_spec(opt);

    if (*simulate) {
      Run run(cmdline, opt, spec);
      const auto kinds = scheduler_list(opt.scheduler, true);
      std::vector<ResultRow> rows;
      for (auto k : kinds) {
        auto part = run_eval(spec, k);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      run.write_results(rows);
      write_sample_trace(run, spec, kinds.front());
      print_summary(rows);
    } else if (*train || *evaluate) {
      Run run(cmdline, opt, spec);
      const auto kind = *train ? SchedulerKind::vppo
                               : (opt.scheduler.empty()
                                      ? SchedulerKind::maf_mad
                                      : parse_scheduler(opt.scheduler));
      std::vector<vppo::TrainLogRow> log;
      std::vector<std::string> labels;
      const auto rows = run_eval(spec, kind, log_sink(run, &log, &labels));
      run.write_results(rows);
      if (!log.empty()) write_training_log(run, log, labels, "seed,sweep_value");
      if (kind != SchedulerKind::vppo) write_sample_trace(run, spec, kind);
      print_summary(rows);
    } else if (*sweep) {
      spec.sweep_var = var;
      spec.sweep_values = values;
      Run run(cmdline, opt, spec);
      run.manifest()["sweep"] = {{"var", var}, {"values", values}};
      std::vector<vppo::TrainLogRow> log;
      std::vector<std::string> labels;
      const auto rows = run_sweep(spec, scheduler_list(opt.scheduler, false),
                                  log_sink(run, &log, &labels));
      run.write_results(rows);
      if (!log.empty()) write_training_log(run, log, labels, "seed,sweep_value");
      print_summary(rows);
    } else if (*transfer) {
      const auto mode = vppo::parse_transfer_mode(transfer_mode);
      const auto kind = parse_perturbation(perturbation);
      Run run(cmdline, opt, spec);
      run.manifest()["transfer"] = {{"mode", transfer_mode},
                                    {"perturbation", perturbation},
                                    {"fraction", fraction}};
      const auto resolved = apply_mode(spec.scenario, spec.mode);
      const auto base = scenario_topology(spec);
      std::vector<vppo::TrainLogRow> log;
      std::vector<std::string> labels;
      std::vector<ResultRow> rows;
      std::vector<long> converged;
      for (auto seed : spec.seeds) {
        vppo::PolicyParams source;
        if (!pretrained.empty()) {
          source = vppo::load_policy(pretrained);
        } else {
          auto config = spec.train;
          config.seed = seed;
          Env env(base, {spec.scenario.horizon, spec.stack},
                  train_env_seed(seed));
          source = vppo::train(std::move(env), config).policy;
          const auto name = "pretrained_seed" + std::to_string(seed) + ".txt";
          vppo::save_policy(run.path(name), source);
          run.output(name);
        }
        const auto perturbed =
            perturb_topology(base, resolved.topology, kind, fraction, seed);
        const auto result = run_transfer(perturbed, spec, source, mode, seed);
        for (const auto& row : result.curve) {
          log.push_back(row);
          labels.push_back(std::to_string(seed) + "," + transfer_mode);
        }
        ResultRow r;
        r.scheduler = "vppo_" + transfer_mode;
        r.seed = seed;
        r.mean_tbs = r.min_tbs = r.max_tbs = result.final_aoi_tbs;
        r.episodes = spec.eval_episodes;
        rows.push_back(r);
        converged.push_back(result.converged_at);
        run.manifest()["converged_at"].push_back(
            {{"seed", seed}, {"iterations", result.converged_at}});
        std::cout << "seed " << seed << " final tbs " << result.final_aoi_tbs
                  << " converged at iteration " << result.converged_at << '\n';
      }
      write_training_log(run, log, labels, "seed,transfer_mode");
      std::ofstream f(run.path("transfer.csv"));
      f << "seed,mode,perturbation,final_aoi_tbs,converged_at\n";
      f << std::setprecision(10);
      for (std::size_t i = 0; i < rows.size(); ++i)
        f << rows[i].seed << ',' << transfer_mode << ',' << perturbation << ','
          << rows[i].mean_tbs << ',' << converged[i] << '\n';
      run.output("transfer.csv");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
