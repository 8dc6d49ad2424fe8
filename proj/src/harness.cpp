#include "aoi/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace aoi::harness {

namespace {

constexpr std::uint64_t kRandomSampleStream = 201;
constexpr std::uint64_t kRandomUpdateStream = 202;
constexpr std::uint64_t kPerturbStream = 203;
constexpr std::uint64_t kActStream = 204;

class MafMadScheduler final : public Scheduler {
 public:
  explicit MafMadScheduler(const Topology& topo) : topo_(topo) {}
  std::string_view name() const override { return "maf_mad"; }
  Action decide(const Env& env) override { return maf_mad(env.snapshot(), topo_); }

 private:
  const Topology& topo_;
};

class MafScheduler final : public Scheduler {
 public:
  explicit MafScheduler(const Topology& topo) : topo_(topo) {}
  std::string_view name() const override { return "maf"; }
  Action decide(const Env& env) override { return maf(env.snapshot(), topo_); }

 private:
  const Topology& topo_;
};

class RoundRobinScheduler final : public Scheduler {
 public:
  explicit RoundRobinScheduler(const Topology& topo)
      : topo_(topo), state_(RoundRobinState::initial(topo)) {}
  std::string_view name() const override { return "rr"; }
  void begin_episode() override { state_ = RoundRobinState::initial(topo_); }
  Action decide(const Env&) override {
    auto decision = round_robin(state_, topo_);
    state_ = std::move(decision.state);
    return std::move(decision.action);
  }

 private:
  const Topology& topo_;
  RoundRobinState state_;
};

// Separate engines keep the sampling pattern independent of K.
class RandomScheduler final : public Scheduler {
 public:
  RandomScheduler(const Topology& topo, std::uint64_t seed)
      : topo_(topo),
        sample_rng_(make_rng(seed, kRandomSampleStream)),
        update_rng_(make_rng(seed, kRandomUpdateStream)) {}
  std::string_view name() const override { return "random"; }
  Action decide(const Env&) override {
    Action a;
    a.sample_sets = random_sample_sets(topo_, sample_rng_);
    a.update_set = random_update_set(topo_, update_rng_);
    return a;
  }

 private:
  const Topology& topo_;
  Rng sample_rng_;
  Rng update_rng_;
};

class VppoScheduler final : public Scheduler {
 public:
  VppoScheduler(vppo::PolicyParams policy, bool deterministic,
                std::uint64_t seed)
      : policy_(std::move(policy)),
        deterministic_(deterministic),
        rng_(make_rng(seed, kActStream)) {}
  std::string_view name() const override { return "vppo"; }
  Action decide(const Env& env) override {
    return vppo::act(policy_, env.observation(), env.topology(), rng_,
                     deterministic_)
        .action;
  }

 private:
  vppo::PolicyParams policy_;
  bool deterministic_;
  Rng rng_;
};

Summary summarize(const std::vector<ResultRow>& rows, bool tbs) {
  Summary s;
  s.count = static_cast<int>(rows.size());
  if (rows.empty()) return s;
  for (const auto& r : rows) s.mean += tbs ? r.mean_tbs : r.mean_relay;
  s.mean /= s.count;
  if (s.count > 1) {
    double var = 0.0;
    for (const auto& r : rows) {
      const double d = (tbs ? r.mean_tbs : r.mean_relay) - s.mean;
      var += d * d;
    }
    var /= s.count - 1;
    s.stderr_ = std::sqrt(var / s.count);
  }
  return s;
}

vppo::PolicyParams obtain_policy(const Topology& topo, const ExperimentSpec& spec,
                                 std::uint64_t seed, int sweep_value,
                                 const TrainingSink& sink) {
  if (spec.checkpoint) {
    auto policy = vppo::load_policy(*spec.checkpoint);
    if (policy.num_votes() != 2 * topo.num_devices ||
        policy.observation_size() !=
            observation_size(topo.num_devices, spec.stack))
      throw std::invalid_argument("checkpoint does not match the scenario");
    return policy;
  }
  auto config = spec.train;
  config.seed = seed;
  Env env(topo, {spec.scenario.horizon, spec.stack}, train_env_seed(seed));
  auto result = vppo::train(std::move(env), config);
  if (sink) sink({seed, sweep_value, result});
  return std::move(result.policy);
}

}  // namespace

EnvMode parse_env_mode(std::string_view name) {
  if (name == "ideal") return EnvMode::ideal;
  if (name == "practical") return EnvMode::practical;
  if (name == "config" || name == "as_configured") return EnvMode::as_configured;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::string_view env_mode_name(EnvMode mode) {
  switch (mode) {
    case EnvMode::ideal:
      return "ideal";
    case EnvMode::practical:
      return "practical";
    case EnvMode::as_configured:
      return "config";
  }
  return "?";
}

ScenarioConfig apply_mode(ScenarioConfig scenario, EnvMode mode) {
  auto& t = scenario.topology;
  switch (mode) {
    case EnvMode::as_configured:
      break;
    case EnvMode::ideal:
      t.loss_sample_range = {0.0, 0.0};
      t.loss_update_range = {0.0, 0.0};
      t.loss_sample.reset();
      t.loss_update.reset();
      t.traffic = TrafficKind::generate_at_will;
      break;
    case EnvMode::practical: {
      const TopologyConfig defaults;
      if (t.loss_sample_range.hi <= 0.0 && !t.loss_sample)
        t.loss_sample_range = defaults.loss_sample_range;
      if (t.loss_update_range.hi <= 0.0 && !t.loss_update)
        t.loss_update_range = defaults.loss_update_range;
      t.traffic = TrafficKind::periodic;
      break;
    }
  }
  return scenario;
}

SchedulerKind parse_scheduler(std::string_view name) {
  if (name == "maf_mad") return SchedulerKind::maf_mad;
  if (name == "maf") return SchedulerKind::maf;
  if (name == "rr") return SchedulerKind::rr;
  if (name == "random") return SchedulerKind::random;
  if (name == "vppo") return SchedulerKind::vppo;
  throw std::invalid_argument("unknown scheduler '" + std::string(name) + "'");
}

std::string_view scheduler_name(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::maf_mad:
      return "maf_mad";
    case SchedulerKind::maf:
      return "maf";
    case SchedulerKind::rr:
      return "rr";
    case SchedulerKind::random:
      return "random";
    case SchedulerKind::vppo:
      return "vppo";
  }
  return "?";
}

std::unique_ptr<Scheduler> make_baseline(SchedulerKind kind,
                                         const Topology& topo,
                                         std::uint64_t seed) {
  switch (kind) {
    case SchedulerKind::maf_mad:
      return std::make_unique<MafMadScheduler>(topo);
    case SchedulerKind::maf:
      return std::make_unique<MafScheduler>(topo);
    case SchedulerKind::rr:
      return std::make_unique<RoundRobinScheduler>(topo);
    case SchedulerKind::random:
      return std::make_unique<RandomScheduler>(topo, seed);
    case SchedulerKind::vppo:
      break;
  }
  throw std::invalid_argument("vppo is not a baseline scheduler");
}

std::unique_ptr<Scheduler> make_vppo_scheduler(vppo::PolicyParams policy,
                                               bool deterministic,
                                               std::uint64_t seed) {
  return std::make_unique<VppoScheduler>(std::move(policy), deterministic, seed);
}

EpisodeStats run_episode(Env& env, Scheduler& scheduler,
                         std::vector<TraceRow>* trace) {
  env.reset();
  scheduler.begin_episode();
  EpisodeStats stats;
  while (!env.done()) {
    const auto step = env.step(scheduler.decide(env));
    stats.total_reward += step.reward;
    if (trace) append_trace(*trace, env.trace().back(), step.outcome);
  }
  stats.average = env.episode_average();
  return stats;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kResultHeader << '\n';
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.scheduler << ',' << r.seed << ',' << r.sweep_var << ','
       << r.sweep_value << ',' << r.mean_relay << ',' << r.min_relay << ','
       << r.max_relay << ',' << r.mean_tbs << ',' << r.min_tbs << ','
       << r.max_tbs << ',' << r.episodes << '\n';
  }
}

std::uint64_t eval_env_seed(std::uint64_t seed) {
  return seed * 0x9E3779B97F4A7C15ULL + 0x1234567ULL;
}

std::uint64_t train_env_seed(std::uint64_t seed) {
  return seed * 0xBF58476D1CE4E5B9ULL + 0x89ABCDEFULL;
}

Topology scenario_topology(const ExperimentSpec& spec) {
  const auto scenario = apply_mode(spec.scenario, spec.mode);
  return build_topology(scenario.topology, scenario.seed);
}

ResultRow evaluate_scheduler(const Topology& topo, const ExperimentSpec& spec,
                             Scheduler& scheduler, std::uint64_t seed) {
  if (spec.eval_episodes < 1)
    throw std::invalid_argument("evaluation needs at least one episode");
  Env env(topo, {spec.scenario.horizon, spec.stack}, eval_env_seed(seed));
  ResultRow row;
  row.scheduler = std::string(scheduler.name());
  row.seed = seed;
  row.episodes = spec.eval_episodes;
  row.min_relay = row.min_tbs = INFINITY;
  row.max_relay = row.max_tbs = -INFINITY;
  for (int e = 0; e < spec.eval_episodes; ++e) {
    const auto stats = run_episode(env, scheduler);
    row.mean_relay += stats.average.relay;
    row.mean_tbs += stats.average.tbs;
    row.min_relay = std::min(row.min_relay, stats.average.relay);
    row.max_relay = std::max(row.max_relay, stats.average.relay);
    row.min_tbs = std::min(row.min_tbs, stats.average.tbs);
    row.max_tbs = std::max(row.max_tbs, stats.average.tbs);
  }
  row.mean_relay = std::clamp(row.mean_relay / spec.eval_episodes,
                              row.min_relay, row.max_relay);
  row.mean_tbs =
      std::clamp(row.mean_tbs / spec.eval_episodes, row.min_tbs, row.max_tbs);
  return row;
}

std::vector<ResultRow> run_eval(const ExperimentSpec& spec, SchedulerKind kind,
                                const TrainingSink& sink) {
  const auto topo = scenario_topology(spec);
  std::vector<ResultRow> rows;
  for (auto seed : spec.seeds) {
    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<Scheduler> scheduler;
    if (kind == SchedulerKind::vppo) {
      const int value = spec.sweep_values.empty() ? 0 : spec.sweep_values.front();
      scheduler = make_vppo_scheduler(obtain_policy(topo, spec, seed, value, sink),
                                      true, seed);
    } else {
      scheduler = make_baseline(kind, topo, seed);
    }
    auto row = evaluate_scheduler(topo, spec, *scheduler, seed);
    if (!spec.sweep_var.empty() && !spec.sweep_values.empty()) {
      row.sweep_var = spec.sweep_var;
      row.sweep_value = spec.sweep_values.front();
    }
    row.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentSpec with_sweep_value(const ExperimentSpec& spec, int value) {
  ExperimentSpec out = spec;
  out.sweep_values = {value};
  auto& t = out.scenario.topology;
  const auto& var = spec.sweep_var;
  if (var == "M") {
    t.num_devices = value;
    t.group_sizes.clear();
    if ((t.loss_sample && static_cast<int>(t.loss_sample->size()) != value) ||
        (t.loss_update && static_cast<int>(t.loss_update->size()) != value) ||
        (t.periodicity && static_cast<int>(t.periodicity->size()) != value))
      throw std::invalid_argument(
          "M sweep is incompatible with explicit per-device vectors");
  } else if (var == "N") {
    t.num_relays = value;
    t.group_sizes.clear();
  } else if (var == "L") {
    t.relay_channels = value;
  } else if (var == "K") {
    t.tbs_channels = value;
  } else if (var == "z") {
    out.stack = value;
  } else {
    throw std::invalid_argument("sweep variable must be one of M, N, L, K, z");
  }
  if (t.num_relays > t.num_devices)
    throw std::invalid_argument("infeasible sweep point: N exceeds M");
  if (value < 1)
    throw std::invalid_argument("sweep values must be at least 1");
  return out;
}

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec,
                                 const std::vector<SchedulerKind>& kinds,
                                 const TrainingSink& sink) {
  if (spec.sweep_var.empty() || spec.sweep_values.empty())
    throw std::invalid_argument("run_sweep needs a sweep variable and values");
  std::vector<ResultRow> rows;
  for (int value : spec.sweep_values) {
    const auto point = with_sweep_value(spec, value);
    for (auto kind : kinds) {
      auto part = run_eval(point, kind, sink);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  return rows;
}

Summary summarize_tbs(const std::vector<ResultRow>& rows) {
  return summarize(rows, true);
}

Summary summarize_relay(const std::vector<ResultRow>& rows) {
  return summarize(rows, false);
}

Perturbation parse_perturbation(std::string_view name) {
  if (name == "channel") return Perturbation::channel;
  if (name == "periodicity") return Perturbation::periodicity;
  throw std::invalid_argument("unknown perturbation '" + std::string(name) + "'");
}

std::string_view perturbation_name(Perturbation p) {
  return p == Perturbation::channel ? "channel" : "periodicity";
}

Topology perturb_topology(const Topology& topo, const TopologyConfig& config,
                          Perturbation kind, double fraction,
                          std::uint64_t seed) {
  const int M = topo.num_devices;
  const int count = std::clamp(
      static_cast<int>(std::ceil(fraction * M - 1e-9)), 0, M);
  auto rng = make_rng(seed, kPerturbStream);
  std::vector<int> devices(M);
  for (int m = 0; m < M; ++m) devices[m] = m;
  std::vector<int> chosen;
  std::sample(devices.begin(), devices.end(), std::back_inserter(chosen), count,
              rng);

  Topology out = topo;
  for (int d : chosen) {
    if (kind == Perturbation::channel) {
      std::uniform_real_distribution<double> ls(config.loss_sample_range.lo,
                                                config.loss_sample_range.hi);
      std::uniform_real_distribution<double> lu(config.loss_update_range.lo,
                                                config.loss_update_range.hi);
      out.loss_sample[d] = ls(rng);
      out.loss_update[d] = lu(rng);
    } else {
      const auto* current = std::get_if<Periodic>(&topo.traffic[d]);
      std::vector<int> options;
      for (int p : config.periodicity_set)
        if (!current || p != current->period) options.push_back(p);
      if (options.empty())
        throw std::invalid_argument(
            "periodicity perturbation needs at least two periodicities");
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      out.traffic[d] = Periodic{options[pick(rng)]};
    }
  }
  out.validate();
  return out;
}

long iterations_to_converge(const std::vector<double>& curve, double tolerance,
                            int tail) {
  if (curve.empty()) return 0;
  const auto n = static_cast<int>(curve.size());
  const int k = std::clamp(tail, 1, n);
  double final_level = 0.0;
  for (int i = n - k; i < n; ++i) final_level += curve[i];
  final_level /= k;
  for (int i = 0; i < n; ++i)
    if (std::abs(curve[i] - final_level) <= tolerance * std::abs(final_level))
      return i + 1;
  return n;
}

TransferResult run_transfer(const Topology& perturbed, const ExperimentSpec& spec,
                            const vppo::PolicyParams& pretrained,
                            vppo::TransferMode mode, std::uint64_t seed) {
  if (pretrained.num_votes() != 2 * perturbed.num_devices)
    throw std::invalid_argument("pretrained policy does not match topology");
  auto config = spec.train;
  config.seed = seed;
  auto initial =
      vppo::transfer_init(pretrained, mode, seed, config.log_std_init);
  Env env(perturbed, {spec.scenario.horizon, spec.stack}, train_env_seed(seed));
  auto result = vppo::train(std::move(env), config, std::move(initial));

  TransferResult out;
  out.mode = mode;
  out.curve = std::move(result.curve);
  std::vector<double> levels;
  for (const auto& row : out.curve) levels.push_back(row.mean_aoi_tbs);
  out.converged_at = iterations_to_converge(levels, 0.05, 5);
  auto scheduler = make_vppo_scheduler(std::move(result.policy), true, seed);
  out.final_aoi_tbs = evaluate_scheduler(perturbed, spec, *scheduler, seed).mean_tbs;
  return out;
}

std::vector<StackCurve> run_stack_study(const ExperimentSpec& spec,
                                        const std::vector<int>& stacks,
                                        std::uint64_t seed) {
  const auto topo = scenario_topology(spec);
  std::vector<StackCurve> curves;
  for (int z : stacks) {
    if (z < 1) throw std::invalid_argument("stack sizes must be >= 1");
    auto config = spec.train;
    config.seed = seed;
    Env env(topo, {spec.scenario.horizon, z}, train_env_seed(seed));
    StackCurve c;
    c.stack = z;
    c.observation_size = static_cast<int>(env.observation().size());
    c.curve = vppo::train(std::move(env), config).curve;
    curves.push_back(std::move(c));
  }
  return curves;
}

std::vector<ActionSpaceRow> analyze_action_space(
    const std::vector<ActionSpaceQuery>& queries) {
  std::vector<ActionSpaceRow> rows;
  for (const auto& q : queries) {
    TopologyConfig config;
    config.num_devices = q.M;
    config.num_relays = q.N;
    if (q.M < 1 || q.N < 1 || q.N > q.M)
      throw std::invalid_argument("action-space query needs 1 <= N <= M");
    const int largest_group = (q.M + q.N - 1) / q.N;
    config.relay_channels = q.L > 0 ? q.L : std::max(1, largest_group / 2);
    config.tbs_channels = q.K > 0 ? q.K : std::max(1, q.M / 2);
    config.loss_sample_range = config.loss_update_range = {0.0, 0.0};
    config.traffic = TrafficKind::generate_at_will;
    const auto topo = build_topology(config, 0);
    const auto size = action_space_cardinality(topo);
    rows.push_back({q.M, q.N, config.relay_channels, config.tbs_channels,
                    size.combinatorial.str(), size.linear});
  }
  return rows;
}

std::vector<ActionSpaceQuery> scalability_queries(int relays) {
  return {{8, relays, 0, 0}, {12, relays, 0, 0}, {16, relays, 0, 0}};
}

void write_action_space_csv(std::ostream& os,
                            const std::vector<ActionSpaceRow>& rows) {
  os << "M,N,L,K,combinatorial,linear\n";
  for (const auto& r : rows)
    os << r.M << ',' << r.N << ',' << r.L << ',' << r.K << ','
       << r.combinatorial << ',' << r.linear << '\n';
}

}  // namespace aoi::harness
