#ifndef AOI_HARNESS_HPP_
#define AOI_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoi/baselines.hpp"
#include "aoi/env.hpp"
#include "aoi/scenario.hpp"
#include "aoi/vppo.hpp"

namespace aoi::harness {

// ideal: lossless links and generate-at-will traffic.
// practical: lossy links and (unknown) periodic traffic.
enum class EnvMode { as_configured, ideal, practical };

EnvMode parse_env_mode(std::string_view name);
std::string_view env_mode_name(EnvMode mode);
ScenarioConfig apply_mode(ScenarioConfig scenario, EnvMode mode);

enum class SchedulerKind { maf_mad, maf, rr, random, vppo };

SchedulerKind parse_scheduler(std::string_view name);
std::string_view scheduler_name(SchedulerKind kind);
inline constexpr SchedulerKind kBaselines[] = {
    SchedulerKind::maf_mad, SchedulerKind::maf, SchedulerKind::rr,
    SchedulerKind::random};

// A scheduler sees the environment's public observation surface only:
// baselines read the current AoI snapshot, the learned scheduler the stacked
// observation. Neither sees loss probabilities or periodicities.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string_view name() const = 0;
  virtual void begin_episode() {}
  virtual Action decide(const Env& env) = 0;
};

std::unique_ptr<Scheduler> make_baseline(SchedulerKind kind,
                                         const Topology& topo,
                                         std::uint64_t seed);

std::unique_ptr<Scheduler> make_vppo_scheduler(vppo::PolicyParams policy,
                                               bool deterministic,
                                               std::uint64_t seed);

struct EpisodeStats {
  AverageAoi average;
  double total_reward = 0.0;
};

// Runs one episode from reset(). Appends trace rows when `trace` is given.
EpisodeStats run_episode(Env& env, Scheduler& scheduler,
                         std::vector<TraceRow>* trace = nullptr);

// -- experiments -- //

struct ExperimentSpec {
  ScenarioConfig scenario;
  EnvMode mode = EnvMode::as_configured;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int eval_episodes = 200;
  int stack = 4;
  vppo::TrainConfig train;
  // Evaluate this checkpoint instead of training one per seed.
  std::optional<std::filesystem::path> checkpoint;
  std::string sweep_var;  // one of M, N, L, K, z (empty for no sweep)
  std::vector<int> sweep_values;
};

struct ResultRow {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::string sweep_var;
  int sweep_value = 0;
  double mean_relay = 0.0;
  double min_relay = 0.0;
  double max_relay = 0.0;
  double mean_tbs = 0.0;
  double min_tbs = 0.0;
  double max_tbs = 0.0;
  int episodes = 0;
  double wall_time = 0.0;  // seconds; kept out of results.csv
};

inline constexpr std::string_view kResultHeader =
    "scheduler,seed,sweep_var,sweep_value,mean_aoi_relay,min_aoi_relay,"
    "max_aoi_relay,mean_aoi_tbs,min_aoi_tbs,max_aoi_tbs,episodes";

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);

// Seeds derived for each role of a run; the evaluation stream is shared by
// all schedulers so that they face the same loss realizations.
std::uint64_t eval_env_seed(std::uint64_t seed);
std::uint64_t train_env_seed(std::uint64_t seed);

Topology scenario_topology(const ExperimentSpec& spec);

// Called after each vppo training run (e.g. to persist checkpoints/logs).
struct TrainingRecord {
  std::uint64_t seed = 0;
  int sweep_value = 0;
  vppo::TrainResult result;
};
using TrainingSink = std::function<void(const TrainingRecord&)>;

ResultRow evaluate_scheduler(const Topology& topo, const ExperimentSpec& spec,
                             Scheduler& scheduler, std::uint64_t seed);

// One row per seed.
std::vector<ResultRow> run_eval(const ExperimentSpec& spec, SchedulerKind kind,
                                const TrainingSink& sink = {});

// Applies one sweep value to a copy of the experiment.
ExperimentSpec with_sweep_value(const ExperimentSpec& spec, int value);

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec,
                                 const std::vector<SchedulerKind>& kinds,
                                 const TrainingSink& sink = {});

struct Summary {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

// Mean and standard error across rows of the per-seed mean TBS (or relay)
// AoI.
Summary summarize_tbs(const std::vector<ResultRow>& rows);
Summary summarize_relay(const std::vector<ResultRow>& rows);

// -- transfer -- //

enum class Perturbation { channel, periodicity };

Perturbation parse_perturbation(std::string_view name);
std::string_view perturbation_name(Perturbation p);

// ceil(fraction * M) devices chosen by a seeded draw get re-sampled losses
// (channel) or a different periodicity from the set (periodicity).
Topology perturb_topology(const Topology& topo, const TopologyConfig& config,
                          Perturbation kind, double fraction,
                          std::uint64_t seed);

struct TransferResult {
  vppo::TransferMode mode = vppo::TransferMode::adapt;
  std::vector<vppo::TrainLogRow> curve;
  double final_aoi_tbs = 0.0;  // deterministic evaluation after training
  long converged_at = 0;       // first iteration within tolerance of final
};

// First 1-based index whose value is within `tolerance` (relative) of the
// curve's final level, taken as the mean of its last `tail` entries.
long iterations_to_converge(const std::vector<double>& curve, double tolerance,
                            int tail);

TransferResult run_transfer(const Topology& perturbed, const ExperimentSpec& spec,
                            const vppo::PolicyParams& pretrained,
                            vppo::TransferMode mode, std::uint64_t seed);

// -- stack-size study -- //

struct StackCurve {
  int stack = 0;
  int observation_size = 0;
  std::vector<vppo::TrainLogRow> curve;
};

std::vector<StackCurve> run_stack_study(const ExperimentSpec& spec,
                                        const std::vector<int>& stacks,
                                        std::uint64_t seed);

// -- action space -- //

struct ActionSpaceRow {
  int M = 0;
  int N = 0;
  int L = 0;
  int K = 0;
  std::string combinatorial;  // exact decimal
  long long linear = 0;
};

struct ActionSpaceQuery {
  int M = 0;
  int N = 1;
  int L = 0;  // 0 means m_n / 2 (largest group)
  int K = 0;  // 0 means M / 2
};

std::vector<ActionSpaceRow> analyze_action_space(
    const std::vector<ActionSpaceQuery>& queries);

// M = 8, 12, 16 with L = m_n / 2 and K = M / 2 over `relays` relays.
std::vector<ActionSpaceQuery> scalability_queries(int relays = 1);

void write_action_space_csv(std::ostream& os,
                            const std::vector<ActionSpaceRow>& rows);

}  // namespace aoi::harness

#endif  // AOI_HARNESS_HPP_
