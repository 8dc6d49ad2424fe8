#ifndef AOI_VPPO_HPP_
#define AOI_VPPO_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "aoi/env.hpp"
#include "aoi/network.hpp"
#include "aoi/nn.hpp"

namespace aoi::vppo {

// -- vote decoding -- //

// votes[0..M) rank devices for sampling within each relay group, votes[M..2M)
// rank devices for the TBS update. Each relay takes its top min(L, m_n),
// the TBS its top min(K, M); ties go to the lowest device index.
Action decode_votes(std::span<const double> votes, const Topology& topo);

// -- policy parameters -- //

struct PolicyParams {
  nn::Mlp actor;        // observation -> 2M vote means
  nn::Vector log_std;   // state-independent, one per vote
  nn::Mlp critic;       // observation -> V(x)

  int observation_size() const { return actor.input_size(); }
  int num_votes() const { return actor.output_size(); }

  bool operator==(const PolicyParams&) const = default;
};

struct NetworkShape {
  int observation_size = 0;
  int num_votes = 0;
  std::vector<int> hidden{256, 256};
};

// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the actor output,
// 1 on the critic output. log-std starts at `log_std_init` (sigma = 1 at 0).
PolicyParams init_policy(const NetworkShape& shape, std::uint64_t seed,
                         double log_std_init = 0.0);

void save_policy(const std::filesystem::path& path, const PolicyParams& policy);
PolicyParams load_policy(const std::filesystem::path& path);
void write_policy(std::ostream& os, const PolicyParams& policy);
PolicyParams read_policy(std::istream& is);

enum class TransferMode { uninitialized, explore, adapt };

TransferMode parse_transfer_mode(std::string_view name);
std::string_view transfer_mode_name(TransferMode mode);

// uninitialized: fresh weights from `seed`; adapt: full copy; explore: copy
// everything except the actor output layer, which is re-initialized from
// `seed`. `log_std_init` applies to uninitialized only.
PolicyParams transfer_init(const PolicyParams& pretrained, TransferMode mode,
                           std::uint64_t seed, double log_std_init = 0.0);

// -- acting -- //

struct ActResult {
  Action action;
  std::vector<double> votes;
  double log_prob = 0.0;
};

// Stochastic mode draws votes ~ N(mu, sigma); deterministic mode uses mu.
ActResult act(const PolicyParams& policy, const Observation& observation,
              const Topology& topo, Rng& rng, bool deterministic);

// -- experience and advantages -- //

struct Experience {
  Observation observation;
  std::vector<double> votes;
  Action action;
  double reward = 0.0;
  Observation next_observation;
  bool done = false;
  double old_log_prob = 0.0;
  double value = 0.0;       // V(x_t) at collection time
  double next_value = 0.0;  // V(x_{t+1}), zero when done
  double advantage = 0.0;
  double ret = 0.0;         // Monte-Carlo return G_t
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// A_t = r_t + gamma V(x_{t+1}) - V(x_t), with V(x_{t+1}) = 0 on terminal
// steps; G_t accumulates discounted rewards to the end of each episode.
Advantages compute_advantages(std::span<const double> rewards,
                              std::span<const double> values,
                              std::span<const double> next_values,
                              std::span<const std::uint8_t> dones,
                              double gamma);

// Evaluates the critic over the buffer and fills value, next_value,
// advantage and ret.
void compute_advantages(std::vector<Experience>& buffer, const nn::Mlp& critic,
                        double gamma);

// -- loss -- //

struct TrainConfig {
  double gamma = 0.99;
  double clip = 0.2;
  double learning_rate = 2.5e-4;
  int epochs = 10;
  int minibatch_size = 512;
  int buffer_size = 2048;
  double value_coef = 0.5;     // c1
  double entropy_coef = 0.01;  // c2
  long total_episodes = 20000;
  // 0 derives buffer_size / T
  int episodes_per_iteration = 0;
  bool normalize_advantages = true;
  double log_std_init = 0.0;
  std::vector<int> hidden{256, 256};
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // iterations; 0 disables

  int episodes_per_iter(int horizon) const;
  long iterations(int horizon) const;
  void validate(int horizon) const;
};

struct LossResult {
  double total = 0.0;
  double actor_loss = 0.0;   // -mean clipped surrogate
  double critic_loss = 0.0;  // mean (G - V)^2, before c1
  double entropy = 0.0;
  double clip_fraction = 0.0;
  nn::Vector grad_actor;
  nn::Vector grad_log_std;
  nn::Vector grad_critic;
};

// Clipped surrogate objective with value and entropy terms:
//   L = -mean min(zeta A, clip(zeta, 1-eps, 1+eps) A)
//       + c1 mean (G - V)^2 - c2 H
// Advantages are used as stored in each experience.
LossResult ppo_loss(std::span<const Experience* const> batch,
                    const PolicyParams& policy, const TrainConfig& config);

// min(zeta A, clip(zeta) A) for one sample.
double clipped_surrogate(double ratio, double advantage, double clip);

// -- training -- //

struct TrainLogRow {
  long iteration = 0;
  long episodes_seen = 0;
  double mean_reward = 0.0;  // mean undiscounted episode return
  double mean_aoi_tbs = 0.0;
  double mean_aoi_relay = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
};

inline constexpr std::string_view kTrainLogHeader =
    "iteration,episodes_seen,mean_reward,mean_aoi_tbs,mean_aoi_relay,"
    "actor_loss,critic_loss,entropy";

void write_train_log(std::ostream& os, std::span<const TrainLogRow> rows);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long iteration, const std::string& what);
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Runs collection / optimization iterations over one environment.
class Trainer {
 public:
  Trainer(Env env, TrainConfig config, PolicyParams initial);

  // Collects episodes_per_iteration episodes under the current parameters
  // (theta_old), then runs `epochs` shuffled passes of minibatch updates.
  TrainLogRow run_iteration();

  // Collection phase only; exposed for inspection.
  void collect();
  const std::vector<Experience>& buffer() const { return buffer_; }

  const PolicyParams& policy() const { return policy_; }
  PolicyParams& policy() { return policy_; }
  const TrainConfig& config() const { return config_; }
  Env& env() { return env_; }
  long iteration() const { return iteration_; }
  long episodes_seen() const { return episodes_seen_; }

 private:
  void optimize(TrainLogRow& row);

  Env env_;
  TrainConfig config_;
  PolicyParams policy_;
  nn::Adam actor_opt_;
  nn::Adam log_std_opt_;
  nn::Adam critic_opt_;
  Rng rng_;
  std::vector<Experience> buffer_;
  long iteration_ = 0;
  long episodes_seen_ = 0;
  double collected_return_ = 0.0;
  double collected_tbs_ = 0.0;
  double collected_relay_ = 0.0;
  int collected_episodes_ = 0;
};

using CheckpointSink =
    std::function<void(long iteration, const PolicyParams& policy)>;
using IterationObserver =
    std::function<void(const TrainLogRow& row, const PolicyParams& policy)>;

struct TrainResult {
  PolicyParams policy;
  std::vector<TrainLogRow> curve;
};

TrainResult train(Env env, const TrainConfig& config, PolicyParams initial,
                  const CheckpointSink& checkpoint = {},
                  const IterationObserver& observer = {});

// Fresh policy sized for the environment, then train.
TrainResult train(Env env, const TrainConfig& config,
                  const CheckpointSink& checkpoint = {},
                  const IterationObserver& observer = {});

}  // namespace aoi::vppo

#endif  // AOI_VPPO_HPP_
