#ifndef AOI_ENV_HPP_
#define AOI_ENV_HPP_

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "aoi/network.hpp"

namespace aoi {

// Flat feature vector of length z * (2M + 1). For each of the z most recent
// slots, newest first: slot / T, then aoi_relay[0..M) / T, then
// aoi_tbs[0..M) / T.
using Observation = std::vector<double>;

inline int observation_size(int num_devices, int stack) {
  return stack * (2 * num_devices + 1);
}

// `history` is ordered oldest to newest. Missing history (fewer than z
// snapshots) is padded with the oldest available snapshot.
Observation encode_observation(std::span<const AoiSnapshot> history, int stack,
                               int num_devices, int horizon);

struct EnvConfig {
  int horizon = 20;  // T decisions per episode
  int stack = 4;     // z
};

struct EnvStep {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepOutcome outcome;
};

class SteppingFinishedEpisode : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Finite-horizon MDP over the relay network. One handle per rollout worker.
class Env {
 public:
  Env(Topology topo, EnvConfig config, std::uint64_t seed);

  const Observation& reset();
  EnvStep step(const Action& action);

  const Topology& topology() const { return topo_; }
  const EnvConfig& config() const { return config_; }
  const NetState& state() const { return state_; }
  AoiSnapshot snapshot() const { return state_.snapshot(); }
  const Observation& observation() const { return observation_; }
  bool done() const { return steps_ >= config_.horizon; }
  int steps_taken() const { return steps_; }

  // Post-decision snapshots (slots 2..T+1) of the current episode.
  const std::vector<AoiSnapshot>& trace() const { return trace_; }
  AverageAoi episode_average() const { return average_aoi(trace_); }

  Rng& rng() { return rng_; }

 private:
  void refresh_observation();

  Topology topo_;
  EnvConfig config_;
  Rng rng_;
  NetState state_;
  std::deque<AoiSnapshot> window_;
  Observation observation_;
  std::vector<AoiSnapshot> trace_;
  int steps_ = 0;
};

}  // namespace aoi

#endif  // AOI_ENV_HPP_
