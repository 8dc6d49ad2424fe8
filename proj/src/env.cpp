#include "aoi/env.hpp"

#include <numeric>
#include <stdexcept>

namespace aoi {

Observation encode_observation(std::span<const AoiSnapshot> history, int stack,
                               int num_devices, int horizon) {
  if (history.empty())
    throw std::invalid_argument("encode_observation: empty history");
  const double scale = 1.0 / horizon;
  Observation x;
  x.reserve(observation_size(num_devices, stack));
  const int available = static_cast<int>(history.size());
  for (int back = 0; back < stack; ++back) {
    const int index = std::max(available - 1 - back, 0);
    const auto& snap = history[index];
    x.push_back(snap.slot * scale);
    for (int m = 0; m < num_devices; ++m) x.push_back(snap.relay[m] * scale);
    for (int m = 0; m < num_devices; ++m) x.push_back(snap.tbs[m] * scale);
  }
  return x;
}

Env::Env(Topology topo, EnvConfig config, std::uint64_t seed)
    : topo_(std::move(topo)), config_(config), rng_(make_rng(seed)) {
  topo_.validate();
  if (config_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (config_.stack < 1) throw std::invalid_argument("stack size must be >= 1");
  reset();
}

const Observation& Env::reset() {
  state_ = NetState::initial(topo_.num_devices);
  window_.clear();
  window_.push_back(state_.snapshot());
  trace_.clear();
  steps_ = 0;
  refresh_observation();
  return observation_;
}

EnvStep Env::step(const Action& action) {
  if (done()) throw SteppingFinishedEpisode("episode already finished");
  auto result = step_dynamics(state_, topo_, action, rng_);
  state_ = std::move(result.next);
  ++steps_;

  auto snap = state_.snapshot();
  const double total = std::accumulate(snap.tbs.begin(), snap.tbs.end(), 0.0);
  const double reward = -total / topo_.num_devices;

  trace_.push_back(snap);
  window_.push_back(std::move(snap));
  while (static_cast<int>(window_.size()) > config_.stack) window_.pop_front();
  refresh_observation();
  return {observation_, reward, done(), std::move(result.outcome)};
}

void Env::refresh_observation() {
  const std::vector<AoiSnapshot> history(window_.begin(), window_.end());
  observation_ = encode_observation(history, config_.stack, topo_.num_devices,
                                    config_.horizon);
}

}  // namespace aoi
