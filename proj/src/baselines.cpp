#include "aoi/baselines.hpp"

#include <algorithm>
#include <numeric>

namespace aoi {

namespace {

std::vector<int> all_devices(int M) {
  std::vector<int> devices(M);
  std::iota(devices.begin(), devices.end(), 0);
  return devices;
}

std::vector<std::vector<int>> sample_by_relay_age(const AoiSnapshot& snapshot,
                                                  const Topology& topo) {
  std::vector<double> score(snapshot.relay.begin(), snapshot.relay.end());
  std::vector<std::vector<int>> sets;
  sets.reserve(topo.num_relays);
  for (const auto& group : topo.groups)
    sets.push_back(top_k(group, score, topo.relay_channels));
  return sets;
}

}  // namespace

std::vector<int> top_k(std::span<const int> candidates,
                       std::span<const double> score, int k) {
  std::vector<int> order(candidates.begin(), candidates.end());
  const auto take = static_cast<std::size_t>(
      std::clamp(k, 0, static_cast<int>(order.size())));
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](int a, int b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return a < b;
                    });
  order.resize(take);
  std::sort(order.begin(), order.end());
  return order;
}

Action maf_mad(const AoiSnapshot& snapshot, const Topology& topo) {
  Action action;
  action.sample_sets = sample_by_relay_age(snapshot, topo);
  std::vector<double> diff(topo.num_devices);
  for (int m = 0; m < topo.num_devices; ++m)
    diff[m] = snapshot.tbs[m] - snapshot.relay[m];
  action.update_set = top_k(all_devices(topo.num_devices), diff, topo.tbs_channels);
  return action;
}

Action maf(const AoiSnapshot& snapshot, const Topology& topo) {
  Action action;
  action.sample_sets = sample_by_relay_age(snapshot, topo);
  std::vector<double> age(snapshot.tbs.begin(), snapshot.tbs.end());
  action.update_set = top_k(all_devices(topo.num_devices), age, topo.tbs_channels);
  return action;
}

RoundRobinState RoundRobinState::initial(const Topology& topo) {
  RoundRobinState s;
  s.relay_cursor.assign(topo.num_relays, 0);
  s.tbs_cursor = 0;
  return s;
}

RoundRobinDecision round_robin(const RoundRobinState& state,
                               const Topology& topo) {
  RoundRobinDecision out{{}, state};
  auto& next = out.state;
  out.action.sample_sets.resize(topo.num_relays);
  for (int n = 0; n < topo.num_relays; ++n) {
    const auto& group = topo.groups[n];
    const int size = static_cast<int>(group.size());
    if (size == 0) continue;
    const int grant = std::min(topo.relay_channels, size);
    auto& set = out.action.sample_sets[n];
    for (int i = 0; i < grant; ++i)
      set.push_back(group[(state.relay_cursor[n] + i) % size]);
    std::sort(set.begin(), set.end());
    next.relay_cursor[n] = (state.relay_cursor[n] + grant) % size;
  }
  const int M = topo.num_devices;
  const int grant = std::min(topo.tbs_channels, M);
  for (int i = 0; i < grant; ++i)
    out.action.update_set.push_back((state.tbs_cursor + i) % M);
  std::sort(out.action.update_set.begin(), out.action.update_set.end());
  next.tbs_cursor = (state.tbs_cursor + grant) % M;
  return out;
}

std::vector<std::vector<int>> random_sample_sets(const Topology& topo,
                                                 Rng& rng) {
  std::vector<std::vector<int>> sets(topo.num_relays);
  for (int n = 0; n < topo.num_relays; ++n) {
    const auto& group = topo.groups[n];
    const auto take = std::min<std::size_t>(topo.relay_channels, group.size());
    std::sample(group.begin(), group.end(), std::back_inserter(sets[n]), take,
                rng);
  }
  return sets;
}

std::vector<int> random_update_set(const Topology& topo, Rng& rng) {
  const auto devices = all_devices(topo.num_devices);
  std::vector<int> set;
  const auto take =
      std::min<std::size_t>(topo.tbs_channels, devices.size());
  std::sample(devices.begin(), devices.end(), std::back_inserter(set), take,
              rng);
  return set;
}

Action random_sched(const Topology& topo, Rng& rng) {
  Action action;
  action.sample_sets = random_sample_sets(topo, rng);
  action.update_set = random_update_set(topo, rng);
  return action;
}

}  // namespace aoi
