#ifndef AOI_BASELINES_HPP_
#define AOI_BASELINES_HPP_

#include <span>
#include <vector>

#include "aoi/network.hpp"

namespace aoi {

// Indices of the k candidates with the largest score; ties go to the lowest
// device index. The result is sorted ascending.
std::vector<int> top_k(std::span<const int> candidates,
                       std::span<const double> score, int k);

// Maximal AoI first for sampling, maximal (TBS - relay) age difference for
// updating.
Action maf_mad(const AoiSnapshot& snapshot, const Topology& topo);

// Maximal AoI first at both hops.
Action maf(const AoiSnapshot& snapshot, const Topology& topo);

struct RoundRobinState {
  std::vector<int> relay_cursor;  // position within each relay's group
  int tbs_cursor = 0;             // position over all devices

  static RoundRobinState initial(const Topology& topo);
};

struct RoundRobinDecision {
  Action action;
  RoundRobinState state;
};

RoundRobinDecision round_robin(const RoundRobinState& state,
                               const Topology& topo);

// Uniform subsets; sampling and updating may use separate engines so that
// the sampling pattern does not depend on K.
std::vector<std::vector<int>> random_sample_sets(const Topology& topo, Rng& rng);
std::vector<int> random_update_set(const Topology& topo, Rng& rng);
Action random_sched(const Topology& topo, Rng& rng);

}  // namespace aoi

#endif  // AOI_BASELINES_HPP_
