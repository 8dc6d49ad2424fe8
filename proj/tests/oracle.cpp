#include "oracle.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace oracle {

namespace {

struct AoiState {
  std::vector<int> relay;
  std::vector<int> tbs;
};

// Newest generation slot available when sampling at slot t.
int fresh_generation(int period, int t) {
  if (period == 0) return t;
  return t < period ? 0 : (t / period) * period;
}

// k indices with largest score, lowest index on ties, by repeated scan.
std::vector<int> pick(const std::vector<int>& score, int k) {
  const int n = static_cast<int>(score.size());
  std::vector<bool> taken(n, false);
  std::vector<int> out;
  for (int round = 0; round < std::min(k, n); ++round) {
    int best = -1;
    for (int i = 0; i < n; ++i)
      if (!taken[i] && (best < 0 || score[i] > score[best])) best = i;
    taken[best] = true;
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double mean(const std::vector<int>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double expect(const TinyNet& net, const AoiState& s, int t, int horizon) {
  if (t > horizon) return 0.0;
  const int M = net.M();
  std::vector<int> diff(M);
  for (int m = 0; m < M; ++m) diff[m] = s.tbs[m] - s.relay[m];
  const auto sample = pick(s.relay, net.L);
  const auto update = pick(diff, net.K);

  // one bit per transmission: sampling attempts first, then updates
  const int ns = static_cast<int>(sample.size());
  const int nu = static_cast<int>(update.size());
  double total = 0.0;
  for (int mask = 0; mask < (1 << (ns + nu)); ++mask) {
    double prob = 1.0;
    AoiState next{s.relay, s.tbs};
    for (int m = 0; m < M; ++m) {
      next.relay[m] += 1;
      next.tbs[m] += 1;
    }
    for (int i = 0; i < nu; ++i) {
      const int m = update[i];
      const bool ok = mask & (1 << (ns + i));
      prob *= ok ? 1.0 - net.loss_update[m] : net.loss_update[m];
      if (ok) next.tbs[m] = std::min(next.tbs[m], s.relay[m] + 1);
    }
    for (int i = 0; i < ns; ++i) {
      const int m = sample[i];
      const bool ok = mask & (1 << i);
      prob *= ok ? 1.0 - net.loss_sample[m] : net.loss_sample[m];
      if (ok)
        next.relay[m] =
            std::min(next.relay[m], t + 1 - fresh_generation(net.period[m], t));
    }
    if (prob == 0.0) continue;
    total += prob * (mean(next.tbs) + expect(net, next, t + 1, horizon));
  }
  return total;
}

}  // namespace

aoi::Topology to_topology(const TinyNet& net) {
  const int M = net.M();
  aoi::Topology topo;
  topo.num_devices = M;
  topo.num_relays = 1;
  topo.relay_channels = net.L;
  topo.tbs_channels = net.K;
  topo.relay_of.assign(M, 0);
  topo.groups = {std::vector<int>(M)};
  std::iota(topo.groups[0].begin(), topo.groups[0].end(), 0);
  topo.loss_sample = net.loss_sample;
  topo.loss_update = net.loss_update;
  for (int m = 0; m < M; ++m) {
    if (net.period[m] == 0)
      topo.traffic.push_back(aoi::GenerateAtWill{});
    else
      topo.traffic.push_back(aoi::Periodic{net.period[m]});
  }
  topo.positions.assign(M, {});
  topo.validate();
  return topo;
}

double maf_mad_expected_tbs(const TinyNet& net, int horizon) {
  const AoiState start{std::vector<int>(net.M(), 1), std::vector<int>(net.M(), 1)};
  return expect(net, start, 1, horizon) / horizon;
}

SequenceSearch exhaustive_lossless(const TinyNet& net, int horizon) {
  const int M = net.M();
  for (int m = 0; m < M; ++m)
    if (net.loss_sample[m] != 0.0 || net.loss_update[m] != 0.0)
      throw std::invalid_argument("exhaustive_lossless needs zero losses");

  auto subsets = [M](int k) {
    std::vector<int> out;
    for (int mask = 0; mask < (1 << M); ++mask)
      if (__builtin_popcount(mask) == std::min(k, M)) out.push_back(mask);
    return out;
  };
  const auto sample_sets = subsets(net.L);
  const auto update_sets = subsets(net.K);

  SequenceSearch result;
  result.best = 1e300;
  std::function<void(const AoiState&, int, double)> search =
      [&](const AoiState& s, int t, double acc) {
        if (t > horizon) {
          result.all.push_back(acc / horizon);
          result.best = std::min(result.best, acc / horizon);
          ++result.sequences;
          return;
        }
        for (int smask : sample_sets) {
          for (int umask : update_sets) {
            AoiState next{s.relay, s.tbs};
            for (int m = 0; m < M; ++m) {
              next.relay[m] = (smask >> m & 1)
                                  ? t + 1 - fresh_generation(net.period[m], t)
                                  : s.relay[m] + 1;
              next.tbs[m] = (umask >> m & 1) ? s.relay[m] + 1 : s.tbs[m] + 1;
            }
            search(next, t + 1, acc + mean(next.tbs));
          }
        }
      };
  search({std::vector<int>(M, 1), std::vector<int>(M, 1)}, 1, 0.0);
  return result;
}

}  // namespace oracle
