#include "aoi/network.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace aoi {

namespace {

// independent parameter streams for build_topology
constexpr std::uint64_t kLossSampleStream = 11;
constexpr std::uint64_t kLossUpdateStream = 12;
constexpr std::uint64_t kPeriodStream = 13;
constexpr std::uint64_t kPositionStream = 14;

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

double draw_in(const Range& range, Rng& rng) {
  if (range.hi <= range.lo) return range.lo;
  std::uniform_real_distribution<double> dist(range.lo, range.hi);
  return dist(rng);
}

void check_range(const Range& range, const char* name) {
  require(range.lo >= 0.0 && range.hi < 1.0 && range.lo <= range.hi,
          std::string(name) + " must lie within [0, 1) with lo <= hi");
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

int latest_generation(const TrafficModel& traffic, int t, bool sampled_now) {
  if (const auto* periodic = std::get_if<Periodic>(&traffic)) {
    const int p = periodic->period;
    return t >= p ? p * (t / p) : 0;
  }
  // generate-at-will: a packet exists only once the device is asked for one
  return sampled_now ? t : 0;
}

std::vector<int> Topology::group_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(groups.size());
  for (const auto& g : groups) sizes.push_back(static_cast<int>(g.size()));
  return sizes;
}

void Topology::validate() const {
  require(num_devices >= 1, "M must be at least 1");
  require(num_relays >= 1, "N must be at least 1");
  require(relay_channels >= 1, "L must be at least 1");
  require(tbs_channels >= 1, "K must be at least 1");
  const auto m = static_cast<std::size_t>(num_devices);
  require(relay_of.size() == m && loss_sample.size() == m &&
              loss_update.size() == m && traffic.size() == m,
          "per-device vectors must have length M");
  require(groups.size() == static_cast<std::size_t>(num_relays),
          "group count must equal N");
  std::vector<int> seen(m, 0);
  for (int n = 0; n < num_relays; ++n) {
    for (int d : groups[n]) {
      require(d >= 0 && d < num_devices, "group member out of range");
      require(relay_of[d] == n, "assignment disagrees with groups");
      ++seen[d];
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }),
          "relay groups must partition the device set");
  for (std::size_t d = 0; d < m; ++d) {
    require(loss_sample[d] >= 0.0 && loss_sample[d] < 1.0,
            "sample loss probability outside [0, 1)");
    require(loss_update[d] >= 0.0 && loss_update[d] < 1.0,
            "update loss probability outside [0, 1)");
    if (const auto* p = std::get_if<Periodic>(&traffic[d])) {
      require(p->period >= 1, "periodicity must be at least 1 slot");
    }
  }
}

Topology build_topology(const TopologyConfig& config, std::uint64_t seed) {
  const int M = config.num_devices;
  const int N = config.num_relays;
  require(M >= 1 && N >= 1 && config.relay_channels >= 1 &&
              config.tbs_channels >= 1,
          "M, N, L and K must all be at least 1");
  require(N <= M, "N must not exceed M");
  check_range(config.loss_sample_range, "loss_sample_range");
  check_range(config.loss_update_range, "loss_update_range");

  Topology topo;
  topo.num_devices = M;
  topo.num_relays = N;
  topo.relay_channels = config.relay_channels;
  topo.tbs_channels = config.tbs_channels;

  std::vector<int> sizes = config.group_sizes;
  if (sizes.empty()) {
    sizes.assign(N, M / N);
    for (int n = 0; n < M % N; ++n) ++sizes[n];
  }
  require(static_cast<int>(sizes.size()) == N,
          "explicit groups must list one size per relay");
  require(std::all_of(sizes.begin(), sizes.end(), [](int s) { return s >= 0; }),
          "group sizes must be nonnegative");
  require(std::accumulate(sizes.begin(), sizes.end(), 0) == M,
          "group sizes must sum to M");

  topo.groups.resize(N);
  topo.relay_of.resize(M);
  int device = 0;
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < sizes[n]; ++i, ++device) {
      topo.groups[n].push_back(device);
      topo.relay_of[device] = n;
    }
  }

  auto sample_rng = make_rng(seed, kLossSampleStream);
  auto update_rng = make_rng(seed, kLossUpdateStream);
  auto period_rng = make_rng(seed, kPeriodStream);
  auto position_rng = make_rng(seed, kPositionStream);

  if (config.loss_sample) {
    require(static_cast<int>(config.loss_sample->size()) == M,
            "loss_sample must list M values");
    topo.loss_sample = *config.loss_sample;
  } else {
    for (int d = 0; d < M; ++d)
      topo.loss_sample.push_back(draw_in(config.loss_sample_range, sample_rng));
  }
  if (config.loss_update) {
    require(static_cast<int>(config.loss_update->size()) == M,
            "loss_update must list M values");
    topo.loss_update = *config.loss_update;
  } else {
    for (int d = 0; d < M; ++d)
      topo.loss_update.push_back(draw_in(config.loss_update_range, update_rng));
  }

  if (config.traffic == TrafficKind::generate_at_will) {
    topo.traffic.assign(M, GenerateAtWill{});
  } else if (config.periodicity) {
    require(static_cast<int>(config.periodicity->size()) == M,
            "periodicity must list M values");
    for (int p : *config.periodicity) topo.traffic.push_back(Periodic{p});
  } else {
    require(!config.periodicity_set.empty(), "periodicity_set is empty");
    const auto count = static_cast<std::uint64_t>(config.periodicity_set.size());
    for (int d = 0; d < M; ++d) {
      // one engine call per device keeps streams aligned across M
      const auto pick = static_cast<std::size_t>(period_rng() % count);
      topo.traffic.push_back(Periodic{config.periodicity_set[pick]});
    }
  }

  std::uniform_real_distribution<double> ux(0.0, config.area_l);
  std::uniform_real_distribution<double> uy(0.0, config.area_b);
  for (int d = 0; d < M; ++d) {
    const double x = ux(position_rng);
    topo.positions.push_back({x, uy(position_rng)});
  }

  topo.validate();
  return topo;
}

NetState NetState::initial(int num_devices) {
  NetState s;
  s.slot = 1;
  s.device_gen.assign(num_devices, 0);
  s.relay_gen.assign(num_devices, 0);
  s.tbs_gen.assign(num_devices, 0);
  return s;
}

AoiSnapshot NetState::snapshot() const {
  AoiSnapshot snap;
  snap.slot = slot;
  snap.relay.resize(relay_gen.size());
  snap.tbs.resize(tbs_gen.size());
  for (std::size_t m = 0; m < relay_gen.size(); ++m) {
    snap.relay[m] = slot - relay_gen[m];
    snap.tbs[m] = slot - tbs_gen[m];
  }
  return snap;
}

void check_action(const Action& action, const Topology& topo) {
  auto fail = [](const std::string& what) { throw ConstraintViolation(what); };
  if (static_cast<int>(action.sample_sets.size()) != topo.num_relays)
    fail("action must carry one sample set per relay");
  std::vector<int> used(topo.num_devices, 0);
  for (int n = 0; n < topo.num_relays; ++n) {
    const auto& set = action.sample_sets[n];
    if (static_cast<int>(set.size()) > topo.relay_channels) {
      std::ostringstream os;
      os << "relay " << n << " samples " << set.size() << " devices with L="
         << topo.relay_channels;
      fail(os.str());
    }
    for (int d : set) {
      if (d < 0 || d >= topo.num_devices || topo.relay_of[d] != n)
        fail("relay " + std::to_string(n) + " samples a foreign device");
      if (used[d]++ != 0) fail("device sampled twice");
    }
  }
  if (static_cast<int>(action.update_set.size()) > topo.tbs_channels)
    fail("update set exceeds K channels");
  std::fill(used.begin(), used.end(), 0);
  for (int d : action.update_set) {
    if (d < 0 || d >= topo.num_devices) fail("update of unknown device");
    if (used[d]++ != 0) fail("device updated twice");
  }
}

StepResult step_dynamics(const NetState& state, const Topology& topo,
                         const Action& action, Rng& rng) {
  check_action(action, topo);
  const int M = topo.num_devices;
  const int t = state.slot;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> update_draw(M);
  std::vector<double> sample_draw(M);
  for (auto& u : update_draw) u = unit(rng);
  for (auto& u : sample_draw) u = unit(rng);

  StepResult result{state, {}};
  auto& next = result.next;
  auto& out = result.outcome;
  out.sampled.assign(M, 0);
  out.updated.assign(M, 0);
  out.sample_lost.assign(M, 0);
  out.update_lost.assign(M, 0);

  // updates forward the relay buffer as it stood at the start of slot t
  for (int d : action.update_set) {
    out.updated[d] = 1;
    if (update_draw[d] < topo.loss_update[d]) {
      out.update_lost[d] = 1;
    } else {
      next.tbs_gen[d] = state.relay_gen[d];
    }
  }

  for (const auto& set : action.sample_sets) {
    for (int d : set) {
      out.sampled[d] = 1;
      const int gen = latest_generation(topo.traffic[d], t, true);
      if (std::holds_alternative<GenerateAtWill>(topo.traffic[d]))
        next.device_gen[d] = gen;
      if (sample_draw[d] < topo.loss_sample[d]) {
        out.sample_lost[d] = 1;
      } else {
        next.relay_gen[d] = std::max(next.relay_gen[d], gen);
      }
    }
  }

  next.slot = t + 1;
  for (int d = 0; d < M; ++d) {
    if (std::holds_alternative<Periodic>(topo.traffic[d]))
      next.device_gen[d] = latest_generation(topo.traffic[d], t + 1, false);
  }
  return result;
}

AverageAoi average_aoi(std::span<const AoiSnapshot> trace) {
  if (trace.empty()) throw std::invalid_argument("average_aoi: empty trace");
  const int M = trace.front().num_devices();
  long long relay_sum = 0;
  long long tbs_sum = 0;
  for (const auto& snap : trace) {
    if (snap.num_devices() != M)
      throw std::invalid_argument("average_aoi: inconsistent device count");
    relay_sum += std::accumulate(snap.relay.begin(), snap.relay.end(), 0LL);
    tbs_sum += std::accumulate(snap.tbs.begin(), snap.tbs.end(), 0LL);
  }
  const double denom = static_cast<double>(trace.size()) * M;
  return {static_cast<double>(relay_sum) / denom,
          static_cast<double>(tbs_sum) / denom};
}

boost::multiprecision::cpp_int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  boost::multiprecision::cpp_int result = 1;
  for (int i = 1; i <= k; ++i) {
    result *= n - k + i;
    result /= i;
  }
  return result;
}

ActionSpaceSize action_space_cardinality(const Topology& topo) {
  ActionSpaceSize size;
  size.combinatorial = 1;
  for (const auto& group : topo.groups) {
    const int m = static_cast<int>(group.size());
    size.combinatorial *= binomial(m, std::min(topo.relay_channels, m));
  }
  size.combinatorial *=
      binomial(topo.num_devices, std::min(topo.tbs_channels, topo.num_devices));
  size.linear = 2LL * topo.num_devices;
  return size;
}

}  // namespace aoi
