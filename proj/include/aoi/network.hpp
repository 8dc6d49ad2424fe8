#ifndef AOI_NETWORK_HPP_
#define AOI_NETWORK_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace aoi {

// All stochastic components draw from this engine so that a seed fully
// determines a run.
using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// -- traffic models -- //

struct GenerateAtWill {
  bool operator==(const GenerateAtWill&) const = default;
};

struct Periodic {
  int period = 1;

  bool operator==(const Periodic&) const = default;
};

using TrafficModel = std::variant<GenerateAtWill, Periodic>;

enum class TrafficKind { generate_at_will, periodic };

// Generation slot of the newest packet available at a device at slot t.
// Periodic devices hold an initial packet generated at slot 0.
int latest_generation(const TrafficModel& traffic, int t, bool sampled_now);

// -- topology -- //

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TopologyConfig {
  int num_devices = 8;
  int num_relays = 2;
  int relay_channels = 2;
  int tbs_channels = 4;
  // Empty means an even split (earlier relays absorb the remainder).
  std::vector<int> group_sizes;
  Range loss_sample_range{0.05, 0.5};
  Range loss_update_range{0.05, 0.5};
  std::vector<int> periodicity_set{1, 2, 3, 4, 5};
  TrafficKind traffic = TrafficKind::periodic;
  // Explicit per-device overrides.
  std::optional<std::vector<double>> loss_sample;
  std::optional<std::vector<double>> loss_update;
  std::optional<std::vector<int>> periodicity;
  double area_l = 1000.0;
  double area_b = 1000.0;
};

class Topology {
 public:
  int num_devices = 0;
  int num_relays = 0;
  int relay_channels = 0;
  int tbs_channels = 0;
  std::vector<int> relay_of;                // device -> relay
  std::vector<std::vector<int>> groups;     // relay -> devices, ascending
  std::vector<double> loss_sample;
  std::vector<double> loss_update;
  std::vector<TrafficModel> traffic;
  std::vector<Position> positions;

  int group_size(int relay) const {
    return static_cast<int>(groups.at(relay).size());
  }
  std::vector<int> group_sizes() const;

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

// Per-device parameters are drawn from independent seeded streams in device
// order, so growing M keeps the parameters of the first devices unchanged.
Topology build_topology(const TopologyConfig& config, std::uint64_t seed);

// -- dynamic state -- //

struct AoiSnapshot {
  int slot = 1;
  std::vector<int> relay;
  std::vector<int> tbs;

  int num_devices() const { return static_cast<int>(relay.size()); }
};

struct NetState {
  int slot = 1;
  std::vector<int> device_gen;
  std::vector<int> relay_gen;
  std::vector<int> tbs_gen;

  static NetState initial(int num_devices);
  AoiSnapshot snapshot() const;
};

struct Action {
  std::vector<std::vector<int>> sample_sets;  // per relay, ascending
  std::vector<int> update_set;                // ascending

  bool operator==(const Action&) const = default;
};

class ConstraintViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Throws ConstraintViolation if the action breaks a channel or ownership
// constraint.
void check_action(const Action& action, const Topology& topo);

struct StepOutcome {
  std::vector<std::uint8_t> sampled;
  std::vector<std::uint8_t> updated;
  std::vector<std::uint8_t> sample_lost;
  std::vector<std::uint8_t> update_lost;
};

struct StepResult {
  NetState next;
  StepOutcome outcome;
};

// Advances one slot. Updates read the relay buffer as it stood at the start
// of the slot, then sampling outcomes are applied. Exactly 2M uniforms are
// drawn per call (update draws first, then sample draws) regardless of the
// action, so different schedulers see common loss realizations.
StepResult step_dynamics(const NetState& state, const Topology& topo,
                         const Action& action, Rng& rng);

// -- metrics -- //

struct AverageAoi {
  double relay = 0.0;
  double tbs = 0.0;
};

AverageAoi average_aoi(std::span<const AoiSnapshot> trace);

struct ActionSpaceSize {
  boost::multiprecision::cpp_int combinatorial;
  long long linear = 0;
};

boost::multiprecision::cpp_int binomial(int n, int k);

ActionSpaceSize action_space_cardinality(const Topology& topo);

}  // namespace aoi

#endif  // AOI_NETWORK_HPP_
