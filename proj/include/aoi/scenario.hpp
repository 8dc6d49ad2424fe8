#ifndef AOI_SCENARIO_HPP_
#define AOI_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "aoi/network.hpp"

namespace aoi {

// A scenario file is UTF-8 text of `key = value` lines; `#` starts a comment.
//
//   M = 8
//   N = 2
//   groups = 4,4
//   loss_sample_range = 0.05,0.5
//   periodicity_set = 1,2,3,4,5
//   traffic_model = periodic        # or generate_at_will
//   loss_sample = 0.1,0.2,...       # optional explicit vectors
struct ScenarioConfig {
  TopologyConfig topology;
  std::uint64_t seed = 1;
  int horizon = 20;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Inverse of parse_scenario for the keys that carry information.
std::string format_scenario(const ScenarioConfig& config);

std::string_view traffic_kind_name(TrafficKind kind);

// -- trace export -- //

struct TraceRow {
  int slot = 0;
  int device = 0;
  int aoi_relay = 0;
  int aoi_tbs = 0;
  bool sampled = false;
  bool updated = false;
  bool sample_lost = false;
  bool update_lost = false;
};

inline constexpr std::string_view kTraceHeader =
    "slot,device,aoi_relay,aoi_tbs,sampled,updated,sample_lost,update_lost";

// Rows for the snapshot reached after `outcome` was applied.
void append_trace(std::vector<TraceRow>& rows, const AoiSnapshot& snapshot,
                  const StepOutcome& outcome);

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

}  // namespace aoi

#endif  // AOI_SCENARIO_HPP_
