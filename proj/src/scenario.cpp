#include "aoi/scenario.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <type_traits>

namespace aoi {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> items;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto end = comma == std::string_view::npos ? value.size() : comma;
    const auto item = trim(value.substr(start, end - start));
    if (!item.empty()) items.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

[[noreturn]] void bad_value(int line, std::string_view key,
                            std::string_view value) {
  std::ostringstream os;
  os << "line " << line << ": bad value for '" << key << "': '" << value << "'";
  throw ConfigError(os.str());
}

long long to_integer(int line, std::string_view key, std::string_view text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(line, key, text);
  return v;
}

double to_double(int line, std::string_view key, std::string_view text) {
  // std::from_chars for double is missing on older toolchains
  std::string copy(text);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (end != copy.c_str() + copy.size() || copy.empty())
    bad_value(line, key, text);
  return v;
}

int to_int(int line, std::string_view key, std::string_view text) {
  const auto v = to_integer(line, key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    bad_value(line, key, text);
  return static_cast<int>(v);
}

std::vector<int> to_int_list(int line, std::string_view key,
                             std::string_view value) {
  std::vector<int> out;
  for (auto item : split_list(value)) out.push_back(to_int(line, key, item));
  if (out.empty()) bad_value(line, key, value);
  return out;
}

std::vector<double> to_double_list(int line, std::string_view key,
                                   std::string_view value) {
  std::vector<double> out;
  for (auto item : split_list(value)) out.push_back(to_double(line, key, item));
  if (out.empty()) bad_value(line, key, value);
  return out;
}

Range to_range(int line, std::string_view key, std::string_view value) {
  const auto v = to_double_list(line, key, value);
  if (v.size() != 2) bad_value(line, key, value);
  return {v[0], v[1]};
}

// Shortest decimal that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
void write_value(std::ostream& os, const T& v) {
  if constexpr (std::is_floating_point_v<T>)
    os << shortest(v);
  else
    os << v;
}

template <typename T>
void write_list(std::ostream& os, const std::vector<T>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    write_value(os, values[i]);
  }
}

}  // namespace

std::string_view traffic_kind_name(TrafficKind kind) {
  return kind == TrafficKind::periodic ? "periodic" : "generate_at_will";
}

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  auto& topo = cfg.topology;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                              : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    if (key == "M") {
      topo.num_devices = to_int(line_no, key, value);
    } else if (key == "N") {
      topo.num_relays = to_int(line_no, key, value);
    } else if (key == "L") {
      topo.relay_channels = to_int(line_no, key, value);
    } else if (key == "K") {
      topo.tbs_channels = to_int(line_no, key, value);
    } else if (key == "T") {
      cfg.horizon = to_int(line_no, key, value);
    } else if (key == "seed") {
      const auto v = to_integer(line_no, key, value);
      if (v < 0) bad_value(line_no, key, value);
      cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "groups") {
      topo.group_sizes = to_int_list(line_no, key, value);
    } else if (key == "loss_sample_range") {
      topo.loss_sample_range = to_range(line_no, key, value);
    } else if (key == "loss_update_range") {
      topo.loss_update_range = to_range(line_no, key, value);
    } else if (key == "periodicity_set") {
      topo.periodicity_set = to_int_list(line_no, key, value);
    } else if (key == "traffic_model") {
      if (value == "periodic") {
        topo.traffic = TrafficKind::periodic;
      } else if (value == "generate_at_will") {
        topo.traffic = TrafficKind::generate_at_will;
      } else {
        bad_value(line_no, key, value);
      }
    } else if (key == "area_l") {
      topo.area_l = to_double(line_no, key, value);
    } else if (key == "area_b") {
      topo.area_b = to_double(line_no, key, value);
    } else if (key == "loss_sample") {
      topo.loss_sample = to_double_list(line_no, key, value);
    } else if (key == "loss_update") {
      topo.loss_update = to_double_list(line_no, key, value);
    } else if (key == "periodicity") {
      topo.periodicity = to_int_list(line_no, key, value);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    }
  }
  if (cfg.horizon < 1) throw ConfigError("T must be at least 1");
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::string format_scenario(const ScenarioConfig& config) {
  const auto& t = config.topology;
  std::ostringstream os;
  os << "M = " << t.num_devices << '\n'
     << "N = " << t.num_relays << '\n'
     << "L = " << t.relay_channels << '\n'
     << "K = " << t.tbs_channels << '\n'
     << "T = " << config.horizon << '\n'
     << "seed = " << config.seed << '\n';
  if (!t.group_sizes.empty()) {
    os << "groups = ";
    write_list(os, t.group_sizes);
    os << '\n';
  }
  os << "loss_sample_range = " << shortest(t.loss_sample_range.lo) << ','
     << shortest(t.loss_sample_range.hi) << '\n'
     << "loss_update_range = " << shortest(t.loss_update_range.lo) << ','
     << shortest(t.loss_update_range.hi) << '\n'
     << "periodicity_set = ";
  write_list(os, t.periodicity_set);
  os << '\n'
     << "traffic_model = " << traffic_kind_name(t.traffic) << '\n'
     << "area_l = " << t.area_l << '\n'
     << "area_b = " << t.area_b << '\n';
  if (t.loss_sample) {
    os << "loss_sample = ";
    write_list(os, *t.loss_sample);
    os << '\n';
  }
  if (t.loss_update) {
    os << "loss_update = ";
    write_list(os, *t.loss_update);
    os << '\n';
  }
  if (t.periodicity) {
    os << "periodicity = ";
    write_list(os, *t.periodicity);
    os << '\n';
  }
  return os.str();
}

void append_trace(std::vector<TraceRow>& rows, const AoiSnapshot& snapshot,
                  const StepOutcome& outcome) {
  for (int m = 0; m < snapshot.num_devices(); ++m) {
    rows.push_back({snapshot.slot, m, snapshot.relay[m], snapshot.tbs[m],
                    outcome.sampled[m] != 0, outcome.updated[m] != 0,
                    outcome.sample_lost[m] != 0, outcome.update_lost[m] != 0});
  }
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << kTraceHeader << '\n';
  for (const auto& r : rows) {
    os << r.slot << ',' << r.device << ',' << r.aoi_relay << ',' << r.aoi_tbs
       << ',' << int(r.sampled) << ',' << int(r.updated) << ','
       << int(r.sample_lost) << ',' << int(r.update_lost) << '\n';
  }
}

}  // namespace aoi
