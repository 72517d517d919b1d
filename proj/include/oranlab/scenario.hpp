#pragma once

// Experiment runner. Loads a JSON scenario, wires simulator, agent halves,
// RIC and the SLA xApp together, runs the timeline and produces a per-window
// trace plus a summary.
//
// Deterministic mode runs everything on the calling thread: after each
// report window the components are polled round-robin until none of them
// makes progress. Live mode gives every component its own thread and joins
// them over loopback TCP (agent to RIC) and UDP (agent halves).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "oranlab/domain.hpp"
#include "oranlab/mac_sim.hpp"
#include "oranlab/sla_policy.hpp"
#include "oranlab/sla_xapp.hpp"

namespace oranlab::scenario {

using Micros = std::chrono::microseconds;

// Schema problem, carrying the JSON path of the offending field.
class ConfigError : public DomainError {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : DomainError(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ChannelChange {
  double at_s = 0.0;
  std::uint32_t bits_per_prb_per_slot = 0;
};

struct UeSpec {
  UeProfile profile;
  std::uint32_t bits_per_prb_per_slot = 200;
  std::vector<mac::TrafficInterval> traffic;
  std::vector<ChannelChange> channel;
};

enum class Mode { kDeterministic, kLive };

std::string mode_name(Mode mode);
// "det" or "live".
Mode parse_mode(const std::string& text);

struct PaperTimeline {
  std::map<UeId, double> start_s;
  double duration_s = 0.0;
};

struct ScenarioConfig {
  CellConfig cell;
  GnbId gnb_id = 1;
  std::vector<UeSpec> ues;
  sla::PolicyKind policy = sla::PolicyKind::kSoft;
  double duration_s = 10.0;
  Mode mode = Mode::kDeterministic;
  double speed = 1.0;
  double steady_state_s = 2.0;
  std::string out_dir = "out";
  std::optional<PaperTimeline> paper_timeline;
};

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig parse_scenario_text(const std::string& text);
// Throws ConfigError, including for unreadable files.
ScenarioConfig load_scenario(const std::filesystem::path& path);
void validate(const ScenarioConfig& config);

// Each UE's traffic becomes a single on-period from its listed start to the
// end of the longer run. Throws ConfigError if the scenario has no such
// timeline.
ScenarioConfig with_paper_timeline(ScenarioConfig config);

mac::SimConfig to_sim_config(const ScenarioConfig& config);
std::vector<UeProfile> profiles(const ScenarioConfig& config);

struct TraceRow {
  double time_s = 0.0;  // end of the report window
  UeId ue_id = 0;
  double throughput_mbps = 0.0;
  double prbs_avg = 0.0;
  std::optional<double> violation_mbps;  // empty while the UE has no traffic
  std::string policy;
  bool contention = false;
};

inline constexpr const char* kTraceHeader =
    "time_s,ue_id,throughput_mbps,prbs_avg,violation_mbps,policy,contention";

std::string format_trace(const std::vector<TraceRow>& rows);
// Throws DomainError on a malformed line.
std::vector<TraceRow> parse_trace(const std::string& csv);

struct UeSummary {
  UeId ue_id = 0;
  std::size_t active_windows = 0;
  double mean_throughput_mbps = 0.0;
  double mean_violation_mbps = 0.0;
  double steady_throughput_mbps = 0.0;
  double steady_violation_mbps = 0.0;
};

struct RunSummary {
  std::string policy;
  std::string mode;
  double duration_s = 0.0;
  double steady_s = 0.0;
  std::vector<UeSummary> ues;
  double total_violation_mbps = 0.0;
  double steady_total_violation_mbps = 0.0;
  std::uint64_t commands = 0;
  double contention_s = 0.0;
  std::size_t windows = 0;

  const UeSummary* find(UeId ue) const;
};

// Means are taken over each UE's windows with traffic. The steady-state
// figures use only windows ending in the last `steady_s` seconds.
RunSummary summarize(const std::vector<TraceRow>& rows, double duration_s,
                     double steady_s, double report_period_s);
nlohmann::json to_json(const RunSummary& summary);

// Measurements collected in live mode. Times are wall-clock offsets from the
// start of the run.
struct LiveMetrics {
  std::vector<Micros> control_times;
  std::vector<std::pair<Micros, SpsCommand>> issued;
  std::vector<std::pair<Micros, SpsCommand>> applied;
  std::uint64_t reports_emitted = 0;
  std::uint64_t uplinks_sent = 0;
  std::uint64_t uplinks_received = 0;
  std::uint64_t uplinks_while_subscribed = 0;
  std::uint64_t indications_sent = 0;
  std::uint64_t indications_routed = 0;
  std::uint64_t xapp_indications = 0;
  std::uint64_t late_warnings = 0;
  std::uint64_t sessions_established = 0;
};

struct RunResult {
  RunSummary summary;
  std::vector<TraceRow> rows;
  std::string trace_csv;
  std::vector<sla::DecisionRecord> decisions;
  LiveMetrics live;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunResult run_experiment(const ScenarioConfig& config);

// Writes trace.csv and summary.json into `dir`.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

// Reads a trace file and writes ue_<id>.dat per UE and bars.dat. Returns the
// files written.
std::vector<std::filesystem::path> emit_plotdata(
    const std::filesystem::path& trace, const std::filesystem::path& out_dir);

}  // namespace oranlab::scenario
