#pragma once

// Slot-driven downlink MAC scheduler standing in for the gNB.
//
// Each slot: latched SPS commands are applied, SPS UEs receive their fixed
// grants, and the remaining PRBs go to the proportional-fair pool. PRB and
// bit counts are accumulated into a telemetry window that is emitted every
// report period.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oranlab/domain.hpp"

namespace oranlab::mac {

using Micros = std::chrono::microseconds;

struct TrafficInterval {
  double start_s = 0.0;
  double stop_s = 0.0;
};

struct ChannelStep {
  std::uint64_t slot_index = 0;
  UeId ue_id = 0;
  std::uint32_t bits_per_prb_per_slot = 0;
};

struct UeConfig {
  UeId ue_id = 0;
  std::uint32_t bits_per_prb_per_slot = 200;
  std::vector<TrafficInterval> traffic;  // full-buffer on-periods
};

struct SimConfig {
  CellConfig cell;
  std::vector<UeConfig> ues;
  std::vector<ChannelStep> channel_steps;  // sorted by slot_index
  int pf_horizon_slots = 100;
  double pf_floor_bps = 1.0;
};

// Throws DomainError on inconsistent configuration.
void validate(const SimConfig& config);

struct UeGrant {
  UeId ue_id = 0;
  int prbs = 0;
  std::uint64_t tbs_bits = 0;

  bool operator==(const UeGrant&) const = default;
};

struct TtiOutcome {
  std::uint64_t slot_index = 0;
  std::vector<UeGrant> grants;  // every configured UE, ascending id

  int total_prbs() const;
  const UeGrant* find(UeId ue) const;
  bool operator==(const TtiOutcome&) const = default;
};

enum class AckStatus : std::uint8_t { kOk = 0, kRejected = 1 };

struct SpsAck {
  AckStatus status = AckStatus::kOk;
  std::vector<UeId> ignored;  // unknown ids, dropped from the command
  std::string reason;
};

struct PfCandidate {
  UeId ue_id = 0;
  double ewma_bps = 0.0;
  double inst_rate_bps = 0.0;  // achievable rate per PRB
};

// One slot of proportional-fair allocation. The candidates with the largest
// inst_rate/ewma metric share free_prbs as evenly as integers allow; leftover
// units go to the tied winners ordered by (slot_index + ue_id) mod n.
// Returns grants aligned with `candidates`.
std::vector<int> pf_schedule(std::span<const PfCandidate> candidates,
                             int free_prbs, std::uint64_t slot_index);

// Exponential average over `horizon` slots, clamped at `floor`.
double pf_ewma_update(double ewma, double served_bps, int horizon,
                      double floor);

enum class RunMode { kDeterministic, kLive };

struct RunStats {
  std::uint64_t slots = 0;
  std::uint64_t late_warnings = 0;  // live mode fell > 1 report period behind
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  const SimConfig& config() const { return config_; }
  const CellConfig& cell() const { return config_.cell; }

  // Advances exactly one slot.
  TtiOutcome step_tti();

  // Validates and latches a command; it takes effect at the next slot
  // boundary. Safe to call from any thread.
  SpsAck apply_sps_command(const SpsCommand& command);

  // Returns the current window's totals and starts a new window. The slot
  // loop calls this itself every report period and queues the result.
  KpmReport collect_report();

  // Reports emitted by the slot loop, oldest first. Safe from any thread.
  std::optional<KpmReport> pop_report();
  std::uint64_t reports_emitted() const { return reports_emitted_.load(); }

  // Invoked on the slot-loop thread for every emitted report.
  void set_report_observer(std::function<void(const KpmReport&)> observer) {
    report_observer_ = std::move(observer);
  }
  // Invoked on the slot-loop thread whenever a latched command is applied.
  void set_apply_observer(
      std::function<void(std::uint64_t slot, const SpsCommand&)> observer) {
    apply_observer_ = std::move(observer);
  }

  // Drives the slot loop for `duration` of simulated time. Live mode paces
  // one slot per slot_duration / speed of wall time and stops early when
  // `stop` becomes true.
  RunStats run(RunMode mode, Micros duration, double speed = 1.0,
               const std::function<void(const TtiOutcome&)>& on_slot = {},
               const std::atomic<bool>* stop = nullptr);

  std::uint64_t slot_index() const { return slot_; }
  Micros now() const { return Micros(slot_ * config_.cell.slot_duration_us); }
  bool is_active(UeId ue, std::uint64_t slot) const;
  std::optional<std::uint32_t> fixed_prbs(UeId ue) const;
  double ewma_bps(UeId ue) const;
  std::uint64_t sps_truncations() const { return sps_truncations_; }

 private:
  struct UeState {
    UeConfig config;
    std::uint32_t bits_per_prb = 0;
    double ewma_bps = 0.0;
    std::optional<std::uint32_t> fixed_prbs;
    std::uint64_t window_prb_slots = 0;
    std::uint64_t window_tbs_bits = 0;
  };

  void drain_inbox();
  void apply_channel_steps();
  void emit_report();
  UeState* find_ue(UeId ue);
  const UeState* find_ue(UeId ue) const;

  SimConfig config_;
  std::vector<UeState> ues_;  // ascending id
  std::uint64_t slot_ = 0;
  std::size_t next_step_ = 0;
  std::uint64_t window_start_ = 0;
  std::uint64_t sps_truncations_ = 0;

  std::mutex inbox_mutex_;
  std::vector<SpsCommand> inbox_;

  mutable std::mutex outbox_mutex_;
  std::deque<KpmReport> outbox_;
  std::atomic<std::uint64_t> reports_emitted_{0};

  std::function<void(const KpmReport&)> report_observer_;
  std::function<void(std::uint64_t, const SpsCommand&)> apply_observer_;
};

}  // namespace oranlab::mac
