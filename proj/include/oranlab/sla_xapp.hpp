#pragma once

// The SLA control loop. Every telemetry window it re-estimates per-PRB
// throughput, checks whether the GBRs still fit in the cell and, if the
// resulting SPS allocation changed, sends one control batch to the gNB.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "oranlab/domain.hpp"
#include "oranlab/sla_policy.hpp"
#include "oranlab/xapp_sdk.hpp"

namespace oranlab::sla {

using Micros = std::chrono::microseconds;

struct SlaXappConfig {
  PolicyKind policy = PolicyKind::kSoft;
  std::vector<UeProfile> profiles;
  CellConfig cell;
  GnbId gnb_id = 0;  // 0 means the first node listed by the RIC
  std::uint32_t period_ms = 100;
  int stale_periods = 3;
};

struct DecisionRecord {
  Micros time{0};
  PolicyKind policy = PolicyKind::kSoft;
  bool contention = false;
  bool issued = false;
  // Planned PRBs and expected violation per active UE. A released UE is
  // absent.
  std::vector<PolicyEntry> entries;
};

class SlaXapp {
 public:
  SlaXapp(sdk::XappHandle& handle, SlaXappConfig config);

  // One non-blocking pass: subscribe if needed, drain the queue, and decide
  // on the newest telemetry window. Returns true if anything was consumed or
  // sent.
  bool control_step(Micros now);

  const EstimatorState& estimates() const { return estimates_; }
  bool last_contention() const { return contention_.load(); }
  const std::vector<DecisionRecord>& decisions() const { return decisions_; }
  bool subscribed() const { return sub_active_.load(); }
  GnbId gnb_id() const { return gnb_; }

  // Called for each issued command with the time it was handed to the SDK.
  void set_issue_observer(std::function<void(Micros, const SpsCommand&)> fn) {
    issue_observer_ = std::move(fn);
  }

  struct Counters {
    std::uint64_t indications = 0;
    std::uint64_t commands_issued = 0;
    std::uint64_t acks_ok = 0;
    std::uint64_t acks_failed = 0;
    std::uint64_t stale_holds = 0;
  };
  const Counters& counters() const { return counters_; }

 private:
  using Allocation = std::map<UeId, std::optional<std::uint32_t>>;

  void ensure_subscription();
  void on_report(const KpmReport& report);
  void decide(Micros now);
  Allocation plan(bool contention, DecisionRecord& record) const;

  sdk::XappHandle& handle_;
  SlaXappConfig config_;
  GnbId gnb_ = 0;
  std::optional<std::uint32_t> subscription_;
  std::atomic<bool> sub_active_{false};

  EstimatorState estimates_;
  bool fresh_window_ = false;
  std::optional<Micros> last_indication_;
  bool stale_logged_ = false;

  // Allocation currently believed to be in force. Empty after a failed ack
  // so the next cycle re-sends.
  std::optional<Allocation> in_force_;
  std::optional<ric::RequestToken> pending_token_;

  std::atomic<bool> contention_{false};
  std::vector<DecisionRecord> decisions_;
  std::function<void(Micros, const SpsCommand&)> issue_observer_;
  Counters counters_;
};

}  // namespace oranlab::sla
