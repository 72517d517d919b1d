#pragma once

// Shared vocabulary for the whole lab: UE/cell descriptions, per-UE estimates,
// policy outputs and the SLA arithmetic every component agrees on.
//
// Rates are double-precision Mbps, PRB counts are integers. Every comparison
// between rates goes through approx_equal/approx_less with a 1e-9 relative
// tolerance.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oranlab {

using UeId = std::uint16_t;
using GnbId = std::uint32_t;

inline constexpr double kRelTolerance = 1e-9;

bool approx_equal(double a, double b, double rel = kRelTolerance);
// a < b by more than the tolerance.
bool approx_less(double a, double b, double rel = kRelTolerance);

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by required_prbs when a UE has no usable per-PRB throughput.
class UnsatisfiableDemand : public DomainError {
 public:
  explicit UnsatisfiableDemand(double sla_mbps);
};

struct UeProfile {
  UeId ue_id = 0;
  double gbr_mbps = 0.0;
  double weight = 1.0;
};

enum class LeftoverMode { kCap, kPf };

struct CellConfig {
  int total_prbs = 65;
  int slot_duration_us = 500;
  int report_period_ms = 100;
  LeftoverMode leftover_mode = LeftoverMode::kCap;

  double slot_seconds() const { return slot_duration_us * 1e-6; }
  int slots_per_report() const {
    return report_period_ms * 1000 / slot_duration_us;
  }
};

// Throws DomainError naming the offending field.
void validate(const UeProfile& profile);
void validate(const CellConfig& cell);

struct UeEstimate {
  UeId ue_id = 0;
  double eta_mbps_per_prb = 0.0;
  bool has_estimate = false;
  bool active = false;
  int demand_prbs = 0;
};

struct PolicyEntry {
  UeId ue_id = 0;
  int prbs = 0;
  double expected_violation_mbps = 0.0;
  bool selected = true;
};

struct PolicySolution {
  std::vector<PolicyEntry> entries;  // ascending ue_id

  int total_prbs() const;
  double total_violation() const;
  const PolicyEntry* find(UeId ue) const;
};

// Per-window telemetry for one UE: PRB-slots granted and bits delivered.
struct KpmRecord {
  UeId ue_id = 0;
  std::uint32_t prb_slots = 0;
  std::uint64_t tbs_bits = 0;

  bool operator==(const KpmRecord&) const = default;
};

struct KpmReport {
  std::uint32_t period_ms = 0;
  std::vector<KpmRecord> records;

  bool operator==(const KpmReport&) const = default;
  const KpmRecord* find(UeId ue) const;
};

// One SPS directive. An empty fixed_prbs releases the UE to dynamic
// scheduling.
struct SpsEntry {
  UeId ue_id = 0;
  std::optional<std::uint32_t> fixed_prbs;

  bool operator==(const SpsEntry&) const = default;
};

struct SpsCommand {
  std::vector<SpsEntry> entries;

  bool operator==(const SpsCommand&) const = default;
};

// max(0, sla - throughput)
double violation(double sla_mbps, double throughput_mbps);

// Smallest PRB count whose throughput covers the SLA; 0 for a zero SLA.
// Throws UnsatisfiableDemand when eta is not positive and the SLA is.
int required_prbs(double sla_mbps, double eta_mbps_per_prb);

}  // namespace oranlab
