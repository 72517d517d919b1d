#include "oranlab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace oranlab {

bool approx_equal(double a, double b, double rel) {
  const double scale = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) <= rel * scale;
}

bool approx_less(double a, double b, double rel) {
  return a < b && !approx_equal(a, b, rel);
}

UnsatisfiableDemand::UnsatisfiableDemand(double sla_mbps)
    : DomainError("unsatisfiable demand: SLA " + std::to_string(sla_mbps) +
                  " Mbps with zero per-PRB throughput") {}

void validate(const UeProfile& profile) {
  if (!(profile.gbr_mbps >= 0.0) || !std::isfinite(profile.gbr_mbps)) {
    throw DomainError("gbr_mbps must be a finite non-negative number");
  }
  if (!(profile.weight > 0.0) || !std::isfinite(profile.weight)) {
    throw DomainError("weight must be a finite positive number");
  }
}

void validate(const CellConfig& cell) {
  if (cell.total_prbs < 1) throw DomainError("total_prbs must be >= 1");
  if (cell.slot_duration_us < 1) {
    throw DomainError("slot_duration_us must be >= 1");
  }
  if (cell.report_period_ms < 1) {
    throw DomainError("report_period_ms must be >= 1");
  }
  if ((cell.report_period_ms * 1000) % cell.slot_duration_us != 0) {
    throw DomainError(
        "report_period_ms must be a whole number of slot durations");
  }
}

int PolicySolution::total_prbs() const {
  int sum = 0;
  for (const auto& e : entries) sum += e.prbs;
  return sum;
}

double PolicySolution::total_violation() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.expected_violation_mbps;
  return sum;
}

const PolicyEntry* PolicySolution::find(UeId ue) const {
  for (const auto& e : entries) {
    if (e.ue_id == ue) return &e;
  }
  return nullptr;
}

const KpmRecord* KpmReport::find(UeId ue) const {
  for (const auto& r : records) {
    if (r.ue_id == ue) return &r;
  }
  return nullptr;
}

double violation(double sla_mbps, double throughput_mbps) {
  const double gap = sla_mbps - throughput_mbps;
  if (gap <= 0.0 || approx_equal(sla_mbps, throughput_mbps)) return 0.0;
  return gap;
}

int required_prbs(double sla_mbps, double eta_mbps_per_prb) {
  if (sla_mbps <= 0.0) return 0;
  if (!(eta_mbps_per_prb > 0.0)) throw UnsatisfiableDemand(sla_mbps);
  // Snap quotients within tolerance of an integer so that 10 / 0.4 is 25,
  // not 26 from representation error.
  const double ratio = sla_mbps / eta_mbps_per_prb;
  const double nearest = std::round(ratio);
  if (approx_equal(ratio, nearest)) return static_cast<int>(nearest);
  return static_cast<int>(std::ceil(ratio));
}

}  // namespace oranlab
