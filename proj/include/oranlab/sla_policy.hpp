#pragma once

// Pure SLA logic: per-PRB throughput estimation from telemetry windows,
// contention detection and the two allocation solvers.
//
// Soft minimises the summed violation over integer PRB counts. Strict picks
// the maximum-weight set of UEs whose full demands fit, then hands the
// remaining PRBs to the rest.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "oranlab/domain.hpp"

namespace oranlab::sla {

enum class PolicyKind { kSoft, kStrict, kBaseline };

std::string policy_name(PolicyKind kind);
// Accepts "soft", "strict", "baseline". Throws DomainError listing them.
PolicyKind parse_policy(const std::string& text);

struct EstimatorState {
  std::map<UeId, UeEstimate> ues;
  std::uint64_t windows = 0;
};

// Recomputes the estimate of every UE in the report from that window alone.
// A UE that held no PRBs keeps its previous eta and is marked inactive.
EstimatorState update_estimates(const EstimatorState& previous,
                                const KpmReport& report,
                                const CellConfig& cell);

// Flattens the estimator into a vector ordered by ue_id.
std::vector<UeEstimate> estimate_list(const EstimatorState& state);

// True when the PRBs needed to meet every active UE's GBR exceed capacity.
// Active UEs without an estimate (or with eta 0) are skipped.
bool detect_contention(std::span<const UeEstimate> estimates,
                       std::span<const UeProfile> profiles, int capacity);

// Both solvers consider the active UEs that have a profile. Entries come back
// ascending by ue_id. A UE with eta 0 is carried with 0 PRBs and its full SLA
// as violation.
PolicySolution solve_soft(std::span<const UeProfile> profiles,
                          std::span<const UeEstimate> estimates, int capacity);
PolicySolution solve_strict(std::span<const UeProfile> profiles,
                            std::span<const UeEstimate> estimates,
                            int capacity);

}  // namespace oranlab::sla
