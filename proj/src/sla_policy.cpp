#include "oranlab/sla_policy.hpp"

#include <algorithm>

namespace oranlab::sla {

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kSoft:
      return "soft";
    case PolicyKind::kStrict:
      return "strict";
    case PolicyKind::kBaseline:
      return "baseline";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& text) {
  if (text == "soft") return PolicyKind::kSoft;
  if (text == "strict") return PolicyKind::kStrict;
  if (text == "baseline") return PolicyKind::kBaseline;
  throw DomainError("unknown policy '" + text +
                    "' (valid: soft, strict, baseline)");
}

EstimatorState update_estimates(const EstimatorState& previous,
                                const KpmReport& report,
                                const CellConfig& cell) {
  if (report.period_ms == 0) throw DomainError("report period must be > 0");
  EstimatorState next = previous;
  ++next.windows;
  for (const KpmRecord& rec : report.records) {
    UeEstimate& est = next.ues[rec.ue_id];
    est.ue_id = rec.ue_id;
    if (rec.prb_slots == 0) {
      est.active = false;
      continue;
    }
    const double seconds = rec.prb_slots * cell.slot_seconds();
    est.eta_mbps_per_prb = static_cast<double>(rec.tbs_bits) / seconds / 1e6;
    est.has_estimate = true;
    est.active = rec.tbs_bits > 0;
  }
  return next;
}

std::vector<UeEstimate> estimate_list(const EstimatorState& state) {
  std::vector<UeEstimate> out;
  out.reserve(state.ues.size());
  for (const auto& [id, est] : state.ues) out.push_back(est);
  return out;
}

namespace {

struct Item {
  UeId ue_id = 0;
  double sla = 0.0;
  double eta = 0.0;
  double weight = 1.0;
};

const UeProfile* profile_for(std::span<const UeProfile> profiles, UeId ue) {
  for (const auto& p : profiles) {
    if (p.ue_id == ue) return &p;
  }
  return nullptr;
}

// Active, profiled UEs ascending by id. eta is 0 when unknown.
std::vector<Item> collect_items(std::span<const UeProfile> profiles,
                                std::span<const UeEstimate> estimates) {
  std::vector<Item> items;
  for (const auto& est : estimates) {
    if (!est.active) continue;
    const UeProfile* prof = profile_for(profiles, est.ue_id);
    if (prof == nullptr) continue;
    items.push_back({est.ue_id, prof->gbr_mbps,
                     est.has_estimate ? est.eta_mbps_per_prb : 0.0,
                     prof->weight});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.ue_id < b.ue_id; });
  return items;
}

bool usable(const Item& it) { return it.eta > 0.0; }

}  // namespace

bool detect_contention(std::span<const UeEstimate> estimates,
                       std::span<const UeProfile> profiles, int capacity) {
  long demand = 0;
  for (const Item& it : collect_items(profiles, estimates)) {
    if (!usable(it)) continue;
    demand += required_prbs(it.sla, it.eta);
  }
  return demand > capacity;
}

PolicySolution solve_soft(std::span<const UeProfile> profiles,
                          std::span<const UeEstimate> estimates,
                          int capacity) {
  const std::vector<Item> items = collect_items(profiles, estimates);
  std::vector<int> prbs(items.size(), 0);

  auto residual = [&](std::size_t i) {
    return violation(items[i].sla, prbs[i] * items[i].eta);
  };

  for (int granted = 0; granted < capacity; ++granted) {
    std::size_t best = items.size();
    double best_gain = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!usable(items[i])) continue;
      const double gain = std::min(items[i].eta, residual(i));
      if (gain <= 0.0) continue;
      if (best == items.size() || approx_less(best_gain, gain)) {
        best = i;
        best_gain = gain;
        continue;
      }
      if (!approx_equal(gain, best_gain)) continue;
      // Equal gain: higher eta, then higher SLA; ids already ascend.
      const Item& a = items[i];
      const Item& b = items[best];
      if (approx_less(b.eta, a.eta) ||
          (approx_equal(a.eta, b.eta) && approx_less(b.sla, a.sla))) {
        best = i;
        best_gain = gain;
      }
    }
    if (best == items.size()) break;
    ++prbs[best];
  }

  PolicySolution sol;
  for (std::size_t i = 0; i < items.size(); ++i) {
    sol.entries.push_back({items[i].ue_id, prbs[i], residual(i),
                           usable(items[i])});
  }
  return sol;
}

PolicySolution solve_strict(std::span<const UeProfile> profiles,
                            std::span<const UeEstimate> estimates,
                            int capacity) {
  const std::vector<Item> items = collect_items(profiles, estimates);
  const std::size_t n = items.size();
  const int cap = std::max(capacity, 0);

  std::vector<int> cost(n, 0);
  std::vector<bool> candidate(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (!usable(items[i])) continue;
    cost[i] = required_prbs(items[i].sla, items[i].eta);
    candidate[i] = cost[i] <= cap;
  }

  // best[i][c]: optimum over items i..n-1 within capacity c, ordered by
  // larger weight then smaller cost.
  struct Cell {
    double weight = 0.0;
    int cost = 0;
  };
  auto better = [](const Cell& a, const Cell& b) {
    if (!approx_equal(a.weight, b.weight)) return a.weight > b.weight;
    return a.cost < b.cost;
  };
  auto same = [](const Cell& a, const Cell& b) {
    return approx_equal(a.weight, b.weight) && a.cost == b.cost;
  };
  std::vector<std::vector<Cell>> best(n + 1, std::vector<Cell>(cap + 1));
  for (std::size_t k = n; k-- > 0;) {
    for (int c = 0; c <= cap; ++c) {
      Cell skip = best[k + 1][c];
      best[k][c] = skip;
      if (!candidate[k] || cost[k] > c) continue;
      const Cell& rest = best[k + 1][c - cost[k]];
      Cell take{rest.weight + items[k].weight, rest.cost + cost[k]};
      if (better(take, skip)) best[k][c] = take;
    }
  }

  // Walk forward, taking each id whenever an optimum still exists with it;
  // that yields the lexicographically smallest optimal id set.
  std::vector<bool> selected(n, false);
  int c = cap;
  for (std::size_t k = 0; k < n; ++k) {
    if (!candidate[k] || cost[k] > c) continue;
    const Cell& rest = best[k + 1][c - cost[k]];
    Cell take{rest.weight + items[k].weight, rest.cost + cost[k]};
    if (same(take, best[k][c])) {
      selected[k] = true;
      c -= cost[k];
    }
  }

  std::vector<int> prbs(n, 0);
  int used = 0;
  std::vector<std::size_t> rest_ues;
  for (std::size_t i = 0; i < n; ++i) {
    if (selected[i]) {
      prbs[i] = cost[i];
      used += cost[i];
    } else {
      rest_ues.push_back(i);
    }
  }
  const int leftover = cap - used;
  if (!rest_ues.empty() && leftover > 0) {
    const int share = leftover / static_cast<int>(rest_ues.size());
    int extra = leftover % static_cast<int>(rest_ues.size());
    for (std::size_t i : rest_ues) {
      prbs[i] = share + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
    }
  }

  PolicySolution sol;
  for (std::size_t i = 0; i < n; ++i) {
    sol.entries.push_back({items[i].ue_id, prbs[i],
                           violation(items[i].sla, prbs[i] * items[i].eta),
                           static_cast<bool>(selected[i])});
  }
  return sol;
}

}  // namespace oranlab::sla
