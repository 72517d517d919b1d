#include "oranlab/mac_sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

namespace oranlab::mac {
namespace {

std::int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }

}  // namespace

void validate(const SimConfig& config) {
  validate(config.cell);
  if (config.pf_horizon_slots < 1) {
    throw DomainError("pf_horizon_slots must be >= 1");
  }
  std::set<UeId> ids;
  for (const auto& ue : config.ues) {
    if (!ids.insert(ue.ue_id).second) {
      throw DomainError("duplicate ue_id " + std::to_string(ue.ue_id));
    }
    if (ue.bits_per_prb_per_slot == 0) {
      throw DomainError("ue " + std::to_string(ue.ue_id) +
                        ": bits_per_prb_per_slot must be > 0");
    }
    double last_stop = -1.0;
    for (const auto& iv : ue.traffic) {
      if (!(iv.start_s >= 0.0) || !(iv.stop_s > iv.start_s)) {
        throw DomainError("ue " + std::to_string(ue.ue_id) +
                          ": traffic interval must satisfy 0 <= start < stop");
      }
      if (iv.start_s < last_stop) {
        throw DomainError("ue " + std::to_string(ue.ue_id) +
                          ": traffic intervals overlap or are unordered");
      }
      last_stop = iv.stop_s;
    }
  }
  std::uint64_t last_slot = 0;
  for (const auto& step : config.channel_steps) {
    if (step.slot_index < last_slot) {
      throw DomainError("channel steps must be sorted by slot_index");
    }
    if (!ids.contains(step.ue_id)) {
      throw DomainError("channel step names unknown ue " +
                        std::to_string(step.ue_id));
    }
    if (step.bits_per_prb_per_slot == 0) {
      throw DomainError("channel step bits must be > 0");
    }
    last_slot = step.slot_index;
  }
}

int TtiOutcome::total_prbs() const {
  int sum = 0;
  for (const auto& g : grants) sum += g.prbs;
  return sum;
}

const UeGrant* TtiOutcome::find(UeId ue) const {
  for (const auto& g : grants) {
    if (g.ue_id == ue) return &g;
  }
  return nullptr;
}

std::vector<int> pf_schedule(std::span<const PfCandidate> candidates,
                             int free_prbs, std::uint64_t slot_index) {
  std::vector<int> grants(candidates.size(), 0);
  if (candidates.empty() || free_prbs <= 0) return grants;

  std::vector<double> metric(candidates.size());
  double best = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    metric[i] = candidates[i].inst_rate_bps / candidates[i].ewma_bps;
    best = std::max(best, metric[i]);
  }
  std::vector<std::size_t> winners;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (approx_equal(metric[i], best)) winners.push_back(i);
  }

  const auto n = static_cast<std::uint64_t>(candidates.size());
  std::stable_sort(winners.begin(), winners.end(),
                   [&](std::size_t a, std::size_t b) {
                     const auto ka = (slot_index + candidates[a].ue_id) % n;
                     const auto kb = (slot_index + candidates[b].ue_id) % n;
                     if (ka != kb) return ka < kb;
                     return candidates[a].ue_id < candidates[b].ue_id;
                   });

  const int share = free_prbs / static_cast<int>(winners.size());
  int remainder = free_prbs % static_cast<int>(winners.size());
  for (std::size_t idx : winners) {
    grants[idx] = share + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
  }
  return grants;
}

double pf_ewma_update(double ewma, double served_bps, int horizon,
                      double floor) {
  const double alpha = 1.0 / horizon;
  return std::max(floor, (1.0 - alpha) * ewma + alpha * served_bps);
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
  validate(config_);
  for (const auto& ue : config_.ues) {
    UeState state;
    state.config = ue;
    state.bits_per_prb = ue.bits_per_prb_per_slot;
    state.ewma_bps = config_.pf_floor_bps;
    ues_.push_back(std::move(state));
  }
  std::sort(ues_.begin(), ues_.end(), [](const UeState& a, const UeState& b) {
    return a.config.ue_id < b.config.ue_id;
  });
}

Simulator::UeState* Simulator::find_ue(UeId ue) {
  for (auto& s : ues_) {
    if (s.config.ue_id == ue) return &s;
  }
  return nullptr;
}

const Simulator::UeState* Simulator::find_ue(UeId ue) const {
  for (const auto& s : ues_) {
    if (s.config.ue_id == ue) return &s;
  }
  return nullptr;
}

bool Simulator::is_active(UeId ue, std::uint64_t slot) const {
  const UeState* s = find_ue(ue);
  if (s == nullptr) return false;
  const std::int64_t t_us =
      static_cast<std::int64_t>(slot) * config_.cell.slot_duration_us;
  for (const auto& iv : s->config.traffic) {
    if (to_us(iv.start_s) <= t_us && t_us < to_us(iv.stop_s)) return true;
  }
  return false;
}

std::optional<std::uint32_t> Simulator::fixed_prbs(UeId ue) const {
  const UeState* s = find_ue(ue);
  return s ? s->fixed_prbs : std::nullopt;
}

double Simulator::ewma_bps(UeId ue) const {
  const UeState* s = find_ue(ue);
  return s ? s->ewma_bps : 0.0;
}

SpsAck Simulator::apply_sps_command(const SpsCommand& command) {
  SpsAck ack;
  std::set<UeId> seen;
  SpsCommand accepted;
  for (const auto& entry : command.entries) {
    if (!seen.insert(entry.ue_id).second) {
      ack.status = AckStatus::kRejected;
      ack.reason = "ue " + std::to_string(entry.ue_id) + " listed twice";
      ack.ignored.clear();
      return ack;
    }
    // The UE set is fixed at construction, so reading it here is safe.
    if (find_ue(entry.ue_id) == nullptr) {
      ack.ignored.push_back(entry.ue_id);
      continue;
    }
    accepted.entries.push_back(entry);
  }
  if (!accepted.entries.empty()) {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(std::move(accepted));
  }
  return ack;
}

void Simulator::drain_inbox() {
  std::vector<SpsCommand> pending;
  {
    std::lock_guard lock(inbox_mutex_);
    pending.swap(inbox_);
  }
  for (const auto& cmd : pending) {
    for (const auto& entry : cmd.entries) {
      if (UeState* s = find_ue(entry.ue_id)) s->fixed_prbs = entry.fixed_prbs;
    }
    if (apply_observer_) apply_observer_(slot_, cmd);
  }
}

void Simulator::apply_channel_steps() {
  while (next_step_ < config_.channel_steps.size() &&
         config_.channel_steps[next_step_].slot_index <= slot_) {
    const auto& step = config_.channel_steps[next_step_++];
    if (UeState* s = find_ue(step.ue_id)) {
      s->bits_per_prb = step.bits_per_prb_per_slot;
    }
  }
}

TtiOutcome Simulator::step_tti() {
  drain_inbox();
  apply_channel_steps();

  const int capacity = config_.cell.total_prbs;
  const double slot_s = config_.cell.slot_seconds();
  TtiOutcome outcome;
  outcome.slot_index = slot_;
  outcome.grants.reserve(ues_.size());

  std::vector<bool> active(ues_.size());
  std::vector<int> prbs(ues_.size(), 0);
  int remaining = capacity;

  // SPS grants first, ascending ue_id; truncate once capacity runs out.
  for (std::size_t i = 0; i < ues_.size(); ++i) {
    active[i] = is_active(ues_[i].config.ue_id, slot_);
    if (!active[i] || !ues_[i].fixed_prbs) continue;
    const auto want = static_cast<int>(
        std::min<std::uint32_t>(*ues_[i].fixed_prbs, capacity));
    if (want > remaining) ++sps_truncations_;
    prbs[i] = std::min(want, remaining);
    remaining -= prbs[i];
  }

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ues_.size(); ++i) {
    if (active[i] && !ues_[i].fixed_prbs) pool.push_back(i);
  }
  if (pool.empty() && config_.cell.leftover_mode == LeftoverMode::kPf) {
    for (std::size_t i = 0; i < ues_.size(); ++i) {
      if (active[i]) pool.push_back(i);
    }
  }
  if (!pool.empty() && remaining > 0) {
    std::vector<PfCandidate> candidates;
    candidates.reserve(pool.size());
    for (std::size_t i : pool) {
      candidates.push_back({ues_[i].config.ue_id, ues_[i].ewma_bps,
                            ues_[i].bits_per_prb / slot_s});
    }
    const auto pf = pf_schedule(candidates, remaining, slot_);
    for (std::size_t k = 0; k < pool.size(); ++k) prbs[pool[k]] += pf[k];
  }

  for (std::size_t i = 0; i < ues_.size(); ++i) {
    UeState& s = ues_[i];
    const std::uint64_t bits =
        active[i] ? std::uint64_t(prbs[i]) * s.bits_per_prb : 0;
    if (!active[i]) prbs[i] = 0;
    outcome.grants.push_back({s.config.ue_id, prbs[i], bits});
    s.ewma_bps = pf_ewma_update(s.ewma_bps, bits / slot_s,
                                config_.pf_horizon_slots,
                                config_.pf_floor_bps);
    s.window_prb_slots += static_cast<std::uint64_t>(prbs[i]);
    s.window_tbs_bits += bits;
  }
  assert(outcome.total_prbs() <= capacity);

  ++slot_;
  if ((slot_ - window_start_) >=
      static_cast<std::uint64_t>(config_.cell.slots_per_report())) {
    emit_report();
  }
  return outcome;
}

KpmReport Simulator::collect_report() {
  KpmReport report;
  report.period_ms = static_cast<std::uint32_t>(
      (slot_ - window_start_) * config_.cell.slot_duration_us / 1000);
  for (auto& s : ues_) {
    report.records.push_back(
        {s.config.ue_id, static_cast<std::uint32_t>(s.window_prb_slots),
         s.window_tbs_bits});
    s.window_prb_slots = 0;
    s.window_tbs_bits = 0;
  }
  window_start_ = slot_;
  return report;
}

void Simulator::emit_report() {
  KpmReport report = collect_report();
  if (report_observer_) report_observer_(report);
  {
    std::lock_guard lock(outbox_mutex_);
    outbox_.push_back(std::move(report));
  }
  reports_emitted_.fetch_add(1);
}

std::optional<KpmReport> Simulator::pop_report() {
  std::lock_guard lock(outbox_mutex_);
  if (outbox_.empty()) return std::nullopt;
  KpmReport r = std::move(outbox_.front());
  outbox_.pop_front();
  return r;
}

RunStats Simulator::run(RunMode mode, Micros duration, double speed,
                        const std::function<void(const TtiOutcome&)>& on_slot,
                        const std::atomic<bool>* stop) {
  RunStats stats;
  const auto slot_us = config_.cell.slot_duration_us;
  const auto total = static_cast<std::uint64_t>(duration.count() / slot_us);
  if (mode == RunMode::kDeterministic) {
    for (std::uint64_t i = 0; i < total; ++i) {
      if (stop && stop->load()) break;
      auto outcome = step_tti();
      if (on_slot) on_slot(outcome);
      ++stats.slots;
    }
    return stats;
  }

  using Clock = std::chrono::steady_clock;
  const auto wall_per_slot = std::chrono::duration<double, std::micro>(
      slot_us / std::max(speed, 1e-6));
  const auto report_wall =
      wall_per_slot * config_.cell.slots_per_report();
  const auto start = Clock::now();
  bool behind = false;
  for (std::uint64_t i = 0; i < total; ++i) {
    if (stop && stop->load()) break;
    const auto due =
        start + std::chrono::duration_cast<Clock::duration>(wall_per_slot * i);
    const auto now = Clock::now();
    if (now < due) {
      std::this_thread::sleep_until(due);
      behind = false;
    } else if (now - due > report_wall) {
      // Keep going without skipping slots, so no window is lost.
      if (!behind) {
        ++stats.late_warnings;
        spdlog::warn("slot loop is {} ms behind wall clock",
                     std::chrono::duration_cast<std::chrono::milliseconds>(
                         now - due)
                         .count());
      }
      behind = true;
    }
    auto outcome = step_tti();
    if (on_slot) on_slot(outcome);
    ++stats.slots;
  }
  return stats;
}

}  // namespace oranlab::mac
