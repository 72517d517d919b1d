#include "oranlab/sla_xapp.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace oranlab::sla {

SlaXapp::SlaXapp(sdk::XappHandle& handle, SlaXappConfig config)
    : handle_(handle), config_(std::move(config)) {
  // The scheduler starts with every UE on dynamic scheduling.
  Allocation initial;
  for (const auto& p : config_.profiles) initial[p.ue_id] = std::nullopt;
  in_force_ = std::move(initial);
}

void SlaXapp::ensure_subscription() {
  if (subscription_) return;
  const auto ids = handle_.get_gnb_id_list();
  if (ids.empty()) return;
  GnbId target = config_.gnb_id == 0 ? ids.front() : config_.gnb_id;
  if (std::find(ids.begin(), ids.end(), target) == ids.end()) return;
  try {
    subscription_ = handle_.e2ap_subscribe(target, config_.period_ms);
    gnb_ = target;
    sub_active_ = false;
  } catch (const ric::RicError& err) {
    spdlog::warn("sla xapp: subscribe to gNB {} failed: {}", target,
                 err.what());
  }
}

void SlaXapp::on_report(const KpmReport& report) {
  const EstimatorState before = estimates_;
  estimates_ = update_estimates(estimates_, report, config_.cell);
  // A UE we parked at zero PRBs shows no traffic, but it has not left.
  if (in_force_) {
    for (auto& [id, est] : estimates_.ues) {
      auto grant = in_force_->find(id);
      auto prev = before.ues.find(id);
      if (grant != in_force_->end() && grant->second == 0u &&
          prev != before.ues.end() && prev->second.active) {
        est.active = true;
      }
    }
  }
  fresh_window_ = true;
}

SlaXapp::Allocation SlaXapp::plan(bool contention,
                                  DecisionRecord& record) const {
  Allocation alloc;
  for (const auto& p : config_.profiles) alloc[p.ue_id] = std::nullopt;
  if (config_.policy == PolicyKind::kBaseline) return alloc;

  const auto list = estimate_list(estimates_);
  PolicySolution sol;
  if (contention) {
    sol = config_.policy == PolicyKind::kSoft
              ? solve_soft(config_.profiles, list, config_.cell.total_prbs)
              : solve_strict(config_.profiles, list, config_.cell.total_prbs);
  } else {
    for (const auto& est : list) {
      if (!est.active || !est.has_estimate || !(est.eta_mbps_per_prb > 0.0)) {
        continue;
      }
      auto prof = std::find_if(
          config_.profiles.begin(), config_.profiles.end(),
          [&](const UeProfile& p) { return p.ue_id == est.ue_id; });
      if (prof == config_.profiles.end()) continue;
      const int p = required_prbs(prof->gbr_mbps, est.eta_mbps_per_prb);
      sol.entries.push_back({est.ue_id, p,
                             violation(prof->gbr_mbps,
                                       p * est.eta_mbps_per_prb),
                             true});
    }
  }
  for (const auto& e : sol.entries) {
    if (!alloc.contains(e.ue_id)) continue;
    alloc[e.ue_id] = static_cast<std::uint32_t>(e.prbs);
  }
  record.entries = std::move(sol.entries);
  return alloc;
}

void SlaXapp::decide(Micros now) {
  const auto list = estimate_list(estimates_);
  const bool contention =
      detect_contention(list, config_.profiles, config_.cell.total_prbs);
  contention_.store(contention);

  DecisionRecord record;
  record.time = now;
  record.policy = config_.policy;
  record.contention = contention;
  Allocation alloc = plan(contention, record);

  if (!in_force_ || *in_force_ != alloc) {
    SpsCommand cmd;
    for (const auto& [id, prbs] : alloc) cmd.entries.push_back({id, prbs});
    try {
      pending_token_ = handle_.e2ap_control_request(gnb_, cmd);
      in_force_ = alloc;
      record.issued = true;
      ++counters_.commands_issued;
      if (issue_observer_) issue_observer_(now, cmd);
    } catch (const ric::RicError& err) {
      spdlog::warn("sla xapp: control to gNB {} failed: {}", gnb_,
                   err.what());
    }
  }
  spdlog::debug("sla xapp: t={}us policy={} contention={} issued={}",
                now.count(), policy_name(record.policy), record.contention,
                record.issued);
  decisions_.push_back(std::move(record));
}

bool SlaXapp::control_step(Micros now) {
  bool worked = false;
  ensure_subscription();

  while (auto msg = handle_.get_queued_rx_msg()) {
    worked = true;
    if (const auto* ind = std::get_if<ric::IndicationMsg>(&*msg)) {
      if (!subscription_ || ind->subscription_id != *subscription_) continue;
      ++counters_.indications;
      last_indication_ = now;
      stale_logged_ = false;
      try {
        auto payload = e2::decode_sm_payload(ind->sm_payload);
        if (const auto* rep = std::get_if<KpmReport>(&payload)) {
          on_report(*rep);
        }
      } catch (const e2::CodecError& err) {
        spdlog::warn("sla xapp: undecodable indication: {}", err.what());
      }
    } else if (const auto* ack = std::get_if<ric::ControlAckMsg>(&*msg)) {
      if (ack->ok()) {
        ++counters_.acks_ok;
      } else {
        ++counters_.acks_failed;
        spdlog::warn("sla xapp: control {} failed (cause {}, timeout {})",
                     ack->token, static_cast<int>(ack->cause),
                     ack->timed_out);
        // Forget what we believe is in force so the next cycle re-sends.
        if (pending_token_ && *pending_token_ == ack->token) in_force_.reset();
      }
      if (pending_token_ && *pending_token_ == ack->token) {
        pending_token_.reset();
      }
    } else if (const auto* sub = std::get_if<ric::SubscriptionMsg>(&*msg)) {
      if (!subscription_ || sub->subscription_id != *subscription_) continue;
      if (sub->state == ric::SubscriptionState::kActive) {
        sub_active_ = true;
      } else {
        spdlog::warn("sla xapp: subscription {} ended (state {})",
                     sub->subscription_id, static_cast<int>(sub->state));
        subscription_.reset();
        sub_active_ = false;
      }
    }
  }

  if (fresh_window_) {
    fresh_window_ = false;
    decide(now);
    return true;
  }

  const auto limit =
      std::chrono::milliseconds(config_.period_ms) * config_.stale_periods;
  if (last_indication_ && now - *last_indication_ > limit && !stale_logged_) {
    stale_logged_ = true;
    ++counters_.stale_holds;
    spdlog::warn("sla xapp: no telemetry for {} ms, holding allocation",
                 std::chrono::duration_cast<std::chrono::milliseconds>(
                     now - *last_indication_)
                     .count());
  }
  return worked;
}

}  // namespace oranlab::sla
