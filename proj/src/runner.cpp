#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "oranlab/e2_agent.hpp"
#include "oranlab/ric.hpp"
#include "oranlab/scenario.hpp"
#include "oranlab/transport.hpp"
#include "oranlab/xapp_sdk.hpp"

namespace oranlab::scenario {

namespace {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

sla::SlaXappConfig xapp_config(const ScenarioConfig& cfg) {
  sla::SlaXappConfig x;
  x.policy = cfg.policy;
  x.profiles = profiles(cfg);
  x.cell = cfg.cell;
  x.gnb_id = cfg.gnb_id;
  x.period_ms = static_cast<std::uint32_t>(cfg.cell.report_period_ms);
  return x;
}

agent::AgentConfig agent_config(const ScenarioConfig& cfg) {
  agent::AgentConfig a;
  a.gnb_id = cfg.gnb_id;
  a.report_period = milliseconds(cfg.cell.report_period_ms);
  return a;
}

// Turns each emitted report into trace rows. Runs on the slot-loop thread.
class TraceRecorder {
 public:
  TraceRecorder(const ScenarioConfig& cfg, const mac::Simulator& sim,
                const sla::SlaXapp& xapp)
      : cfg_(cfg), sim_(sim), xapp_(xapp),
        policy_(sla::policy_name(cfg.policy)) {
    for (const UeSpec& ue : cfg.ues) gbr_[ue.profile.ue_id] = ue.profile.gbr_mbps;
  }

  void on_report(const KpmReport& report) {
    const auto slot_us = static_cast<std::uint64_t>(cfg_.cell.slot_duration_us);
    const std::uint64_t end_slot = sim_.slot_index();
    const std::uint64_t start_slot =
        end_slot - std::uint64_t(report.period_ms) * 1000 / slot_us;
    const double period_s = report.period_ms / 1000.0;
    const double time_s = static_cast<double>(end_slot * slot_us / 1000) / 1000.0;
    const double slots = static_cast<double>(end_slot - start_slot);
    const bool contention = xapp_.last_contention();
    for (const KpmRecord& rec : report.records) {
      TraceRow row;
      row.time_s = time_s;
      row.ue_id = rec.ue_id;
      row.throughput_mbps = static_cast<double>(rec.tbs_bits) / period_s / 1e6;
      row.prbs_avg = slots > 0 ? rec.prb_slots / slots : 0.0;
      if (sim_.is_active(rec.ue_id, start_slot)) {
        auto it = gbr_.find(rec.ue_id);
        const double gbr = it == gbr_.end() ? 0.0 : it->second;
        row.violation_mbps = violation(gbr, row.throughput_mbps);
      }
      row.policy = policy_;
      row.contention = contention;
      rows_.push_back(std::move(row));
    }
  }

  std::vector<TraceRow> take() { return std::move(rows_); }

 private:
  const ScenarioConfig& cfg_;
  const mac::Simulator& sim_;
  const sla::SlaXapp& xapp_;
  std::string policy_;
  std::map<UeId, double> gbr_;
  std::vector<TraceRow> rows_;
};

void finish(RunResult& result, const ScenarioConfig& cfg,
            std::vector<TraceRow> rows, const sla::SlaXapp& xapp) {
  // The summary is computed from the serialized trace so that it agrees with
  // whatever is later derived from the file.
  result.trace_csv = format_trace(rows);
  result.rows = parse_trace(result.trace_csv);
  result.summary = summarize(result.rows, cfg.duration_s, cfg.steady_state_s,
                             cfg.cell.report_period_ms / 1000.0);
  result.summary.policy = sla::policy_name(cfg.policy);
  result.summary.mode = mode_name(cfg.mode);
  result.summary.commands = xapp.counters().commands_issued;
  result.decisions = xapp.decisions();
}

RunResult run_deterministic(const ScenarioConfig& cfg) {
  mac::Simulator sim(to_sim_config(cfg));
  auto [sm_side, agent_side] = transport::make_datagram_pair();
  agent::SmTask sm(sim, *sm_side);
  ric::Ric ric;
  agent::E2Termination term(
      agent_config(cfg),
      [&ric]() -> transport::StreamPtr {
        auto [agent_end, ric_end] = transport::make_stream_pair();
        ric.attach(std::move(ric_end));
        return std::move(agent_end);
      },
      *agent_side);
  sdk::XappHandle handle(ric, "sla");
  sla::SlaXapp xapp(handle, xapp_config(cfg));
  TraceRecorder trace(cfg, sim, xapp);
  sim.set_report_observer([&](const KpmReport& r) { trace.on_report(r); });

  auto settle = [&](Micros now) {
    for (int round = 0; round < 1000; ++round) {
      bool worked = false;
      worked |= sm.poll();
      worked |= term.poll(now);
      worked |= ric.poll(now);
      worked |= xapp.control_step(now);
      worked |= ric.poll(now);
      worked |= term.poll(now);
      worked |= sm.poll();
      if (!worked) return;
    }
    throw RuntimeFailure("fused loop did not settle");
  };

  settle(Micros{0});
  if (!xapp.subscribed()) {
    throw RuntimeFailure("xApp subscription did not complete at start-up");
  }

  const auto total_slots = static_cast<std::uint64_t>(
      std::llround(cfg.duration_s * 1e6 / cfg.cell.slot_duration_us));
  std::uint64_t seen_reports = 0;
  for (std::uint64_t i = 0; i < total_slots; ++i) {
    sim.step_tti();
    if (sim.reports_emitted() != seen_reports) {
      seen_reports = sim.reports_emitted();
      settle(sim.now());
    }
  }

  RunResult result;
  finish(result, cfg, trace.take(), xapp);
  result.live.reports_emitted = sim.reports_emitted();
  result.live.uplinks_sent = sm.uplinks_sent();
  result.live.uplinks_received = term.counters().uplinks_received;
  result.live.uplinks_while_subscribed =
      term.counters().uplinks_while_subscribed;
  result.live.indications_sent = term.counters().indications_sent;
  result.live.indications_routed = ric.counters().indications_routed;
  result.live.xapp_indications = xapp.counters().indications;
  result.live.sessions_established = term.counters().sessions_established;
  return result;
}

// Runs `step` until `stop`, backing off briefly whenever it reports no work.
template <typename Step>
std::thread spin(std::atomic<bool>& stop, Step step) {
  return std::thread([&stop, step]() mutable {
    while (!stop.load()) {
      if (!step()) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  });
}

RunResult run_live(const ScenarioConfig& cfg) {
  const auto t0 = Clock::now();
  auto now = [t0]() {
    return std::chrono::duration_cast<Micros>(Clock::now() - t0);
  };

  mac::Simulator sim(to_sim_config(cfg));
  transport::TcpListener listener(transport::Endpoint{"127.0.0.1", 0});
  const transport::Endpoint ric_at{"127.0.0.1", listener.port()};
  auto [sm_udp, agent_udp] = transport::make_udp_pair();
  agent::SmTask sm(sim, *sm_udp);
  ric::Ric ric;
  agent::E2Termination term(
      agent_config(cfg), [ric_at]() { return transport::tcp_connect(ric_at); },
      *agent_udp);
  sdk::XappHandle handle(ric, "sla");
  sla::SlaXapp xapp(handle, xapp_config(cfg));
  TraceRecorder trace(cfg, sim, xapp);
  sim.set_report_observer([&](const KpmReport& r) { trace.on_report(r); });

  std::mutex metrics_mutex;
  LiveMetrics metrics;
  sim.set_apply_observer([&](std::uint64_t, const SpsCommand& cmd) {
    std::lock_guard lock(metrics_mutex);
    metrics.applied.emplace_back(now(), cmd);
  });
  xapp.set_issue_observer([&](Micros, const SpsCommand& cmd) {
    std::lock_guard lock(metrics_mutex);
    metrics.issued.emplace_back(now(), cmd);
  });

  std::atomic<bool> stop{false};
  std::vector<std::thread> threads;
  threads.push_back(spin(stop, [&] {
    bool worked = false;
    while (auto s = listener.accept()) {
      ric.attach(std::move(s));
      worked = true;
    }
    return ric.poll(now()) || worked;
  }));
  threads.push_back(spin(stop, [&] { return term.poll(now()); }));
  threads.push_back(spin(stop, [&] { return sm.poll(); }));
  threads.push_back(spin(stop, [&] { return xapp.control_step(now()); }));

  auto stop_all = [&] {
    if (stop.exchange(true)) return;
    for (auto& t : threads) t.join();
    term.shutdown();
  };
  // Joins the workers even when something below throws.
  struct Guard {
    std::function<void()> fn;
    ~Guard() { fn(); }
  } guard{stop_all};

  const auto deadline = Clock::now() + std::chrono::seconds(5);
  while (!xapp.subscribed() && Clock::now() < deadline) {
    std::this_thread::sleep_for(milliseconds(5));
  }
  if (!xapp.subscribed()) {
    throw RuntimeFailure("xApp subscription did not complete within 5 s");
  }

  spdlog::info("live run: {} s at x{} pacing, RIC on port {}", cfg.duration_s,
               cfg.speed, ric_at.port);
  const auto duration = Micros(std::llround(cfg.duration_s * 1e6));
  mac::RunStats stats;
  std::thread sim_thread(
      [&] { stats = sim.run(mac::RunMode::kLive, duration, cfg.speed); });
  sim_thread.join();

  // Let the last window travel through the loop before tearing down.
  std::this_thread::sleep_for(milliseconds(3 * cfg.cell.report_period_ms));
  stop_all();

  RunResult result;
  finish(result, cfg, trace.take(), xapp);
  for (const auto& d : result.decisions) metrics.control_times.push_back(d.time);
  metrics.reports_emitted = sim.reports_emitted();
  metrics.uplinks_sent = sm.uplinks_sent();
  metrics.uplinks_received = term.counters().uplinks_received;
  metrics.uplinks_while_subscribed = term.counters().uplinks_while_subscribed;
  metrics.indications_sent = term.counters().indications_sent;
  metrics.indications_routed = ric.counters().indications_routed;
  metrics.xapp_indications = xapp.counters().indications;
  metrics.late_warnings = stats.late_warnings;
  metrics.sessions_established = term.counters().sessions_established;
  result.live = std::move(metrics);
  return result;
}

}  // namespace

RunResult run_experiment(const ScenarioConfig& config) {
  validate(config);
  return config.mode == Mode::kLive ? run_live(config)
                                    : run_deterministic(config);
}

}  // namespace oranlab::scenario
