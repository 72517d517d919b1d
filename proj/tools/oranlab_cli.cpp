// Command-line front end.
//
//   oranlab run      --config PATH [--policy P] [--mode det|live] [--speed K]
//                    [--out DIR] [--paper-timeline]
//   oranlab plotdata --trace PATH --out DIR
//   oranlab ric      --listen HOST:PORT [--config PATH --policy P]
//   oranlab gnb      --connect HOST:PORT --config PATH [--speed K]
//
// Exit codes: 0 ok, 2 configuration error, 3 runtime failure.

#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "oranlab/e2_agent.hpp"
#include "oranlab/ric.hpp"
#include "oranlab/scenario.hpp"
#include "oranlab/sla_xapp.hpp"
#include "oranlab/transport.hpp"
#include "oranlab/xapp_sdk.hpp"

namespace {

using namespace oranlab;
using Clock = std::chrono::steady_clock;
using Micros = std::chrono::microseconds;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

struct RunArgs {
  std::string config;
  std::string policy;
  std::string mode;
  double speed = 0.0;
  std::string out;
  bool paper_timeline = false;
};

scenario::ScenarioConfig load_with_overrides(const RunArgs& a) {
  auto cfg = scenario::load_scenario(a.config);
  try {
    if (!a.policy.empty()) cfg.policy = sla::parse_policy(a.policy);
    if (!a.mode.empty()) cfg.mode = scenario::parse_mode(a.mode);
  } catch (const DomainError& err) {
    throw scenario::ConfigError(a.policy.empty() ? "--mode" : "--policy/--mode",
                                err.what());
  }
  if (a.speed > 0.0) cfg.speed = a.speed;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.paper_timeline) cfg = scenario::with_paper_timeline(std::move(cfg));
  scenario::validate(cfg);
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const auto cfg = load_with_overrides(a);
  const auto result = scenario::run_experiment(cfg);
  scenario::write_outputs(result, cfg.out_dir);
  const auto& s = result.summary;
  std::cout << "policy " << s.policy << ", " << s.windows << " windows, "
            << s.commands << " commands, total violation "
            << s.total_violation_mbps << " Mbps (steady "
            << s.steady_total_violation_mbps << ")\n";
  for (const auto& u : s.ues) {
    std::cout << "  UE" << u.ue_id << ": steady throughput "
              << u.steady_throughput_mbps << " Mbps, violation "
              << u.steady_violation_mbps << " Mbps\n";
  }
  std::cout << "wrote " << cfg.out_dir << "/trace.csv and summary.json\n";
  return 0;
}

int cmd_plotdata(const std::string& trace, const std::string& out) {
  const auto files = scenario::emit_plotdata(trace, out);
  for (const auto& f : files) std::cout << f.string() << "\n";
  return 0;
}

Micros since(Clock::time_point t0) {
  return std::chrono::duration_cast<Micros>(Clock::now() - t0);
}

int cmd_ric(const std::string& listen, const std::string& config,
            const std::string& policy) {
  std::optional<scenario::ScenarioConfig> cfg;
  if (!config.empty()) {
    RunArgs a;
    a.config = config;
    a.policy = policy;
    cfg = load_with_overrides(a);
  }

  ric::Ric ric;
  transport::TcpListener listener(transport::parse_endpoint(listen));
  spdlog::info("ric: listening on port {}", listener.port());

  std::optional<sdk::XappHandle> handle;
  std::optional<sla::SlaXapp> xapp;
  if (cfg) {
    handle.emplace(ric, "sla");
    sla::SlaXappConfig x;
    x.policy = cfg->policy;
    x.profiles = scenario::profiles(*cfg);
    x.cell = cfg->cell;
    x.gnb_id = cfg->gnb_id;
    x.period_ms = static_cast<std::uint32_t>(cfg->cell.report_period_ms);
    xapp.emplace(*handle, x);
    spdlog::info("ric: hosting SLA xApp, policy {}", sla::policy_name(x.policy));
  }

  const auto t0 = Clock::now();
  while (!g_interrupted.load()) {
    bool worked = false;
    while (auto s = listener.accept()) {
      ric.attach(std::move(s));
      worked = true;
    }
    worked |= ric.poll(since(t0));
    if (xapp) worked |= xapp->control_step(since(t0));
    if (!worked) std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  spdlog::info("ric: shutting down");
  return 0;
}

int cmd_gnb(const std::string& connect, const RunArgs& a) {
  const auto cfg = load_with_overrides(a);
  const auto ric_at = transport::parse_endpoint(connect);

  mac::Simulator sim(scenario::to_sim_config(cfg));
  auto [sm_udp, agent_udp] = transport::make_udp_pair();
  agent::SmTask sm(sim, *sm_udp);
  agent::AgentConfig ac;
  ac.gnb_id = cfg.gnb_id;
  ac.report_period = std::chrono::milliseconds(cfg.cell.report_period_ms);
  agent::E2Termination term(
      ac, [ric_at]() { return transport::tcp_connect(ric_at); }, *agent_udp);

  std::atomic<bool> stop{false};
  const auto t0 = Clock::now();
  std::thread agent_thread([&] {
    while (!stop.load()) {
      bool worked = term.poll(since(t0));
      worked |= sm.poll();
      if (!worked) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    term.shutdown();
  });

  std::atomic<bool> sim_stop{false};
  std::thread watcher([&] {
    while (!stop.load()) {
      if (g_interrupted.load()) sim_stop.store(true);
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  });
  const auto stats =
      sim.run(mac::RunMode::kLive, Micros(std::llround(cfg.duration_s * 1e6)),
              cfg.speed, {}, &sim_stop);
  std::this_thread::sleep_for(
      std::chrono::milliseconds(2 * cfg.cell.report_period_ms));
  stop.store(true);
  agent_thread.join();
  watcher.join();

  std::cout << "gnb " << cfg.gnb_id << ": " << stats.slots << " slots, "
            << sim.reports_emitted() << " reports, "
            << term.counters().indications_sent << " indications, "
            << sm.commands_applied() << " commands applied\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop RAN slicing lab"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level,
                 "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("--config", run_args.config, "Scenario JSON")->required();
  run->add_option("--policy", run_args.policy, "soft, strict or baseline");
  run->add_option("--mode", run_args.mode, "det or live");
  run->add_option("--speed", run_args.speed, "Live pacing factor");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_flag("--paper-timeline", run_args.paper_timeline,
                "Use the long timeline stored in the scenario");

  std::string trace_path;
  std::string plot_out;
  auto* plot = app.add_subcommand("plotdata", "Turn a trace into plot files");
  plot->add_option("--trace", trace_path, "Trace CSV")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  std::string listen = "127.0.0.1:36421";
  std::string ric_config;
  std::string ric_policy;
  auto* ric_cmd = app.add_subcommand("ric", "Run a standalone RIC");
  ric_cmd->add_option("--listen", listen, "HOST:PORT for agent connections");
  ric_cmd->add_option("--config", ric_config,
                      "Scenario JSON; hosts the SLA xApp when given");
  ric_cmd->add_option("--policy", ric_policy, "soft, strict or baseline");

  std::string connect = "127.0.0.1:36421";
  RunArgs gnb_args;
  auto* gnb = app.add_subcommand("gnb", "Run a simulated gNB with its agent");
  gnb->add_option("--connect", connect, "RIC HOST:PORT");
  gnb->add_option("--config", gnb_args.config, "Scenario JSON")->required();
  gnb->add_option("--speed", gnb_args.speed, "Pacing factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*run) return cmd_run(run_args);
    if (*plot) return cmd_plotdata(trace_path, plot_out);
    if (*ric_cmd) return cmd_ric(listen, ric_config, ric_policy);
    if (*gnb) return cmd_gnb(connect, gnb_args);
  } catch (const scenario::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
