#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "oranlab/scenario.hpp"

namespace oranlab::scenario {

std::string format_trace(const std::vector<TraceRow>& rows) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const TraceRow& r : rows) {
    const std::string viol =
        r.violation_mbps ? fmt::format("{:.6f}", *r.violation_mbps) : "";
    out += fmt::format("{:.3f},{},{:.6f},{:.6f},{},{},{}\n", r.time_s,
                       r.ue_id, r.throughput_mbps, r.prbs_avg, viol, r.policy,
                       r.contention ? 1 : 0);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double to_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError("trace line " + std::to_string(line_no) +
                      ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<TraceRow> parse_trace(const std::string& csv) {
  std::vector<TraceRow> rows;
  std::istringstream in(csv);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kTraceHeader) throw DomainError("trace: unexpected header");
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != 7) {
      throw DomainError("trace line " + std::to_string(line_no) +
                        ": expected 7 columns");
    }
    TraceRow r;
    r.time_s = to_double(cells[0], line_no);
    r.ue_id = static_cast<UeId>(to_double(cells[1], line_no));
    r.throughput_mbps = to_double(cells[2], line_no);
    r.prbs_avg = to_double(cells[3], line_no);
    if (!cells[4].empty()) r.violation_mbps = to_double(cells[4], line_no);
    r.policy = cells[5];
    r.contention = cells[6] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

const UeSummary* RunSummary::find(UeId ue) const {
  for (const auto& u : ues) {
    if (u.ue_id == ue) return &u;
  }
  return nullptr;
}

RunSummary summarize(const std::vector<TraceRow>& rows, double duration_s,
                     double steady_s, double report_period_s) {
  struct Acc {
    std::size_t n = 0;
    double thr = 0.0;
    double viol = 0.0;
    std::size_t steady_n = 0;
    double steady_thr = 0.0;
    double steady_viol = 0.0;
  };
  std::map<UeId, Acc> acc;
  std::set<double> windows;
  std::set<double> contended;
  // Window end times are printed with millisecond precision.
  const double steady_from = duration_s - steady_s + 5e-4;

  RunSummary s;
  s.duration_s = duration_s;
  s.steady_s = steady_s;
  for (const TraceRow& r : rows) {
    if (s.policy.empty()) s.policy = r.policy;
    windows.insert(r.time_s);
    if (r.contention) contended.insert(r.time_s);
    Acc& a = acc[r.ue_id];
    if (!r.violation_mbps) continue;
    ++a.n;
    a.thr += r.throughput_mbps;
    a.viol += *r.violation_mbps;
    if (r.time_s >= steady_from) {
      ++a.steady_n;
      a.steady_thr += r.throughput_mbps;
      a.steady_viol += *r.violation_mbps;
    }
  }
  for (const auto& [id, a] : acc) {
    UeSummary u;
    u.ue_id = id;
    u.active_windows = a.n;
    if (a.n > 0) {
      u.mean_throughput_mbps = a.thr / a.n;
      u.mean_violation_mbps = a.viol / a.n;
    }
    if (a.steady_n > 0) {
      u.steady_throughput_mbps = a.steady_thr / a.steady_n;
      u.steady_violation_mbps = a.steady_viol / a.steady_n;
    }
    s.total_violation_mbps += u.mean_violation_mbps;
    s.steady_total_violation_mbps += u.steady_violation_mbps;
    s.ues.push_back(u);
  }
  s.windows = windows.size();
  s.contention_s = contended.size() * report_period_s;
  return s;
}

nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json ues = nlohmann::json::array();
  for (const UeSummary& u : s.ues) {
    ues.push_back({{"ue_id", u.ue_id},
                   {"active_windows", u.active_windows},
                   {"mean_throughput_mbps", u.mean_throughput_mbps},
                   {"mean_violation_mbps", u.mean_violation_mbps},
                   {"steady_throughput_mbps", u.steady_throughput_mbps},
                   {"steady_violation_mbps", u.steady_violation_mbps}});
  }
  return {{"schema", 1},
          {"policy", s.policy},
          {"mode", s.mode},
          {"duration_s", s.duration_s},
          {"windows", s.windows},
          {"commands", s.commands},
          {"contention_s", s.contention_s},
          {"total_violation_mbps", s.total_violation_mbps},
          {"steady_state",
           {{"window_s", s.steady_s},
            {"total_violation_mbps", s.steady_total_violation_mbps}}},
          {"ues", ues}};
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "trace.csv", std::ios::binary);
    out << result.trace_csv;
    if (!out) throw std::runtime_error("cannot write " + (dir / "trace.csv").string());
  }
  std::ofstream out(dir / "summary.json", std::ios::binary);
  out << to_json(result.summary).dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
}

std::vector<std::filesystem::path> emit_plotdata(
    const std::filesystem::path& trace, const std::filesystem::path& out_dir) {
  std::ifstream in(trace, std::ios::binary);
  if (!in) throw DomainError("cannot read " + trace.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto rows = parse_trace(buf.str());

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  std::map<UeId, std::vector<const TraceRow*>> by_ue;
  double end = 0.0;
  for (const TraceRow& r : rows) {
    by_ue[r.ue_id].push_back(&r);
    end = std::max(end, r.time_s);
  }
  for (const auto& [id, series] : by_ue) {
    const auto path = out_dir / fmt::format("ue_{}.dat", id);
    std::ofstream out(path);
    out << "# time_s throughput_mbps prbs_avg violation_mbps\n";
    for (const TraceRow* r : series) {
      out << fmt::format("{:.3f} {:.6f} {:.6f} {}\n", r->time_s,
                         r->throughput_mbps, r->prbs_avg,
                         r->violation_mbps
                             ? fmt::format("{:.6f}", *r->violation_mbps)
                             : std::string("NaN"));
    }
    written.push_back(path);
  }

  // Same aggregation as the run summary, so the bars add up to its total.
  const RunSummary s = summarize(rows, end, end, 0.0);
  const auto bars = out_dir / "bars.dat";
  std::ofstream out(bars);
  out << "# ue_id mean_violation_mbps\n";
  for (const UeSummary& u : s.ues) {
    out << fmt::format("{} {:.17g}\n", u.ue_id, u.mean_violation_mbps);
  }
  if (!s.ues.empty()) {
    out << fmt::format("total {:.17g}\n", s.total_violation_mbps);
  }
  written.push_back(bars);
  return written;
}

}  // namespace oranlab::scenario
