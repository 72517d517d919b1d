#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "oranlab/scenario.hpp"

namespace oranlab::scenario {

using nlohmann::json;

std::string mode_name(Mode mode) {
  return mode == Mode::kLive ? "live" : "det";
}

Mode parse_mode(const std::string& text) {
  if (text == "det") return Mode::kDeterministic;
  if (text == "live") return Mode::kLive;
  throw DomainError("unknown mode '" + text + "' (valid: det, live)");
}

namespace {

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return key == k; });
    if (!ok) throw ConfigError(path + "." + key, "unknown field");
  }
}

const json* field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& obj, const char* key, const std::string& path,
              double fallback) {
  const json* v = field(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) throw ConfigError(path + "." + key, "expected a number");
  return v->get<double>();
}

long integer(const json& obj, const char* key, const std::string& path,
             long fallback) {
  const json* v = field(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) {
    throw ConfigError(path + "." + key, "expected an integer");
  }
  return v->get<long>();
}

std::string text(const json& obj, const char* key, const std::string& path,
                 const std::string& fallback) {
  const json* v = field(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw ConfigError(path + "." + key, "expected a string");
  return v->get<std::string>();
}

const json& object_at(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  return v;
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  return v;
}

CellConfig parse_cell(const json& j, const std::string& path) {
  object_at(j, path);
  reject_unknown_keys(j, path, {"total_prbs", "slot_duration_us",
                                "report_period_ms", "leftover_mode"});
  CellConfig cell;
  cell.total_prbs = static_cast<int>(integer(j, "total_prbs", path, 65));
  cell.slot_duration_us =
      static_cast<int>(integer(j, "slot_duration_us", path, 500));
  cell.report_period_ms =
      static_cast<int>(integer(j, "report_period_ms", path, 100));
  const std::string mode = text(j, "leftover_mode", path, "cap");
  if (mode == "cap") {
    cell.leftover_mode = LeftoverMode::kCap;
  } else if (mode == "pf") {
    cell.leftover_mode = LeftoverMode::kPf;
  } else {
    throw ConfigError(path + ".leftover_mode",
                      "unknown value '" + mode + "' (valid: cap, pf)");
  }
  return cell;
}

UeSpec parse_ue(const json& j, const std::string& path) {
  object_at(j, path);
  reject_unknown_keys(j, path, {"ue_id", "gbr_mbps", "weight",
                                "bits_per_prb_per_slot", "traffic", "channel"});
  if (field(j, "ue_id") == nullptr) throw ConfigError(path + ".ue_id", "missing");
  if (field(j, "gbr_mbps") == nullptr) {
    throw ConfigError(path + ".gbr_mbps", "missing");
  }
  UeSpec ue;
  const long id = integer(j, "ue_id", path, 0);
  if (id <= 0 || id > 0xFFFF) {
    throw ConfigError(path + ".ue_id", "must be in 1..65535");
  }
  ue.profile.ue_id = static_cast<UeId>(id);
  ue.profile.gbr_mbps = number(j, "gbr_mbps", path, 0.0);
  ue.profile.weight = number(j, "weight", path, 1.0);
  const long bits = integer(j, "bits_per_prb_per_slot", path, 200);
  if (bits < 0 || bits > 0xFFFFFFFFL) {
    throw ConfigError(path + ".bits_per_prb_per_slot", "out of range");
  }
  ue.bits_per_prb_per_slot = static_cast<std::uint32_t>(bits);

  if (const json* t = field(j, "traffic")) {
    const std::string tpath = path + ".traffic";
    array_at(*t, tpath);
    for (std::size_t i = 0; i < t->size(); ++i) {
      const std::string ipath = tpath + "[" + std::to_string(i) + "]";
      const json& item = object_at((*t)[i], ipath);
      reject_unknown_keys(item, ipath, {"start_s", "stop_s"});
      ue.traffic.push_back({number(item, "start_s", ipath, 0.0),
                            number(item, "stop_s", ipath, 0.0)});
    }
  }
  if (const json* c = field(j, "channel")) {
    const std::string cpath = path + ".channel";
    array_at(*c, cpath);
    for (std::size_t i = 0; i < c->size(); ++i) {
      const std::string ipath = cpath + "[" + std::to_string(i) + "]";
      const json& item = object_at((*c)[i], ipath);
      reject_unknown_keys(item, ipath, {"at_s", "bits_per_prb_per_slot"});
      const long b = integer(item, "bits_per_prb_per_slot", ipath, 0);
      if (b < 0 || b > 0xFFFFFFFFL) {
        throw ConfigError(ipath + ".bits_per_prb_per_slot", "out of range");
      }
      ue.channel.push_back(
          {number(item, "at_s", ipath, 0.0), static_cast<std::uint32_t>(b)});
    }
  }
  return ue;
}

PaperTimeline parse_timeline(const json& j, const std::string& path) {
  object_at(j, path);
  reject_unknown_keys(j, path, {"duration_s", "start_s"});
  PaperTimeline tl;
  tl.duration_s = number(j, "duration_s", path, 0.0);
  const json* starts = field(j, "start_s");
  if (starts == nullptr) throw ConfigError(path + ".start_s", "missing");
  object_at(*starts, path + ".start_s");
  for (const auto& [key, value] : starts->items()) {
    const std::string kpath = path + ".start_s." + key;
    if (!value.is_number()) throw ConfigError(kpath, "expected a number");
    long id = 0;
    try {
      std::size_t used = 0;
      id = std::stol(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError(kpath, "key must be a ue_id");
    }
    if (id <= 0 || id > 0xFFFF) throw ConfigError(kpath, "ue_id out of range");
    tl.start_s[static_cast<UeId>(id)] = value.get<double>();
  }
  return tl;
}

}  // namespace

ScenarioConfig parse_scenario(const json& doc) {
  object_at(doc, "$");
  reject_unknown_keys(doc, "$",
                      {"cell", "gnb_id", "ues", "policy", "duration_s", "mode",
                       "speed", "steady_state_s", "out_dir", "paper_timeline"});
  ScenarioConfig cfg;
  if (const json* c = field(doc, "cell")) cfg.cell = parse_cell(*c, "cell");
  const long gnb = integer(doc, "gnb_id", "$", 1);
  if (gnb <= 0 || gnb > 0xFFFFFFFFL) {
    throw ConfigError("gnb_id", "must be in 1..4294967295");
  }
  cfg.gnb_id = static_cast<GnbId>(gnb);

  const json* ues = field(doc, "ues");
  if (ues == nullptr) throw ConfigError("ues", "missing");
  array_at(*ues, "ues");
  for (std::size_t i = 0; i < ues->size(); ++i) {
    cfg.ues.push_back(parse_ue((*ues)[i], "ues[" + std::to_string(i) + "]"));
  }

  try {
    cfg.policy = sla::parse_policy(text(doc, "policy", "$", "soft"));
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& err) {
    throw ConfigError("policy", err.what());
  }
  try {
    cfg.mode = parse_mode(text(doc, "mode", "$", "det"));
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& err) {
    throw ConfigError("mode", err.what());
  }
  cfg.duration_s = number(doc, "duration_s", "$", 10.0);
  cfg.speed = number(doc, "speed", "$", 1.0);
  cfg.steady_state_s = number(doc, "steady_state_s", "$", 2.0);
  cfg.out_dir = text(doc, "out_dir", "$", "out");
  if (const json* tl = field(doc, "paper_timeline")) {
    cfg.paper_timeline = parse_timeline(*tl, "paper_timeline");
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig parse_scenario_text(const std::string& content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& err) {
    throw ConfigError("$", std::string("invalid JSON: ") + err.what());
  }
  return parse_scenario(doc);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("$", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

void validate(const ScenarioConfig& cfg) {
  auto positive_int = [](int v, const char* path) {
    if (v <= 0) throw ConfigError(path, "must be > 0");
  };
  positive_int(cfg.cell.total_prbs, "cell.total_prbs");
  positive_int(cfg.cell.slot_duration_us, "cell.slot_duration_us");
  positive_int(cfg.cell.report_period_ms, "cell.report_period_ms");
  if ((cfg.cell.report_period_ms * 1000) % cfg.cell.slot_duration_us != 0) {
    throw ConfigError("cell.report_period_ms",
                      "must be a whole number of slots");
  }
  if (!(cfg.duration_s > 0.0)) throw ConfigError("duration_s", "must be > 0");
  if (!(cfg.speed > 0.0)) throw ConfigError("speed", "must be > 0");
  if (!(cfg.steady_state_s > 0.0) || cfg.steady_state_s > cfg.duration_s) {
    throw ConfigError("steady_state_s", "must be in (0, duration_s]");
  }
  if (cfg.ues.empty()) throw ConfigError("ues", "at least one UE required");

  std::set<UeId> seen;
  for (std::size_t i = 0; i < cfg.ues.size(); ++i) {
    const UeSpec& ue = cfg.ues[i];
    const std::string path = "ues[" + std::to_string(i) + "]";
    if (!seen.insert(ue.profile.ue_id).second) {
      throw ConfigError(path + ".ue_id", "duplicate ue_id");
    }
    if (!std::isfinite(ue.profile.gbr_mbps) || ue.profile.gbr_mbps < 0.0) {
      throw ConfigError(path + ".gbr_mbps", "must be >= 0");
    }
    if (!std::isfinite(ue.profile.weight) || ue.profile.weight <= 0.0) {
      throw ConfigError(path + ".weight", "must be > 0");
    }
    for (std::size_t k = 0; k < ue.traffic.size(); ++k) {
      const auto& t = ue.traffic[k];
      const std::string tpath = path + ".traffic[" + std::to_string(k) + "]";
      if (t.start_s < 0.0 || !(t.stop_s > t.start_s)) {
        throw ConfigError(tpath, "need 0 <= start_s < stop_s");
      }
      if (t.stop_s > cfg.duration_s + 1e-9) {
        throw ConfigError(tpath + ".stop_s", "beyond duration_s");
      }
    }
    for (std::size_t k = 0; k < ue.channel.size(); ++k) {
      const auto& c = ue.channel[k];
      if (c.at_s < 0.0 || c.at_s >= cfg.duration_s) {
        throw ConfigError(path + ".channel[" + std::to_string(k) + "].at_s",
                          "must be within [0, duration_s)");
      }
    }
  }
  if (cfg.paper_timeline) {
    const auto& tl = *cfg.paper_timeline;
    if (!(tl.duration_s > 0.0)) {
      throw ConfigError("paper_timeline.duration_s", "must be > 0");
    }
    for (const auto& [id, start] : tl.start_s) {
      const std::string kpath = "paper_timeline.start_s." + std::to_string(id);
      if (!seen.contains(id)) throw ConfigError(kpath, "no such ue_id");
      if (start < 0.0 || start >= tl.duration_s) {
        throw ConfigError(kpath, "must be within [0, duration_s)");
      }
    }
    for (UeId id : seen) {
      if (!tl.start_s.contains(id)) {
        throw ConfigError("paper_timeline.start_s",
                          "missing ue_id " + std::to_string(id));
      }
    }
  }
}

ScenarioConfig with_paper_timeline(ScenarioConfig cfg) {
  if (!cfg.paper_timeline) {
    throw ConfigError("paper_timeline", "not present in this scenario");
  }
  const PaperTimeline tl = *cfg.paper_timeline;
  cfg.duration_s = tl.duration_s;
  for (UeSpec& ue : cfg.ues) {
    ue.traffic = {{tl.start_s.at(ue.profile.ue_id), tl.duration_s}};
    std::erase_if(ue.channel, [&](const ChannelChange& c) {
      return c.at_s >= tl.duration_s;
    });
  }
  cfg.steady_state_s = std::min(cfg.steady_state_s, cfg.duration_s);
  validate(cfg);
  return cfg;
}

mac::SimConfig to_sim_config(const ScenarioConfig& cfg) {
  mac::SimConfig sim;
  sim.cell = cfg.cell;
  for (const UeSpec& ue : cfg.ues) {
    sim.ues.push_back({ue.profile.ue_id, ue.bits_per_prb_per_slot, ue.traffic});
    for (const ChannelChange& c : ue.channel) {
      const auto slot = static_cast<std::uint64_t>(
          std::llround(c.at_s * 1e6 / cfg.cell.slot_duration_us));
      sim.channel_steps.push_back(
          {slot, ue.profile.ue_id, c.bits_per_prb_per_slot});
    }
  }
  std::stable_sort(sim.channel_steps.begin(), sim.channel_steps.end(),
                   [](const auto& a, const auto& b) {
                     return a.slot_index < b.slot_index;
                   });
  std::sort(sim.ues.begin(), sim.ues.end(),
            [](const auto& a, const auto& b) { return a.ue_id < b.ue_id; });
  return sim;
}

std::vector<UeProfile> profiles(const ScenarioConfig& cfg) {
  std::vector<UeProfile> out;
  for (const UeSpec& ue : cfg.ues) out.push_back(ue.profile);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.ue_id < b.ue_id; });
  return out;
}

}  // namespace oranlab::scenario
