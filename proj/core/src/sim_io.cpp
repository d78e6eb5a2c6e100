#include <filesystem>
#include <fstream>
#include <sstream>

#include "config_doc.hpp"
#include "hsdir/csv.hpp"
#include "hsdir/error.hpp"
#include "hsdir/simulator.hpp"
#include "hsdir/timeutil.hpp"

namespace hsdir {

using detail::json;
using detail::ObjectReader;

namespace {

OnionAddress onion_field(ObjectReader& r, const char* key) {
  auto text = r.string(key);
  if (!text) throw Error(ErrorKind::ValidationError, r.field(key) + " is required");
  try {
    return OnionAddress::parse(*text);
  } catch (const Error& e) {
    throw Error(ErrorKind::ValidationError, r.field(key) + ": " + e.what());
  }
}

template <class T>
void set_count(ObjectReader& r, const char* key, T& out) {
  if (auto v = r.integer(key)) {
    if (*v < 0) throw Error(ErrorKind::ValidationError, r.field(key) + " must be >= 0");
    out = static_cast<T>(*v);
  }
}

AttackerSpec parse_attacker(const json& j) {
  ObjectReader r(j, "attacker.");
  AttackerSpec a;
  if (auto s = r.string("strategy")) a.strategy = parse_attack_strategy(*s);
  set_count(r, "ip_count", a.ip_count);
  set_count(r, "relays_per_ip", a.relays_per_ip);
  if (r.has("target_onion")) {
    a.target = onion_field(r, "target_onion");
  } else if (a.strategy != AttackStrategy::Shadow) {
    throw Error(ErrorKind::ValidationError, "attacker.target_onion is required");
  }
  if (auto v = r.number("grind_width")) a.grind_width = *v;
  set_count(r, "guard_count", a.guard_count);
  set_count(r, "start_hour", a.start_hour);
  r.finish();
  return a;
}

SimConfig parse_sim_document(const json& doc) {
  ObjectReader r(doc, "");
  SimConfig c;
  if (auto v = r.integer("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (r.has("start") && r.has("start_time")) {
    throw Error(ErrorKind::ValidationError, "give either start or start_time");
  }
  if (auto v = r.string("start")) {
    try {
      c.start_time = parse_date(*v);
    } catch (const Error& e) {
      throw Error(ErrorKind::ValidationError, std::string("start: ") + e.what());
    }
  }
  if (auto v = r.integer("start_time")) c.start_time = *v;
  if (auto v = r.integer("duration_hours")) c.duration_hours = *v;
  set_count(r, "honest_relays", c.honest_relays);
  if (auto v = r.number("hourly_churn")) c.hourly_churn = *v;
  if (auto v = r.number("rejoin_probability")) c.rejoin_probability = *v;
  if (auto v = r.number("fingerprint_renewal_probability")) {
    c.fingerprint_renewal_probability = *v;
  }
  if (auto v = r.integer("hsdir_uptime_requirement")) c.hsdir_uptime_requirement = *v;
  if (auto v = r.integer("guard_uptime_requirement")) c.guard_uptime_requirement = *v;
  if (auto v = r.integer("max_relays_per_ip")) c.max_relays_per_ip = static_cast<int>(*v);
  set_count(r, "client_population", c.client_population);

  if (const json* m = r.raw("request_model")) {
    ObjectReader rm(*m, "request_model.");
    if (auto v = rm.number("zipf_exponent")) c.request_model.zipf_exponent = *v;
    if (auto v = rm.number("nonexistent_fraction")) c.request_model.nonexistent_fraction = *v;
    if (auto v = rm.number("requests_per_client_hour")) {
      c.request_model.requests_per_client_hour = *v;
    }
    rm.finish();
  }
  if (const json* list = r.raw("hidden_services")) {
    if (!list->is_array()) {
      throw Error(ErrorKind::ValidationError, "hidden_services must be an array");
    }
    for (const auto& item : *list) {
      HiddenServiceSpec hs;
      if (item.is_string()) {
        try {
          hs.onion = OnionAddress::parse(item.get<std::string>());
        } catch (const Error& e) {
          throw Error(ErrorKind::ValidationError, std::string("hidden_services: ") + e.what());
        }
      } else {
        ObjectReader rs(item, "hidden_services.");
        hs.onion = onion_field(rs, "onion");
        if (auto v = rs.integer("publish_offset_hours")) hs.publish_offset_hours = *v;
        rs.finish();
      }
      c.hidden_services.push_back(hs);
    }
  }
  if (const json* a = r.raw("attacker")) {
    if (!a->is_null()) c.attacker = parse_attacker(*a);
  }
  r.finish();
  return c;
}

json range_json(const TimeRange& r) { return json::array({r.from, r.to}); }

}  // namespace

SimConfig parse_sim_config(std::string_view text, bool toml) {
  return parse_sim_document(detail::parse_config_text(text, toml));
}

SimConfig load_sim_config(const std::string& path) {
  return parse_sim_document(detail::load_config_file(path));
}

void write_request_log(std::span<const RequestRecord> requests, std::ostream& out) {
  write_csv_row(out, {"hour", "desc_id_base32", "count", "client_id", "guard_fp_hex"});
  for (const auto& r : requests) {
    write_csv_row(out, {std::to_string(r.hour), r.desc_id.base32(),
                        std::to_string(r.count), std::to_string(r.client),
                        r.guard ? r.guard->hex() : std::string()});
  }
}

std::string ground_truth_to_json(const SimOutput& output) {
  const GroundTruth& gt = output.ground_truth;
  json relays = json::array();
  for (const auto& r : gt.relays) {
    json online = json::array();
    for (const auto& iv : r.online) online.push_back(range_json(iv));
    relays.push_back(json{
        {"fp", r.fingerprint.hex()},
        {"nick", r.nickname},
        {"ip", ipv4_to_string(r.identity.ip)},
        {"port", r.identity.port},
        {"bw", r.bandwidth},
        {"role", to_string(r.role)},
        {"target_period", r.target_period ? json(*r.target_period) : json(nullptr)},
        {"replica", r.replica ? json(*r.replica) : json(nullptr)},
        {"online", std::move(online)}});
  }
  json plan = nullptr;
  if (gt.shadow_plan) {
    json steps = json::array();
    for (const auto& s : gt.shadow_plan->steps) {
      steps.push_back(json{{"hour", s.hour}, {"deactivate", s.deactivate},
                           {"promote", s.promote}});
    }
    std::ostringstream cov;
    cov.precision(6);
    cov << std::fixed << gt.shadow_plan->coverage;
    plan = json{{"ip_count", gt.shadow_plan->ip_count},
                {"relays_per_ip", gt.shadow_plan->relays_per_ip},
                {"interval_hours", gt.shadow_plan->interval},
                {"coverage", cov.str()},
                {"steps", std::move(steps)}};
  }
  json responsible = json::array();
  for (const auto& r : gt.responsible) {
    json hsdirs = json::array();
    for (const auto& fp : r.hsdirs) hsdirs.push_back(fp.hex());
    responsible.push_back(json{{"onion", r.onion.text()},
                               {"period", r.period},
                               {"upload_time", r.upload_time},
                               {"replica", r.replica},
                               {"desc_id", r.desc_id.base32()},
                               {"hsdirs", std::move(hsdirs)},
                               {"attacker_slots", r.attacker_slots}});
  }
  json events = json::array();
  json by_region = json::object();
  for (auto region : client_regions()) by_region[std::string(region)] = 0;
  for (const auto& e : output.deanon_events) {
    events.push_back(json{{"hour", e.hour},
                          {"client", e.client},
                          {"client_ip", ipv4_to_string(e.client_ip)},
                          {"region", e.region}});
    by_region[e.region] = by_region[e.region].get<std::uint64_t>() + 1;
  }
  json j{{"seed", output.config.seed},
         {"start_time", output.config.start_time},
         {"duration_hours", output.config.duration_hours},
         {"strategy", gt.strategy ? json(to_string(*gt.strategy)) : json(nullptr)},
         {"target_onion", output.config.attacker && output.config.attacker->strategy !=
                                                         AttackStrategy::Shadow
                              ? json(output.config.attacker->target.text())
                              : json(nullptr)},
         {"setup_period", gt.setup_period ? json(*gt.setup_period) : json(nullptr)},
         {"grind_attempts", gt.grind_attempts},
         {"attacker_relays", std::move(relays)},
         {"shadow_plan", std::move(plan)},
         {"responsible", std::move(responsible)},
         {"requests", json{{"rows", output.requests.size()},
                           {"existing", gt.existing_requests},
                           {"nonexistent", gt.nonexistent_requests}}},
         {"deanon_events", std::move(events)},
         {"deanon_by_region", std::move(by_region)}};
  return j.dump(2) + "\n";
}

void write_sim_output(const SimOutput& output, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("archive.jsonl");
    save_archive(output.archive, out);
  }
  {
    auto out = open("requests.csv");
    write_request_log(output.requests, out);
  }
  {
    auto out = open("ground_truth.json");
    out << ground_truth_to_json(output);
  }
}

}  // namespace hsdir
