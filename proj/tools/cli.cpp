#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsdir/consensus.hpp"
#include "hsdir/csv.hpp"
#include "hsdir/detector.hpp"
#include "hsdir/error.hpp"
#include "hsdir/hs_protocol.hpp"
#include "hsdir/popularity.hpp"
#include "hsdir/simulator.hpp"
#include "hsdir/timeutil.hpp"

namespace hsdir::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int exit_code(ErrorKind kind) {
  return kind == ErrorKind::IoError ? kExitFile : kExitValidation;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return in;
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir + ": " + ec.message());
}

json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

/// Inclusive day window [from, to] as a half-open unix range.
TimeRange day_window(const std::string& from, const std::string& to) {
  TimeRange r{parse_date(from), parse_date(to) + kSecondsPerDay};
  if (r.to <= r.from) {
    throw Error(ErrorKind::InvalidArgument, "--to must not be before --from");
  }
  return r;
}

std::string detector_defaults() {
  const DetectorConfig d;
  std::ostringstream os;
  os << "Detector thresholds (override with --config, JSON or TOML; seconds for durations):\n"
     << "  z_threshold                 " << d.z_threshold << "   FREQUENCY flags count > mu + z*sigma\n"
     << "  ratio_warn                  " << d.ratio_warn << "   DISTANCE_RATIO NOTE above this ratio\n"
     << "  ratio_alarm                 " << d.ratio_alarm << " DISTANCE_RATIO ALARM above this ratio\n"
     << "  preposition_min_occurrences " << d.preposition_min_occurrences
     << "     PREPOSITION SUSPICIOUS at this many fingerprints per identity\n"
     << "  change_lookback             " << d.change_lookback << " (7 days)\n"
     << "  fresh_window                [" << d.fresh_window_lo << ", " << d.fresh_window_hi
     << "] (25h +/- 2h)\n"
     << "  switch_count_threshold      " << d.switch_count_threshold
     << "     SWITCH_COUNT switches within switch_window\n"
     << "  switch_window               " << d.switch_window << " (30 days)\n"
     << "  consecutive_min_run         " << d.consecutive_min_run
     << "     CONSECUTIVE SUSPICIOUS run length (2 is NOTE)\n"
     << "Exit status: 2 if any ALARM, 1 if SUSPICIOUS only, 0 otherwise.";
  return os.str();
}

std::string simulate_defaults() {
  const SimConfig c;
  const AttackerSpec a;
  std::ostringstream os;
  os << "Config keys (JSON or TOML) and defaults:\n"
     << "  start (YYYY-MM-DD) | start_time  " << format_date(c.start_time) << "\n"
     << "  duration_hours                   " << c.duration_hours << " (>= 48)\n"
     << "  honest_relays                    " << c.honest_relays << "\n"
     << "  hourly_churn                     " << c.hourly_churn << "\n"
     << "  rejoin_probability               " << c.rejoin_probability << "\n"
     << "  fingerprint_renewal_probability  " << c.fingerprint_renewal_probability << "\n"
     << "  hsdir_uptime_requirement         " << c.hsdir_uptime_requirement << " s\n"
     << "  guard_uptime_requirement         " << c.guard_uptime_requirement << " s\n"
     << "  max_relays_per_ip                " << c.max_relays_per_ip << "\n"
     << "  client_population                " << c.client_population << "\n"
     << "  request_model.zipf_exponent      " << c.request_model.zipf_exponent << "\n"
     << "  request_model.nonexistent_fraction " << c.request_model.nonexistent_fraction << "\n"
     << "  request_model.requests_per_client_hour " << c.request_model.requests_per_client_hour
     << "\n"
     << "  hidden_services                  [] of {onion, publish_offset_hours} or onion strings\n"
     << "  attacker.strategy                grind | shadow | guard_and_hsdir\n"
     << "  attacker.ip_count                " << a.ip_count << "\n"
     << "  attacker.relays_per_ip           " << a.relays_per_ip << "\n"
     << "  attacker.target_onion            (required except for shadow)\n"
     << "  attacker.grind_width             " << a.grind_width << " of the average ring gap\n"
     << "  attacker.guard_count             " << a.guard_count << "\n"
     << "  attacker.start_hour              " << a.start_hour << "\n"
     << "Writes archive.jsonl, requests.csv and ground_truth.json into --out.";
  return os.str();
}

// Subcommands ------------------------------------------------------------------------

struct DeriveArgs {
  std::string onion;
  std::string date;
};

int cmd_derive(const DeriveArgs& a, std::ostream& out) {
  OnionAddress onion = OnionAddress::parse(a.onion);
  const std::int64_t t = parse_date(a.date);
  const std::int64_t period = time_period(t, onion.id());
  out << "onion      " << onion.text() << ".onion\n"
      << "date       " << format_date(t) << "\n"
      << "period     " << period << "\n";
  for (int r = 0; r < kReplicas; ++r) {
    out << "replica " << r << "  " << descriptor_id(onion.id(), period, r).base32() << "\n";
  }
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig config = load_sim_config(a.config);
  config.seed = a.seed;
  SimOutput result = run_simulation(config);
  write_sim_output(result, a.out);
  out << "snapshots  " << result.archive.size() << "\n"
      << "requests   " << result.requests.size() << " rows\n"
      << "attackers  " << result.ground_truth.relays.size() << " relays\n"
      << "deanon     " << result.deanon_events.size() << " events\n"
      << "written to " << a.out << "\n";
  return 0;
}

struct DetectArgs {
  std::string archive;
  std::string onion;
  std::string from;
  std::string to;
  std::string config;
  std::string out = ".";
};

int cmd_detect(const DetectArgs& a, std::ostream& out) {
  DetectorConfig config;
  if (!a.config.empty()) config = load_detector_config(a.config);
  OnionAddress onion = OnionAddress::parse(a.onion);
  TimeRange range = day_window(a.from, a.to);
  ConsensusArchive archive = load_archive_file(a.archive);
  SuspicionReport report = detect(archive, onion, range, config);

  make_dir(a.out);
  std::string text = report_to_text(report);
  open_output(fs::path(a.out) / "detect_report.json") << report_to_json(report);
  open_output(fs::path(a.out) / "detect_report.txt") << text;
  out << text;
  if (report.has_alarm()) return 2;
  if (report.has_suspicious()) return 1;
  return 0;
}

struct ResolveArgs {
  std::string log;
  std::string onions;
  std::string from;
  std::string to;
  std::string out = ".";
};

int cmd_resolve(const ResolveArgs& a, std::ostream& out) {
  const std::int64_t first = day_number(parse_date(a.from));
  const std::int64_t last = day_number(parse_date(a.to));
  if (last < first) throw Error(ErrorKind::InvalidArgument, "--to must not be before --from");
  std::vector<OnionAddress> onions;
  {
    auto in = open_input(a.onions);
    onions = read_onion_list(in);
  }
  std::vector<LogRow> log;
  {
    auto in = open_input(a.log);
    log = read_request_log(in);
  }
  DescriptorIndex index = DescriptorIndex::build(onions, first, last);
  PopularityTable table = resolve(log, index);

  make_dir(a.out);
  {
    auto csv = open_output(fs::path(a.out) / "popularity.csv");
    write_popularity_csv(table, csv);
  }
  open_output(fs::path(a.out) / "popularity.json") << popularity_to_json(table);
  out << "index      " << index.size() << " descriptor ids ("
      << index.collisions().size() << " ambiguous)\n"
      << "requests   " << table.total << "\n"
      << "resolved   " << table.resolved() << " to " << table.rows.size() << " onions\n"
      << "unresolved " << table.unresolved << "\n";
  return 0;
}

struct ReportArgs {
  std::string detect;
  std::string popularity;
  std::string out = ".";
  bool csv = false;
};

std::string ratio_bucket(const std::string& ratio) {
  if (ratio == "inf") return "inf";
  // 10^k <= ratio < 10^(k+1)
  return "1e" + std::to_string(ratio.size() - 1);
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  if (a.detect.empty() && a.popularity.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give --detect and/or --popularity");
  }
  json summary = json::object();
  std::vector<std::pair<std::string, std::uint64_t>> categories;
  std::map<std::string, std::uint64_t> histogram;
  std::ostringstream text;

  if (!a.detect.empty()) {
    json d = read_json_file(a.detect);
    if (!d.is_object() || !d.contains("findings") || !d.contains("scores")) {
      throw Error(ErrorKind::ValidationError, a.detect + " is not a detect report");
    }
    std::map<std::string, std::uint64_t> by_rule_severity;
    for (const auto& f : d["findings"]) {
      const std::string rule = f.at("rule").get<std::string>();
      by_rule_severity[rule + "/" + f.at("severity").get<std::string>()]++;
      if (rule == "DISTANCE_RATIO") {
        histogram[ratio_bucket(f.at("evidence").at("ratio").get<std::string>())]++;
      }
    }
    for (const auto& [k, v] : by_rule_severity) categories.emplace_back("finding:" + k, v);
    json top = d["scores"].empty() ? json(nullptr) : d["scores"][0];
    summary["detect"] = json{{"onion", d.value("onion", "")},
                             {"periods", d.value("periods", 0)},
                             {"findings", d["findings"].size()},
                             {"has_alarm", d.value("has_alarm", false)},
                             {"has_suspicious", d.value("has_suspicious", false)},
                             {"top_identity", top}};
    text << "Tracking analysis for " << d.value("onion", "") << ".onion: "
         << d["findings"].size() << " findings, "
         << (d.value("has_alarm", false) ? "ALARM"
             : d.value("has_suspicious", false) ? "SUSPICIOUS"
                                                : "clean")
         << "\n";
    if (!top.is_null()) {
      text << "  top identity " << top.value("identity", "") << " score "
           << top.value("score", 0) << " (" << top.value("max_severity", "") << ")\n";
    }
  }
  if (!a.popularity.empty()) {
    json p = read_json_file(a.popularity);
    if (!p.is_object() || !p.contains("rows") || !p.contains("total")) {
      throw Error(ErrorKind::ValidationError, a.popularity + " is not a popularity table");
    }
    json top = json::array();
    for (std::size_t i = 0; i < p["rows"].size() && i < 10; ++i) top.push_back(p["rows"][i]);
    summary["popularity"] = json{{"total", p["total"]},
                                 {"resolved", p.value("resolved", 0)},
                                 {"unresolved", p.value("unresolved", 0)},
                                 {"ambiguous", p.value("ambiguous", 0)},
                                 {"onions", p["rows"].size()},
                                 {"top", std::move(top)}};
    categories.emplace_back("requests:resolved", p.value("resolved", 0));
    categories.emplace_back("requests:unresolved", p.value("unresolved", 0));
    categories.emplace_back("requests:ambiguous", p.value("ambiguous", 0));
    text << "Popularity: " << p["total"].get<std::uint64_t>() << " requests, "
         << p.value("resolved", 0) << " resolved to " << p["rows"].size() << " onions, "
         << p.value("unresolved", 0) << " unresolved\n";
    for (const auto& row : summary["popularity"]["top"]) {
      text << "  #" << row.value("rank", 0) << "  " << row.value("count", 0) << "  "
           << row.value("onion", "") << ".onion\n";
    }
  }

  make_dir(a.out);
  open_output(fs::path(a.out) / "summary.json") << summary.dump(2) << "\n";
  open_output(fs::path(a.out) / "summary.txt") << text.str();
  if (a.csv) {
    {
      auto f = open_output(fs::path(a.out) / "categories.csv");
      write_csv_row(f, {"category", "count"});
      for (const auto& [k, v] : categories) write_csv_row(f, {k, std::to_string(v)});
    }
    auto f = open_output(fs::path(a.out) / "ratio_histogram.csv");
    write_csv_row(f, {"ratio_bucket", "count"});
    for (const auto& [k, v] : histogram) write_csv_row(f, {k, std::to_string(v)});
  }
  out << text.str();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hidden-service directory toolkit: descriptor ids, simulation, "
               "tracking detection and popularity resolution"};
  app.name(args.empty() ? "hsdir" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", "hsdir 0.1.0");

  DeriveArgs derive;
  auto* d = app.add_subcommand("derive", "Print both replica descriptor ids for a day");
  d->add_option("--onion", derive.onion, "16-character onion address")->required();
  d->add_option("--date", derive.date, "Day, YYYY-MM-DD (UTC)")->required();

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic consensus archive");
  s->add_option("--config", simulate.config, "Simulation config (.json or .toml)")
      ->required();
  s->add_option("--out", simulate.out, "Output directory")->required();
  s->add_option("--seed", simulate.seed, "Random seed (required; no hidden entropy)")
      ->required();
  s->footer(simulate_defaults());

  DetectArgs det;
  auto* t = app.add_subcommand("detect", "Run the tracking rules for one onion");
  t->add_option("--archive", det.archive, "Consensus archive (JSONL)")->required();
  t->add_option("--onion", det.onion, "Target onion address")->required();
  t->add_option("--from", det.from, "First day, YYYY-MM-DD")->required();
  t->add_option("--to", det.to, "Last day (inclusive), YYYY-MM-DD")->required();
  t->add_option("--config", det.config, "Detector thresholds (.json or .toml)");
  t->add_option("--out", det.out, "Directory for detect_report.{json,txt}")
      ->capture_default_str();
  t->footer(detector_defaults());

  ResolveArgs res;
  auto* r = app.add_subcommand("resolve", "Rank onions by requests in a descriptor log");
  r->add_option("--log", res.log, "Request log CSV")->required();
  r->add_option("--onions", res.onions, "Onion list, one per line")->required();
  r->add_option("--from", res.from, "First day of the index window, YYYY-MM-DD")
      ->required();
  r->add_option("--to", res.to, "Last day (inclusive), YYYY-MM-DD")->required();
  r->add_option("--out", res.out, "Directory for popularity.{csv,json}")
      ->capture_default_str();

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Merge a detect report and a popularity table");
  p->add_option("--detect", rep.detect, "detect_report.json");
  p->add_option("--popularity", rep.popularity, "popularity.json");
  p->add_option("--out", rep.out, "Directory for summary.{json,txt}")
      ->capture_default_str();
  p->add_flag("--csv", rep.csv,
              "Also write categories.csv and ratio_histogram.csv for plotting")
      ->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream e2;
    int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*d) return cmd_derive(derive, out);
    if (*s) return cmd_simulate(simulate, out);
    if (*t) return cmd_detect(det, out);
    if (*r) return cmd_resolve(res, out);
    if (*p) return cmd_report(rep, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error (validation-error): " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace hsdir::cli
