#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hsdir/detector.hpp"
#include "hsdir/timeutil.hpp"

namespace hsdir {

using json = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json subject_json(const Subject& s) {
  json j = json::object();
  j["fingerprint"] = s.fingerprint ? json(s.fingerprint->hex()) : json(nullptr);
  j["identity"] = s.identity ? json(s.identity->to_string()) : json(nullptr);
  j["host"] = s.host ? json(ipv4_to_string(*s.host)) : json(nullptr);
  return j;
}

std::string_view level_name(RunLevel level) {
  switch (level) {
    case RunLevel::Fingerprint: return "fingerprint";
    case RunLevel::Identity: return "identity";
    case RunLevel::Host: return "host";
  }
  return "unknown";
}

json evidence_json(const Evidence& evidence) {
  struct Visitor {
    json operator()(const FrequencyEvidence& e) const {
      return json{{"count", e.count},
                  {"periods", e.periods},
                  {"mean_ring_size", fixed(e.mean_ring_size, 2)},
                  {"mu", fixed(e.mu)},
                  {"sigma", fixed(e.sigma)},
                  {"threshold", fixed(e.threshold)}};
    }
    json operator()(const PrepositionEvidence& e) const {
      json details = json::array();
      for (const auto& d : e.details) {
        details.push_back(json{
            {"kind", d.kind == PrepositionKind::KeyChange ? "key_change" : "fresh_relay"},
            {"fingerprint", d.fingerprint.hex()},
            {"period", d.period},
            {"responsible_at", format_timestamp(d.responsible_at)},
            {"observed_at", format_timestamp(d.observed_at)},
            {"lead_hours", (d.responsible_at - d.observed_at) / kSecondsPerHour}});
      }
      return json{{"occurrences", e.occurrences}, {"details", std::move(details)}};
    }
    json operator()(const DistanceRatioEvidence& e) const {
      return json{{"period", e.period},
                  {"replica", e.replica},
                  {"slot", e.slot},
                  {"descriptor_id", e.desc_id.base32()},
                  {"distance", e.distance.str()},
                  {"avg_distance", e.avg_distance.str()},
                  {"ratio", e.ratio ? e.ratio->str() : std::string("inf")}};
    }
    json operator()(const SwitchCountEvidence& e) const {
      return json{{"switches_in_window", e.switches_in_window},
                  {"total_switches", e.total_switches},
                  {"window_start", format_timestamp(e.window_start)},
                  {"window_end", format_timestamp(e.window_end)}};
    }
    json operator()(const ConsecutiveEvidence& e) const {
      json members = json::array();
      for (const auto& m : e.members) members.push_back(m.to_string());
      return json{{"level", level_name(e.level)},
                  {"run_length", e.run_length},
                  {"first_period", e.first_period},
                  {"last_period", e.last_period},
                  {"members", std::move(members)}};
    }
  };
  return std::visit(Visitor{}, evidence);
}

std::string subject_text(const Subject& s) {
  if (s.host) return "host " + ipv4_to_string(*s.host);
  std::string out = s.identity ? s.identity->to_string() : "-";
  if (s.fingerprint) out += " " + s.fingerprint->hex().substr(0, 8);
  return out;
}

std::string evidence_text(const Evidence& evidence) {
  struct Visitor {
    std::string operator()(const FrequencyEvidence& e) const {
      return "responsible " + std::to_string(e.count) + "/" +
             std::to_string(e.periods) + " periods > " + fixed(e.threshold, 2) +
             " (mu " + fixed(e.mu, 3) + ", sigma " + fixed(e.sigma, 3) + ")";
    }
    std::string operator()(const PrepositionEvidence& e) const {
      std::size_t changes = 0;
      std::size_t fresh = 0;
      for (const auto& d : e.details) {
        (d.kind == PrepositionKind::KeyChange ? changes : fresh) += 1;
      }
      return std::to_string(e.occurrences) + " fingerprint(s) positioned: " +
             std::to_string(changes) + " key change(s), " + std::to_string(fresh) +
             " fresh relay(s)";
    }
    std::string operator()(const DistanceRatioEvidence& e) const {
      return "period " + std::to_string(e.period) + " replica " +
             std::to_string(e.replica) + " ratio " +
             (e.ratio ? e.ratio->str() : std::string("inf"));
    }
    std::string operator()(const SwitchCountEvidence& e) const {
      return std::to_string(e.switches_in_window) + " switches between " +
             format_date(e.window_start) + " and " + format_date(e.window_end) +
             " (" + std::to_string(e.total_switches) + " total)";
    }
    std::string operator()(const ConsecutiveEvidence& e) const {
      return std::string(level_name(e.level)) + " run of " +
             std::to_string(e.run_length) + " periods (" +
             std::to_string(e.first_period) + "-" + std::to_string(e.last_period) + ")";
    }
  };
  return std::visit(Visitor{}, evidence);
}

}  // namespace

std::string report_to_json(const SuspicionReport& report) {
  json segments = json::array();
  for (const auto& s : report.segments) {
    segments.push_back(json{{"label", s.label},
                            {"from", format_timestamp(s.range.from)},
                            {"to", format_timestamp(s.range.to)},
                            {"periods", s.periods}});
  }
  json findings = json::array();
  for (const auto& f : report.findings) {
    findings.push_back(json{{"rule", to_string(f.rule)},
                            {"severity", to_string(f.severity)},
                            {"segment", report.segments.empty()
                                            ? json(nullptr)
                                            : json(report.segments[f.segment].label)},
                            {"subject", subject_json(f.subject)},
                            {"evidence", evidence_json(f.evidence)}});
  }
  json scores = json::array();
  for (const auto& s : report.scores) {
    json rules = json::array();
    for (RuleId r : s.rules) rules.push_back(to_string(r));
    json fps = json::array();
    for (const auto& fp : s.fingerprints) fps.push_back(fp.hex());
    scores.push_back(json{{"identity", s.identity.to_string()},
                          {"score", s.score},
                          {"max_severity", to_string(s.max_severity)},
                          {"findings", s.findings},
                          {"rules", std::move(rules)},
                          {"nicknames", s.nicknames},
                          {"fingerprints", std::move(fps)}});
  }
  json clusters = json::array();
  for (const auto& c : report.clusters) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back(m.to_string());
    clusters.push_back(json{{"shared", c.shared}, {"members", std::move(members)}});
  }
  json j{{"onion", report.onion.text()},
         {"from", format_timestamp(report.range.from)},
         {"to", format_timestamp(report.range.to)},
         {"periods", report.periods},
         {"degenerate_periods", report.degenerate_periods},
         {"has_alarm", report.has_alarm()},
         {"has_suspicious", report.has_suspicious()},
         {"segments", std::move(segments)},
         {"findings", std::move(findings)},
         {"scores", std::move(scores)},
         {"nickname_clusters", std::move(clusters)}};
  return j.dump(2) + "\n";
}

std::string report_to_text(const SuspicionReport& report) {
  std::ostringstream os;
  os << "Onion:   " << report.onion.text() << ".onion\n"
     << "Range:   " << format_date(report.range.from) << " .. "
     << format_date(report.range.to) << " (" << report.periods << " periods, "
     << report.degenerate_periods << " degenerate)\n";
  for (const auto& s : report.segments) {
    os << "Segment: " << s.label << "  " << s.periods << " periods\n";
  }
  os << "\nFindings (" << report.findings.size() << ")\n";
  os << std::left << std::setw(11) << "SEVERITY" << std::setw(15) << "RULE"
     << std::setw(6) << "YEAR" << std::setw(32) << "SUBJECT" << "EVIDENCE\n";
  for (const auto& f : report.findings) {
    os << std::setw(11) << to_string(f.severity) << std::setw(15) << to_string(f.rule)
       << std::setw(6)
       << (report.segments.empty() ? std::string("-")
                                   : report.segments[f.segment].label)
       << std::setw(32) << subject_text(f.subject) << evidence_text(f.evidence)
       << "\n";
  }
  os << "\nScores\n";
  os << std::setw(6) << "SCORE" << std::setw(11) << "MAX" << std::setw(24)
     << "IDENTITY" << "NICKNAMES\n";
  for (const auto& s : report.scores) {
    std::string nicks;
    for (const auto& n : s.nicknames) nicks += (nicks.empty() ? "" : ",") + n;
    os << std::setw(6) << s.score << std::setw(11) << to_string(s.max_severity)
       << std::setw(24) << s.identity.to_string() << nicks << "\n";
  }
  if (!report.clusters.empty()) {
    os << "\nNickname clusters\n";
    for (const auto& c : report.clusters) {
      os << "  \"" << c.shared << "\":";
      for (const auto& m : c.members) os << " " << m.to_string();
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace hsdir
