#include "config_doc.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "hsdir/detector.hpp"
#include "hsdir/error.hpp"

namespace hsdir::detail {

namespace {

json from_toml(const toml::node& node) {
  if (auto t = node.as_table()) {
    json out = json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = from_toml(value);
    return out;
  }
  if (auto a = node.as_array()) {
    json out = json::array();
    for (const auto& value : *a) out.push_back(from_toml(value));
    return out;
  }
  if (auto v = node.as_integer()) return v->get();
  if (auto v = node.as_floating_point()) return v->get();
  if (auto v = node.as_boolean()) return v->get();
  if (auto v = node.as_string()) return v->get();
  std::ostringstream os;
  node.visit([&](const auto& n) { os << n; });
  return os.str();
}

}  // namespace

bool is_toml_path(std::string_view path) {
  return path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
}

json parse_config_text(std::string_view text, bool toml) {
  json doc;
  if (toml) {
    try {
      doc = from_toml(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << "TOML: " << e.description() << " at line " << e.source().begin.line;
      throw Error(ErrorKind::ParseError, os.str());
    }
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, std::string("JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) {
    throw Error(ErrorKind::ValidationError, "config must be a table/object");
  }
  return doc;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), is_toml_path(path));
}

ObjectReader::ObjectReader(const json& object, std::string prefix)
    : object_(object), prefix_(std::move(prefix)) {
  if (!object_.is_object()) {
    throw Error(ErrorKind::ValidationError,
                (prefix_.empty() ? std::string("config") : prefix_.substr(0, prefix_.size() - 1)) +
                    " must be a table/object");
  }
}

bool ObjectReader::has(const char* key) const { return object_.contains(key); }

const json* ObjectReader::raw(const char* key) {
  auto it = object_.find(key);
  if (it == object_.end()) return nullptr;
  used_.insert(key);
  return &*it;
}

std::optional<double> ObjectReader::number(const char* key) {
  const json* v = raw(key);
  if (!v) return std::nullopt;
  if (!v->is_number()) {
    throw Error(ErrorKind::ValidationError, field(key) + " must be a number");
  }
  return v->get<double>();
}

std::optional<std::int64_t> ObjectReader::integer(const char* key) {
  const json* v = raw(key);
  if (!v) return std::nullopt;
  if (!v->is_number_integer()) {
    throw Error(ErrorKind::ValidationError, field(key) + " must be an integer");
  }
  return v->get<std::int64_t>();
}

std::optional<std::string> ObjectReader::string(const char* key) {
  const json* v = raw(key);
  if (!v) return std::nullopt;
  if (!v->is_string()) {
    throw Error(ErrorKind::ValidationError, field(key) + " must be a string");
  }
  return v->get<std::string>();
}

std::optional<bool> ObjectReader::boolean(const char* key) {
  const json* v = raw(key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) {
    throw Error(ErrorKind::ValidationError, field(key) + " must be a boolean");
  }
  return v->get<bool>();
}

void ObjectReader::finish() const {
  std::string unknown;
  for (const auto& [key, value] : object_.items()) {
    if (!used_.count(key)) unknown += " " + prefix_ + key;
  }
  if (!unknown.empty()) {
    throw Error(ErrorKind::ValidationError, "unknown config key(s):" + unknown);
  }
}

}  // namespace hsdir::detail

namespace hsdir {

DetectorConfig load_detector_config(const std::string& path) {
  using detail::ObjectReader;
  detail::json doc = detail::load_config_file(path);
  const detail::json* section = &doc;
  if (doc.contains("detector")) {
    if (doc.size() != 1) {
      throw Error(ErrorKind::ValidationError,
                  "detector config: keys outside the [detector] table");
    }
    section = &doc["detector"];
  }
  ObjectReader r(*section, section == &doc ? "" : "detector.");
  DetectorConfig c;
  if (auto v = r.number("z_threshold")) c.z_threshold = *v;
  if (auto v = r.integer("ratio_warn")) c.ratio_warn = *v;
  if (auto v = r.integer("ratio_alarm")) c.ratio_alarm = *v;
  if (auto v = r.integer("preposition_min_occurrences")) {
    c.preposition_min_occurrences = static_cast<int>(*v);
  }
  if (auto v = r.integer("change_lookback")) c.change_lookback = *v;
  if (const auto* v = r.raw("fresh_window")) {
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number_integer() ||
        !(*v)[1].is_number_integer()) {
      throw Error(ErrorKind::ValidationError,
                  r.field("fresh_window") + " must be [lo, hi] in seconds");
    }
    c.fresh_window_lo = (*v)[0].get<std::int64_t>();
    c.fresh_window_hi = (*v)[1].get<std::int64_t>();
  }
  if (auto v = r.integer("switch_count_threshold")) {
    c.switch_count_threshold = static_cast<int>(*v);
  }
  if (auto v = r.integer("switch_window")) c.switch_window = *v;
  if (auto v = r.integer("consecutive_min_run")) {
    c.consecutive_min_run = static_cast<int>(*v);
  }
  r.finish();
  c.validate();
  return c;
}

}  // namespace hsdir
