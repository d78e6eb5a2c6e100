#pragma once

// Internal: configuration files are read into one JSON document whether
// they are written as JSON or TOML.

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

namespace hsdir::detail {

using json = nlohmann::ordered_json;

bool is_toml_path(std::string_view path);
json parse_config_text(std::string_view text, bool toml);
json load_config_file(const std::string& path);

/// Typed access to one object of a config document. Wrong types and, on
/// finish(), unknown keys are ValidationErrors naming the dotted field.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string prefix);

  bool has(const char* key) const;
  std::optional<double> number(const char* key);
  std::optional<std::int64_t> integer(const char* key);
  std::optional<std::string> string(const char* key);
  std::optional<bool> boolean(const char* key);
  /// Marks the key used and returns the raw value.
  const json* raw(const char* key);

  std::string field(const char* key) const { return prefix_ + key; }
  void finish() const;

 private:
  const json& object_;
  std::string prefix_;
  std::set<std::string> used_;
};

}  // namespace hsdir::detail
