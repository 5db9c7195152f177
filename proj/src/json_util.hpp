#pragma once

// Strict JSON readers that report SCHEMA_VIOLATION with a JSON path.

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "facetsim/error.hpp"
#include "facetsim/expr.hpp"

namespace facetsim::detail {

using nlohmann::json;

inline std::string child_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

[[noreturn]] inline void schema_error(const std::string& path, const std::string& message) {
  throw Error("SCHEMA_VIOLATION", message + (path.empty() ? "" : " at " + path), path);
}

inline json parse_json_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("MALFORMED_JSON", std::string("malformed JSON: ") + e.what());
  }
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
}

inline void allow_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || k == key;
    if (!known) schema_error(child_path(path, key), "unknown field '" + key + "'");
  }
}

inline const json& require_field(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(child_path(path, key), std::string("missing required field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& obj, const std::string& path, const char* key) {
  const json& v = require_field(obj, path, key);
  if (!v.is_string()) schema_error(child_path(path, key), "expected a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(child_path(path, key), "expected a string");
  return it->get<std::string>();
}

inline const json& require_array(const json& obj, const std::string& path, const char* key, bool required) {
  static const json empty = json::array();
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) schema_error(child_path(path, key), std::string("missing required field '") + key + "'");
    return empty;
  }
  if (!it->is_array()) schema_error(child_path(path, key), "expected an array");
  return *it;
}

inline std::string require_name(const json& obj, const std::string& path, const char* key) {
  std::string name = require_string(obj, path, key);
  if (name.empty()) schema_error(child_path(path, key), "name must not be empty");
  return name;
}

/// Expressions travel as strings; JSON numbers and booleans are accepted as
/// literal shorthands.
inline Expression read_expression(const json& value, const std::string& path) {
  std::string text;
  if (value.is_string()) {
    text = value.get<std::string>();
  } else if (value.is_number() || value.is_boolean()) {
    text = value.dump();
  } else {
    schema_error(path, "expected an expression string");
  }
  try {
    return parse_expression(text);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " at " + path + " in '" + text + "'", path);
  }
}

inline std::int64_t require_integer(const json& obj, const std::string& path, const char* key) {
  const json& v = require_field(obj, path, key);
  if (!v.is_number_integer()) schema_error(child_path(path, key), "expected an integer");
  return v.get<std::int64_t>();
}

}  // namespace facetsim::detail
