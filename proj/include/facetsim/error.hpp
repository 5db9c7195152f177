#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace facetsim {

/// A single problem found while loading or validating an artifact.
/// `code` is a stable machine-readable identifier (e.g. CYCLE, UNBOUND_VARIABLE);
/// `location` names the artifact element (node id, JSON path, facet name).
struct Diagnostic {
  std::string code;
  std::string location;
  std::string message;
  std::vector<std::string> subjects;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return errors.empty(); }

  void error(std::string code, std::string location, std::string message,
             std::vector<std::string> subjects = {});
  void warn(std::string code, std::string location, std::string message,
            std::vector<std::string> subjects = {});

  // Appends another report, prefixing each location with `scope` when non-empty.
  void merge(const ValidationReport& other, std::string_view scope = {});

  bool has_error(std::string_view code) const;
  bool has_warning(std::string_view code) const;
  const Diagnostic* find_error(std::string_view code) const;
};

nlohmann::json to_json(const Diagnostic& d);
nlohmann::json to_json(const ValidationReport& report);

/// Base exception for every engine failure. Carries a diagnostic code.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, std::string location = {});

  const std::string& code() const noexcept { return code_; }
  const std::string& location() const noexcept { return location_; }
  Diagnostic diagnostic() const;

 private:
  std::string code_;
  std::string location_;
};

/// Thrown when a load or validation step collects one or more errors.
class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(ValidationReport report);

  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

}  // namespace facetsim
