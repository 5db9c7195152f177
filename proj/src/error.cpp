#include "facetsim/error.hpp"

namespace facetsim {

namespace {

std::string summarize(const ValidationReport& report) {
  if (report.errors.empty()) return "validation failed";
  const Diagnostic& first = report.errors.front();
  std::string text = first.code;
  if (!first.location.empty()) text += " at " + first.location;
  text += ": " + first.message;
  if (report.errors.size() > 1) {
    text += " (and " + std::to_string(report.errors.size() - 1) + " more)";
  }
  return text;
}

}  // namespace

void ValidationReport::error(std::string code, std::string location, std::string message,
                             std::vector<std::string> subjects) {
  errors.push_back({std::move(code), std::move(location), std::move(message), std::move(subjects)});
}

void ValidationReport::warn(std::string code, std::string location, std::string message,
                            std::vector<std::string> subjects) {
  warnings.push_back({std::move(code), std::move(location), std::move(message), std::move(subjects)});
}

void ValidationReport::merge(const ValidationReport& other, std::string_view scope) {
  auto scoped = [&](Diagnostic d) {
    if (!scope.empty()) {
      d.location = d.location.empty() ? std::string(scope) : std::string(scope) + ":" + d.location;
    }
    return d;
  };
  for (const auto& d : other.errors) errors.push_back(scoped(d));
  for (const auto& d : other.warnings) warnings.push_back(scoped(d));
}

bool ValidationReport::has_error(std::string_view code) const {
  return find_error(code) != nullptr;
}

bool ValidationReport::has_warning(std::string_view code) const {
  for (const auto& d : warnings) {
    if (d.code == code) return true;
  }
  return false;
}

const Diagnostic* ValidationReport::find_error(std::string_view code) const {
  for (const auto& d : errors) {
    if (d.code == code) return &d;
  }
  return nullptr;
}

nlohmann::json to_json(const Diagnostic& d) {
  nlohmann::json j = {{"code", d.code}, {"location", d.location}, {"message", d.message}};
  if (!d.subjects.empty()) j["subjects"] = d.subjects;
  return j;
}

nlohmann::json to_json(const ValidationReport& report) {
  nlohmann::json errors = nlohmann::json::array();
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& d : report.errors) errors.push_back(to_json(d));
  for (const auto& d : report.warnings) warnings.push_back(to_json(d));
  return {{"ok", report.ok()}, {"errors", errors}, {"warnings", warnings}};
}

Error::Error(std::string code, const std::string& message, std::string location)
    : std::runtime_error(message), code_(std::move(code)), location_(std::move(location)) {}

Diagnostic Error::diagnostic() const {
  return {code_, location_, what(), {}};
}

ValidationFailed::ValidationFailed(ValidationReport report)
    : Error(report.errors.empty() ? "VALIDATION_FAILED" : report.errors.front().code,
            summarize(report),
            report.errors.empty() ? std::string() : report.errors.front().location),
      report_(std::move(report)) {}

}  // namespace facetsim
