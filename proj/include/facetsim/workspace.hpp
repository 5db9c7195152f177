#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "facetsim/error.hpp"
#include "facetsim/facet.hpp"

namespace facetsim {

/// A directory of editable artifacts:
///   facets/<Name>.json, flows/*.graphml, policies/*.json, scenarios/*.json
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Maps a workspace-relative path to an absolute one. Absolute paths and
  /// paths that climb out of the root fail with BAD_PATH.
  std::filesystem::path resolve(std::string_view relative) const;

  bool exists(std::string_view relative) const;
  /// Errors: BAD_PATH, MISSING_FILE.
  std::string read(std::string_view relative) const;
  /// Writes through a temporary file and rename.
  void write(std::string_view relative, std::string_view bytes) const;
  void remove(std::string_view relative) const;

  /// Relative paths (generic form) of regular files under `dir` with the
  /// given extension, sorted.
  std::vector<std::string> list(std::string_view dir, std::string_view extension) const;

  struct FacetCatalog {
    std::map<std::string, FacetManifest> manifests;
    std::map<std::string, std::string> paths;  // facet name -> relative path
    ValidationReport report;                   // files that failed to parse
  };
  /// Every facets/*.json. The file stem must equal the manifest name
  /// (FACET_NAME_MISMATCH).
  FacetCatalog facets() const;

 private:
  std::filesystem::path root_;
};

/// Walks up from `start` to the first directory holding a facets/ folder.
std::filesystem::path find_workspace_root(const std::filesystem::path& start);

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Composite of every facet in the workspace, in dependency order.
/// Throws ValidationFailed when the catalogue does not compose.
CompositeModel compose_workspace(const Workspace::FacetCatalog& catalog);

// Shared validators. The CLI and the API server call exactly these, so both
// reject the same artifacts with the same codes.

ValidationReport validate_facet_document(std::string_view text, std::string_view expected_name = {});
/// `agent_type` empty: taken from the graph's agent_type data.
ValidationReport validate_flow_document(std::string_view graphml, const Workspace& ws,
                                        std::string_view agent_type = {});
ValidationReport validate_policy_document(std::string_view text, const Workspace& ws);
ValidationReport validate_scenario_document(std::string_view text, const Workspace& ws);

enum class ArtifactKind { Facet, Flow, Policy, Scenario, Unknown };

/// By folder (facets/, flows/, policies/, scenarios/), then by extension and
/// the top-level JSON keys.
ArtifactKind detect_kind(const std::filesystem::path& path, std::string_view text);

ValidationReport validate_file(const std::filesystem::path& path, const Workspace& ws);
/// Every artifact in the workspace, locations prefixed with relative paths.
ValidationReport validate_workspace(const Workspace& ws);

}  // namespace facetsim
