#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "bridge/jobspec.hpp"

namespace bridge {

/// Maps BridgeJob `jobproperties` names onto a manager's submission payload.
/// Loaded from the JSON manifests under data/translations.
struct TranslationManifest {
  enum class Type { String, Int };
  struct Rule {
    std::string field;  // dotted path into the payload object
    Type type = Type::String;
  };

  std::string adapter;
  std::map<std::string, Rule> properties;
  /// Payload field carrying the client job name used for de-duplication.
  std::string client_name_field;
  /// Where a user-supplied value for client_name_field is preserved.
  std::string displaced_name_field;

  /// Builds the job object. Unknown properties are skipped; a value that does
  /// not convert to its declared type raises Error(SubmitRejected).
  nlohmann::json translate(const std::map<std::string, std::string>& properties,
                           const std::string& client_name) const;
};

TranslationManifest parse_manifest(std::string_view json_text);
const TranslationManifest& builtin_manifest(AdapterKind kind);

}  // namespace bridge
