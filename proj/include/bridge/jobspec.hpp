#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bridge/state.hpp"

namespace bridge {

inline constexpr std::string_view kBridgeJobKind = "BridgeJob";
inline constexpr std::string_view kBridgeJobApiVersion =
    "bridgeoperator.ibm.com/v1alpha1";
inline constexpr std::string_view kDefaultNamespace = "default";

enum class AdapterKind { Slurm, Lsf };
enum class ScriptLocation { Remote, S3, Inline };

std::string_view to_string(AdapterKind kind) noexcept;
std::string_view to_string(ScriptLocation location) noexcept;
std::optional<AdapterKind> parse_adapter_kind(std::string_view text) noexcept;
std::optional<ScriptLocation> parse_script_location(std::string_view text) noexcept;

struct JobData {
  std::string jobscript;
  ScriptLocation scriptlocation = ScriptLocation::Remote;
  std::optional<std::string> scriptmd;
  std::optional<std::string> scriptextraloc;
  std::vector<std::string> additionaldata;
  std::map<std::string, std::string> jobproperties;
  std::map<std::string, std::string> jobparams;

  bool operator==(const JobData&) const = default;
};

struct S3Storage {
  std::optional<std::string> s3secret;
  std::optional<std::string> endpoint;
  bool secure = false;

  bool operator==(const S3Storage&) const = default;
};

struct S3Upload {
  std::optional<std::string> bucket;
  std::vector<std::string> files;

  bool operator==(const S3Upload&) const = default;
};

/// Validated BridgeJob document.
struct BridgeJobSpec {
  std::string name;
  std::string ns{kDefaultNamespace};
  std::string resource_url;
  AdapterKind adapter_kind = AdapterKind::Slurm;
  /// Original `image:` value when the document used it to select the adapter.
  std::optional<std::string> image;
  std::string resource_secret;
  std::string image_pull_policy = "IfNotPresent";
  int update_interval = 20;
  JobData jobdata;
  S3Storage s3storage;
  S3Upload s3upload;

  JobKey key() const { return {ns, name}; }
  bool operator==(const BridgeJobSpec&) const = default;
};

/// Parses and validates a BridgeJob document (YAML, or JSON as a YAML
/// subset). Throws SchemaError listing every invalid or missing field, or
/// when the text is not well-formed.
BridgeJobSpec parse_spec(std::string_view document);

/// Canonical YAML rendering; parse_spec(serialize_spec(s)) == s.
std::string serialize_spec(const BridgeJobSpec& spec);

/// Checks the type invariants of an already built spec (used by parse_spec
/// and by callers that assemble specs programmatically).
void validate_spec(const BridgeJobSpec& spec);

bool is_valid_identifier(std::string_view text) noexcept;

}  // namespace bridge
