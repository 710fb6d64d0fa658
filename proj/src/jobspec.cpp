#include "bridge/jobspec.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>

#include "bridge/errors.hpp"
#include "bridge/objectref.hpp"
#include "bridge/url.hpp"

namespace bridge {

std::string_view to_string(AdapterKind kind) noexcept {
  return kind == AdapterKind::Slurm ? "slurm" : "lsf";
}

std::string_view to_string(ScriptLocation location) noexcept {
  switch (location) {
    case ScriptLocation::Remote: return "remote";
    case ScriptLocation::S3: return "s3";
    case ScriptLocation::Inline: return "inline";
  }
  return "remote";
}

std::optional<AdapterKind> parse_adapter_kind(std::string_view text) noexcept {
  if (text == "slurm") return AdapterKind::Slurm;
  if (text == "lsf") return AdapterKind::Lsf;
  return std::nullopt;
}

std::optional<ScriptLocation> parse_script_location(std::string_view text) noexcept {
  if (text == "remote") return ScriptLocation::Remote;
  if (text == "s3") return ScriptLocation::S3;
  if (text == "inline") return ScriptLocation::Inline;
  return std::nullopt;
}

std::optional<ObjectRef> parse_object_ref(std::string_view text) noexcept {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    return std::nullopt;
  }
  return ObjectRef{std::string(text.substr(0, colon)), std::string(text.substr(colon + 1))};
}

bool is_valid_identifier(std::string_view text) noexcept {
  if (text.empty()) return false;
  auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); };
  if (!alnum(text.front()) || !alnum(text.back())) return false;
  return std::all_of(text.begin(), text.end(), [&](char c) { return alnum(c) || c == '-'; });
}

namespace {

using Issues = std::vector<SchemaError::Issue>;

bool is_hex_digest(std::string_view text) {
  if (text.size() != 32 && text.size() != 64) return false;
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; });
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Scalar as string; records an issue and returns nullopt for non-scalars.
std::optional<std::string> scalar(const YAML::Node& node, const std::string& field,
                                  Issues& issues) {
  if (!node.IsScalar()) {
    issues.push_back({field, "must be a scalar"});
    return std::nullopt;
  }
  return node.as<std::string>();
}

std::optional<std::string> required_string(const YAML::Node& parent, const char* key,
                                           const std::string& field, Issues& issues) {
  if (!parent || !parent.IsMap() || !parent[key] || parent[key].IsNull()) {
    issues.push_back({field, "required field is missing"});
    return std::nullopt;
  }
  auto value = scalar(parent[key], field, issues);
  if (value && value->empty()) {
    issues.push_back({field, "must not be empty"});
    return std::nullopt;
  }
  return value;
}

std::optional<std::string> optional_string(const YAML::Node& parent, const char* key,
                                           const std::string& field, Issues& issues) {
  if (!parent || !parent.IsMap() || !parent[key] || parent[key].IsNull()) return std::nullopt;
  auto value = scalar(parent[key], field, issues);
  if (value && value->empty()) return std::nullopt;
  return value;
}

/// Accepts a YAML mapping, or a string holding a JSON/YAML flow mapping (the
/// sample document writes jobproperties as a block scalar of JSON).
std::map<std::string, std::string> string_map(const YAML::Node& node, const std::string& field,
                                              Issues& issues) {
  std::map<std::string, std::string> out;
  if (!node || node.IsNull()) return out;
  YAML::Node map = node;
  if (node.IsScalar()) {
    auto text = trim(node.as<std::string>());
    if (text.empty()) return out;
    try {
      map = YAML::Load(text);
    } catch (const YAML::Exception&) {
      issues.push_back({field, "not a valid mapping"});
      return out;
    }
  }
  if (!map.IsMap()) {
    issues.push_back({field, "must be a mapping of strings"});
    return out;
  }
  for (const auto& kv : map) {
    if (!kv.second.IsScalar() && !kv.second.IsNull()) {
      issues.push_back({field + "." + kv.first.as<std::string>(), "must be a scalar"});
      continue;
    }
    out[kv.first.as<std::string>()] = kv.second.IsNull() ? "" : kv.second.as<std::string>();
  }
  return out;
}

/// Accepts a YAML sequence or a comma-separated string.
std::vector<std::string> string_list(const YAML::Node& node, const std::string& field,
                                     Issues& issues) {
  std::vector<std::string> out;
  if (!node || node.IsNull()) return out;
  if (node.IsSequence()) {
    for (const auto& item : node) {
      if (!item.IsScalar()) {
        issues.push_back({field, "items must be scalars"});
        continue;
      }
      out.push_back(item.as<std::string>());
    }
    return out;
  }
  if (!node.IsScalar()) {
    issues.push_back({field, "must be a list"});
    return out;
  }
  auto text = node.as<std::string>();
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto piece = trim(std::string_view(text).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<bool> parse_bool(std::string_view text) {
  if (text == "true" || text == "True" || text == "TRUE") return true;
  if (text == "false" || text == "False" || text == "FALSE") return false;
  return std::nullopt;
}

void check_invariants(const BridgeJobSpec& spec, Issues& issues) {
  if (!is_valid_identifier(spec.name)) {
    issues.push_back({"metadata.name", "must match [a-z0-9]([-a-z0-9]*[a-z0-9])?"});
  }
  if (!is_valid_identifier(spec.ns)) {
    issues.push_back({"metadata.namespace", "must match [a-z0-9]([-a-z0-9]*[a-z0-9])?"});
  }
  if (!parse_url(spec.resource_url)) {
    issues.push_back({"spec.resourceURL", "must be an absolute http or https URL"});
  }
  if (spec.resource_secret.empty()) {
    issues.push_back({"spec.resourcesecret", "required field is missing"});
  }
  if (spec.update_interval < 1) {
    issues.push_back({"spec.updateinterval", "must be >= 1"});
  }
  if (spec.jobdata.jobscript.empty()) {
    issues.push_back({"spec.jobdata.jobscript", "required field is missing"});
  }
  if (spec.jobdata.scriptmd && !is_hex_digest(*spec.jobdata.scriptmd)) {
    issues.push_back({"spec.jobdata.scriptmd", "must be an MD5 or SHA-256 hex digest"});
  }
  bool has_endpoint = spec.s3storage.endpoint.has_value();
  if (spec.jobdata.scriptlocation == ScriptLocation::S3) {
    if (!spec.jobdata.jobscript.empty() && !parse_object_ref(spec.jobdata.jobscript)) {
      issues.push_back({"spec.jobdata.jobscript", "must be <bucket>:<key> for s3 scripts"});
    }
    if (!has_endpoint) {
      issues.push_back({"spec.s3storage.endpoint", "required when scriptlocation is s3"});
    }
  }
  for (const auto& ref : spec.jobdata.additionaldata) {
    if (!parse_object_ref(ref)) {
      issues.push_back({"spec.jobdata.additionaldata", "'" + ref + "' is not <bucket>:<key>"});
    }
  }
  if (!spec.jobdata.additionaldata.empty() && !has_endpoint) {
    issues.push_back({"spec.s3storage.endpoint", "required when additionaldata is set"});
  }
  if (!spec.s3upload.files.empty()) {
    if (!spec.s3upload.bucket) {
      issues.push_back({"spec.s3upload.bucket", "required when s3upload.files is set"});
    }
    if (!has_endpoint) {
      issues.push_back({"spec.s3storage.endpoint", "required when s3upload.files is set"});
    }
  }
}

void dedupe(Issues& issues) {
  Issues unique;
  for (auto& issue : issues) {
    bool seen = std::any_of(unique.begin(), unique.end(), [&](const auto& u) {
      return u.field == issue.field && u.problem == issue.problem;
    });
    if (!seen) unique.push_back(std::move(issue));
  }
  issues = std::move(unique);
}

}  // namespace

void validate_spec(const BridgeJobSpec& spec) {
  Issues issues;
  check_invariants(spec, issues);
  dedupe(issues);
  if (!issues.empty()) throw SchemaError(std::move(issues));
}

BridgeJobSpec parse_spec(std::string_view document) {
  YAML::Node loaded;
  try {
    loaded = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw SchemaError(std::vector<SchemaError::Issue>{{"document", std::string("not well-formed: ") + e.what()}});
  }
  const YAML::Node& root = loaded;
  if (!root.IsMap()) throw SchemaError(std::vector<SchemaError::Issue>{{"document", "must be a mapping"}});

  Issues issues;
  BridgeJobSpec spec;

  if (auto kind = required_string(root, "kind", "kind", issues); kind && *kind != kBridgeJobKind) {
    issues.push_back({"kind", "must be BridgeJob"});
  }
  if (auto api = required_string(root, "apiVersion", "apiVersion", issues);
      api && *api != kBridgeJobApiVersion) {
    issues.push_back({"apiVersion", "must be " + std::string(kBridgeJobApiVersion)});
  }

  const YAML::Node metadata = root["metadata"];
  if (auto name = required_string(metadata, "name", "metadata.name", issues)) spec.name = *name;
  if (auto ns = optional_string(metadata, "namespace", "metadata.namespace", issues)) spec.ns = *ns;

  const YAML::Node body = root["spec"];
  if (!body || !body.IsMap()) {
    issues.push_back({"spec", "required section is missing"});
    dedupe(issues);
    throw SchemaError(std::move(issues));
  }

  auto url = required_string(body, "resourceURL", "spec.resourceURL", issues);
  if (url) spec.resource_url = *url;

  auto kind_text = optional_string(body, "adapterKind", "spec.adapterKind", issues);
  auto image = optional_string(body, "image", "spec.image", issues);
  std::optional<AdapterKind> kind;
  if (kind_text) {
    kind = parse_adapter_kind(*kind_text);
    if (!kind) issues.push_back({"spec.adapterKind", "must be one of slurm, lsf"});
  }
  if (image) {
    spec.image = image;
    std::optional<AdapterKind> from_image;
    if (image->find("slurm") != std::string::npos) from_image = AdapterKind::Slurm;
    else if (image->find("lsf") != std::string::npos) from_image = AdapterKind::Lsf;
    if (!from_image) {
      issues.push_back({"spec.image", "does not name a slurm or lsf controller"});
    } else if (kind && *kind != *from_image) {
      issues.push_back({"spec.image", "conflicts with adapterKind"});
    } else if (!kind_text) {
      kind = from_image;
    }
  }
  if (!kind_text && !image) {
    issues.push_back({"spec.adapterKind", "required field is missing (or give image)"});
  }
  if (kind) spec.adapter_kind = *kind;

  if (auto secret = required_string(body, "resourcesecret", "spec.resourcesecret", issues)) {
    spec.resource_secret = *secret;
  }
  if (auto policy = optional_string(body, "imagepullpolicy", "spec.imagepullpolicy", issues)) {
    spec.image_pull_policy = *policy;
  }
  if (auto interval = optional_string(body, "updateinterval", "spec.updateinterval", issues)) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(interval->data(), interval->data() + interval->size(), value);
    if (ec != std::errc{} || ptr != interval->data() + interval->size()) {
      issues.push_back({"spec.updateinterval", "must be an integer"});
    } else {
      spec.update_interval = value;
    }
  }

  const YAML::Node jobdata = body["jobdata"];
  if (!jobdata || !jobdata.IsMap()) {
    issues.push_back({"spec.jobdata", "required section is missing"});
  } else {
    if (auto script = required_string(jobdata, "jobscript", "spec.jobdata.jobscript", issues)) {
      spec.jobdata.jobscript = *script;
    }
    if (auto loc = required_string(jobdata, "scriptlocation", "spec.jobdata.scriptlocation", issues)) {
      if (auto parsed = parse_script_location(*loc)) {
        spec.jobdata.scriptlocation = *parsed;
      } else {
        issues.push_back({"spec.jobdata.scriptlocation", "must be one of remote, s3, inline"});
      }
    }
    spec.jobdata.scriptmd = optional_string(jobdata, "scriptmd", "spec.jobdata.scriptmd", issues);
    spec.jobdata.scriptextraloc =
        optional_string(jobdata, "scriptextraloc", "spec.jobdata.scriptextraloc", issues);
    spec.jobdata.additionaldata =
        string_list(jobdata["additionaldata"], "spec.jobdata.additionaldata", issues);
    spec.jobdata.jobproperties =
        string_map(jobdata["jobproperties"], "spec.jobdata.jobproperties", issues);
    spec.jobdata.jobparams = string_map(jobdata["jobparams"], "spec.jobdata.jobparams", issues);
  }

  if (const YAML::Node s3 = body["s3storage"]; s3 && !s3.IsNull()) {
    if (!s3.IsMap()) {
      issues.push_back({"spec.s3storage", "must be a mapping"});
    } else {
      spec.s3storage.s3secret = optional_string(s3, "s3secret", "spec.s3storage.s3secret", issues);
      spec.s3storage.endpoint = optional_string(s3, "endpoint", "spec.s3storage.endpoint", issues);
      if (auto secure = optional_string(s3, "secure", "spec.s3storage.secure", issues)) {
        if (auto b = parse_bool(*secure)) spec.s3storage.secure = *b;
        else issues.push_back({"spec.s3storage.secure", "must be a boolean"});
      }
    }
  }
  if (const YAML::Node upload = body["s3upload"]; upload && !upload.IsNull()) {
    if (!upload.IsMap()) {
      issues.push_back({"spec.s3upload", "must be a mapping"});
    } else {
      spec.s3upload.bucket = optional_string(upload, "bucket", "spec.s3upload.bucket", issues);
      spec.s3upload.files = string_list(upload["files"], "spec.s3upload.files", issues);
    }
  }

  // Field-level problems already cover missing values; only add invariant
  // failures for fields that were present.
  Issues invariant_issues;
  check_invariants(spec, invariant_issues);
  for (auto& issue : invariant_issues) {
    bool covered = std::any_of(issues.begin(), issues.end(),
                               [&](const auto& i) { return i.field == issue.field; });
    if (!covered) issues.push_back(std::move(issue));
  }
  dedupe(issues);
  if (!issues.empty()) throw SchemaError(std::move(issues));
  return spec;
}

std::string serialize_spec(const BridgeJobSpec& spec) {
  YAML::Emitter out;
  auto quoted = [&](const std::string& s) { out << YAML::DoubleQuoted << s; };
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(kBridgeJobKind);
  out << YAML::Key << "apiVersion" << YAML::Value << std::string(kBridgeJobApiVersion);
  out << YAML::Key << "metadata" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value;
  quoted(spec.name);
  out << YAML::Key << "namespace" << YAML::Value;
  quoted(spec.ns);
  out << YAML::EndMap;

  out << YAML::Key << "spec" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "resourceURL" << YAML::Value;
  quoted(spec.resource_url);
  out << YAML::Key << "adapterKind" << YAML::Value << std::string(to_string(spec.adapter_kind));
  if (spec.image) {
    out << YAML::Key << "image" << YAML::Value;
    quoted(*spec.image);
  }
  out << YAML::Key << "resourcesecret" << YAML::Value;
  quoted(spec.resource_secret);
  out << YAML::Key << "imagepullpolicy" << YAML::Value;
  quoted(spec.image_pull_policy);
  out << YAML::Key << "updateinterval" << YAML::Value << spec.update_interval;

  out << YAML::Key << "jobdata" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "jobscript" << YAML::Value;
  quoted(spec.jobdata.jobscript);
  out << YAML::Key << "scriptlocation" << YAML::Value
      << std::string(to_string(spec.jobdata.scriptlocation));
  if (spec.jobdata.scriptmd) {
    out << YAML::Key << "scriptmd" << YAML::Value;
    quoted(*spec.jobdata.scriptmd);
  }
  if (spec.jobdata.scriptextraloc) {
    out << YAML::Key << "scriptextraloc" << YAML::Value;
    quoted(*spec.jobdata.scriptextraloc);
  }
  if (!spec.jobdata.additionaldata.empty()) {
    out << YAML::Key << "additionaldata" << YAML::Value << YAML::BeginSeq;
    for (const auto& ref : spec.jobdata.additionaldata) quoted(ref);
    out << YAML::EndSeq;
  }
  auto emit_map = [&](const char* key, const std::map<std::string, std::string>& map) {
    if (map.empty()) return;
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : map) {
      out << YAML::Key;
      quoted(k);
      out << YAML::Value;
      quoted(v);
    }
    out << YAML::EndMap;
  };
  emit_map("jobproperties", spec.jobdata.jobproperties);
  emit_map("jobparams", spec.jobdata.jobparams);
  out << YAML::EndMap;

  out << YAML::Key << "s3storage" << YAML::Value << YAML::BeginMap;
  if (spec.s3storage.s3secret) {
    out << YAML::Key << "s3secret" << YAML::Value;
    quoted(*spec.s3storage.s3secret);
  }
  if (spec.s3storage.endpoint) {
    out << YAML::Key << "endpoint" << YAML::Value;
    quoted(*spec.s3storage.endpoint);
  }
  out << YAML::Key << "secure" << YAML::Value << spec.s3storage.secure;
  out << YAML::EndMap;

  if (spec.s3upload.bucket || !spec.s3upload.files.empty()) {
    out << YAML::Key << "s3upload" << YAML::Value << YAML::BeginMap;
    if (spec.s3upload.bucket) {
      out << YAML::Key << "bucket" << YAML::Value;
      quoted(*spec.s3upload.bucket);
    }
    out << YAML::Key << "files" << YAML::Value << YAML::BeginSeq;
    for (const auto& f : spec.s3upload.files) quoted(f);
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace bridge
