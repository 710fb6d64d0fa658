#include "bridge/record_codec.hpp"

#include <nlohmann/json.hpp>

#include "bridge/errors.hpp"

namespace bridge {

using nlohmann::json;

RecordData spec_to_record(const BridgeJobSpec& spec) {
  RecordData d;
  d[field::kResourceUrl] = spec.resource_url;
  d["adapterKind"] = std::string(to_string(spec.adapter_kind));
  if (spec.image) d["image"] = *spec.image;
  d["resourcesecret"] = spec.resource_secret;
  d["imagepullpolicy"] = spec.image_pull_policy;
  d["updateinterval"] = std::to_string(spec.update_interval);
  d["jobscript"] = spec.jobdata.jobscript;
  d["scriptlocation"] = std::string(to_string(spec.jobdata.scriptlocation));
  if (spec.jobdata.scriptmd) d["scriptmd"] = *spec.jobdata.scriptmd;
  if (spec.jobdata.scriptextraloc) d["scriptextraloc"] = *spec.jobdata.scriptextraloc;
  d["additionaldata"] = json(spec.jobdata.additionaldata).dump();
  d["jobproperties"] = json(spec.jobdata.jobproperties).dump();
  d["jobparams"] = json(spec.jobdata.jobparams).dump();
  if (spec.s3storage.s3secret) d["s3secret"] = *spec.s3storage.s3secret;
  if (spec.s3storage.endpoint) d["s3endpoint"] = *spec.s3storage.endpoint;
  d["s3secure"] = spec.s3storage.secure ? "true" : "false";
  if (spec.s3upload.bucket) d["s3uploadbucket"] = *spec.s3upload.bucket;
  d["s3uploadfiles"] = json(spec.s3upload.files).dump();
  return d;
}

BridgeJobSpec spec_from_record(const JobKey& key, const RecordData& data) {
  auto get = [&](const char* name) -> std::optional<std::string> {
    auto it = data.find(name);
    if (it == data.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  BridgeJobSpec spec;
  spec.ns = key.ns;
  spec.name = key.name;
  std::vector<SchemaError::Issue> issues;
  try {
    spec.resource_url = get(field::kResourceUrl).value_or("");
    if (auto kind = parse_adapter_kind(get("adapterKind").value_or(""))) spec.adapter_kind = *kind;
    else issues.push_back({"adapterKind", "missing or invalid"});
    spec.image = get("image");
    spec.resource_secret = get("resourcesecret").value_or("");
    spec.image_pull_policy = get("imagepullpolicy").value_or("IfNotPresent");
    spec.update_interval = std::stoi(get("updateinterval").value_or("20"));
    spec.jobdata.jobscript = get("jobscript").value_or("");
    if (auto loc = parse_script_location(get("scriptlocation").value_or(""))) {
      spec.jobdata.scriptlocation = *loc;
    } else {
      issues.push_back({"scriptlocation", "missing or invalid"});
    }
    spec.jobdata.scriptmd = get("scriptmd");
    spec.jobdata.scriptextraloc = get("scriptextraloc");
    spec.jobdata.additionaldata = json::parse(get("additionaldata").value_or("[]")).get<std::vector<std::string>>();
    spec.jobdata.jobproperties =
        json::parse(get("jobproperties").value_or("{}")).get<std::map<std::string, std::string>>();
    spec.jobdata.jobparams = json::parse(get("jobparams").value_or("{}")).get<std::map<std::string, std::string>>();
    spec.s3storage.s3secret = get("s3secret");
    spec.s3storage.endpoint = get("s3endpoint");
    spec.s3storage.secure = get("s3secure").value_or("false") == "true";
    spec.s3upload.bucket = get("s3uploadbucket");
    spec.s3upload.files = json::parse(get("s3uploadfiles").value_or("[]")).get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    issues.push_back({"record", std::string("malformed execution parameters: ") + e.what()});
  }
  if (!issues.empty()) throw SchemaError(std::move(issues));
  validate_spec(spec);
  return spec;
}

}  // namespace bridge
