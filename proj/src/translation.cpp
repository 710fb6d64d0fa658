#include "bridge/translation.hpp"

#include <charconv>

#include "bridge/errors.hpp"
#include "translations_embedded.hpp"

namespace bridge {

using nlohmann::json;

namespace {

json& slot(json& root, const std::string& dotted) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    node = &(*node)[part];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

const json* lookup(const json& root, const std::string& dotted) {
  const json* node = &root;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
}

}  // namespace

json TranslationManifest::translate(const std::map<std::string, std::string>& props,
                                    const std::string& client_name) const {
  json job = json::object();
  for (const auto& [name, value] : props) {
    auto it = properties.find(name);
    if (it == properties.end()) continue;
    const auto& rule = it->second;
    if (rule.type == Type::Int) {
      long long number = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw Error(Errc::SubmitRejected,
                    "job property " + name + "='" + value + "' is not an integer");
      }
      slot(job, rule.field) = number;
    } else {
      slot(job, rule.field) = value;
    }
  }
  if (!client_name_field.empty() && !client_name.empty()) {
    if (const json* user = lookup(job, client_name_field);
        user != nullptr && !displaced_name_field.empty()) {
      slot(job, displaced_name_field) = *user;
    }
    slot(job, client_name_field) = client_name;
  }
  return job;
}

TranslationManifest parse_manifest(std::string_view json_text) {
  TranslationManifest manifest;
  try {
    auto doc = json::parse(json_text);
    manifest.adapter = doc.at("adapter").get<std::string>();
    manifest.client_name_field = doc.value("client_name_field", "");
    manifest.displaced_name_field = doc.value("displaced_name_field", "");
    for (const auto& [name, rule] : doc.at("properties").items()) {
      TranslationManifest::Rule r;
      r.field = rule.at("field").get<std::string>();
      auto type = rule.value("type", "string");
      if (type == "int") r.type = TranslationManifest::Type::Int;
      else if (type != "string") throw Error(Errc::SchemaError, "unknown property type " + type);
      manifest.properties.emplace(name, std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("invalid translation manifest: ") + e.what());
  }
  return manifest;
}

const TranslationManifest& builtin_manifest(AdapterKind kind) {
  static const TranslationManifest slurm = parse_manifest(embedded::kSlurmTranslation);
  static const TranslationManifest lsf = parse_manifest(embedded::kLsfTranslation);
  return kind == AdapterKind::Slurm ? slurm : lsf;
}

}  // namespace bridge
