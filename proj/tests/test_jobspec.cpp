#include <gtest/gtest.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "bridge/errors.hpp"
#include "bridge/jobspec.hpp"

using namespace bridge;

namespace {

std::string sample_document() {
  std::ifstream in(std::string(BRIDGE_SOURCE_DIR) + "/config/samples/slurmjob-test.yaml");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> schema_fields(const std::string& doc) {
  try {
    parse_spec(doc);
  } catch (const SchemaError& e) {
    return e.fields();
  }
  return {};
}

bool lists(const std::vector<std::string>& fields, const std::string& suffix) {
  return std::any_of(fields.begin(), fields.end(), [&](const std::string& f) {
    return f.size() >= suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0;
  });
}

YAML::Node parent_of(YAML::Node root, const std::vector<std::string>& path) {
  YAML::Node node;
  node.reset(root);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) node.reset(node[path[i]]);
  return node;
}

std::string dump(const YAML::Node& node) {
  YAML::Emitter out;
  out << node;
  return out.c_str();
}

}  // namespace

TEST(JobSpec, ParsesSampleDocument) {
  auto spec = parse_spec(sample_document());
  EXPECT_EQ(spec.name, "slurmjob-test");
  EXPECT_EQ(spec.ns, "default");
  EXPECT_EQ(spec.update_interval, 20);
  EXPECT_EQ(spec.jobdata.scriptlocation, ScriptLocation::S3);
  EXPECT_EQ(spec.jobdata.jobscript, "mys3bucket:slurmbatch.sh");
  EXPECT_EQ(spec.jobdata.jobproperties.at("Queue"), "V100");
  EXPECT_EQ(spec.jobdata.jobproperties.at("Tasks"), "2");
  EXPECT_EQ(spec.jobdata.jobproperties.at("NodesNumber"), "1");
  EXPECT_EQ(spec.jobdata.jobproperties.at("OutputFileName"), "slurmjob.out");
  EXPECT_EQ(spec.jobdata.jobproperties.at("envLibPath"), "/usr/mpi/gcc/openmpi-4.0.3rc4/lib");
  EXPECT_EQ(spec.adapter_kind, AdapterKind::Slurm);
  EXPECT_EQ(spec.image, "slurmpod:0.1");
  EXPECT_EQ(spec.resource_secret, "mysecret");
  EXPECT_EQ(spec.image_pull_policy, "Always");
  EXPECT_EQ(spec.s3storage.s3secret, "mysecret-s3");
  EXPECT_EQ(spec.s3storage.endpoint, "s3endpoint.cloud");
  EXPECT_FALSE(spec.s3storage.secure);
  EXPECT_EQ(spec.resource_url, "http://my-slurm-cluster@hpc.com");
}

TEST(JobSpec, Defaults) {
  auto doc = YAML::Load(sample_document());
  doc["spec"].remove("updateinterval");
  doc["spec"].remove("imagepullpolicy");
  doc["spec"]["s3storage"].remove("secure");
  auto spec = parse_spec(dump(doc));
  EXPECT_EQ(spec.update_interval, 20);
  EXPECT_EQ(spec.image_pull_policy, "IfNotPresent");
  EXPECT_FALSE(spec.s3storage.secure);
}

TEST(JobSpec, MissingResourceUrl) {
  auto doc = YAML::Load(sample_document());
  doc["spec"].remove("resourceURL");
  auto fields = schema_fields(dump(doc));
  EXPECT_TRUE(lists(fields, "resourceURL"));
}

TEST(JobSpec, MissingSectionsAreSchemaErrors) {
  EXPECT_EQ(schema_fields("kind: BridgeJob\n"),
            (std::vector<std::string>{"apiVersion", "metadata.name", "spec"}));
  EXPECT_TRUE(lists(schema_fields("kind: BridgeJob\nmetadata: 3\nspec: {}\n"), "metadata.name"));
  EXPECT_TRUE(lists(schema_fields("[1, 2]"), "document"));
  EXPECT_TRUE(lists(schema_fields("kind: [unterminated"), "document"));
}

TEST(JobSpec, InlineScriptKeepsBody) {
  auto doc = YAML::Load(sample_document());
  doc["spec"]["jobdata"]["scriptlocation"] = "inline";
  doc["spec"]["jobdata"]["jobscript"] = "#!/bin/sh\necho hi";
  auto spec = parse_spec(dump(doc));
  EXPECT_EQ(spec.jobdata.scriptlocation, ScriptLocation::Inline);
  EXPECT_EQ(spec.jobdata.jobscript, "#!/bin/sh\necho hi");
}

TEST(JobSpec, ErrorsAreAggregated) {
  auto doc = YAML::Load(sample_document());
  doc["spec"].remove("resourceURL");
  doc["spec"].remove("resourcesecret");
  doc["spec"]["updateinterval"] = 0;
  doc["metadata"]["name"] = "Not_Valid";
  auto fields = schema_fields(dump(doc));
  EXPECT_TRUE(lists(fields, "resourceURL"));
  EXPECT_TRUE(lists(fields, "resourcesecret"));
  EXPECT_TRUE(lists(fields, "updateinterval"));
  EXPECT_TRUE(lists(fields, "name"));
}

TEST(JobSpec, TypeInvariants) {
  auto with = [](auto mutate) {
    auto doc = YAML::Load(sample_document());
    mutate(doc);
    return schema_fields(dump(doc));
  };
  EXPECT_TRUE(lists(with([](YAML::Node& d) { d["spec"]["resourceURL"] = "ftp://host"; }), "resourceURL"));
  EXPECT_TRUE(lists(with([](YAML::Node& d) { d["spec"]["jobdata"]["jobscript"] = "no-colon"; }), "jobscript"));
  EXPECT_TRUE(lists(with([](YAML::Node& d) { d["spec"]["s3storage"].remove("endpoint"); }), "endpoint"));
  EXPECT_TRUE(lists(with([](YAML::Node& d) { d["spec"]["image"] = "raypod:1"; }), "image"));
  EXPECT_TRUE(lists(with([](YAML::Node& d) { d["spec"]["jobdata"]["scriptlocation"] = "ftp"; }), "scriptlocation"));
  EXPECT_TRUE(lists(with([](YAML::Node& d) {
    d["spec"]["s3upload"]["files"].push_back("out.txt");
  }), "bucket"));
  EXPECT_TRUE(schema_fields("key: [unclosed").size() == 1);
}

TEST(JobSpec, ImageSelectsAdapter) {
  auto doc = YAML::Load(sample_document());
  doc["spec"]["image"] = "lsfpod:0.1";
  EXPECT_EQ(parse_spec(dump(doc)).adapter_kind, AdapterKind::Lsf);
  doc["spec"].remove("image");
  doc["spec"]["adapterKind"] = "slurm";
  auto spec = parse_spec(dump(doc));
  EXPECT_EQ(spec.adapter_kind, AdapterKind::Slurm);
  EXPECT_FALSE(spec.image);
}

TEST(JobSpec, JsonDocumentAccepted) {
  std::string doc = R"({"kind":"BridgeJob","apiVersion":"bridgeoperator.ibm.com/v1alpha1",
    "metadata":{"name":"j1","namespace":"team-a"},
    "spec":{"resourceURL":"https://lsf.example:8443/","adapterKind":"lsf","resourcesecret":"s",
            "jobdata":{"jobscript":"/home/u/run.sh","scriptlocation":"remote",
                       "jobproperties":{"Queue":"normal"}}}})";
  auto spec = parse_spec(doc);
  EXPECT_EQ(spec.key(), (JobKey{"team-a", "j1"}));
  EXPECT_EQ(spec.adapter_kind, AdapterKind::Lsf);
  EXPECT_EQ(spec.jobdata.jobproperties.at("Queue"), "normal");
}

TEST(JobSpec, SerializeRoundTripIsIdempotent) {
  auto once = parse_spec(sample_document());
  auto twice = parse_spec(serialize_spec(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(serialize_spec(once), serialize_spec(twice));
}

TEST(JobSpec, RandomSpecsRoundTrip) {
  std::mt19937 rng(99);
  auto word = [&](int min_len = 1) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::uniform_int_distribution<int> len(min_len, 12);
    std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
    std::string s(static_cast<std::size_t>(len(rng)), 'a');
    for (auto& c : s) c = alphabet[ch(rng)];
    return s;
  };
  auto text = [&] {
    static const std::string alphabet = "ab :#'\"\\\n\t-{}[],&*!|>%@`$x";
    std::uniform_int_distribution<int> len(0, 30);
    std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
    std::string s(static_cast<std::size_t>(len(rng)), 'a');
    for (auto& c : s) c = alphabet[ch(rng)];
    return s;
  };
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 300; ++i) {
    BridgeJobSpec spec;
    spec.name = word();
    spec.ns = word();
    spec.resource_url = (coin(rng) ? "http://" : "https://") + word() + ":" + std::to_string(1000 + i);
    spec.adapter_kind = coin(rng) ? AdapterKind::Slurm : AdapterKind::Lsf;
    spec.resource_secret = word();
    spec.update_interval = 1 + i;
    spec.s3storage.endpoint = word() + ".example";
    spec.s3storage.s3secret = word();
    spec.s3storage.secure = coin(rng);
    switch (i % 3) {
      case 0: spec.jobdata.scriptlocation = ScriptLocation::Inline; spec.jobdata.jobscript = "#!" + text() + "x"; break;
      case 1: spec.jobdata.scriptlocation = ScriptLocation::S3; spec.jobdata.jobscript = word() + ":" + word(); break;
      default: spec.jobdata.scriptlocation = ScriptLocation::Remote; spec.jobdata.jobscript = "/" + word(); break;
    }
    if (coin(rng)) spec.jobdata.scriptmd = std::string(32, 'a');
    for (int k = 0; k < i % 5; ++k) spec.jobdata.jobproperties[word()] = text();
    for (int k = 0; k < i % 3; ++k) spec.jobdata.jobparams[word()] = text();
    for (int k = 0; k < i % 2; ++k) spec.jobdata.additionaldata.push_back(word() + ":" + word());
    if (coin(rng)) {
      spec.s3upload.bucket = word(3);
      spec.s3upload.files = {word() + ".out"};
    }
    validate_spec(spec);
    auto back = parse_spec(serialize_spec(spec));
    ASSERT_EQ(back, spec) << serialize_spec(spec);
  }
}

TEST(JobSpec, RandomRequiredFieldDeletionIsRejected) {
  const std::vector<std::vector<std::string>> required = {
      {"kind"},
      {"apiVersion"},
      {"metadata", "name"},
      {"spec", "resourceURL"},
      {"spec", "image"},
      {"spec", "resourcesecret"},
      {"spec", "jobdata", "jobscript"},
      {"spec", "jobdata", "scriptlocation"},
      {"spec", "s3storage", "endpoint"},
  };
  const std::string base = sample_document();
  std::mt19937 rng(4242);
  for (int round = 0; round < 200; ++round) {
    auto doc = YAML::Load(base);
    std::vector<std::size_t> order(required.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t count = 1 + static_cast<std::size_t>(round % 3);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& path = required[order[i]];
      parent_of(doc, path).remove(path.back());
    }
    auto fields = schema_fields(dump(doc));
    ASSERT_FALSE(fields.empty());
    bool location_removed = false;
    for (std::size_t i = 0; i < count; ++i) location_removed |= required[order[i]].back() == "scriptlocation";
    for (std::size_t i = 0; i < count; ++i) {
      const auto& path = required[order[i]];
      // endpoint is only required while the script lives in object storage
      if (path.back() == "endpoint" && location_removed) continue;
      std::string leaf = path.back() == "image" ? "adapterKind" : path.back();
      EXPECT_TRUE(lists(fields, leaf)) << "removed " << path.back();
    }
  }
}

TEST(JobSpec, Identifiers) {
  EXPECT_TRUE(is_valid_identifier("slurmjob-test"));
  EXPECT_TRUE(is_valid_identifier("a"));
  EXPECT_FALSE(is_valid_identifier(""));
  EXPECT_FALSE(is_valid_identifier("-a"));
  EXPECT_FALSE(is_valid_identifier("a-"));
  EXPECT_FALSE(is_valid_identifier("Upper"));
  EXPECT_FALSE(is_valid_identifier("a_b"));
}
