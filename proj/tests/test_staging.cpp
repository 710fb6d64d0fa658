#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "bridge/errors.hpp"
#include "bridge/objectref.hpp"
#include "bridge/objectstore.hpp"
#include "bridge/staging.hpp"
#include "support/harness.hpp"

using namespace bridge;
using namespace std::chrono_literals;
using test::Cluster;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::StoreError;
}

ObjectStoreClient storage_client(const Cluster& c, const Clock& clock) {
  return ObjectStoreClient(*parse_endpoint(c.storage_endpoint(), false), {test::kAccessKey, test::kSecretKey},
                           clock, 2s);
}

std::string random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::string out(n, '\0');
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& c : out) c = static_cast<char>(byte(rng));
  return out;
}

}  // namespace

TEST(Digests, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("hello"), "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
  EXPECT_EQ(md5_hex("hello"), "5d41402abc4b2a76b9719d911017c592");
}

TEST(SigV4, MatchesReferenceSigner) {
  // Reference value produced by botocore's S3SigV4Auth for the same request.
  auto at = parse_rfc3339("2026-10-19T14:34:15Z");
  ASSERT_TRUE(at);
  SigningInput input;
  input.method = "PUT";
  input.canonical_uri = "/mybucket/dir/slurmjob.out";
  input.payload_hash = sha256_hex("hello");
  input.headers = {{"host", "127.0.0.1:9000"},
                   {"x-amz-content-sha256", input.payload_hash},
                   {"x-amz-date", amz_date(*at)}};
  EXPECT_EQ(amz_date(*at), "20261019T143415Z");
  auto header = sigv4_authorization(input, {"AKIDEXAMPLE", "wJalrXUtnFEMI/K7MDENG+bPxRfiCYEXAMPLEKEY"}, *at);
  EXPECT_EQ(header,
            "AWS4-HMAC-SHA256 Credential=AKIDEXAMPLE/20261019/us-east-1/s3/aws4_request, "
            "SignedHeaders=host;x-amz-content-sha256;x-amz-date, "
            "Signature=735bf34156a65bff67b495b7bbd6cbb7a17f143b5195be26c0d8d6ef0e1635b2");
}

TEST(ObjectRefs, Parse) {
  EXPECT_EQ(parse_object_ref("mys3bucket:slurmbatch.sh"), (ObjectRef{"mys3bucket", "slurmbatch.sh"}));
  EXPECT_EQ(parse_object_ref("b:dir/a:b"), (ObjectRef{"b", "dir/a:b"}));
  EXPECT_FALSE(parse_object_ref(":key"));
  EXPECT_FALSE(parse_object_ref("bucket:"));
  EXPECT_FALSE(parse_object_ref("nocolon"));
}

TEST(ObjectStoreClient, RoundTripAndErrors) {
  SimClock clock;
  Cluster c(clock);
  auto client = storage_client(c, clock);
  EXPECT_EQ(code_of([&] { client.put_object({"nobucket", "k"}, "x"); }), Errc::ObjectMissing);
  client.ensure_bucket("b");
  client.ensure_bucket("b");
  std::mt19937_64 rng(5);
  for (std::size_t size : {0u, 1u, 255u, 4096u, 1u << 20}) {
    auto data = random_bytes(rng, size);
    client.put_object({"b", "dir/file " + std::to_string(size)}, data);
    EXPECT_EQ(client.get_object({"b", "dir/file " + std::to_string(size)}), data);
  }
  EXPECT_EQ(code_of([&] { client.get_object({"b", "missing"}); }), Errc::ObjectMissing);
  ObjectStoreClient wrong(*parse_endpoint(c.storage_endpoint(), false), {"OTHERKEY", "x"}, clock, 2s);
  EXPECT_EQ(code_of([&] { wrong.get_object({"b", "dir/file 1"}); }), Errc::StorageError);
  ObjectStoreClient down(*parse_endpoint("127.0.0.1:1", false), {test::kAccessKey, test::kSecretKey}, clock, 1s);
  EXPECT_EQ(code_of([&] { down.get_object({"b", "k"}); }), Errc::StorageUnreachable);
}

TEST(ResolveScript, ThreeLocations) {
  SimClock clock;
  Cluster c(clock);
  auto client = storage_client(c, clock);
  c.storage.create_bucket("mys3bucket");
  c.storage.put("mys3bucket", "slurmbatch.sh", "#!/bin/bash\nsrun hostname\n");

  auto spec = test::job_spec(c, {.location = "s3", .script = "mys3bucket:slurmbatch.sh"});
  EXPECT_EQ(resolve_script(spec, &client), JobScript::body("#!/bin/bash\nsrun hostname\n"));

  auto inline_spec = test::job_spec(c, {.location = "inline", .script = "#!/bin/sh\necho hi"});
  auto before = client.request_count();
  EXPECT_EQ(resolve_script(inline_spec, &client), JobScript::body("#!/bin/sh\necho hi"));
  EXPECT_EQ(resolve_script(inline_spec, nullptr), JobScript::body("#!/bin/sh\necho hi"));

  auto remote_spec = test::job_spec(c, {.location = "remote", .script = "/home/user/run.sh"});
  EXPECT_EQ(resolve_script(remote_spec, &client), JobScript::remote_path("/home/user/run.sh"));
  EXPECT_EQ(client.request_count(), before);

  auto missing = test::job_spec(c, {.location = "s3", .script = "mys3bucket:absent.sh"});
  EXPECT_EQ(code_of([&] { resolve_script(missing, &client); }), Errc::ObjectMissing);
}

TEST(ResolveScript, DigestChecks) {
  SimClock clock;
  Cluster c(clock);
  auto client = storage_client(c, clock);
  c.storage.create_bucket("scripts");
  c.storage.put("scripts", "run.sh", "hello");
  auto with_md = [&](std::string md) {
    return test::job_spec(c, {.location = "s3", .script = "scripts:run.sh", .scriptmd = md});
  };
  EXPECT_NO_THROW(resolve_script(with_md("5D41402ABC4B2A76B9719D911017C592"), &client));
  EXPECT_NO_THROW(resolve_script(with_md("2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"), &client));
  EXPECT_EQ(code_of([&] { resolve_script(with_md(std::string(32, '0')), &client); }), Errc::DigestMismatch);
}

TEST(JobParams, ExportsAfterShebang) {
  EXPECT_EQ(apply_job_params("#!/bin/sh\necho $A\n", {{"A", "it's"}, {"B", "2"}}),
            "#!/bin/sh\nexport A='it'\\''s'\nexport B='2'\necho $A\n");
  EXPECT_EQ(apply_job_params("echo x", {{"K", "v"}}), "export K='v'\necho x");
  EXPECT_EQ(apply_job_params("echo x", {}), "echo x");
}

TEST(StageInputs, DeliversToWorkingDirectory) {
  SimClock clock;
  Cluster c(clock, mock::Flavor::Lsf);
  auto client = storage_client(c, clock);
  c.storage.create_bucket("inputs");
  c.storage.put("inputs", "a/data1.csv", "1");
  c.storage.put("inputs", "data2.bin", std::string("\0\1\2", 3));
  auto spec = test::job_spec(c, {.properties = {{"currentWorkingDir", "path-to-test/test-script/"}},
                                 .additional = {"inputs:a/data1.csv", "inputs:data2.bin"}});
  auto adapter = make_adapter(AdapterKind::Lsf, *parse_url(c.manager_url()), 2s);
  CredentialSet creds;
  creds.username = test::kUser;
  creds.token = test::kToken;
  auto session = adapter->get_token(creds);
  auto staged = stage_inputs(spec, &client, *adapter, session);
  EXPECT_EQ(staged, (std::vector<std::string>{"path-to-test/test-script/data1.csv", "path-to-test/test-script/data2.bin"}));
  EXPECT_EQ(c.manager.shared_file("path-to-test/test-script/data1.csv"), "1");
  EXPECT_EQ(c.manager.shared_file("path-to-test/test-script/data2.bin"), std::string("\0\1\2", 3));

  auto none = test::job_spec(c, {});
  EXPECT_TRUE(stage_inputs(none, nullptr, *adapter, session).empty());
  auto missing = test::job_spec(c, {.additional = {"inputs:nope"}});
  EXPECT_EQ(code_of([&] { stage_inputs(missing, &client, *adapter, session); }), Errc::ObjectMissing);
}

TEST(UploadOutputs, RoundTripAndEmpty) {
  SimClock clock;
  Cluster c(clock);
  auto client = storage_client(c, clock);
  auto result = upload_outputs(client, "results", {{"/abs/slurmjob.out", "content\n"}}, clock);
  EXPECT_TRUE(result.errors.empty());
  EXPECT_EQ(result.keys, std::vector<std::string>{"abs/slurmjob.out"});
  EXPECT_EQ(c.storage.get("results", "abs/slurmjob.out"), "content\n");
  auto before = client.request_count();
  auto empty = upload_outputs(client, "results", {}, clock);
  EXPECT_TRUE(empty.keys.empty() && empty.errors.empty());
  EXPECT_EQ(client.request_count(), before);
}

TEST(UploadOutputs, StorageDownRetriesThreeTimes) {
  SimClock clock;
  ObjectStoreClient down(*parse_endpoint("127.0.0.1:1", false), {test::kAccessKey, test::kSecretKey}, clock, 1s);
  auto start = clock.now();
  auto result = upload_outputs(down, "results", {{"slurmjob.out", "x"}}, clock, {}, {3, Duration(1000)});
  EXPECT_TRUE(result.keys.empty());
  ASSERT_EQ(result.errors.size(), 1u);
  EXPECT_EQ(down.request_count(), 4u);
  EXPECT_EQ(clock.now() - start, Duration(1000 + 2000 + 4000));
}

TEST(UploadOutputs, RecoversFromTransientDrops) {
  SimClock clock;
  Cluster c(clock);
  auto client = storage_client(c, clock);
  c.storage.set_fault_plan({2, false, 0});
  auto result = upload_outputs(client, "results", {{"slurmjob.out", "x"}}, clock, {}, {3, Duration(10)});
  EXPECT_TRUE(result.errors.empty());
  EXPECT_EQ(c.storage.get("results", "slurmjob.out"), "x");
}

TEST(SimClock, JumpsWhenAllParticipantsSleep) {
  SimClock clock;
  auto start = clock.now();
  auto a = clock.hold();
  auto b = clock.hold();
  std::jthread t([&, h = std::move(b)]() mutable {
    clock.sleep_for(5s);
    h.reset();
  });
  std::this_thread::sleep_for(20ms);
  EXPECT_EQ(clock.now(), start);
  clock.sleep_for(3s);
  EXPECT_EQ(clock.now() - start, Duration(3000));
  a.reset();
  t.join();
  EXPECT_EQ(clock.now() - start, Duration(5000));
}

TEST(SimClock, StopTokenInterruptsSleep) {
  SimClock clock;
  auto keep_awake = clock.hold();
  auto second = clock.hold();
  std::stop_source source;
  bool result = true;
  std::jthread t([&] { result = clock.sleep_for(10s, source.get_token()); });
  std::this_thread::sleep_for(20ms);
  source.request_stop();
  t.join();
  EXPECT_FALSE(result);
}

TEST(Rfc3339, RoundTrip) {
  auto t = from_epoch_seconds(1735689600);
  EXPECT_EQ(format_rfc3339(t), "2025-01-01T00:00:00Z");
  EXPECT_EQ(parse_rfc3339("2025-01-01T00:00:00Z"), t);
  EXPECT_FALSE(parse_rfc3339("yesterday"));
}
