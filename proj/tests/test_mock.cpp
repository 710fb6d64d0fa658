#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "bridge/errors.hpp"
#include "bridge/http.hpp"
#include "bridge/mock.hpp"
#include "support/harness.hpp"

using namespace bridge;
using namespace bridge::mock;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

HttpClient client_for(const std::string& base) { return HttpClient(*parse_url(base), std::chrono::seconds(5)); }

HttpRequest slurm(const std::string& method, const std::string& target, std::string body = {},
                  const std::string& token = test::kToken) {
  HttpRequest req;
  req.method = method;
  req.target = target;
  req.body = std::move(body);
  if (!req.body.empty()) req.content_type = "application/json";
  req.headers = {{"X-SLURM-USER-NAME", test::kUser}, {"X-SLURM-USER-TOKEN", token}};
  return req;
}

std::string submit_body(const std::string& name) {
  return json{{"job", {{"name", name}, {"nodes", 1}, {"standard_output", "slurmjob.out"}}},
              {"script", "#!/bin/sh\necho hi\n"}}
      .dump();
}

std::int64_t submit(const HttpClient& http, const std::string& name) {
  auto res = http.send(slurm("POST", "/slurm/v0.0.37/job/submit", submit_body(name)));
  EXPECT_EQ(res.status, 200);
  return json::parse(res.body).at("job_id").get<std::int64_t>();
}

std::string slurm_state(const HttpClient& http, std::int64_t id) {
  auto res = http.send(slurm("GET", "/slurm/v0.0.37/job/" + std::to_string(id)));
  return json::parse(res.body)["jobs"][0]["job_state"].get<std::string>();
}

ManagerConfig config(Timeline timeline = {}) {
  ManagerConfig c;
  c.users = {{test::kUser, test::kToken}};
  c.timeline = timeline;
  c.stdout_template = "hello from {name} job {id}: {state}\n";
  return c;
}

}  // namespace

TEST(MockManager, IdsStartAtOneAndDedupeByName) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  EXPECT_EQ(submit(http, "a"), 1);
  EXPECT_EQ(submit(http, "a"), 1);
  EXPECT_EQ(submit(http, "b"), 2);
  EXPECT_EQ(m.submit_requests("a"), 2);
  EXPECT_EQ(m.effective_jobs("a"), 1);
  EXPECT_EQ(m.effective_jobs("b"), 1);
}

TEST(MockManager, RejectModeAndAuth) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  EXPECT_EQ(http.send(slurm("GET", "/slurm/v0.0.37/ping", {}, "wrong")).status, 401);
  m.set_fault_plan({0, true, 0});
  EXPECT_EQ(http.send(slurm("POST", "/slurm/v0.0.37/job/submit", submit_body("x"))).status, 500);
  EXPECT_EQ(m.effective_jobs("x"), 0);
  m.set_fault_plan({});
  EXPECT_EQ(http.send(slurm("POST", "/slurm/v0.0.37/job/submit", submit_body("x"))).status, 200);
}

TEST(MockManager, TimelineAdvancesWithClock) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config({0s, 1s, Phase::Completed}));
  auto id = m.submit("t", json::object(), "");
  m.advance();
  EXPECT_EQ(m.job(id)->phase, Phase::Running);
  clock.advance(999ms);
  m.advance();
  EXPECT_EQ(m.job(id)->phase, Phase::Running);
  clock.advance(1ms);
  m.advance();
  EXPECT_EQ(m.job(id)->phase, Phase::Completed);
  EXPECT_EQ(m.job(id)->started, m.job(id)->submitted);
  EXPECT_EQ(*m.job(id)->ended, m.job(id)->submitted + Duration(1000));
}

TEST(MockManager, FinalStateFailed) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config({1s, 1s, Phase::Failed}));
  auto id = m.submit("f", json::object(), "");
  clock.advance(5s);
  m.advance();
  EXPECT_EQ(m.job(id)->phase, Phase::Failed);
  EXPECT_EQ(state_name(Flavor::Slurm, Phase::Failed), "FAILED");
  EXPECT_EQ(state_name(Flavor::Lsf, Phase::Failed), "EXIT");
}

TEST(MockManager, CancelledIsTerminal) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  auto id = m.submit("k", json::object(), "");
  clock.advance(1500ms);
  EXPECT_TRUE(m.kill(id));
  for (int i = 0; i < 5; ++i) {
    clock.advance(10s);
    m.advance();
    EXPECT_EQ(m.job(id)->phase, Phase::Cancelled);
  }
  EXPECT_TRUE(m.kill(id));
  EXPECT_EQ(m.job(id)->phase, Phase::Cancelled);
  EXPECT_FALSE(m.kill(999));
}

TEST(MockManager, SharedOutputPreconditions) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  auto id = submit(http, "out");
  ASSERT_EQ(id, 1);
  EXPECT_EQ(http.send(slurm("GET", "/_mock/shared/1/slurmjob.out")).status, 409);
  clock.advance(3s);
  auto res = http.send(slurm("GET", "/_mock/shared/1/slurmjob.out"));
  EXPECT_EQ(res.status, 200);
  EXPECT_EQ(res.body, "hello from out job 1: COMPLETED\n");
  EXPECT_EQ(http.send(slurm("GET", "/_mock/shared/1/nope.txt")).status, 404);
  EXPECT_EQ(http.send(slurm("GET", "/_mock/shared/7/slurmjob.out")).status, 404);
}

TEST(MockManager, DropNextResetsConnections) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  auto control = http.send({"POST", "/_mock/faults", {}, R"({"drop_next":3})", "application/json"});
  ASSERT_EQ(control.status, 200);
  for (int i = 0; i < 3; ++i) {
    try {
      http.send(slurm("GET", "/slurm/v0.0.37/ping"));
      ADD_FAILURE() << "request " << i << " was not dropped";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::Unreachable);
    }
  }
  EXPECT_EQ(http.send(slurm("GET", "/slurm/v0.0.37/ping")).status, 200);
  auto log = m.request_log();
  ASSERT_EQ(log.size(), 4u);
  EXPECT_TRUE(log[0].dropped && log[1].dropped && log[2].dropped);
  EXPECT_FALSE(log[3].dropped);
}

TEST(MockManager, LatencyAndReset) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  m.set_fault_plan(parse_fault_plan(json{{"latency_ms", 100}}));
  auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(http.send(slurm("GET", "/slurm/v0.0.37/ping")).status, 200);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 100ms);
  http.send({"POST", "/_mock/faults", {}, "{}", "application/json"});
  EXPECT_EQ(m.fault_plan(), FaultPlan{});
  t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(http.send(slurm("GET", "/slurm/v0.0.37/ping")).status, 200);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 100ms);
}

TEST(MockManager, ManualAdvanceEndpoint) {
  SimClock clock;
  ResourceManager m(Flavor::Slurm, clock, config());
  ResourceManagerServer server(m, &clock);
  server.start();
  auto http = client_for(server.base_url());
  auto id = submit(http, "adv");
  EXPECT_EQ(slurm_state(http, id), "PENDING");
  EXPECT_EQ(http.send({"POST", "/_mock/advance", {}, R"({"seconds":1})", "application/json"}).status, 200);
  EXPECT_EQ(slurm_state(http, id), "RUNNING");
  http.send({"POST", "/_mock/advance", {}, R"({"seconds":2})", "application/json"});
  EXPECT_EQ(slurm_state(http, id), "COMPLETED");
  auto jobs = json::parse(http.send({"GET", "/_mock/jobs", {}, {}, {}}).body);
  ASSERT_EQ(jobs.size(), 1u);
}

TEST(MockManager, DeterministicAcrossRuns) {
  auto run = [] {
    SimClock clock;
    ResourceManager m(Flavor::Slurm, clock, config({1s, 2s, Phase::Completed}));
    ResourceManagerServer server(m);
    server.start();
    auto http = client_for(server.base_url());
    m.set_fault_plan({2, false, 0});
    std::vector<std::string> responses;
    auto record = [&](const HttpRequest& req) {
      try {
        auto res = http.send(req);
        responses.push_back(std::to_string(res.status) + " " + res.body);
      } catch (const Error& e) {
        responses.push_back("dropped");
      }
    };
    for (int step = 0; step < 8; ++step) {
      record(slurm("POST", "/slurm/v0.0.37/job/submit", submit_body("job" + std::to_string(step % 3))));
      record(slurm("GET", "/slurm/v0.0.37/jobs"));
      if (step == 4) record(slurm("DELETE", "/slurm/v0.0.37/job/2"));
      clock.advance(700ms);
    }
    record(slurm("GET", "/_mock/shared/1/slurmjob.out"));
    return responses;
  };
  auto first = run();
  auto second = run();
  EXPECT_EQ(first, second);
  EXPECT_EQ(first[0], "dropped");
}

TEST(MockManager, LsfSessionsAndFiles) {
  SimClock clock;
  ResourceManager m(Flavor::Lsf, clock, config({0s, 1s, Phase::Completed}));
  ResourceManagerServer server(m);
  server.start();
  auto http = client_for(server.base_url());
  HttpRequest bad{"POST", "/platform/ws/logon", {}, json{{"username", test::kUser}, {"password", "nope"}}.dump(), "application/json"};
  EXPECT_EQ(http.send(bad).status, 401);
  HttpRequest submit_req{"POST", "/platform/ws/jobs/submit", {}, R"({"job":{"job_name":"l"}})", "application/json"};
  EXPECT_EQ(http.send(submit_req).status, 403);
  auto token = m.logon(test::kUser, test::kToken);
  ASSERT_TRUE(token);
  submit_req.headers = {{"Cookie", "platform_token=" + *token}};
  auto res = http.send(submit_req);
  ASSERT_EQ(res.status, 200) << res.body;
  clock.advance(2s);
  HttpRequest job_req{"GET", "/platform/ws/jobs/1", {{"Cookie", "platform_token=" + *token}}, {}, {}};
  auto job = json::parse(http.send(job_req).body);
  EXPECT_NE(job.dump().find("DONE"), std::string::npos);
}

TEST(MockObjectStore, AccessKeyCheckAndRoundTrip) {
  SimClock clock;
  ObjectStore s(clock, {{test::kAccessKey, test::kSecretKey}});
  ObjectStoreServer server(s);
  server.start();
  auto http = client_for(server.base_url());
  HttpRequest anon{"PUT", "/bucket", {}, {}, {}};
  EXPECT_EQ(http.send(anon).status, 403);
  HttpRequest bad{"PUT", "/bucket", {{"Authorization", "AWS4-HMAC-SHA256 Credential=OTHER/x, Signature=abc"}}, {}, {}};
  EXPECT_EQ(http.send(bad).status, 403);
  std::string auth = std::string("AWS4-HMAC-SHA256 Credential=") + test::kAccessKey + "/20240101/us-east-1/s3/aws4_request, SignedHeaders=host, Signature=00";
  HttpRequest put_obj{"PUT", "/bucket/a/b.txt", {{"Authorization", auth}}, "data", {}};
  EXPECT_EQ(http.send(put_obj).status, 404);
  HttpRequest make{"PUT", "/bucket", {{"Authorization", auth}}, {}, {}};
  EXPECT_EQ(http.send(make).status, 200);
  EXPECT_EQ(http.send(put_obj).status, 200);
  HttpRequest get{"GET", "/bucket/a/b.txt", {{"Authorization", auth}}, {}, {}};
  auto res = http.send(get);
  EXPECT_EQ(res.status, 200);
  EXPECT_EQ(res.body, "data");
  get.target = "/bucket/missing";
  EXPECT_EQ(http.send(get).status, 404);
  EXPECT_EQ(s.object_count("bucket"), 1u);
}
