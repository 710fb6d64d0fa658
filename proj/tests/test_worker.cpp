#include <gtest/gtest.h>

#include "bridge/errors.hpp"
#include "bridge/record_codec.hpp"
#include "bridge/worker.hpp"
#include "support/harness.hpp"

using namespace bridge;
using namespace std::chrono_literals;
using test::Cluster;
using test::JobOptions;
using test::TempDir;

namespace {

using States = std::vector<BridgeState>;

struct WorkerRig {
  explicit WorkerRig(mock::Timeline timeline = {}, mock::Flavor flavor = mock::Flavor::Slurm)
      : cluster(clock, flavor, timeline), store(dir / "state") {}

  JobKey create(const JobOptions& options) {
    auto spec = test::job_spec(cluster, options);
    auto data = spec_to_record(spec);
    data[field::kJobStatus] = "NEW";
    data[field::kKill] = "false";
    data[field::kId] = "";
    data[field::kUid] = "u1";
    store.create_record(spec.key(), data);
    return spec.key();
  }

  WorkerEnvironment env(const JobKey& key) const {
    WorkerEnvironment e;
    e.key = key;
    e.store_root = dir / "state";
    e.credentials = cluster.resource_credentials();
    e.s3_credentials = cluster.storage_credentials();
    e.downloads = dir / "downloads";
    return e;
  }

  int run(const JobKey& key, WorkerOptions options = {}) {
    options.http_timeout = 2s;
    options.upload_retry = {3, Duration(100)};
    auto hold = clock.hold();
    Worker worker(store, clock, env(key), std::move(options));
    return worker.run();
  }

  JobRecord record(const JobKey& key) { return store.get_record(key); }

  SimClock clock;
  TempDir dir;
  Cluster cluster;
  StateStore store;
};

WorkerOptions crash_at(CrashPoint target) {
  WorkerOptions options;
  options.crash_hook = [target](CrashPoint point) {
    if (point == target) throw InjectedCrash{point};
  };
  return options;
}

}  // namespace

TEST(Worker, FreshSubmitRunsToDone) {
  WorkerRig rig;
  auto key = rig.create({.name = "fresh"});
  test::StateTrace trace(rig.store, key);
  EXPECT_EQ(rig.run(key), exit_code::kDone);

  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::Done);
  EXPECT_EQ(r.get(field::kId), "1");
  EXPECT_EQ(r.get(field::kClientName), "bridge-default-fresh-u1");
  EXPECT_FALSE(r.get(field::kStartTime).empty());
  EXPECT_FALSE(r.get(field::kEndTime).empty());
  EXPECT_LE(*parse_rfc3339(r.get(field::kStartTime)), *parse_rfc3339(r.get(field::kEndTime)));
  EXPECT_EQ(r.get(field::kMessage), "");
  EXPECT_EQ(rig.cluster.manager.effective_jobs("bridge-default-fresh-u1"), 1);

  ASSERT_TRUE(test::wait_until([&] { return trace.saw(BridgeState::Done); }));
  EXPECT_EQ(trace.states(), (States{BridgeState::New, BridgeState::Submitted, BridgeState::Running,
                                     BridgeState::Done}));

  auto expected = "job 1 (bridge-default-fresh-u1) finished with state COMPLETED\n";
  EXPECT_EQ(rig.cluster.storage.get("results", "slurmjob.out"), expected);
  EXPECT_EQ(test::read_file(rig.dir / "downloads/default/fresh/slurmjob.out"), expected);
}

TEST(Worker, ExistingIdIsNeverResubmitted) {
  WorkerRig rig;
  auto key = rig.create({.name = "resume"});
  auto id = rig.cluster.manager.submit("external", nlohmann::json::object(), "#!/bin/sh\n");
  rig.store.update_record(key, {{field::kId, std::to_string(id)}, {field::kJobStatus, "SUBMITTED"}}, 1);
  EXPECT_EQ(rig.run(key), exit_code::kDone);
  EXPECT_EQ(rig.cluster.manager.jobs().size(), 1u);
  EXPECT_EQ(rig.cluster.manager.submit_requests("bridge-default-resume-u1"), 0);
  EXPECT_EQ(rig.record(key).status(), BridgeState::Done);
}

TEST(Worker, TerminalRecordExitsWithoutContact) {
  WorkerRig rig;
  auto key = rig.create({.name = "over"});
  rig.store.update_record(key, {{field::kJobStatus, "FAILED"}}, 1);
  EXPECT_EQ(rig.run(key), exit_code::kFailed);
  EXPECT_TRUE(rig.cluster.manager.request_log().empty());
}

TEST(Worker, RejectedSubmissionFails) {
  WorkerRig rig;
  rig.cluster.manager.set_fault_plan({0, true, 0});
  auto key = rig.create({.name = "rejected"});
  EXPECT_EQ(rig.run(key), exit_code::kFailed);
  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::Failed);
  EXPECT_EQ(r.get(field::kMessage), kSubmitFailedMessage);
  EXPECT_EQ(r.get(field::kId), "");
}

TEST(Worker, RemoteFailureIsFailed) {
  WorkerRig rig({1s, 2s, mock::Phase::Failed});
  auto key = rig.create({.name = "bad"});
  EXPECT_EQ(rig.run(key), exit_code::kFailed);
  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::Failed);
  EXPECT_FALSE(r.get(field::kEndTime).empty());
}

TEST(Worker, KillRequestCancelsRemoteJob) {
  for (auto flavor : {mock::Flavor::Slurm, mock::Flavor::Lsf}) {
    WorkerRig rig({1s, 30s}, flavor);
    auto key = rig.create({.name = "victim"});
    rig.store.update_record(key, {{field::kKill, "true"}}, 1);
    EXPECT_EQ(rig.run(key), exit_code::kFailed);
    auto r = rig.record(key);
    EXPECT_EQ(r.status(), BridgeState::Killed);
    EXPECT_EQ(r.get(field::kKillSent), "true");
    EXPECT_EQ(rig.cluster.manager.kill_requests(), 1);
    EXPECT_LT(rig.clock.now() - SimClock::default_epoch(), Duration(30000));
  }
}

TEST(Worker, KillFlagSurvivesCrashBeforeActing) {
  WorkerRig rig({1s, 30s});
  auto key = rig.create({.name = "stubborn"});
  WorkerOptions options;
  options.crash_hook = [&](CrashPoint point) {
    if (point == CrashPoint::AfterIdWrite) {
      auto r = rig.record(key);
      rig.store.update_record(key, {{field::kKill, "true"}}, r.version);
    }
    if (point == CrashPoint::MidMonitor) throw InjectedCrash{point};
  };
  EXPECT_THROW(rig.run(key, std::move(options)), InjectedCrash);
  EXPECT_EQ(rig.cluster.manager.kill_requests(), 0);
  EXPECT_EQ(rig.run(key), exit_code::kFailed);
  EXPECT_EQ(rig.record(key).status(), BridgeState::Killed);
  EXPECT_EQ(rig.cluster.manager.kill_requests(), 1);
}

TEST(Worker, UnreachableStatusBecomesUnknownThenRecovers) {
  WorkerRig rig({1s, 10s});
  auto key = rig.create({.name = "flaky"});
  test::StateTrace trace(rig.store, key);
  WorkerOptions options;
  options.crash_hook = [&](CrashPoint point) {
    if (point == CrashPoint::AfterIdWrite) rig.cluster.manager.set_fault_plan({3, false, 0});
  };
  EXPECT_EQ(rig.run(key, std::move(options)), exit_code::kDone);
  ASSERT_TRUE(test::wait_until([&] { return trace.saw(BridgeState::Done); }));
  EXPECT_EQ(trace.states(), (States{BridgeState::New, BridgeState::Submitted, BridgeState::Unknown,
                                     BridgeState::Running, BridgeState::Done}));
  EXPECT_EQ(rig.cluster.manager.effective_jobs("bridge-default-flaky-u1"), 1);
}

TEST(Worker, PartialOutputsAreReported) {
  WorkerRig rig;
  auto key = rig.create({.name = "partial", .upload_files = {"slurmjob.out", "never.txt"}});
  EXPECT_EQ(rig.run(key), exit_code::kDone);
  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::Done);
  EXPECT_NE(r.get(field::kMessage).find("never.txt"), std::string::npos);
  EXPECT_TRUE(rig.cluster.storage.get("results", "slurmjob.out"));
  EXPECT_FALSE(rig.cluster.storage.get("results", "never.txt"));
}

TEST(Worker, MissingInputFailsBeforeSubmission) {
  WorkerRig rig;
  rig.cluster.storage.create_bucket("inputs");
  auto key = rig.create({.name = "noinput", .additional = {"inputs:absent.csv"}});
  EXPECT_EQ(rig.run(key), exit_code::kFailed);
  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::Failed);
  EXPECT_NE(r.get(field::kMessage).find("absent.csv"), std::string::npos);
  EXPECT_TRUE(rig.cluster.manager.jobs().empty());
}

TEST(Worker, ScriptFromObjectStoreWithParams) {
  WorkerRig rig;
  rig.cluster.storage.create_bucket("mys3bucket");
  rig.cluster.storage.put("mys3bucket", "slurmbatch.sh", "#!/bin/bash\nsrun hostname\n");
  auto key = rig.create({.name = "s3script", .location = "s3", .script = "mys3bucket:slurmbatch.sh"});
  EXPECT_EQ(rig.run(key), exit_code::kDone);
  auto job = rig.cluster.manager.job(1);
  ASSERT_TRUE(job);
  EXPECT_EQ(job->script, "#!/bin/bash\nsrun hostname\n");
}

TEST(Worker, BadCredentialsAreFatal) {
  WorkerRig rig;
  auto key = rig.create({.name = "nocreds"});
  test::write_file(rig.cluster.resource_credentials(), "username=alice\ntoken=wrong\n");
  EXPECT_EQ(rig.run(key), exit_code::kFatal);
  auto r = rig.record(key);
  EXPECT_EQ(r.status(), BridgeState::New);
  EXPECT_FALSE(r.get(field::kMessage).empty());
  EXPECT_EQ(r.get(field::kMessage).find("wrong"), std::string::npos);
}

TEST(Worker, MissingRecordIsFatal) {
  WorkerRig rig;
  EXPECT_EQ(rig.run({"default", "ghost"}), exit_code::kFatal);
}

TEST(Worker, StopBeforeTerminalExits143) {
  WorkerRig rig({1s, 60s});
  auto key = rig.create({.name = "stopped"});
  std::stop_source source;
  WorkerOptions options;
  options.stop = source.get_token();
  options.crash_hook = [&](CrashPoint point) {
    if (point == CrashPoint::MidMonitor && rig.clock.now() - SimClock::default_epoch() >= Duration(5000)) {
      source.request_stop();
    }
  };
  EXPECT_EQ(rig.run(key, std::move(options)), exit_code::kTerminated);
  EXPECT_EQ(rig.record(key).status(), BridgeState::Running);
}

TEST(Worker, DeletedRecordStopsWorker) {
  WorkerRig rig({1s, 60s});
  auto key = rig.create({.name = "gone"});
  WorkerOptions options;
  options.crash_hook = [&](CrashPoint point) {
    if (point == CrashPoint::MidMonitor && rig.clock.now() - SimClock::default_epoch() >= Duration(3000)) {
      rig.store.delete_record(key);
    }
  };
  EXPECT_EQ(rig.run(key, std::move(options)), exit_code::kTerminated);
}

TEST(Worker, ClientNameAndEnvironment) {
  EXPECT_EQ(client_job_name({"ns", "job"}, "abc"), "bridge-ns-job-abc");
  EXPECT_EQ(client_job_name({"ns", "job"}, ""), "bridge-ns-job");
  auto env = WorkerEnvironment::from_vars({{"NAMESPACE", "ns"}, {"JOBNAME", "job"}});
  EXPECT_EQ(env.key, (JobKey{"ns", "job"}));
  EXPECT_EQ(env.credentials, "/credentials");
  EXPECT_EQ(env.s3_credentials, "/s3credentials");
  EXPECT_THROW(WorkerEnvironment::from_vars({{"NAMESPACE", "ns"}}), Error);
  for (auto point : kAllCrashPoints) EXPECT_EQ(parse_crash_point(to_string(point)), point);
  EXPECT_FALSE(parse_crash_point("nowhere"));
}

class WorkerCrash : public ::testing::TestWithParam<CrashPoint> {};

TEST_P(WorkerCrash, RestartSubmitsExactlyOnce) {
  WorkerRig rig;
  auto key = rig.create({.name = "crashy"});
  EXPECT_THROW(rig.run(key, crash_at(GetParam())), InjectedCrash);
  EXPECT_EQ(rig.run(key), exit_code::kDone);
  EXPECT_EQ(rig.record(key).status(), BridgeState::Done);
  EXPECT_EQ(rig.cluster.manager.effective_jobs("bridge-default-crashy-u1"), 1);
  EXPECT_EQ(rig.cluster.manager.jobs().size(), 1u);
  EXPECT_TRUE(rig.cluster.storage.get("results", "slurmjob.out"));
}

INSTANTIATE_TEST_SUITE_P(AllPoints, WorkerCrash, ::testing::ValuesIn(kAllCrashPoints),
                         [](const auto& info) { return std::string(to_string(info.param)); });
