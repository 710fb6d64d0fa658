#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>

#include "bridge/adapter.hpp"
#include "bridge/clock.hpp"
#include "bridge/jobspec.hpp"
#include "bridge/objectstore.hpp"
#include "bridge/staging.hpp"
#include "bridge/statestore.hpp"

namespace bridge {

namespace exit_code {
inline constexpr int kDone = 0;
inline constexpr int kFailed = 1;
inline constexpr int kFatal = 2;
inline constexpr int kTerminated = 143;
}  // namespace exit_code

inline constexpr std::string_view kSubmitFailedMessage = "Failed to submit a job to HPC resource";

/// Instrumented points inside run() where tests inject a crash.
enum class CrashPoint {
  BeforeSubmit,
  AfterSubmit,
  AfterIdWrite,
  MidMonitor,
  AfterTerminalMapping,
  BeforeOutputUpload,
};

inline constexpr std::array<CrashPoint, 6> kAllCrashPoints = {
    CrashPoint::BeforeSubmit,         CrashPoint::AfterSubmit,
    CrashPoint::AfterIdWrite,         CrashPoint::MidMonitor,
    CrashPoint::AfterTerminalMapping, CrashPoint::BeforeOutputUpload};

std::string_view to_string(CrashPoint point) noexcept;
std::optional<CrashPoint> parse_crash_point(std::string_view text) noexcept;

/// Thrown by in-process crash hooks to abandon a worker without any cleanup.
struct InjectedCrash {
  CrashPoint point;
};

/// Where a worker finds its job and its mounted files.
struct WorkerEnvironment {
  JobKey key;
  std::filesystem::path store_root = "state";
  std::filesystem::path credentials = "/credentials";
  std::filesystem::path s3_credentials = "/s3credentials";
  std::filesystem::path downloads = "downloads";

  /// Reads NAMESPACE and JOBNAME plus the optional BRIDGE_STORE_ROOT,
  /// BRIDGE_CREDENTIALS, BRIDGE_S3_CREDENTIALS and BRIDGE_DOWNLOADS. Throws
  /// Error(InvalidState) when NAMESPACE or JOBNAME is missing.
  static WorkerEnvironment from_env();
  /// Same contract over an explicit variable map (in-process workers).
  static WorkerEnvironment from_vars(const std::map<std::string, std::string>& vars);
};

struct WorkerOptions {
  std::stop_token stop;
  /// Invoked at every crash point; may throw InjectedCrash or end the process.
  std::function<void(CrashPoint)> crash_hook;
  std::chrono::milliseconds http_timeout = kHttpTimeout;
  /// Consecutive failed status fetches before the job is marked UNKNOWN.
  int unknown_threshold = 3;
  RetryPolicy upload_retry;
};

/// Everything run() derives from the record before talking to the manager.
struct WorkerContext {
  JobKey key;
  RecordData data;
  BridgeJobSpec spec;
  Duration poll{std::chrono::seconds(20)};
  std::unique_ptr<ResourceAdapter> adapter;
  CredentialSet credentials;
  std::optional<ObjectStoreClient> storage;
};

/// Submits (at most once) and monitors one remote job, mirroring its state
/// into the job's record.
class Worker {
 public:
  Worker(StateStore& store, Clock& clock, WorkerEnvironment env, WorkerOptions options = {});

  /// Returns the process exit code: 0 DONE, 1 KILLED or FAILED, 2 fatal
  /// setup error, 143 stopped before reaching a terminal state.
  int run();

  /// Polls until the remote job is terminal; nullopt when stopped first.
  /// Requires a loaded context with a remote id.
  std::optional<BridgeState> monitor(const std::string& remote_id);

  /// Downloads the configured output files and uploads them to the upload
  /// bucket. Per-file failures are collected, never thrown.
  UploadResult stage_outputs(const std::string& remote_id);

  const WorkerContext& context() const { return ctx_; }

 private:
  void load_context(const JobRecord& record);
  void crash(CrashPoint point);
  std::string submit_once(JobRecord& record);
  JobRecord commit(const std::function<std::optional<RecordData>(const JobRecord&)>& delta,
                   int attempts);
  int exit_for(BridgeState state) const;

  StateStore& store_;
  Clock& clock_;
  WorkerEnvironment env_;
  WorkerOptions options_;
  WorkerContext ctx_;
  Session session_;
};

/// Client job name written into the record before submission and used to
/// find an already submitted job after a restart.
std::string client_job_name(const JobKey& key, const std::string& uid);

}  // namespace bridge
