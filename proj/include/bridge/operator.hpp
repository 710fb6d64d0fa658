#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "bridge/clock.hpp"
#include "bridge/jobspec.hpp"
#include "bridge/statestore.hpp"
#include "bridge/worker.hpp"

namespace bridge {

enum class Liveness { Starting, Running, Exited, Crashed };
std::string_view to_string(Liveness liveness) noexcept;

struct WorkerHandle {
  JobKey key;
  Liveness liveness = Liveness::Starting;
  std::optional<int> exit_code;
  int restart_count = 0;
  std::map<std::string, std::string> launch_env;
};

enum class LaunchMode { Thread, Process };

/// Restart delay before the n-th restart (n >= 1): base * 2^(n-1), capped.
Duration restart_backoff(int restart_count, Duration base, Duration cap);

struct OperatorConfig {
  std::filesystem::path store_root = "state";
  /// Credentials live at <secrets_dir>/<resourcesecret> and
  /// <secrets_dir>/<s3secret>; when empty, /credentials and /s3credentials.
  std::filesystem::path secrets_dir;
  std::filesystem::path downloads = "downloads";
  /// Directory watched for BridgeJob files; disabled when empty.
  std::filesystem::path spool_dir;
  std::chrono::milliseconds spool_interval{500};

  LaunchMode mode = LaunchMode::Thread;
  /// bridge-worker executable used in process mode.
  std::filesystem::path worker_binary;

  Duration backoff_base{std::chrono::seconds(1)};
  Duration backoff_cap{std::chrono::seconds(60)};
  std::chrono::milliseconds http_timeout = kHttpTimeout;
  RetryPolicy upload_retry;

  /// Test instrumentation: crash point for a launch of a key, given its
  /// restart count. Thread mode throws InjectedCrash there; process mode
  /// passes BRIDGE_CRASH_POINT and the worker kills itself.
  std::function<std::optional<CrashPoint>(const JobKey&, int restart_count)> crash_plan;
};

struct JobStatus {
  JobKey key;
  BridgeState state = BridgeState::New;
  std::string start_time;
  std::string end_time;
  std::string message;
  std::string remote_id;
  bool kill_requested = false;
  std::uint64_t version = 0;
};

JobStatus status_from_record(const JobRecord& record);

/// Reconciler: one event loop serializes spec events (API and spool
/// directory), store watch events and worker exit events. Each job key has
/// at most one live worker.
class Operator {
 public:
  Operator(OperatorConfig config, Clock& clock);
  ~Operator();

  Operator(const Operator&) = delete;
  Operator& operator=(const Operator&) = delete;

  /// Starts the loop, the watchers, and workers for every non-terminal
  /// record already in the store.
  void start();
  /// Stops every worker without touching records, then the loop.
  void stop();

  /// Creates the record then launches the worker. Errors: AlreadyExists,
  /// StoreError.
  JobKey submit(const BridgeJobSpec& spec);
  /// Errors: NotFound, InvalidState (terminal job).
  void kill(const JobKey& key);
  /// Terminates the worker and removes the record; idempotent.
  void remove(const JobKey& key);
  /// Errors: NotFound.
  JobStatus status(const JobKey& key) const;

  std::optional<WorkerHandle> worker(const JobKey& key) const;
  /// Highest number of simultaneously live workers ever seen for `key`.
  int max_live_workers(const JobKey& key) const;
  int live_workers() const;
  /// Number of workers launched so far (first launches and restarts).
  int launches() const;

  StateStore& store() { return store_; }
  Clock& clock() { return clock_; }
  const OperatorConfig& config() const { return config_; }

 private:
  struct Runner;
  struct Event {
    std::function<void()> action;
    Clock::Hold hold;
  };

  void post(std::function<void()> action, Clock::Hold hold = {});
  template <typename R>
  R call(std::function<R()> action);
  void loop();
  void watch_store();
  void watch_spool();

  void reconcile_created(const BridgeJobSpec& spec);
  void reconcile_worker_exit(const JobKey& key, std::uint64_t generation, int code, bool crashed);
  void reconcile_deleted(const JobKey& key);
  void signal_kill(const JobKey& key);

  std::map<std::string, std::string> launch_env(const JobRecord& record, int restart_count) const;
  void launch(const JobKey& key, Duration delay);
  void stop_runner(Runner& runner);
  void run_thread_worker(Runner& runner, Duration delay, Clock::Hold hold, std::stop_token stop);
  void run_process_worker(Runner& runner, Duration delay, Clock::Hold hold, std::stop_token stop);
  void worker_started(const JobKey& key);
  void worker_finished(const JobKey& key);

  OperatorConfig config_;
  Clock& clock_;
  StateStore store_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> events_;
  bool running_ = false;
  bool stopping_ = false;
  std::thread loop_thread_;
  std::jthread spool_thread_;
  std::thread watch_thread_;
  std::unique_ptr<WatchStream> watch_;

  // Loop-owned.
  std::map<JobKey, std::unique_ptr<Runner>> runners_;
  std::uint64_t next_generation_ = 1;

  // Guarded by mutex_.
  std::map<JobKey, WorkerHandle> handles_;
  std::map<JobKey, int> live_;
  std::map<JobKey, int> max_live_;
  int launches_ = 0;
};

}  // namespace bridge
