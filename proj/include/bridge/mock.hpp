#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bridge/clock.hpp"
#include "bridge/http.hpp"

namespace bridge::mock {

enum class Flavor { Slurm, Lsf };
enum class Phase { Pending, Running, Completed, Failed, Cancelled };

bool is_terminal(Phase phase) noexcept;
std::string state_name(Flavor flavor, Phase phase);

struct Timeline {
  Duration pending{std::chrono::seconds(1)};
  Duration running{std::chrono::seconds(2)};
  Phase final_state = Phase::Completed;  // Completed or Failed
};

/// Fault injection applied to manager API requests (control endpoints under
/// /_mock/ other than the shared filesystem are exempt).
struct FaultPlan {
  int drop_next = 0;
  bool reject_submits = false;
  int latency_ms = 0;

  bool operator==(const FaultPlan&) const = default;
};

FaultPlan parse_fault_plan(const nlohmann::json& doc);
nlohmann::json to_json(const FaultPlan& plan);

struct Job {
  std::int64_t id = 0;
  std::string name;
  Phase phase = Phase::Pending;
  TimePoint submitted;
  std::optional<TimePoint> started;
  std::optional<TimePoint> ended;
  Timeline timeline;
  nlohmann::json payload;
  std::string script;
  std::map<std::string, std::string> outputs;
  /// Shared-filesystem paths present when the job was submitted.
  std::vector<std::string> files_at_submit;
  int kill_requests = 0;
};

struct RequestLogEntry {
  TimePoint at;
  std::string method;
  std::string path;
  int status = 0;
  bool dropped = false;
};

struct ManagerConfig {
  /// username -> token (Slurm) or password (LSF).
  std::map<std::string, std::string> users;
  Timeline timeline;
  /// Rendered into the job's standard output file on termination; {id},
  /// {name} and {state} are substituted.
  std::string stdout_template = "job {id} ({name}) finished with state {state}\n";
  std::string stderr_template;
  /// Additional files rendered on termination, keyed by path.
  std::map<std::string, std::string> extra_outputs;
  bool dedupe_names = true;
};

enum class OutputStatus { Ok, NoJob, NotTerminal, Missing };

/// Deterministic resource-manager state machine behind the Slurm-style and
/// LSF-style mock endpoints. All mutations serialize on one mutex and every
/// timestamp derives from the injected clock.
class ResourceManager {
 public:
  ResourceManager(Flavor flavor, const Clock& clock, ManagerConfig config);

  Flavor flavor() const { return flavor_; }
  const Clock& clock() const { return clock_; }

  bool authenticate(const std::string& user, const std::string& secret) const;
  /// LSF logon: issues a session token for valid credentials.
  std::optional<std::string> logon(const std::string& user, const std::string& password);
  bool valid_session(const std::string& token) const;

  /// Creates a job, or returns the id of an existing job with the same name.
  std::int64_t submit(const std::string& name, nlohmann::json payload, std::string script);
  /// Moves every job whose phase duration elapsed by `now`.
  void advance(TimePoint now);
  void advance() { advance(clock_.now()); }
  std::optional<Job> job(std::int64_t id);
  std::vector<Job> jobs();
  /// false when the id is unknown; terminal jobs are left untouched.
  bool kill(std::int64_t id);

  OutputStatus output(std::int64_t id, const std::string& path, std::string& content);
  void put_shared_file(const std::string& path, std::string content);
  std::optional<std::string> shared_file(const std::string& path) const;

  void set_fault_plan(FaultPlan plan);
  FaultPlan fault_plan() const;
  /// True when the current request must be dropped (consumes one drop).
  bool consume_drop();
  bool reject_submits() const;
  int latency_ms() const;

  void set_timeline(Timeline timeline);
  void record(RequestLogEntry entry);
  std::vector<RequestLogEntry> request_log() const;

  int submit_requests(const std::string& name) const;
  int effective_jobs(const std::string& name) const;
  int kill_requests() const;

 private:
  void advance_locked(TimePoint now);
  void render_outputs_locked(Job& job);

  Flavor flavor_;
  const Clock& clock_;
  mutable std::mutex mutex_;
  ManagerConfig config_;
  std::map<std::int64_t, Job> jobs_;
  std::int64_t next_id_ = 1;
  std::map<std::string, int> submit_requests_;
  std::map<std::string, std::string> shared_files_;
  std::vector<std::string> sessions_;
  FaultPlan faults_;
  std::vector<RequestLogEntry> log_;
  int kill_requests_ = 0;
};

/// HTTP face of a ResourceManager: the adapter wire subset for its flavor,
/// the shared-filesystem emulation, and test-only /_mock/ control endpoints.
class ResourceManagerServer {
 public:
  /// `manual_clock`, when given, is advanced by POST /_mock/advance.
  explicit ResourceManagerServer(ResourceManager& manager, SimClock* manual_clock = nullptr);
  ~ResourceManagerServer();

  int start(int port = 0);
  void stop();
  std::string base_url() const { return host_.base_url(); }
  int port() const { return host_.port(); }

 private:
  void install_routes();

  ResourceManager& manager_;
  SimClock* manual_clock_;
  HttpServerHost host_;
};

/// In-memory S3-compatible object store with a static access-key check.
class ObjectStore {
 public:
  explicit ObjectStore(const Clock& clock, std::map<std::string, std::string> access_keys = {});

  bool known_access_key(const std::string& key) const;
  void create_bucket(const std::string& bucket);
  bool has_bucket(const std::string& bucket) const;
  /// false when the bucket does not exist.
  bool put(const std::string& bucket, const std::string& key, std::string content);
  std::optional<std::string> get(const std::string& bucket, const std::string& key) const;
  std::size_t object_count(const std::string& bucket) const;

  void set_fault_plan(FaultPlan plan);
  FaultPlan fault_plan() const;
  bool consume_drop();
  int latency_ms() const;
  void record(RequestLogEntry entry);
  std::vector<RequestLogEntry> request_log() const;
  const Clock& clock() const { return clock_; }

 private:
  const Clock& clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> access_keys_;
  std::map<std::string, std::map<std::string, std::string>> buckets_;
  FaultPlan faults_;
  std::vector<RequestLogEntry> log_;
};

class ObjectStoreServer {
 public:
  explicit ObjectStoreServer(ObjectStore& store);
  ~ObjectStoreServer();

  int start(int port = 0);
  void stop();
  std::string base_url() const { return host_.base_url(); }
  /// host:port form used for s3storage.endpoint.
  std::string endpoint() const;
  int port() const { return host_.port(); }

 private:
  void install_routes();

  ObjectStore& store_;
  HttpServerHost host_;
};

}  // namespace bridge::mock
