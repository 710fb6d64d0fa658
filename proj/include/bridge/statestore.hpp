#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bridge/clock.hpp"
#include "bridge/state.hpp"

namespace bridge {

using RecordData = std::map<std::string, std::string>;

/// Well-known record fields.
namespace field {
inline constexpr const char* kResourceUrl = "resourceURL";
inline constexpr const char* kId = "id";
inline constexpr const char* kJobStatus = "jobStatus";
inline constexpr const char* kMessage = "message";
inline constexpr const char* kKill = "kill";
inline constexpr const char* kStartTime = "startTime";
inline constexpr const char* kEndTime = "endTime";
inline constexpr const char* kClientName = "clientName";
inline constexpr const char* kUid = "uid";
inline constexpr const char* kKillSent = "killSent";
}  // namespace field

struct JobRecord {
  JobKey key;
  RecordData data;
  std::uint64_t version = 0;

  /// Value of `name`, or empty when absent.
  const std::string& get(const std::string& name) const;
  BridgeState status() const;

  bool operator==(const JobRecord&) const = default;
};

enum class WatchEventKind { Created, Updated, Deleted };
std::string_view to_string(WatchEventKind kind) noexcept;

struct WatchEvent {
  WatchEventKind kind;
  JobRecord record;
};

/// Stream of committed mutations for keys under a prefix. Events are queued
/// from the moment the stream is opened; closing the store closes the stream.
class WatchStream {
 public:
  ~WatchStream();

  /// Next event, or nullopt when `timeout` elapses first. Throws
  /// Error(StoreClosed) once the stream is closed and drained.
  std::optional<WatchEvent> next(Duration timeout);
  void close();
  bool closed() const;

 private:
  friend class StateStore;
  struct Shared;
  explicit WatchStream(std::shared_ptr<Shared> shared) : shared_(std::move(shared)) {}
  std::shared_ptr<Shared> shared_;
};

/// Durable versioned key-value records, one file per key under `root`
/// (`<root>/<namespace>/<name>.record`). Every mutation is a compare-and-swap
/// on the record version; commits are serialized across threads and, via an
/// advisory file lock, across processes sharing the same root.
class StateStore {
 public:
  explicit StateStore(std::filesystem::path root);
  ~StateStore();

  StateStore(const StateStore&) = delete;
  StateStore& operator=(const StateStore&) = delete;

  JobRecord create_record(const JobKey& key, RecordData data);
  /// Merges `delta` into the record iff its version equals `expected_version`.
  JobRecord update_record(const JobKey& key, const RecordData& delta,
                          std::uint64_t expected_version);
  JobRecord get_record(const JobKey& key) const;
  std::optional<JobRecord> find_record(const JobKey& key) const;
  void delete_record(const JobKey& key);
  std::vector<JobRecord> list() const;

  std::unique_ptr<WatchStream> watch(std::string key_prefix = {});
  std::size_t watch_count() const;

  /// Closes all watch streams; further mutations fail with StoreClosed.
  void close();

  const std::filesystem::path& root() const { return root_; }

 private:
  class CommitLock;

  std::filesystem::path path_for(const JobKey& key) const;
  std::optional<JobRecord> read_file(const JobKey& key) const;
  void write_file(const JobRecord& record);
  void publish(WatchEventKind kind, const JobRecord& record);
  void check_open() const;

  std::filesystem::path root_;
  int lock_fd_ = -1;
  mutable std::mutex commit_mutex_;
  mutable std::mutex watch_mutex_;
  std::vector<std::weak_ptr<WatchStream::Shared>> watchers_;
  bool closed_ = false;
};

}  // namespace bridge
