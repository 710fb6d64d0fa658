#include "bridge/statestore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "bridge/errors.hpp"
#include "bridge/jobspec.hpp"

namespace bridge {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string& JobRecord::get(const std::string& name) const {
  static const std::string empty;
  auto it = data.find(name);
  return it == data.end() ? empty : it->second;
}

BridgeState JobRecord::status() const {
  return parse_state(get(field::kJobStatus)).value_or(BridgeState::New);
}

std::string_view to_string(WatchEventKind kind) noexcept {
  switch (kind) {
    case WatchEventKind::Created: return "Created";
    case WatchEventKind::Updated: return "Updated";
    case WatchEventKind::Deleted: return "Deleted";
  }
  return "Updated";
}

struct WatchStream::Shared {
  std::string prefix;
  mutable std::mutex mutex;
  std::condition_variable cv;
  std::deque<WatchEvent> queue;
  bool closed = false;
};

WatchStream::~WatchStream() { close(); }

std::optional<WatchEvent> WatchStream::next(Duration timeout) {
  std::unique_lock lock(shared_->mutex);
  shared_->cv.wait_for(lock, timeout, [&] { return !shared_->queue.empty() || shared_->closed; });
  if (!shared_->queue.empty()) {
    auto event = std::move(shared_->queue.front());
    shared_->queue.pop_front();
    return event;
  }
  if (shared_->closed) throw Error(Errc::StoreClosed, "watch stream closed");
  return std::nullopt;
}

void WatchStream::close() {
  std::lock_guard lock(shared_->mutex);
  shared_->closed = true;
  shared_->cv.notify_all();
}

bool WatchStream::closed() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->closed;
}

/// In-process mutex plus an exclusive flock on `<root>/.lock`.
class StateStore::CommitLock {
 public:
  explicit CommitLock(const StateStore& store) : guard_(store.commit_mutex_), fd_(store.lock_fd_) {
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) throw Error(Errc::StoreError, std::string("flock: ") + std::strerror(errno));
    }
  }
  ~CommitLock() { ::flock(fd_, LOCK_UN); }

 private:
  std::lock_guard<std::mutex> guard_;
  int fd_;
};

namespace {

void check_data(const RecordData& data) {
  if (auto it = data.find(field::kJobStatus); it != data.end() && !parse_state(it->second)) {
    throw Error(Errc::InvalidState, "jobStatus '" + it->second + "' is not a lifecycle state");
  }
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

StateStore::StateStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(Errc::StoreError, "cannot create store root " + root_.string() + ": " + ec.message());
  lock_fd_ = ::open((root_ / ".lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) {
    throw Error(Errc::StoreError, "cannot open store lock: " + std::string(std::strerror(errno)));
  }
}

StateStore::~StateStore() {
  close();
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void StateStore::close() {
  std::vector<std::shared_ptr<WatchStream::Shared>> live;
  {
    std::lock_guard lock(watch_mutex_);
    closed_ = true;
    for (auto& w : watchers_) {
      if (auto s = w.lock()) live.push_back(std::move(s));
    }
    watchers_.clear();
  }
  for (auto& s : live) {
    std::lock_guard lock(s->mutex);
    s->closed = true;
    s->cv.notify_all();
  }
}

void StateStore::check_open() const {
  std::lock_guard lock(watch_mutex_);
  if (closed_) throw Error(Errc::StoreClosed, "store is closed");
}

fs::path StateStore::path_for(const JobKey& key) const {
  if (!is_valid_identifier(key.ns) || !is_valid_identifier(key.name)) {
    throw Error(Errc::StoreError, "invalid record key '" + key.str() + "'");
  }
  return root_ / key.ns / (key.name + ".record");
}

std::optional<JobRecord> StateStore::read_file(const JobKey& key) const {
  auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!fs::exists(path, ec) && !ec) return std::nullopt;
    if (ec && ec != std::errc::no_such_file_or_directory && ec != std::errc::not_a_directory) {
      throw Error(Errc::StoreError, "cannot read record " + key.str() + ": " + ec.message());
    }
    return std::nullopt;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    auto doc = json::parse(buffer.str());
    JobRecord record;
    record.key = key;
    record.version = doc.at("version").get<std::uint64_t>();
    record.data = doc.at("data").get<RecordData>();
    return record;
  } catch (const json::exception& e) {
    throw Error(Errc::StoreError, "corrupt record " + key.str() + ": " + e.what());
  }
}

void StateStore::write_file(const JobRecord& record) {
  static std::atomic<unsigned> counter{0};
  auto path = path_for(record.key);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::StoreError, "cannot create " + path.parent_path().string() + ": " + ec.message());

  json doc = {{"version", record.version}, {"data", record.data}};
  auto body = doc.dump(2) + "\n";
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);

  int fd = ::open(tmp.c_str(), O_CREAT | O_WRONLY | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::StoreError, "cannot write " + tmp.string() + ": " + std::strerror(errno));
  const char* p = body.data();
  std::size_t left = body.size();
  while (left > 0) {
    auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw Error(Errc::StoreError, "write failed: " + std::string(std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw Error(Errc::StoreError, "fsync failed: " + std::string(std::strerror(errno)));
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw Error(Errc::StoreError, "rename failed: " + std::string(std::strerror(errno)));
  }
  fsync_dir(path.parent_path());
}

void StateStore::publish(WatchEventKind kind, const JobRecord& record) {
  std::lock_guard lock(watch_mutex_);
  auto key = record.key.str();
  std::erase_if(watchers_, [](const auto& w) { return w.expired(); });
  for (auto& w : watchers_) {
    auto s = w.lock();
    if (!s || key.compare(0, s->prefix.size(), s->prefix) != 0) continue;
    std::lock_guard slock(s->mutex);
    if (s->closed) continue;
    s->queue.push_back({kind, record});
    s->cv.notify_all();
  }
}

JobRecord StateStore::create_record(const JobKey& key, RecordData data) {
  check_open();
  check_data(data);
  CommitLock lock(*this);
  if (read_file(key)) throw Error(Errc::AlreadyExists, "record " + key.str() + " already exists");
  JobRecord record{key, std::move(data), 1};
  write_file(record);
  publish(WatchEventKind::Created, record);
  return record;
}

JobRecord StateStore::update_record(const JobKey& key, const RecordData& delta,
                                    std::uint64_t expected_version) {
  check_open();
  check_data(delta);
  CommitLock lock(*this);
  auto current = read_file(key);
  if (!current) throw Error(Errc::NotFound, "record " + key.str() + " not found");
  if (current->version != expected_version) {
    throw Error(Errc::VersionConflict, "record " + key.str() + " is at version " +
                                           std::to_string(current->version) + ", expected " +
                                           std::to_string(expected_version));
  }
  if (auto it = delta.find(field::kId); it != delta.end()) {
    const auto& existing = current->get(field::kId);
    if (!existing.empty() && existing != it->second) {
      throw Error(Errc::InvalidState, "record " + key.str() + " already has a remote id");
    }
  }
  for (const auto& [k, v] : delta) current->data[k] = v;
  current->version += 1;
  write_file(*current);
  publish(WatchEventKind::Updated, *current);
  return *current;
}

JobRecord StateStore::get_record(const JobKey& key) const {
  if (auto record = read_file(key)) return *record;
  throw Error(Errc::NotFound, "record " + key.str() + " not found");
}

std::optional<JobRecord> StateStore::find_record(const JobKey& key) const { return read_file(key); }

void StateStore::delete_record(const JobKey& key) {
  check_open();
  CommitLock lock(*this);
  auto current = read_file(key);
  if (!current) return;
  auto path = path_for(key);
  if (::unlink(path.c_str()) != 0 && errno != ENOENT) {
    throw Error(Errc::StoreError, "cannot delete " + key.str() + ": " + std::strerror(errno));
  }
  fsync_dir(path.parent_path());
  publish(WatchEventKind::Deleted, *current);
}

std::vector<JobRecord> StateStore::list() const {
  std::vector<JobRecord> out;
  std::error_code ec;
  for (const auto& ns_dir : fs::directory_iterator(root_, ec)) {
    if (!ns_dir.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(ns_dir.path(), ec)) {
      if (entry.path().extension() != ".record") continue;
      JobKey key{ns_dir.path().filename().string(), entry.path().stem().string()};
      if (auto record = read_file(key)) out.push_back(std::move(*record));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

std::unique_ptr<WatchStream> StateStore::watch(std::string key_prefix) {
  auto shared = std::make_shared<WatchStream::Shared>();
  shared->prefix = std::move(key_prefix);
  std::lock_guard lock(watch_mutex_);
  if (closed_) throw Error(Errc::StoreClosed, "store is closed");
  watchers_.push_back(shared);
  return std::unique_ptr<WatchStream>(new WatchStream(std::move(shared)));
}

std::size_t StateStore::watch_count() const {
  std::lock_guard lock(watch_mutex_);
  return static_cast<std::size_t>(std::count_if(watchers_.begin(), watchers_.end(), [](const auto& w) {
    auto s = w.lock();
    if (!s) return false;
    std::lock_guard slock(s->mutex);
    return !s->closed;
  }));
}

}  // namespace bridge
