#include "bridge/operator.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include "bridge/errors.hpp"
#include "bridge/log.hpp"
#include "bridge/record_codec.hpp"

extern char** environ;

namespace bridge {

namespace fs = std::filesystem;

std::string_view to_string(Liveness liveness) noexcept {
  switch (liveness) {
    case Liveness::Starting: return "Starting";
    case Liveness::Running: return "Running";
    case Liveness::Exited: return "Exited";
    case Liveness::Crashed: return "Crashed";
  }
  return "Unknown";
}

Duration restart_backoff(int restart_count, Duration base, Duration cap) {
  if (restart_count <= 0) return Duration::zero();
  auto delay = base;
  for (int i = 1; i < restart_count && delay < cap; ++i) delay *= 2;
  return std::min(delay, cap);
}

JobStatus status_from_record(const JobRecord& record) {
  JobStatus s;
  s.key = record.key;
  s.state = record.status();
  s.start_time = record.get(field::kStartTime);
  s.end_time = record.get(field::kEndTime);
  s.message = record.get(field::kMessage);
  s.remote_id = record.get(field::kId);
  s.kill_requested = record.get(field::kKill) == "true";
  s.version = record.version;
  return s;
}

namespace {

std::string random_uid() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  std::ostringstream out;
  out << std::hex << (rng() & 0xffffffffULL);
  auto text = out.str();
  return std::string(8 - text.size(), '0') + text;
}

}  // namespace

struct Operator::Runner {
  JobKey key;
  std::uint64_t generation = 0;
  std::map<std::string, std::string> env;
  std::atomic<pid_t> pid{0};
  std::jthread thread;
};

Operator::Operator(OperatorConfig config, Clock& clock)
    : config_(std::move(config)), clock_(clock), store_(config_.store_root) {}

Operator::~Operator() { stop(); }

void Operator::start() {
  {
    std::lock_guard lock(mutex_);
    if (running_) return;
    running_ = true;
    stopping_ = false;
  }
  watch_ = store_.watch();
  loop_thread_ = std::thread([this] { loop(); });
  watch_thread_ = std::thread([this] { watch_store(); });
  if (!config_.spool_dir.empty()) {
    fs::create_directories(config_.spool_dir);
    spool_thread_ = std::jthread([this](std::stop_token) { watch_spool(); });
  }
  call<int>([this] {
    for (const auto& record : store_.list()) {
      if (is_terminal(record.status()) || runners_.count(record.key)) continue;
      log()->info("{}: resuming worker for existing record", record.key.str());
      launch(record.key, Duration::zero());
    }
    return 0;
  });
}

void Operator::stop() {
  {
    std::lock_guard lock(mutex_);
    if (!running_ || stopping_) return;
    stopping_ = true;
  }
  if (spool_thread_.joinable()) {
    spool_thread_.request_stop();
    cv_.notify_all();
    spool_thread_.join();
  }
  if (watch_) watch_->close();
  if (watch_thread_.joinable()) watch_thread_.join();

  call<int>([this] {
    for (auto& [key, runner] : runners_) stop_runner(*runner);
    for (auto& [key, runner] : runners_) {
      if (runner->thread.joinable()) runner->thread.join();
    }
    runners_.clear();
    return 0;
  });

  {
    std::lock_guard lock(mutex_);
    running_ = false;
  }
  cv_.notify_all();
  if (loop_thread_.joinable()) loop_thread_.join();
  std::deque<Event> leftover;
  {
    std::lock_guard lock(mutex_);
    leftover.swap(events_);
  }
}

void Operator::post(std::function<void()> action, Clock::Hold hold) {
  {
    std::lock_guard lock(mutex_);
    events_.push_back({std::move(action), std::move(hold)});
  }
  cv_.notify_all();
}

template <typename R>
R Operator::call(std::function<R()> action) {
  {
    std::lock_guard lock(mutex_);
    if (!running_) throw Error(Errc::InvalidState, "operator is not running");
  }
  auto task = std::make_shared<std::packaged_task<R()>>(std::move(action));
  auto result = task->get_future();
  post([task] { (*task)(); });
  return result.get();
}

void Operator::loop() {
  for (;;) {
    Event event;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return !events_.empty() || !running_; });
      if (events_.empty()) return;
      event = std::move(events_.front());
      events_.pop_front();
    }
    try {
      event.action();
    } catch (const std::exception& e) {
      log()->error("reconciler: {}", e.what());
    }
  }
}

void Operator::watch_store() {
  for (;;) {
    std::optional<WatchEvent> event;
    try {
      event = watch_->next(Duration(200));
    } catch (const Error&) {
      return;
    }
    if (!event || event->kind != WatchEventKind::Deleted) continue;
    auto key = event->record.key;
    post([this, key] {
      if (store_.find_record(key)) return;
      auto it = runners_.find(key);
      if (it == runners_.end()) return;
      log()->info("{}: record deleted, stopping worker", key.str());
      stop_runner(*it->second);
      if (it->second->thread.joinable()) it->second->thread.join();
      runners_.erase(it);
      std::lock_guard lock(mutex_);
      handles_.erase(key);
    });
  }
}

void Operator::watch_spool() {
  struct Entry {
    fs::file_time_type mtime;
    std::optional<JobKey> key;
  };
  std::map<fs::path, Entry> known;
  auto stop = spool_thread_.get_stop_token();
  while (!stop.stop_requested()) {
    std::map<fs::path, fs::file_time_type> present;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(config_.spool_dir, ec)) {
      auto ext = entry.path().extension();
      if (!entry.is_regular_file() || (ext != ".yaml" && ext != ".yml" && ext != ".json")) continue;
      present[entry.path()] = entry.last_write_time(ec);
    }
    for (const auto& [path, mtime] : present) {
      auto it = known.find(path);
      if (it != known.end() && (it->second.key || it->second.mtime == mtime)) continue;
      Entry entry{mtime, std::nullopt};
      try {
        std::ifstream in(path, std::ios::binary);
        std::stringstream text;
        text << in.rdbuf();
        auto spec = parse_spec(text.str());
        submit(spec);
        entry.key = spec.key();
        log()->info("spool: created {} from {}", spec.key().str(), path.filename().string());
      } catch (const Error& e) {
        if (e.code() != Errc::AlreadyExists) {
          log()->error("spool: {}: {}", path.filename().string(), e.what());
        }
      }
      known[path] = entry;
    }
    for (auto it = known.begin(); it != known.end();) {
      if (present.count(it->first)) {
        ++it;
        continue;
      }
      if (it->second.key) {
        log()->info("spool: {} removed, deleting {}", it->first.filename().string(), it->second.key->str());
        try {
          remove(*it->second.key);
        } catch (const Error& e) {
          log()->error("spool: {}", e.what());
        }
      }
      it = known.erase(it);
    }
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, config_.spool_interval, [&] { return stop.stop_requested(); });
  }
}

JobKey Operator::submit(const BridgeJobSpec& spec) {
  validate_spec(spec);
  call<int>([this, &spec] {
    reconcile_created(spec);
    return 0;
  });
  return spec.key();
}

void Operator::kill(const JobKey& key) {
  call<int>([this, &key] {
    signal_kill(key);
    return 0;
  });
}

void Operator::remove(const JobKey& key) {
  call<int>([this, &key] {
    reconcile_deleted(key);
    return 0;
  });
}

JobStatus Operator::status(const JobKey& key) const { return status_from_record(store_.get_record(key)); }

std::optional<WorkerHandle> Operator::worker(const JobKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = handles_.find(key);
  if (it == handles_.end()) return std::nullopt;
  return it->second;
}

int Operator::max_live_workers(const JobKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = max_live_.find(key);
  return it == max_live_.end() ? 0 : it->second;
}

int Operator::live_workers() const {
  std::lock_guard lock(mutex_);
  int total = 0;
  for (const auto& [key, n] : live_) total += n;
  return total;
}

int Operator::launches() const {
  std::lock_guard lock(mutex_);
  return launches_;
}

void Operator::reconcile_created(const BridgeJobSpec& spec) {
  auto key = spec.key();
  if (runners_.count(key)) throw Error(Errc::AlreadyExists, key.str() + " already exists");
  auto data = spec_to_record(spec);
  data[field::kJobStatus] = std::string(to_string(BridgeState::New));
  data[field::kKill] = "false";
  data[field::kId] = "";
  data[field::kUid] = random_uid();
  store_.create_record(key, std::move(data));
  log()->info("{}: record created", key.str());
  launch(key, Duration::zero());
}

void Operator::reconcile_worker_exit(const JobKey& key, std::uint64_t generation, int code, bool crashed) {
  auto it = runners_.find(key);
  if (it == runners_.end() || it->second->generation != generation) return;
  if (it->second->thread.joinable()) it->second->thread.join();

  auto record = store_.find_record(key);
  std::unique_lock lock(mutex_);
  auto& handle = handles_[key];
  handle.exit_code = code;
  if (!record) {
    runners_.erase(it);
    handles_.erase(key);
    return;
  }
  if (is_terminal(record->status())) {
    handle.liveness = Liveness::Exited;
    runners_.erase(it);
    log()->info("{}: worker exited with {} ({})", key.str(), code, to_string(record->status()));
    return;
  }
  handle.liveness = Liveness::Crashed;
  int restart = handle.restart_count + 1;
  handle.restart_count = restart;
  lock.unlock();
  auto delay = restart_backoff(restart, config_.backoff_base, config_.backoff_cap);
  log()->warn("{}: worker {} with {} while {}; restart {} in {} ms", key.str(),
              crashed ? "crashed" : "exited", code, to_string(record->status()), restart, delay.count());
  runners_.erase(it);
  launch(key, delay);
}

void Operator::reconcile_deleted(const JobKey& key) {
  if (auto it = runners_.find(key); it != runners_.end()) {
    stop_runner(*it->second);
    if (it->second->thread.joinable()) it->second->thread.join();
    runners_.erase(it);
  }
  {
    std::lock_guard lock(mutex_);
    handles_.erase(key);
  }
  store_.delete_record(key);
  log()->info("{}: deleted", key.str());
}

void Operator::signal_kill(const JobKey& key) {
  for (int attempt = 0;; ++attempt) {
    auto record = store_.find_record(key);
    if (!record) throw Error(Errc::NotFound, key.str() + " not found");
    if (is_terminal(record->status())) {
      throw Error(Errc::InvalidState, key.str() + " is already " + std::string(to_string(record->status())));
    }
    try {
      store_.update_record(key, {{field::kKill, "true"}}, record->version);
      log()->info("{}: kill requested", key.str());
      return;
    } catch (const Error& e) {
      if (e.code() != Errc::VersionConflict || attempt >= 10) throw;
    }
  }
}

std::map<std::string, std::string> Operator::launch_env(const JobRecord& record, int restart_count) const {
  std::map<std::string, std::string> env;
  env["NAMESPACE"] = record.key.ns;
  env["JOBNAME"] = record.key.name;
  env["BRIDGE_STORE_ROOT"] = fs::absolute(config_.store_root).string();
  env["BRIDGE_DOWNLOADS"] = fs::absolute(config_.downloads).string();
  auto secret = [&](const char* name, const char* fallback) {
    auto value = record.get(name);
    if (config_.secrets_dir.empty() || value.empty()) return std::string(fallback);
    return fs::absolute(config_.secrets_dir / value).string();
  };
  env["BRIDGE_CREDENTIALS"] = secret("resourcesecret", "/credentials");
  env["BRIDGE_S3_CREDENTIALS"] = secret("s3secret", "/s3credentials");
  if (config_.crash_plan) {
    if (auto point = config_.crash_plan(record.key, restart_count)) {
      env["BRIDGE_CRASH_POINT"] = std::string(to_string(*point));
    }
  }
  return env;
}

void Operator::launch(const JobKey& key, Duration delay) {
  auto record = store_.get_record(key);
  auto runner = std::make_unique<Runner>();
  runner->key = key;
  runner->generation = next_generation_++;
  int restart_count = 0;
  {
    std::lock_guard lock(mutex_);
    auto& handle = handles_[key];
    restart_count = handle.restart_count;
    runner->env = launch_env(record, restart_count);
    handle.key = key;
    handle.liveness = Liveness::Starting;
    handle.exit_code.reset();
    handle.launch_env = runner->env;
    ++launches_;
  }
  auto hold = clock_.hold();
  auto* r = runner.get();
  if (config_.mode == LaunchMode::Process) {
    runner->thread = std::jthread([this, r, delay, h = std::move(hold)](std::stop_token stop) mutable {
      run_process_worker(*r, delay, std::move(h), stop);
    });
  } else {
    runner->thread = std::jthread([this, r, delay, h = std::move(hold)](std::stop_token stop) mutable {
      run_thread_worker(*r, delay, std::move(h), stop);
    });
  }
  runners_[key] = std::move(runner);
}

void Operator::stop_runner(Runner& runner) {
  runner.thread.request_stop();
  if (pid_t pid = runner.pid.load(); pid > 0) ::kill(pid, SIGTERM);
}

void Operator::worker_started(const JobKey& key) {
  std::lock_guard lock(mutex_);
  int live = ++live_[key];
  max_live_[key] = std::max(max_live_[key], live);
  handles_[key].liveness = Liveness::Running;
}

void Operator::worker_finished(const JobKey& key) {
  std::lock_guard lock(mutex_);
  if (--live_[key] == 0) live_.erase(key);
}

void Operator::run_thread_worker(Runner& runner, Duration delay, Clock::Hold hold, std::stop_token stop) {
  auto key = runner.key;
  auto generation = runner.generation;
  if (delay > Duration::zero() && !clock_.sleep_for(delay, stop)) {
    post([this, key, generation] { reconcile_worker_exit(key, generation, exit_code::kTerminated, false); },
         std::move(hold));
    return;
  }
  int code = exit_code::kFatal;
  bool crashed = false;
  worker_started(key);
  try {
    WorkerOptions options;
    options.stop = stop;
    options.http_timeout = config_.http_timeout;
    options.upload_retry = config_.upload_retry;
    if (auto it = runner.env.find("BRIDGE_CRASH_POINT"); it != runner.env.end()) {
      auto planned = parse_crash_point(it->second);
      options.crash_hook = [planned](CrashPoint point) {
        if (planned && point == *planned) throw InjectedCrash{point};
      };
    }
    Worker worker(store_, clock_, WorkerEnvironment::from_vars(runner.env), std::move(options));
    code = worker.run();
  } catch (const InjectedCrash& crash) {
    crashed = true;
    code = 128 + SIGKILL;
    log()->warn("{}: injected crash at {}", key.str(), to_string(crash.point));
  } catch (const std::exception& e) {
    log()->error("{}: worker aborted: {}", key.str(), e.what());
  }
  worker_finished(key);
  post([this, key, generation, code, crashed] { reconcile_worker_exit(key, generation, code, crashed); },
       std::move(hold));
}

void Operator::run_process_worker(Runner& runner, Duration delay, Clock::Hold hold, std::stop_token stop) {
  auto key = runner.key;
  auto generation = runner.generation;
  auto finish = [&](int code, bool crashed) {
    post([this, key, generation, code, crashed] { reconcile_worker_exit(key, generation, code, crashed); },
         std::move(hold));
  };
  if (delay > Duration::zero() && !clock_.sleep_for(delay, stop)) return finish(exit_code::kTerminated, false);

  std::map<std::string, std::string> vars;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string entry(*e);
    auto eq = entry.find('=');
    if (eq != std::string::npos) vars[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  vars.erase("BRIDGE_CRASH_POINT");
  for (const auto& [k, v] : runner.env) vars[k] = v;
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : vars) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string program = config_.worker_binary.string();
  std::vector<char*> argv{program.data(), nullptr};

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t empty, defaults;
  sigemptyset(&empty);
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGTERM);
  sigaddset(&defaults, SIGINT);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGMASK | POSIX_SPAWN_SETSIGDEF);

  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, program.c_str(), nullptr, &attr, argv.data(), envp.data());
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    log()->error("{}: cannot start {}: {}", key.str(), program, std::strerror(rc));
    return finish(exit_code::kFatal, false);
  }
  runner.pid = pid;
  worker_started(key);
  if (stop.stop_requested()) ::kill(pid, SIGTERM);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  runner.pid = 0;
  worker_finished(key);
  if (WIFEXITED(status)) return finish(WEXITSTATUS(status), false);
  int sig = WIFSIGNALED(status) ? WTERMSIG(status) : 0;
  finish(128 + sig, true);
}

}  // namespace bridge
