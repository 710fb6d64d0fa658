#include <algorithm>

#include "bridge/mock.hpp"

namespace bridge::mock {

using nlohmann::json;

bool is_terminal(Phase phase) noexcept {
  return phase == Phase::Completed || phase == Phase::Failed || phase == Phase::Cancelled;
}

std::string state_name(Flavor flavor, Phase phase) {
  if (flavor == Flavor::Slurm) {
    switch (phase) {
      case Phase::Pending: return "PENDING";
      case Phase::Running: return "RUNNING";
      case Phase::Completed: return "COMPLETED";
      case Phase::Failed: return "FAILED";
      case Phase::Cancelled: return "CANCELLED";
    }
  }
  switch (phase) {
    case Phase::Pending: return "PEND";
    case Phase::Running: return "RUN";
    case Phase::Completed: return "DONE";
    case Phase::Failed:
    case Phase::Cancelled: return "EXIT";
  }
  return "UNKNOWN";
}

FaultPlan parse_fault_plan(const json& doc) {
  FaultPlan plan;
  plan.drop_next = std::max(0, doc.value("drop_next", 0));
  plan.reject_submits = doc.value("reject_submits", false);
  plan.latency_ms = std::max(0, doc.value("latency_ms", 0));
  return plan;
}

json to_json(const FaultPlan& plan) {
  return {{"drop_next", plan.drop_next},
          {"reject_submits", plan.reject_submits},
          {"latency_ms", plan.latency_ms}};
}

namespace {

std::string substitute(std::string text, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    std::string token = "{" + k + "}";
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + v.size())) {
      text.replace(pos, token.size(), v);
    }
  }
  return text;
}

std::string payload_string(const json& payload, const char* name) {
  if (payload.contains(name) && payload[name].is_string()) return payload[name].get<std::string>();
  return {};
}

}  // namespace

ResourceManager::ResourceManager(Flavor flavor, const Clock& clock, ManagerConfig config)
    : flavor_(flavor), clock_(clock), config_(std::move(config)) {}

bool ResourceManager::authenticate(const std::string& user, const std::string& secret) const {
  std::lock_guard lock(mutex_);
  auto it = config_.users.find(user);
  return it != config_.users.end() && !secret.empty() && it->second == secret;
}

std::optional<std::string> ResourceManager::logon(const std::string& user, const std::string& password) {
  if (!authenticate(user, password)) return std::nullopt;
  std::lock_guard lock(mutex_);
  sessions_.push_back("lsf-session-" + std::to_string(sessions_.size() + 1));
  return sessions_.back();
}

bool ResourceManager::valid_session(const std::string& token) const {
  std::lock_guard lock(mutex_);
  return std::find(sessions_.begin(), sessions_.end(), token) != sessions_.end();
}

std::int64_t ResourceManager::submit(const std::string& name, json payload, std::string script) {
  std::lock_guard lock(mutex_);
  submit_requests_[name] += 1;
  if (config_.dedupe_names && !name.empty()) {
    for (const auto& [id, job] : jobs_) {
      if (job.name == name) return id;
    }
  }
  Job job;
  job.id = next_id_++;
  job.name = name;
  job.submitted = clock_.now();
  job.timeline = config_.timeline;
  job.payload = std::move(payload);
  job.script = std::move(script);
  for (const auto& [path, content] : shared_files_) job.files_at_submit.push_back(path);
  auto id = job.id;
  jobs_.emplace(id, std::move(job));
  advance_locked(clock_.now());
  return id;
}

void ResourceManager::advance_locked(TimePoint now) {
  for (auto& [id, job] : jobs_) {
    if (job.phase == Phase::Pending && now >= job.submitted + job.timeline.pending) {
      job.phase = Phase::Running;
      job.started = job.submitted + job.timeline.pending;
    }
    if (job.phase == Phase::Running && job.started && now >= *job.started + job.timeline.running) {
      job.phase = job.timeline.final_state == Phase::Failed ? Phase::Failed : Phase::Completed;
      job.ended = *job.started + job.timeline.running;
      render_outputs_locked(job);
    }
  }
}

void ResourceManager::render_outputs_locked(Job& job) {
  std::map<std::string, std::string> vars = {
      {"id", std::to_string(job.id)}, {"name", job.name}, {"state", state_name(flavor_, job.phase)}};
  const json& spec = job.payload;
  auto out_field = flavor_ == Flavor::Slurm ? "standard_output" : "output_file";
  auto err_field = flavor_ == Flavor::Slurm ? "standard_error" : "error_file";
  if (auto out = payload_string(spec, out_field); !out.empty()) {
    job.outputs[out] = substitute(config_.stdout_template, vars);
  }
  if (auto err = payload_string(spec, err_field); !err.empty()) {
    job.outputs[err] = substitute(config_.stderr_template, vars);
  }
  for (const auto& [path, tmpl] : config_.extra_outputs) job.outputs[path] = substitute(tmpl, vars);
}

void ResourceManager::advance(TimePoint now) {
  std::lock_guard lock(mutex_);
  advance_locked(now);
}

std::optional<Job> ResourceManager::job(std::int64_t id) {
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<Job> ResourceManager::jobs() {
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  std::vector<Job> out;
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

bool ResourceManager::kill(std::int64_t id) {
  std::lock_guard lock(mutex_);
  ++kill_requests_;
  advance_locked(clock_.now());
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return false;
  auto& job = it->second;
  job.kill_requests += 1;
  if (is_terminal(job.phase)) return true;
  job.phase = Phase::Cancelled;
  job.ended = clock_.now();
  render_outputs_locked(job);
  return true;
}

OutputStatus ResourceManager::output(std::int64_t id, const std::string& path, std::string& content) {
  std::lock_guard lock(mutex_);
  advance_locked(clock_.now());
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return OutputStatus::NoJob;
  const auto& job = it->second;
  if (!is_terminal(job.phase)) return OutputStatus::NotTerminal;
  if (auto o = job.outputs.find(path); o != job.outputs.end()) {
    content = o->second;
    return OutputStatus::Ok;
  }
  // Paths given relative to the working directory resolve too.
  auto cwd_field = flavor_ == Flavor::Slurm ? "current_working_directory" : "cwd";
  if (auto cwd = payload_string(job.payload, cwd_field); !cwd.empty() && path.rfind(cwd, 0) == 0) {
    auto rel = path.substr(cwd.size());
    while (!rel.empty() && rel.front() == '/') rel.erase(rel.begin());
    if (auto o = job.outputs.find(rel); o != job.outputs.end()) {
      content = o->second;
      return OutputStatus::Ok;
    }
  }
  if (auto f = shared_files_.find(path); f != shared_files_.end()) {
    content = f->second;
    return OutputStatus::Ok;
  }
  return OutputStatus::Missing;
}

void ResourceManager::put_shared_file(const std::string& path, std::string content) {
  std::lock_guard lock(mutex_);
  shared_files_[path] = std::move(content);
}

std::optional<std::string> ResourceManager::shared_file(const std::string& path) const {
  std::lock_guard lock(mutex_);
  auto it = shared_files_.find(path);
  if (it == shared_files_.end()) return std::nullopt;
  return it->second;
}

void ResourceManager::set_fault_plan(FaultPlan plan) {
  std::lock_guard lock(mutex_);
  faults_ = plan;
}

FaultPlan ResourceManager::fault_plan() const {
  std::lock_guard lock(mutex_);
  return faults_;
}

bool ResourceManager::consume_drop() {
  std::lock_guard lock(mutex_);
  if (faults_.drop_next <= 0) return false;
  --faults_.drop_next;
  return true;
}

bool ResourceManager::reject_submits() const {
  std::lock_guard lock(mutex_);
  return faults_.reject_submits;
}

int ResourceManager::latency_ms() const {
  std::lock_guard lock(mutex_);
  return faults_.latency_ms;
}

void ResourceManager::set_timeline(Timeline timeline) {
  std::lock_guard lock(mutex_);
  config_.timeline = timeline;
}

void ResourceManager::record(RequestLogEntry entry) {
  std::lock_guard lock(mutex_);
  log_.push_back(std::move(entry));
}

std::vector<RequestLogEntry> ResourceManager::request_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

int ResourceManager::submit_requests(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = submit_requests_.find(name);
  return it == submit_requests_.end() ? 0 : it->second;
}

int ResourceManager::effective_jobs(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(std::count_if(jobs_.begin(), jobs_.end(),
                                         [&](const auto& kv) { return kv.second.name == name; }));
}

int ResourceManager::kill_requests() const {
  std::lock_guard lock(mutex_);
  return kill_requests_;
}

ObjectStore::ObjectStore(const Clock& clock, std::map<std::string, std::string> access_keys)
    : clock_(clock), access_keys_(std::move(access_keys)) {}

bool ObjectStore::known_access_key(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return access_keys_.count(key) != 0;
}

void ObjectStore::create_bucket(const std::string& bucket) {
  std::lock_guard lock(mutex_);
  buckets_[bucket];
}

bool ObjectStore::has_bucket(const std::string& bucket) const {
  std::lock_guard lock(mutex_);
  return buckets_.count(bucket) != 0;
}

bool ObjectStore::put(const std::string& bucket, const std::string& key, std::string content) {
  std::lock_guard lock(mutex_);
  auto it = buckets_.find(bucket);
  if (it == buckets_.end()) return false;
  it->second[key] = std::move(content);
  return true;
}

std::optional<std::string> ObjectStore::get(const std::string& bucket, const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto b = buckets_.find(bucket);
  if (b == buckets_.end()) return std::nullopt;
  auto o = b->second.find(key);
  if (o == b->second.end()) return std::nullopt;
  return o->second;
}

std::size_t ObjectStore::object_count(const std::string& bucket) const {
  std::lock_guard lock(mutex_);
  auto b = buckets_.find(bucket);
  return b == buckets_.end() ? 0 : b->second.size();
}

void ObjectStore::set_fault_plan(FaultPlan plan) {
  std::lock_guard lock(mutex_);
  faults_ = plan;
}

FaultPlan ObjectStore::fault_plan() const {
  std::lock_guard lock(mutex_);
  return faults_;
}

bool ObjectStore::consume_drop() {
  std::lock_guard lock(mutex_);
  if (faults_.drop_next <= 0) return false;
  --faults_.drop_next;
  return true;
}

int ObjectStore::latency_ms() const {
  std::lock_guard lock(mutex_);
  return faults_.latency_ms;
}

void ObjectStore::record(RequestLogEntry entry) {
  std::lock_guard lock(mutex_);
  log_.push_back(std::move(entry));
}

std::vector<RequestLogEntry> ObjectStore::request_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace bridge::mock
