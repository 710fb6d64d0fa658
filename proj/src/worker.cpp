#include "bridge/worker.hpp"

#include <cstdlib>
#include <fstream>

#include "bridge/errors.hpp"
#include "bridge/log.hpp"
#include "bridge/record_codec.hpp"

namespace bridge {

namespace {

constexpr std::array<std::string_view, 6> kCrashPointNames = {
    "before_submit",         "after_submit",          "after_id_write",
    "mid_monitor",           "after_terminal_mapping", "before_output_upload"};

std::string base_name(const std::string& path) {
  auto slash = path.rfind('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace

std::string_view to_string(CrashPoint point) noexcept {
  return kCrashPointNames[static_cast<std::size_t>(point)];
}

std::optional<CrashPoint> parse_crash_point(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kCrashPointNames.size(); ++i) {
    if (kCrashPointNames[i] == text) return static_cast<CrashPoint>(i);
  }
  return std::nullopt;
}

WorkerEnvironment WorkerEnvironment::from_vars(const std::map<std::string, std::string>& vars) {
  auto get = [&](const char* name) -> std::string {
    auto it = vars.find(name);
    return it == vars.end() ? std::string() : it->second;
  };
  WorkerEnvironment env;
  auto ns = get("NAMESPACE");
  auto name = get("JOBNAME");
  if (ns.empty() || name.empty()) throw Error(Errc::InvalidState, "NAMESPACE and JOBNAME must be set");
  env.key = {ns, name};
  if (auto v = get("BRIDGE_STORE_ROOT"); !v.empty()) env.store_root = v;
  if (auto v = get("BRIDGE_CREDENTIALS"); !v.empty()) env.credentials = v;
  if (auto v = get("BRIDGE_S3_CREDENTIALS"); !v.empty()) env.s3_credentials = v;
  if (auto v = get("BRIDGE_DOWNLOADS"); !v.empty()) env.downloads = v;
  return env;
}

WorkerEnvironment WorkerEnvironment::from_env() {
  std::map<std::string, std::string> vars;
  for (const char* name : {"NAMESPACE", "JOBNAME", "BRIDGE_STORE_ROOT", "BRIDGE_CREDENTIALS",
                           "BRIDGE_S3_CREDENTIALS", "BRIDGE_DOWNLOADS"}) {
    if (const char* value = std::getenv(name)) vars[name] = value;
  }
  return from_vars(vars);
}

std::string client_job_name(const JobKey& key, const std::string& uid) {
  auto name = "bridge-" + key.ns + "-" + key.name;
  return uid.empty() ? name : name + "-" + uid;
}

Worker::Worker(StateStore& store, Clock& clock, WorkerEnvironment env, WorkerOptions options)
    : store_(store), clock_(clock), env_(std::move(env)), options_(std::move(options)) {}

void Worker::crash(CrashPoint point) {
  if (options_.crash_hook) options_.crash_hook(point);
}

int Worker::exit_for(BridgeState state) const {
  return state == BridgeState::Done ? exit_code::kDone : exit_code::kFailed;
}

JobRecord Worker::commit(const std::function<std::optional<RecordData>(const JobRecord&)>& delta,
                         int attempts) {
  auto record = store_.get_record(ctx_.key);
  for (int i = 0;; ++i) {
    auto change = delta(record);
    if (!change || change->empty()) return record;
    try {
      return store_.update_record(ctx_.key, *change, record.version);
    } catch (const Error& e) {
      if (e.code() != Errc::VersionConflict || i + 1 >= attempts) throw;
      record = store_.get_record(ctx_.key);
    }
  }
}

void Worker::load_context(const JobRecord& record) {
  ctx_.key = record.key;
  ctx_.data = record.data;
  ctx_.spec = spec_from_record(record.key, record.data);
  ctx_.poll = std::chrono::seconds(std::max(1, ctx_.spec.update_interval));
  auto url = parse_url(ctx_.spec.resource_url);
  if (!url) throw Error(Errc::InvalidState, "resourceURL is not a valid URL");
  ctx_.adapter = make_adapter(ctx_.spec.adapter_kind, *url, options_.http_timeout);
  ctx_.credentials = load_credentials(env_.credentials);

  const auto& s3 = ctx_.spec.s3storage;
  if (s3.endpoint) {
    auto endpoint = parse_endpoint(*s3.endpoint, s3.secure);
    if (!endpoint) throw Error(Errc::InvalidState, "s3storage.endpoint is not valid");
    auto creds = storage_credentials(load_credentials(env_.s3_credentials));
    ctx_.storage.emplace(*endpoint, creds, clock_, options_.http_timeout);
  }
}

int Worker::run() {
  JobRecord record;
  try {
    record = store_.get_record(env_.key);
  } catch (const Error& e) {
    log()->error("{}: cannot read job record: {}", env_.key.str(), e.what());
    return exit_code::kFatal;
  }

  try {
    load_context(record);
  } catch (const Error& e) {
    log()->error("{}: worker setup failed: {}", env_.key.str(), e.what());
    try {
      commit([&](const JobRecord& r) -> std::optional<RecordData> {
        if (r.get(field::kMessage) == e.what()) return std::nullopt;
        return RecordData{{field::kMessage, e.what()}};
      }, 2);
    } catch (const Error&) {
    }
    return exit_code::kFatal;
  }

  if (is_terminal(record.status())) return exit_for(record.status());

  try {
    session_ = ctx_.adapter->get_token(ctx_.credentials);
  } catch (const Error& e) {
    log()->error("{}: cannot authenticate with {}: {}", ctx_.key.str(), ctx_.spec.resource_url, e.what());
    if (e.code() == Errc::AuthError) {
      try {
        commit([&](const JobRecord& r) -> std::optional<RecordData> {
        if (r.get(field::kMessage) == e.what()) return std::nullopt;
        return RecordData{{field::kMessage, e.what()}};
      }, 2);
      } catch (const Error&) {
      }
    }
    return exit_code::kFatal;
  }

  std::string remote_id = record.get(field::kId);
  if (remote_id.empty()) {
    try {
      remote_id = submit_once(record);
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::SubmitRejected:
        case Errc::ObjectMissing:
        case Errc::DigestMismatch:
        case Errc::Unsupported:
        case Errc::FileMissing:
        case Errc::StorageError: {
          bool rejected = e.code() == Errc::SubmitRejected;
          log()->error("{}: {}", ctx_.key.str(), e.what());
          std::string message = rejected ? std::string(kSubmitFailedMessage) : e.what();
          commit([&](const JobRecord& r) -> std::optional<RecordData> {
                   if (!validate_transition(r.status(), BridgeState::Failed)) return std::nullopt;
                   return RecordData{{field::kJobStatus, std::string(to_string(BridgeState::Failed))},
                                     {field::kMessage, message}};
                 },
                 5);
          return exit_code::kFailed;
        }
        default:
          log()->error("{}: submission interrupted: {}", ctx_.key.str(), e.what());
          return exit_code::kFatal;
      }
    }
  } else {
    log()->info("{}: job {} already submitted, resuming monitoring", ctx_.key.str(), remote_id);
  }

  std::optional<BridgeState> final_state;
  try {
    final_state = monitor(remote_id);
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound || e.code() == Errc::StoreClosed) {
      log()->info("{}: record removed, stopping", ctx_.key.str());
      return exit_code::kTerminated;
    }
    log()->error("{}: monitoring failed: {}", ctx_.key.str(), e.what());
    return exit_code::kFatal;
  }
  if (!final_state) return exit_code::kTerminated;
  return exit_for(*final_state);
}

std::string Worker::submit_once(JobRecord& record) {
  auto client_name = record.get(field::kClientName);
  if (client_name.empty()) {
    client_name = client_job_name(ctx_.key, record.get(field::kUid));
    record = commit([&](const JobRecord&) { return RecordData{{field::kClientName, client_name}}; }, 5);
  } else if (auto found = ctx_.adapter->find_by_name(session_, client_name)) {
    log()->info("{}: adopting remote job {} submitted as {}", ctx_.key.str(), *found, client_name);
    record = commit([&](const JobRecord& r) -> std::optional<RecordData> {
                      RecordData delta{{field::kId, *found}};
                      if (validate_transition(r.status(), BridgeState::Submitted)) {
                        delta[field::kJobStatus] = std::string(to_string(BridgeState::Submitted));
                      }
                      return delta;
                    },
                    5);
    crash(CrashPoint::AfterIdWrite);
    return *found;
  }

  auto storage = ctx_.storage ? &*ctx_.storage : nullptr;
  auto script = resolve_script(ctx_.spec, storage);
  stage_inputs(ctx_.spec, storage, *ctx_.adapter, session_);

  SubmitRequest request;
  request.properties = ctx_.spec.jobdata.jobproperties;
  request.client_name = client_name;
  if (script.kind == JobScript::Kind::Body) {
    script.text = apply_job_params(script.text, ctx_.spec.jobdata.jobparams);
  } else {
    request.environment = ctx_.spec.jobdata.jobparams;
  }
  request.script = std::move(script);

  crash(CrashPoint::BeforeSubmit);
  auto id = ctx_.adapter->submit(session_, request);
  log()->info("{}: submitted remote job {} as {}", ctx_.key.str(), id, client_name);
  crash(CrashPoint::AfterSubmit);

  record = commit([&](const JobRecord& r) -> std::optional<RecordData> {
                    RecordData delta{{field::kId, id}};
                    if (validate_transition(r.status(), BridgeState::Submitted)) {
                      delta[field::kJobStatus] = std::string(to_string(BridgeState::Submitted));
                    }
                    return delta;
                  },
                  5);
  crash(CrashPoint::AfterIdWrite);
  return id;
}

std::optional<BridgeState> Worker::monitor(const std::string& remote_id) {
  const auto kind = ctx_.spec.adapter_kind;
  int failures = 0;
  auto record = store_.get_record(ctx_.key);
  bool kill_sent = record.get(field::kKillSent) == "true";

  for (;;) {
    if (!clock_.sleep_for(ctx_.poll, options_.stop)) return std::nullopt;
    crash(CrashPoint::MidMonitor);
    record = store_.get_record(ctx_.key);
    if (is_terminal(record.status())) return record.status();

    std::optional<RemoteJobInfo> info;
    try {
      info = ctx_.adapter->get_job_info(session_, remote_id);
    } catch (const Error& e) {
      ++failures;
      log()->warn("{}: status fetch for job {} failed ({} in a row): {}", ctx_.key.str(), remote_id,
                  failures, e.what());
      if (failures >= options_.unknown_threshold) {
        commit([&](const JobRecord& r) -> std::optional<RecordData> {
                 if (!validate_transition(r.status(), BridgeState::Unknown)) return std::nullopt;
                 return RecordData{{field::kJobStatus, std::string(to_string(BridgeState::Unknown))}};
               },
               2);
      }
      continue;
    }
    failures = 0;

    if (record.get(field::kKill) == "true" && !kill_sent &&
        !is_terminal(map_remote_state(kind, info->remote_state))) {
      try {
        ctx_.adapter->kill(session_, remote_id);
        kill_sent = true;
        log()->info("{}: kill sent for remote job {}", ctx_.key.str(), remote_id);
        commit([&](const JobRecord&) { return RecordData{{field::kKillSent, "true"}}; }, 2);
        info = ctx_.adapter->get_job_info(session_, remote_id);
      } catch (const Error& e) {
        log()->warn("{}: kill of job {} not confirmed: {}", ctx_.key.str(), remote_id, e.what());
      }
    }

    auto state = map_remote_state(kind, info->remote_state);
    if (kill_sent && state == BridgeState::Failed) state = BridgeState::Killed;

    auto now = clock_.now();
    auto start = info->start_time;
    auto end = info->end_time;
    auto delta_for = [&](const JobRecord& r) -> std::optional<RecordData> {
      RecordData delta;
      auto current = r.status();
      if (state != current && validate_transition(current, state)) {
        delta[field::kJobStatus] = std::string(to_string(state));
      }
      bool started = state == BridgeState::Running || is_terminal(state);
      if (r.get(field::kStartTime).empty() && (start || started)) {
        delta[field::kStartTime] = format_rfc3339(start.value_or(now));
      }
      if (is_terminal(state) && r.get(field::kEndTime).empty()) {
        delta[field::kEndTime] = format_rfc3339(end.value_or(now));
      }
      return delta;
    };

    if (!is_terminal(state)) {
      try {
        commit(delta_for, 2);
      } catch (const Error& e) {
        if (e.code() != Errc::VersionConflict) throw;
      }
      continue;
    }

    log()->info("{}: remote job {} reached {} ({})", ctx_.key.str(), remote_id, info->remote_state,
                to_string(state));
    crash(CrashPoint::AfterTerminalMapping);
    auto staged = stage_outputs(remote_id);
    std::string message;
    for (const auto& err : staged.errors) message += (message.empty() ? "" : "; ") + err;
    if (!message.empty()) message = "output staging incomplete: " + message;

    commit([&](const JobRecord& r) {
             auto delta = delta_for(r);
             if (delta && !message.empty()) (*delta)[field::kMessage] = message;
             return delta;
           },
           10);
    return state;
  }
}

UploadResult Worker::stage_outputs(const std::string& remote_id) {
  UploadResult result;
  const auto& upload = ctx_.spec.s3upload;
  if (!upload.bucket || upload.files.empty()) return result;

  auto dir = env_.downloads / ctx_.key.ns / ctx_.key.name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& path : upload.files) {
    try {
      auto content = ctx_.adapter->fetch_output(session_, remote_id, path);
      std::ofstream out(dir / base_name(path), std::ios::binary | std::ios::trunc);
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!out) result.errors.push_back(path + ": cannot write to downloads area");
      files.emplace_back(path, std::move(content));
    } catch (const Error& e) {
      result.errors.push_back(path + ": " + e.what());
    }
  }

  crash(CrashPoint::BeforeOutputUpload);
  if (!ctx_.storage) {
    result.errors.push_back("no object storage configured for upload");
    return result;
  }
  auto uploaded = upload_outputs(*ctx_.storage, *upload.bucket, files, clock_, options_.stop,
                                 options_.upload_retry);
  result.keys = std::move(uploaded.keys);
  result.errors.insert(result.errors.end(), uploaded.errors.begin(), uploaded.errors.end());
  for (const auto& key : result.keys) log()->info("{}: uploaded {}:{}", ctx_.key.str(), *upload.bucket, key);
  return result;
}

}  // namespace bridge
