#include "bridge/staging.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "bridge/errors.hpp"
#include "bridge/log.hpp"

namespace bridge {

namespace {

bool same_digest(std::string a, std::string b) {
  auto lower = [](std::string& s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  };
  lower(a);
  lower(b);
  return a == b;
}

std::string shell_quote(const std::string& value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

}  // namespace

JobScript resolve_script(const BridgeJobSpec& spec, const ObjectStoreClient* storage) {
  const auto& data = spec.jobdata;
  switch (data.scriptlocation) {
    case ScriptLocation::Inline:
      return JobScript::body(data.jobscript);
    case ScriptLocation::Remote:
      return JobScript::remote_path(data.jobscript);
    case ScriptLocation::S3: {
      auto ref = parse_object_ref(data.jobscript);
      if (!ref) throw Error(Errc::ObjectMissing, "script reference '" + data.jobscript + "' is not <bucket>:<key>");
      if (storage == nullptr) throw Error(Errc::StorageUnreachable, "no object storage configured");
      auto body = storage->get_object(*ref);
      if (data.scriptmd) {
        auto actual = data.scriptmd->size() == 32 ? md5_hex(body) : sha256_hex(body);
        if (!same_digest(actual, *data.scriptmd)) {
          throw Error(Errc::DigestMismatch, "script " + ref->str() + " digest " + actual +
                                                " does not match scriptmd " + *data.scriptmd);
        }
      }
      return JobScript::body(std::move(body));
    }
  }
  return JobScript::remote_path(data.jobscript);
}

std::string apply_job_params(const std::string& script,
                             const std::map<std::string, std::string>& params) {
  if (params.empty()) return script;
  std::string exports;
  for (const auto& [k, v] : params) exports += "export " + k + "=" + shell_quote(v) + "\n";
  if (script.rfind("#!", 0) == 0) {
    auto eol = script.find('\n');
    if (eol == std::string::npos) return script + "\n" + exports;
    return script.substr(0, eol + 1) + exports + script.substr(eol + 1);
  }
  return exports + script;
}

std::string remote_input_path(const BridgeJobSpec& spec, const ObjectRef& ref) {
  auto slash = ref.key.rfind('/');
  auto base = slash == std::string::npos ? ref.key : ref.key.substr(slash + 1);
  auto it = spec.jobdata.jobproperties.find("currentWorkingDir");
  if (it == spec.jobdata.jobproperties.end() || it->second.empty()) return base;
  auto dir = it->second;
  if (dir.back() != '/') dir.push_back('/');
  return dir + base;
}

std::vector<std::string> stage_inputs(const BridgeJobSpec& spec, const ObjectStoreClient* storage,
                                      const ResourceAdapter& adapter, const Session& session) {
  std::vector<std::string> delivered;
  if (spec.jobdata.additionaldata.empty()) return delivered;
  if (storage == nullptr) throw Error(Errc::StorageUnreachable, "no object storage configured");
  for (const auto& text : spec.jobdata.additionaldata) {
    auto ref = parse_object_ref(text);
    if (!ref) throw Error(Errc::ObjectMissing, "input reference '" + text + "' is not <bucket>:<key>");
    auto content = storage->get_object(*ref);
    delivered.push_back(adapter.upload_input(session, remote_input_path(spec, *ref), content));
    log()->info("staged input {} to {}", ref->str(), delivered.back());
  }
  return delivered;
}

std::string output_object_key(const std::string& remote_path) {
  auto start = remote_path.find_first_not_of('/');
  return start == std::string::npos ? remote_path : remote_path.substr(start);
}

UploadResult upload_outputs(const ObjectStoreClient& storage, const std::string& bucket,
                            const std::vector<std::pair<std::string, std::string>>& files,
                            Clock& clock, std::stop_token stop, RetryPolicy policy) {
  UploadResult result;
  if (files.empty()) return result;

  auto with_retry = [&](const std::function<void()>& op) {
    Duration delay = policy.base_delay;
    for (int attempt = 0;; ++attempt) {
      try {
        op();
        return;
      } catch (const Error& e) {
        if (e.code() != Errc::StorageUnreachable || attempt >= policy.retries) throw;
        log()->warn("object storage unreachable, retry {} of {} in {} ms", attempt + 1,
                    policy.retries, delay.count());
        if (!clock.sleep_for(delay, stop)) throw;
        delay *= 2;
      }
    }
  };

  try {
    with_retry([&] { storage.ensure_bucket(bucket); });
  } catch (const Error& e) {
    result.errors.push_back("bucket " + bucket + ": " + e.what());
    return result;
  }
  for (const auto& [name, content] : files) {
    ObjectRef ref{bucket, output_object_key(name)};
    try {
      with_retry([&] { storage.put_object(ref, content); });
      result.keys.push_back(ref.key);
    } catch (const Error& e) {
      result.errors.push_back(name + ": " + e.what());
    }
  }
  return result;
}

}  // namespace bridge
