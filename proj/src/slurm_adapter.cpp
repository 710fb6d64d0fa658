// Slurm REST (slurmrestd v0.0.37 subset) adapter. The API has no file
// transfer, so inputs and outputs go through the cluster's shared filesystem,
// reached here through the shared-filesystem endpoint next to the REST API.

#include <nlohmann/json.hpp>

#include "adapters_internal.hpp"
#include "bridge/errors.hpp"
#include "bridge/translation.hpp"

namespace bridge {

using nlohmann::json;

std::string remote_wrapper(const std::string& path) {
  return "#!/bin/sh\nexec " + path + "\n";
}

namespace {

constexpr const char* kApi = "/slurm/v0.0.37";

std::optional<TimePoint> epoch_field(const json& job, const char* name) {
  if (!job.contains(name) || !job[name].is_number_integer()) return std::nullopt;
  auto value = job[name].get<std::int64_t>();
  if (value <= 0) return std::nullopt;
  return from_epoch_seconds(value);
}

class SlurmAdapter final : public ResourceAdapter {
 public:
  SlurmAdapter(Url base, std::chrono::milliseconds timeout) : http_(std::move(base), timeout) {}

  AdapterKind kind() const override { return AdapterKind::Slurm; }

  Session get_token(const CredentialSet& credentials) const override {
    if (credentials.username.empty() || credentials.token.empty()) {
      throw Error(Errc::AuthError, "slurm credentials need username and token");
    }
    Session session{credentials.username, credentials.token};
    auto res = call(session, "GET", std::string(kApi) + "/ping");
    if (res.status != 200) throw Error(Errc::AuthError, "slurm ping returned HTTP " + std::to_string(res.status));
    return session;
  }

  std::string submit(const Session& session, const SubmitRequest& request) const override {
    json job = builtin_manifest(AdapterKind::Slurm).translate(request.properties, request.client_name);
    for (const auto& [k, v] : request.environment) job["environment"][k] = v;
    if (!job.contains("environment")) job["environment"] = json::object();
    std::string script = request.script.kind == JobScript::Kind::Body
                             ? request.script.text
                             : remote_wrapper(request.script.text);
    json body = {{"job", job}, {"script", script}};
    auto res = call(session, "POST", std::string(kApi) + "/job/submit", body.dump());
    if (res.status != 200) {
      throw Error(Errc::SubmitRejected, "slurm rejected submission (HTTP " + std::to_string(res.status) + ")");
    }
    try {
      auto doc = json::parse(res.body);
      if (doc.contains("errors") && !doc["errors"].empty()) {
        throw Error(Errc::SubmitRejected, "slurm rejected submission: " + doc["errors"].dump());
      }
      auto id = doc.at("job_id").get<std::int64_t>();
      if (id <= 0) throw Error(Errc::SubmitRejected, "slurm returned job id 0");
      return std::to_string(id);
    } catch (const json::exception&) {
      throw Error(Errc::SubmitRejected, "malformed slurm submit response");
    }
  }

  std::optional<std::string> find_by_name(const Session& session,
                                          const std::string& client_name) const override {
    auto res = call(session, "GET", std::string(kApi) + "/jobs");
    if (res.status != 200) throw Error(Errc::Unreachable, "slurm job list returned HTTP " + std::to_string(res.status));
    std::optional<std::int64_t> found;
    try {
      auto doc = json::parse(res.body);
      for (const auto& job : doc.at("jobs")) {
        if (job.value("name", "") != client_name) continue;
        auto id = job.at("job_id").get<std::int64_t>();
        if (!found || id < *found) found = id;
      }
    } catch (const json::exception&) {
      throw Error(Errc::Unreachable, "malformed slurm job list");
    }
    if (!found) return std::nullopt;
    return std::to_string(*found);
  }

  RemoteJobInfo get_job_info(const Session& session, const std::string& remote_id) const override {
    auto res = call(session, "GET", std::string(kApi) + "/job/" + percent_encode(remote_id, false));
    if (res.status == 404) throw Error(Errc::NotFoundRemote, "slurm job " + remote_id + " not found");
    if (res.status != 200) throw Error(Errc::Unreachable, "slurm job query returned HTTP " + std::to_string(res.status));
    try {
      auto doc = json::parse(res.body);
      const auto& jobs = doc.at("jobs");
      if (jobs.empty()) throw Error(Errc::NotFoundRemote, "slurm job " + remote_id + " not found");
      const auto& job = jobs.at(0);
      RemoteJobInfo info;
      info.remote_id = std::to_string(job.at("job_id").get<std::int64_t>());
      info.remote_state = job.at("job_state").get<std::string>();
      info.name = job.value("name", "");
      info.start_time = epoch_field(job, "start_time");
      info.end_time = epoch_field(job, "end_time");
      info.raw = res.body;
      if (info.remote_state.empty()) throw Error(Errc::Unreachable, "slurm job state missing");
      return info;
    } catch (const json::exception&) {
      throw Error(Errc::Unreachable, "malformed slurm job response");
    }
  }

  void kill(const Session& session, const std::string& remote_id) const override {
    auto res = call(session, "DELETE", std::string(kApi) + "/job/" + percent_encode(remote_id, false));
    if (res.status == 404) throw Error(Errc::NotFoundRemote, "slurm job " + remote_id + " not found");
    if (res.status != 200) throw Error(Errc::Unreachable, "slurm cancel returned HTTP " + std::to_string(res.status));
  }

  std::string fetch_output(const Session& session, const std::string& remote_id,
                           const std::string& remote_path) const override {
    auto res = call(session, "GET",
                    "/_mock/shared/" + percent_encode(remote_id, false) + "/" + percent_encode(remote_path, true));
    if (res.status == 200) return res.body;
    if (res.status == 404 || res.status == 409) {
      throw Error(Errc::FileMissing, "remote file " + remote_path + " not available");
    }
    throw Error(Errc::Unreachable, "shared filesystem returned HTTP " + std::to_string(res.status));
  }

  std::string upload_input(const Session& session, const std::string& remote_path,
                           std::string_view content) const override {
    auto res = call(session, "PUT", "/_mock/shared/files/" + percent_encode(remote_path, true),
                    std::string(content), "application/octet-stream");
    if (res.status != 200 && res.status != 201) {
      throw Error(Errc::Unreachable, "shared filesystem upload returned HTTP " + std::to_string(res.status));
    }
    return remote_path;
  }

 private:
  HttpResponse call(const Session& session, const std::string& method, const std::string& target,
                    std::string body = {}, std::string content_type = "application/json") const {
    HttpRequest req;
    req.method = method;
    req.target = target;
    req.headers = {{"X-SLURM-USER-NAME", session.username}, {"X-SLURM-USER-TOKEN", session.token}};
    req.body = std::move(body);
    req.content_type = std::move(content_type);
    auto res = http_.send(req);
    if (res.status == 401 || res.status == 403) {
      throw Error(Errc::AuthError, "slurm rejected credentials for user " + session.username);
    }
    return res;
  }

  HttpClient http_;
};

}  // namespace

std::unique_ptr<ResourceAdapter> make_slurm_adapter(const Url& base, std::chrono::milliseconds timeout) {
  return std::make_unique<SlurmAdapter>(base, timeout);
}

}  // namespace bridge
