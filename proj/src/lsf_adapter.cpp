// LSF Application Center web-services subset. Sessions come from a logon
// call and travel as the platform_token cookie; the API supports file
// transfer to and from the cluster directly.

#include <nlohmann/json.hpp>

#include "adapters_internal.hpp"
#include "bridge/errors.hpp"
#include "bridge/translation.hpp"

namespace bridge {

using nlohmann::json;

namespace {

constexpr const char* kApi = "/platform/ws";

std::optional<TimePoint> epoch_field(const json& job, const char* name) {
  if (!job.contains(name) || !job[name].is_number_integer()) return std::nullopt;
  auto value = job[name].get<std::int64_t>();
  if (value <= 0) return std::nullopt;
  return from_epoch_seconds(value);
}

std::string id_string(const json& value) {
  return value.is_string() ? value.get<std::string>() : std::to_string(value.get<std::int64_t>());
}

class LsfAdapter final : public ResourceAdapter {
 public:
  LsfAdapter(Url base, std::chrono::milliseconds timeout) : http_(std::move(base), timeout) {}

  AdapterKind kind() const override { return AdapterKind::Lsf; }

  Session get_token(const CredentialSet& credentials) const override {
    if (credentials.username.empty() || credentials.token.empty()) {
      throw Error(Errc::AuthError, "lsf credentials need username and password");
    }
    HttpRequest req;
    req.method = "POST";
    req.target = std::string(kApi) + "/logon";
    req.body = json{{"username", credentials.username}, {"password", credentials.token}}.dump();
    req.content_type = "application/json";
    auto res = http_.send(req);
    if (res.status == 401 || res.status == 403) {
      throw Error(Errc::AuthError, "lsf logon rejected for user " + credentials.username);
    }
    if (res.status != 200) throw Error(Errc::Unreachable, "lsf logon returned HTTP " + std::to_string(res.status));
    try {
      return Session{credentials.username, json::parse(res.body).at("token").get<std::string>()};
    } catch (const json::exception&) {
      throw Error(Errc::AuthError, "malformed lsf logon response");
    }
  }

  std::string submit(const Session& session, const SubmitRequest& request) const override {
    json job = builtin_manifest(AdapterKind::Lsf).translate(request.properties, request.client_name);
    for (const auto& [k, v] : request.environment) job["environment"][k] = v;
    json body = {{"job", job}};
    if (request.script.kind == JobScript::Kind::Body) body["script"] = request.script.text;
    else body["command"] = request.script.text;
    auto res = call(session, "POST", std::string(kApi) + "/jobs/submit", body.dump());
    if (res.status != 200) {
      throw Error(Errc::SubmitRejected, "lsf rejected submission (HTTP " + std::to_string(res.status) + ")");
    }
    try {
      auto id = id_string(json::parse(res.body).at("id"));
      if (id.empty() || id == "0") throw Error(Errc::SubmitRejected, "lsf returned job id 0");
      return id;
    } catch (const json::exception&) {
      throw Error(Errc::SubmitRejected, "malformed lsf submit response");
    }
  }

  std::optional<std::string> find_by_name(const Session& session,
                                          const std::string& client_name) const override {
    auto res = call(session, "GET", std::string(kApi) + "/jobs");
    if (res.status != 200) throw Error(Errc::Unreachable, "lsf job list returned HTTP " + std::to_string(res.status));
    std::optional<std::int64_t> found;
    try {
      auto doc = json::parse(res.body);
      for (const auto& job : doc.at("jobs")) {
        if (job.value("name", "") != client_name) continue;
        auto id = std::stoll(id_string(job.at("id")));
        if (!found || id < *found) found = id;
      }
    } catch (const std::exception&) {
      throw Error(Errc::Unreachable, "malformed lsf job list");
    }
    if (!found) return std::nullopt;
    return std::to_string(*found);
  }

  RemoteJobInfo get_job_info(const Session& session, const std::string& remote_id) const override {
    auto res = call(session, "GET", std::string(kApi) + "/jobs/" + percent_encode(remote_id, false));
    if (res.status == 404) throw Error(Errc::NotFoundRemote, "lsf job " + remote_id + " not found");
    if (res.status != 200) throw Error(Errc::Unreachable, "lsf job query returned HTTP " + std::to_string(res.status));
    try {
      const auto job = json::parse(res.body).at("job");
      RemoteJobInfo info;
      info.remote_id = id_string(job.at("id"));
      info.remote_state = job.at("status").get<std::string>();
      info.name = job.value("name", "");
      info.start_time = epoch_field(job, "startTime");
      info.end_time = epoch_field(job, "endTime");
      info.raw = res.body;
      if (info.remote_state.empty()) throw Error(Errc::Unreachable, "lsf job status missing");
      return info;
    } catch (const json::exception&) {
      throw Error(Errc::Unreachable, "malformed lsf job response");
    }
  }

  void kill(const Session& session, const std::string& remote_id) const override {
    auto res = call(session, "POST", std::string(kApi) + "/jobs/" + percent_encode(remote_id, false) + "/kill");
    if (res.status == 404) throw Error(Errc::NotFoundRemote, "lsf job " + remote_id + " not found");
    if (res.status != 200) throw Error(Errc::Unreachable, "lsf kill returned HTTP " + std::to_string(res.status));
  }

  std::string fetch_output(const Session& session, const std::string& remote_id,
                           const std::string& remote_path) const override {
    auto res = call(session, "GET",
                    std::string(kApi) + "/jobfiles/" + percent_encode(remote_id, false) + "/" +
                        percent_encode(remote_path, true));
    if (res.status == 200) return res.body;
    if (res.status == 404 || res.status == 409) {
      throw Error(Errc::FileMissing, "remote file " + remote_path + " not available");
    }
    throw Error(Errc::Unreachable, "lsf file download returned HTTP " + std::to_string(res.status));
  }

  std::string upload_input(const Session& session, const std::string& remote_path,
                           std::string_view content) const override {
    auto res = call(session, "PUT", std::string(kApi) + "/files/" + percent_encode(remote_path, true),
                    std::string(content), "application/octet-stream");
    if (res.status != 200 && res.status != 201) {
      throw Error(Errc::Unreachable, "lsf file upload returned HTTP " + std::to_string(res.status));
    }
    return remote_path;
  }

 private:
  HttpResponse call(const Session& session, const std::string& method, const std::string& target,
                    std::string body = {}, std::string content_type = "application/json") const {
    HttpRequest req;
    req.method = method;
    req.target = target;
    req.headers = {{"Cookie", "platform_token=" + session.token}};
    req.body = std::move(body);
    req.content_type = std::move(content_type);
    auto res = http_.send(req);
    if (res.status == 401 || res.status == 403) {
      throw Error(Errc::AuthError, "lsf session rejected for user " + session.username);
    }
    return res;
  }

  HttpClient http_;
};

}  // namespace

std::unique_ptr<ResourceAdapter> make_lsf_adapter(const Url& base, std::chrono::milliseconds timeout) {
  return std::make_unique<LsfAdapter>(base, timeout);
}

}  // namespace bridge
