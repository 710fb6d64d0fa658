#include <thread>

#include "bridge/mock.hpp"
#include "bridge/objectstore.hpp"
#include "internal/http_server.hpp"

namespace bridge::mock {

using nlohmann::json;

namespace {

constexpr const char* kDropHeader = "X-Mock-Dropped";
constexpr const char* kSlurm = "/slurm/v0.0.37";
constexpr const char* kLsf = "/platform/ws";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error_reply(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"errors", json::array({json{{"error", message}}})}});
}

// Writes the status line and headers, then aborts the body so the client
// sees the connection die mid-response.
void drop_connection(httplib::Response& res) {
  res.status = 200;
  res.set_header(kDropHeader, "1");
  res.set_content_provider(
      64, "application/json", [](std::size_t, std::size_t, httplib::DataSink&) { return false; });
}

bool is_control(const std::string& path) {
  return path.rfind("/_mock/", 0) == 0 && path.rfind("/_mock/shared/", 0) != 0;
}

json log_json(const std::vector<RequestLogEntry>& log) {
  json out = json::array();
  for (const auto& e : log) {
    out.push_back({{"at", format_rfc3339(e.at)},
                   {"method", e.method},
                   {"path", e.path},
                   {"status", e.status},
                   {"dropped", e.dropped}});
  }
  return out;
}

std::optional<json> parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body.empty() ? "{}" : req.body);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::int64_t epoch_or_zero(const std::optional<TimePoint>& t) {
  return t ? to_epoch_seconds(*t) : 0;
}

std::optional<std::int64_t> parse_id(const std::string& text) {
  try {
    std::size_t used = 0;
    auto id = std::stoll(text, &used);
    if (used != text.size()) return std::nullopt;
    return id;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

json slurm_job(const Job& job) {
  return {{"job_id", job.id},
          {"name", job.name},
          {"job_state", state_name(Flavor::Slurm, job.phase)},
          {"submit_time", to_epoch_seconds(job.submitted)},
          {"start_time", epoch_or_zero(job.started)},
          {"end_time", epoch_or_zero(job.ended)}};
}

json lsf_job(const Job& job) {
  return {{"id", std::to_string(job.id)},
          {"name", job.name},
          {"status", state_name(Flavor::Lsf, job.phase)},
          {"submitTime", to_epoch_seconds(job.submitted)},
          {"startTime", epoch_or_zero(job.started)},
          {"endTime", epoch_or_zero(job.ended)}};
}

std::string cookie_value(const httplib::Request& req, const std::string& name) {
  auto cookies = req.get_header_value("Cookie");
  std::size_t pos = 0;
  while (pos < cookies.size()) {
    auto end = cookies.find(';', pos);
    if (end == std::string::npos) end = cookies.size();
    auto item = cookies.substr(pos, end - pos);
    auto first = item.find_first_not_of(' ');
    if (first != std::string::npos) item = item.substr(first);
    if (item.rfind(name + "=", 0) == 0) return item.substr(name.size() + 1);
    pos = end + 1;
  }
  return {};
}

template <typename Target>
void install_common(httplib::Server& server, Target& target) {
  server.set_pre_routing_handler([&target](const httplib::Request& req, httplib::Response& res) {
    if (is_control(req.path)) return httplib::Server::HandlerResponse::Unhandled;
    if (auto ms = target.latency_ms(); ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    if (target.consume_drop()) {
      target.record({target.clock().now(), req.method, req.path, 0, true});
      drop_connection(res);
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  server.set_logger([&target](const httplib::Request& req, const httplib::Response& res) {
    if (res.has_header(kDropHeader) || is_control(req.path)) return;
    target.record({target.clock().now(), req.method, req.path, res.status, false});
  });
  server.Post("/_mock/faults", [&target](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body) return reply(res, 400, json{{"error", "malformed fault plan"}});
    target.set_fault_plan(parse_fault_plan(*body));
    reply(res, 200, to_json(target.fault_plan()));
  });
  server.Get("/_mock/faults", [&target](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, to_json(target.fault_plan()));
  });
  server.Get("/_mock/log", [&target](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, log_json(target.request_log()));
  });
}

}  // namespace

ResourceManagerServer::ResourceManagerServer(ResourceManager& manager, SimClock* manual_clock)
    : manager_(manager), manual_clock_(manual_clock) {
  install_routes();
}

ResourceManagerServer::~ResourceManagerServer() { stop(); }

int ResourceManagerServer::start(int port) { return host_.start("127.0.0.1", port); }

void ResourceManagerServer::stop() { host_.stop(); }

void ResourceManagerServer::install_routes() {
  auto& server = host_.impl().server;
  auto& m = manager_;
  install_common(server, m);

  server.Post("/_mock/advance", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body) return reply(res, 400, json{{"error", "malformed body"}});
    if (body->contains("seconds")) {
      if (manual_clock_ == nullptr) return reply(res, 409, json{{"error", "clock is not manually stepped"}});
      auto ms = static_cast<std::int64_t>((*body)["seconds"].get<double>() * 1000.0);
      manual_clock_->advance(Duration(ms));
    }
    manager_.advance();
    reply(res, 200, json{{"now", format_rfc3339(manager_.clock().now())}});
  });

  server.Get("/_mock/jobs", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& job : manager_.jobs()) {
      out.push_back({{"id", job.id},
                     {"name", job.name},
                     {"state", state_name(manager_.flavor(), job.phase)},
                     {"payload", job.payload},
                     {"script", job.script},
                     {"kill_requests", job.kill_requests}});
    }
    reply(res, 200, out);
  });

  if (m.flavor() == Flavor::Slurm) {
    auto authed = [&m](const httplib::Request& req, httplib::Response& res) {
      if (m.authenticate(req.get_header_value("X-SLURM-USER-NAME"), req.get_header_value("X-SLURM-USER-TOKEN"))) {
        return true;
      }
      error_reply(res, 401, "authentication failed");
      return false;
    };
    server.Get(std::string(kSlurm) + "/ping", [authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      reply(res, 200, json{{"pings", json::array({json{{"hostname", "mock"}, {"ping", "UP"}}})}});
    });
    server.Post(std::string(kSlurm) + "/job/submit", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      if (m.reject_submits()) return error_reply(res, 500, "submission rejected");
      auto body = parse_body(req);
      if (!body || !body->contains("job") || !(*body)["job"].is_object()) {
        return error_reply(res, 400, "malformed job description");
      }
      auto job = (*body)["job"];
      auto name = job.value("name", std::string());
      auto script = body->value("script", std::string());
      auto id = m.submit(name, std::move(job), std::move(script));
      reply(res, 200, json{{"job_id", id}, {"errors", json::array()}});
    });
    server.Get(std::string(kSlurm) + "/jobs", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      json jobs = json::array();
      for (const auto& job : m.jobs()) jobs.push_back(slurm_job(job));
      reply(res, 200, json{{"jobs", jobs}});
    });
    server.Get(std::string(kSlurm) + R"(/job/([^/]+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      auto id = parse_id(req.matches[1]);
      auto job = id ? m.job(*id) : std::nullopt;
      if (!job) return error_reply(res, 404, "invalid job id");
      reply(res, 200, json{{"jobs", json::array({slurm_job(*job)})}});
    });
    server.Delete(std::string(kSlurm) + R"(/job/([^/]+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      auto id = parse_id(req.matches[1]);
      if (!id || !m.kill(*id)) return error_reply(res, 404, "invalid job id");
      reply(res, 200, json{{"errors", json::array()}});
    });
    server.Put(R"(/_mock/shared/files/(.+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      m.put_shared_file(req.matches[1], req.body);
      reply(res, 201, json{{"path", std::string(req.matches[1])}});
    });
    server.Get(R"(/_mock/shared/(\d+)/(.+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
      if (!authed(req, res)) return;
      std::string content;
      switch (m.output(std::stoll(req.matches[1]), req.matches[2], content)) {
        case OutputStatus::Ok:
          res.status = 200;
          res.set_content(content, "application/octet-stream");
          return;
        case OutputStatus::NotTerminal:
          return error_reply(res, 409, "job has not finished");
        default:
          return error_reply(res, 404, "no such file");
      }
    });
    return;
  }

  auto authed = [&m](const httplib::Request& req, httplib::Response& res) {
    if (m.valid_session(cookie_value(req, "platform_token"))) return true;
    reply(res, 403, json{{"error", "invalid or missing session"}});
    return false;
  };
  server.Post(std::string(kLsf) + "/logon", [&m](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req);
    if (!body) return reply(res, 400, json{{"error", "malformed logon"}});
    auto token = m.logon(body->value("username", std::string()), body->value("password", std::string()));
    if (!token) return reply(res, 401, json{{"error", "logon failed"}});
    reply(res, 200, json{{"token", *token}});
  });
  server.Post(std::string(kLsf) + "/jobs/submit", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    if (m.reject_submits()) return reply(res, 500, json{{"error", "submission rejected"}});
    auto body = parse_body(req);
    if (!body || !body->contains("job") || !(*body)["job"].is_object()) {
      return reply(res, 400, json{{"error", "malformed job description"}});
    }
    auto job = (*body)["job"];
    auto name = job.value("job_name", std::string());
    std::string script = body->contains("script") ? body->value("script", std::string())
                                                  : body->value("command", std::string());
    auto id = m.submit(name, std::move(job), std::move(script));
    reply(res, 200, json{{"id", std::to_string(id)}});
  });
  server.Get(std::string(kLsf) + "/jobs", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    json jobs = json::array();
    for (const auto& job : m.jobs()) jobs.push_back(lsf_job(job));
    reply(res, 200, json{{"jobs", jobs}});
  });
  server.Get(std::string(kLsf) + R"(/jobs/([^/]+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    auto id = parse_id(req.matches[1]);
    auto job = id ? m.job(*id) : std::nullopt;
    if (!job) return reply(res, 404, json{{"error", "job not found"}});
    reply(res, 200, json{{"job", lsf_job(*job)}});
  });
  server.Post(std::string(kLsf) + R"(/jobs/([^/]+)/kill)", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    auto id = parse_id(req.matches[1]);
    if (!id || !m.kill(*id)) return reply(res, 404, json{{"error", "job not found"}});
    reply(res, 200, json{{"id", std::to_string(*id)}});
  });
  server.Get(std::string(kLsf) + R"(/jobfiles/(\d+)/(.+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    std::string content;
    switch (m.output(std::stoll(req.matches[1]), req.matches[2], content)) {
      case OutputStatus::Ok:
        res.status = 200;
        res.set_content(content, "application/octet-stream");
        return;
      case OutputStatus::NotTerminal:
        return reply(res, 409, json{{"error", "job has not finished"}});
      default:
        return reply(res, 404, json{{"error", "no such file"}});
    }
  });
  server.Put(std::string(kLsf) + R"(/files/(.+))", [&m, authed](const httplib::Request& req, httplib::Response& res) {
    if (!authed(req, res)) return;
    m.put_shared_file(req.matches[1], req.body);
    reply(res, 201, json{{"path", std::string(req.matches[1])}});
  });
}

// Object store

namespace {

void s3_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Error><Code>" + code + "</Code><Message>" +
                      message + "</Message></Error>",
                  "application/xml");
}

// Static key check: the scheme and a known access key must be present along
// with a signature; the signature itself is not recomputed.
bool s3_authorized(const ObjectStore& store, const httplib::Request& req) {
  static const std::string prefix = "AWS4-HMAC-SHA256 Credential=";
  auto auth = req.get_header_value("Authorization");
  if (auth.rfind(prefix, 0) != 0) return false;
  auto slash = auth.find('/', prefix.size());
  if (slash == std::string::npos) return false;
  if (!store.known_access_key(auth.substr(prefix.size(), slash - prefix.size()))) return false;
  return auth.find("Signature=") != std::string::npos;
}

}  // namespace

ObjectStoreServer::ObjectStoreServer(ObjectStore& store) : store_(store) { install_routes(); }

ObjectStoreServer::~ObjectStoreServer() { stop(); }

int ObjectStoreServer::start(int port) { return host_.start("127.0.0.1", port); }

void ObjectStoreServer::stop() { host_.stop(); }

std::string ObjectStoreServer::endpoint() const { return "127.0.0.1:" + std::to_string(host_.port()); }

void ObjectStoreServer::install_routes() {
  auto& server = host_.impl().server;
  auto& s = store_;
  install_common(server, s);

  server.Put(R"(/([^/]+)/?)", [&s](const httplib::Request& req, httplib::Response& res) {
    if (!s3_authorized(s, req)) return s3_error(res, 403, "AccessDenied", "Access Denied");
    s.create_bucket(req.matches[1]);
    res.status = 200;
  });
  server.Put(R"(/([^/]+)/(.+))", [&s](const httplib::Request& req, httplib::Response& res) {
    if (!s3_authorized(s, req)) return s3_error(res, 403, "AccessDenied", "Access Denied");
    if (!s.put(req.matches[1], req.matches[2], req.body)) {
      return s3_error(res, 404, "NoSuchBucket", "The specified bucket does not exist");
    }
    res.status = 200;
    res.set_header("ETag", "\"" + md5_hex(req.body) + "\"");
  });
  server.Get(R"(/([^/]+)/(.+))", [&s](const httplib::Request& req, httplib::Response& res) {
    if (!s3_authorized(s, req)) return s3_error(res, 403, "AccessDenied", "Access Denied");
    auto object = s.get(req.matches[1], req.matches[2]);
    if (!object) return s3_error(res, 404, "NoSuchKey", "The specified key does not exist.");
    res.status = 200;
    res.set_content(std::move(*object), "application/octet-stream");
  });
}

}  // namespace bridge::mock
