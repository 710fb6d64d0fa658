#include "bridge/admin_api.hpp"

#include "bridge/errors.hpp"
#include "bridge/log.hpp"
#include "internal/http_server.hpp"

namespace bridge {

using nlohmann::json;

json to_json(const JobStatus& s) {
  return {{"namespace", s.key.ns},
          {"name", s.key.name},
          {"jobStatus", std::string(to_string(s.state))},
          {"startTime", s.start_time},
          {"endTime", s.end_time},
          {"message", s.message},
          {"id", s.remote_id},
          {"kill", s.kill_requested},
          {"version", s.version}};
}

namespace {

constexpr auto kHeartbeat = std::chrono::seconds(1);

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  json body = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  int status = 500;
  switch (e.code()) {
    case Errc::SchemaError: {
      status = 400;
      if (auto* schema = dynamic_cast<const SchemaError*>(&e)) {
        body["fields"] = schema->fields();
        json issues = json::array();
        for (const auto& issue : schema->issues()) issues.push_back({{"field", issue.field}, {"problem", issue.problem}});
        body["issues"] = issues;
      }
      break;
    }
    case Errc::NotFound: status = 404; break;
    case Errc::AlreadyExists:
    case Errc::InvalidState: status = 409; break;
    default: break;
  }
  send_json(res, status, body);
}

JobKey key_of(const httplib::Request& req) { return {req.matches[1], req.matches[2]}; }

struct WatchState {
  std::unique_ptr<WatchStream> stream;
  std::optional<std::uint64_t> last_version;
  std::chrono::steady_clock::time_point last_write = std::chrono::steady_clock::now();
};

}  // namespace

AdminServer::AdminServer(Operator& op) : op_(op) { install_routes(); }

AdminServer::~AdminServer() { stop(); }

int AdminServer::start(const std::string& host, int port) { return host_.start(host, port); }

void AdminServer::stop() { host_.stop(); }

void AdminServer::install_routes() {
  auto& server = host_.impl().server;

  server.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto spec = parse_spec(req.body);
      if (req.has_param("namespace") && !req.get_param_value("namespace").empty()) {
        spec.ns = req.get_param_value("namespace");
        validate_spec(spec);
      }
      auto key = op_.submit(spec);
      send_json(res, 201, {{"namespace", key.ns}, {"name", key.name}, {"key", key.str()}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  server.Get("/v1/jobs", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& record : op_.store().list()) out.push_back(to_json(status_from_record(record)));
    send_json(res, 200, out);
  });

  server.Get(R"(/v1/jobs/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto key = key_of(req);
    try {
      auto status = op_.status(key);
      auto watch = req.get_param_value("watch");
      if (watch != "1" && watch != "true") return send_json(res, 200, to_json(status));
    } catch (const Error& e) {
      return send_error(res, e);
    }

    auto state = std::make_shared<WatchState>();
    state->stream = op_.store().watch(key.str());
    res.set_chunked_content_provider(
        "application/x-ndjson", [this, key, state](std::size_t, httplib::DataSink& sink) {
          if (!sink.is_writable()) return false;
          auto record = op_.store().find_record(key);
          if (!record) {
            std::string line = json{{"namespace", key.ns}, {"name", key.name}, {"deleted", true}}.dump() + "\n";
            sink.write(line.data(), line.size());
            sink.done();
            return true;
          }
          if (record->version != state->last_version) {
            state->last_version = record->version;
            auto status = status_from_record(*record);
            std::string line = to_json(status).dump() + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            state->last_write = std::chrono::steady_clock::now();
            if (is_terminal(status.state)) sink.done();
            return true;
          }
          if (std::chrono::steady_clock::now() - state->last_write >= kHeartbeat) {
            if (!sink.write("\n", 1)) return false;
            state->last_write = std::chrono::steady_clock::now();
          }
          try {
            state->stream->next(Duration(250));
          } catch (const Error&) {
            sink.done();
          }
          return true;
        });
  });

  server.Post(R"(/v1/jobs/([^/]+)/([^/]+)/kill)", [this](const httplib::Request& req, httplib::Response& res) {
    auto key = key_of(req);
    try {
      op_.kill(key);
      send_json(res, 200, {{"key", key.str()}, {"kill", true}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  server.Delete(R"(/v1/jobs/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto key = key_of(req);
    try {
      op_.remove(key);
      send_json(res, 200, {{"key", key.str()}, {"deleted", true}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });
}

}  // namespace bridge
