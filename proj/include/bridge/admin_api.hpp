#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "bridge/http.hpp"
#include "bridge/operator.hpp"

namespace bridge {

nlohmann::json to_json(const JobStatus& status);

/// Local HTTP admin API over an Operator:
///   POST   /v1/jobs[?namespace=ns]        body = BridgeJob document
///   GET    /v1/jobs                       list of status snapshots
///   GET    /v1/jobs/{ns}/{name}[?watch=1] snapshot, or NDJSON stream until terminal
///   POST   /v1/jobs/{ns}/{name}/kill
///   DELETE /v1/jobs/{ns}/{name}
/// Errors carry {"error": <code>, "message": ...}.
class AdminServer {
 public:
  explicit AdminServer(Operator& op);
  ~AdminServer();

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  std::string base_url() const { return host_.base_url(); }
  int port() const { return host_.port(); }

 private:
  void install_routes();

  Operator& op_;
  HttpServerHost host_;
};

}  // namespace bridge
