#include "bridge/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "bridge/errors.hpp"
#include "bridge/http.hpp"
#include "bridge/jobspec.hpp"
#include "bridge/state.hpp"

namespace bridge {

using nlohmann::json;

namespace {

constexpr const char* kDefaultEndpoint = "http://127.0.0.1:8080";

struct Options {
  std::string endpoint;
  std::string ns;
  bool ns_given = false;
  bool as_json = false;
  bool watch = false;
  std::string file;
  std::string key;
};

class Session {
 public:
  Session(const Options& opts, std::ostream& out, std::ostream& err)
      : opts_(opts), out_(out), err_(err), http_(endpoint(opts.endpoint)) {}

  int submit() {
    std::string text;
    BridgeJobSpec spec;
    if (int rc = load(text, spec); rc != cli_exit::kOk) return rc;
    return create(text, spec);
  }

  int status() {
    auto key = parse_key(opts_.key, opts_.ns);
    if (opts_.watch) {
      BridgeState final_state{};
      int rc = watch(key, final_state);
      if (rc != cli_exit::kOk) return rc;
      return final_state == BridgeState::Done ? cli_exit::kOk : cli_exit::kRemoteFailure;
    }
    auto res = request("GET", job_path(key));
    if (res.status != 200) return report_error(res);
    print_status(json::parse(res.body));
    return cli_exit::kOk;
  }

  int kill() {
    auto key = parse_key(opts_.key, opts_.ns);
    auto res = request("POST", job_path(key) + "/kill");
    if (res.status != 200) return report_error(res);
    if (opts_.as_json) out_ << res.body << "\n";
    else out_ << key.str() << " kill requested\n";
    return cli_exit::kOk;
  }

  int remove() {
    auto key = parse_key(opts_.key, opts_.ns);
    return remove(key);
  }

  // createop -> invokeop -> cleanop. cleanop runs whenever the document
  // parsed, whatever happened before it.
  int pipeline() {
    std::string text;
    BridgeJobSpec spec;
    if (int rc = load(text, spec); rc != cli_exit::kOk) return rc;
    auto key = effective_key(spec);

    int rc = cli_exit::kOk;
    try {
      rc = create(text, spec);
      if (rc == cli_exit::kOk) {
        BridgeState final_state{};
        rc = watch(key, final_state);
        if (rc == cli_exit::kOk && final_state != BridgeState::Done) rc = cli_exit::kRemoteFailure;
      }
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
      rc = cli_exit::kTransport;
    }

    int clean = cli_exit::kOk;
    try {
      clean = remove(key);
    } catch (const Error& e) {
      err_ << "error: cleanup failed: " << e.what() << "\n";
      clean = cli_exit::kTransport;
    }
    return rc != cli_exit::kOk ? rc : clean;
  }

 private:
  static Url endpoint(const std::string& text) {
    auto url = text.find("://") == std::string::npos ? parse_endpoint(text, false) : parse_url(text);
    if (!url) throw Error(Errc::Unreachable, "invalid endpoint '" + text + "'");
    return *url;
  }

  static std::string job_path(const JobKey& key) {
    return "/v1/jobs/" + percent_encode(key.ns, false) + "/" + percent_encode(key.name, false);
  }

  JobKey effective_key(const BridgeJobSpec& spec) const {
    return {opts_.ns_given ? opts_.ns : spec.ns, spec.name};
  }

  HttpResponse request(const std::string& method, const std::string& target, std::string body = {}) {
    HttpRequest req;
    req.method = method;
    req.target = target;
    req.body = std::move(body);
    if (!req.body.empty()) req.content_type = "application/yaml";
    return http_.send(req);
  }

  int load(std::string& text, BridgeJobSpec& spec) {
    std::ifstream in(opts_.file, std::ios::binary);
    if (!in) {
      err_ << "error: cannot read " << opts_.file << "\n";
      return cli_exit::kSchema;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    text = buffer.str();
    try {
      spec = parse_spec(text);
    } catch (const SchemaError& e) {
      err_ << "SchemaError: invalid fields:";
      for (const auto& f : e.fields()) err_ << " " << f;
      err_ << "\n";
      for (const auto& issue : e.issues()) err_ << "  " << issue.field << ": " << issue.problem << "\n";
      return cli_exit::kSchema;
    }
    return cli_exit::kOk;
  }

  int create(const std::string& text, const BridgeJobSpec& spec) {
    std::string target = "/v1/jobs";
    if (opts_.ns_given) target += "?namespace=" + percent_encode(opts_.ns, false);
    auto res = request("POST", target, text);
    if (res.status != 201) return report_error(res);
    auto key = effective_key(spec);
    if (opts_.as_json) out_ << res.body << "\n";
    else out_ << key.str() << " created\n";
    return cli_exit::kOk;
  }

  int remove(const JobKey& key) {
    auto res = request("DELETE", job_path(key));
    if (res.status != 200) return report_error(res);
    if (opts_.as_json) out_ << res.body << "\n";
    else out_ << key.str() << " deleted\n";
    return cli_exit::kOk;
  }

  // Streams snapshots until the job is terminal. The stream is reopened if
  // the connection ends early.
  int watch(const JobKey& key, BridgeState& final_state) {
    for (;;) {
      std::string buffer;
      std::optional<BridgeState> last;
      bool deleted = false;
      int status = http_.stream(job_path(key) + "?watch=1", [&](std::string_view chunk) {
        buffer.append(chunk);
        for (auto eol = buffer.find('\n'); eol != std::string::npos; eol = buffer.find('\n')) {
          auto line = buffer.substr(0, eol);
          buffer.erase(0, eol + 1);
          if (line.empty()) continue;
          auto doc = json::parse(line, nullptr, false);
          if (doc.is_discarded()) continue;
          if (doc.value("deleted", false)) {
            deleted = true;
            return false;
          }
          if (!doc.contains("jobStatus")) continue;
          print_status(doc);
          last = parse_state(doc.value("jobStatus", ""));
          if (last && is_terminal(*last)) return false;
        }
        return true;
      });
      if (status == 404) {
        err_ << "NotFound: " << key.str() << "\n";
        return cli_exit::kNotFound;
      }
      if (deleted) {
        err_ << "NotFound: " << key.str() << " was deleted\n";
        return cli_exit::kNotFound;
      }
      if (last && is_terminal(*last)) {
        final_state = *last;
        return cli_exit::kOk;
      }
      if (status != 200 && status != 0) {
        err_ << "error: watch returned HTTP " << status << "\n";
        return cli_exit::kTransport;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  }

  void print_status(const json& doc) {
    if (opts_.as_json) {
      out_ << doc.dump() << "\n";
      return;
    }
    out_ << doc.value("namespace", "") << "/" << doc.value("name", "") << " "
         << doc.value("jobStatus", "") << " start=" << doc.value("startTime", "")
         << " end=" << doc.value("endTime", "");
    auto id = doc.value("id", "");
    if (!id.empty()) out_ << " id=" << id;
    auto message = doc.value("message", "");
    if (!message.empty()) out_ << " message=\"" << message << "\"";
    out_ << "\n";
    out_.flush();
  }

  int report_error(const HttpResponse& res) {
    auto doc = json::parse(res.body, nullptr, false);
    std::string code = doc.is_object() ? doc.value("error", "") : "";
    std::string message = doc.is_object() ? doc.value("message", res.body) : res.body;
    err_ << (code.empty() ? "error" : code) << ": " << message << "\n";
    if (code == "SchemaError") {
      if (doc.contains("fields")) {
        err_ << "invalid fields:";
        for (const auto& f : doc["fields"]) err_ << " " << f.get<std::string>();
        err_ << "\n";
      }
      return cli_exit::kSchema;
    }
    if (code == "AlreadyExists") return cli_exit::kDuplicate;
    if (code == "NotFound" || res.status == 404) return cli_exit::kNotFound;
    if (code == "InvalidState") return cli_exit::kInvalidState;
    return cli_exit::kTransport;
  }

  const Options& opts_;
  std::ostream& out_;
  std::ostream& err_;
  HttpClient http_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opts;
  const char* env_endpoint = std::getenv("BRIDGE_ENDPOINT");
  opts.endpoint = env_endpoint != nullptr && *env_endpoint != '\0' ? env_endpoint : kDefaultEndpoint;
  opts.ns = std::string(kDefaultNamespace);

  CLI::App app{"Submit and manage BridgeJobs through the operator admin API", "bridge"};
  app.require_subcommand(1);
  app.add_option("--endpoint", opts.endpoint, "Operator admin API (default $BRIDGE_ENDPOINT)");
  auto* ns_opt = app.add_option("-n,--namespace", opts.ns, "Namespace of the job");
  app.add_flag("--json", opts.as_json, "Machine-readable output");

  auto* submit = app.add_subcommand("submit", "Create a job from a BridgeJob file");
  submit->add_option("file", opts.file)->required();
  auto* status = app.add_subcommand("status", "Show the status of a job");
  status->add_option("key", opts.key, "name or namespace/name")->required();
  status->add_flag("-w,--watch", opts.watch, "Stream updates until the job finishes");
  auto* kill = app.add_subcommand("kill", "Ask the worker to cancel the remote job");
  kill->add_option("key", opts.key)->required();
  auto* del = app.add_subcommand("delete", "Delete a job and its worker");
  del->add_option("key", opts.key)->required();
  auto* pipeline = app.add_subcommand("pipeline", "Create, wait for, and clean up a job");
  pipeline->add_option("file", opts.file)->required();
  for (auto* sub : {submit, status, kill, del, pipeline}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? cli_exit::kOk : cli_exit::kSchema;
  }
  opts.ns_given = ns_opt->count() > 0;

  try {
    Session session(opts, out, err);
    if (*submit) return session.submit();
    if (*status) return session.status();
    if (*kill) return session.kill();
    if (*del) return session.remove();
    if (*pipeline) return session.pipeline();
  } catch (const SchemaError& e) {
    err << "SchemaError: " << e.what() << "\n";
    return cli_exit::kSchema;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return cli_exit::kTransport;
  } catch (const json::exception& e) {
    err << "error: malformed response: " << e.what() << "\n";
    return cli_exit::kTransport;
  }
  return cli_exit::kSchema;
}

}  // namespace bridge
