// Operator daemon: spool directory watcher, reconciler and admin API.

#include <signal.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "bridge/admin_api.hpp"
#include "bridge/log.hpp"
#include "bridge/operator.hpp"

int main(int argc, char** argv) {
  using namespace bridge;

  OperatorConfig config;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool process_mode = false;
  std::string worker_binary;

  CLI::App app{"BridgeJob operator", "bridge-operator"};
  app.add_option("--listen", host, "Admin API address");
  app.add_option("--port", port, "Admin API port (0 picks a free port)");
  app.add_option("--state-dir", config.store_root, "State store root");
  app.add_option("--specs-dir", config.spool_dir, "Spool directory watched for BridgeJob files");
  app.add_option("--secrets-dir", config.secrets_dir,
                 "Directory holding credential secrets named by resourcesecret/s3secret");
  app.add_option("--downloads-dir", config.downloads, "Where workers place downloaded outputs");
  app.add_flag("--process-workers", process_mode, "Run each worker as a separate process");
  app.add_option("--worker-binary", worker_binary, "bridge-worker executable for --process-workers");
  CLI11_PARSE(app, argc, argv);

  if (process_mode) {
    config.mode = LaunchMode::Process;
    if (worker_binary.empty()) {
      worker_binary = (std::filesystem::path(argv[0]).parent_path() / "bridge-worker").string();
    }
    config.worker_binary = worker_binary;
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SystemClock clock;
  Operator op(config, clock);
  op.start();
  AdminServer api(op);
  int bound = api.start(host, port);
  std::cout << "admin API listening on http://" << host << ":" << bound << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  log()->info("shutting down");
  api.stop();
  op.stop();
  return 0;
}
