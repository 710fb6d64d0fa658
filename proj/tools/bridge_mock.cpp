// Standalone mock resource manager or object store for demos.

#include <signal.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bridge/mock.hpp"

int main(int argc, char** argv) {
  using namespace bridge;
  using namespace bridge::mock;

  std::string kind;
  int port = 0;
  std::string fault_plan;
  double pending = 1.0;
  double running = 2.0;
  std::string final_state = "COMPLETED";
  std::vector<std::string> users;
  std::vector<std::string> access_keys;
  std::vector<std::string> buckets;

  CLI::App app{"Mock resource manager / object store", "bridge-mock"};
  app.add_option("kind", kind, "slurm, lsf or s3")->required()->check(CLI::IsMember({"slurm", "lsf", "s3"}));
  app.add_option("--port", port, "Listen port (0 picks a free port)");
  app.add_option("--fault-plan", fault_plan, "Fault plan JSON, inline or @file");
  app.add_option("--pending", pending, "Seconds a job stays pending");
  app.add_option("--running", running, "Seconds a job runs");
  app.add_option("--final-state", final_state, "COMPLETED or FAILED")->check(CLI::IsMember({"COMPLETED", "FAILED"}));
  app.add_option("--user", users, "user=secret accepted by the manager (repeatable)");
  app.add_option("--access-key", access_keys, "Access key accepted by the object store (repeatable)");
  app.add_option("--bucket", buckets, "Bucket created at startup (repeatable)");
  CLI11_PARSE(app, argc, argv);

  FaultPlan plan;
  if (!fault_plan.empty()) {
    std::string text = fault_plan;
    if (text.front() == '@') {
      std::ifstream in(text.substr(1));
      std::stringstream buffer;
      buffer << in.rdbuf();
      text = buffer.str();
    }
    try {
      plan = parse_fault_plan(nlohmann::json::parse(text));
    } catch (const std::exception& e) {
      std::cerr << "bridge-mock: invalid fault plan: " << e.what() << "\n";
      return 2;
    }
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SystemClock clock;
  std::unique_ptr<ResourceManager> manager;
  std::unique_ptr<ResourceManagerServer> manager_server;
  std::unique_ptr<ObjectStore> store;
  std::unique_ptr<ObjectStoreServer> store_server;
  int bound = 0;

  if (kind == "s3") {
    std::map<std::string, std::string> keys;
    for (const auto& k : access_keys) keys[k] = "";
    store = std::make_unique<ObjectStore>(clock, keys);
    for (const auto& b : buckets) store->create_bucket(b);
    store->set_fault_plan(plan);
    store_server = std::make_unique<ObjectStoreServer>(*store);
    bound = store_server->start(port);
  } else {
    ManagerConfig config;
    for (const auto& u : users) {
      auto eq = u.find('=');
      if (eq == std::string::npos) {
        std::cerr << "bridge-mock: --user expects user=secret\n";
        return 2;
      }
      config.users[u.substr(0, eq)] = u.substr(eq + 1);
    }
    config.timeline.pending = Duration(static_cast<std::int64_t>(pending * 1000));
    config.timeline.running = Duration(static_cast<std::int64_t>(running * 1000));
    config.timeline.final_state = final_state == "FAILED" ? Phase::Failed : Phase::Completed;
    manager = std::make_unique<ResourceManager>(kind == "slurm" ? Flavor::Slurm : Flavor::Lsf, clock, config);
    manager->set_fault_plan(plan);
    manager_server = std::make_unique<ResourceManagerServer>(*manager);
    bound = manager_server->start(port);
  }
  std::cout << kind << " mock listening on http://127.0.0.1:" << bound << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  if (manager_server) manager_server->stop();
  if (store_server) store_server->stop();
  return 0;
}
