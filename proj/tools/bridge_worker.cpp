// Per-job worker process. The operator starts one per BridgeJob with
// NAMESPACE and JOBNAME set; SIGTERM stops it between polls.

#include <signal.h>

#include <cstdlib>
#include <iostream>
#include <thread>

#include "bridge/errors.hpp"
#include "bridge/log.hpp"
#include "bridge/worker.hpp"

int main() {
  using namespace bridge;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGINT);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::stop_source stop;
  std::thread([&stop, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    stop.request_stop();
  }).detach();

  WorkerEnvironment env;
  try {
    env = WorkerEnvironment::from_env();
  } catch (const Error& e) {
    std::cerr << "bridge-worker: " << e.what() << "\n";
    return exit_code::kFatal;
  }

  WorkerOptions options;
  options.stop = stop.get_token();
  if (const char* point = std::getenv("BRIDGE_CRASH_POINT")) {
    if (auto planned = parse_crash_point(point)) {
      options.crash_hook = [planned](CrashPoint p) {
        if (p == *planned) {
          log()->warn("injected crash at {}", to_string(p));
          log()->flush();
          ::raise(SIGKILL);
        }
      };
    }
  }

  try {
    StateStore store(env.store_root);
    SystemClock clock;
    Worker worker(store, clock, env, std::move(options));
    return worker.run();
  } catch (const std::exception& e) {
    log()->error("{}: {}", env.key.str(), e.what());
    return exit_code::kFatal;
  }
}
