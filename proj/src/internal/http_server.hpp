#pragma once

#include <httplib.h>

#include <thread>

#include "bridge/http.hpp"

namespace bridge {

struct HttpServerHost::Impl {
  httplib::Server server;
  std::thread thread;
  std::string host;
  int port = 0;
};

}  // namespace bridge
