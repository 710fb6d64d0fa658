#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bridge/url.hpp"

namespace bridge {

inline constexpr std::chrono::seconds kHttpTimeout{5};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

struct HttpRequest {
  std::string method = "GET";
  std::string target = "/";  // path plus optional query
  HeaderList headers;
  std::string body;
  std::string content_type;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  HeaderList headers;

  std::string header(std::string_view name) const;
};

/// Blocking HTTP/1.1 client bound to one origin. Transport failures (refused,
/// reset, timeout) raise Error(Unreachable); HTTP error statuses are returned.
class HttpClient {
 public:
  explicit HttpClient(Url base, std::chrono::milliseconds timeout = kHttpTimeout);

  HttpResponse send(const HttpRequest& request) const;

  /// Streams a response body through `on_chunk`; returns false from the
  /// callback to stop.
  int stream(const std::string& target,
             const std::function<bool(std::string_view)>& on_chunk) const;

  const Url& base() const { return base_; }

 private:
  Url base_;
  std::chrono::milliseconds timeout_;
};

std::string percent_encode(std::string_view text, bool keep_slash);
std::string percent_decode(std::string_view text);

/// Runs an HTTP server on a background thread bound to 127.0.0.1.
class HttpServerHost {
 public:
  struct Impl;

  HttpServerHost();
  ~HttpServerHost();
  HttpServerHost(const HttpServerHost&) = delete;
  HttpServerHost& operator=(const HttpServerHost&) = delete;

  /// Binds (port 0 picks a free one), starts serving, returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  int port() const;
  std::string base_url() const;

  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace bridge
