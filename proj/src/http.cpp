#include "bridge/http.hpp"

#include <cctype>
#include <cstdio>

#include "bridge/errors.hpp"
#include "internal/http_server.hpp"

namespace bridge {

std::string HttpResponse::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return v;
    }
  }
  return {};
}

namespace {

httplib::Client make_client(const Url& base, std::chrono::milliseconds timeout) {
  httplib::Client client(base.origin());
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_keep_alive(false);
  client.set_url_encode(false);
  client.enable_server_certificate_verification(true);
  return client;
}

std::string describe(httplib::Error error) {
  return httplib::to_string(error);
}

std::string with_prefix(const Url& base, const std::string& target) {
  std::string prefix = base.path;
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return prefix + target;
}

}  // namespace

HttpClient::HttpClient(Url base, std::chrono::milliseconds timeout)
    : base_(std::move(base)), timeout_(timeout) {}

HttpResponse HttpClient::send(const HttpRequest& request) const {
  auto client = make_client(base_, timeout_);
  httplib::Request req;
  req.method = request.method;
  req.path = with_prefix(base_, request.target);
  for (const auto& [k, v] : request.headers) req.headers.emplace(k, v);
  if (!request.body.empty() || request.method == "POST" || request.method == "PUT") {
    req.body = request.body;
    if (!request.content_type.empty()) req.set_header("Content-Type", request.content_type);
  }
  auto result = client.send(req);
  if (!result) {
    throw Error(Errc::Unreachable, request.method + " " + base_.origin() + " failed: " +
                                       describe(result.error()));
  }
  HttpResponse response;
  response.status = result->status;
  response.body = std::move(result->body);
  for (const auto& [k, v] : result->headers) response.headers.emplace_back(k, v);
  return response;
}

int HttpClient::stream(const std::string& target,
                       const std::function<bool(std::string_view)>& on_chunk) const {
  auto client = make_client(base_, timeout_);
  int status = 0;
  auto result = client.Get(
      with_prefix(base_, target),
      [&](const httplib::Response& res) {
        status = res.status;
        return true;
      },
      [&](const char* data, std::size_t len) { return on_chunk(std::string_view(data, len)); });
  if (!result && result.error() != httplib::Error::Canceled) {
    throw Error(Errc::Unreachable, "GET " + base_.origin() + " failed: " + describe(result.error()));
  }
  return status;
}

std::string percent_encode(std::string_view text, bool keep_slash) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || (keep_slash && c == '/')) {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

std::string percent_decode(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '%' && i + 2 < text.size() && std::isxdigit(static_cast<unsigned char>(text[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(text[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(text.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

HttpServerHost::HttpServerHost() : impl_(std::make_unique<Impl>()) {}

HttpServerHost::~HttpServerHost() { stop(); }

int HttpServerHost::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port <= 0) throw Error(Errc::Unreachable, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void HttpServerHost::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int HttpServerHost::port() const { return impl_->port; }

std::string HttpServerHost::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

}  // namespace bridge
