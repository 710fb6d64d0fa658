#include "bridge/url.hpp"

#include <cctype>
#include <charconv>

namespace bridge {

std::string Url::origin() const {
  return scheme + "://" + host + ":" + std::to_string(port);
}

namespace {

bool parse_port(std::string_view text, int& port) {
  if (text.empty()) return false;
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return false;
  if (value <= 0 || value > 65535) return false;
  port = value;
  return true;
}

}  // namespace

std::optional<Url> parse_url(std::string_view text) {
  Url url;
  auto sep = text.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  url.scheme = std::string(text.substr(0, sep));
  for (auto& c : url.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (url.scheme != "http" && url.scheme != "https") return std::nullopt;

  auto rest = text.substr(sep + 3);
  auto path_pos = rest.find_first_of("/?#");
  auto authority = rest.substr(0, path_pos);
  if (path_pos != std::string_view::npos) {
    url.path = std::string(rest.substr(path_pos));
  }
  if (url.path.empty() || url.path.front() != '/') url.path.insert(url.path.begin(), '/');

  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    url.userinfo = std::string(authority.substr(0, at));
    authority = authority.substr(at + 1);
  }
  url.port = url.secure() ? 443 : 80;
  if (!authority.empty() && authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    url.host = std::string(authority.substr(1, close - 1));
    auto tail = authority.substr(close + 1);
    if (!tail.empty()) {
      if (tail.front() != ':' || !parse_port(tail.substr(1), url.port)) return std::nullopt;
    }
  } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    url.host = std::string(authority.substr(0, colon));
    if (!parse_port(authority.substr(colon + 1), url.port)) return std::nullopt;
  } else {
    url.host = std::string(authority);
  }
  if (url.host.empty()) return std::nullopt;
  return url;
}

std::optional<Url> parse_endpoint(std::string_view text, bool secure) {
  if (text.find("://") != std::string_view::npos) return parse_url(text);
  std::string full = secure ? "https://" : "http://";
  full += text;
  return parse_url(full);
}

}  // namespace bridge
