#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace bridge {

/// Absolute http/https URL split into the parts the HTTP clients need.
struct Url {
  std::string scheme;
  std::string userinfo;
  std::string host;
  int port = 0;
  std::string path;  // always begins with '/'

  bool secure() const { return scheme == "https"; }
  /// scheme://host:port without userinfo or path.
  std::string origin() const;
};

std::optional<Url> parse_url(std::string_view text);

/// Accepts "host", "host:port", or a full URL; the scheme is chosen by
/// `secure` when none is given.
std::optional<Url> parse_endpoint(std::string_view text, bool secure);

}  // namespace bridge
