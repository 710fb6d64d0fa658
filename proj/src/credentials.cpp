#include <fstream>
#include <sstream>

#include "bridge/adapter.hpp"
#include "bridge/errors.hpp"

namespace bridge {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void assign(CredentialSet& creds, const std::string& key, const std::string& value) {
  creds.extra[key] = value;
  if (key == "username" || key == "user") creds.username = value;
  if (key == "token" || key == "password") creds.token = value;
}

}  // namespace

const std::string& CredentialSet::require(const std::string& name) const {
  auto it = extra.find(name);
  if (it == extra.end() || it->second.empty()) {
    throw Error(Errc::AuthError, "credential key '" + name + "' is missing");
  }
  return it->second;
}

CredentialSet load_credentials(const fs::path& path) {
  CredentialSet creds;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      auto name = entry.path().filename().string();
      if (!entry.is_regular_file() || name.empty() || name.front() == '.') continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::stringstream buf;
      buf << in.rdbuf();
      assign(creds, name, trim(buf.str()));
    }
  } else if (fs::is_regular_file(path, ec)) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      assign(creds, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  } else {
    throw Error(Errc::AuthError, "credentials not readable at " + path.string());
  }
  if (creds.extra.empty()) throw Error(Errc::AuthError, "no credentials found at " + path.string());
  return creds;
}

}  // namespace bridge
