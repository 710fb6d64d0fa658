#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "bridge/clock.hpp"
#include "bridge/http.hpp"
#include "bridge/jobspec.hpp"
#include "bridge/state.hpp"

namespace bridge {

/// Username/secret pair read from a mounted credential location. The secret
/// fields must never be logged or copied into error messages.
struct CredentialSet {
  std::string username;
  std::string token;
  std::map<std::string, std::string> extra;

  /// extra[name], or throws Error(AuthError) naming the missing key.
  const std::string& require(const std::string& name) const;
};

/// Reads credentials from `path`: either a file of `key=value` lines or a
/// directory holding one file per key (the layout of a mounted secret).
/// `username`/`user` and `token`/`password` fill the primary fields; every
/// key is kept in `extra`.
CredentialSet load_credentials(const std::filesystem::path& path);

/// Authenticated session with a resource manager.
struct Session {
  std::string username;
  std::string token;
};

struct RemoteJobInfo {
  std::string remote_id;
  std::string remote_state;
  std::string name;
  std::optional<TimePoint> start_time;
  std::optional<TimePoint> end_time;
  std::string raw;
};

/// Script handed to the manager: either an inline body or a path that
/// already exists on the remote resource.
struct JobScript {
  enum class Kind { Body, RemotePath };
  Kind kind = Kind::Body;
  std::string text;

  static JobScript body(std::string text) { return {Kind::Body, std::move(text)}; }
  static JobScript remote_path(std::string path) { return {Kind::RemotePath, std::move(path)}; }
  bool operator==(const JobScript&) const = default;
};

struct SubmitRequest {
  JobScript script;
  std::map<std::string, std::string> properties;
  /// Environment passed through the payload (jobparams for remote scripts).
  std::map<std::string, std::string> environment;
  std::string client_name;
};

/// Contract implemented once per external resource manager. Implementations
/// are immutable after construction; each call is one HTTP exchange and none
/// of them touch worker or store state.
class ResourceAdapter {
 public:
  virtual ~ResourceAdapter() = default;

  virtual AdapterKind kind() const = 0;

  /// Errors: AuthError, Unreachable.
  virtual Session get_token(const CredentialSet& credentials) const = 0;
  /// Errors: SubmitRejected, AuthError, Unreachable.
  virtual std::string submit(const Session& session, const SubmitRequest& request) const = 0;
  /// Remote id of a job previously submitted under `client_name`, if any.
  virtual std::optional<std::string> find_by_name(const Session& session,
                                                  const std::string& client_name) const = 0;
  /// Errors: NotFoundRemote, AuthError, Unreachable.
  virtual RemoteJobInfo get_job_info(const Session& session, const std::string& remote_id) const = 0;
  /// Idempotent on terminal jobs. Errors: NotFoundRemote, Unreachable.
  virtual void kill(const Session& session, const std::string& remote_id) const = 0;
  /// Errors: FileMissing, Unsupported, Unreachable.
  virtual std::string fetch_output(const Session& session, const std::string& remote_id,
                                   const std::string& remote_path) const = 0;
  /// Places `content` at `remote_path` on the resource. Errors: Unsupported,
  /// Unreachable.
  virtual std::string upload_input(const Session& session, const std::string& remote_path,
                                   std::string_view content) const = 0;
};

BridgeState map_remote_state(AdapterKind kind, std::string_view remote_state) noexcept;

std::unique_ptr<ResourceAdapter> make_adapter(AdapterKind kind, const Url& resource_url,
                                              std::chrono::milliseconds timeout = kHttpTimeout);

}  // namespace bridge
