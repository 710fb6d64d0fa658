#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bridge {

enum class Errc {
  SchemaError,
  AlreadyExists,
  NotFound,
  VersionConflict,
  InvalidState,
  StoreError,
  StoreClosed,
  AuthError,
  Unreachable,
  SubmitRejected,
  NotFoundRemote,
  FileMissing,
  Unsupported,
  ObjectMissing,
  DigestMismatch,
  StorageUnreachable,
  StorageError,
};

std::string_view to_string(Errc code) noexcept;

/// Base of every error raised by the bridge libraries. Messages never carry
/// credential material.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Aggregated document validation failure; `fields()` lists every offending
/// field path, `issues()` the matching human-readable problems.
class SchemaError : public Error {
 public:
  struct Issue {
    std::string field;
    std::string problem;
  };

  explicit SchemaError(std::vector<Issue> issues);

  const std::vector<Issue>& issues() const noexcept { return issues_; }
  std::vector<std::string> fields() const;

 private:
  std::vector<Issue> issues_;
};

}  // namespace bridge
