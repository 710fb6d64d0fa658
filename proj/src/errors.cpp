#include "bridge/errors.hpp"

namespace bridge {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::SchemaError: return "SchemaError";
    case Errc::AlreadyExists: return "AlreadyExists";
    case Errc::NotFound: return "NotFound";
    case Errc::VersionConflict: return "VersionConflict";
    case Errc::InvalidState: return "InvalidState";
    case Errc::StoreError: return "StoreError";
    case Errc::StoreClosed: return "StoreClosed";
    case Errc::AuthError: return "AuthError";
    case Errc::Unreachable: return "Unreachable";
    case Errc::SubmitRejected: return "SubmitRejected";
    case Errc::NotFoundRemote: return "NotFoundRemote";
    case Errc::FileMissing: return "FileMissing";
    case Errc::Unsupported: return "Unsupported";
    case Errc::ObjectMissing: return "ObjectMissing";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::StorageUnreachable: return "StorageUnreachable";
    case Errc::StorageError: return "StorageError";
  }
  return "Unknown";
}

namespace {

std::string render(const std::vector<SchemaError::Issue>& issues) {
  std::string out = "invalid BridgeJob document:";
  for (const auto& issue : issues) {
    out += "\n  ";
    out += issue.field;
    out += ": ";
    out += issue.problem;
  }
  return out;
}

}  // namespace

SchemaError::SchemaError(std::vector<Issue> issues)
    : Error(Errc::SchemaError, render(issues)), issues_(std::move(issues)) {}

std::vector<std::string> SchemaError::fields() const {
  std::vector<std::string> out;
  out.reserve(issues_.size());
  for (const auto& issue : issues_) out.push_back(issue.field);
  return out;
}

}  // namespace bridge
