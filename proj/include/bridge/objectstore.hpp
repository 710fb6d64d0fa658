#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <string>
#include <string_view>

#include "bridge/adapter.hpp"
#include "bridge/clock.hpp"
#include "bridge/http.hpp"
#include "bridge/objectref.hpp"
#include "bridge/url.hpp"

namespace bridge {

struct StorageCredentials {
  std::string access_key;
  std::string secret_key;
};

/// Picks accessKey/secretKey out of a loaded credential set.
StorageCredentials storage_credentials(const CredentialSet& credentials);

std::string sha256_hex(std::string_view data);
std::string md5_hex(std::string_view data);
std::string hmac_sha256(std::string_view key, std::string_view data);

/// Inputs of an AWS Signature Version 4 header signature.
struct SigningInput {
  std::string method;
  std::string canonical_uri;    // already URI-encoded
  std::string canonical_query;  // already canonicalized, may be empty
  std::map<std::string, std::string> headers;  // lower-case names
  std::string payload_hash;
  std::string region = "us-east-1";
  std::string service = "s3";
};

/// `Authorization` header value for `input` signed at time `at`. The headers
/// map must already contain `x-amz-date` matching `at`.
std::string sigv4_authorization(const SigningInput& input, const StorageCredentials& credentials,
                                TimePoint at);
std::string amz_date(TimePoint t);

/// Minimal S3-compatible client: path-style PUT/GET object and PUT bucket.
class ObjectStoreClient {
 public:
  ObjectStoreClient(Url endpoint, StorageCredentials credentials, const Clock& clock,
                    std::chrono::milliseconds timeout = kHttpTimeout);

  /// Errors: ObjectMissing, StorageUnreachable, StorageError.
  std::string get_object(const ObjectRef& ref) const;
  /// Errors: ObjectMissing (no such bucket), StorageUnreachable, StorageError.
  void put_object(const ObjectRef& ref, std::string_view content) const;
  /// Creates the bucket; an already existing bucket is not an error.
  void ensure_bucket(const std::string& bucket) const;

  std::size_t request_count() const { return requests_.load(); }
  const Url& endpoint() const { return endpoint_; }

 private:
  HttpResponse signed_request(const std::string& method, const std::string& uri,
                              std::string_view body) const;

  Url endpoint_;
  StorageCredentials credentials_;
  const Clock& clock_;
  HttpClient http_;
  mutable std::atomic<std::size_t> requests_{0};
};

}  // namespace bridge
