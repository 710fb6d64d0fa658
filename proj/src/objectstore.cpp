#include "bridge/objectstore.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <cstdio>

#include "bridge/errors.hpp"

namespace bridge {

namespace {

std::string to_hex(const unsigned char* data, std::size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (std::size_t i = 0; i < len; ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0x0f];
  }
  return out;
}

std::string digest_hex(const EVP_MD* md, std::string_view data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out, &len, md, nullptr);
  return to_hex(out, len);
}

std::string date_stamp(TimePoint t) { return amz_date(t).substr(0, 8); }

}  // namespace

StorageCredentials storage_credentials(const CredentialSet& credentials) {
  return {credentials.require("accessKey"), credentials.require("secretKey")};
}

std::string sha256_hex(std::string_view data) { return digest_hex(EVP_sha256(), data); }
std::string md5_hex(std::string_view data) { return digest_hex(EVP_md5(), data); }

std::string hmac_sha256(std::string_view key, std::string_view data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       reinterpret_cast<const unsigned char*>(data.data()), data.size(), out, &len);
  return std::string(reinterpret_cast<const char*>(out), len);
}

std::string amz_date(TimePoint t) {
  std::time_t secs = to_epoch_seconds(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[20];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string sigv4_authorization(const SigningInput& input, const StorageCredentials& credentials,
                                TimePoint at) {
  std::string canonical_headers;
  std::string signed_headers;
  for (const auto& [name, value] : input.headers) {
    auto b = value.find_first_not_of(' ');
    auto e = value.find_last_not_of(' ');
    canonical_headers += name + ":" + (b == std::string::npos ? "" : value.substr(b, e - b + 1)) + "\n";
    if (!signed_headers.empty()) signed_headers += ';';
    signed_headers += name;
  }
  std::string canonical_request = input.method + "\n" + input.canonical_uri + "\n" +
                                  input.canonical_query + "\n" + canonical_headers + "\n" +
                                  signed_headers + "\n" + input.payload_hash;
  auto date = date_stamp(at);
  auto scope = date + "/" + input.region + "/" + input.service + "/aws4_request";
  auto string_to_sign =
      "AWS4-HMAC-SHA256\n" + amz_date(at) + "\n" + scope + "\n" + sha256_hex(canonical_request);

  auto k_date = hmac_sha256("AWS4" + credentials.secret_key, date);
  auto k_region = hmac_sha256(k_date, input.region);
  auto k_service = hmac_sha256(k_region, input.service);
  auto k_signing = hmac_sha256(k_service, "aws4_request");
  auto raw = hmac_sha256(k_signing, string_to_sign);
  auto signature = to_hex(reinterpret_cast<const unsigned char*>(raw.data()), raw.size());

  return "AWS4-HMAC-SHA256 Credential=" + credentials.access_key + "/" + scope +
         ", SignedHeaders=" + signed_headers + ", Signature=" + signature;
}

ObjectStoreClient::ObjectStoreClient(Url endpoint, StorageCredentials credentials,
                                     const Clock& clock, std::chrono::milliseconds timeout)
    : endpoint_(endpoint), credentials_(std::move(credentials)), clock_(clock),
      http_(std::move(endpoint), timeout) {}

HttpResponse ObjectStoreClient::signed_request(const std::string& method, const std::string& uri,
                                               std::string_view body) const {
  ++requests_;
  auto now = clock_.now();
  bool default_port = (endpoint_.secure() && endpoint_.port == 443) ||
                      (!endpoint_.secure() && endpoint_.port == 80);
  std::string host = default_port ? endpoint_.host : endpoint_.host + ":" + std::to_string(endpoint_.port);

  SigningInput input;
  input.method = method;
  input.canonical_uri = uri;
  input.payload_hash = sha256_hex(body);
  input.headers = {{"host", host}, {"x-amz-content-sha256", input.payload_hash}, {"x-amz-date", amz_date(now)}};

  HttpRequest req;
  req.method = method;
  req.target = uri;
  req.body = std::string(body);
  req.content_type = "application/octet-stream";
  for (const auto& [k, v] : input.headers) req.headers.emplace_back(k, v);
  req.headers.emplace_back("Authorization", sigv4_authorization(input, credentials_, now));
  try {
    return http_.send(req);
  } catch (const Error& e) {
    throw Error(Errc::StorageUnreachable, e.what());
  }
}

std::string ObjectStoreClient::get_object(const ObjectRef& ref) const {
  auto res = signed_request("GET", "/" + percent_encode(ref.bucket, false) + "/" + percent_encode(ref.key, true), {});
  if (res.status == 200) return std::move(res.body);
  if (res.status == 404) throw Error(Errc::ObjectMissing, "object " + ref.str() + " does not exist");
  if (res.status >= 500) throw Error(Errc::StorageUnreachable, "storage returned HTTP " + std::to_string(res.status));
  throw Error(Errc::StorageError, "GET " + ref.str() + " returned HTTP " + std::to_string(res.status));
}

void ObjectStoreClient::put_object(const ObjectRef& ref, std::string_view content) const {
  auto res = signed_request("PUT", "/" + percent_encode(ref.bucket, false) + "/" + percent_encode(ref.key, true), content);
  if (res.status == 200 || res.status == 201) return;
  if (res.status == 404) throw Error(Errc::ObjectMissing, "bucket " + ref.bucket + " does not exist");
  if (res.status >= 500) throw Error(Errc::StorageUnreachable, "storage returned HTTP " + std::to_string(res.status));
  throw Error(Errc::StorageError, "PUT " + ref.str() + " returned HTTP " + std::to_string(res.status));
}

void ObjectStoreClient::ensure_bucket(const std::string& bucket) const {
  auto res = signed_request("PUT", "/" + percent_encode(bucket, false), {});
  if (res.status == 200 || res.status == 201 || res.status == 409) return;
  if (res.status >= 500) throw Error(Errc::StorageUnreachable, "storage returned HTTP " + std::to_string(res.status));
  throw Error(Errc::StorageError, "PUT bucket " + bucket + " returned HTTP " + std::to_string(res.status));
}

}  // namespace bridge
