#pragma once

#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include "bridge/adapter.hpp"
#include "bridge/clock.hpp"
#include "bridge/jobspec.hpp"
#include "bridge/objectstore.hpp"

namespace bridge {

/// Resolves the job script from its declared location. `storage` may be null
/// unless the script lives in object storage; inline and remote scripts make
/// no storage calls. Errors: ObjectMissing, DigestMismatch,
/// StorageUnreachable.
JobScript resolve_script(const BridgeJobSpec& spec, const ObjectStoreClient* storage);

/// Inserts `export KEY='value'` lines after the shebang (or at the top).
std::string apply_job_params(const std::string& script,
                             const std::map<std::string, std::string>& params);

/// Where an additional input object lands on the remote resource: the job's
/// currentWorkingDir property joined with the object's base name.
std::string remote_input_path(const BridgeJobSpec& spec, const ObjectRef& ref);

/// Copies every `additionaldata` object to the remote resource through the
/// adapter and returns the delivered paths. Errors: ObjectMissing,
/// StorageUnreachable, Unsupported (only when there is something to stage).
std::vector<std::string> stage_inputs(const BridgeJobSpec& spec, const ObjectStoreClient* storage,
                                      const ResourceAdapter& adapter, const Session& session);

struct RetryPolicy {
  int retries = 3;
  Duration base_delay{1000};
};

struct UploadResult {
  std::vector<std::string> keys;
  std::vector<std::string> errors;
};

/// Uploads (name, content) pairs into `bucket`, creating it if needed.
/// StorageUnreachable is retried `policy.retries` times with doubling delays;
/// failures are collected per file rather than thrown.
UploadResult upload_outputs(const ObjectStoreClient& storage, const std::string& bucket,
                            const std::vector<std::pair<std::string, std::string>>& files,
                            Clock& clock, std::stop_token stop = {}, RetryPolicy policy = {});

/// Object key used for an uploaded output file path.
std::string output_object_key(const std::string& remote_path);

}  // namespace bridge
