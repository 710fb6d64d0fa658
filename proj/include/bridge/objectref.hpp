#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace bridge {

/// `<bucket>:<key>` reference to an object in S3-compatible storage. The
/// first ':' separates bucket from key; both parts are non-empty.
struct ObjectRef {
  std::string bucket;
  std::string key;

  std::string str() const { return bucket + ":" + key; }
  bool operator==(const ObjectRef&) const = default;
};

std::optional<ObjectRef> parse_object_ref(std::string_view text) noexcept;

}  // namespace bridge
