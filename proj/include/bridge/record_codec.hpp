#pragma once

#include "bridge/jobspec.hpp"
#include "bridge/statestore.hpp"

namespace bridge {

/// Execution parameters a worker needs, flattened into record fields. Lists
/// and maps are stored as JSON text.
RecordData spec_to_record(const BridgeJobSpec& spec);

/// Rebuilds the spec from a record written by spec_to_record. Throws
/// SchemaError when the record is missing execution parameters.
BridgeJobSpec spec_from_record(const JobKey& key, const RecordData& data);

}  // namespace bridge
