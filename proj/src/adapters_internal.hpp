#pragma once

#include <memory>

#include "bridge/adapter.hpp"

namespace bridge {

std::unique_ptr<ResourceAdapter> make_slurm_adapter(const Url& base, std::chrono::milliseconds timeout);
std::unique_ptr<ResourceAdapter> make_lsf_adapter(const Url& base, std::chrono::milliseconds timeout);

/// Body of a wrapper script that runs a script already present remotely.
std::string remote_wrapper(const std::string& path);

}  // namespace bridge
