#include "bridge/adapter.hpp"

#include "adapters_internal.hpp"

namespace bridge {

BridgeState map_remote_state(AdapterKind kind, std::string_view s) noexcept {
  using S = BridgeState;
  if (kind == AdapterKind::Slurm) {
    if (s == "PENDING") return S::Submitted;
    if (s == "RUNNING" || s == "COMPLETING") return S::Running;
    if (s == "COMPLETED") return S::Done;
    if (s == "CANCELLED") return S::Killed;
    if (s == "FAILED" || s == "TIMEOUT" || s == "NODE_FAIL" || s == "OUT_OF_MEMORY") return S::Failed;
    return S::Unknown;
  }
  if (s == "PEND") return S::Submitted;
  if (s == "RUN" || s == "USUSP" || s == "PSUSP") return S::Running;
  if (s == "DONE") return S::Done;
  if (s == "EXIT") return S::Failed;
  return S::Unknown;
}

std::unique_ptr<ResourceAdapter> make_adapter(AdapterKind kind, const Url& resource_url,
                                              std::chrono::milliseconds timeout) {
  if (kind == AdapterKind::Slurm) return make_slurm_adapter(resource_url, timeout);
  return make_lsf_adapter(resource_url, timeout);
}

}  // namespace bridge
