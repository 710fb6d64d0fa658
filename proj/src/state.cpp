#include "bridge/state.hpp"

namespace bridge {

std::string_view to_string(BridgeState state) noexcept {
  switch (state) {
    case BridgeState::New: return "NEW";
    case BridgeState::Submitted: return "SUBMITTED";
    case BridgeState::Running: return "RUNNING";
    case BridgeState::Done: return "DONE";
    case BridgeState::Killed: return "KILLED";
    case BridgeState::Failed: return "FAILED";
    case BridgeState::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::optional<BridgeState> parse_state(std::string_view name) noexcept {
  for (auto s : kAllStates) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool validate_transition(BridgeState from, BridgeState to) noexcept {
  using S = BridgeState;
  switch (from) {
    case S::New:
      return to == S::Submitted || to == S::Failed;
    case S::Submitted:
      return to == S::Running || to == S::Done || to == S::Killed ||
             to == S::Failed || to == S::Unknown;
    case S::Running:
      return to == S::Done || to == S::Killed || to == S::Failed ||
             to == S::Unknown;
    case S::Unknown:
      return to == S::Running || to == S::Done || to == S::Killed ||
             to == S::Failed;
    case S::Done:
    case S::Killed:
    case S::Failed:
      return false;
  }
  return false;
}

JobKey parse_key(std::string_view text, std::string_view default_ns) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
  }
  return {std::string(default_ns), std::string(text)};
}

}  // namespace bridge
