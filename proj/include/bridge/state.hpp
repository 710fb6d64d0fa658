#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace bridge {

/// Job lifecycle as recorded in the state store.
enum class BridgeState {
  New,
  Submitted,
  Running,
  Done,
  Killed,
  Failed,
  Unknown,
};

inline constexpr std::array<BridgeState, 7> kAllStates = {
    BridgeState::New,    BridgeState::Submitted, BridgeState::Running,
    BridgeState::Done,   BridgeState::Killed,    BridgeState::Failed,
    BridgeState::Unknown};

std::string_view to_string(BridgeState state) noexcept;
std::optional<BridgeState> parse_state(std::string_view name) noexcept;

constexpr bool is_terminal(BridgeState state) noexcept {
  return state == BridgeState::Done || state == BridgeState::Killed ||
         state == BridgeState::Failed;
}

/// True iff `from -> to` is an edge of the lifecycle graph. Self-loops are
/// not transitions and return false.
bool validate_transition(BridgeState from, BridgeState to) noexcept;

/// (namespace, name) identity of a job.
struct JobKey {
  std::string ns;
  std::string name;

  std::string str() const { return ns + "/" + name; }
  auto operator<=>(const JobKey&) const = default;
};

/// Parses "ns/name"; a bare "name" takes `default_ns`.
JobKey parse_key(std::string_view text, std::string_view default_ns);

}  // namespace bridge
