#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <string_view>

namespace bridge {

using Duration = std::chrono::milliseconds;
using TimePoint = std::chrono::time_point<std::chrono::system_clock, Duration>;

std::string format_rfc3339(TimePoint t);
std::optional<TimePoint> parse_rfc3339(std::string_view text);
inline std::int64_t to_epoch_seconds(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::seconds>(t.time_since_epoch()).count();
}
inline TimePoint from_epoch_seconds(std::int64_t s) {
  return TimePoint(std::chrono::seconds(s));
}

/// Time source shared by workers, the operator and the mocks.
///
/// Sleepers must be accounted as participants through hold(): a participant
/// is a logical actor that is either running or sleeping on this clock.
/// The wall clock ignores holds; SimClock uses them to decide when simulated
/// time may jump forward.
class Clock {
 public:
  class Hold {
   public:
    Hold() = default;
    explicit Hold(Clock* clock) : clock_(clock) {}
    Hold(Hold&& other) noexcept : clock_(std::exchange(other.clock_, nullptr)) {}
    Hold& operator=(Hold&& other) noexcept {
      if (this != &other) {
        reset();
        clock_ = std::exchange(other.clock_, nullptr);
      }
      return *this;
    }
    Hold(const Hold&) = delete;
    Hold& operator=(const Hold&) = delete;
    ~Hold() { reset(); }

    void reset() {
      if (clock_ != nullptr) std::exchange(clock_, nullptr)->release();
    }
    explicit operator bool() const { return clock_ != nullptr; }

   private:
    Clock* clock_ = nullptr;
  };

  virtual ~Clock() = default;

  virtual TimePoint now() const = 0;

  /// Blocks until `deadline` or until `stop` is requested. Returns false when
  /// interrupted by the stop token.
  virtual bool sleep_until(TimePoint deadline, std::stop_token stop = {}) = 0;

  bool sleep_for(Duration d, std::stop_token stop = {}) {
    return sleep_until(now() + d, std::move(stop));
  }

  Hold hold() {
    acquire();
    return Hold(this);
  }

 protected:
  virtual void acquire() {}
  virtual void release() {}
};

class SystemClock final : public Clock {
 public:
  TimePoint now() const override;
  bool sleep_until(TimePoint deadline, std::stop_token stop = {}) override;

 private:
  std::mutex mutex_;
  std::condition_variable_any cv_;
};

/// Discrete-event clock. Time stands still while any participant is awake;
/// once every participant is asleep it jumps to the earliest deadline.
/// advance() moves time manually for tests that drive it directly.
class SimClock final : public Clock {
 public:
  explicit SimClock(TimePoint start = default_epoch());

  static TimePoint default_epoch();

  TimePoint now() const override;
  bool sleep_until(TimePoint deadline, std::stop_token stop = {}) override;

  void advance(Duration d);
  void advance_to(TimePoint t);

  int participants() const;
  int sleepers() const;

 protected:
  void acquire() override;
  void release() override;

 private:
  void maybe_jump_locked();

  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  TimePoint now_;
  int participants_ = 0;
  std::multiset<TimePoint> deadlines_;
};

}  // namespace bridge
