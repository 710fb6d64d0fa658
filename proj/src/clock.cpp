#include "bridge/clock.hpp"

#include <cstdio>
#include <ctime>

namespace bridge {

std::string format_rfc3339(TimePoint t) {
  std::time_t secs = to_epoch_seconds(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<TimePoint> parse_rfc3339(std::string_view text) {
  std::tm tm{};
  int consumed = 0;
  std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                  &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 6 ||
      consumed != static_cast<int>(s.size())) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return from_epoch_seconds(timegm(&tm));
}

TimePoint SystemClock::now() const {
  return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
}

bool SystemClock::sleep_until(TimePoint deadline, std::stop_token stop) {
  std::unique_lock lock(mutex_);
  cv_.wait_until(lock, stop, deadline, [] { return false; });
  return !stop.stop_requested();
}

SimClock::SimClock(TimePoint start) : now_(start) {}

TimePoint SimClock::default_epoch() {
  // 2025-01-01T00:00:00Z
  return from_epoch_seconds(1735689600);
}

TimePoint SimClock::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

int SimClock::participants() const {
  std::lock_guard lock(mutex_);
  return participants_;
}

int SimClock::sleepers() const {
  std::lock_guard lock(mutex_);
  return static_cast<int>(deadlines_.size());
}

void SimClock::maybe_jump_locked() {
  if (deadlines_.empty()) return;
  if (static_cast<int>(deadlines_.size()) < participants_) return;
  auto earliest = *deadlines_.begin();
  if (earliest > now_) now_ = earliest;
  cv_.notify_all();
}

bool SimClock::sleep_until(TimePoint deadline, std::stop_token stop) {
  std::unique_lock lock(mutex_);
  if (now_ >= deadline) return !stop.stop_requested();
  auto it = deadlines_.insert(deadline);
  maybe_jump_locked();
  cv_.wait(lock, stop, [&] { return now_ >= deadline; });
  deadlines_.erase(it);
  return !stop.stop_requested();
}

void SimClock::advance(Duration d) {
  std::lock_guard lock(mutex_);
  now_ += d;
  cv_.notify_all();
}

void SimClock::advance_to(TimePoint t) {
  std::lock_guard lock(mutex_);
  if (t > now_) now_ = t;
  cv_.notify_all();
}

void SimClock::acquire() {
  std::lock_guard lock(mutex_);
  ++participants_;
}

void SimClock::release() {
  std::lock_guard lock(mutex_);
  --participants_;
  maybe_jump_locked();
}

}  // namespace bridge
