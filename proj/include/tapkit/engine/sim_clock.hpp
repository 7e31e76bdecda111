#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tapkit/common.hpp"

namespace tapkit::engine {

enum class ClockMode { kSimulated, kAccelerated, kRealtime };

std::string_view to_string(ClockMode mode);
ClockMode clock_mode_from_string(std::string_view text);

struct TimerInfo {
  std::uint64_t id = 0;
  SimTime due = 0;
  std::string owner;
  std::string purpose;
};

/// Virtual time plus a timer queue. Timers fire in due order, FIFO among
/// equal due times. The clock never reads the wall clock; the accelerated
/// and realtime modes are driven from outside.
class SimClock {
 public:
  using Callback = std::function<void()>;

  SimTime now() const { return now_; }
  ClockMode mode() const { return mode_; }
  double factor() const { return factor_; }
  void set_mode(ClockMode mode) { mode_ = mode; }
  void set_factor(double factor);

  std::uint64_t schedule(SimTime due, std::string owner, std::string purpose, Callback fire);
  bool cancel(std::uint64_t id);
  std::size_t cancel_owner(std::string_view owner);

  std::optional<SimTime> next_due() const;
  /// Pops and runs the earliest timer due at or before `limit`, moving now
  /// to its due time first. False when nothing is due.
  bool fire_next(SimTime limit);
  /// Moves now forward without firing anything. Throws TimeReversal.
  void set_now(SimTime t);

  std::vector<TimerInfo> pending() const;
  std::size_t size() const { return timers_.size(); }

 private:
  struct Timer {
    TimerInfo info;
    Callback fire;
  };
  using Key = std::pair<SimTime, std::uint64_t>;

  SimTime now_ = 0;
  ClockMode mode_ = ClockMode::kSimulated;
  double factor_ = 1.0;
  std::uint64_t next_id_ = 1;
  std::map<Key, Timer> timers_;
  std::map<std::uint64_t, Key> by_id_;
};

/// Next instant strictly after `now` whose time of day is `minutes`.
SimTime next_time_of_day(SimTime now, int minutes);

}  // namespace tapkit::engine
