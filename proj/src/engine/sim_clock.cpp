#include "tapkit/engine/sim_clock.hpp"

namespace tapkit::engine {

std::string_view to_string(ClockMode mode) {
  switch (mode) {
    case ClockMode::kSimulated: return "simulated";
    case ClockMode::kAccelerated: return "accelerated";
    case ClockMode::kRealtime: return "realtime";
  }
  return "simulated";
}

ClockMode clock_mode_from_string(std::string_view text) {
  if (text == "simulated") return ClockMode::kSimulated;
  if (text == "accelerated") return ClockMode::kAccelerated;
  if (text == "realtime") return ClockMode::kRealtime;
  throw Error(ErrorCode::kWrongClockMode, "unknown clock mode '" + std::string(text) + "'");
}

void SimClock::set_factor(double factor) {
  if (!(factor > 0)) throw Error(ErrorCode::kWrongClockMode, "clock factor must be positive");
  factor_ = factor;
}

std::uint64_t SimClock::schedule(SimTime due, std::string owner, std::string purpose, Callback fire) {
  if (due < now_) {
    throw Error(ErrorCode::kTimeReversal, "timer due at " + std::to_string(due) + " is before now " +
                                              std::to_string(now_));
  }
  const auto id = next_id_++;
  const Key key{due, id};
  timers_.emplace(key, Timer{TimerInfo{id, due, std::move(owner), std::move(purpose)}, std::move(fire)});
  by_id_.emplace(id, key);
  return id;
}

bool SimClock::cancel(std::uint64_t id) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return false;
  timers_.erase(it->second);
  by_id_.erase(it);
  return true;
}

std::size_t SimClock::cancel_owner(std::string_view owner) {
  std::size_t n = 0;
  for (auto it = timers_.begin(); it != timers_.end();) {
    if (it->second.info.owner == owner) {
      by_id_.erase(it->second.info.id);
      it = timers_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::optional<SimTime> SimClock::next_due() const {
  if (timers_.empty()) return std::nullopt;
  return timers_.begin()->first.first;
}

bool SimClock::fire_next(SimTime limit) {
  if (timers_.empty() || timers_.begin()->first.first > limit) return false;
  auto node = timers_.extract(timers_.begin());
  by_id_.erase(node.mapped().info.id);
  now_ = node.key().first;
  node.mapped().fire();
  return true;
}

void SimClock::set_now(SimTime t) {
  if (t < now_) {
    throw Error(ErrorCode::kTimeReversal, "cannot move the clock from " + std::to_string(now_) + " back to " +
                                              std::to_string(t));
  }
  now_ = t;
}

std::vector<TimerInfo> SimClock::pending() const {
  std::vector<TimerInfo> out;
  out.reserve(timers_.size());
  for (const auto& [_, t] : timers_) out.push_back(t.info);
  return out;
}

SimTime next_time_of_day(SimTime now, int minutes) {
  const SimTime offset = static_cast<SimTime>(minutes) * 60000;
  if (now < offset) return offset;
  return offset + ((now - offset) / kMillisPerDay + 1) * kMillisPerDay;
}

}  // namespace tapkit::engine
