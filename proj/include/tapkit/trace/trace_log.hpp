#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tapkit/common.hpp"

namespace tapkit::trace {

enum class Category {
  kDeviceEvent,
  kStateChange,
  kAction,
  kDegradedSkip,
  kRuleFired,
  kProgramLifecycle,
  kRegistryChange,
  kDenial,
};

std::string_view to_string(Category category);
Category category_from_string(std::string_view text);
const std::vector<Category>& all_categories();

/// Provenance strings carried in TraceEntry::cause.
namespace cause {
inline constexpr std::string_view kDashboard = "dashboard";
inline constexpr std::string_view kScenario = "scenario";
inline constexpr std::string_view kSystem = "system";
std::string program(std::string_view program_id);
}  // namespace cause

struct TraceEntry {
  std::uint64_t seq = 0;
  SimTime at = 0;
  Category category = Category::kDeviceEvent;
  std::string subject;
  nlohmann::json details = nlohmann::json::object();
  std::string cause;
  // Wall-clock stamp in ms since the Unix epoch. Metadata only: never read by
  // the engine and excluded from content hashes.
  std::int64_t wall_ms = 0;

  bool operator==(const TraceEntry&) const = default;
};

nlohmann::json to_json(const TraceEntry& entry, bool include_wall = true);
TraceEntry entry_from_json(const nlohmann::json& j);

/// Anything that accepts trace entries. Returns the assigned seq.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual std::uint64_t record(TraceEntry entry) = 0;
};

struct TimelineQuery {
  std::optional<SimTime> from;  // inclusive
  std::optional<SimTime> to;    // exclusive
  std::optional<std::string> subject;
  std::set<Category> categories;  // empty means all
  std::optional<std::string> cause;
  std::size_t limit = 0;  // 0 means unlimited
  std::string cursor;     // opaque, from a previous QueryResult
};

struct QueryResult {
  std::vector<TraceEntry> entries;
  std::string next_cursor;  // empty when exhausted
};

struct RedactionPolicy {
  std::set<Category> suppress;
  SimTime bucket_ms = 0;  // 0 disables coarsening
  std::set<std::string> exempt_subjects;

  bool empty() const { return suppress.empty() && bucket_ms == 0; }
};

/// Append-only timeline. Backed by a line-delimited JSON file when opened
/// with a path; purely in-memory otherwise. One writer, many readers.
class TraceLog : public TraceSink {
 public:
  using Subscriber = std::function<void(const TraceEntry&)>;

  TraceLog();
  /// Opens (or creates) the log at `path`, replays it into memory, and
  /// rebuilds the sidecar offset index at `path` + ".idx".
  explicit TraceLog(std::filesystem::path path);

  TraceLog(const TraceLog&) = delete;
  TraceLog& operator=(const TraceLog&) = delete;

  std::uint64_t record(TraceEntry entry) override;

  QueryResult query(const TimelineQuery& q) const;
  QueryResult redacted_view(const TimelineQuery& q, const RedactionPolicy& policy) const;

  std::size_t size() const;
  std::uint64_t last_seq() const;
  SimTime last_at() const;
  std::vector<TraceEntry> entries() const;

  /// SHA-256 over the canonical serialization of every entry, wall-clock
  /// fields excluded.
  std::string content_hash() const;

  /// Returns a token for unsubscribe().
  std::uint64_t subscribe(Subscriber subscriber);
  void unsubscribe(std::uint64_t token);

  /// Wall stamps default to the system clock; tests may pin them.
  void set_wall_clock(std::function<std::int64_t()> wall_clock);

  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void load();
  void rebuild_index();
  bool matches(const TraceEntry& e, const TimelineQuery& q) const;
  QueryResult scan(const TimelineQuery& q, const std::function<bool(const TraceEntry&)>& keep) const;

  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  std::ofstream index_out_;
  std::uint64_t file_size_ = 0;

  mutable std::shared_mutex mutex_;
  std::vector<TraceEntry> entries_;

  std::mutex subscribers_mutex_;
  std::vector<std::pair<std::uint64_t, Subscriber>> subscribers_;
  std::uint64_t next_token_ = 1;

  std::function<std::int64_t()> wall_clock_;
};

/// Content hash over an arbitrary entry sequence (wall fields excluded).
std::string content_hash(const std::vector<TraceEntry>& entries);

}  // namespace tapkit::trace
