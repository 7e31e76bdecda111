#include "tapkit/trace/trace_log.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <memory>

#include <openssl/evp.h>

namespace tapkit::trace {

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategoryNames{{
    {Category::kDeviceEvent, "device-event"},
    {Category::kStateChange, "state-change"},
    {Category::kAction, "action"},
    {Category::kDegradedSkip, "degraded-skip"},
    {Category::kRuleFired, "rule-fired"},
    {Category::kProgramLifecycle, "program-lifecycle"},
    {Category::kRegistryChange, "registry-change"},
    {Category::kDenial, "denial"},
}};

std::int64_t system_wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr);
  }
  void update(std::string_view data) { EVP_DigestUpdate(ctx_.get(), data.data(), data.size()); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len);
    std::string out;
    out.reserve(len * 2);
    constexpr char kHex[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[digest[i] >> 4];
      out += kHex[digest[i] & 0xF];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::uint64_t parse_cursor(const std::string& cursor) {
  if (cursor.size() < 2 || cursor[0] != 's') {
    throw Error(ErrorCode::kMalformedCursor, "malformed cursor '" + cursor + "'");
  }
  std::uint64_t seq = 0;
  auto [ptr, ec] = std::from_chars(cursor.data() + 1, cursor.data() + cursor.size(), seq);
  if (ec != std::errc{} || ptr != cursor.data() + cursor.size() || seq == 0) {
    throw Error(ErrorCode::kMalformedCursor, "malformed cursor '" + cursor + "'");
  }
  return seq;
}

}  // namespace

std::string_view to_string(Category category) {
  for (const auto& [c, name] : kCategoryNames) {
    if (c == category) return name;
  }
  return "unknown";
}

Category category_from_string(std::string_view text) {
  for (const auto& [c, name] : kCategoryNames) {
    if (name == text) return c;
  }
  throw Error(ErrorCode::kSchemaViolation, "unknown trace category '" + std::string(text) + "'");
}

const std::vector<Category>& all_categories() {
  static const std::vector<Category> all = [] {
    std::vector<Category> v;
    for (const auto& [c, _] : kCategoryNames) v.push_back(c);
    return v;
  }();
  return all;
}

std::string cause::program(std::string_view program_id) {
  return "program:" + std::string(program_id);
}

nlohmann::json to_json(const TraceEntry& entry, bool include_wall) {
  nlohmann::json j{
      {"seq", entry.seq},
      {"at", entry.at},
      {"category", to_string(entry.category)},
      {"subject", entry.subject},
      {"cause", entry.cause},
      {"details", entry.details},
  };
  if (include_wall) j["wall"] = entry.wall_ms;
  return j;
}

TraceEntry entry_from_json(const nlohmann::json& j) {
  TraceEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.at = j.at("at").get<SimTime>();
  e.category = category_from_string(j.at("category").get<std::string>());
  e.subject = j.at("subject").get<std::string>();
  e.cause = j.at("cause").get<std::string>();
  e.details = j.value("details", nlohmann::json::object());
  e.wall_ms = j.value("wall", std::int64_t{0});
  return e;
}

std::string content_hash(const std::vector<TraceEntry>& entries) {
  Sha256 sha;
  for (const auto& e : entries) {
    sha.update(to_json(e, false).dump());
    sha.update("\n");
  }
  return sha.hex();
}

TraceLog::TraceLog() : wall_clock_(system_wall_ms) {}

TraceLog::TraceLog(std::filesystem::path path) : path_(std::move(path)), wall_clock_(system_wall_ms) {
  load();
  rebuild_index();
  out_.open(*path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::kIo, "cannot open trace log " + path_->string());
}

void TraceLog::load() {
  if (!std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read trace log " + path_->string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      // A torn final line is the only crash artifact a line-atomic writer can
      // leave behind; drop it.
      std::filesystem::resize_file(*path_, pos);
      break;
    }
    ++line_no;
    auto line = std::string_view(content).substr(pos, nl - pos);
    TraceEntry e;
    try {
      e = entry_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::kMalformedDocument,
                  path_->string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.seq != entries_.size() + 1 || (!entries_.empty() && e.at < entries_.back().at)) {
      throw Error(ErrorCode::kMalformedDocument,
                  path_->string() + ":" + std::to_string(line_no) + ": sequence or time out of order");
    }
    entries_.push_back(std::move(e));
    pos = nl + 1;
  }
  file_size_ = pos;
}

void TraceLog::rebuild_index() {
  auto index_path = path_->string() + ".idx";
  std::ofstream idx(index_path, std::ios::binary | std::ios::trunc);
  if (!idx) throw Error(ErrorCode::kIo, "cannot write trace index " + index_path);
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    idx << e.seq << ' ' << offset << '\n';
    offset += to_json(e).dump().size() + 1;
  }
  idx.close();
  index_out_.open(index_path, std::ios::binary | std::ios::app);
}

std::uint64_t TraceLog::record(TraceEntry entry) {
  {
    std::unique_lock lock(mutex_);
    if (!entries_.empty() && entry.at < entries_.back().at) {
      throw Error(ErrorCode::kTimeRegression,
                  "trace time regression: " + std::to_string(entry.at) + " < " +
                      std::to_string(entries_.back().at));
    }
    entry.seq = entries_.size() + 1;
    entry.wall_ms = wall_clock_();
    if (path_) {
      std::string line = to_json(entry).dump();
      line += '\n';
      out_.write(line.data(), static_cast<std::streamsize>(line.size()));
      out_.flush();
      index_out_ << entry.seq << ' ' << file_size_ << '\n';
      index_out_.flush();
      file_size_ += line.size();
    }
    entries_.push_back(entry);
  }
  std::vector<Subscriber> subs;
  {
    std::lock_guard lock(subscribers_mutex_);
    for (const auto& [_, s] : subscribers_) subs.push_back(s);
  }
  for (const auto& s : subs) s(entry);
  return entry.seq;
}

bool TraceLog::matches(const TraceEntry& e, const TimelineQuery& q) const {
  if (q.from && e.at < *q.from) return false;
  if (q.to && e.at >= *q.to) return false;
  if (q.subject && e.subject != *q.subject) return false;
  if (q.cause && e.cause != *q.cause) return false;
  if (!q.categories.empty() && !q.categories.contains(e.category)) return false;
  return true;
}

QueryResult TraceLog::scan(const TimelineQuery& q,
                           const std::function<bool(const TraceEntry&)>& keep) const {
  if (q.from && q.to && *q.from > *q.to) {
    throw Error(ErrorCode::kValidationFailed, "time range start is after its end");
  }
  std::uint64_t start_seq = q.cursor.empty() ? 1 : parse_cursor(q.cursor);

  std::shared_lock lock(mutex_);
  QueryResult result;
  // Entries are time-ordered, so the range start can be bisected.
  auto first = entries_.begin() + static_cast<std::ptrdiff_t>(std::min<std::uint64_t>(start_seq - 1, entries_.size()));
  if (q.from) {
    first = std::max(first, std::lower_bound(entries_.begin(), entries_.end(), *q.from,
                                             [](const TraceEntry& e, SimTime t) { return e.at < t; }));
  }
  for (auto it = first; it != entries_.end(); ++it) {
    if (q.to && it->at >= *q.to) break;
    if (!matches(*it, q) || !keep(*it)) continue;
    if (q.limit != 0 && result.entries.size() == q.limit) {
      result.next_cursor = "s" + std::to_string(it->seq);
      break;
    }
    result.entries.push_back(*it);
  }
  return result;
}

QueryResult TraceLog::query(const TimelineQuery& q) const {
  return scan(q, [](const TraceEntry&) { return true; });
}

QueryResult TraceLog::redacted_view(const TimelineQuery& q, const RedactionPolicy& policy) const {
  if (policy.bucket_ms < 0) {
    throw Error(ErrorCode::kValidationFailed, "redaction bucket must be non-negative");
  }
  auto exempt = [&](const TraceEntry& e) { return policy.exempt_subjects.contains(e.subject); };
  auto result = scan(q, [&](const TraceEntry& e) {
    return exempt(e) || !policy.suppress.contains(e.category);
  });
  if (policy.empty()) return result;
  // Exempt subjects escape suppression only; coarsening applies to every
  // entry so the view stays time-ordered.
  for (auto& e : result.entries) {
    if (policy.bucket_ms > 0) e.at -= e.at % policy.bucket_ms;
    e.wall_ms = 0;
  }
  return result;
}

std::size_t TraceLog::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::uint64_t TraceLog::last_seq() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

SimTime TraceLog::last_at() const {
  std::shared_lock lock(mutex_);
  return entries_.empty() ? 0 : entries_.back().at;
}

std::vector<TraceEntry> TraceLog::entries() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

std::string TraceLog::content_hash() const {
  std::shared_lock lock(mutex_);
  return trace::content_hash(entries_);
}

std::uint64_t TraceLog::subscribe(Subscriber subscriber) {
  std::lock_guard lock(subscribers_mutex_);
  auto token = next_token_++;
  subscribers_.emplace_back(token, std::move(subscriber));
  return token;
}

void TraceLog::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(subscribers_mutex_);
  std::erase_if(subscribers_, [&](const auto& p) { return p.first == token; });
}

void TraceLog::set_wall_clock(std::function<std::int64_t()> wall_clock) {
  std::unique_lock lock(mutex_);
  wall_clock_ = std::move(wall_clock);
}

}  // namespace tapkit::trace
