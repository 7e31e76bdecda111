#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tapkit/home/catalog.hpp"
#include "tapkit/home/registry.hpp"
#include "tapkit/lang/ast.hpp"
#include "tapkit/lang/tokens.hpp"

namespace tapkit::lang {

enum class GrammarScope {
  kAvailable,  // the editing grammar: only what is in the home right now
  kKnown,      // the loading grammar: every device ever seen, free-form filters
};

struct DeviceTerminal {
  std::string id;
  std::string name;
  std::string kind;
  bool operator==(const DeviceTerminal&) const = default;
};

struct ProgramName {
  std::string id;
  std::string name;
  bool operator==(const ProgramName&) const = default;
};

/// Names for references the registry cannot resolve; program documents
/// carry these so they can be re-parsed on a fresh home.
struct NameBindings {
  std::map<std::string, DeviceTerminal> devices;  // by id
  std::map<std::string, std::string> programs;     // id -> name
};

inline constexpr std::string_view kDevicePrefix = "the ";

/// The concrete grammar specialized to one registry generation. Terminals
/// are the keywords plus everything the current home makes nameable.
class Grammar {
 public:
  static Grammar derive(const home::RegistrySnapshot& registry, const std::vector<ProgramName>& programs = {});
  static Grammar derive_known(const home::RegistrySnapshot& registry, const std::vector<ProgramName>& programs = {},
                              const NameBindings& extra = {});

  GrammarScope scope() const { return scope_; }
  std::uint64_t generation() const { return generation_; }
  /// Overrides the generation, for callers whose grammar also depends on
  /// state outside the registry (the stored program list).
  void stamp(std::uint64_t generation) { generation_ = generation; }
  const home::KindCatalog& catalog() const { return *catalog_; }
  bool free_words() const { return scope_ == GrammarScope::kKnown; }

  const DeviceTerminal* device_by_name(std::string_view name) const;
  const DeviceTerminal* device_by_id(std::string_view id) const;
  /// Last-known identity of a device that is not a terminal (Missing); rendering only.
  const DeviceTerminal* unavailable(std::string_view id) const;
  const std::map<std::string, DeviceTerminal, std::less<>>& devices() const { return devices_by_name_; }

  const std::set<std::string, std::less<>>& kinds() const { return kinds_; }
  bool has_kind(std::string_view kind) const { return kinds_.contains(kind); }
  std::set<std::string> locations(std::string_view kind) const;
  std::map<std::string, std::set<std::string>> properties(std::string_view kind) const;

  const std::map<std::string, std::string, std::less<>>& programs_by_name() const { return programs_by_name_; }
  const std::string* program_name(std::string_view id) const;

  /// Every terminal the grammar can produce (a superset of what is valid at
  /// any one point).
  std::vector<Terminal> terminals() const;
  /// Human-readable EBNF with terminals expanded for this home.
  std::string productions() const;

  bool operator==(const Grammar& other) const;

 private:
  GrammarScope scope_ = GrammarScope::kAvailable;
  std::uint64_t generation_ = 0;
  std::shared_ptr<const home::KindCatalog> catalog_;
  std::map<std::string, DeviceTerminal, std::less<>> devices_by_name_;
  std::map<std::string, std::string, std::less<>> device_names_by_id_;
  std::map<std::string, DeviceTerminal, std::less<>> unavailable_;
  std::set<std::string, std::less<>> kinds_;
  std::map<std::string, std::set<std::string>, std::less<>> locations_;
  std::map<std::string, std::map<std::string, std::set<std::string>>, std::less<>> properties_;
  std::map<std::string, std::string, std::less<>> programs_by_name_;
  std::map<std::string, std::string, std::less<>> program_names_;
};

/// Fixed keyword phrases of the language.
namespace kw {
inline constexpr std::string_view kProgram = "program";
inline constexpr std::string_view kEachTime = "each time";
inline constexpr std::string_view kIf = "if";
inline constexpr std::string_view kDo = "do";
inline constexpr std::string_view kThen = "then";
inline constexpr std::string_view kAll = "all";
inline constexpr std::string_view kAny = "any";
inline constexpr std::string_view kLocatedIn = "located in";
inline constexpr std::string_view kWhose = "whose";
inline constexpr std::string_view kIs = "is";
inline constexpr std::string_view kNot = "not";
inline constexpr std::string_view kAnd = "and";
inline constexpr std::string_view kOr = "or";
inline constexpr std::string_view kOpen = "(";
inline constexpr std::string_view kClose = ")";
inline constexpr std::string_view kStart = "start";
inline constexpr std::string_view kStop = "stop";
inline constexpr std::string_view kWait = "wait";
}  // namespace kw

struct WaitUnit {
  std::string_view word;
  SimTime millis;
};
/// Largest first; rendering picks the largest unit dividing the duration.
inline constexpr WaitUnit kWaitUnits[] = {{"h", 3'600'000}, {"min", 60'000}, {"s", 1'000}, {"ms", 1}};
inline constexpr std::int64_t kMaxWaitAmount = 1'000'000'000;

std::string_view comparator_phrase(Comparator c);
/// Comparators admitted by a domain, in canonical order.
std::vector<Comparator> comparators_for(const home::Domain& d);

/// Category a literal of this domain is shown under.
TokenCategory literal_category(const home::Domain& d);

}  // namespace tapkit::lang
