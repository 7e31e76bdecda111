#include "tapkit/home/value.hpp"

#include <algorithm>
#include <charconv>

#include "tapkit/common.hpp"

namespace tapkit::home {

namespace {

std::optional<std::int64_t> parse_int(std::string_view word) {
  if (word.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
  if (ec != std::errc{} || ptr != word.data() + word.size()) return std::nullopt;
  return v;
}

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorCode::kDomainViolation, what);
}

}  // namespace

std::string format_time(TimeOfDay t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", t.minutes / 60, t.minutes % 60);
  return buf;
}

std::optional<TimeOfDay> parse_time(std::string_view text) {
  if (text.size() != 5 || text[2] != ':') return std::nullopt;
  auto h = parse_int(text.substr(0, 2));
  auto m = parse_int(text.substr(3, 2));
  if (!h || !m || *h < 0 || *h > 23 || *m < 0 || *m > 59) return std::nullopt;
  return TimeOfDay{static_cast<int>(*h * 60 + *m)};
}

nlohmann::json tagged_json(const Value& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return {{"bool", x}};
        else if constexpr (std::is_same_v<T, std::int64_t>) return {{"int", x}};
        else if constexpr (std::is_same_v<T, std::string>) return {{"sym", x}};
        else return {{"time", format_time(x)}};
      },
      v);
}

Value value_from_tagged_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw Error(ErrorCode::kMalformedDocument, "tagged value must be a one-key object: " + j.dump());
  }
  const auto& [key, val] = *j.items().begin();
  if (key == "bool") return val.get<bool>();
  if (key == "int") return val.get<std::int64_t>();
  if (key == "sym") return val.get<std::string>();
  if (key == "time") {
    auto t = parse_time(val.get<std::string>());
    if (!t) throw Error(ErrorCode::kMalformedDocument, "bad time literal " + val.dump());
    return *t;
  }
  throw Error(ErrorCode::kMalformedDocument, "unknown value tag '" + key + "'");
}

std::string debug_string(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else return format_time(x);
      },
      v);
}

std::string_view to_string(DomainType type) {
  switch (type) {
    case DomainType::kBoolean: return "boolean";
    case DomainType::kInteger: return "integer";
    case DomainType::kPercent: return "percent";
    case DomainType::kEnum: return "enum";
    case DomainType::kTimeOfDay: return "time";
  }
  return "?";
}

Domain Domain::boolean(std::string false_label, std::string true_label) {
  Domain d;
  d.type = DomainType::kBoolean;
  d.false_label = std::move(false_label);
  d.true_label = std::move(true_label);
  return d;
}

Domain Domain::integer(std::int64_t lo, std::int64_t hi) {
  Domain d;
  d.type = DomainType::kInteger;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::percent() {
  Domain d;
  d.type = DomainType::kPercent;
  d.lo = 0;
  d.hi = 100;
  return d;
}

Domain Domain::enumeration(std::vector<std::string> symbols) {
  Domain d;
  d.type = DomainType::kEnum;
  d.symbols = std::move(symbols);
  return d;
}

Domain Domain::time_of_day() {
  Domain d;
  d.type = DomainType::kTimeOfDay;
  d.lo = 0;
  d.hi = 1439;
  return d;
}

bool Domain::contains(const Value& v) const {
  switch (type) {
    case DomainType::kBoolean:
      return std::holds_alternative<bool>(v);
    case DomainType::kInteger:
    case DomainType::kPercent: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && *i >= lo && *i <= hi;
    }
    case DomainType::kEnum: {
      const auto* s = std::get_if<std::string>(&v);
      return s && std::find(symbols.begin(), symbols.end(), *s) != symbols.end();
    }
    case DomainType::kTimeOfDay: {
      const auto* t = std::get_if<TimeOfDay>(&v);
      return t && t->minutes >= 0 && t->minutes < 1440;
    }
  }
  return false;
}

Value Domain::default_value() const {
  switch (type) {
    case DomainType::kBoolean: return false;
    case DomainType::kInteger:
    case DomainType::kPercent: return std::clamp<std::int64_t>(0, lo, hi);
    case DomainType::kEnum: return symbols.empty() ? std::string{} : symbols.front();
    case DomainType::kTimeOfDay: return TimeOfDay{0};
  }
  return false;
}

bool Domain::ordered() const {
  return type == DomainType::kInteger || type == DomainType::kPercent || type == DomainType::kTimeOfDay;
}

bool Domain::enumerable() const {
  return type == DomainType::kBoolean || type == DomainType::kEnum;
}

std::vector<Value> Domain::enumerate() const {
  std::vector<Value> out;
  if (type == DomainType::kBoolean) {
    out = {false, true};
  } else if (type == DomainType::kEnum) {
    for (const auto& s : symbols) out.emplace_back(s);
  }
  return out;
}

std::string Domain::format(const Value& v) const {
  if (!contains(v)) domain_error("value " + debug_string(v) + " is outside " + describe());
  if (type == DomainType::kBoolean) return std::get<bool>(v) ? true_label : false_label;
  return debug_string(v);
}

std::optional<Value> Domain::parse(std::string_view word) const {
  switch (type) {
    case DomainType::kBoolean:
      if (word == true_label) return Value{true};
      if (word == false_label) return Value{false};
      return std::nullopt;
    case DomainType::kInteger:
    case DomainType::kPercent: {
      auto i = parse_int(word);
      if (!i || *i < lo || *i > hi) return std::nullopt;
      return Value{*i};
    }
    case DomainType::kEnum:
      if (std::find(symbols.begin(), symbols.end(), word) == symbols.end()) return std::nullopt;
      return Value{std::string(word)};
    case DomainType::kTimeOfDay: {
      auto t = parse_time(word);
      if (!t) return std::nullopt;
      return Value{*t};
    }
  }
  return std::nullopt;
}

Value Domain::from_json(const nlohmann::json& j) const {
  std::optional<Value> v;
  switch (type) {
    case DomainType::kBoolean:
      if (j.is_boolean()) v = j.get<bool>();
      else if (j.is_string()) v = parse(j.get<std::string>());
      break;
    case DomainType::kInteger:
    case DomainType::kPercent:
      if (j.is_number_integer()) v = j.get<std::int64_t>();
      else if (j.is_string()) v = parse(j.get<std::string>());
      break;
    case DomainType::kEnum:
    case DomainType::kTimeOfDay:
      if (j.is_string()) v = parse(j.get<std::string>());
      break;
  }
  if (!v || !contains(*v)) domain_error("value " + j.dump() + " is outside " + describe());
  return *v;
}

nlohmann::json Domain::to_plain_json(const Value& v) const {
  switch (type) {
    case DomainType::kBoolean: return std::get<bool>(v);
    case DomainType::kInteger:
    case DomainType::kPercent: return std::get<std::int64_t>(v);
    default: return format(v);
  }
}

std::string Domain::describe() const {
  switch (type) {
    case DomainType::kBoolean: return "bool{" + false_label + "," + true_label + "}";
    case DomainType::kInteger: return "int[" + std::to_string(lo) + ".." + std::to_string(hi) + "]";
    case DomainType::kPercent: return "percent[0..100]";
    case DomainType::kTimeOfDay: return "time[00:00..23:59]";
    case DomainType::kEnum: {
      std::string s = "enum{";
      for (std::size_t i = 0; i < symbols.size(); ++i) s += (i ? "," : "") + symbols[i];
      return s + "}";
    }
  }
  return "?";
}

Domain domain_from_json(const nlohmann::json& j) {
  auto type = j.at("type").get<std::string>();
  if (type == "boolean") {
    if (j.contains("labels")) {
      auto labels = j.at("labels").get<std::vector<std::string>>();
      if (labels.size() != 2 || labels[0] == labels[1]) {
        throw Error(ErrorCode::kMalformedCatalog, "boolean labels must be two distinct words");
      }
      return Domain::boolean(labels[0], labels[1]);
    }
    return Domain::boolean();
  }
  if (type == "integer") {
    auto d = Domain::integer(j.at("min").get<std::int64_t>(), j.at("max").get<std::int64_t>());
    if (d.lo > d.hi) throw Error(ErrorCode::kMalformedCatalog, "integer range min > max");
    return d;
  }
  if (type == "percent") return Domain::percent();
  if (type == "time") return Domain::time_of_day();
  if (type == "enum") {
    auto values = j.at("values").get<std::vector<std::string>>();
    if (values.empty()) throw Error(ErrorCode::kMalformedCatalog, "enum domain needs values");
    return Domain::enumeration(std::move(values));
  }
  throw Error(ErrorCode::kMalformedCatalog, "unknown domain type '" + type + "'");
}

nlohmann::json to_json(const Domain& d) {
  nlohmann::json j{{"type", to_string(d.type)}};
  switch (d.type) {
    case DomainType::kBoolean: j["labels"] = {d.false_label, d.true_label}; break;
    case DomainType::kInteger: j["min"] = d.lo; j["max"] = d.hi; break;
    case DomainType::kEnum: j["values"] = d.symbols; break;
    default: break;
  }
  return j;
}

std::partial_ordering compare_values(const Value& a, const Value& b) {
  if (a.index() != b.index()) return std::partial_ordering::unordered;
  return std::visit(
      [&](const auto& x) -> std::partial_ordering {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, bool>) {
          return x == y ? std::partial_ordering::equivalent : std::partial_ordering::unordered;
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x == y ? std::partial_ordering::equivalent : std::partial_ordering::unordered;
        } else {
          return x <=> y;
        }
      },
      a);
}

}  // namespace tapkit::home
