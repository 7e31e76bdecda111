#include "tapkit/lang/grammar.hpp"

#include <algorithm>
#include <sstream>

namespace tapkit::lang {

namespace {

constexpr std::pair<Comparator, std::string_view> kComparatorPhrases[] = {
    {Comparator::kEq, "is"},          {Comparator::kNe, "is not"},  {Comparator::kLt, "is below"},
    {Comparator::kLe, "is at most"},  {Comparator::kGt, "is above"}, {Comparator::kGe, "is at least"},
};

void add_literal_terminals(const home::Domain& d, std::set<Terminal>& out) {
  if (d.enumerable()) {
    for (const auto& v : d.enumerate()) out.insert(Terminal{literal_category(d), d.format(v), LiteralClass::kNone, {}});
  } else {
    out.insert(Terminal{literal_category(d), "<" + d.describe() + ">", LiteralClass::kValue, d});
  }
}

std::string join(const std::set<std::string>& words, std::string_view sep) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += sep;
    out += w;
  }
  return out;
}

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

}  // namespace

std::string_view comparator_phrase(Comparator c) {
  for (const auto& [cc, phrase] : kComparatorPhrases) {
    if (cc == c) return phrase;
  }
  return "is";
}

std::vector<Comparator> comparators_for(const home::Domain& d) {
  if (d.ordered()) {
    return {Comparator::kEq, Comparator::kNe, Comparator::kLt, Comparator::kLe, Comparator::kGt, Comparator::kGe};
  }
  return {Comparator::kEq, Comparator::kNe};
}

TokenCategory literal_category(const home::Domain& d) {
  switch (d.type) {
    case home::DomainType::kInteger:
    case home::DomainType::kPercent:
      return TokenCategory::kNumber;
    default:
      return TokenCategory::kValue;
  }
}

Grammar Grammar::derive(const home::RegistrySnapshot& registry, const std::vector<ProgramName>& programs) {
  Grammar g;
  g.scope_ = GrammarScope::kAvailable;
  g.generation_ = registry.generation;
  g.catalog_ = registry.catalog;
  for (const auto& [id, d] : registry.devices) {
    if (!d.available()) {
      g.unavailable_[id] = DeviceTerminal{id, d.display_name, d.kind};
      continue;
    }
    g.devices_by_name_[d.display_name] = DeviceTerminal{id, d.display_name, d.kind};
    g.device_names_by_id_[id] = d.display_name;
    g.kinds_.insert(d.kind);
    auto& locs = g.locations_[d.kind];
    if (!d.location.empty()) locs.insert(d.location);
    auto& props = g.properties_[d.kind];
    for (const auto& [label, value] : d.properties) props[label].insert(value);
  }
  for (const auto& p : programs) {
    g.programs_by_name_[p.name] = p.id;
    g.program_names_[p.id] = p.name;
  }
  return g;
}

Grammar Grammar::derive_known(const home::RegistrySnapshot& registry, const std::vector<ProgramName>& programs,
                              const NameBindings& extra) {
  Grammar g;
  g.scope_ = GrammarScope::kKnown;
  g.generation_ = registry.generation;
  g.catalog_ = registry.catalog;
  for (const auto& [name, _] : registry.catalog->kinds()) g.kinds_.insert(name);
  for (const auto& [id, d] : registry.devices) {
    g.devices_by_name_[d.display_name] = DeviceTerminal{id, d.display_name, d.kind};
    g.device_names_by_id_[id] = d.display_name;
    if (!d.location.empty()) g.locations_[d.kind].insert(d.location);
    for (const auto& [label, value] : d.properties) g.properties_[d.kind][label].insert(value);
  }
  // Bindings fill in devices this registry has never seen; live names win.
  for (const auto& [id, dev] : extra.devices) {
    if (g.device_names_by_id_.contains(id) || g.devices_by_name_.contains(dev.name)) continue;
    if (!registry.catalog->find(dev.kind)) continue;
    g.devices_by_name_[dev.name] = DeviceTerminal{id, dev.name, dev.kind};
    g.device_names_by_id_[id] = dev.name;
  }
  for (const auto& p : programs) {
    g.programs_by_name_[p.name] = p.id;
    g.program_names_[p.id] = p.name;
  }
  for (const auto& [id, name] : extra.programs) {
    if (g.program_names_.contains(id) || g.programs_by_name_.contains(name)) continue;
    g.programs_by_name_[name] = id;
    g.program_names_[id] = name;
  }
  return g;
}

const DeviceTerminal* Grammar::device_by_name(std::string_view name) const {
  auto it = devices_by_name_.find(name);
  return it == devices_by_name_.end() ? nullptr : &it->second;
}

const DeviceTerminal* Grammar::device_by_id(std::string_view id) const {
  auto it = device_names_by_id_.find(id);
  return it == device_names_by_id_.end() ? nullptr : device_by_name(it->second);
}

const DeviceTerminal* Grammar::unavailable(std::string_view id) const {
  auto it = unavailable_.find(id);
  return it == unavailable_.end() ? nullptr : &it->second;
}

std::set<std::string> Grammar::locations(std::string_view kind) const {
  auto it = locations_.find(kind);
  return it == locations_.end() ? std::set<std::string>{} : it->second;
}

std::map<std::string, std::set<std::string>> Grammar::properties(std::string_view kind) const {
  auto it = properties_.find(kind);
  return it == properties_.end() ? std::map<std::string, std::set<std::string>>{} : it->second;
}

const std::string* Grammar::program_name(std::string_view id) const {
  auto it = program_names_.find(id);
  return it == program_names_.end() ? nullptr : &it->second;
}

bool Grammar::operator==(const Grammar& o) const {
  return scope_ == o.scope_ && generation_ == o.generation_ && catalog_ == o.catalog_ &&
         devices_by_name_ == o.devices_by_name_ && device_names_by_id_ == o.device_names_by_id_ &&
         unavailable_ == o.unavailable_ && kinds_ == o.kinds_ && locations_ == o.locations_ &&
         properties_ == o.properties_ && programs_by_name_ == o.programs_by_name_ &&
         program_names_ == o.program_names_;
}

std::vector<Terminal> Grammar::terminals() const {
  std::set<Terminal> out;
  auto keyword = [&](std::string_view text) {
    out.insert(Terminal{TokenCategory::kKeyword, std::string(text), LiteralClass::kNone, {}});
  };
  for (auto k : {kw::kProgram, kw::kEachTime, kw::kIf, kw::kDo, kw::kThen, kw::kAll, kw::kAny, kw::kLocatedIn,
                 kw::kWhose, kw::kIs, kw::kNot, kw::kAnd, kw::kOr, kw::kOpen, kw::kClose, kw::kStart, kw::kStop,
                 kw::kWait}) {
    keyword(k);
  }
  for (const auto& u : kWaitUnits) keyword(u.word);
  for (const auto& [c, phrase] : kComparatorPhrases) keyword(phrase);
  out.insert(Terminal{TokenCategory::kProgram, "<name>", LiteralClass::kName, {}});
  out.insert(Terminal{TokenCategory::kNumber, "<count>", LiteralClass::kCount, {}});

  for (const auto& kind_name : kinds_) {
    const auto* kind = catalog_->find(kind_name);
    if (!kind) continue;
    out.insert(Terminal{TokenCategory::kKind, kind_name, LiteralClass::kNone, {}});
    for (const auto& v : kind->variables) {
      out.insert(Terminal{TokenCategory::kVariable, v.name, LiteralClass::kNone, {}});
      add_literal_terminals(v.domain, out);
    }
    for (const auto& [_, a] : kind->actions) {
      out.insert(Terminal{TokenCategory::kAction, a.phrase, LiteralClass::kNone, {}});
      for (const auto& p : a.params) {
        if (!p.phrase.empty()) keyword(p.phrase);
        add_literal_terminals(p.domain, out);
      }
    }
    for (const auto& [_, e] : kind->events) {
      out.insert(Terminal{TokenCategory::kEvent, e.phrase, LiteralClass::kNone, {}});
      if (e.key) {
        if (!e.key->phrase.empty()) keyword(e.key->phrase);
        add_literal_terminals(e.payload.at(e.key->field), out);
      }
    }
  }
  for (const auto& [name, _] : devices_by_name_) {
    out.insert(Terminal{TokenCategory::kDevice, std::string(kDevicePrefix) + name, LiteralClass::kNone, {}});
  }
  for (const auto& [_, locs] : locations_) {
    for (const auto& l : locs) out.insert(Terminal{TokenCategory::kLocation, l, LiteralClass::kNone, {}});
  }
  for (const auto& [_, props] : properties_) {
    for (const auto& [label, values] : props) {
      out.insert(Terminal{TokenCategory::kProperty, label, LiteralClass::kNone, {}});
      for (const auto& v : values) out.insert(Terminal{TokenCategory::kValue, v, LiteralClass::kNone, {}});
    }
  }
  for (const auto& [name, _] : programs_by_name_) {
    out.insert(Terminal{TokenCategory::kProgram, name, LiteralClass::kNone, {}});
  }
  if (free_words()) {
    out.insert(Terminal{TokenCategory::kLocation, "<location>", LiteralClass::kWord, {}});
    out.insert(Terminal{TokenCategory::kProperty, "<property>", LiteralClass::kWord, {}});
    out.insert(Terminal{TokenCategory::kValue, "<word>", LiteralClass::kWord, {}});
  }
  return {out.begin(), out.end()};
}

std::string Grammar::productions() const {
  std::ostringstream os;
  os << "(* generation " << generation_ << (free_words() ? ", known scope" : ", available scope") << " *)\n";
  os << "program    = \"program\" NAME [\":\"] ( statements { rule } | rule { rule } ) ;\n";
  os << "statements = statement { \"then\" statement } ;\n";
  os << "rule       = \"each time\" selector EVENT [ KEY ] \"do\" statements\n"
        "           | \"if\" condition \"do\" statements ;\n";
  os << "statement  = ACTION selector { PARAM VALUE }\n"
        "           | \"start\" PROGRAM | \"stop\" PROGRAM\n"
        "           | \"wait\" COUNT ( \"h\" | \"min\" | \"s\" | \"ms\" ) ;\n";
  os << "selector   = DEVICE | ( \"all\" | \"any\" ) KIND [ \"located in\" LOCATION | \"whose\" PROPERTY \"is\" "
        "WORD ] ;\n";
  os << "condition  = conjunct { \"or\" conjunct } ;\n";
  os << "conjunct   = unary { \"and\" unary } ;\n";
  os << "unary      = \"not\" unary | \"(\" condition \")\" | selector VARIABLE COMPARATOR VALUE ;\n";
  os << "COMPARATOR = \"is\" | \"is not\" | \"is below\" | \"is at most\" | \"is above\" | \"is at least\" ;\n";
  os << "(* \"any\" appears in conditions only; ordered domains admit every comparator, others \"is\" and \"is "
        "not\" *)\n";

  std::set<std::string> devices;
  for (const auto& [name, _] : devices_by_name_) devices.insert(quote(std::string(kDevicePrefix) + name));
  os << "DEVICE     = " << (devices.empty() ? "(* none *)" : join(devices, " | ")) << " ;\n";
  std::set<std::string> kinds;
  for (const auto& k : kinds_) kinds.insert(quote(k));
  os << "KIND       = " << (kinds.empty() ? "(* none *)" : join(kinds, " | ")) << " ;\n";
  std::set<std::string> programs;
  for (const auto& [name, _] : programs_by_name_) programs.insert(quote(name));
  os << "PROGRAM    = " << (programs.empty() ? "(* none *)" : join(programs, " | ")) << " ;\n";

  for (const auto& kind_name : kinds_) {
    const auto* kind = catalog_->find(kind_name);
    if (!kind) continue;
    os << "(* " << kind_name << " *)\n";
    std::set<std::string> actions;
    for (const auto& [_, a] : kind->actions) {
      std::string alt = quote(a.phrase);
      for (const auto& p : a.params) {
        alt += (p.phrase.empty() ? "" : " " + quote(p.phrase)) + " " + p.domain.describe();
      }
      actions.insert(alt);
    }
    if (!actions.empty()) os << "  ACTION   = " << join(actions, " | ") << " ;\n";
    std::set<std::string> events;
    for (const auto& [_, e] : kind->events) {
      std::string alt = quote(e.phrase);
      if (e.key) {
        std::string key = (e.key->phrase.empty() ? "" : quote(e.key->phrase) + " ") +
                          e.payload.at(e.key->field).describe();
        alt += e.key->required ? " " + key : " [ " + key + " ]";
      }
      events.insert(alt);
    }
    if (!events.empty()) os << "  EVENT    = " << join(events, " | ") << " ;\n";
    std::set<std::string> vars;
    for (const auto& v : kind->variables) vars.insert(quote(v.name) + " " + v.domain.describe());
    if (!vars.empty()) os << "  VARIABLE = " << join(vars, " | ") << " ;\n";
    if (!free_words()) {
      auto locs = locations(kind_name);
      if (!locs.empty()) {
        std::set<std::string> q;
        for (const auto& l : locs) q.insert(quote(l));
        os << "  LOCATION = " << join(q, " | ") << " ;\n";
      }
      for (const auto& [label, values] : properties(kind_name)) {
        std::set<std::string> q;
        for (const auto& v : values) q.insert(quote(v));
        os << "  PROPERTY " << quote(label) << " = " << join(q, " | ") << " ;\n";
      }
    }
  }
  if (free_words()) os << "LOCATION = PROPERTY = WORD = any single word ;\n";
  return os.str();
}

}  // namespace tapkit::lang
