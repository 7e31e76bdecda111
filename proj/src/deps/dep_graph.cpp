#include "tapkit/deps/dep_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "tapkit/lang/validate.hpp"

namespace tapkit::deps {

namespace {

AstPath child(AstPath p, int i) {
  p.push_back(i);
  return p;
}

class Extractor {
 public:
  Extractor(const std::vector<lang::Program>& programs, const home::RegistrySnapshot& reg) : reg_(reg) {
    graph_.generation = reg.generation;
    for (const auto& p : programs) {
      graph_.programs.push_back({p.program_id, p.name, true, engine::Status::kStopped});
      known_programs_.insert(p.program_id);
    }
    for (const auto& p : programs) visit(p);
  }

  DepGraph finish() {
    for (const auto& id : ghost_programs_) graph_.programs.push_back({id, "", false, engine::Status::kStopped});
    std::sort(graph_.programs.begin(), graph_.programs.end(),
              [](const ProgramNode& a, const ProgramNode& b) { return a.id < b.id; });
    for (const auto& id : devices_) {
      if (const auto* d = reg_.find(id)) {
        graph_.devices.push_back({id, d->display_name, d->kind, d->availability, false});
      } else {
        graph_.devices.push_back({id, "", "", home::Availability::kMissing, true});
      }
    }
    std::map<std::string, std::set<std::string>> writers;
    for (const auto& e : graph_.edges) {
      if (e.kind == EdgeKind::kWrites) writers[e.to].insert(e.from);
    }
    for (const auto& [device, ws] : writers) {
      if (ws.size() >= 2) graph_.conflicts.push_back({device, {ws.begin(), ws.end()}, false});
    }
    return std::move(graph_);
  }

 private:
  std::vector<std::string> targets(const lang::EntitySelector& s) {
    if (const auto* b = std::get_if<lang::ById>(&s)) return {b->id};
    return lang::expand_selector(s, reg_);
  }

  void add(EdgeKind kind, const std::string& from, const lang::EntitySelector& s, const AstPath& path,
           const std::string& label) {
    for (const auto& t : targets(s)) {
      devices_.insert(t);
      graph_.edges.push_back({kind, from, t, path, label});
    }
  }

  void statement(const std::string& pid, const lang::Statement& s, const AstPath& path) {
    if (const auto* a = std::get_if<lang::ActionStmt>(&s)) {
      add(EdgeKind::kWrites, pid, a->target, path, a->action);
    } else if (const auto* st = std::get_if<lang::StartProgram>(&s)) {
      control(EdgeKind::kStarts, pid, st->program_id, path);
    } else if (const auto* sp = std::get_if<lang::StopProgram>(&s)) {
      control(EdgeKind::kStops, pid, sp->program_id, path);
    }
  }

  void control(EdgeKind kind, const std::string& from, const std::string& to, const AstPath& path) {
    if (!known_programs_.contains(to)) ghost_programs_.insert(to);
    graph_.edges.push_back({kind, from, to, path, std::string(to_string(kind))});
  }

  void visit(const lang::Program& p) {
    const auto& pid = p.program_id;
    lang::for_each_statement(p, [&](const lang::Statement& s, const AstPath& path) { statement(pid, s, path); });
    for (int j = 0; j < static_cast<int>(p.rules.size()); ++j) {
      const auto trigger = child(lang::rule_path(j), 0);
      if (const auto* et = std::get_if<lang::EventTrigger>(&p.rules[j].trigger)) {
        add(EdgeKind::kReads, pid, et->source, child(trigger, 0), et->event);
      } else {
        lang::for_each_atom(std::get<lang::StateTrigger>(p.rules[j].trigger).condition, child(trigger, 0),
                            [&](const lang::Atom& a, const AstPath& path) {
                              add(EdgeKind::kReads, pid, a.selector, path, a.variable);
                            });
      }
    }
  }

  const home::RegistrySnapshot& reg_;
  DepGraph graph_;
  std::set<std::string> known_programs_;
  std::set<std::string> ghost_programs_;
  std::set<std::string> devices_;
};

std::string dot_id(const std::string& prefix, const std::string& id) { return "\"" + prefix + ":" + id + "\""; }

std::string dot_label(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::kWrites: return "writes";
    case EdgeKind::kReads: return "reads";
    case EdgeKind::kStarts: return "starts";
    case EdgeKind::kStops: return "stops";
  }
  return "writes";
}

const ProgramNode* DepGraph::program(std::string_view id) const {
  for (const auto& p : programs) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const DeviceNode* DepGraph::device(std::string_view id) const {
  for (const auto& d : devices) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const Conflict* DepGraph::conflict(std::string_view device) const {
  for (const auto& c : conflicts) {
    if (c.device == device) return &c;
  }
  return nullptr;
}

DepGraph extract(const std::vector<lang::Program>& programs, const home::RegistrySnapshot& registry) {
  return Extractor(programs, registry).finish();
}

DepGraph annotate(DepGraph graph, const std::vector<engine::InstanceSnapshot>& snapshots) {
  std::map<std::string, engine::Status> status;
  for (const auto& s : snapshots) {
    if (s.registry_generation != graph.generation) {
      throw Error(ErrorCode::kStaleSnapshot, "snapshot of '" + s.program_id + "' is at registry generation " +
                                                 std::to_string(s.registry_generation) + ", the graph at " +
                                                 std::to_string(graph.generation));
    }
    status[s.program_id] = s.status;
  }
  for (auto& p : graph.programs) {
    auto it = status.find(p.id);
    p.status = it == status.end() ? engine::Status::kStopped : it->second;
  }
  for (auto& c : graph.conflicts) {
    int running = 0;
    for (const auto& w : c.writers) {
      auto it = status.find(w);
      if (it != status.end() && it->second != engine::Status::kStopped) ++running;
    }
    c.active = running >= 2;
  }
  graph.annotated = true;
  return graph;
}

nlohmann::json to_json(const DepGraph& g) {
  nlohmann::json programs = nlohmann::json::array();
  for (const auto& p : g.programs) {
    nlohmann::json j{{"id", p.id}, {"name", p.name}, {"stored", p.stored}};
    if (g.annotated) j["status"] = engine::to_string(p.status);
    programs.push_back(std::move(j));
  }
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& d : g.devices) {
    devices.push_back({{"id", d.id},
                       {"name", d.name},
                       {"kind", d.kind},
                       {"availability", home::to_string(d.availability)},
                       {"ghost", d.ghost}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"kind", to_string(e.kind)},
                     {"from", e.from},
                     {"to", e.to},
                     {"path", path_to_string(e.path)},
                     {"label", e.label}});
  }
  nlohmann::json conflicts = nlohmann::json::array();
  for (const auto& c : g.conflicts) {
    nlohmann::json j{{"device", c.device}, {"writers", c.writers}};
    if (g.annotated) j["state"] = c.active ? "active" : "latent";
    conflicts.push_back(std::move(j));
  }
  return {{"generation", g.generation},
          {"annotated", g.annotated},
          {"programs", programs},
          {"devices", devices},
          {"edges", edges},
          {"conflicts", conflicts}};
}

std::string to_dot(const DepGraph& g) {
  std::ostringstream out;
  out << "digraph dependencies {\n  rankdir=LR;\n";
  for (const auto& p : g.programs) {
    std::string color = "gray";
    if (g.annotated && p.status == engine::Status::kRunning) color = "green";
    if (g.annotated && p.status == engine::Status::kDegraded) color = "orange";
    out << "  " << dot_id("program", p.id) << " [shape=box, label=\"" << dot_label(p.name.empty() ? p.id : p.name)
        << "\", color=" << color << (p.stored ? "" : ", style=dashed") << "];\n";
  }
  for (const auto& d : g.devices) {
    const auto* c = g.conflict(d.id);
    std::string color = c ? (c->active ? "red" : "orange") : "black";
    out << "  " << dot_id("device", d.id) << " [shape=ellipse, label=\"" << dot_label(d.name.empty() ? d.id : d.name)
        << "\", color=" << color << (d.available() ? "" : ", style=dashed") << "];\n";
  }
  for (const auto& e : g.edges) {
    const bool to_program = e.kind == EdgeKind::kStarts || e.kind == EdgeKind::kStops;
    out << "  " << dot_id("program", e.from) << " -> " << dot_id(to_program ? "program" : "device", e.to)
        << " [label=\"" << dot_label(e.label) << "\"" << (e.kind == EdgeKind::kReads ? ", style=dotted" : "")
        << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace tapkit::deps
