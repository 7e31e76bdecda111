// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "support/support.hpp"
#include "tapkit/deps/dep_graph.hpp"
#include "tapkit/engine/interpreter.hpp"
#include "tapkit/gateway/service.hpp"
#include "tapkit/lang/validate.hpp"
#include "tapkit/trace/trace_log.hpp"

using namespace tapkit;
using nlohmann::json;
using tapkit::testing::device;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string data(const std::string& rel) { return read_file(std::string(TAPKIT_DATA_DIR) + "/" + rel); }

std::size_t count(const trace::TraceLog& log, trace::Category c, std::string_view subject = {}) {
  std::size_t n = 0;
  for (const auto& e : log.entries()) n += e.category == c && (subject.empty() || e.subject == subject);
  return n;
}

struct Home {
  trace::TraceLog log;
  home::Registry reg{testing::catalog(), &log};
  engine::Interpreter in{reg, &log};

  void xmas() {
    reg.register_device(device("c", "clock", "clock"), {});
    reg.register_device(device("plug1", "smart-plug", "tree-plug", "living-room"), {});
    reg.register_device(device("l1", "lamp", "tree-lamp", "living-room"), {});
    reg.register_device(device("l2", "lamp", "desk-lamp", "study"), {});
  }
  lang::Program load(const std::string& text, const std::string& id) {
    auto p = lang::parse(text, lang::Grammar::derive(reg.view()), id);
    in.install(p);
    return p;
  }
};

constexpr SimTime kHour = 3'600'000;

// ---------------------------------------------------------------------------

Verdict xmas_indicators() {
  const auto t0 = std::chrono::steady_clock::now();
  Home h;
  h.xmas();
  const auto p = h.load(data("programs/xmas-tree.tap"), "xmastree");
  h.in.start("xmastree");
  const auto s = h.in.snapshot("xmastree");
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();

  std::size_t imperative = 0, ones = 0;
  lang::for_each_statement(p, [&](const lang::Statement&, const AstPath& path) {
    if (path.front() != lang::kImperativeChild) return;
    ++imperative;
    auto it = s.statement_counters.find(path);
    ones += it != s.statement_counters.end() && it->second == 1;
  });
  const bool rules_zero = s.rule_counters.size() == 2 && s.rule_counters.at(0) == 0 && s.rule_counters.at(1) == 0;
  const bool ok = s.status == engine::Status::kRunning && imperative == 2 && ones == 2 && rules_zero &&
                  s.waiting == std::set<int>{0, 1} && ms < 1000;
  std::ostringstream d;
  d << "status " << engine::to_string(s.status) << ", imperative counters at 1: " << ones << "/" << imperative
    << ", rule counters " << (rules_zero ? "0/0" : "not 0/0") << ", waiting rules " << s.waiting.size() << ", " << ms
    << " ms";
  return {ok, d.str()};
}

Verdict degraded() {
  Home h;
  h.xmas();
  h.load(data("programs/xmas-tree.tap"), "xmastree");
  h.in.start("xmastree");
  h.in.advance_clock(20 * kHour);
  h.in.unregister_device("l1");
  const auto s = h.in.snapshot("xmastree");
  bool lamp_ref_unknown = false;
  for (const auto& path : s.unknown_refs) {
    // The 23:00 rule's second statement names the tree lamp.
    lamp_ref_unknown |= path.size() >= 2 && path[0] == lang::kRulesChild && path[1] == 1;
  }
  // Two evenings: each 23:00 firing turns off the plug and skips the lamp.
  h.in.advance_clock(48 * kHour);
  std::size_t fired23 = 0, plug_actions = 0;
  for (const auto& e : h.log.entries()) {
    if (e.category == trace::Category::kRuleFired && e.details.value("rule", -1) == 1) ++fired23;
    if (e.category == trace::Category::kAction && e.subject == "plug1" && e.details.contains("stmt") &&
        e.details.at("stmt").at("path").get<std::string>().rfind("2.1.", 0) == 0) {
      ++plug_actions;
    }
  }
  const auto skips = count(h.log, trace::Category::kDegradedSkip);
  const auto after = h.in.snapshot("xmastree");
  const bool ok = s.status == engine::Status::kDegraded && lamp_ref_unknown && fired23 == 2 && plug_actions == 2 &&
                  skips == 2 && after.status == engine::Status::kDegraded;
  std::ostringstream d;
  d << "status " << engine::to_string(s.status) << (lamp_ref_unknown ? " with" : " without")
    << " the lamp reference unknown; 23:00 firings " << fired23 << ", plug actions " << plug_actions
    << ", degraded skips " << skips;
  return {ok, d.str()};
}

Verdict conflict() {
  Home h;
  h.reg.register_device(device("desk", "lamp", "old-little-desk-lamp", "office"), {});
  h.reg.register_device(device("plug", "smart-plug", "desk-plug", "office"), {});
  h.reg.register_device(device("temp", "temperature-sensor", "thermo", "office"), {});
  h.reg.register_device(device("b1", "lamp", "bed-lamp", "bedroom"), {});
  const std::vector<lang::Program> programs{
      h.load("program MakeEnergyVisible: each time the desk-plug reports power do "
             "set color of the old-little-desk-lamp to red",
             "energy"),
      h.load("program ShowTemperature: if the thermo temperature is above 25 do "
             "set color of the old-little-desk-lamp to blue",
             "temperature"),
      h.load("program Night: switch off the bed-lamp", "night"),
  };
  const auto g = deps::extract(programs, h.reg.view());
  std::set<std::string> devices;
  for (const auto& c : g.conflicts) devices.insert(c.device);
  const bool exact = devices == std::set<std::string>{"desk"} &&
                     g.conflict("desk")->writers == std::vector<std::string>{"energy", "temperature"};

  h.in.start("energy");
  const bool latent = !deps::annotate(g, h.in.snapshots()).conflict("desk")->active;
  h.in.start("temperature");
  const bool active = deps::annotate(g, h.in.snapshots()).conflict("desk")->active;
  std::ostringstream d;
  d << "conflict set {" << (devices.empty() ? "" : *devices.begin()) << (devices.size() > 1 ? ",..." : "")
    << "}, one running: " << (latent ? "latent" : "active") << ", both running: " << (active ? "active" : "latent");
  return {exact && latent && active, d.str()};
}

Verdict completion() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::Rng rng(20240611);
  std::size_t drafts = 0, problems = 0;
  std::string first;
  for (int round = 0; round < 40; ++round) {
    home::Registry reg(testing::catalog());
    const int total = testing::uniform(rng, 0, 12);
    testing::random_home(rng, reg, total, testing::uniform(rng, 0, std::min(total, 3)));
    std::vector<lang::ProgramName> names{{"evening", "Evening"}, {"xmas", "XmasTree"}};
    const auto g = lang::Grammar::derive(reg.view(), names);
    const auto universe = testing::candidate_universe(reg.view(), names);
    testing::ProgramGen gen(rng, g, names);
    gen.max_depth = 4;
    for (int i = 0; i < 4; ++i) {
      const auto s = lang::render(testing::tidy(gen.program()), g);
      for (int k = 0; k < 4; ++k) {
        const auto n = static_cast<std::size_t>(testing::uniform(rng, 0, static_cast<int>(s.tokens.size())));
        const auto draft = testing::prefix_draft(s, n);
        const auto r = testing::check_completion(draft, g, reg.view(), universe);
        problems += r.problems.size();
        if (first.empty() && !r.problems.empty()) first = r.problems.front();
        // Second route: no device option resolves to a Missing device by id.
        const auto opts = keyboard::options(draft, keyboard::inspect(draft, g).next, g, reg.view());
        for (const auto& o : opts) {
          if (o.terminal.category != lang::TokenCategory::kDevice) continue;
          const auto* t = g.device_by_name(o.terminal.text.substr(lang::kDevicePrefix.size()));
          if (!t || !reg.view().devices.at(t->id).available()) {
            ++problems;
            if (first.empty()) first = "missing device offered: " + o.terminal.text;
          }
        }
        ++drafts;
      }
    }
  }
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream d;
  d << drafts << " drafts, " << problems << " violations, " << secs << " s";
  if (!first.empty()) d << "; first: " << first;
  return {drafts >= 500 && problems == 0 && secs < 60, d.str()};
}

// 9 registrations at time zero, then 191 random steps over two days.
std::string determinism_scenario() {
  std::ostringstream s;
  s << "scenario replay\n"
       "at 0 register clock c name=clock\n"
       "at 0 register smart-plug p1 name=tree-plug location=living-room\n"
       "at 0 register lamp l1 name=tree-lamp location=living-room\n"
       "at 0 register lamp l2 name=desk-lamp location=study\n"
       "at 0 register lamp l3 name=hall-lamp location=hall\n"
       "at 0 register contact-sensor d1 name=front-door location=hall\n"
       "at 0 register wall-switch s1 name=hall-switch location=hall\n"
       "at 0 register temperature-sensor t1 name=thermo location=study\n"
       "at 0 register domicube q1 name=DomiCube\n";
  testing::Rng rng(777);
  bool hall_present = true;
  for (int i = 0; i < 191; ++i) {
    s << "at " << std::uniform_int_distribution<SimTime>(1, 48 * kHour)(rng) << " ";
    switch (testing::uniform(rng, 0, 6)) {
      case 0: s << "emit d1 " << (testing::coin(rng) ? "opened" : "closed"); break;
      case 1: s << "emit s1 " << (testing::coin(rng) ? "pressed" : "released"); break;
      case 2: s << "emit t1 temperature-changed celsius=" << testing::uniform(rng, 15, 32); break;
      case 3: s << "emit q1 face-changed face=" << testing::uniform(rng, 1, 6); break;
      case 4: s << "emit p1 power-changed watts=" << testing::uniform(rng, 0, 300); break;
      case 5:
        s << (hall_present ? "unregister l3" : "register lamp l3 name=hall-lamp location=hall");
        hall_present = !hall_present;
        break;
      default: s << "mark m" << i; break;
    }
    s << "\n";
  }
  return s.str();
}

const std::vector<std::string>& determinism_programs() {
  static const std::vector<std::string> v{
      data("programs/xmas-tree.tap"),
      "program Porch: each time the front-door is opened do switch on the hall-lamp then wait 300 s then "
      "switch off the hall-lamp",
      "program Heat: if the thermo temperature is above 25 do set color of the desk-lamp to red",
      "program Cube: each time the DomiCube changes face to 3 do blink the tree-lamp",
      "program Study: each time the hall-switch is pressed do switch off all lamp located in study",
  };
  return v;
}

// Returns the content hash, or an error description prefixed by "!".
std::string replay(const std::string& scenario, bool accelerated, std::size_t* entries, std::size_t* steps) {
  testing::TempDir dir;
  const auto file = dir.path / "replay.scn";
  std::ofstream(file) << scenario;
  gateway::ServiceConfig cfg;
  cfg.state_dir = dir.path / "state";
  cfg.scenario = file;
  gateway::Service svc(cfg);
  svc.call("scenario.step");  // time-zero registrations
  for (const auto& text : determinism_programs()) {
    const auto saved = svc.call("programs.save", {{"text", text}});
    svc.call("programs.start", {{"id", saved.at("program_id")}});
  }
  const SimTime end = 48 * kHour + 1;
  if (accelerated) {
    svc.call("clock.set", {{"mode", "accelerated"}, {"factor", 400'000.0}, {"until", end}});
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (svc.call("clock.get").at("now").get<SimTime>() < end) {
      if (std::chrono::steady_clock::now() > deadline) return "!accelerated clock did not reach the end";
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    svc.call("clock.set", {{"mode", "simulated"}});
  } else {
    svc.call("clock.advance", {{"to", end}});
  }
  const auto sc = svc.call("scenario.get");
  *steps = sc.at("applied").size();
  *entries = svc.trace_log().entries().size();
  return svc.trace_log().content_hash();
}

Verdict determinism() {
  const auto scenario = determinism_scenario();
  std::size_t e1 = 0, e2 = 0, e3 = 0, s1 = 0, s2 = 0, s3 = 0;
  const auto a = replay(scenario, false, &e1, &s1);
  const auto b = replay(scenario, false, &e2, &s2);
  const auto c = replay(scenario, true, &e3, &s3);
  std::ostringstream d;
  d << s1 << " steps, " << determinism_programs().size() << " programs, " << e1 << " entries; hashes "
    << a.substr(0, 12) << " " << b.substr(0, 12) << " " << c.substr(0, 12) << " (accelerated)";
  return {s1 == 200 && s2 == 200 && s3 == 200 && a == b && b == c && a[0] != '!', d.str()};
}

Verdict round_trip() {
  testing::Rng rng(99);
  std::size_t checked = 0, violations = 0;
  std::string first;
  for (int round = 0; round < 40; ++round) {
    home::Registry reg(testing::catalog());
    testing::random_home(rng, reg, testing::uniform(rng, 1, 12), testing::uniform(rng, 0, 2));
    std::vector<lang::ProgramName> names{{"evening", "Evening"}, {"xmas", "XmasTree"}};
    const auto g = lang::Grammar::derive(reg.view(), names);
    testing::ProgramGen gen(rng, g, names);
    for (int i = 0; i < 30; ++i) {
      const auto p = testing::tidy(gen.program("p" + std::to_string(i)));
      const auto text = lang::render(p, g).text();
      bool same = false;
      try {
        const auto back = lang::parse(text, g, p.program_id);
        same = back == p && lang::render(back, g).text() == text;
      } catch (const std::exception&) {
      }
      if (!same) {
        ++violations;
        if (first.empty()) first = text;
      }
      ++checked;
    }
  }
  std::ostringstream d;
  d << checked << " programs, " << violations << " violations";
  if (!first.empty()) d << "; first: " << first;
  return {checked >= 1000 && violations == 0, d.str()};
}

std::vector<home::Value> samples(const home::Domain& dom) {
  switch (dom.type) {
    case home::DomainType::kBoolean: return {false, true};
    case home::DomainType::kEnum: return {dom.symbols.begin(), dom.symbols.end()};
    case home::DomainType::kInteger:
    case home::DomainType::kPercent: return {dom.lo, dom.lo + (dom.hi - dom.lo) / 2, dom.hi};
    case home::DomainType::kTimeOfDay: return {home::TimeOfDay{0}, home::TimeOfDay{720}, home::TimeOfDay{1439}};
  }
  return {};
}

std::vector<std::vector<home::Value>> arg_vectors(const home::ActionSpec& a) {
  std::vector<std::vector<home::Value>> out{{}};
  for (const auto& p : a.params) {
    std::vector<std::vector<home::Value>> next;
    for (const auto& prefix : out) {
      for (const auto& v : samples(p.domain)) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    }
    out = std::move(next);
  }
  return out;
}

json full_state(const home::Registry& reg) {
  json j = json::object();
  for (const auto& [id, _] : reg.view().devices) {
    j[id] = home::state_to_json(reg.view().states.at(id), *reg.view().kind_of(id));
  }
  return j;
}

Verdict critical_guard() {
  std::size_t attempts = 0, denied = 0, traced = 0, changed = 0;
  testing::Rng rng(5150);
  const auto cat = testing::catalog();
  for (const auto& [kind_name, kind] : cat->kinds()) {
    for (const auto& [action_name, spec] : kind.actions) {
      if (!spec.power_removing) continue;
      for (const auto& args : arg_vectors(spec)) {
        // Both routes: a direct dashboard command and a program statement.
        for (int route = 0; route < 2; ++route) {
          Home h;
          auto d = device("x", kind_name, "critical-thing");
          d.critical = true;
          std::map<std::string, home::Value> init;
          for (const auto& v : kind.variables) init[v.name] = testing::random_value(rng, v.domain);
          h.reg.register_device(d, init);
          const auto before = full_state(h.reg);
          const auto gen = h.reg.generation();
          const auto denials = count(h.log, trace::Category::kDenial, "x");
          ++attempts;
          if (route == 0) {
            try {
              h.in.device_action("x", action_name, args);
            } catch (const Error& e) {
              denied += e.code() == ErrorCode::kCriticalDeviceDenied;
            }
          } else {
            lang::Program p;
            p.program_id = "cut";
            p.name = "Cut";
            p.imperative.push_back(lang::ActionStmt{action_name, lang::ById{"x"}, args});
            h.in.install(p);
            h.in.start("cut");
            for (const auto& e : h.log.entries()) {
              denied += e.category == trace::Category::kDenial && e.subject == "x" && e.details.contains("stmt");
            }
          }
          traced += count(h.log, trace::Category::kDenial, "x") == denials + 1;
          changed += full_state(h.reg) != before || h.reg.generation() != gen;
        }
      }
    }
  }
  std::ostringstream d;
  d << attempts << " attempts, " << denied << " denied, " << traced << " traced, " << changed << " state changes";
  return {attempts > 0 && denied == attempts && traced == attempts && changed == 0, d.str()};
}

// ---------------------------------------------------------------------------
// Durability: a real server process, killed without warning.

struct Child {
  pid_t pid = -1;
  int port = 0;
};

Child spawn_server(const std::filesystem::path& state) {
  int fds[2];
  if (::pipe(fds) != 0) return {};
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[0]);
    ::close(fds[1]);
    const std::string dir = state.string();
    ::execl(TAPKIT_BIN, TAPKIT_BIN, "--log-level", "off", "serve", "--port", "0", "--state-dir", dir.c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  std::string line;
  char ch;
  while (::read(fds[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
  ::close(fds[0]);
  Child c{pid, 0};
  const auto colon = line.rfind(':');
  if (line.rfind("listening ", 0) == 0 && colon != std::string::npos) c.port = std::stoi(line.substr(colon + 1));
  return c;
}

void kill_server(const Child& c) {
  if (c.pid <= 0) return;
  ::kill(c.pid, SIGKILL);
  int status = 0;
  ::waitpid(c.pid, &status, 0);
}

Verdict durability() {
  testing::TempDir dir;
  const auto state = dir.path / "state";
  auto server = spawn_server(state);
  if (server.port <= 0) {
    kill_server(server);
    return {false, "server did not report a port"};
  }
  httplib::Client cli("127.0.0.1", server.port);
  cli.set_read_timeout(10, 0);
  std::size_t sent = 0, ok = 0;
  auto command = [&](const std::string& verb, const json& payload) {
    ++sent;
    const auto r = cli.Post("/api/command", json{{"id", std::to_string(sent)}, {"verb", verb}, {"payload", payload}}.dump(),
                            "application/json");
    if (r && r->status == 200) ++ok;
    return r ? json::parse(r->body) : json();
  };
  command("devices.register", {{"device", {{"id", "c"}, {"kind", "clock"}, {"name", "clock"}}}});
  command("devices.register", {{"device", {{"id", "plug1"}, {"kind", "smart-plug"}, {"name", "tree-plug"}}}});
  command("devices.register", {{"device", {{"id", "l1"}, {"kind", "lamp"}, {"name", "tree-lamp"}}}});
  command("devices.register", {{"device", {{"id", "l2"}, {"kind", "lamp"}, {"name", "desk-lamp"}}}});
  command("programs.save", {{"text", data("programs/xmas-tree.tap")}});
  command("programs.save", {{"text", "program Desk: switch on the desk-lamp"}});
  command("programs.start", {{"id", "xmastree"}});
  command("programs.start", {{"id", "desk"}});
  testing::Rng rng(42);
  while (sent < 100) {
    switch (testing::uniform(rng, 0, 3)) {
      case 0: command("clock.advance", {{"by", testing::uniform(rng, 1, 4) * kHour}}); break;
      case 1: command("devices.action", {{"id", "l2"}, {"action", testing::coin(rng) ? "switch_on" : "switch_off"}}); break;
      case 2: command("devices.list", json::object()); break;
      default: command("traces.query", {{"limit", 5}}); break;
    }
  }
  std::map<std::string, std::string> before;
  for (const auto& e : std::filesystem::recursive_directory_iterator(state)) {
    if (e.is_regular_file()) before[std::filesystem::relative(e.path(), state).string()] = read_file(e.path());
  }
  kill_server(server);

  server = spawn_server(state);
  std::map<std::string, std::string> after;
  for (const auto& e : std::filesystem::recursive_directory_iterator(state)) {
    if (e.is_regular_file()) after[std::filesystem::relative(e.path(), state).string()] = read_file(e.path());
  }
  std::size_t running = 0, listed = 0;
  if (server.port > 0) {
    httplib::Client again("127.0.0.1", server.port);
    again.set_read_timeout(10, 0);
    if (const auto r = again.Get("/api/programs")) {
      const auto reply = json::parse(r->body);
      for (const auto& p : reply.at("result")) {
        ++listed;
        running += p.at("status") != "stopped";
      }
    }
  }
  kill_server(server);
  const bool same = before == after && before.contains("trace.jsonl") && before.contains("programs/xmastree.json");
  std::ostringstream d;
  d << sent << " commands (" << ok << " ok), " << before.size() << " files " << (same ? "identical" : "differ")
    << " after restart, " << listed << " programs, " << running << " running";
  return {sent == 100 && same && listed == 2 && running == 0, d.str()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"xmas-indicators", xmas_indicators}, {"degraded-execution", degraded}, {"conflict", conflict},
      {"completion", completion},           {"determinism", determinism},    {"round-trip", round_trip},
      {"critical-guard", critical_guard},   {"durability", durability},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
