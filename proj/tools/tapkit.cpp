// tapkit: gateway server and offline helpers.
//
//   tapkit serve  --port 8080 --state-dir ./state [--scenario s.scn] [--clock-mode simulated]
//   tapkit check  program.tap [--scenario s.scn]
//   tapkit run    --scenario s.scn program.tap... [--until 24h] [--trace out.jsonl]

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "tapkit/gateway/http_server.hpp"
#include "tapkit/gateway/scenario.hpp"
#include "tapkit/gateway/service.hpp"

namespace gw = tapkit::gateway;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw tapkit::Error(tapkit::ErrorCode::kIo, "cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Scratch state directory for the offline commands.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    auto tmpl = (std::filesystem::temp_directory_path() / "tapkit-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw tapkit::Error(tapkit::ErrorCode::kIo, "mkdtemp failed");
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Loads the scenario and applies its time-zero steps so devices exist.
void prime(gw::Service& svc, const std::string& scenario) {
  if (scenario.empty()) return;
  svc.call("scenario.load", {{"path", scenario}});
  svc.call("clock.advance", {{"by", 0}});
}

int cmd_check(const std::string& file, const std::string& scenario, const std::string& catalog) {
  TempDir tmp;
  gw::ServiceConfig cfg;
  cfg.state_dir = tmp.path;
  if (!catalog.empty()) cfg.catalog = catalog;
  gw::Service svc(cfg);
  prime(svc, scenario);
  const auto r = svc.call("programs.check", {{"text", read_file(file)}});
  std::cout << r.dump(2) << "\n";
  if (r.at("status") != "complete") return 1;
  return r.at("validation").value("errors", nlohmann::json::array()).empty() ? 0 : 1;
}

int cmd_run(const std::vector<std::string>& files, const std::string& scenario, const std::string& catalog,
            const std::string& until, const std::string& trace_out) {
  TempDir tmp;
  gw::ServiceConfig cfg;
  cfg.state_dir = tmp.path;
  if (!catalog.empty()) cfg.catalog = catalog;
  gw::Service svc(cfg);
  prime(svc, scenario);
  for (const auto& f : files) {
    const auto saved = svc.call("programs.save", {{"text", read_file(f)}});
    svc.call("programs.start", {{"id", saved.at("program_id")}});
  }
  if (!until.empty()) {
    const auto to = gw::parse_duration(until);
    if (!to) throw tapkit::Error(tapkit::ErrorCode::kMalformedDocument, "bad --until '" + until + "'");
    svc.call("clock.advance", {{"to", *to}});
  } else {
    while (!svc.call("scenario.step").value("done", true)) {
    }
  }
  const auto ndjson = svc.export_traces(nlohmann::json::object(), false);
  if (trace_out.empty()) {
    std::cout << ndjson;
  } else {
    std::ofstream(trace_out, std::ios::binary) << ndjson;
  }
  std::cerr << "content-hash " << svc.trace_log().content_hash() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-home automation gateway"};
  app.require_subcommand(1);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->envname("TAPKIT_LOG_LEVEL");

  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string state_dir = "./tapkit-state";
  std::string catalog;
  std::string scenario;
  std::string clock_mode = "simulated";
  double clock_factor = 1.0;
  serve->add_option("--port", port)->envname("TAPKIT_PORT");
  serve->add_option("--host", host)->envname("TAPKIT_HOST");
  serve->add_option("--state-dir", state_dir)->envname("TAPKIT_STATE_DIR");
  serve->add_option("--catalog", catalog, "Device catalog JSON (builtin when omitted)")->envname("TAPKIT_CATALOG");
  serve->add_option("--scenario", scenario, "Scenario file, loaded paused")->envname("TAPKIT_SCENARIO");
  serve->add_option("--clock-mode", clock_mode, "simulated|accelerated|realtime")->envname("TAPKIT_CLOCK_MODE");
  serve->add_option("--clock-factor", clock_factor, "Speed-up for the accelerated mode")
      ->envname("TAPKIT_CLOCK_FACTOR");

  auto* check = app.add_subcommand("check", "Parse and validate a program file");
  std::string check_file;
  check->add_option("program", check_file)->required();
  check->add_option("--scenario", scenario, "Scenario whose time-zero devices form the home");
  check->add_option("--catalog", catalog);

  auto* run = app.add_subcommand("run", "Run programs against a scenario and print the trace");
  std::vector<std::string> run_files;
  std::string until;
  std::string trace_out;
  run->add_option("programs", run_files)->required();
  run->add_option("--scenario", scenario)->required();
  run->add_option("--catalog", catalog);
  run->add_option("--until", until, "Simulated stop time (default: last scenario step)");
  run->add_option("--trace", trace_out, "Write NDJSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*check) return cmd_check(check_file, scenario, catalog);
    if (*run) return cmd_run(run_files, scenario, catalog, until, trace_out);

    // Block the stop signals before any thread starts; one thread waits for them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    gw::ServiceConfig cfg;
    cfg.state_dir = state_dir;
    if (!catalog.empty()) cfg.catalog = catalog;
    if (!scenario.empty()) cfg.scenario = scenario;
    cfg.clock_mode = tapkit::engine::clock_mode_from_string(clock_mode);
    cfg.clock_factor = clock_factor;
    gw::Service svc(cfg);
    gw::HttpServer server(svc);
    const int bound = server.bind(host, port);
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&stop_signals, &sig);
      if (sig != 0) server.stop();
    });
    // Parent processes (tests, supervisors) read the port from this line.
    std::cout << "listening " << host << ":" << bound << std::endl;
    spdlog::info("state in {}", std::filesystem::absolute(state_dir).string());
    server.serve();
    // Normal exit without a signal: wake the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
  } catch (const tapkit::Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
