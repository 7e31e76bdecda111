#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "support/support.hpp"
#include "tapkit/gateway/http_server.hpp"

using namespace tapkit;
using namespace tapkit::gateway;
using nlohmann::json;

namespace {

struct Server {
  testing::TempDir dir;
  std::unique_ptr<Service> service;
  std::unique_ptr<HttpServer> http;
  int port = 0;

  Server() {
    ServiceConfig c;
    c.state_dir = dir.path;
    service = std::make_unique<Service>(c);
    http = std::make_unique<HttpServer>(*service);
    port = http->start("127.0.0.1", 0);
  }
  ~Server() {
    http.reset();
    service.reset();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(5, 0);
    return c;
  }
};

json body(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string read_data(const std::string& rel) {
  std::ifstream in(std::string(TAPKIT_DATA_DIR) + "/" + rel);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void post(httplib::Client& c, const std::string& path, const json& j, int want = 200) {
  const auto r = c.Post(path, j.dump(), "application/json");
  REQUIRE(r);
  CHECK_MESSAGE(r->status == want, path << " " << r->body);
}

}  // namespace

TEST_CASE("status mapping") {
  CHECK(http_status("unknown-device") == 404);
  CHECK(http_status("already-running") == 409);
  CHECK(http_status("critical-device-denied") == 403);
  CHECK(http_status("syntax-error") == 400);
  CHECK(http_status("validation-failed") == 400);
  CHECK(http_status("io") == 500);
}

TEST_CASE("REST routes map onto verbs") {
  Server s;
  auto c = s.client();
  CHECK(body(c.Get("/api/health")).at("ok") == true);
  post(c, "/api/devices", {{"device", {{"id", "plug1"}, {"kind", "smart-plug"}, {"name", "tree-plug"}}}});
  post(c, "/api/devices", {{"device", {{"id", "l1"}, {"kind", "lamp"}, {"name", "tree-lamp"}}}});
  post(c, "/api/devices", {{"device", {{"id", "c"}, {"kind", "clock"}, {"name", "clock"}}}});
  post(c, "/api/devices", {{"device", {{"id", "c"}, {"kind", "clock"}, {"name", "clock"}}}}, 409);
  const auto devices = body(c.Get("/api/devices"));
  CHECK(devices.at("ok") == true);
  CHECK(devices.at("result").size() == 3);
  CHECK(devices.at("generation") == 3);

  post(c, "/api/devices/l1/action", {{"action", "switch_on"}});
  post(c, "/api/devices/nobody/action", {{"action", "switch_on"}}, 404);

  const auto saved = c.Post("/api/programs", json{{"text", read_data("programs/xmas-tree.tap")}}.dump(), "application/json");
  const auto id = body(saved).at("result").at("program_id").get<std::string>();
  CHECK(body(c.Get("/api/programs")).at("result").size() == 1);
  post(c, "/api/programs/" + id + "/start", json::object());
  post(c, "/api/programs/" + id + "/start", json::object(), 409);
  CHECK(body(c.Get("/api/programs/" + id + "/snapshot")).at("result").at("status") == "running");
  post(c, "/api/clock/advance", {{"to", 18 * 3'600'000}});
  CHECK(body(c.Get("/api/clock")).at("result").at("now") == 18 * 3'600'000);
  post(c, "/api/programs/" + id + "/stop", json::object());

  const auto put = c.Put("/api/programs/" + id, json{{"text", read_data("programs/xmas-tree.tap")}}.dump(),
                         "application/json");
  CHECK(body(put).at("result").at("saved") == false);

  const auto bad = c.Post("/api/check", json{{"text", "program P: switch on the moon"}}.dump(), "application/json");
  CHECK(body(bad).at("result").at("status") == "error");
  const auto syntax = c.Post("/api/programs", json{{"text", "program P: switch on the moon"}}.dump(), "application/json");
  REQUIRE(syntax);
  CHECK(syntax->status == 400);
  CHECK(body(syntax).at("error").at("code") == "syntax-error");
  CHECK(body(syntax).at("error").at("details").contains("expected"));

  CHECK(body(c.Get("/api/grammar")).at("result").at("terminals").size() > 0);
  CHECK(body(c.Get("/api/depgraph?format=dot")).at("result").at("dot").get<std::string>().find("digraph") == 0);
  CHECK(body(c.Get("/api/depgraph?annotated=1")).at("result").at("annotated") == true);
  CHECK(body(c.Get("/api/traces?limit=2")).at("result").at("entries").size() == 2);
  CHECK(body(c.Get("/api/scenario")).at("result").at("loaded") == false);

  const auto gone = c.Delete("/api/programs/" + id);
  REQUIRE(gone);
  CHECK(gone->status == 200);
  const auto unreg = c.Delete("/api/devices/l1");
  REQUIRE(unreg);
  CHECK(body(unreg).at("result").at("kind") == "unregistered");
}

TEST_CASE("command envelope and malformed bodies") {
  Server s;
  auto c = s.client();
  const auto r = c.Post("/api/command", json{{"id", "q1"}, {"verb", "clock.get"}}.dump(), "application/json");
  CHECK(body(r).at("id") == "q1");
  CHECK(body(r).at("result").at("mode") == "simulated");
  const auto junk = c.Post("/api/command", "{not json", "application/json");
  REQUIRE(junk);
  CHECK(junk->status == 400);
  CHECK(body(junk).at("error").at("code") == "malformed-document");
  const auto arr = c.Post("/api/devices", "[1,2]", "application/json");
  REQUIRE(arr);
  CHECK(arr->status == 400);
}

TEST_CASE("CORS preflight and headers") {
  Server s;
  auto c = s.client();
  const auto pre = c.Options("/api/devices");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
  CHECK(c.Get("/api/clock")->get_header_value("Access-Control-Allow-Origin") == "*");
}

TEST_CASE("trace export is newline-delimited json") {
  Server s;
  auto c = s.client();
  post(c, "/api/devices", {{"device", {{"id", "l1"}, {"kind", "lamp"}, {"name", "hall-lamp"}}}});
  post(c, "/api/devices/l1/action", {{"action", "switch_on"}});
  const auto r = c.Get("/api/traces/export");
  REQUIRE(r);
  CHECK(r->get_header_value("Content-Type") == "application/x-ndjson");
  std::istringstream in(r->body);
  std::size_t n = 0;
  std::uint64_t last = 0;
  for (std::string line; std::getline(in, line);) {
    const auto e = json::parse(line);
    CHECK(e.at("seq").get<std::uint64_t>() > last);
    last = e.at("seq").get<std::uint64_t>();
    ++n;
  }
  CHECK(n == s.service->trace_log().entries().size());
  const auto red = c.Get("/api/traces/export?redacted=1&suppress=state-change");
  REQUIRE(red);
  CHECK(red->body.find("\"state-change\"") == std::string::npos);
  CHECK(c.Get("/api/traces/export?cursor=zzz")->status == 400);
}

TEST_CASE("server-sent events carry trace, registry and clock messages") {
  Server s;
  std::mutex m;
  std::string received;
  std::atomic<bool> done{false};
  std::thread reader([&] {
    auto c = s.client();
    c.Get("/api/events", [&](const char* data, std::size_t len) {
      std::lock_guard lk(m);
      received.append(data, len);
      return !done.load();
    });
  });
  auto c = s.client();
  // Wait until the stream is attached: each registration pushes frames.
  for (int i = 0; i < 100; ++i) {
    {
      std::lock_guard lk(m);
      if (received.find("event: registry") != std::string::npos) break;
    }
    post(c, "/api/devices", {{"device", {{"id", "d" + std::to_string(i)}, {"kind", "lamp"}, {"name", "lamp-" + std::to_string(i)}}}});
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  post(c, "/api/clock/advance", {{"by", 1000}});
  for (int i = 0; i < 100; ++i) {
    {
      std::lock_guard lk(m);
      if (received.find("event: clock") != std::string::npos) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  done = true;
  // One more push to unblock the reader's callback.
  post(c, "/api/clock/advance", {{"by", 1000}});
  reader.join();

  std::lock_guard lk(m);
  CHECK(received.find("event: trace\ndata: ") != std::string::npos);
  CHECK(received.find("event: registry\ndata: ") != std::string::npos);
  CHECK(received.find("event: clock\ndata: ") != std::string::npos);
  // Every data line is a JSON document; ids increase.
  std::istringstream in(received);
  std::uint64_t last_id = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("data: ", 0) == 0) CHECK_NOTHROW(json::parse(line.substr(6)));
    if (line.rfind("id: ", 0) == 0) {
      const auto id = std::stoull(line.substr(4));
      CHECK(id > last_id);
      last_id = id;
    }
  }
}
