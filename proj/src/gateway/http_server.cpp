#include "tapkit/gateway/http_server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace tapkit::gateway {

namespace {

nlohmann::json payload_of(const httplib::Request& req) {
  nlohmann::json p = nlohmann::json::object();
  if (!req.body.empty()) {
    p = nlohmann::json::parse(req.body);
    if (!p.is_object()) throw Error(ErrorCode::kMalformedDocument, "request body must be a JSON object");
  }
  for (const auto& [k, v] : req.params) {
    if (!p.contains(k)) p[k] = v;
  }
  for (const auto& [k, v] : req.path_params) p[k] = v;
  return p;
}

void reply(httplib::Response& res, const ApiReply& r) {
  res.status = r.ok ? 200 : http_status(r.error_code);
  res.set_content(to_json(r).dump(), "application/json");
}

void bad_request(httplib::Response& res, const std::string& message) {
  ApiReply r;
  r.ok = false;
  r.error_code = std::string(to_string(ErrorCode::kMalformedDocument));
  r.message = message;
  reply(res, r);
}

bool truthy(const nlohmann::json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) return v == "1" || v == "true" || v == "yes";
  if (v.is_number()) return v.get<double>() != 0;
  return false;
}

}  // namespace

int http_status(std::string_view code) {
  static const std::map<std::string_view, int> kStatus = {
      {"unknown-kind", 404},          {"unknown-device", 404},     {"unknown-program", 404},
      {"unknown-variable", 404},      {"already-running", 409},    {"not-running", 409},
      {"duplicate-device", 409},      {"duplicate-name", 409},     {"stale-option", 409},
      {"stale-snapshot", 409},        {"time-reversal", 409},      {"time-regression", 409},
      {"wrong-clock-mode", 409},      {"missing-device", 409},     {"kind-mismatch", 409},
      {"critical-device-denied", 403}, {"io", 500},
  };
  auto it = kStatus.find(code);
  return it == kStatus.end() ? 400 : it->second;
}

struct HttpServer::Stream {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> frames;
  bool closed = false;
};

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  // One route, one verb. `tweak` adjusts the payload before dispatch.
  auto bind_verb = [this](const std::string& verb,
                          std::function<void(nlohmann::json&)> tweak = nullptr) {
    return [this, verb, tweak](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json payload;
      try {
        payload = payload_of(req);
        if (tweak) tweak(payload);
      } catch (const std::exception& e) {
        bad_request(res, e.what());
        return;
      }
      const auto id = req.get_header_value("X-Request-Id");
      reply(res, service_.execute({id, verb, std::move(payload)}));
    };
  };

  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"ok":true})", "application/json");
  });
  s.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
      const auto verb = body.at("verb").get<std::string>();
      reply(res, service_.execute({body.value("id", std::string()), verb,
                                   body.value("payload", nlohmann::json::object())}));
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });

  s.Get("/api/devices", bind_verb("devices.list"));
  s.Post("/api/devices", bind_verb("devices.register"));
  s.Delete("/api/devices/:id", bind_verb("devices.unregister"));
  s.Post("/api/devices/:id/action", bind_verb("devices.action"));
  s.Post("/api/devices/:id/critical", bind_verb("devices.critical"));
  s.Post("/api/devices/:id/events", bind_verb("devices.event"));

  s.Get("/api/programs", bind_verb("programs.list"));
  s.Post("/api/programs", bind_verb("programs.save"));
  s.Get("/api/programs/:id", bind_verb("programs.get"));
  s.Put("/api/programs/:id", bind_verb("programs.save", [](nlohmann::json& p) { p["program_id"] = p["id"]; }));
  s.Delete("/api/programs/:id", bind_verb("programs.delete"));
  s.Post("/api/programs/:id/start", bind_verb("programs.start"));
  s.Post("/api/programs/:id/stop", bind_verb("programs.stop"));
  s.Get("/api/programs/:id/snapshot", bind_verb("programs.snapshot"));
  s.Post("/api/check", bind_verb("programs.check"));

  s.Get("/api/grammar", bind_verb("grammar.get"));
  s.Post("/api/keyboard/inspect", bind_verb("keyboard.inspect"));
  s.Post("/api/keyboard/options", bind_verb("keyboard.options"));
  s.Post("/api/keyboard/apply", bind_verb("keyboard.apply"));
  s.Post("/api/keyboard/delete", bind_verb("keyboard.delete"));

  s.Get("/api/traces", bind_verb("traces.query"));
  s.Get("/api/traces/redacted", bind_verb("traces.redacted"));
  s.Get("/api/traces/export", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      auto p = payload_of(req);
      const bool redacted = p.contains("redacted") && truthy(p.at("redacted"));
      res.set_content(service_.export_traces(p, redacted), "application/x-ndjson");
    } catch (const Error& e) {
      ApiReply r;
      r.ok = false;
      r.error_code = std::string(to_string(e.code()));
      r.message = e.what();
      reply(res, r);
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });

  s.Get("/api/depgraph", bind_verb("depgraph.get", [](nlohmann::json& p) {
          if (p.contains("annotated")) p["annotated"] = truthy(p["annotated"]);
        }));

  s.Get("/api/clock", bind_verb("clock.get"));
  s.Post("/api/clock", bind_verb("clock.set"));
  s.Post("/api/clock/advance", bind_verb("clock.advance"));

  s.Get("/api/scenario", bind_verb("scenario.get"));
  s.Post("/api/scenario", bind_verb("scenario.load"));
  s.Post("/api/scenario/play", bind_verb("scenario.play"));
  s.Post("/api/scenario/step", bind_verb("scenario.step"));

  s.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
    auto stream = std::make_shared<Stream>();
    {
      std::lock_guard lk(streams_mutex_);
      streams_.push_back(stream);
    }
    auto frame = [](const StreamMessage& m) {
      return "id: " + std::to_string(m.id) + "\nevent: " + m.type + "\ndata: " + m.data.dump() + "\n\n";
    };
    const auto token = service_.subscribe([stream, frame](const StreamMessage& m) {
      std::lock_guard lk(stream->mutex);
      stream->frames.push_back(frame(m));
      stream->cv.notify_one();
    });
    // Replay of the log after a known trace seq; clients drop duplicates by seq.
    if (req.has_param("since")) {
      std::string backlog;
      try {
        const auto since = std::stoull(req.get_param_value("since"));
        for (const auto& e : service_.trace_log().entries()) {
          if (e.seq > since) backlog += "event: trace\ndata: " + trace::to_json(e).dump() + "\n\n";
        }
      } catch (const std::exception&) {
      }
      std::lock_guard lk(stream->mutex);
      stream->frames.push_front(std::move(backlog));
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, stream](std::size_t, httplib::DataSink& sink) {
          std::unique_lock lk(stream->mutex);
          stream->cv.wait_for(lk, std::chrono::seconds(1),
                              [&] { return !stream->frames.empty() || stream->closed || stopping_; });
          if (stream->closed || stopping_) {
            sink.done();
            return false;
          }
          if (stream->frames.empty()) {
            static const std::string kPing = ": ping\n\n";
            return sink.write(kPing.data(), kPing.size());
          }
          while (!stream->frames.empty()) {
            auto f = std::move(stream->frames.front());
            stream->frames.pop_front();
            if (!f.empty() && !sink.write(f.data(), f.size())) return false;
          }
          return true;
        },
        [this, token](bool) { service_.unsubscribe(token); });
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      bad_request(res, e.what());
    }
  });
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  return port_;
}

void HttpServer::serve() { server_->listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { serve(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (stopping_.exchange(true)) return;
  {
    std::lock_guard lk(streams_mutex_);
    for (auto& w : streams_) {
      if (auto s = w.lock()) {
        std::lock_guard slk(s->mutex);
        s->closed = true;
        s->cv.notify_all();
      }
    }
  }
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace tapkit::gateway
