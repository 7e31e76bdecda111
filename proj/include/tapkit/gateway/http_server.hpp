#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tapkit/gateway/service.hpp"

namespace httplib {
class Server;
}

namespace tapkit::gateway {

/// HTTP status for an error code in reply envelopes.
int http_status(std::string_view error_code);

/// JSON-over-HTTP front end plus the server-sent event stream at
/// /api/events. See docs/api.md for the routes.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free one. Returns the bound port. Throws Io.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  /// bind() then serve() on a background thread.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Stream;
  void routes();

  Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex streams_mutex_;
  std::vector<std::weak_ptr<Stream>> streams_;
};

}  // namespace tapkit::gateway
