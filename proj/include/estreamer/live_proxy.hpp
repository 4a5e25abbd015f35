#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "estreamer/shaper.hpp"

// HTTP forward proxy that releases origin streams to clients in shaped
// bursts. Send-side backpressure stands in for the zero window: a write that
// makes no progress for `zwa_block_ms` counts as one.

namespace estreamer::proxy {

struct ProxyConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 0;  ///< 0 picks a free port
  /// host:port used for requests that carry a plain path.
  std::optional<std::string> origin;
  std::string profile_tag;
  double fast_start_seconds = 30.0;
  double granularity_s = 1.0;
  double margin_s = 2.0;
  std::optional<double> rate_override_bps;
  std::string log_path;
  double zwa_block_ms = 500.0;
  /// Kernel send buffer per client socket; 0 keeps the system default.
  int send_buffer_bytes = 64 * 1024;

  /// Throws ConfigError.
  void validate() const;
};

struct SessionSnapshot {
  std::uint64_t id = 0;
  std::string target;
  double bitrate_bps = 0.0;
  shaping::ShaperState state;
  std::vector<shaping::BurstLogRow> log;
  double bytes_sent = 0.0;
  bool finished = false;
  std::string error;
};

/// Parses `host:port` (port defaults to 80). Throws ConfigError.
std::pair<std::string, int> split_host_port(const std::string& s);

class LiveProxy {
 public:
  explicit LiveProxy(ProxyConfig config);
  ~LiveProxy();
  LiveProxy(const LiveProxy&) = delete;
  LiveProxy& operator=(const LiveProxy&) = delete;

  /// Binds and starts accepting in the background. Returns the bound port.
  int start();
  /// Stops accepting, tears down open sessions and flushes the log.
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

  int port() const { return port_; }
  std::vector<SessionSnapshot> sessions() const;

 private:
  struct Session;
  struct StreamContext;
  void accept_loop();
  void serve(std::shared_ptr<Session> s, int fd);
  void serve_stream(const std::shared_ptr<Session>& s, int fd, StreamContext& ctx);
  void append_log(const std::string& rows);

  ProxyConfig config_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Session>> sessions_;
  std::vector<std::thread> workers_;
  std::mutex log_mu_;
  bool log_header_written_ = false;
  std::uint64_t next_id_ = 1;
};

}  // namespace estreamer::proxy
