#include "estreamer/live_proxy.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>

#include "estreamer/errors.hpp"
#include "estreamer/media_http.hpp"

namespace estreamer::proxy {

namespace {

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0, Clock::time_point t) { return std::chrono::duration<double>(t - t0).count(); }

struct ClientRequest {
  std::string method;
  std::string target;
  std::vector<std::pair<std::string, std::string>> headers;

  std::optional<std::string> header(std::string_view name) const {
    for (const auto& [k, v] : headers) {
      if (k.size() == name.size() &&
          std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); })) {
        return v;
      }
    }
    return std::nullopt;
  }
};

std::optional<ClientRequest> read_request(int fd, const std::atomic<bool>& stopping) {
  std::string buf;
  char tmp[4096];
  while (buf.find("\r\n\r\n") == std::string::npos) {
    if (buf.size() > 64 * 1024 || stopping) return std::nullopt;
    pollfd p{fd, POLLIN, 0};
    const int pr = ::poll(&p, 1, 100);
    if (pr < 0 && errno != EINTR) return std::nullopt;
    if (pr <= 0) continue;
    const ssize_t n = ::recv(fd, tmp, sizeof tmp, 0);
    if (n <= 0) return std::nullopt;
    buf.append(tmp, static_cast<std::size_t>(n));
  }
  ClientRequest r;
  std::size_t pos = buf.find("\r\n");
  const std::string line = buf.substr(0, pos);
  const auto sp1 = line.find(' ');
  const auto sp2 = line.find(' ', sp1 == std::string::npos ? sp1 : sp1 + 1);
  if (sp1 == std::string::npos || sp2 == std::string::npos) return std::nullopt;
  r.method = line.substr(0, sp1);
  r.target = line.substr(sp1 + 1, sp2 - sp1 - 1);
  pos += 2;
  while (true) {
    const auto end = buf.find("\r\n", pos);
    if (end == std::string::npos || end == pos) break;
    const std::string h = buf.substr(pos, end - pos);
    const auto colon = h.find(':');
    if (colon != std::string::npos) {
      std::size_t v = colon + 1;
      while (v < h.size() && h[v] == ' ') ++v;
      r.headers.emplace_back(h.substr(0, colon), h.substr(v));
    }
    pos = end + 2;
  }
  return r;
}

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
      pollfd p{fd, POLLOUT, 0};
      ::poll(&p, 1, 100);
    } else {
      return false;
    }
  }
  return true;
}

/// Origin bytes not yet released to the client.
class OriginBuffer {
 public:
  void headers(int status, httplib::Headers h) {
    std::lock_guard lk(mu_);
    status_ = status;
    headers_ = std::move(h);
    have_headers_ = true;
    cv_.notify_all();
  }
  void append(const char* data, std::size_t n) {
    std::lock_guard lk(mu_);
    data_.append(data, n);
    cv_.notify_all();
  }
  void finish(std::string error = {}) {
    std::lock_guard lk(mu_);
    done_ = true;
    if (!have_headers_ && error.empty()) error = "origin closed without a response";
    error_ = std::move(error);
    cv_.notify_all();
  }
  void cancel() {
    std::lock_guard lk(mu_);
    cancelled_ = true;
    cv_.notify_all();
  }
  bool cancelled() const {
    std::lock_guard lk(mu_);
    return cancelled_;
  }

  /// Waits for the response head; false when the origin failed.
  bool wait_headers(int& status, httplib::Headers& h, std::string& error) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return have_headers_ || done_ || cancelled_; });
    if (!have_headers_) {
      error = error_.empty() ? "cancelled" : error_;
      return false;
    }
    status = status_;
    h = headers_;
    return true;
  }

  /// Copies up to `max` unsent bytes, waiting for the origin when none are
  /// buffered. Empty once the origin is exhausted.
  std::string take(std::size_t max, bool& waited) {
    std::unique_lock lk(mu_);
    waited = data_.size() <= off_ && !done_ && !cancelled_;
    cv_.wait(lk, [&] { return data_.size() > off_ || done_ || cancelled_; });
    const std::size_t n = std::min(max, data_.size() - off_);
    std::string out = data_.substr(off_, n);
    off_ += n;
    if (off_ > (4u << 20)) {
      data_.erase(0, off_);
      off_ = 0;
    }
    return out;
  }
  /// Puts back the tail of the last take() that was not written.
  void unread(std::size_t n) {
    std::lock_guard lk(mu_);
    off_ -= n;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int status_ = 0;
  httplib::Headers headers_;
  bool have_headers_ = false;
  std::string data_;
  std::size_t off_ = 0;
  bool done_ = false;
  bool cancelled_ = false;
  std::string error_;
};

struct BurstWrite {
  double sent = 0.0;
  bool zwa = false;
  double sent_at_zwa = 0.0;
  Clock::time_point first;
  Clock::time_point last;
  Clock::time_point zwa_at;
  bool client_gone = false;
  bool origin_exhausted = false;
};

// A full client buffer drains at the playback rate. The socket counts as
// saturated once a whole window of blocked writes moved no more than that.
constexpr double kDrainFactor = 1.25;

BurstWrite write_burst(int fd, OriginBuffer& origin, double bytes, bool stop_on_zwa, double rate_bps, double window_s,
                       const std::atomic<bool>& stopping) {
  BurstWrite w;
  std::deque<std::pair<Clock::time_point, double>> samples;
  std::optional<Clock::time_point> last_block;
  std::string chunk;
  std::size_t off = 0;
  bool started = false;
  const auto window = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(window_s));

  while (w.sent < bytes - 0.5) {
    if (stopping) {
      w.client_gone = true;
      break;
    }
    if (off == chunk.size()) {
      bool waited = false;
      chunk = origin.take(static_cast<std::size_t>(std::min(64.0 * 1024, bytes - w.sent)), waited);
      off = 0;
      if (chunk.empty()) {
        w.origin_exhausted = true;
        break;
      }
      if (waited) {
        // Origin-limited stretches say nothing about the client.
        samples.clear();
        last_block.reset();
      }
    }
    const ssize_t n = ::send(fd, chunk.data() + off, chunk.size() - off, MSG_NOSIGNAL);
    auto now = Clock::now();
    if (n > 0) {
      if (!started) {
        w.first = now;
        started = true;
      }
      off += static_cast<std::size_t>(n);
      w.sent += static_cast<double>(n);
      w.last = now;
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      last_block = now;
      pollfd p{fd, POLLOUT, 0};
      ::poll(&p, 1, 50);
      now = Clock::now();
    } else if (n < 0 && errno == EINTR) {
      continue;
    } else {
      w.client_gone = true;
      break;
    }
    samples.emplace_back(now, w.sent);
    while (samples.size() > 2 && samples[1].first <= now - window) samples.pop_front();
    if (!w.zwa && last_block && samples.front().first <= now - window && started && w.first <= now - window) {
      const double moved = w.sent - samples.front().second;
      const double span = secs_since(samples.front().first, now);
      if (moved * 8.0 <= kDrainFactor * rate_bps * span) {
        w.zwa = true;
        w.sent_at_zwa = samples.front().second;
        w.zwa_at = samples.front().first;
        if (stop_on_zwa) break;
      }
    }
  }
  if (off < chunk.size()) origin.unread(chunk.size() - off);
  if (!started) w.first = w.last = Clock::now();
  return w;
}

}  // namespace

std::pair<std::string, int> split_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (s.empty() || colon == 0) throw ConfigError(fmt::format("'{}' is not host:port", s));
  if (colon == std::string::npos) return {s, 80};
  try {
    const int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range(s);
    return {s.substr(0, colon), port};
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("'{}' has no valid port", s));
  }
}

void ProxyConfig::validate() const {
  if (!(fast_start_seconds > 0.0)) throw ConfigError("fast start seconds must be > 0");
  if (!(granularity_s > 0.0)) throw ConfigError("granularity must be > 0");
  if (!(margin_s >= 0.0)) throw ConfigError("margin must be >= 0");
  if (!(zwa_block_ms > 0.0)) throw ConfigError("backpressure threshold must be > 0");
  if (rate_override_bps && !(*rate_override_bps > 0.0)) throw ConfigError("rate override must be > 0");
  if (listen_port < 0 || listen_port > 65535) throw ConfigError("listen port out of range");
  if (origin) split_host_port(*origin);
}

struct LiveProxy::StreamContext {
  OriginBuffer& origin;
  const httplib::Headers& headers;
  double rate_bps;
};

struct LiveProxy::Session {
  mutable std::mutex mu;
  SessionSnapshot snap;
  int fd = -1;
  std::shared_ptr<OriginBuffer> origin;
};

LiveProxy::LiveProxy(ProxyConfig config) : config_(std::move(config)) { config_.validate(); }

LiveProxy::~LiveProxy() { stop(); }

int LiveProxy::start() {
  if (listen_fd_ >= 0) return port_;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(fmt::format("socket: {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(config_.listen_port));
  if (::inet_pton(AF_INET, config_.listen_host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ConfigError(fmt::format("cannot listen on '{}'", config_.listen_host));
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(fmt::format("bind {}:{}: {}", config_.listen_host, config_.listen_port, err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("proxy listening on {}:{}", config_.listen_host, port_);
  return port_;
}

void LiveProxy::stop() {
  if (listen_fd_ < 0 && !acceptor_.joinable()) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(mu_);
    for (auto& s : sessions_) {
      std::lock_guard sl(s->mu);
      if (s->origin) s->origin->cancel();
      if (s->fd >= 0) ::shutdown(s->fd, SHUT_RDWR);
    }
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void LiveProxy::wait() {
  while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

std::vector<SessionSnapshot> LiveProxy::sessions() const {
  std::vector<SessionSnapshot> out;
  std::lock_guard lk(mu_);
  for (const auto& s : sessions_) {
    std::lock_guard sl(s->mu);
    out.push_back(s->snap);
  }
  return out;
}

void LiveProxy::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    auto s = std::make_shared<Session>();
    std::lock_guard lk(mu_);
    s->snap.id = next_id_++;
    s->fd = fd;
    sessions_.push_back(s);
    workers_.emplace_back([this, s, fd] { serve(s, fd); });
  }
}

void LiveProxy::append_log(const std::string& rows) {
  if (config_.log_path.empty()) return;
  std::lock_guard lk(log_mu_);
  std::ofstream f(config_.log_path, std::ios::app);
  if (!log_header_written_) {
    f << "session," << shaping::burst_log_csv({});
    log_header_written_ = true;
  }
  f << rows;
}

void LiveProxy::serve(std::shared_ptr<Session> s, int fd) {
  auto fail = [&](const std::string& why, int status) {
    spdlog::warn("session {}: {}", s->snap.id, why);
    if (status > 0) {
      send_all(fd, fmt::format("HTTP/1.1 {} Bad Gateway\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}", status,
                               why.size(), why));
    }
    std::lock_guard lk(s->mu);
    s->snap.error = why;
    s->snap.finished = true;
  };

  const auto req = read_request(fd, stopping_);
  if (!req) {
    fail("no request", 0);
    ::close(fd);
    return;
  }
  std::string host_port;
  std::string path = req->target;
  if (path.rfind("http://", 0) == 0) {
    const auto slash = path.find('/', 7);
    host_port = path.substr(7, slash == std::string::npos ? std::string::npos : slash - 7);
    path = slash == std::string::npos ? "/" : path.substr(slash);
  } else if (config_.origin) {
    host_port = *config_.origin;
  } else if (auto h = req->header("Host")) {
    host_port = *h;
  }
  {
    std::lock_guard lk(s->mu);
    s->snap.target = host_port + path;
  }
  std::pair<std::string, int> origin_addr;
  try {
    origin_addr = split_host_port(host_port);
  } catch (const ConfigError& e) {
    fail(e.what(), 400);
    ::close(fd);
    return;
  }

  auto origin = std::make_shared<OriginBuffer>();
  {
    std::lock_guard lk(s->mu);
    s->origin = origin;
  }
  httplib::Headers fwd;
  for (const char* name : {"Range", "X-Device", "Accept"}) {
    if (auto v = req->header(name)) fwd.emplace(name, *v);
  }
  std::thread fetch([origin, origin_addr, path, fwd] {
    httplib::Client cli(origin_addr.first, origin_addr.second);
    cli.set_connection_timeout(5);
    cli.set_read_timeout(30);
    auto res = cli.Get(
        path, fwd,
        [&](const httplib::Response& r) {
          origin->headers(r.status, r.headers);
          return !origin->cancelled();
        },
        [&](const char* data, std::size_t n) {
          origin->append(data, n);
          return !origin->cancelled();
        });
    origin->finish(res ? std::string() : httplib::to_string(res.error()));
  });

  int status = 0;
  httplib::Headers oh;
  std::string err;
  if (!origin->wait_headers(status, oh, err)) {
    fail(fmt::format("origin {}: {}", host_port, err), 502);
  } else if (status < 200 || status >= 300) {
    fail(fmt::format("origin answered {}", status), 502);
  } else {
    // Encoding rate: stream info, then the override, then length over duration.
    std::optional<double> rate;
    auto get = [&](const char* k) -> std::optional<std::string> {
      auto it = oh.find(k);
      if (it == oh.end()) return std::nullopt;
      return it->second;
    };
    if (auto info = get("X-Stream-Info")) {
      try {
        rate = http::StreamInfo::parse(*info).bitrate_bps();
      } catch (const ProtocolError&) {
      }
    }
    if (!rate) rate = config_.rate_override_bps;
    if (!rate) {
      auto len = get("Content-Length");
      auto dur = get("X-Content-Duration");
      if (len && dur && std::stod(*dur) > 0) rate = std::stod(*len) * 8.0 / std::stod(*dur);
    }
    if (!rate) {
      fail("cannot determine the encoding rate", 502);
    } else {
      StreamContext ctx{*origin, oh, *rate};
      serve_stream(s, fd, ctx);
    }
  }
  origin->cancel();
  fetch.join();
  {
    std::lock_guard lk(s->mu);
    s->fd = -1;
  }
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

void LiveProxy::serve_stream(const std::shared_ptr<Session>& s, int fd, StreamContext& ctx) {
  auto get = [&](const char* k) -> std::optional<std::string> {
    auto it = ctx.headers.find(k);
    if (it == ctx.headers.end()) return std::nullopt;
    return it->second;
  };
  std::string head = "HTTP/1.1 200 OK\r\n";
  for (const char* k : {"Content-Type", "Content-Length", "Content-Range", "X-Stream-Info"}) {
    if (auto v = get(k)) head += fmt::format("{}: {}\r\n", k, *v);
  }
  head += "Connection: close\r\n\r\n";
  if (config_.send_buffer_bytes > 0) {
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &config_.send_buffer_bytes, sizeof config_.send_buffer_bytes);
  }
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
  if (!send_all(fd, head)) {
    std::lock_guard lk(s->mu);
    s->snap.error = "client disconnected";
    s->snap.finished = true;
    return;
  }

  double duration_s = 1e9;
  if (auto info = get("X-Stream-Info")) {
    try {
      duration_s = http::StreamInfo::parse(*info).duration_s().value_or(duration_s);
    } catch (const ProtocolError&) {
    }
  }
  shaping::StreamSpec spec{{{ctx.rate_bps, 0.0, 0, 0}}, duration_s, config_.fast_start_seconds};
  shaping::Shaper sh(spec, {config_.granularity_s, 2.0, false});
  {
    std::lock_guard lk(s->mu);
    s->snap.bitrate_bps = ctx.rate_bps;
  }
  spdlog::info("session {}: {} at {} bit/s", s->snap.id, s->snap.target, ctx.rate_bps);

  const auto t0 = Clock::now();
  double content_s = 0.0;
  double total = 0.0;
  std::string error;
  while (!stopping_) {
    const auto plan = sh.next_burst();
    if (plan.phase != shaping::Phase::FastStart && !plan.continuous) {
      // Just in time: when the client should be down to the margin.
      const auto due = t0 + std::chrono::duration_cast<Clock::duration>(
                                std::chrono::duration<double>(std::max(0.0, content_s - config_.margin_s)));
      while (!stopping_ && Clock::now() < due) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    const auto w = write_burst(fd, ctx.origin, plan.bytes, plan.stop_on_zwa, ctx.rate_bps,
                               config_.zwa_block_ms / 1000.0, stopping_);
    if (w.client_gone && !stopping_) error = "client disconnected";
    if (w.sent <= 0.0) break;
    total += w.sent;
    content_s += w.sent * 8.0 / ctx.rate_bps;

    profiling::BurstObservation o;
    o.burst_id = plan.burst_id;
    o.acked_bytes = w.sent;
    o.complete = w.sent >= plan.bytes - 0.5;
    o.zwa_seen = w.zwa;
    if (w.zwa) o.sent_bytes_at_first_zwa = w.sent_at_zwa;
    o.last_ack_s = secs_since(w.first, w.last);
    o.t_bd_s = o.last_ack_s;
    const double span = secs_since(w.first, w.zwa ? w.zwa_at : w.last);
    const double moved = w.zwa ? w.sent_at_zwa : w.sent;
    if (span > 0.0) o.est_bandwidth_bps = moved * 8.0 / span;
    sh.on_burst_feedback(o);
    sh.on_bandwidth_change(o.est_bandwidth_bps);

    std::string row = shaping::burst_log_csv({sh.log().back()});
    row = fmt::format("{},{}", s->snap.id, row.substr(row.find('\n') + 1));
    append_log(row);
    {
      std::lock_guard lk(s->mu);
      s->snap.state = sh.state();
      s->snap.log = sh.log();
      s->snap.bytes_sent = total;
    }
    spdlog::debug("session {}: burst {} {} bytes, zwa {}, est {:.0f} bit/s, phase {}", s->snap.id, plan.burst_id, w.sent,
                  w.zwa, o.est_bandwidth_bps, shaping::to_string(sh.state().phase));
    if (w.client_gone || w.origin_exhausted) break;
  }
  std::lock_guard lk(s->mu);
  s->snap.error = error;
  s->snap.finished = true;
}

}  // namespace estreamer::proxy
