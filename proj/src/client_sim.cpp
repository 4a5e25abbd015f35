#include "estreamer/client_sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "estreamer/errors.hpp"

namespace estreamer::client {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kByteEps = 1e-6;
constexpr double kTimeEps = 1e-9;

}  // namespace

BandwidthTrace::BandwidthTrace(double bps) : BandwidthTrace(std::vector<std::pair<double, double>>{{0.0, bps}}) {}

BandwidthTrace::BandwidthTrace(std::vector<std::pair<double, double>> steps) : steps_(std::move(steps)) {
  if (steps_.empty() || steps_.front().first != 0.0) throw ConfigError("bandwidth trace must start at t = 0");
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (!(steps_[i].second >= 0.0) || !std::isfinite(steps_[i].second)) {
      throw ConfigError(fmt::format("bandwidth must be finite and >= 0 (got {})", steps_[i].second));
    }
    if (i > 0 && !(steps_[i].first >= steps_[i - 1].first)) {
      throw ConfigError("bandwidth trace times must not decrease");
    }
  }
}

double BandwidthTrace::rate_at(double t) const {
  if (steps_.empty()) return 0.0;
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                             [](double v, const std::pair<double, double>& s) { return v < s.first; });
  if (it == steps_.begin()) return steps_.front().second;
  return std::prev(it)->second;
}

double BandwidthTrace::next_change_after(double t) const {
  for (const auto& s : steps_) {
    if (s.first > t) return s.first;
  }
  return kInf;
}

ClientSim::ClientSim(ClientConfig config) : config_(std::move(config)) {
  if (!(config_.buffer_capacity_bytes > 0.0)) throw ConfigError("client buffer capacity must be > 0");
  if (!(config_.segment_bytes > 0.0)) throw ConfigError("segment size must be > 0");
  if (!(config_.startup_threshold_s >= 0.0)) throw ConfigError("startup threshold must be >= 0");
}

double ClientSim::drain_rate() const {
  if (!playing_ || chunks_.empty()) return 0.0;
  return chunks_.front().rate_bps;
}

double ClientSim::buffered_content_s() const {
  double s = 0.0;
  for (const auto& c : chunks_) s += c.bytes * 8.0 / c.rate_bps;
  return s;
}

void ClientSim::try_start() {
  if (playing_ || finished_ || occupancy_ <= kByteEps) return;
  const bool enough = buffered_content_s() >= config_.startup_threshold_s - kTimeEps;
  const bool full = occupancy_ >= config_.buffer_capacity_bytes - kByteEps;
  if (!(enough || full || eos_)) return;
  playing_ = true;
  if (started_at_ < 0.0) started_at_ = now_;
  if (stall_since_ >= 0.0) {
    if (now_ > stall_since_) stalls_.push_back({stall_since_, now_});
    stall_since_ = -1.0;
  }
}

void ClientSim::on_empty() {
  occupancy_ = 0.0;
  chunks_.clear();
  playing_ = false;
  if (eos_) {
    finished_ = true;
  } else {
    stall_since_ = now_;
  }
}

// Time until the head chunk runs out while `fill_rate_bps` flows into the tail.
double ClientSim::next_drain_event(double fill_rate_bps) const {
  if (!playing_ || chunks_.empty()) return kInf;
  const Chunk& head = chunks_.front();
  if (chunks_.size() == 1) {
    const double net = fill_rate_bps - head.rate_bps;
    return net < 0.0 ? head.bytes * 8.0 / -net : kInf;
  }
  return head.bytes * 8.0 / head.rate_bps;
}

void ClientSim::drain_for(double dt, double fill_bytes_into_tail) {
  if (fill_bytes_into_tail > 0.0) {
    chunks_.back().bytes += fill_bytes_into_tail;
    occupancy_ += fill_bytes_into_tail;
    delivered_ += fill_bytes_into_tail;
  }
  if (playing_ && !chunks_.empty()) {
    Chunk& head = chunks_.front();
    const double d = std::min(head.bytes, head.rate_bps * dt / 8.0);
    head.bytes -= d;
    occupancy_ -= d;
    drained_ += d;
    played_s_ += d * 8.0 / head.rate_bps;
  }
  now_ += dt;
  occupancy_ = std::clamp(occupancy_, 0.0, config_.buffer_capacity_bytes);
}

void ClientSim::advance(double to_s) {
  if (to_s < now_ - kTimeEps) throw OrderingError(fmt::format("cannot advance to {} s, clock is at {} s", to_s, now_));
  while (now_ < to_s) {
    if (!playing_ || chunks_.empty()) {
      now_ = to_s;
      break;
    }
    const double dt = std::min(to_s - now_, next_drain_event(0.0));
    drain_for(dt, 0.0);
    if (chunks_.front().bytes <= kByteEps) {
      occupancy_ -= chunks_.front().bytes;
      chunks_.pop_front();
      if (chunks_.empty() || occupancy_ <= kByteEps) on_empty();
    }
  }
  now_ = std::max(now_, to_s);
}

void ClientSim::end_of_stream() {
  eos_ = true;
  if (occupancy_ <= kByteEps && !finished_) {
    finished_ = true;
    playing_ = false;
    stall_since_ = -1.0;
  }
  try_start();
}

DeliveryResult ClientSim::deliver(double bytes, double at_rate_bps, double start_s, double content_rate_bps,
                                  bool stop_on_zwa) {
  if (start_s < now_ - kTimeEps) {
    throw OrderingError(fmt::format("delivery at {} s is in the past (clock at {} s)", start_s, now_));
  }
  if (!(bytes >= 0.0) || !(at_rate_bps > 0.0) || !(content_rate_bps > 0.0)) {
    throw DomainError("delivery needs bytes >= 0 and positive rates");
  }
  if (eos_) throw PreconditionError("delivery after end of stream");
  advance(start_s);

  DeliveryResult r;
  r.requested_bytes = bytes;
  r.start_s = now_;
  r.end_s = now_;
  if (bytes <= 0.0) return r;

  if (chunks_.empty() || chunks_.back().rate_bps != content_rate_bps) chunks_.push_back({0.0, content_rate_bps});

  const double cap = config_.buffer_capacity_bytes;
  const double seg = config_.segment_bytes;
  double sent = 0.0;
  double next_ack = std::min(seg, bytes);
  bool was_full = false;

  auto emit_ack = [&](double window) {
    if (!r.acks.empty() && r.acks.back().time_s == now_ && r.acks.back().cum_ack_bytes == delivered_) {
      r.acks.back().advertised_window_bytes = std::min(r.acks.back().advertised_window_bytes, window);
      return;
    }
    r.acks.push_back({now_, delivered_, window});
  };
  auto add_span = [&](double t0, double t1, double b) {
    if (!(t1 > t0)) return;
    if (!r.spans.empty() && r.spans.back().end_s == t0) {
      auto& last = r.spans.back();
      const double last_rate = last.bytes / (last.end_s - last.start_s);
      if (std::abs(last_rate - b / (t1 - t0)) <= 1e-9 * last_rate) {
        last.end_s = t1;
        last.bytes += b;
        return;
      }
    }
    r.spans.push_back({t0, t1, b});
  };

  while (bytes - sent > kByteEps) {
    try_start();
    const double link = std::min(at_rate_bps, config_.link.rate_at(now_));
    const double link_change = config_.link.next_change_after(now_);
    const bool full = occupancy_ >= cap - kByteEps;
    const double drain = drain_rate();
    const double eff = full ? std::min(link, drain) : link;
    if (!(eff > 0.0)) {
      if (link_change == kInf) throw PreconditionError(fmt::format("link stalls forever at {} s", now_));
      advance(link_change);
      continue;
    }
    double dt = (bytes - sent) * 8.0 / eff;
    dt = std::min(dt, link_change - now_);
    dt = std::min(dt, (next_ack - sent) * 8.0 / eff);
    const double net = eff - drain;
    if (!full && net > 0.0) dt = std::min(dt, (cap - occupancy_) * 8.0 / net);
    dt = std::min(dt, next_drain_event(eff));
    if (!playing_ && !finished_) {
      const double need = config_.startup_threshold_s - buffered_content_s();
      if (need > 0.0) dt = std::min(dt, need * content_rate_bps / eff);
    }
    dt = std::max(dt, 0.0);

    const double t0 = now_;
    const double fill = std::min(bytes - sent, eff * dt / 8.0);
    drain_for(dt, fill);
    sent += fill;
    add_span(t0, now_, fill);

    if (full) occupancy_ = cap;
    if (sent >= next_ack - kByteEps) {
      emit_ack(cap - occupancy_ < 0.5 ? 0.0 : cap - occupancy_);
      next_ack = std::min(next_ack + seg, bytes);
    }
    if (!was_full && occupancy_ >= cap - kByteEps) {
      occupancy_ = cap;
      emit_ack(0.0);
      if (!r.zwa) {
        r.zwa = true;
        r.delivered_at_first_zwa = sent;
        r.first_zwa_s = now_;
      }
      if (stop_on_zwa) break;
    }
    was_full = occupancy_ >= cap - kByteEps;

    if (playing_ && !chunks_.empty() && chunks_.front().bytes <= kByteEps) {
      if (chunks_.size() > 1) {
        occupancy_ -= chunks_.front().bytes;
        chunks_.pop_front();
      } else if (occupancy_ <= kByteEps) {
        on_empty();
        chunks_.push_back({0.0, content_rate_bps});
      }
    }
  }
  if (r.acks.empty() || r.acks.back().cum_ack_bytes < delivered_) {
    emit_ack(cap - occupancy_ < 0.5 ? 0.0 : cap - occupancy_);
  }
  // Drop an empty tail chunk left by an abort right after it was opened.
  if (!chunks_.empty() && chunks_.back().bytes <= 0.0 && chunks_.size() > 1) chunks_.pop_back();
  try_start();
  r.delivered_bytes = sent;
  r.end_s = now_;
  return r;
}

std::string ClientSim::stall_csv() const {
  std::string out = "start_s,end_s\n";
  for (const auto& s : stalls_) out += fmt::format("{},{}\n", s.start_s, s.end_s);
  return out;
}

}  // namespace estreamer::client
