#include "estreamer/profiler.hpp"

#include <fmt/format.h>

#include "estreamer/errors.hpp"

namespace estreamer::profiling {

double estimate_bandwidth(double burst_bytes, double t_bd_s) {
  if (!(t_bd_s > 0.0)) throw DomainError(fmt::format("burst duration must be > 0 (got {})", t_bd_s));
  return burst_bytes * 8.0 / t_bd_s;
}

void Profiler::begin_burst(std::uint64_t id, double start_seq_bytes, double size_bytes, double send_start_s) {
  if (!(size_bytes > 0.0)) throw DomainError("burst size must be > 0");
  open_ = true;
  id_ = id;
  start_seq_ = start_seq_bytes;
  size_ = size_bytes;
  send_start_s_ = send_start_s;
  last_cum_ = start_seq_bytes;
  any_ = false;
  zwa_ = false;
}

std::optional<BurstObservation> Profiler::ingest(const AckEvent& ack) {
  if (!open_) {
    ++stale_;
    return std::nullopt;
  }
  if (ack.cum_ack_bytes <= start_seq_) {
    ++stale_;
    return std::nullopt;
  }
  if (ack.cum_ack_bytes < last_cum_) {
    throw FeedError(fmt::format("cumulative ACK went back from {} to {}", last_cum_, ack.cum_ack_bytes));
  }
  if (!any_) {
    any_ = true;
    first_ack_s_ = ack.time_s;
    first_ack_cum_ = ack.cum_ack_bytes;
  }
  last_cum_ = ack.cum_ack_bytes;
  last_ack_s_ = ack.time_s;
  if (!zwa_ && ack.zero_window()) {
    zwa_ = true;
    zwa_s_ = ack.time_s;
    zwa_cum_ = ack.cum_ack_bytes;
  }
  if (last_cum_ >= start_seq_ + size_ - 1e-6) return finish();
  return std::nullopt;
}

BurstObservation Profiler::build() const {
  BurstObservation o;
  o.burst_id = id_;
  o.acked_bytes = last_cum_ - start_seq_;
  o.complete = last_cum_ >= start_seq_ + size_ - 1e-6;
  o.first_ack_s = first_ack_s_;
  o.last_ack_s = last_ack_s_;
  o.t_bd_s = last_ack_s_ - first_ack_s_;
  o.zwa_seen = zwa_;
  if (zwa_) o.sent_bytes_at_first_zwa = zwa_cum_ - start_seq_;

  // Bandwidth over the span before flow control kicked in.
  const double end_s = zwa_ ? zwa_s_ : last_ack_s_;
  const double end_cum = zwa_ ? zwa_cum_ : last_cum_;
  if (end_s > first_ack_s_) {
    o.est_bandwidth_bps = estimate_bandwidth(end_cum - first_ack_cum_, end_s - first_ack_s_);
  } else if (end_s > send_start_s_) {
    o.est_bandwidth_bps = estimate_bandwidth(end_cum - start_seq_, end_s - send_start_s_);
  }
  if (!(o.t_bd_s > 0.0) && last_ack_s_ > send_start_s_) o.t_bd_s = last_ack_s_ - send_start_s_;
  return o;
}

std::optional<BurstObservation> Profiler::finish() {
  if (!open_) return std::nullopt;
  open_ = false;
  if (!any_) return std::nullopt;
  return build();
}

}  // namespace estreamer::profiling
